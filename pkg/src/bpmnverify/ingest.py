"""Reading workflow models from BPMN XML or the line-oriented DSL, and writing the DSL."""

from __future__ import annotations

import enum
import re
import warnings
from pathlib import Path
from xml.parsers import expat

from .errors import ParseError
from .model import FlowNode, NodeKind, SequenceFlow, WorkflowModel

__all__ = [
    "BpmnWarning",
    "SourceFormat",
    "detect_format",
    "emit_dsl",
    "load_model",
    "parse_bpmn_xml",
    "parse_dsl",
]


class BpmnWarning(UserWarning):
    """An XML element was skipped because it is outside the supported subset."""


class SourceFormat(enum.Enum):
    BPMN_XML = "bpmn"
    WORKFLOW_DSL = "wf"


def detect_format(path: str | Path) -> SourceFormat:
    suffix = Path(path).suffix.lower()
    if suffix in (".bpmn", ".xml"):
        return SourceFormat.BPMN_XML
    if suffix == ".wf":
        return SourceFormat.WORKFLOW_DSL
    raise ParseError(f"cannot tell the format of {str(path)!r} from its extension")


def load_model(path: str | Path, fmt: SourceFormat | None = None) -> WorkflowModel:
    path = Path(path)
    fmt = fmt or detect_format(path)
    data = path.read_bytes()
    if fmt is SourceFormat.BPMN_XML:
        return parse_bpmn_xml(data)
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"file is not UTF-8: {exc}") from None
    return parse_dsl(text, default_id=path.stem)


# --------------------------------------------------------------------------- XML

_XML_NODE_KINDS = {
    "startEvent": NodeKind.START,
    "endEvent": NodeKind.END,
    "task": NodeKind.TASK,
}
_XML_GATEWAYS = {"exclusiveGateway": True, "parallelGateway": False}


def _local(name: str) -> str:
    # expat reports "uri local" with namespace_separator=" "; prefixed names
    # without a declared namespace still arrive as "prefix:local".
    name = name.rsplit(" ", 1)[-1]
    return name.rsplit(":", 1)[-1]


def parse_bpmn_xml(data: bytes | str) -> WorkflowModel:
    """Parse the supported BPMN 2.0 subset from the first ``process`` element.

    Elements are matched on their local name, so any namespace prefix works.
    Unsupported children of the process issue a :class:`BpmnWarning`. The
    model is returned unvalidated.
    """
    parser = expat.ParserCreate(namespace_separator=" ")
    stack: list[str] = []
    process: dict[str, str] | None = None
    process_depth = -1
    processes_seen = 0
    raw_nodes: list[tuple[str, str, str, dict[str, str], int]] = []
    raw_flows: list[tuple[dict[str, str], int]] = []
    skipped: list[tuple[str, int]] = []

    def start(name: str, attrs: dict[str, str]) -> None:
        nonlocal process, process_depth, processes_seen
        local = _local(name)
        attrs = {_local(k): v for k, v in attrs.items()}
        line = parser.CurrentLineNumber
        depth = len(stack)
        stack.append(local)
        if local == "process":
            processes_seen += 1
            if process is None:
                process = attrs
                process_depth = depth
            return
        if process is None or depth != process_depth + 1 or processes_seen > 1:
            return
        if local in _XML_NODE_KINDS or local in _XML_GATEWAYS:
            raw_nodes.append((local, attrs.get("id", ""), attrs.get("name", ""), attrs, line))
        elif local == "sequenceFlow":
            raw_flows.append((attrs, line))
        else:
            skipped.append((local, line))

    def end(name: str) -> None:
        stack.pop()

    parser.StartElementHandler = start
    parser.EndElementHandler = end
    try:
        if isinstance(data, str):
            parser.Parse(data.encode("utf-8"), True)
        else:
            parser.Parse(data, True)
    except expat.ExpatError as exc:
        raise ParseError(expat.ErrorString(exc.code), exc.lineno, exc.offset + 1) from None

    if process is None:
        raise ParseError("no <process> element found")
    for local, line in skipped:
        warnings.warn(f"line {line}: unsupported element <{local}> skipped", BpmnWarning, stacklevel=2)
    if processes_seen > 1:
        warnings.warn("only the first <process> is read", BpmnWarning, stacklevel=2)

    ids: set[str] = set()
    for _, node_id, _, _, line in raw_nodes:
        if not node_id:
            raise ParseError("flow node without an id", line)
        if node_id in ids:
            raise ParseError(f"duplicate node id {node_id!r}", line)
        ids.add(node_id)

    flows = []
    n_in: dict[str, int] = {i: 0 for i in ids}
    n_out: dict[str, int] = {i: 0 for i in ids}
    for index, (attrs, line) in enumerate(raw_flows):
        src, tgt = attrs.get("sourceRef"), attrs.get("targetRef")
        if not src or not tgt:
            raise ParseError("sequenceFlow needs sourceRef and targetRef", line)
        for ref in (src, tgt):
            if ref not in ids:
                raise ParseError(f"unknown node {ref!r}", line)
        flows.append(SequenceFlow(attrs.get("id") or f"{src}__{tgt}", src, tgt))
        n_out[src] += 1
        n_in[tgt] += 1

    nodes = []
    for local, node_id, name, attrs, line in raw_nodes:
        if local in _XML_NODE_KINDS:
            nodes.append(FlowNode(node_id, _XML_NODE_KINDS[local], name))
            continue
        direction = attrs.get("gatewayDirection", "Unspecified")
        if direction == "Mixed" or (n_in[node_id] >= 2 and n_out[node_id] >= 2):
            raise ParseError(f"MixedGateway: gateway {node_id!r} both converges and diverges", line)
        if direction == "Diverging":
            diverging = True
        elif direction == "Converging":
            diverging = False
        else:
            diverging = n_out[node_id] >= 2 or n_in[node_id] <= 1
        nodes.append(FlowNode(node_id, NodeKind.gateway(_XML_GATEWAYS[local], diverging), name))

    return WorkflowModel(
        id=process.get("id", "process"),
        name=process.get("name", ""),
        nodes=tuple(nodes),
        flows=tuple(flows),
    )


# --------------------------------------------------------------------------- DSL

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<arrow>->)
  | (?P<colon>:)
  | (?P<semi>;)
  | (?P<word>(?:[^\s;:"\#\\-]|-(?!>))+)
    """,
    re.VERBOSE,
)
_WORD = re.compile(r'(?:[^\s;:"#\\-]|-(?!>))+')

_DSL_KINDS = {
    "start": NodeKind.START,
    "end": NodeKind.END,
    "task": NodeKind.TASK,
    "xor-split": NodeKind.XOR_SPLIT,
    "xor-join": NodeKind.XOR_JOIN,
    "and-split": NodeKind.AND_SPLIT,
    "and-join": NodeKind.AND_JOIN,
}
_DSL_KEYWORDS = {kind: kw for kw, kind in _DSL_KINDS.items()}


_ESCAPES = {"n": "\n", "r": "\r", "t": "\t"}
_UNESCAPES = {v: "\\" + k for k, v in _ESCAPES.items()} | {"\\": "\\\\", '"': '\\"'}


def _unquote(tok: str) -> str:
    return re.sub(r"\\(.)", lambda m: _ESCAPES.get(m.group(1), m.group(1)), tok[1:-1])


def _quote(text: str) -> str:
    return '"' + "".join(_UNESCAPES.get(c, c) for c in text) + '"'


def _ident(text: str) -> str:
    return text if _WORD.fullmatch(text) else _quote(text)


def _tokenize(text: str):
    """Yield (kind, value, line, column); values of strings are unquoted."""
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "string":
            yield "string", _unquote(m.group()), line, col
        elif kind not in ("ws", "comment"):
            yield kind, m.group(), line, col
        pos = m.end()
    yield "eof", "", line, pos - line_start + 1


def parse_dsl(text: str, default_id: str = "process") -> WorkflowModel:
    """Parse the workflow DSL.

    Grammar, one ``;``-terminated statement at a time::

        process <id> ["name"]
        start|end|task|xor-split|xor-join|and-split|and-join <id> ["name"]
        flow [<id>:] <src> -> <tgt>

    Ids are bare words or quoted strings. A flow without an id is named
    ``<src>__<tgt>``. Flows may refer to nodes declared later.
    """
    statements: list[list[tuple[str, str, int, int]]] = []
    current: list[tuple[str, str, int, int]] = []
    for tok in _tokenize(text):
        if tok[0] == "semi":
            if not current:
                raise ParseError("empty statement", tok[2], tok[3])
            statements.append(current)
            current = []
        elif tok[0] == "eof":
            if current:
                raise ParseError("missing ';' at end of statement", tok[2], tok[3])
        else:
            current.append(tok)

    model_id, model_name = default_id, ""
    nodes: dict[str, FlowNode] = {}
    flows: list[tuple[SequenceFlow, int, int]] = []
    seen_header = False

    def name_token(tok, what: str) -> str:
        if tok[0] not in ("word", "string"):
            raise ParseError(f"expected {what}, found {tok[1] or tok[0]!r}", tok[2], tok[3])
        return tok[1]

    for stmt in statements:
        head = stmt[0]
        if head[0] != "word":
            raise ParseError(f"expected a keyword, found {head[1]!r}", head[2], head[3])
        keyword = head[1]
        if keyword == "process" or keyword in _DSL_KINDS:
            if len(stmt) < 2:
                raise ParseError(f"'{keyword}' takes an id and an optional quoted name", head[2], head[3])
            ident = name_token(stmt[1], "an id")
            label = ""
            if len(stmt) > 2:
                third = stmt[2]
                if third[0] == "string" and len(stmt) == 3:
                    label = third[1]
                else:
                    extra = third if third[0] != "string" else stmt[3]
                    if extra[2] == stmt[1][2] and third[0] != "string":
                        raise ParseError("node name must be a quoted string", extra[2], extra[3])
                    raise ParseError(f"expected ';' before {extra[1]!r}", extra[2], extra[3])
            if keyword == "process":
                if seen_header or nodes or flows:
                    raise ParseError("'process' must be the first statement", head[2], head[3])
                seen_header = True
                model_id, model_name = ident, label
                continue
            if ident in nodes:
                raise ParseError(f"duplicate node declaration {ident!r}", head[2], head[3])
            nodes[ident] = FlowNode(ident, _DSL_KINDS[keyword], label)
        elif keyword == "flow":
            rest = stmt[1:]
            flow_id = None
            if len(rest) >= 2 and rest[1][0] == "colon":
                flow_id = name_token(rest[0], "a flow id")
                rest = rest[2:]
            if len(rest) != 3 or rest[1][0] != "arrow":
                raise ParseError("expected 'flow [<id>:] <src> -> <tgt>'", head[2], head[3])
            src = name_token(rest[0], "a source id")
            tgt = name_token(rest[2], "a target id")
            flows.append((SequenceFlow(flow_id or f"{src}__{tgt}", src, tgt), head[2], head[3]))
        else:
            raise ParseError(f"unknown statement {keyword!r}", head[2], head[3])

    for flow, line, col in flows:
        for ref in (flow.source, flow.target):
            if ref not in nodes:
                raise ParseError(f"unknown node {ref!r}", line, col)

    return WorkflowModel(
        id=model_id,
        name=model_name,
        nodes=tuple(nodes.values()),
        flows=tuple(f for f, _, _ in flows),
    )


def emit_dsl(model: WorkflowModel) -> str:
    lines = []
    if model.id != "process" or model.name:
        header = f"process {_ident(model.id)}"
        if model.name:
            header += f" {_quote(model.name)}"
        lines.append(header + ";")
    for n in model.nodes:
        line = f"{_DSL_KEYWORDS[n.kind]} {_ident(n.id)}"
        if n.name:
            line += f" {_quote(n.name)}"
        lines.append(line + ";")
    for f in model.flows:
        prefix = "" if f.id == f"{f.source}__{f.target}" else f"{_ident(f.id)}: "
        lines.append(f"flow {prefix}{_ident(f.source)} -> {_ident(f.target)};")
    return "\n".join(lines) + "\n"
