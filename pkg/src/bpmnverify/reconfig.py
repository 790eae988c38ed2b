"""Reconfiguration patches: structural edits that turn an old model into a new one."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Union

from .errors import DuplicateId, ParseError, UnknownId
from .ingest import _DSL_KINDS, _DSL_KEYWORDS, _ident, _quote, _tokenize
from .model import FlowNode, SequenceFlow, WorkflowModel


@dataclass(frozen=True)
class AddNode:
    node: FlowNode


@dataclass(frozen=True)
class RemoveNode:
    node_id: str


@dataclass(frozen=True)
class AddFlow:
    flow: SequenceFlow


@dataclass(frozen=True)
class RemoveFlow:
    flow_id: str


@dataclass(frozen=True)
class RerouteFlow:
    flow_id: str
    source: str
    target: str


PatchOp = Union[AddNode, RemoveNode, AddFlow, RemoveFlow, RerouteFlow]


@dataclass(frozen=True)
class Patch:
    ops: tuple[PatchOp, ...] = ()
    description: str = ""

    def __len__(self) -> int:
        return len(self.ops)


def apply_patch(model: WorkflowModel, patch: Patch) -> WorkflowModel:
    """Apply ``patch`` to a copy of ``model``.

    Removing a node removes every flow touching it, except when the next op
    adds a node with the same id: that pair replaces the node in place and
    keeps its flows. The result is not validated. Any failing op raises
    :class:`~bpmnverify.errors.PatchError` and nothing is returned.
    """
    nodes: list[FlowNode] = list(model.nodes)
    flows: list[SequenceFlow] = list(model.flows)
    ops = patch.ops
    i = 0
    while i < len(ops):
        op = ops[i]
        node_ids = {n.id for n in nodes}
        if isinstance(op, AddNode):
            if op.node.id in node_ids:
                raise DuplicateId(i, op.node.id)
            nodes.append(op.node)
        elif isinstance(op, RemoveNode):
            if op.node_id not in node_ids:
                raise UnknownId(i, op.node_id)
            nxt = ops[i + 1] if i + 1 < len(ops) else None
            pos = next(k for k, n in enumerate(nodes) if n.id == op.node_id)
            if isinstance(nxt, AddNode) and nxt.node.id == op.node_id:
                nodes[pos] = nxt.node
                i += 2
                continue
            del nodes[pos]
            flows = [f for f in flows if op.node_id not in (f.source, f.target)]
        elif isinstance(op, AddFlow):
            if any(f.id == op.flow.id for f in flows):
                raise DuplicateId(i, op.flow.id)
            for ref in (op.flow.source, op.flow.target):
                if ref not in node_ids:
                    raise UnknownId(i, ref)
            flows.append(op.flow)
        elif isinstance(op, RemoveFlow):
            if not any(f.id == op.flow_id for f in flows):
                raise UnknownId(i, op.flow_id)
            flows = [f for f in flows if f.id != op.flow_id]
        elif isinstance(op, RerouteFlow):
            if not any(f.id == op.flow_id for f in flows):
                raise UnknownId(i, op.flow_id)
            for ref in (op.source, op.target):
                if ref not in node_ids:
                    raise UnknownId(i, ref)
            flows = [
                SequenceFlow(f.id, op.source, op.target) if f.id == op.flow_id else f
                for f in flows
            ]
        else:
            raise TypeError(f"not a patch op: {op!r}")
        i += 1
    return WorkflowModel(model.id, model.name, tuple(nodes), tuple(flows))


def diff(old: WorkflowModel, new: WorkflowModel) -> Patch:
    """Smallest patch taking ``old`` to ``new`` (graph equality, same ids).

    Ops come in this order, each group sorted by id: flow removals, node
    removals, in-place node replacements, node additions, reroutes, flow
    additions. Flows touching a removed node are dropped by the node removal,
    so they are never removed explicitly; if such a flow id survives in
    ``new`` it is added back.
    """
    old_nodes, new_nodes = old.node_index, new.node_index
    old_flows, new_flows = old.flow_index, new.flow_index

    removed_nodes = sorted(set(old_nodes) - set(new_nodes))
    added_nodes = sorted(set(new_nodes) - set(old_nodes))
    replaced = sorted(i for i in set(old_nodes) & set(new_nodes) if old_nodes[i] != new_nodes[i])
    gone = set(removed_nodes)

    def cascaded(f: SequenceFlow) -> bool:
        return f.source in gone or f.target in gone

    remove_flows, reroutes, add_flows = [], [], []
    for fid in sorted(old_flows):
        f = old_flows[fid]
        g = new_flows.get(fid)
        if g is None:
            if not cascaded(f):
                remove_flows.append(RemoveFlow(fid))
        elif cascaded(f):
            add_flows.append(AddFlow(g))
        elif (f.source, f.target) != (g.source, g.target):
            reroutes.append(RerouteFlow(fid, g.source, g.target))
    for fid in sorted(set(new_flows) - set(old_flows)):
        add_flows.append(AddFlow(new_flows[fid]))
    add_flows.sort(key=lambda op: op.flow.id)

    ops: list[PatchOp] = [*remove_flows]
    ops += [RemoveNode(i) for i in removed_nodes]
    for i in replaced:
        ops += [RemoveNode(i), AddNode(new_nodes[i])]
    ops += [AddNode(new_nodes[i]) for i in added_nodes]
    ops += reroutes
    ops += add_flows
    return Patch(tuple(ops), f"{old.id} -> {new.id}")


# ------------------------------------------------------------------ patch files


def emit_patch(patch: Patch) -> str:
    """Line-oriented patch text: one op per line, ``#`` comments."""
    lines = []
    if patch.description:
        lines.append(f"description {_quote(patch.description)}")
    for op in patch.ops:
        if isinstance(op, AddNode):
            line = f"add-node {_DSL_KEYWORDS[op.node.kind]} {_ident(op.node.id)}"
            if op.node.name:
                line += f" {_quote(op.node.name)}"
        elif isinstance(op, RemoveNode):
            line = f"remove-node {_ident(op.node_id)}"
        elif isinstance(op, AddFlow):
            f = op.flow
            line = f"add-flow {_ident(f.id)} {_ident(f.source)} {_ident(f.target)}"
        elif isinstance(op, RemoveFlow):
            line = f"remove-flow {_ident(op.flow_id)}"
        else:
            line = f"reroute-flow {_ident(op.flow_id)} {_ident(op.source)} {_ident(op.target)}"
        lines.append(line)
    return "\n".join(lines) + ("\n" if lines else "")


def parse_patch(text: str) -> Patch:
    by_line: dict[int, list[tuple[str, str, int, int]]] = {}
    for tok in _tokenize(text):
        if tok[0] == "eof":
            break
        if tok[0] not in ("word", "string"):
            raise ParseError(f"unexpected {tok[1]!r} in patch", tok[2], tok[3])
        by_line.setdefault(tok[2], []).append(tok)

    description = ""
    ops: list[PatchOp] = []
    for line, toks in sorted(by_line.items()):
        head = toks[0]
        if head[0] != "word":
            raise ParseError("expected a patch op", line, head[3])
        args = [t[1] for t in toks[1:]]
        verb = head[1]

        def arity(*counts: int) -> None:
            if len(args) not in counts:
                raise ParseError(f"'{verb}' takes {' or '.join(map(str, counts))} arguments", line, head[3])

        if verb == "description":
            arity(1)
            description = args[0]
        elif verb == "add-node":
            arity(2, 3)
            if args[0] not in _DSL_KINDS:
                raise ParseError(f"unknown node kind {args[0]!r}", line, toks[1][3])
            ops.append(AddNode(FlowNode(args[1], _DSL_KINDS[args[0]], args[2] if len(args) == 3 else "")))
        elif verb == "remove-node":
            arity(1)
            ops.append(RemoveNode(args[0]))
        elif verb == "add-flow":
            arity(3)
            ops.append(AddFlow(SequenceFlow(*args)))
        elif verb == "remove-flow":
            arity(1)
            ops.append(RemoveFlow(args[0]))
        elif verb == "reroute-flow":
            arity(3)
            ops.append(RerouteFlow(*args))
        else:
            raise ParseError(f"unknown patch op {verb!r}", line, head[3])
    return Patch(tuple(ops), description)


def patch_to_json(patch: Patch) -> str:
    ops = []
    for op in patch.ops:
        if isinstance(op, AddNode):
            ops.append({"op": "add-node", "kind": _DSL_KEYWORDS[op.node.kind],
                        "id": op.node.id, "name": op.node.name})
        elif isinstance(op, RemoveNode):
            ops.append({"op": "remove-node", "id": op.node_id})
        elif isinstance(op, AddFlow):
            ops.append({"op": "add-flow", "id": op.flow.id,
                        "source": op.flow.source, "target": op.flow.target})
        elif isinstance(op, RemoveFlow):
            ops.append({"op": "remove-flow", "id": op.flow_id})
        else:
            ops.append({"op": "reroute-flow", "id": op.flow_id,
                        "source": op.source, "target": op.target})
    return json.dumps({"description": patch.description, "ops": ops}, indent=2) + "\n"


def patch_from_json(text: str) -> Patch:
    try:
        doc = json.loads(text)
        ops: list[PatchOp] = []
        for i, item in enumerate(doc["ops"]):
            kind = item["op"]
            if kind == "add-node":
                if item["kind"] not in _DSL_KINDS:
                    raise ParseError(f"op #{i}: unknown node kind {item['kind']!r}")
                ops.append(AddNode(FlowNode(item["id"], _DSL_KINDS[item["kind"]], item.get("name", ""))))
            elif kind == "remove-node":
                ops.append(RemoveNode(item["id"]))
            elif kind == "add-flow":
                ops.append(AddFlow(SequenceFlow(item["id"], item["source"], item["target"])))
            elif kind == "remove-flow":
                ops.append(RemoveFlow(item["id"]))
            elif kind == "reroute-flow":
                ops.append(RerouteFlow(item["id"], item["source"], item["target"]))
            else:
                raise ParseError(f"op #{i}: unknown patch op {kind!r}")
        return Patch(tuple(ops), doc.get("description", ""))
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    except (KeyError, TypeError, AttributeError) as exc:
        raise ParseError(f"malformed patch document: {exc!r}") from None


def load_patch(path: str | Path) -> Patch:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        return patch_from_json(text)
    return parse_patch(text)
