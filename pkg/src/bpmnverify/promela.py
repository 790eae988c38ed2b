"""Promela generation.

A model becomes a single ``Workflow`` proctype: one global ``byte`` per
sequence flow holding its token count, and a ``do`` loop with one guarded
``atomic`` arm per firing alternative. When no arm is enabled the loop breaks
and a final assertion demands that every token is gone and some end event
fired. ``lastFired`` records the code of the last node that fired, which the
``fired_<node>`` macros and the LTL blocks observe.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

from .checker import (
    DeadlockFree,
    NeverFires,
    NoDeadActivity,
    Precedence,
    ProperCompletion,
    Property,
    RawLtl,
    Reachable,
    Response,
)
from .errors import UnknownPropertyTarget, ValidationRequired
from .ingest import _ident
from .model import NodeKind, WorkflowModel, validate_wellformed
from .semantics import DEFAULT_BOUND, Marking, alternatives

PROMELA_KEYWORDS = frozenset(
    """
    active assert atomic bit bool break byte c_code c_decl c_expr c_state c_track chan
    d_proctype d_step do else empty enabled eval false fi for full get_priority goto
    hidden if in init inline int len local ltl mtype nempty never nfull np_ od of
    pc_value pid printf printm priority proctype provided run select set_priority
    short show skip timeout trace true typedef unless unsigned xr xs notrace
    _ _last _nr_pr _pid _priority STDIN
    """.split()
)

_NON_IDENT = re.compile(r"[^A-Za-z0-9_]")


def sanitize_name(raw: str, taken: set[str] | frozenset[str] = frozenset(), code: int = 0) -> str:
    """Map ``raw`` to a fresh Promela identifier.

    Disallowed characters become ``_``, a leading digit gets a ``_`` prefix, an
    empty name becomes ``n<code>``, keywords get a trailing ``_``, and names
    already in ``taken`` get ``_2``, ``_3``, ... appended.
    """
    base = _NON_IDENT.sub("_", raw)
    if not base:
        base = f"n{code}"
    elif base[0].isdigit():
        base = "_" + base
    if base in PROMELA_KEYWORDS:
        base += "_"
    candidate, n = base, 1
    while candidate in taken or candidate in PROMELA_KEYWORDS:
        n += 1
        candidate = f"{base}_{n}"
    return candidate


@dataclass(frozen=True)
class Symbol:
    bpmn_id: str
    identifier: str
    code: int
    kind: str  # "node" or "flow"


@dataclass
class PromelaProgram:
    source: str
    symbols: dict[tuple[str, str], Symbol] = field(default_factory=dict)
    property_names: list[str] = field(default_factory=list)
    bound: int = DEFAULT_BOUND

    def node_symbol(self, node_id: str) -> Symbol:
        return self.symbols[("node", node_id)]

    def flow_symbol(self, flow_id: str) -> Symbol:
        return self.symbols[("flow", flow_id)]

    def by_identifier(self) -> dict[str, Symbol]:
        return {s.identifier: s for s in self.symbols.values()}

    def node_by_code(self) -> dict[int, Symbol]:
        return {s.code: s for s in self.symbols.values() if s.kind == "node"}

    def symbol_table(self) -> str:
        """Side file: one ``<bpmn-id> <promela-identifier> <code>`` line per symbol."""
        rows = sorted(self.symbols.values(), key=lambda s: (s.kind != "node", s.code))
        return "".join(f"{_ident(s.bpmn_id)} {s.identifier} {s.code}\n" for s in rows)


def parse_symbol_table(text: str) -> dict[tuple[str, str], Symbol]:
    from .ingest import _tokenize

    table: dict[tuple[str, str], Symbol] = {}
    row: list[str] = []
    line_no = None
    for kind, value, line, _ in _tokenize(text):
        if kind in ("word", "string"):
            if line_no is not None and line != line_no and row:
                _add_symbol_row(table, row)
                row = []
            row.append(value)
            line_no = line
    if row:
        _add_symbol_row(table, row)
    return table


def _add_symbol_row(table, row: list[str]) -> None:
    bpmn_id, ident, code = row
    kind = "flow" if ident.startswith("tok_") else "node"
    table[(kind, bpmn_id)] = Symbol(bpmn_id, ident, int(code), kind)


def _comment(text: str) -> str:
    return " ".join(text.replace("*/", "* /").split())


class _Emitter:
    def __init__(self, model: WorkflowModel, bound: int):
        self.model = model
        self.bound = bound
        self.lines: list[str] = []
        self.symbols: dict[tuple[str, str], Symbol] = {}
        taken: set[str] = set()
        for code, node in enumerate(model.nodes, start=1):
            base = sanitize_name(node.id, taken, code)
            taken.add(base)
            self.symbols[("node", node.id)] = Symbol(node.id, f"fired_{base}", code, "node")
        taken = set()
        for code, flow in enumerate(model.flows, start=1):
            base = sanitize_name(flow.id, taken, code)
            taken.add(base)
            self.symbols[("flow", flow.id)] = Symbol(flow.id, f"tok_{base}", code, "flow")

    def tok(self, flow_id: str) -> str:
        return self.symbols[("flow", flow_id)].identifier

    def fired(self, node_id: str) -> str:
        return self.symbols[("node", node_id)].identifier

    def short(self, node_id: str) -> str:
        return self.fired(node_id)[len("fired_"):]

    def emit(self, line: str = "") -> None:
        self.lines.append(line)

    def ltl_blocks(self, properties: Sequence[Property]) -> list[tuple[str, str]]:
        blocks: dict[str, str] = {}
        for prop in properties:
            if isinstance(prop, DeadlockFree):
                continue
            if isinstance(prop, ProperCompletion):
                blocks.setdefault("complete", "<> (completed > 0)")
            elif isinstance(prop, Reachable):
                # verified by refutation: a violation is a run that fires the node
                blocks.setdefault(f"reach_{self.short(prop.node)}", f"[] !{self.fired(prop.node)}")
            elif isinstance(prop, NoDeadActivity):
                for task in self.model.nodes_of(NodeKind.TASK):
                    blocks.setdefault(f"reach_{self.short(task.id)}", f"[] !{self.fired(task.id)}")
            elif isinstance(prop, NeverFires):
                blocks.setdefault(f"never_{self.short(prop.node)}", f"[] !{self.fired(prop.node)}")
            elif isinstance(prop, Precedence):
                a, b = self.fired(prop.first), self.fired(prop.then)
                name = f"prec_{self.short(prop.first)}_{self.short(prop.then)}"
                blocks.setdefault(name, f"([] !{b}) || (!{b} U {a})")
            elif isinstance(prop, Response):
                a, b = self.fired(prop.trigger), self.fired(prop.response)
                name = f"resp_{self.short(prop.trigger)}_{self.short(prop.response)}"
                blocks.setdefault(name, f"[] ({a} -> <> {b})")
            elif isinstance(prop, RawLtl):
                name = sanitize_name(prop.name, set(blocks))
                blocks[name] = " ".join(prop.text.split())
        return list(blocks.items())

    def produce(self, flow_id: str, indent: str) -> None:
        t = self.tok(flow_id)
        self.emit(f"{indent}assert({t} < K);")
        self.emit(f"{indent}{t}++;")

    def arm(self, node_id: str, alternative: str | None) -> None:
        m = self.model
        node = m.node(node_id)
        ins, outs = m.incoming(node_id), m.outgoing(node_id)
        kind = node.kind
        if kind is NodeKind.XOR_SPLIT:
            consume, produce = ins[:1], (alternative,)
        elif kind in (NodeKind.XOR_JOIN, NodeKind.END):
            consume, produce = (alternative,), outs[:1]
        elif kind is NodeKind.AND_JOIN:
            consume, produce = ins, outs
        else:
            consume, produce = ins[:1], outs

        label = f"{kind.label} {_comment(node.name) if node.name else node.id}"
        if alternative is not None:
            flow = m.flow(alternative)
            if kind is NodeKind.XOR_SPLIT:
                label += f", branch to {flow.target}"
            elif len(ins) > 1:
                label += f", arriving from {flow.source}"
        self.emit(f"  /* {label} */")
        self.emit("  :: atomic {")
        guard = " && ".join(f"{self.tok(f)} > 0" for f in consume)
        self.emit(f"       {guard} ->")
        for f in consume:
            self.emit(f"       {self.tok(f)}--;")
        for f in produce:
            self.produce(f, "       ")
        if kind is NodeKind.END:
            self.emit("       completed = (completed < K -> completed + 1 : K);")
        self.emit(f"       lastFired = {self.symbols[('node', node_id)].code}")
        self.emit("     }")

    def program(self, properties: Sequence[Property]) -> tuple[str, list[str]]:
        m = self.model
        title = m.id + (f" ({_comment(m.name)})" if m.name else "")
        self.emit("/*")
        self.emit(f" * Workflow model: {title}")
        self.emit(f" * {len(m.nodes)} nodes, {len(m.flows)} sequence flows, token bound K = {self.bound}")
        self.emit(" */")
        self.emit()
        self.emit(f"#define K {self.bound}")
        self.emit()
        self.emit("/* tokens waiting on each sequence flow */")
        for f in m.flows:
            self.emit(f"byte {self.tok(f.id)};  /* {_comment(f.source)} -> {_comment(f.target)} */")
        self.emit()
        self.emit("/* number of end events reached (saturates at K) */")
        self.emit("byte completed;")
        self.emit("/* code of the last node that fired; 0 before the first firing */")
        self.emit("byte lastFired;")
        self.emit()
        for n in m.nodes:
            sym = self.symbols[("node", n.id)]
            if n.kind is NodeKind.START:
                self.emit(f"#define {sym.identifier} false  /* {n.kind.label} {_comment(n.label)} */")
            else:
                self.emit(f"#define {sym.identifier} (lastFired == {sym.code})  "
                          f"/* {n.kind.label} {_comment(n.label)} */")
        blocks = self.ltl_blocks(properties)
        if blocks:
            self.emit()
            for name, body in blocks:
                self.emit(f"ltl {name} {{ {body} }}")
        self.emit()
        self.emit("active proctype Workflow()")
        self.emit("{")
        self.emit("  atomic {")
        for start in m.nodes_of(NodeKind.START):
            (out,) = m.outgoing(start.id)
            self.emit(f"    /* {start.kind.label} {_comment(start.label)} */")
            self.emit(f"    {self.tok(out)} = 1;")
        self.emit("  }")
        self.emit("  do")
        full = Marking.of({f.id: 1 for f in m.flows})
        for n in m.nodes:
            for alt in alternatives(m, full, n.id):
                self.arm(n.id, alt)
        self.emit("  :: else -> break")
        self.emit("  od;")
        self.emit("  /* proper completion: no tokens left and an end event was reached */")
        zeros = [f"{self.tok(f.id)} == 0" for f in m.flows]
        self.emit(f"  assert({' && '.join(zeros + ['completed > 0'])})")
        self.emit("}")
        return "\n".join(self.lines) + "\n", [name for name, _ in blocks]


def translate(
    model: WorkflowModel, properties: Sequence[Property] = (), bound: int = DEFAULT_BOUND
) -> PromelaProgram:
    violations = validate_wellformed(model)
    if violations:
        raise ValidationRequired(violations)
    for prop in properties:
        for node in prop.targets():
            if node not in model.node_index:
                raise UnknownPropertyTarget(node)
    emitter = _Emitter(model, bound)
    source, names = emitter.program(properties)
    return PromelaProgram(source=source, symbols=emitter.symbols, property_names=names, bound=bound)
