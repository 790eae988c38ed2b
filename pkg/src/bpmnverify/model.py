"""Intermediate representation of a BPMN workflow and its well-formedness rules."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable


class NodeKind(enum.Enum):
    START = "start"
    END = "end"
    TASK = "task"
    XOR_SPLIT = "xor-split"
    XOR_JOIN = "xor-join"
    AND_SPLIT = "and-split"
    AND_JOIN = "and-join"

    @property
    def is_gateway(self) -> bool:
        return self in _GATEWAYS

    @property
    def is_exclusive(self) -> bool:
        return self in (NodeKind.XOR_SPLIT, NodeKind.XOR_JOIN)

    @property
    def is_diverging(self) -> bool:
        return self in (NodeKind.XOR_SPLIT, NodeKind.AND_SPLIT)

    @property
    def is_converging(self) -> bool:
        return self in (NodeKind.XOR_JOIN, NodeKind.AND_JOIN)

    @classmethod
    def gateway(cls, exclusive: bool, diverging: bool) -> NodeKind:
        if exclusive:
            return cls.XOR_SPLIT if diverging else cls.XOR_JOIN
        return cls.AND_SPLIT if diverging else cls.AND_JOIN

    @property
    def label(self) -> str:
        return _LABELS[self]


_GATEWAYS = frozenset(
    {NodeKind.XOR_SPLIT, NodeKind.XOR_JOIN, NodeKind.AND_SPLIT, NodeKind.AND_JOIN}
)

_LABELS = {
    NodeKind.START: "StartEvent",
    NodeKind.END: "EndEvent",
    NodeKind.TASK: "Task",
    NodeKind.XOR_SPLIT: "ExclusiveGateway(diverging)",
    NodeKind.XOR_JOIN: "ExclusiveGateway(converging)",
    NodeKind.AND_SPLIT: "ParallelGateway(diverging)",
    NodeKind.AND_JOIN: "ParallelGateway(converging)",
}


@dataclass(frozen=True)
class FlowNode:
    id: str
    kind: NodeKind
    name: str = ""

    @property
    def label(self) -> str:
        """Name if present, otherwise the id."""
        return self.name or self.id


@dataclass(frozen=True)
class SequenceFlow:
    id: str
    source: str
    target: str


@dataclass(frozen=True)
class WorkflowModel:
    """A workflow graph.

    Node order and flow order are significant: they are the canonical order used
    by the semantics, the code generator and every report. Instances are treated
    as immutable; edits go through :mod:`bpmnverify.reconfig`.
    """

    id: str
    name: str
    nodes: tuple[FlowNode, ...]
    flows: tuple[SequenceFlow, ...]

    @cached_property
    def node_index(self) -> dict[str, FlowNode]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def node_order(self) -> dict[str, int]:
        return {n.id: i for i, n in enumerate(self.nodes)}

    @cached_property
    def flow_index(self) -> dict[str, SequenceFlow]:
        return {f.id: f for f in self.flows}

    @cached_property
    def _incidence(self) -> tuple[dict[str, tuple[str, ...]], dict[str, tuple[str, ...]]]:
        ins: dict[str, list[str]] = {n.id: [] for n in self.nodes}
        outs: dict[str, list[str]] = {n.id: [] for n in self.nodes}
        for f in self.flows:
            if f.target in ins:
                ins[f.target].append(f.id)
            if f.source in outs:
                outs[f.source].append(f.id)
        return (
            {k: tuple(v) for k, v in ins.items()},
            {k: tuple(v) for k, v in outs.items()},
        )

    def node(self, node_id: str) -> FlowNode:
        return self.node_index[node_id]

    def flow(self, flow_id: str) -> SequenceFlow:
        return self.flow_index[flow_id]

    def incoming(self, node_id: str) -> tuple[str, ...]:
        """Ids of flows entering ``node_id``, in flow order."""
        return self._incidence[0][node_id]

    def outgoing(self, node_id: str) -> tuple[str, ...]:
        return self._incidence[1][node_id]

    def nodes_of(self, *kinds: NodeKind) -> list[FlowNode]:
        return [n for n in self.nodes if n.kind in kinds]

    def graph_key(self) -> tuple:
        """Order-insensitive identity of the node and flow sets (model id and name excluded)."""
        return (frozenset(self.nodes), frozenset(self.flows))

    def graph_equal(self, other: WorkflowModel) -> bool:
        return (
            self.graph_key() == other.graph_key()
            and len(self.flows) == len(other.flows)
            and len(self.nodes) == len(other.nodes)
        )


def make_model(
    nodes: Iterable[FlowNode],
    flows: Iterable[SequenceFlow],
    id: str = "process",
    name: str = "",
) -> WorkflowModel:
    return WorkflowModel(id=id, name=name, nodes=tuple(nodes), flows=tuple(flows))


class ViolationCode(enum.Enum):
    MISSING_START = "MissingStart"
    MISSING_END = "MissingEnd"
    BAD_DEGREE = "BadDegree"
    UNREACHABLE = "Unreachable"
    DUPLICATE_ID = "DuplicateId"
    DANGLING_FLOW = "DanglingFlow"
    MIXED_GATEWAY = "MixedGateway"

    @property
    def subject_kind(self) -> str:
        if self in (ViolationCode.MISSING_START, ViolationCode.MISSING_END):
            return "model"
        if self in (ViolationCode.DUPLICATE_ID, ViolationCode.DANGLING_FLOW):
            return "flow"
        return "node"


_CODE_RANK = {code: i for i, code in enumerate(ViolationCode)}


@dataclass(frozen=True)
class Violation:
    code: ViolationCode
    subject: str
    message: str

    def __str__(self) -> str:
        return f"{self.code.value}({self.subject}): {self.message}"


def _degree_ok(kind: NodeKind, n_in: int, n_out: int) -> bool:
    if kind is NodeKind.START:
        return n_in == 0 and n_out == 1
    if kind is NodeKind.END:
        return n_in >= 1 and n_out == 0
    if kind is NodeKind.TASK:
        return n_in == 1 and n_out == 1
    if kind.is_diverging:
        return n_in == 1 and n_out >= 2
    return n_in >= 2 and n_out == 1


_DEGREE_RULE = {
    NodeKind.START: "in=0, out=1",
    NodeKind.END: "in>=1, out=0",
    NodeKind.TASK: "in=1, out=1",
    NodeKind.XOR_SPLIT: "in=1, out>=2",
    NodeKind.AND_SPLIT: "in=1, out>=2",
    NodeKind.XOR_JOIN: "in>=2, out=1",
    NodeKind.AND_JOIN: "in>=2, out=1",
}


def _closure(seeds: Iterable[str], succ: dict[str, list[str]]) -> set[str]:
    seen = set(seeds)
    queue = deque(seen)
    while queue:
        n = queue.popleft()
        for m in succ.get(n, ()):
            if m not in seen:
                seen.add(m)
                queue.append(m)
    return seen


def validate_wellformed(model: WorkflowModel) -> list[Violation]:
    """Check every structural invariant of ``model``.

    Returns one :class:`Violation` per breach, sorted by subject id then code;
    an empty list means the model is well formed. Nodes that no start event
    reaches are ``Unreachable``; a reachable flow whose target cannot reach any
    end event is a ``DanglingFlow``, as is a flow naming a missing node.
    """
    found: set[Violation] = set()

    def report(code: ViolationCode, subject: str, message: str) -> None:
        found.add(Violation(code, subject, message))

    if not model.nodes_of(NodeKind.START):
        report(ViolationCode.MISSING_START, model.id, "model has no start event")
    if not model.nodes_of(NodeKind.END):
        report(ViolationCode.MISSING_END, model.id, "model has no end event")

    seen_flow_ids: set[str] = set()
    seen_pairs: dict[tuple[str, str], str] = {}
    live_flows = []
    for f in model.flows:
        if f.id in seen_flow_ids:
            report(ViolationCode.DUPLICATE_ID, f.id, f"flow id {f.id!r} is used more than once")
        seen_flow_ids.add(f.id)
        missing = [r for r in (f.source, f.target) if r not in model.node_index]
        if missing:
            report(
                ViolationCode.DANGLING_FLOW,
                f.id,
                f"flow {f.id!r} references unknown node {missing[0]!r}",
            )
            continue
        pair = (f.source, f.target)
        if pair in seen_pairs:
            report(
                ViolationCode.DUPLICATE_ID,
                f.id,
                f"flow {f.id!r} duplicates {seen_pairs[pair]!r} ({f.source} -> {f.target})",
            )
        else:
            seen_pairs[pair] = f.id
        live_flows.append(f)

    for n in model.nodes:
        n_in, n_out = len(model.incoming(n.id)), len(model.outgoing(n.id))
        if n.kind.is_gateway and n_in >= 2 and n_out >= 2:
            report(
                ViolationCode.MIXED_GATEWAY,
                n.id,
                f"gateway {n.id!r} both converges ({n_in} in) and diverges ({n_out} out)",
            )
        elif not _degree_ok(n.kind, n_in, n_out):
            report(
                ViolationCode.BAD_DEGREE,
                n.id,
                f"{n.kind.label} {n.id!r} has in={n_in}, out={n_out}; "
                f"expected {_DEGREE_RULE[n.kind]}",
            )

    succ: dict[str, list[str]] = {}
    pred: dict[str, list[str]] = {}
    for f in live_flows:
        succ.setdefault(f.source, []).append(f.target)
        pred.setdefault(f.target, []).append(f.source)
    forward = _closure((n.id for n in model.nodes_of(NodeKind.START)), succ)
    backward = _closure((n.id for n in model.nodes_of(NodeKind.END)), pred)

    for n in model.nodes:
        if n.id not in forward:
            report(ViolationCode.UNREACHABLE, n.id, f"no start event reaches {n.id!r}")
    for f in live_flows:
        if f.source in forward and f.target not in backward:
            report(
                ViolationCode.DANGLING_FLOW,
                f.id,
                f"flow {f.id!r} leads to {f.target!r}, from which no end event is reachable",
            )

    return sorted(found, key=lambda v: (v.subject, _CODE_RANK[v.code], v.message))
