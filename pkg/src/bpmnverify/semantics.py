"""Token-game semantics of a workflow model.

Tokens live on sequence flows. Start events put one token on their outgoing
flow at instantiation; every other node fires by consuming and producing
tokens. A flow may hold at most ``bound`` tokens: a firing that would exceed
it raises :class:`BoundExceeded` rather than producing a state.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Mapping, NamedTuple

from .errors import BadSelector, BoundExceeded, MissingSelector, NotEnabled
from .model import NodeKind, WorkflowModel

DEFAULT_BOUND = 2

_CHOICE_KINDS = (NodeKind.XOR_SPLIT, NodeKind.XOR_JOIN, NodeKind.END)


@dataclass(frozen=True)
class Marking:
    """Token counts per flow plus the number of end-event firings.

    Only non-zero counts are stored, sorted by flow id, so equality and hashing
    are by value. ``completed`` saturates at the token bound; every property
    only distinguishes zero from non-zero.
    """

    tokens: tuple[tuple[str, int], ...] = ()
    completed: int = 0

    @classmethod
    def of(cls, tokens: Mapping[str, int] | None = None, completed: int = 0) -> Marking:
        items = tuple(sorted((k, v) for k, v in (tokens or {}).items() if v))
        return cls(items, completed)

    def __getitem__(self, flow_id: str) -> int:
        for k, v in self.tokens:
            if k == flow_id:
                return v
        return 0

    def as_dict(self) -> dict[str, int]:
        return dict(self.tokens)

    @property
    def total(self) -> int:
        return sum(v for _, v in self.tokens)

    @property
    def is_empty(self) -> bool:
        return not self.tokens

    @property
    def properly_completed(self) -> bool:
        return not self.tokens and self.completed >= 1

    def summary(self, model: WorkflowModel | None = None) -> str:
        counts = self.as_dict()
        order = [f.id for f in model.flows] if model is not None else sorted(counts)
        body = ",".join(f"{f}:{counts[f]}" for f in order if f in counts)
        return f"{{{body}}} completed={self.completed}"


def initial_marking(model: WorkflowModel) -> Marking:
    tokens: dict[str, int] = {}
    for start in model.nodes_of(NodeKind.START):
        (out,) = model.outgoing(start.id)
        tokens[out] = tokens.get(out, 0) + 1
    return Marking.of(tokens)


def alternatives(model: WorkflowModel, marking: Marking, node_id: str) -> tuple[str | None, ...]:
    """The ways ``node_id`` can fire at ``marking``; empty when it is not enabled.

    Exclusive gateways and end events fire per flow: an exclusive split picks an
    outgoing flow, an exclusive join or end event picks a marked incoming flow.
    Every other kind has the single alternative ``None``.
    """
    node = model.node(node_id)
    ins = model.incoming(node_id)
    kind = node.kind
    if kind is NodeKind.START:
        return ()
    if kind is NodeKind.AND_JOIN:
        return (None,) if ins and all(marking[f] > 0 for f in ins) else ()
    if kind in (NodeKind.XOR_JOIN, NodeKind.END):
        return tuple(f for f in ins if marking[f] > 0)
    if not ins or marking[ins[0]] == 0:
        return ()
    if kind is NodeKind.XOR_SPLIT:
        return model.outgoing(node_id)
    return (None,)


def enabled(model: WorkflowModel, marking: Marking) -> list[str]:
    return [n.id for n in model.nodes if alternatives(model, marking, n.id)]


def firings(model: WorkflowModel, marking: Marking) -> list[tuple[str, str | None]]:
    """Every (node, alternative) pair that can fire, in canonical order."""
    return [(n.id, alt) for n in model.nodes for alt in alternatives(model, marking, n.id)]


def fire(
    model: WorkflowModel,
    marking: Marking,
    node_id: str,
    alternative: str | None = None,
    bound: int = DEFAULT_BOUND,
) -> Marking:
    choices = alternatives(model, marking, node_id)
    if not choices:
        raise NotEnabled(node_id)
    kind = model.node(node_id).kind
    if kind in _CHOICE_KINDS:
        if alternative is None:
            if len(choices) > 1:
                raise MissingSelector(node_id, choices)
            alternative = choices[0]
        elif alternative not in choices:
            raise BadSelector(node_id, alternative)
    elif alternative is not None:
        raise BadSelector(node_id, alternative)

    ins, outs = model.incoming(node_id), model.outgoing(node_id)
    if kind is NodeKind.XOR_SPLIT:
        consume, produce = ins[:1], (alternative,)
    elif kind in (NodeKind.XOR_JOIN, NodeKind.END):
        consume, produce = (alternative,), outs[:1]
    elif kind is NodeKind.AND_JOIN:
        consume, produce = ins, outs
    else:
        consume, produce = ins[:1], outs

    tokens = marking.as_dict()
    for f in consume:
        tokens[f] -= 1
    for f in produce:
        tokens[f] = tokens.get(f, 0) + 1
        if tokens[f] > bound:
            raise BoundExceeded(f, bound)
    completed = marking.completed
    if kind is NodeKind.END:
        completed = min(completed + 1, bound)
    return Marking.of(tokens, completed)


class Edge(NamedTuple):
    source: int
    node: str
    alternative: str | None
    target: int


class Pruned(NamedTuple):
    source: int
    node: str
    alternative: str | None
    flow: str


@dataclass
class StateGraph:
    states: list[Marking]
    edges: list[Edge]
    bound: int
    initial: int = 0
    pruned: list[Pruned] = field(default_factory=list)

    @property
    def bound_exceeded(self) -> bool:
        return bool(self.pruned)

    def successors(self, state: int) -> list[Edge]:
        return self._adjacency[state]

    @cached_property
    def _adjacency(self) -> list[list[Edge]]:
        adj: list[list[Edge]] = [[] for _ in self.states]
        for e in self.edges:
            adj[e.source].append(e)
        return adj

    def is_terminal(self, state: int) -> bool:
        return not self._adjacency[state]

    def fired_nodes(self) -> set[str]:
        return {e.node for e in self.edges}

    def export_text(self, model: WorkflowModel | None = None) -> str:
        lines = [f"state {i} {m.summary(model)}" for i, m in enumerate(self.states)]
        for e in sorted(self.edges, key=lambda e: (e.source, e.target, e.node, e.alternative or "")):
            lines.append(f"edge {e.source} {e.node} {e.target}")
        return "\n".join(lines) + "\n"


def explore(model: WorkflowModel, bound: int = DEFAULT_BOUND) -> StateGraph:
    """Breadth-first construction of every marking reachable within ``bound``.

    States are numbered in discovery order and each state's edges follow the
    canonical (node, alternative) order, so the result is deterministic. A
    firing that exceeds the bound is recorded in ``pruned`` and dropped.
    """
    if bound < 1:
        raise ValueError("token bound must be at least 1")
    start = initial_marking(model)
    states = [start]
    index = {start: 0}
    edges: list[Edge] = []
    pruned: list[Pruned] = []
    queue = deque([0])
    while queue:
        i = queue.popleft()
        marking = states[i]
        for node_id, alt in firings(model, marking):
            try:
                nxt = fire(model, marking, node_id, alt, bound)
            except BoundExceeded as exc:
                pruned.append(Pruned(i, node_id, alt, exc.flow_id))
                continue
            j = index.get(nxt)
            if j is None:
                j = index[nxt] = len(states)
                states.append(nxt)
                queue.append(j)
            edges.append(Edge(i, node_id, alt, j))
    return StateGraph(states=states, edges=edges, bound=bound, pruned=pruned)


def replay(
    model: WorkflowModel, steps: Iterator[tuple[str, str | None]], bound: int = DEFAULT_BOUND
) -> list[Marking]:
    """Fire ``steps`` from the initial marking; returns every visited marking."""
    visited = [initial_marking(model)]
    for node_id, alt in steps:
        visited.append(fire(model, visited[-1], node_id, alt, bound))
    return visited
