"""Explicit-state checking of workflow requirement templates with counterexamples."""

from __future__ import annotations

import enum
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence, Union

from .errors import BpmnVerifyError, UnknownNode, UnsupportedOnEmbeddedPath, ValidationRequired
from .model import NodeKind, WorkflowModel, validate_wellformed
from .semantics import DEFAULT_BOUND, Edge, Marking, StateGraph, explore

# ---------------------------------------------------------------- properties


@dataclass(frozen=True)
class DeadlockFree:
    flag = "deadlock-free"

    def targets(self) -> tuple[str, ...]:
        return ()


@dataclass(frozen=True)
class ProperCompletion:
    flag = "proper-completion"

    def targets(self) -> tuple[str, ...]:
        return ()


@dataclass(frozen=True)
class NoDeadActivity:
    flag = "no-dead-activity"

    def targets(self) -> tuple[str, ...]:
        return ()


@dataclass(frozen=True)
class Reachable:
    node: str

    @property
    def flag(self) -> str:
        return f"reach:{self.node}"

    def targets(self) -> tuple[str, ...]:
        return (self.node,)


@dataclass(frozen=True)
class NeverFires:
    node: str

    @property
    def flag(self) -> str:
        return f"never:{self.node}"

    def targets(self) -> tuple[str, ...]:
        return (self.node,)


@dataclass(frozen=True)
class Precedence:
    """``then`` may not fire before ``first`` has fired."""

    first: str
    then: str

    @property
    def flag(self) -> str:
        return f"prec:{self.first},{self.then}"

    def targets(self) -> tuple[str, ...]:
        return (self.first, self.then)


@dataclass(frozen=True)
class Response:
    """Every firing of ``trigger`` is eventually followed by a firing of ``response``."""

    trigger: str
    response: str

    @property
    def flag(self) -> str:
        return f"resp:{self.trigger},{self.response}"

    def targets(self) -> tuple[str, ...]:
        return (self.trigger, self.response)


@dataclass(frozen=True)
class RawLtl:
    text: str
    name: str = "raw"

    @property
    def flag(self) -> str:
        return f"ltl:{self.name}"

    def targets(self) -> tuple[str, ...]:
        return ()


Property = Union[
    DeadlockFree, ProperCompletion, NoDeadActivity, Reachable, NeverFires, Precedence, Response, RawLtl
]

SAFETY_PROPERTIES = (DeadlockFree, NeverFires, Precedence)


def parse_property(flag: str) -> Property:
    """Turn a CLI flag such as ``reach:End`` or ``prec:A,B`` into a property.

    ``ltl:`` flags are handled by the CLI, which has to read a file.
    """
    head, _, arg = flag.partition(":")
    simple = {"deadlock-free": DeadlockFree, "proper-completion": ProperCompletion,
              "no-dead-activity": NoDeadActivity}
    if head in simple and not arg:
        return simple[head]()
    if head in ("reach", "never") and arg and "," not in arg:
        return Reachable(arg) if head == "reach" else NeverFires(arg)
    if head in ("prec", "resp"):
        a, sep, b = arg.partition(",")
        if sep and a and b and "," not in b:
            return Precedence(a, b) if head == "prec" else Response(a, b)
    raise ValueError(f"unrecognised property {flag!r}")


# ---------------------------------------------------------------- verdicts


class Status(enum.Enum):
    VALID = "valid"
    INVALID = "invalid"
    BOUND_EXCEEDED = "bound-exceeded"


class Step(NamedTuple):
    node: str
    alternative: str | None
    marking: Marking


@dataclass(frozen=True)
class Trace:
    """A run from the initial marking.

    State ``i`` is the marking after ``i`` steps (state 0 is the initial
    marking). For a lasso, the run loops back from the last state to state
    ``lasso_start``; a lasso starting at the last state is the final state
    repeated forever.
    """

    initial: Marking
    steps: tuple[Step, ...] = ()
    lasso_start: int | None = None

    def __len__(self) -> int:
        return len(self.steps)

    def state(self, i: int) -> Marking:
        return self.initial if i == 0 else self.steps[i - 1].marking

    @property
    def final(self) -> Marking:
        return self.state(len(self.steps))

    def firings(self) -> list[tuple[str, str | None]]:
        return [(s.node, s.alternative) for s in self.steps]


@dataclass
class Verdict:
    status: Status
    counterexample: Trace | None = None
    states: int = 0
    edges: int = 0
    elapsed: float = 0.0
    message: str = ""
    dead_tasks: tuple[str, ...] = ()
    frontier: dict[str, int] = field(default_factory=dict)

    @property
    def valid(self) -> bool:
        return self.status is Status.VALID


# ---------------------------------------------------------------- graph helpers


def _bfs_parents(graph: StateGraph) -> list[Edge | None]:
    """Edge that first discovered each state; ``explore`` runs BFS in canonical order."""
    parent: list[Edge | None] = [None] * len(graph.states)
    seen = [False] * len(graph.states)
    seen[graph.initial] = True
    for e in graph.edges:
        if not seen[e.target]:
            seen[e.target] = True
            parent[e.target] = e
    return parent


def _edges_to(parents: list[Edge | None], state: int) -> list[Edge]:
    path = []
    while parents[state] is not None:
        e = parents[state]
        path.append(e)
        state = e.source
    path.reverse()
    return path


def _trace(graph: StateGraph, edges: Iterable[Edge], lasso_start: int | None = None) -> Trace:
    steps = tuple(Step(e.node, e.alternative, graph.states[e.target]) for e in edges)
    return Trace(graph.states[graph.initial], steps, lasso_start)


def _shortest_cycle(graph: StateGraph, state: int) -> list[Edge]:
    parent: dict[int, Edge] = {}
    queue = deque([state])
    visited = {state}
    while queue:
        s = queue.popleft()
        for e in graph.successors(s):
            if e.target == state:
                path = [e]
                while s != state:
                    path.append(parent[s])
                    s = parent[s].source
                path.reverse()
                return path
            if e.target not in visited:
                visited.add(e.target)
                parent[e.target] = e
                queue.append(e.target)
    raise AssertionError("state is not on a cycle")


def _cyclic_states(graph: StateGraph) -> list[bool]:
    """Flags states lying on some cycle (iterative Tarjan)."""
    n = len(graph.states)
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    cyclic = [False] * n
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, i = work.pop()
            if i == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            succ = graph.successors(v)
            if i < len(succ):
                work.append((v, i + 1))
                w = succ[i].target
                if w == v:
                    cyclic[v] = True
                if index[w] == -1:
                    work.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
                continue
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                component = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    component.append(w)
                    if w == v:
                        break
                if len(component) > 1:
                    for w in component:
                        cyclic[w] = True
    return cyclic


def _frontier(graph: StateGraph) -> dict[str, int]:
    terminal = [i for i in range(len(graph.states)) if graph.is_terminal(i)]
    return {
        "terminal_states": len(terminal),
        "completed_states": sum(graph.states[i].properly_completed for i in terminal),
        "deadlocked_states": sum(not graph.states[i].is_empty for i in terminal),
    }


# ---------------------------------------------------------------- property checks


def _check_deadlock(graph: StateGraph) -> Verdict:
    parents = _bfs_parents(graph)
    for i, m in enumerate(graph.states):
        if graph.is_terminal(i) and not m.is_empty:
            return Verdict(Status.INVALID, _trace(graph, _edges_to(parents, i)),
                           message=f"deadlock at {m.summary()}")
    return Verdict(Status.VALID)


def _check_completion(graph: StateGraph) -> Verdict:
    parents = _bfs_parents(graph)
    for i, m in enumerate(graph.states):
        if graph.is_terminal(i) and not m.properly_completed:
            return Verdict(Status.INVALID, _trace(graph, _edges_to(parents, i)),
                           message=f"run stops without proper completion at {m.summary()}")
    cyclic = _cyclic_states(graph)
    for i in range(len(graph.states)):
        if cyclic[i]:
            prefix = _edges_to(parents, i)
            loop = _shortest_cycle(graph, i)
            return Verdict(Status.INVALID, _trace(graph, prefix + loop, len(prefix)),
                           message="run can loop forever without completing")
    return Verdict(Status.VALID)


def _check_never(graph: StateGraph, node: str) -> Verdict:
    parents = _bfs_parents(graph)
    for i in range(len(graph.states)):
        for e in graph.successors(i):
            if e.node == node:
                return Verdict(Status.INVALID, _trace(graph, _edges_to(parents, i) + [e]),
                               message=f"{node} fires")
    return Verdict(Status.VALID)


def _check_precedence(graph: StateGraph, first: str, then: str) -> Verdict:
    start = (graph.initial, False)
    parent: dict[tuple[int, bool], tuple[tuple[int, bool], Edge] | None] = {start: None}
    queue = deque([start])
    while queue:
        state, seen_first = queue.popleft()
        for e in graph.successors(state):
            if e.node == first:
                nxt = (e.target, True)
            elif e.node == then and not seen_first:
                path = [e]
                cur = (state, seen_first)
                while parent[cur] is not None:
                    cur, edge = parent[cur]
                    path.append(edge)
                path.reverse()
                return Verdict(Status.INVALID, _trace(graph, path),
                               message=f"{then} fires before {first}")
            else:
                nxt = (e.target, seen_first)
            if nxt not in parent:
                parent[nxt] = ((state, seen_first), e)
                queue.append(nxt)
    return Verdict(Status.VALID)


def _check_response(graph: StateGraph, trigger: str, response: str) -> Verdict:
    """Nested depth-first search for an accepting cycle of the product with
    the automaton for "eventually ``trigger``, and ``response`` never after".

    Product states are (state, pending). Pending states are accepting; a
    ``response`` firing kills them. Terminal states stutter.
    """

    def successors(ps: tuple[int, bool]) -> list[tuple[Edge | None, tuple[int, bool]]]:
        state, pending = ps
        out: list[tuple[Edge | None, tuple[int, bool]]] = []
        edges = graph.successors(state)
        if not edges:
            out.append((None, ps))
        for e in edges:
            if pending:
                if e.node != response:
                    out.append((e, (e.target, True)))
            else:
                out.append((e, (e.target, False)))
                if e.node == trigger and e.node != response:
                    out.append((e, (e.target, True)))
        return out

    start = (graph.initial, False)
    visited1 = {start}
    visited2: set[tuple[int, bool]] = set()
    # each frame: (product state, edge that led here, successor list, next index)
    stack1 = [(start, None, successors(start), 0)]
    on_stack = {start: 0}
    while stack1:
        ps, via, succ, i = stack1[-1]
        if i < len(succ):
            stack1[-1] = (ps, via, succ, i + 1)
            edge, nxt = succ[i]
            if nxt not in visited1:
                visited1.add(nxt)
                on_stack[nxt] = len(stack1)
                stack1.append((nxt, edge, successors(nxt), 0))
            continue
        if ps[1]:
            cycle = _inner_dfs(ps, successors, on_stack, visited2)
            if cycle is not None:
                hit, inner_edges = cycle
                prefix = [f[1] for f in stack1[1:]]
                closing = [f[1] for f in stack1[on_stack[hit] + 1:]]
                edges = [e for e in prefix + inner_edges + closing if e is not None]
                lasso = len([e for e in prefix if e is not None])
                loop_len = len(edges) - lasso
                # the loop must revisit the seed; with only stuttering it is the final state
                return Verdict(
                    Status.INVALID,
                    _trace(graph, edges, lasso if loop_len else len(edges)),
                    message=f"{trigger} fires and {response} never follows",
                )
        stack1.pop()
        del on_stack[ps]
    return Verdict(Status.VALID)


def _inner_dfs(seed, successors, on_stack, visited2):
    """Search from ``seed`` for a state on the outer stack; returns it and the edges taken."""
    if seed in visited2:
        return None
    visited2.add(seed)
    stack = [(seed, successors(seed), 0)]
    path: list[Edge | None] = []
    while stack:
        ps, succ, i = stack[-1]
        if i < len(succ):
            stack[-1] = (ps, succ, i + 1)
            edge, nxt = succ[i]
            if nxt in on_stack:
                return nxt, [e for e in path + [edge]]
            if nxt not in visited2:
                visited2.add(nxt)
                path.append(edge)
                stack.append((nxt, successors(nxt), 0))
            continue
        stack.pop()
        if path:
            path.pop()
    return None


def _check_reachable(graph: StateGraph, node: str) -> Verdict:
    if node in graph.fired_nodes():
        return Verdict(Status.VALID)
    return Verdict(Status.INVALID, _trace(graph, ()), message=f"{node} never fires",
                   frontier=_frontier(graph))


def _check_dead_activity(model: WorkflowModel, graph: StateGraph) -> Verdict:
    fired = graph.fired_nodes()
    dead = tuple(n.id for n in model.nodes_of(NodeKind.TASK) if n.id not in fired)
    if not dead:
        return Verdict(Status.VALID)
    return Verdict(Status.INVALID, _trace(graph, ()), message="dead tasks: " + ", ".join(dead),
                   dead_tasks=dead, frontier=_frontier(graph))


# ---------------------------------------------------------------- entry points


def _require_targets(model: WorkflowModel, prop: Property) -> None:
    if isinstance(prop, RawLtl):
        raise UnsupportedOnEmbeddedPath()
    for node in prop.targets():
        if node not in model.node_index:
            raise UnknownNode(node)


def check_graph(model: WorkflowModel, graph: StateGraph, prop: Property) -> Verdict:
    """Evaluate ``prop`` on an already explored state graph."""
    _require_targets(model, prop)
    started = time.perf_counter()
    if graph.bound_exceeded:
        p = graph.pruned[0]
        verdict = Verdict(
            Status.BOUND_EXCEEDED,
            message=f"firing {p.node} would exceed the token bound {graph.bound} on {p.flow}",
        )
    elif isinstance(prop, DeadlockFree):
        verdict = _check_deadlock(graph)
    elif isinstance(prop, ProperCompletion):
        verdict = _check_completion(graph)
    elif isinstance(prop, Reachable):
        verdict = _check_reachable(graph, prop.node)
    elif isinstance(prop, NoDeadActivity):
        verdict = _check_dead_activity(model, graph)
    elif isinstance(prop, NeverFires):
        verdict = _check_never(graph, prop.node)
    elif isinstance(prop, Precedence):
        verdict = _check_precedence(graph, prop.first, prop.then)
    elif isinstance(prop, Response):
        verdict = _check_response(graph, prop.trigger, prop.response)
    else:
        raise TypeError(f"not a property: {prop!r}")
    verdict.states = len(graph.states)
    verdict.edges = len(graph.edges)
    verdict.elapsed = time.perf_counter() - started
    return verdict


def _explore_checked(model: WorkflowModel, bound: int) -> StateGraph:
    violations = validate_wellformed(model)
    if violations:
        raise ValidationRequired(violations)
    return explore(model, bound)


def check(model: WorkflowModel, prop: Property, bound: int = DEFAULT_BOUND) -> Verdict:
    _require_targets(model, prop)
    started = time.perf_counter()
    verdict = check_graph(model, _explore_checked(model, bound), prop)
    verdict.elapsed = time.perf_counter() - started
    return verdict


def check_all(
    model: WorkflowModel, properties: Sequence[Property], bound: int = DEFAULT_BOUND
) -> list[tuple[Property, Verdict | BpmnVerifyError]]:
    """Check every property against one shared exploration.

    A property that cannot be checked yields its error in place of a verdict;
    the rest of the batch still runs.
    """
    if not properties:
        return []
    graph = _explore_checked(model, bound)
    results: list[tuple[Property, Verdict | BpmnVerifyError]] = []
    for prop in properties:
        try:
            results.append((prop, check_graph(model, graph, prop)))
        except BpmnVerifyError as exc:
            results.append((prop, exc))
    return results
