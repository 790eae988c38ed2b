"""Running an installed SPIN on generated Promela and mapping results back to the model.

Only these output patterns are interpreted:

* ``errors: N`` in the verifier output (the verdict);
* ``assertion violated (tok_<flow><K)`` (a token bound was exceeded);
* ``-p`` trail lines of the ``Workflow`` process whose statement is
  ``[tok_<flow> = ...]`` or ``[lastFired = <code>]``;
* ``<<<<<START OF CYCLE>>>>>`` (start of the loop in an acceptance-cycle trail).

Anything else is ignored; a run with no ``errors:`` line raises
:class:`~bpmnverify.errors.UnrecognizedSpinOutput`.
"""

from __future__ import annotations

import os
import re
import shutil
import signal
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

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
    Status,
    Step,
    Trace,
    Verdict,
)
from .errors import (
    CompileFailed,
    MissingTrail,
    SpinNotFound,
    SpinTimeout,
    SpinVersionUnsupported,
    UnmappableStep,
    UnrecognizedSpinOutput,
)
from .model import NodeKind, WorkflowModel
from .promela import PromelaProgram
from .semantics import Marking, initial_marking

SPIN_ENV = "BPMNVERIFY_SPIN"
MIN_VERSION = (6, 0, 0)
DEADLOCK_RUN = "deadlock"
BOUND_RUN = "bound"

_ERRORS = re.compile(r"errors:\s*(\d+)")
_BOUND_ASSERT = re.compile(r"assertion violated \(?\(?(tok_\w+)\s*<\s*\d+\)?\)?")
_VERSION = re.compile(r"Spin Version (\d+)\.(\d+)(?:\.(\d+))?")
_STEP = re.compile(r"^\s*(\d+):\s*proc\s+(\S+)\s+\((\w+):\d+\).*?\[(.*)\]\s*$")
_TOK_VAR = re.compile(r"\btok_\w+")
_INC = re.compile(r"^(tok_\w+)\s*=\s*\(\s*(tok_\w+)\s*([+-])\s*1\s*\)$")
_SET = re.compile(r"^(tok_\w+)\s*=\s*(\d+)$")
_LAST = re.compile(r"^lastFired\s*=\s*(\d+)$")
_CYCLE = "START OF CYCLE"


class TrailLine(NamedTuple):
    step: int
    process: str
    statement: str
    raw: str


@dataclass
class SpinRun:
    property_name: str
    exit_status: int
    stdout: str
    stderr: str = ""
    errors: int = 0
    trail: list[TrailLine] | None = None
    trail_text: str = ""
    elapsed: float = 0.0
    spin_version: str = ""
    bound_violation: str | None = None
    artifacts: Path | None = None
    cycle_at: int | None = None


def find_spin() -> str:
    override = os.environ.get(SPIN_ENV)
    if override:
        path = shutil.which(override) or (override if os.access(override, os.X_OK) else None)
        if not path:
            raise SpinNotFound(f"{SPIN_ENV}={override!r} is not an executable")
        return path
    path = shutil.which("spin")
    if path is None:
        raise SpinNotFound(f"spin is not on PATH; set {SPIN_ENV} to its location")
    return path


def spin_available() -> bool:
    try:
        find_spin()
    except SpinNotFound:
        return False
    return True


def _run(cmd: list[str], cwd: Path, deadline: float) -> subprocess.CompletedProcess:
    remaining = deadline - time.monotonic()
    if remaining <= 0:
        raise SpinTimeout(f"timed out before running {cmd[0]}")
    proc = subprocess.Popen(
        cmd, cwd=cwd, stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
        start_new_session=True,
    )
    try:
        out, err = proc.communicate(timeout=remaining)
    except subprocess.TimeoutExpired:
        os.killpg(proc.pid, signal.SIGKILL)
        proc.communicate()
        raise SpinTimeout(f"{' '.join(cmd)} exceeded the time limit") from None
    return subprocess.CompletedProcess(cmd, proc.returncode, out, err)


def spin_version(exe: str | None = None) -> str:
    exe = exe or find_spin()
    out = subprocess.run([exe, "-V"], capture_output=True, text=True, timeout=30)
    m = _VERSION.search(out.stdout + out.stderr)
    if not m:
        raise SpinVersionUnsupported(f"cannot read a version from {exe} -V: {out.stdout.strip()!r}")
    version = tuple(int(g or 0) for g in m.groups())
    if version < MIN_VERSION:
        raise SpinVersionUnsupported(f"SPIN {m.group(0)} predates ltl blocks (need 6.0 or newer)")
    return m.group(0)


def _without_final_assert(source: str) -> str:
    marker = "  /* proper completion: no tokens left and an end event was reached */\n"
    head, sep, tail = source.partition(marker)
    if not sep:
        return source
    rest = tail.split("\n", 1)[1]
    return head + "  skip\n" + rest


def parse_trail(text: str) -> tuple[list[TrailLine], int | None]:
    """Workflow-process statements from ``spin -t -p`` output, and the index of
    the first statement inside the accepting cycle (if any)."""
    lines: list[TrailLine] = []
    cycle_at = None
    for raw in text.splitlines():
        if _CYCLE in raw:
            cycle_at = len(lines)
            continue
        m = _STEP.match(raw)
        if m and m.group(3) == "Workflow":
            lines.append(TrailLine(int(m.group(1)), m.group(2), m.group(4).strip(), raw))
    return lines, cycle_at


def run_spin(
    program: PromelaProgram,
    property_name: str | None = None,
    timeout: float = 60.0,
    keep_artifacts: str | Path | None = None,
    cc: str | None = None,
) -> SpinRun:
    """Generate, compile and run the SPIN verifier for one property.

    ``property_name`` selects an ``ltl`` block; ``None`` or ``"deadlock"``
    checks the assertions only, and ``"bound"`` checks only the token-bound
    assertions. On errors the trail is replayed with ``spin -t -p``.
    """
    exe = find_spin()
    version = spin_version(exe)
    name = property_name or DEADLOCK_RUN
    started = time.monotonic()
    deadline = started + timeout
    workdir = Path(tempfile.mkdtemp(prefix="bpmnverify-spin-"))
    try:
        source = program.source
        claimless = name in (DEADLOCK_RUN, BOUND_RUN)
        if name == BOUND_RUN:
            source = _without_final_assert(source)
        elif not claimless and name not in program.property_names:
            raise ValueError(f"program has no ltl block named {name!r}")
        (workdir / "model.pml").write_text(source, encoding="utf-8")

        gen = _run([exe, "-a", "model.pml"], workdir, deadline)
        if gen.returncode != 0 or not (workdir / "pan.c").exists():
            raise CompileFailed("spin -a failed", gen.stdout + gen.stderr)
        compile_cmd = [cc or os.environ.get("CC", "cc"), "-O2", "-o", "pan", "pan.c"]
        if claimless:
            compile_cmd.insert(1, "-DNOCLAIM")
        built = _run(compile_cmd, workdir, deadline)
        if built.returncode != 0:
            raise CompileFailed("compiling pan.c failed", built.stdout + built.stderr)

        pan_cmd = ["./pan", "-m1000000"]
        if not claimless:
            pan_cmd += ["-a", "-N", name]
            if name != "complete":
                pan_cmd.append("-A")
        verify = _run(pan_cmd, workdir, deadline)
        out = verify.stdout + verify.stderr
        m = _ERRORS.search(out)
        if m is None:
            raise UnrecognizedSpinOutput("verifier output has no 'errors:' line", out)
        run = SpinRun(name, verify.returncode, verify.stdout, verify.stderr,
                      errors=int(m.group(1)), spin_version=version)
        bound = _BOUND_ASSERT.search(out)
        if bound:
            run.bound_violation = bound.group(1)

        trail_file = workdir / "model.pml.trail"
        if run.errors and trail_file.exists():
            replay = _run([exe, "-t", "-p", "-g", "model.pml"], workdir, deadline)
            run.trail_text = replay.stdout
            run.trail, run.cycle_at = parse_trail(replay.stdout)
        run.elapsed = time.monotonic() - started
        if keep_artifacts is not None:
            target = Path(keep_artifacts) / name
            if target.exists():
                shutil.rmtree(target)
            shutil.copytree(workdir, target)
            run.artifacts = target
        return run
    finally:
        shutil.rmtree(workdir, ignore_errors=True)


def map_trail(run: SpinRun, program: PromelaProgram, model: WorkflowModel) -> Trace:
    """Rebuild the BPMN run recorded in a SPIN trail.

    Each ``lastFired = <code>`` closes one firing; the token updates since the
    previous firing say which flows it consumed and produced, which picks the
    alternative of exclusive gateways and end events. Statements naming a
    token variable or node code missing from the program's symbol table raise
    :class:`UnmappableStep`.
    """
    if run.trail is None:
        raise MissingTrail(f"run {run.property_name!r} has no trail to map")
    by_ident = program.by_identifier()
    by_code = program.node_by_code()

    tokens: dict[str, int] = {}
    initial: Marking | None = None
    completed = 0
    consumed: list[str] = []
    produced: list[str] = []
    steps: list[Step] = []
    lasso_start = None

    def flow_of(var: str, line: TrailLine) -> str:
        sym = by_ident.get(var)
        if sym is None or sym.kind != "flow":
            raise UnmappableStep(line.raw, f"unknown variable {var!r}")
        return sym.bpmn_id

    for i, line in enumerate(run.trail):
        if i == run.cycle_at:
            lasso_start = len(steps)
        stmt = line.statement
        for var in _TOK_VAR.findall(stmt):
            flow_of(var, line)
        if (m := _SET.match(stmt)) is not None:
            tokens[flow_of(m.group(1), line)] = int(m.group(2))
        elif (m := _INC.match(stmt)) is not None:
            if initial is None:
                initial = Marking.of(tokens)
            flow = flow_of(m.group(1), line)
            if m.group(3) == "+":
                tokens[flow] = tokens.get(flow, 0) + 1
                produced.append(flow)
            else:
                tokens[flow] = tokens.get(flow, 0) - 1
                consumed.append(flow)
        elif (m := _LAST.match(stmt)) is not None:
            sym = by_code.get(int(m.group(1)))
            if sym is None or sym.bpmn_id not in model.node_index:
                raise UnmappableStep(line.raw, f"unknown node code {m.group(1)}")
            node_id = sym.bpmn_id
            kind = model.node(node_id).kind
            alternative = None
            if kind is NodeKind.XOR_SPLIT and produced:
                alternative = produced[0]
            elif kind in (NodeKind.XOR_JOIN, NodeKind.END) and consumed:
                alternative = consumed[0]
            if kind is NodeKind.END:
                completed = min(completed + 1, program.bound)
            steps.append(Step(node_id, alternative, Marking.of(tokens, completed)))
            consumed, produced = [], []
    if initial is None:
        initial = Marking.of(tokens)
    if run.cycle_at is not None and lasso_start is None:
        lasso_start = len(steps)
    return Trace(initial, tuple(steps), lasso_start)


# ------------------------------------------------------------------ verdicts


@dataclass
class SpinVerdict:
    verdict: Verdict
    runs: list[SpinRun] = field(default_factory=list)


def _runs_for(program: PromelaProgram, prop: Property, model: WorkflowModel) -> list[str]:
    short = {s.bpmn_id: s.identifier[len("fired_"):] for s in program.symbols.values() if s.kind == "node"}
    if isinstance(prop, DeadlockFree):
        return [DEADLOCK_RUN]
    if isinstance(prop, ProperCompletion):
        return ["complete"]
    if isinstance(prop, Reachable):
        return [f"reach_{short[prop.node]}"]
    if isinstance(prop, NoDeadActivity):
        return [f"reach_{short[t.id]}" for t in model.nodes_of(NodeKind.TASK)]
    if isinstance(prop, NeverFires):
        return [f"never_{short[prop.node]}"]
    if isinstance(prop, Precedence):
        return [f"prec_{short[prop.first]}_{short[prop.then]}"]
    if isinstance(prop, Response):
        return [f"resp_{short[prop.trigger]}_{short[prop.response]}"]
    if isinstance(prop, RawLtl):
        return [n for n in program.property_names if n == prop.name] or [prop.name]
    raise TypeError(f"not a property: {prop!r}")


def spin_check(
    model: WorkflowModel,
    program: PromelaProgram,
    prop: Property,
    timeout: float = 60.0,
    keep_artifacts: str | Path | None = None,
) -> SpinVerdict:
    """Verdict for ``prop`` computed by SPIN on ``program``.

    A run of the token-bound assertions comes first; if it fails the verdict
    is ``BOUND_EXCEEDED`` whatever the property. Reachability is refuted: a
    violation of ``[] !fired_<node>`` is the witness that the node fires.
    """
    started = time.monotonic()
    if keep_artifacts is not None:
        keep_artifacts = Path(keep_artifacts) / model.id
        keep_artifacts.mkdir(parents=True, exist_ok=True)
    bound_run = run_spin(program, BOUND_RUN, timeout, keep_artifacts)
    runs = [bound_run]
    if bound_run.errors:
        flow = bound_run.bound_violation or "?"
        verdict = Verdict(Status.BOUND_EXCEEDED, message=f"token bound exceeded on {flow}")
        return SpinVerdict(verdict, runs)

    names = _runs_for(program, prop, model)
    for name in names:
        runs.append(run_spin(program, name, timeout, keep_artifacts))
    property_runs = runs[1:]

    if isinstance(prop, (Reachable, NoDeadActivity)):
        targets = [prop.node] if isinstance(prop, Reachable) else [t.id for t in model.nodes_of(NodeKind.TASK)]
        dead = tuple(node for node, r in zip(targets, property_runs) if r.errors == 0)
        if not dead:
            verdict = Verdict(Status.VALID)
        else:
            verdict = Verdict(Status.INVALID, Trace(initial_marking(model)),
                              message="never fires: " + ", ".join(dead),
                              dead_tasks=dead if isinstance(prop, NoDeadActivity) else ())
    else:
        failing = next((r for r in property_runs if r.errors), None)
        if failing is None:
            verdict = Verdict(Status.VALID)
        else:
            trace = map_trail(failing, program, model) if failing.trail is not None else None
            verdict = Verdict(Status.INVALID, trace, message=f"SPIN reports errors for {failing.property_name}")
    verdict.elapsed = time.monotonic() - started
    return SpinVerdict(verdict, runs)
