#!/usr/bin/env python3
"""Stand-in for the SPIN toolchain (``spin``, ``cc`` and the compiled ``pan``).

SPIN itself is not installable in every test environment, so the bridge is
exercised against this script. It understands only what the bridge asks for:

    spin -V | spin -a model.pml | spin -t -p -g model.pml
    cc [-DNOCLAIM] -O2 -o pan pan.c
    pan -m1000000 [-a -N name [-A]]

The verifier explores the generated program with ``promela_subset`` and
prints output and trails in SPIN's format. ``FAKE_SPIN_MODE`` injects
failures: old, noversion, nocompile, ccfail, garbage, hang, notrail, badvar.
"""

from __future__ import annotations

import json
import os
import re
import shlex
import sys
import time
from collections import deque
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

import promela_subset as ps  # noqa: E402

MODE = os.environ.get("FAKE_SPIN_MODE", "")
TRAIL = "model.pml.trail"


def _key(s: dict) -> tuple:
    return tuple(sorted((k, v) for k, v in s.items() if k != "lastFired"))


def _search(prog: ps.Program, goal):
    """BFS for the shortest arm sequence ending in a state (or failing step) accepted by ``goal``.

    ``goal(state, arm, outcome)`` is called for each step; ``outcome`` is the
    successor or the failing assertion variable. Returns (path, outcome) or None.
    """
    start = dict(prog.initial)
    queue = deque([(start, [])])
    seen = {_key(start)}
    while queue:
        s, path = queue.popleft()
        executable = [i for i, a in enumerate(prog.arms) if all(s[v] > 0 for v in a.guard)]
        if not executable and goal(s, None, None):
            return path, None
        for i in executable:
            try:
                t = ps.step(prog, s, prog.arms[i])
            except ps.AssertionFailed as exc:
                if goal(s, i, str(exc)):
                    return path + [i], str(exc)
                continue
            if goal(s, i, t):
                return path + [i], t
            if _key(t) not in seen:
                seen.add(_key(t))
                queue.append((t, path + [i]))
    return None


def _states(prog: ps.Program):
    start = dict(prog.initial)
    succ, todo = {}, [(start, [])]
    paths = {}
    while todo:
        s, path = todo.pop()
        k = _key(s)
        if k in succ:
            continue
        paths[k] = (s, path)
        out = []
        for i, a in enumerate(prog.arms):
            if all(s[v] > 0 for v in a.guard):
                try:
                    t = ps.step(prog, s, a)
                except ps.AssertionFailed:
                    continue
                out.append((i, t))
                todo.append((t, path + [i]))
        succ[k] = out
    return succ, paths


def _uncompleted_cycle(prog: ps.Program):
    """A lasso through states with completed == 0, as (prefix, cycle) arm lists."""
    succ, paths = _states(prog)
    for k, (s, prefix) in sorted(paths.items(), key=lambda kv: len(kv[1][1])):
        if s["completed"]:
            continue
        queue, seen = deque([(s, [])]), set()
        while queue:
            u, cyc = queue.popleft()
            for i, t in succ[_key(u)]:
                if t["completed"]:
                    continue
                if _key(t) == k:
                    return prefix, cyc + [i]
                if _key(t) not in seen:
                    seen.add(_key(t))
                    queue.append((t, cyc + [i]))
    return None


def pan(noclaim: bool, argv: list[str]) -> int:
    if MODE == "hang":
        time.sleep(60)
    if MODE == "garbage":
        print("pan: something unexpected happened")
        return 0
    source = Path("pan.c").read_text()
    prog = ps.parse(source)
    name = argv[argv.index("-N") + 1] if "-N" in argv else None
    codes = {m.group(1): int(m.group(2)) for m in re.finditer(r"#define fired_(\w+) \(lastFired == (\d+)\)", source)}
    ltl = dict(re.findall(r"^ltl (\w+) \{ (.*) \}$", source, re.M))
    if name is not None and name not in ltl:
        print(f"pan: claim {name} not found")
        return 1
    found = None
    message = ""
    if name is None or noclaim:
        def bad(s, arm, outcome):
            if arm is None:
                return not ps.final_assert_holds(prog, s)
            return isinstance(outcome, str)

        hit = _search(prog, bad)
        if hit:
            path, outcome = hit
            found = {"path": path, "assert": outcome}
            expr = f"({outcome}<{prog.bound})" if outcome else "final"
            message = f"pan:1: assertion violated {expr} (at depth {len(path)})"
    elif name.startswith(("reach_", "never_")):
        code = codes[name.split("_", 1)[1]]
        hit = _search(prog, lambda s, arm, t: isinstance(t, dict) and t["lastFired"] == code)
        if hit:
            found = {"path": hit[0]}
            message = "pan:1: assertion violated  !( !(!(fired)))"
    elif name == "complete":
        hit = _search(prog, lambda s, arm, t: arm is None and not ps.final_assert_holds(prog, s))
        if hit:
            found = {"path": hit[0]}
            message = "pan:1: assertion violated (final)"
        else:
            lasso = _uncompleted_cycle(prog)
            if lasso:
                found = {"path": lasso[0] + lasso[1], "cycle": len(lasso[0])}
                message = "pan:1: acceptance cycle (at depth 1)"
    else:
        print(f"fake pan cannot decide {name}")
        return 0
    if found and MODE != "notrail":
        Path(TRAIL).write_text(json.dumps(found))
    if message:
        print(message)
    print("(Spin Version 6.5.2 -- 6 December 2019)")
    print(f"State-vector 28 byte, depth reached {len(found['path']) if found else 0}, errors: {1 if found else 0}")
    return 0


def _line(n: int, stmt: str) -> str:
    return f"{n:3d}:\tproc  0 (Workflow:1) model.pml:{20 + n} (state {n})\t[{stmt}]"


def replay() -> int:
    prog = ps.parse(Path("model.pml").read_text())
    found = json.loads(Path(TRAIL).read_text())
    out, n = [], 0

    def emit(stmt):
        nonlocal n
        n += 1
        out.append(_line(n, stmt))

    out.append("using statement merging")
    for var, value in prog.initial.items():
        if value:
            emit(f"{var} = {value}")
    if MODE == "badvar":
        emit("tok_zz = (tok_zz+1)")
    for idx, i in enumerate(found["path"]):
        if found.get("cycle") == idx:
            out.append("  <<<<<START OF CYCLE>>>>>")
        arm = prog.arms[i]
        emit(" && ".join(f"(({v}>0))" for v in arm.guard))
        failed = False
        for op, var in arm.body:
            if op == "dec":
                emit(f"{var} = ({var}-1)")
            elif op == "inc":
                emit(f"{var} = ({var}+1)")
            elif op == "assert":
                emit(f"assert(({var}<{prog.bound}))")
                if var == found.get("assert") and idx == len(found["path"]) - 1:
                    out.append(f"spin: model.pml:{20 + n}, Error: assertion violated")
                    failed = True
                    break
            else:
                emit("completed = ((completed<2)) -> (completed+1) : 2)")
        if not failed:
            emit(f"lastFired = {arm.code}")
    out.append("spin: trail ends after %d steps" % n)
    print("\n".join(out))
    return 0


def spin(argv: list[str]) -> int:
    if argv == ["-V"]:
        if MODE == "noversion":
            print("fake spin")
        elif MODE == "old":
            print("Spin Version 5.2.5 -- 17 April 2010")
        else:
            print("Spin Version 6.5.2 -- 6 December 2019")
        return 0
    if argv[:1] == ["-a"]:
        if MODE == "nocompile":
            print("spin: model.pml:3, Error: syntax error")
            return 1
        Path("pan.c").write_text(Path(argv[1]).read_text())
        return 0
    if argv[:3] == ["-t", "-p", "-g"]:
        return replay()
    print("fake spin: unsupported arguments " + " ".join(argv), file=sys.stderr)
    return 2


def cc(argv: list[str]) -> int:
    if MODE == "ccfail":
        print("pan.c:1:1: error: expected declaration", file=sys.stderr)
        return 1
    noclaim = "-DNOCLAIM" in argv
    target = Path(argv[argv.index("-o") + 1])
    me = shlex.quote(str(Path(__file__).resolve()))
    target.write_text(
        f'#!/bin/sh\nexec {shlex.quote(sys.executable)} {me} pan {int(noclaim)} "$@"\n'
    )
    target.chmod(0o755)
    return 0


def main(argv: list[str]) -> int:
    tool, rest = argv[0], argv[1:]
    if tool == "spin":
        return spin(rest)
    if tool == "cc":
        return cc(rest)
    return pan(rest[0] == "1", rest[1:])


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
