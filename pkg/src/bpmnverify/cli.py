"""``bpmn-verify`` command line.

Exit codes: 0 all properties hold / no violations, 1 a property fails or the
model is malformed, 2 bad input or missing environment, 3 the embedded checker
and SPIN disagree (or a diff failed its own round trip).
"""

from __future__ import annotations

import argparse
import sys
import time
import warnings
from pathlib import Path
from typing import Sequence

from . import __version__
from .checker import (
    DeadlockFree,
    NoDeadActivity,
    ProperCompletion,
    Property,
    RawLtl,
    Status,
    Verdict,
    check_graph,
    parse_property,
)
from .errors import BpmnVerifyError, PatchError, SpinError
from .ingest import BpmnWarning, SourceFormat, emit_dsl, load_model
from .model import WorkflowModel, validate_wellformed
from .promela import translate
from .reconfig import apply_patch, diff, emit_patch, load_patch, patch_to_json
from .report import EXIT_DISAGREE, EXIT_INPUT, EXIT_INVALID, EXIT_OK, VerificationReport
from .semantics import DEFAULT_BOUND, explore

DEFAULT_PROPERTIES = ("deadlock-free", "proper-completion", "no-dead-activity")


class UsageError(Exception):
    pass


def _fmt(value: str | None) -> SourceFormat | None:
    return SourceFormat(value) if value else None


def _load(path: str, fmt: str | None = None) -> WorkflowModel:
    if not Path(path).is_file():
        raise UsageError(f"no such file: {path}")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", BpmnWarning)
        model = load_model(path, _fmt(fmt))
    for w in caught:
        print(f"warning: {path}: {w.message}", file=sys.stderr)
    return model


def _properties(flags: Sequence[str] | None) -> list[tuple[str, Property]]:
    props = []
    for flag in flags or DEFAULT_PROPERTIES:
        if flag.startswith("ltl:"):
            path = Path(flag[4:])
            if not path.is_file():
                raise UsageError(f"no such LTL file: {path}")
            props.append((flag, RawLtl(path.read_text(encoding="utf-8").strip(), path.stem)))
            continue
        try:
            props.append((flag, parse_property(flag)))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    return props


def _emit(report: VerificationReport, fmt: str) -> int:
    sys.stdout.write(report.to_json() if fmt == "json" else report.to_text())
    return report.exit_code


# ------------------------------------------------------------------ commands


def cmd_validate(args) -> int:
    started = time.perf_counter()
    model = _load(args.model, args.input_format)
    report = VerificationReport("validate")
    report.add_model("model", model, args.model)
    violations = validate_wellformed(model)
    report.add_violations("model", violations)
    report.exit_code = EXIT_INVALID if violations else EXIT_OK
    report.summary = "well formed" if not violations else "model is not well formed"
    report.elapsed = time.perf_counter() - started
    return _emit(report, args.format)


def cmd_translate(args) -> int:
    model = _load(args.model, args.input_format)
    violations = validate_wellformed(model)
    if violations:
        print(f"{args.model}: {len(violations)} violations", file=sys.stderr)
        for v in violations:
            print(f"  {v}", file=sys.stderr)
        return EXIT_INVALID
    props = [p for _, p in _properties(args.prop or ())]
    program = translate(model, props, args.bound)
    if args.output:
        out = Path(args.output)
        out.write_text(program.source, encoding="utf-8", newline="\n")
        symbols = Path(args.symbols) if args.symbols else out.with_suffix(".sym")
        symbols.write_text(program.symbol_table(), encoding="utf-8", newline="\n")
        print(f"wrote {out} and {symbols}", file=sys.stderr)
    else:
        sys.stdout.write(program.source)
        if args.symbols:
            Path(args.symbols).write_text(program.symbol_table(), encoding="utf-8", newline="\n")
    names = ", ".join(program.property_names) or "(none)"
    print(f"ltl blocks: {names}", file=sys.stderr)
    return EXIT_OK


def _evaluate(
    model: WorkflowModel,
    role: str,
    props: list[tuple[str, Property]],
    args,
    report: VerificationReport,
    old: dict[str, Status] | None = None,
) -> dict[str, Status]:
    """Check ``props`` on ``model`` with the selected engine(s) and add results to ``report``."""
    engine = args.engine
    if engine == "embedded" and any(isinstance(p, RawLtl) for _, p in props):
        raise UsageError("raw LTL properties need --engine spin")
    graph = explore(model, args.bound) if engine in ("embedded", "both") else None
    program = None
    if engine in ("spin", "both"):
        from .spin import find_spin

        find_spin()
        program = translate(model, [p for _, p in props], args.bound)
    statuses: dict[str, Status] = {}
    for flag, prop in props:
        engines: dict[str, Status] = {}
        verdict: Verdict | None = None
        if graph is not None and not isinstance(prop, RawLtl):
            verdict = check_graph(model, graph, prop)
            engines["embedded"] = verdict.status
        if program is not None:
            from .spin import spin_check

            spin_verdict = spin_check(model, program, prop, args.timeout, args.keep_artifacts).verdict
            engines["spin"] = spin_verdict.status
            if verdict is None:
                verdict = spin_verdict
            else:
                verdict.elapsed += spin_verdict.elapsed
        assert verdict is not None
        entry = report.add_result(
            model, role, flag, verdict,
            engines if engine == "both" else None,
            old.get(flag) if old is not None else None,
        )
        if entry["agree"] is False:
            report.exit_code = EXIT_DISAGREE
        statuses[flag] = verdict.status
    return statuses


def cmd_check(args) -> int:
    started = time.perf_counter()
    model = _load(args.model, args.input_format)
    props = _properties(args.prop)
    report = VerificationReport("check", engine=args.engine, bound=args.bound)
    report.add_model("model", model, args.model)
    violations = validate_wellformed(model)
    if violations:
        report.add_violations("model", violations)
        report.exit_code = EXIT_INVALID
        report.summary = "model is not well formed; nothing checked"
        return _emit(report, args.format)
    if args.dump_states:
        Path(args.dump_states).write_text(explore(model, args.bound).export_text(model), encoding="utf-8")
    statuses = _evaluate(model, "model", props, args, report)
    failed = [f for f, s in statuses.items() if s is not Status.VALID]
    if report.exit_code != EXIT_DISAGREE:
        report.exit_code = EXIT_INVALID if failed else EXIT_OK
    report.summary = _summary(statuses, report.exit_code)
    report.elapsed = time.perf_counter() - started
    return _emit(report, args.format)


def _summary(statuses: dict[str, Status], code: int) -> str:
    if code == EXIT_DISAGREE:
        return "engines disagree: this is a tool bug, please report it"
    failed = [f for f, s in statuses.items() if s is not Status.VALID]
    if not failed:
        return f"all {len(statuses)} properties hold"
    return f"{len(failed)} of {len(statuses)} properties fail: {', '.join(failed)}"


def cmd_verify_reconfig(args) -> int:
    started = time.perf_counter()
    old = _load(args.old, args.input_format)
    props = _properties(args.prop)
    report = VerificationReport("verify-reconfig", engine=args.engine, bound=args.bound)
    report.add_model("old", old, args.old)
    if args.patch:
        try:
            patch = load_patch(args.patch)
            new = apply_patch(old, patch)
        except FileNotFoundError:
            raise UsageError(f"no such file: {args.patch}") from None
        source = f"{args.old} + {args.patch}"
    else:
        target = _load(args.new, args.input_format)
        new = apply_patch(old, diff(old, target))
        new = WorkflowModel(target.id, target.name, new.nodes, new.flows)
        source = args.new
    report.add_model("new", new, source)

    old_violations = validate_wellformed(old)
    new_violations = validate_wellformed(new)
    report.add_violations("old", old_violations)
    report.add_violations("new", new_violations)
    old_status: dict[str, Status] = {}
    if not old_violations:
        old_status = _evaluate(old, "old", props, args, report)
    if new_violations:
        report.exit_code = EXIT_INVALID
        report.summary = "reconfigured model is not well formed; revise the reconfiguration"
    else:
        new_status = _evaluate(new, "new", props, args, report, old_status if not old_violations else None)
        if report.exit_code != EXIT_DISAGREE:
            failed = [f for f, s in new_status.items() if s is not Status.VALID]
            report.exit_code = EXIT_INVALID if failed else EXIT_OK
            broken = [r["property"] for r in report.results if r["change"] == "newly-broken"]
            fixed = [r["property"] for r in report.results if r["change"] == "newly-fixed"]
            parts = [_summary(new_status, report.exit_code) + " on the new model"]
            if broken:
                parts.append("newly broken: " + ", ".join(broken))
            if fixed:
                parts.append("newly fixed: " + ", ".join(fixed))
            report.summary = "; ".join(parts)
        else:
            report.summary = _summary({}, EXIT_DISAGREE)
    report.elapsed = time.perf_counter() - started
    return _emit(report, args.format)


def cmd_diff(args) -> int:
    old = _load(args.old, args.input_format)
    new = _load(args.new, args.input_format)
    patch = diff(old, new)
    text = patch_to_json(patch) if args.format == "json" else emit_patch(patch)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)
    if args.self_check:
        if not apply_patch(old, patch).graph_equal(new):
            print("self-check failed: applying the diff does not reproduce the new model", file=sys.stderr)
            return EXIT_DISAGREE
        print(f"self-check passed ({len(patch)} ops)", file=sys.stderr)
    return EXIT_OK


def cmd_apply(args) -> int:
    model = _load(args.model, args.input_format)
    if not Path(args.patch).is_file():
        raise UsageError(f"no such file: {args.patch}")
    result = apply_patch(model, load_patch(args.patch))
    text = emit_dsl(result)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bpmn-verify",
        description="Verify BPMN workflows and their reconfigurations.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, formats=True):
        p.add_argument("--input-format", choices=[f.value for f in SourceFormat],
                       help="override format detection by file extension")
        if formats:
            p.add_argument("--format", choices=["text", "json"], default="text")

    def checking(p):
        p.add_argument("--prop", action="append", metavar="PROP",
                       help="deadlock-free, proper-completion, no-dead-activity, reach:<id>, "
                            "never:<id>, prec:<a>,<b>, resp:<a>,<b>, ltl:<file> (repeatable)")
        p.add_argument("--engine", choices=["embedded", "spin", "both"], default="embedded")
        p.add_argument("--bound", type=int, default=DEFAULT_BOUND, metavar="K")
        p.add_argument("--timeout", type=float, default=60.0, metavar="SECS")
        p.add_argument("--keep-artifacts", metavar="DIR", help="keep SPIN working files under DIR")

    p = sub.add_parser("validate", help="check a model is well formed")
    p.add_argument("model")
    common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("translate", help="generate Promela")
    p.add_argument("model")
    p.add_argument("--prop", action="append", metavar="PROP")
    p.add_argument("--bound", type=int, default=DEFAULT_BOUND, metavar="K")
    p.add_argument("-o", "--output")
    p.add_argument("--symbols", help="symbol table path (default: output with .sym suffix)")
    common(p, formats=False)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("check", help="check properties of a model")
    p.add_argument("model")
    checking(p)
    p.add_argument("--dump-states", metavar="FILE", help="write the explored state graph")
    common(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("diff", help="patch taking OLD to NEW")
    p.add_argument("old")
    p.add_argument("new")
    p.add_argument("-o", "--output")
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.add_argument("--self-check", action="store_true", help="verify that the patch reproduces NEW")
    p.add_argument("--input-format", choices=[f.value for f in SourceFormat])
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("apply", help="apply a patch and print the resulting model")
    p.add_argument("model")
    p.add_argument("patch")
    p.add_argument("-o", "--output")
    p.add_argument("--input-format", choices=[f.value for f in SourceFormat])
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("verify-reconfig", help="compare properties before and after a reconfiguration")
    p.add_argument("old")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--patch")
    group.add_argument("--new")
    checking(p)
    common(p)
    p.set_defaults(func=cmd_verify_reconfig)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if getattr(args, "bound", 1) < 1:
        print("error: --bound must be at least 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except (UsageError, PatchError, SpinError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BpmnVerifyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
