"""Command-line behaviour: exit codes, outputs and reports."""

from __future__ import annotations

import hashlib
import json
import subprocess
import sys

import jsonschema
import pytest

import corpus
from bpmnverify.cli import main
from bpmnverify.report import REPORT_SCHEMA, render_text

FX = corpus.FIXTURES


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv, "--format", "json")
    doc = json.loads(out)
    jsonschema.validate(doc, REPORT_SCHEMA)
    assert doc["exit_code"] == code
    return code, doc


# ------------------------------------------------------------ validate


def test_validate_ok(capsys):
    code, out, _ = run(capsys, "validate", FX / "m1.wf")
    assert code == 0 and "0 violations" in out


def test_validate_broken(capsys):
    code, out, _ = run(capsys, "validate", FX / "broken.wf")
    assert code == 1
    assert "4 violations" in out
    assert "BadDegree(S)" in out and "Unreachable(E)" in out


def test_validate_missing_file(capsys):
    code, _, err = run(capsys, "validate", "nosuchfile")
    assert code == 2 and "no such file" in err


def test_parse_error_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.wf"
    bad.write_text("start S\ntask A;")
    code, _, err = run(capsys, "validate", bad)
    assert code == 2 and "line" in err


def test_xml_warning_goes_to_stderr(capsys):
    code, _, err = run(capsys, "validate", FX / "m3.xml")
    assert code == 0 and "warning:" in err


# ------------------------------------------------------------ translate


def test_translate_matches_golden(tmp_path, capsys):
    out = tmp_path / "m2.pml"
    code, _, err = run(capsys, "translate", FX / "m2.wf", "--prop", "proper-completion", "-o", out)
    assert code == 0
    assert out.read_bytes() == (corpus.GOLDEN / "m2.pml").read_bytes()
    assert out.with_suffix(".sym").read_bytes() == (corpus.GOLDEN / "m2.sym").read_bytes()
    assert "ltl blocks: complete" in err


def test_translate_reach_block(capsys):
    code, out, err = run(capsys, "translate", FX / "m3.wf", "--prop", "reach:End")
    assert code == 0 and "ltl reach_End" in out and "reach_End" in err


def test_translate_broken(capsys):
    code, out, err = run(capsys, "translate", FX / "broken.wf")
    assert code == 1 and out == "" and "violations" in err


def test_translate_symbols_path(tmp_path, capsys):
    sym = tmp_path / "table.txt"
    code, out, _ = run(capsys, "translate", FX / "m1.wf", "--symbols", sym)
    assert code == 0 and out.startswith("/*")
    assert sym.read_text() == (corpus.GOLDEN / "m1.sym").read_text()


# ------------------------------------------------------------ check


def test_check_m3_deadlock(capsys):
    code, out, _ = run(capsys, "check", FX / "m3.wf", "--prop", "deadlock-free")
    assert code == 1
    assert "counterexample (2 steps)" in out
    assert "step 2: fire Task 'Task A'" in out


def test_check_m2_ok(capsys):
    code, out, _ = run(capsys, "check", FX / "m2.wf", "--prop", "deadlock-free", "--prop", "proper-completion")
    assert code == 0 and "all 2 properties hold" in out


def test_check_default_properties(capsys):
    code, doc = run_json(capsys, "check", FX / "m2.wf")
    assert code == 0
    assert [r["property"] for r in doc["results"]] == ["deadlock-free", "proper-completion", "no-dead-activity"]


def test_check_lasso_rendering(capsys):
    code, out, _ = run(capsys, "check", FX / "m4_loop.wf", "--prop", "resp:L,E")
    assert code == 1 and "-- repeats from step" in out


def test_check_bound_exceeded(capsys):
    code, doc = run_json(capsys, "check", FX / "unsafe_loop.wf", "--bound", "1")
    assert code == 1
    assert {r["status"] for r in doc["results"]} == {"bound-exceeded"}


def test_check_dump_states(tmp_path, capsys):
    dump = tmp_path / "states.txt"
    run(capsys, "check", FX / "m1.wf", "--dump-states", dump)
    assert dump.read_text().splitlines()[0] == "state 0 {S__A:1} completed=0"


@pytest.mark.parametrize("argv", [
    ["--prop", "fast"],
    ["--prop", "reach:Nope"],
    ["--bound", "0"],
    ["--engine", "warp"],
])
def test_check_usage_errors(argv, capsys):
    code, _, err = run(capsys, "check", FX / "m1.wf", *argv)
    assert code == 2 and err


def test_raw_ltl_needs_spin(tmp_path, capsys):
    f = tmp_path / "p.ltl"
    f.write_text("[] !fired_A")
    code, _, err = run(capsys, "check", FX / "m1.wf", "--prop", f"ltl:{f}")
    assert code == 2 and "--engine spin" in err


def test_check_broken_model(capsys):
    code, doc = run_json(capsys, "check", FX / "broken.wf")
    assert code == 1 and doc["results"] == [] and len(doc["violations"]) == 4


# ------------------------------------------------------------ verify-reconfig


def test_reconfig_m2_to_m3(capsys):
    code, doc = run_json(capsys, "verify-reconfig", FX / "m2.wf", "--patch", FX / "m2-to-m3.patch",
                         "--prop", "deadlock-free")
    assert code == 1
    old, new = doc["results"]
    assert (old["model"], old["status"]) == ("old", "valid")
    assert (new["model"], new["status"], new["change"]) == ("new", "invalid", "newly-broken")
    assert len(new["counterexample"]["steps"]) <= 2
    assert "newly broken: deadlock-free" in doc["summary"]


def test_reconfig_m3_to_m2(capsys):
    code, doc = run_json(capsys, "verify-reconfig", FX / "m3.wf", "--new", FX / "m2.wf",
                         "--prop", "deadlock-free")
    assert code == 0
    assert doc["results"][-1]["change"] == "newly-fixed"


def test_reconfig_insert_task_preserves(capsys):
    code, doc = run_json(capsys, "verify-reconfig", FX / "m1.wf", "--patch", FX / "m1-insert-task-b.patch")
    assert code == 0
    assert {r["change"] for r in doc["results"] if r["model"] == "new"} == {"preserved"}


def test_reconfig_bad_patch(tmp_path, capsys):
    patch = tmp_path / "p.patch"
    patch.write_text("remove-node nothere\n")
    code, _, err = run(capsys, "verify-reconfig", FX / "m1.wf", "--patch", patch)
    assert code == 2 and "nothere" in err


def test_reconfig_to_ill_formed(tmp_path, capsys):
    patch = tmp_path / "p.patch"
    patch.write_text("remove-flow S__A\n")
    code, doc = run_json(capsys, "verify-reconfig", FX / "m1.wf", "--patch", patch)
    assert code == 1
    assert {v["model"] for v in doc["violations"]} == {"new"}


# ------------------------------------------------------------ diff / apply


def _ops(patch_text):
    return [ln for ln in patch_text.splitlines() if ln.strip() and not ln.startswith(("description", "#"))]


def test_diff_identity(capsys):
    code, out, _ = run(capsys, "diff", FX / "m1.wf", FX / "m1.wf")
    assert code == 0 and _ops(out) == []


def test_diff_self_check(capsys):
    code, out, err = run(capsys, "diff", FX / "m2.wf", FX / "m3.wf", "--self-check")
    assert code == 0 and out.strip() and "self-check passed" in err


def test_diff_across_formats(capsys):
    for dsl, xml in corpus.XML_TWINS.items():
        code, out, _ = run(capsys, "diff", FX / f"{dsl}.wf", FX / xml)
        assert code == 0 and _ops(out) == [], dsl


def test_diff_json(capsys):
    code, out, _ = run(capsys, "diff", FX / "m2.wf", FX / "m3.wf", "--format", "json")
    assert code == 0 and isinstance(json.loads(out), (list, dict))


def test_diff_then_apply(tmp_path, capsys):
    patch = tmp_path / "d.patch"
    result = tmp_path / "out.wf"
    assert run(capsys, "diff", FX / "m2.wf", FX / "m3.wf", "-o", patch)[0] == 0
    assert run(capsys, "apply", FX / "m2.wf", patch, "-o", result)[0] == 0
    assert corpus.model("m3").graph_equal(__import__("bpmnverify").load_model(result))


def test_apply_missing_patch(capsys):
    assert run(capsys, "apply", FX / "m1.wf", "nope.patch")[0] == 2


# ------------------------------------------------------------ reports


REPORT_COMMANDS = [
    ["validate", FX / "m1.wf"],
    ["validate", FX / "broken.wf"],
    ["check", FX / "m3.wf"],
    ["check", FX / "m4_loop.wf", "--prop", "proper-completion", "--prop", "resp:L,E"],
    ["check", FX / "random_07.wf", "--prop", "no-dead-activity"],
    ["check", FX / "unsafe_loop.wf", "--bound", "1"],
    ["verify-reconfig", FX / "m2.wf", "--patch", FX / "m2-to-m3.patch"],
    ["verify-reconfig", FX / "m3.wf", "--new", FX / "m2.wf"],
]


@pytest.mark.parametrize("argv", REPORT_COMMANDS, ids=lambda a: " ".join(str(x).rsplit("/", 1)[-1] for x in a))
def test_text_and_json_carry_the_same_content(argv, capsys):
    code_text, text, _ = run(capsys, *argv)
    code_json, doc = run_json(capsys, *argv)
    assert code_text == code_json
    assert render_text(doc) == text


def test_json_fields_are_stable(capsys):
    _, doc = run_json(capsys, "check", FX / "m3.wf", "--prop", "deadlock-free")
    assert list(doc) == ["schema", "command", "models", "engine", "bound", "violations",
                         "results", "exit_code", "summary", "elapsed"]
    step = doc["results"][0]["counterexample"]["steps"][0]
    assert step["node"] == "g1" and step["alternative"] == "f1"


def _digest():
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(FX.iterdir())}


def test_no_command_mutates_inputs(tmp_path, capsys):
    before = _digest()
    for argv in REPORT_COMMANDS:
        run(capsys, *argv)
    run(capsys, "translate", FX / "m2.wf", "-o", tmp_path / "x.pml")
    run(capsys, "diff", FX / "m2.wf", FX / "m3.xml", "--self-check")
    run(capsys, "apply", FX / "m1.wf", FX / "m1-insert-task-b.patch")
    assert _digest() == before


def test_argparse_errors_exit_2(capsys):
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys)[0] == 2
    assert run(capsys, "--version")[0] == 0


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "bpmnverify.cli", "validate", str(FX / "m1.wf")],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "0 violations" in proc.stdout
