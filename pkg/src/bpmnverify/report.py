"""Verification reports: one value rendered either as JSON or as text."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from .checker import Status, Trace, Verdict
from .model import Violation, WorkflowModel

SCHEMA_ID = "bpmn-verify/report/1"

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INPUT = 2
EXIT_DISAGREE = 3

_STATUS_VALUES = [s.value for s in Status]

_TRACE_SCHEMA = {
    "type": "object",
    "required": ["initial", "steps", "lasso_start"],
    "additionalProperties": False,
    "properties": {
        "initial": {"$ref": "#/$defs/marking"},
        "lasso_start": {"type": ["integer", "null"], "minimum": 0},
        "steps": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["index", "node", "name", "kind", "alternative", "marking"],
                "additionalProperties": False,
                "properties": {
                    "index": {"type": "integer", "minimum": 1},
                    "node": {"type": "string"},
                    "name": {"type": "string"},
                    "kind": {"type": "string"},
                    "alternative": {"type": ["string", "null"]},
                    "marking": {"$ref": "#/$defs/marking"},
                },
            },
        },
    },
}

REPORT_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "bpmn-verify report",
    "type": "object",
    "required": ["schema", "command", "models", "engine", "bound", "violations",
                 "results", "exit_code", "summary", "elapsed"],
    "additionalProperties": False,
    "$defs": {
        "marking": {
            "type": "object",
            "required": ["tokens", "completed"],
            "additionalProperties": False,
            "properties": {
                "tokens": {"type": "object", "additionalProperties": {"type": "integer", "minimum": 1}},
                "completed": {"type": "integer", "minimum": 0},
            },
        },
        "status": {"enum": _STATUS_VALUES},
        "trace": _TRACE_SCHEMA,
    },
    "properties": {
        "schema": {"const": SCHEMA_ID},
        "command": {"enum": ["validate", "check", "verify-reconfig"]},
        "models": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["role", "id", "source"],
                "additionalProperties": False,
                "properties": {
                    "role": {"enum": ["model", "old", "new"]},
                    "id": {"type": "string"},
                    "source": {"type": "string"},
                },
            },
        },
        "engine": {"enum": ["embedded", "spin", "both"]},
        "bound": {"type": "integer", "minimum": 1},
        "violations": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["model", "code", "subject", "message"],
                "additionalProperties": False,
                "properties": {
                    "model": {"enum": ["model", "old", "new"]},
                    "code": {"type": "string"},
                    "subject": {"type": "string"},
                    "message": {"type": "string"},
                },
            },
        },
        "results": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["property", "model", "status", "message", "states", "edges",
                             "counterexample", "dead_tasks", "engines", "agree", "old_status", "change"],
                "additionalProperties": False,
                "properties": {
                    "property": {"type": "string"},
                    "model": {"enum": ["model", "old", "new"]},
                    "status": {"$ref": "#/$defs/status"},
                    "message": {"type": "string"},
                    "states": {"type": "integer", "minimum": 0},
                    "edges": {"type": "integer", "minimum": 0},
                    "counterexample": {"anyOf": [{"type": "null"}, {"$ref": "#/$defs/trace"}]},
                    "dead_tasks": {"type": "array", "items": {"type": "string"}},
                    "engines": {
                        "type": "object",
                        "additionalProperties": False,
                        "properties": {
                            "embedded": {"$ref": "#/$defs/status"},
                            "spin": {"$ref": "#/$defs/status"},
                        },
                    },
                    "agree": {"type": ["boolean", "null"]},
                    "old_status": {"anyOf": [{"type": "null"}, {"$ref": "#/$defs/status"}]},
                    "change": {"enum": [None, "preserved", "newly-broken", "newly-fixed", "still-broken"]},
                },
            },
        },
        "exit_code": {"enum": [EXIT_OK, EXIT_INVALID, EXIT_INPUT, EXIT_DISAGREE]},
        "summary": {"type": "string"},
        "elapsed": {"type": "number", "minimum": 0},
    },
}


def marking_json(marking) -> dict[str, Any]:
    return {"tokens": marking.as_dict(), "completed": marking.completed}


def trace_json(model: WorkflowModel, trace: Trace | None) -> dict[str, Any] | None:
    if trace is None:
        return None
    steps = []
    for i, step in enumerate(trace.steps, start=1):
        node = model.node(step.node)
        steps.append({
            "index": i,
            "node": step.node,
            "name": node.label,
            "kind": node.kind.label,
            "alternative": step.alternative,
            "marking": marking_json(step.marking),
        })
    return {"initial": marking_json(trace.initial), "steps": steps, "lasso_start": trace.lasso_start}


def change_of(old: Status, new: Status) -> str:
    if old is Status.VALID:
        return "preserved" if new is Status.VALID else "newly-broken"
    return "newly-fixed" if new is Status.VALID else "still-broken"


@dataclass
class VerificationReport:
    command: str
    engine: str = "embedded"
    bound: int = 2
    models: list[dict[str, str]] = field(default_factory=list)
    violations: list[dict[str, str]] = field(default_factory=list)
    results: list[dict[str, Any]] = field(default_factory=list)
    exit_code: int = EXIT_OK
    summary: str = ""
    elapsed: float = 0.0

    def add_model(self, role: str, model: WorkflowModel, source: str) -> None:
        self.models.append({"role": role, "id": model.id, "source": source})

    def add_violations(self, role: str, violations: list[Violation]) -> None:
        for v in violations:
            self.violations.append({"model": role, "code": v.code.value, "subject": v.subject,
                                    "message": v.message})

    def add_result(
        self,
        model: WorkflowModel,
        role: str,
        prop_flag: str,
        verdict: Verdict,
        engines: dict[str, Status] | None = None,
        old: Status | None = None,
    ) -> dict[str, Any]:
        engines = engines or {}
        agree = None
        if len(engines) > 1:
            agree = len(set(engines.values())) == 1
        entry = {
            "property": prop_flag,
            "model": role,
            "status": verdict.status.value,
            "message": verdict.message,
            "states": verdict.states,
            "edges": verdict.edges,
            "counterexample": trace_json(model, verdict.counterexample),
            "dead_tasks": list(verdict.dead_tasks),
            "engines": {k: v.value for k, v in engines.items()},
            "agree": agree,
            "old_status": old.value if old is not None else None,
            "change": change_of(old, verdict.status) if old is not None else None,
        }
        self.results.append(entry)
        return entry

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema": SCHEMA_ID,
            "command": self.command,
            "models": self.models,
            "engine": self.engine,
            "bound": self.bound,
            "violations": self.violations,
            "results": self.results,
            "exit_code": self.exit_code,
            "summary": self.summary,
            "elapsed": round(self.elapsed, 6),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    def to_text(self) -> str:
        return render_text(self.to_dict())


def _tokens_text(marking: dict[str, Any]) -> str:
    tokens = marking["tokens"]
    body = ", ".join(f"{k}={v}" for k, v in tokens.items()) or "none"
    return f"{body}; completed={marking['completed']}"


def render_text(doc: dict[str, Any]) -> str:
    """Human-readable rendering of a report dictionary."""
    out: list[str] = []
    for m in doc["models"]:
        role = "" if m["role"] == "model" else f"{m['role']} "
        out.append(f"{role}model {m['id']} ({m['source']})")
    if doc["violations"] or doc["command"] == "validate":
        out.append(f"{len(doc['violations'])} violations")
        for v in doc["violations"]:
            prefix = "" if v["model"] == "model" else f"[{v['model']}] "
            out.append(f"  {prefix}{v['code']}({v['subject']}): {v['message']}")
    for r in doc["results"]:
        where = "" if r["model"] == "model" else f"[{r['model']}] "
        line = f"{where}{r['property']}: {r['status'].upper()}"
        if r["change"]:
            line += f" (old: {r['old_status']}, {r['change']})"
        if r["engines"]:
            engines = ", ".join(f"{k}={v}" for k, v in r["engines"].items())
            agreement = "" if r["agree"] is None else ("; engines agree" if r["agree"] else "; ENGINES DISAGREE")
            line += f" [{engines}{agreement}]"
        out.append(line)
        detail = f"  {r['states']} states, {r['edges']} edges"
        if r["message"]:
            detail += f"; {r['message']}"
        out.append(detail)
        trace = r["counterexample"]
        if trace is not None and (trace["steps"] or r["status"] == "invalid"):
            if trace["steps"] or trace["lasso_start"] is not None:
                out.append(f"  counterexample ({len(trace['steps'])} steps):")
                out.append(f"    start -> tokens: {_tokens_text(trace['initial'])}")
                for step in trace["steps"]:
                    if trace["lasso_start"] is not None and step["index"] == trace["lasso_start"] + 1:
                        out.append("    -- loop starts here --")
                    via = f" via {step['alternative']}" if step["alternative"] else ""
                    out.append(f"    step {step['index']}: fire {step['kind']} '{step['name']}'{via}"
                               f" → tokens: {_tokens_text(step['marking'])}")
                if trace["lasso_start"] is not None:
                    if trace["lasso_start"] == len(trace["steps"]):
                        out.append("    -- stays in this state forever --")
                    else:
                        out.append(f"    -- repeats from step {trace['lasso_start'] + 1} --")
    out.append(doc["summary"])
    return "\n".join(out) + "\n"
