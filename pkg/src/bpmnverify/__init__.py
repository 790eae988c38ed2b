"""Verification toolchain for reconfigurable BPMN workflows."""

from .checker import (
    DeadlockFree,
    NeverFires,
    NoDeadActivity,
    Precedence,
    ProperCompletion,
    RawLtl,
    Reachable,
    Response,
    Status,
    Trace,
    Verdict,
    check,
    check_all,
)
from .ingest import emit_dsl, load_model, parse_bpmn_xml, parse_dsl
from .model import FlowNode, NodeKind, SequenceFlow, WorkflowModel, validate_wellformed
from .promela import translate
from .reconfig import Patch, apply_patch, diff
from .semantics import Marking, explore, fire, initial_marking

__version__ = "0.1.0"

__all__ = [
    "DeadlockFree", "FlowNode", "Marking", "NeverFires", "NoDeadActivity", "NodeKind", "Patch",
    "Precedence", "ProperCompletion", "RawLtl", "Reachable", "Response", "SequenceFlow", "Status",
    "Trace", "Verdict", "WorkflowModel", "apply_patch", "check", "check_all", "diff", "emit_dsl",
    "explore", "fire", "initial_marking", "load_model", "parse_bpmn_xml", "parse_dsl", "translate",
    "validate_wellformed",
]
