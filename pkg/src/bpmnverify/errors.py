"""Exception types shared across the toolchain."""

from __future__ import annotations


class BpmnVerifyError(Exception):
    """Base class for every error this package raises on purpose."""


class ParseError(BpmnVerifyError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)
        self.reason = message


class PatchError(BpmnVerifyError):
    """A patch op could not be applied; nothing was changed."""

    def __init__(self, kind: str, op_index: int, ident: str):
        self.kind = kind
        self.op_index = op_index
        self.ident = ident
        super().__init__(f"{kind}: op #{op_index} references {ident!r}")


class UnknownId(PatchError):
    def __init__(self, op_index: int, ident: str):
        super().__init__("UnknownId", op_index, ident)


class DuplicateId(PatchError):
    def __init__(self, op_index: int, ident: str):
        super().__init__("DuplicateId", op_index, ident)


class FiringError(BpmnVerifyError):
    pass


class NotEnabled(FiringError):
    def __init__(self, node_id: str):
        self.node_id = node_id
        super().__init__(f"node {node_id!r} is not enabled")


class MissingSelector(FiringError):
    def __init__(self, node_id: str, choices: tuple[str, ...]):
        self.node_id = node_id
        self.choices = choices
        super().__init__(f"node {node_id!r} needs an alternative, one of {', '.join(choices)}")


class BadSelector(FiringError):
    def __init__(self, node_id: str, selector: str):
        self.node_id = node_id
        self.selector = selector
        super().__init__(f"{selector!r} is not a usable alternative for node {node_id!r}")


class BoundExceeded(FiringError):
    def __init__(self, flow_id: str, bound: int):
        self.flow_id = flow_id
        self.bound = bound
        super().__init__(f"flow {flow_id!r} would exceed the token bound {bound}")


class ValidationRequired(BpmnVerifyError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__(
            "model is not well formed: " + "; ".join(str(v) for v in self.violations)
        )


class UnknownNode(BpmnVerifyError):
    def __init__(self, node_id: str):
        self.node_id = node_id
        super().__init__(f"property references unknown node {node_id!r}")


class UnknownPropertyTarget(UnknownNode):
    pass


class UnsupportedOnEmbeddedPath(BpmnVerifyError):
    def __init__(self, what: str = "raw LTL"):
        super().__init__(f"{what} can only be checked with SPIN")


class SpinError(BpmnVerifyError):
    pass


class SpinNotFound(SpinError):
    pass


class SpinVersionUnsupported(SpinError):
    pass


class CompileFailed(SpinError):
    def __init__(self, message: str, output: str = ""):
        self.output = output
        super().__init__(message + (f"\n{output}" if output else ""))


class SpinTimeout(SpinError):
    pass


class UnrecognizedSpinOutput(SpinError):
    def __init__(self, message: str, raw: str):
        self.raw = raw
        super().__init__(message)


class UnmappableStep(SpinError):
    def __init__(self, line: str, reason: str = ""):
        self.line = line
        super().__init__(f"cannot map trail step{': ' + reason if reason else ''}: {line.strip()}")


class MissingTrail(SpinError):
    pass
