from typing import List, Optional, Tuple

from pydantic import ValidationError


class FlowAggError(Exception):
    """Base class for every error raised by flowagg."""


class TableFull(FlowAggError):
    def __init__(self, f_cap: int, switch_id: Optional[int] = None):
        self.f_cap = f_cap
        self.switch_id = switch_id
        super().__init__(f"flow table full (f_cap={f_cap}, switch={switch_id})")


class SwitchUnreachable(FlowAggError):
    def __init__(self, switch_id: int, reason: str = "disconnected"):
        self.switch_id = switch_id
        self.reason = reason
        super().__init__(f"switch {switch_id} unreachable: {reason}")


class DegenerateData(FlowAggError):
    """Training set holds a single class."""


class NoConvergence(FlowAggError):
    def __init__(self, message: str, model=None):
        self.model = model
        super().__init__(message)


class EmptyWindow(FlowAggError):
    """No flow records in a detection window."""


class ConfigInvalid(FlowAggError):
    def __init__(self, diagnostics: List[Tuple[str, str]]):
        self.diagnostics = diagnostics
        lines = [f"{path}: {msg}" for path, msg in diagnostics]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))

    @classmethod
    def from_validation_error(cls, exc: ValidationError, prefix: str = "") -> "ConfigInvalid":
        diagnostics = []
        for err in exc.errors():
            path = ".".join(str(part) for part in err["loc"]) or "<root>"
            if prefix:
                path = f"{prefix}.{path}"
            diagnostics.append((path, err["msg"]))
        return cls(diagnostics)


class ModelFormatError(FlowAggError):
    def __init__(self, path: str, detail: str):
        self.path = path
        super().__init__(f"{path}: {detail}")


class ReportWriteError(FlowAggError):
    def __init__(self, path: str, cause: OSError):
        self.path = path
        self.cause = cause
        super().__init__(f"cannot write {path}: {cause}")


class SessionNotFound(FlowAggError):
    def __init__(self, session_id: int):
        self.session_id = session_id
        super().__init__(f"simulation session {session_id} not found")
