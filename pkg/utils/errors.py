"""
Exception hierarchy shared by the simulator, pipelines and CLI
"""
from typing import List, Optional


class DanoError(Exception):
    """Base class for every error raised by this project"""


class CapacityError(DanoError):
    """A size cap (qubit count, oracle dimension) was exceeded"""

    def __init__(self, message: str, cap: int):
        super().__init__(message)
        self.cap = cap


class QubitIndexError(DanoError, IndexError):
    """Qubit index or window outside 1..n"""


class ShapeError(DanoError, ValueError):
    """Array shape or length mismatch"""


class InvalidValueError(DanoError, ValueError):
    """Value rejected by a precondition (non-finite angle, bad label, ...)"""


class FormatError(DanoError, ValueError):
    """Malformed input file"""

    def __init__(self, message: str, offset: Optional[int] = None, path: Optional[str] = None):
        location = ""
        if path is not None:
            location += f" in {path}"
        if offset is not None:
            location += f" at byte offset {offset}"
        super().__init__(f"{message}{location}")
        self.offset = offset
        self.path = path


class UnsupportedFormatError(FormatError):
    """Well-formed file using a variant we do not read"""


class NumericalError(DanoError, ArithmeticError):
    """Iterative routine failed to converge"""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class ConfigError(DanoError, ValueError):
    """Run configuration failed validation; carries every problem found"""

    def __init__(self, problems: List[str]):
        super().__init__("Invalid configuration:\n  - " + "\n  - ".join(problems))
        self.problems = list(problems)
