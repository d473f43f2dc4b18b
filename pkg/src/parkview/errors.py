from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence


@dataclass(frozen=True)
class Violation:
    """校验结果：违反的规则名 + 涉及的顶点/边/叶子 + 说明。"""

    rule: str
    subject: str
    message: str

    def as_dict(self) -> dict:
        return {"rule": self.rule, "subject": self.subject, "message": self.message}

    def __str__(self) -> str:
        return f"[{self.rule}] {self.subject}: {self.message}"


class ParkviewError(Exception):
    pass


class TreeParseError(ParkviewError, ValueError):
    pass


class ValidationError(ParkviewError):
    def __init__(self, message: str, violations: Sequence[Violation] = ()):
        self.violations: List[Violation] = list(violations)
        if self.violations:
            message = f"{message}: {self.violations[0]}"
            if len(self.violations) > 1:
                message += f" (+{len(self.violations) - 1} more)"
        super().__init__(message)


class TreeValidationError(ValidationError):
    pass


class InterleavingValidationError(ValidationError):
    pass


class PreconditionError(ParkviewError, ValueError):
    pass


class DecompositionSizeError(ParkviewError):
    pass


class InternalInvariantError(ParkviewError, RuntimeError):
    """上游算法 bug：合法输入下不应出现。"""


class ColoringError(InternalInvariantError):
    pass


class ConfigError(ParkviewError, ValueError):
    pass


class FieldError(ParkviewError, ValueError):
    pass
