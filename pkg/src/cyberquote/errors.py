"""Exception types and the diagnostic record shared by validators and reports."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Diagnostic:
    """One finding from a validator or pricing check."""

    severity: str  # "error" | "warning"
    code: str
    message: str
    location: str = ""

    def to_dict(self) -> dict[str, str]:
        return {
            "severity": self.severity,
            "code": self.code,
            "message": self.message,
            "location": self.location,
        }

    def __str__(self) -> str:
        where = f" [{self.location}]" if self.location else ""
        return f"{self.severity}: {self.code}: {self.message}{where}"


class CyberQuoteError(Exception):
    """Base class for all package errors."""


class ParseError(CyberQuoteError):
    """Syntax error in an organization description."""

    def __init__(self, line: int, column: int, expected: str, found: str):
        self.line = line
        self.column = column
        self.expected = expected
        self.found = found
        super().__init__(f"line {line}, column {column}: expected {expected}, found {found!r}")


class FormatError(CyberQuoteError):
    """Malformed CSV / config input."""


class ModelValidationError(CyberQuoteError):
    """A model violates its invariants; carries the error diagnostics."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics) or "validation failed")


class UnknownEntityError(CyberQuoteError, KeyError):
    def __str__(self) -> str:
        return f"unknown entity: {self.args[0]!r}"


class UnknownPracticeError(CyberQuoteError, KeyError):
    def __str__(self) -> str:
        return f"unknown practice: {self.args[0]!r}"


class NumericalError(CyberQuoteError):
    """Non-convergence, overflow or an ill-posed numerical request."""


class UninsurableLayerError(NumericalError):
    """Effective limit m*kappa is zero while the layer carries expected loss."""


class CoverageConstraintError(CyberQuoteError):
    """Raised in strict mode when lambda_c + lambda_s exceeds m * kappa."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))
