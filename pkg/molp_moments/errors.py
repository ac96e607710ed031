"""Exception hierarchy shared by every module.

Solver outcomes (LP status, SDP status, NotFlat) are values, not exceptions.
Exceptions are reserved for malformed input and for numerical situations the
caller has to decide about.
"""

from __future__ import annotations

from typing import Optional


class MolpError(Exception):
    """Base class. ``system`` is the Sys-i index when the error is scoped to one."""

    def __init__(self, message: str, *, system: Optional[int] = None):
        super().__init__(message)
        self.system = system

    def with_system(self, system: int) -> "MolpError":
        self.system = system
        return self

    def __str__(self) -> str:
        base = super().__str__()
        if self.system is None:
            return base
        return f"[system {self.system}] {base}"


# Input errors (CLI exit code 2)


class SchemaError(MolpError):
    pass


class DimensionError(MolpError):
    pass


class BadIndexError(MolpError):
    pass


class NotFeasibleError(MolpError):
    pass


class CombinatorialLimitError(MolpError):
    """An enumeration would exceed the configured cap; supply overrides instead."""

    def __init__(self, what: str, count: int, cap: int):
        super().__init__(f"{what}: {count} subsets exceed cap {cap}")
        self.count = count
        self.cap = cap


# Polynomial layer


class UnassignedVariableError(MolpError):
    pass


class NonAffineReplacementError(MolpError):
    pass


class OrderTooSmallError(MolpError):
    def __init__(self, label: str, required: int, order: int):
        super().__init__(f"constraint {label} needs order >= {required}, got {order}")
        self.required = required
        self.order = order


# Numerical errors (CLI exit code 3)


class AmbiguousRankError(MolpError):
    def __init__(self, message: str, singular_values=None):
        super().__init__(message)
        self.singular_values = list(singular_values) if singular_values is not None else []


class IllConditionedBasisError(MolpError):
    pass


class ComplexEigenvalueError(MolpError):
    pass


class OracleContradictionError(MolpError):
    """Extraction produced a point the exact oracle refutes."""


class SdpaFormatError(MolpError):
    """A file handed to the SDPA reader does not follow the sparse format."""


class InvalidWeightError(MolpError):
    """An objective weight vector with a negative entry or no positive one."""


class MissingDependencyError(MolpError):
    """An optional extra needed by the requested output is not installed."""


INPUT_ERRORS = (SchemaError, DimensionError, BadIndexError, NotFeasibleError, SdpaFormatError, InvalidWeightError)
