"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class CoarseRicciError(Exception):
    """Base class for every error raised by this package."""


class MetricError(CoarseRicciError, ValueError):
    """A distance matrix violates one or more metric axioms.

    ``violations`` holds the individual findings, each a dict with a
    ``kind`` key (one of the subclass names below) and the offending indices.
    """

    def __init__(self, violations: list[dict]):
        self.violations = violations
        first = violations[0]
        super().__init__(
            f"{first['kind']} at {tuple(first['indices'])}"
            + (f" (+{len(violations) - 1} more)" if len(violations) > 1 else "")
        )


class NonSymmetric(MetricError):
    pass


class TriangleViolation(MetricError):
    pass


class NegativeDistance(MetricError):
    pass


class ZeroOffDiagonal(MetricError):
    pass


class DisconnectedGraph(CoarseRicciError, ValueError):
    def __init__(self, components: list[list]):
        self.components = components
        super().__init__(f"graph has {len(components)} components: {components}")


class SpaceMismatch(CoarseRicciError, ValueError):
    pass


class InvalidMeasure(CoarseRicciError, ValueError):
    pass


class UnsupportedExponent(CoarseRicciError, ValueError):
    pass


class SolverFailure(CoarseRicciError, RuntimeError):
    pass


class SupportTooLarge(CoarseRicciError, ValueError):
    pass


class SamePoint(CoarseRicciError, ValueError):
    pass


class ContractViolation(CoarseRicciError, AssertionError):
    def __init__(self, message: str, witness):
        self.witness = witness
        super().__init__(message)


class GridTooLarge(CoarseRicciError, ValueError):
    pass


class NotInvariantInput(CoarseRicciError, ValueError):
    pass


class NoConvergence(CoarseRicciError, RuntimeError):
    def __init__(self, max_iter: int, residual: float):
        self.max_iter = max_iter
        self.residual = residual
        super().__init__(f"no convergence after {max_iter} iterations (residual {residual:.3e})")


class InternalInvariantViolation(CoarseRicciError, AssertionError):
    pass


class NoLiftPoint(CoarseRicciError, ValueError):
    pass


class ExhaustiveTooLarge(CoarseRicciError, ValueError):
    pass


class CurvatureNotUniform(CoarseRicciError, ValueError):
    pass


class BadConfig(CoarseRicciError, ValueError):
    pass


class UnknownCommand(CoarseRicciError, ValueError):
    """Bad subcommand or unparsable command-line arguments."""
