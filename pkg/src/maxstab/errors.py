"""Exception hierarchy.

Every error carries an optional ``stage`` tag so the CLI can report where a
pipeline failed without string matching.
"""

from __future__ import annotations


class MaxstabError(Exception):
    """Base class for all package errors."""

    def __init__(self, message: str = "", *, stage: str | None = None, **info):
        super().__init__(message)
        self.stage = stage
        self.info = info

    def with_stage(self, stage: str) -> "MaxstabError":
        self.stage = stage
        return self


# geometry
class EmptyGamma0(MaxstabError):
    pass


class NotSuitable(MaxstabError):
    pass


class OriginInClosure(MaxstabError):
    pass


class NotFlat(MaxstabError):
    pass


class SingularPoint(MaxstabError):
    pass


# fields
class GridMismatch(MaxstabError):
    pass


class UnsupportedSpace(MaxstabError):
    pass


class NonCompactSupport(MaxstabError):
    pass


# reduction
class NonElliptic(MaxstabError):
    pass


class LogBranch(MaxstabError):
    pass


class NonzeroScalarSlots(MaxstabError):
    pass


class NeumannViolation(MaxstabError):
    pass


class NotASolution(MaxstabError):
    pass


# cgo
class DegenerateXi(MaxstabError):
    pass


class SymbolSingular(MaxstabError):
    pass


class NoConvergence(MaxstabError):
    pass


class ResidualTooLarge(MaxstabError):
    pass


# forward
class NearResonance(MaxstabError):
    pass


class NonTangentialData(MaxstabError):
    pass


class IdentityViolation(MaxstabError):
    pass


class EmptySet(MaxstabError):
    pass


class NormDegenerate(MaxstabError):
    pass


# reconstruction
class SolutionResidualTooLarge(MaxstabError):
    pass


class DegenerateDelta(MaxstabError):
    pass


class WeightOverflow(MaxstabError):
    pass


class X0InsideDomain(MaxstabError):
    pass


# cli
class ConfigInvalid(MaxstabError):
    pass
