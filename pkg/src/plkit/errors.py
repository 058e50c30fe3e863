"""Exception hierarchy.

Every error raised by the toolkit derives from :class:`PLKitError`, so the
CLI can map analysis failures to exit code 1 with a single ``except``.
"""


class PLKitError(Exception):
    pass


class ConfigError(PLKitError, ValueError):
    """Bad user input: formula, range spec, tolerances."""


# geometry
class PointOnCurve(PLKitError, ValueError):
    pass


class EmptyInput(PLKitError, ValueError):
    pass


class InvalidCurve(PLKitError, ValueError):
    pass


# maps
class PoleHit(PLKitError, ZeroDivisionError):
    pass


class RootSolveFailure(PLKitError):
    pass


class NotProper(PLKitError):
    pass


class AssumptionViolated(PLKitError):
    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness


class SingletonDegenerate(PLKitError):
    pass


class LemmaViolation(PLKitError):
    pass


# pullback
class CriticalValueOnCurve(PLKitError):
    pass


class ContinuationDiverged(PLKitError):
    pass


class StitchFailure(PLKitError):
    pass


# trichotomy
class CertificationFailed(PLKitError):
    def __init__(self, msg, best_margin=float("-inf")):
        super().__init__(msg)
        self.best_margin = best_margin


class NoConvergence(PLKitError):
    pass


# invariants
class ResolutionTooCoarse(PLKitError):
    pass


class NotForwardInvariant(PLKitError):
    pass


# periodic
class HypothesesNotMet(PLKitError):
    def __init__(self, msg, failed=()):
        super().__init__(msg)
        self.failed = tuple(failed)


class BranchLost(PLKitError):
    pass


class ExtensionFailed(PLKitError):
    pass


# ergodic
class PreimageSolveFailure(PLKitError):
    pass


class OrbitEscaped(PLKitError):
    pass


class DerivativeZeroHit(PLKitError):
    pass


class NonHyperbolicSample(PLKitError, ValueError):
    pass


class TooFewCells(PLKitError, ValueError):
    pass
