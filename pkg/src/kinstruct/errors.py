"""Exception types shared across the package."""


class KinstructError(Exception):
    """Base class for all package-specific errors."""


class FrameMismatchError(KinstructError, ValueError):
    """Two poses expressed in different frames were combined."""


class GimbalLockError(KinstructError, ValueError):
    """Yaw-pitch-roll extraction attempted at pitch = +/-pi/2."""


class DimensionMismatchError(KinstructError, ValueError):
    """An array argument has the wrong length or shape for the chain."""


class InvalidRangeError(KinstructError, ValueError):
    """A sampling range is empty or otherwise unusable."""


class DegenerateDisplacementError(KinstructError, ValueError):
    """A joint displacement is indistinguishable from zero modulo 2*pi."""


class StructureAmbiguousError(KinstructError):
    """Triplet verdicts do not assemble into a unique serial chain.

    `problems` lists human-readable diagnostics (missing edges, branches,
    duplicate signals); `inconclusive_triplets` lists (i1, i2, k) triplets
    whose tests could not reach a verdict.
    """

    def __init__(self, problems, inconclusive_triplets=()):
        self.problems = list(problems)
        self.inconclusive_triplets = list(inconclusive_triplets)
        detail = "; ".join(self.problems) or "structure ambiguous"
        if self.inconclusive_triplets:
            detail += f"; inconclusive triplets: {self.inconclusive_triplets}"
        super().__init__(detail)


class ParseError(KinstructError, ValueError):
    """A document could not be parsed; the message names the offending field."""


class SchemaVersionError(KinstructError, ValueError):
    """A document declares a schema version this build does not understand."""


class InvariantViolationError(KinstructError, ValueError):
    """Parsed data violates a documented file invariant."""
