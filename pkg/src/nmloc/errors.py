"""Exception types shared across the package."""


class DegenerateSequenceError(ValueError):
    """A sequence with no measurable entries was handed to a norm."""


class DistalViolationError(ValueError):
    """Two diagonal values coincide (or sit below the divisor floor)."""


class TameRangeError(ValueError):
    """A tame product bound was requested below its valid norm index."""


class FixedPointStalledError(RuntimeError):
    """The diagonal-correction fixed point failed to reach tolerance."""

    def __init__(self, message, defect):
        super().__init__(message)
        self.defect = defect


class NeumannSmallnessError(ValueError):
    """The series smallness condition for inverting I + W failed."""


class SymmetryDefectError(ValueError):
    """A step that requires real-symmetric data found it violated."""


class TheoryConditionError(ValueError):
    """A sufficient condition failed while strict checking was requested."""


class ConfigError(ValueError):
    """Invalid or unparsable run configuration."""
