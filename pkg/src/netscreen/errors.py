"""Exception and warning types shared across the package."""


class NetScreenError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(NetScreenError, ValueError):
    """Input data or parameters violate a documented precondition."""


class ParseError(NetScreenError):
    """A table or config file could not be read or parsed."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class NonPositiveDistance(ValidationError):
    pass


class WeightOutOfRange(ValidationError):
    pass


class AsymmetryError(ValidationError):
    pass


class LabelMismatch(ValidationError):
    pass


class NonPositivePopulation(ValidationError):
    pass


class ProbabilityOverflow(ValidationError):
    pass


class RateTooLarge(ValidationError):
    pass


class MissingRow(ValidationError):
    pass


class ZeroBeta(ValidationError):
    pass


class RateSumOverflow(ValidationError):
    pass


class TooFewDays(ValidationError):
    pass


class EmptySearchSpace(ValidationError):
    pass


class AllCellsDropped(ValidationError):
    pass


class NegativeMatrixEntry(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class InfeasiblePlan(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class NegativeCompartmentWarning(RuntimeWarning):
    """A compartment went below -1e-12 during a step and was clamped to 0."""


class NonImprovementWarning(RuntimeWarning):
    """Frank-Wolfe stopped early because the objective stalled."""


class HiddenFractionWarning(RuntimeWarning):
    """Hidden fractions reconstructed from case counts look implausible."""
