"""Exception types shared across the planner modules."""


class VidplanError(Exception):
    """Base class for all planner errors."""


class UnknownOperator(VidplanError):
    """An operator id has no entry in the profile store."""


class MissingProfilePoint(VidplanError):
    """A file-backed profile store lacks a requested point."""


class ParseError(VidplanError):
    """A profile or config file failed to parse.

    Carries the 1-based line number when one is known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DomainMismatch(VidplanError):
    """A knob value in an input file is not in the configured domain."""


class NoAdequatePoint(VidplanError):
    """No fidelity option in the searched slab meets the accuracy target."""


class Infeasible(VidplanError):
    """No format or policy can satisfy the stated requirement."""


class BudgetInfeasible(VidplanError):
    """Even the minimal configuration exceeds the resource budget."""


class DomainError(VidplanError):
    """A numeric argument is outside its mathematical domain."""


class WeightViolation(VidplanError):
    """Scheduler weights do not enforce strict service-class precedence."""


class ScenarioInvalid(VidplanError):
    """A simulation scenario references unknown devices or is malformed."""


class MappingError(VidplanError):
    """A migration schedule does not map onto the simulated devices."""


class TooLarge(VidplanError):
    """An exhaustive oracle was asked to solve an instance beyond its cap."""


class EmptyFeasibleSet(VidplanError):
    """No hardware setup in the catalog fits the monetary budget."""
