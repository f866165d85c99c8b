"""Exception hierarchy shared by the solver, the Monte Carlo oracle and the CLI."""


class FragkinError(Exception):
    """Base class for all package errors."""


class DomainError(FragkinError, ValueError):
    """An argument lies outside the domain where a quantity is defined."""


class ConfigError(FragkinError, ValueError):
    """Invalid configuration (bad bounds, malformed kernel spec, ...)."""


class StepSizeError(FragkinError, ValueError):
    """Time step exceeds the stability bound of the loss term."""


class BlowUpError(FragkinError, FloatingPointError):
    """Non-finite values appeared during time integration."""

    def __init__(self, step: int, t: float):
        super().__init__(f"non-finite density at step {step} (t={t:g})")
        self.step = step
        self.t = t


class EmptyPopulationError(FragkinError, ValueError):
    """Operation needs at least one fragment but the population is empty."""


class DegenerateDistributionError(FragkinError, ValueError):
    """Distribution has zero variance, so no shape parameter can be fitted."""
