"""Exception types shared across the toolkit."""


class ParameterError(ValueError):
    """Invalid physical parameters, initial condition or time grid."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class CapacityError(RuntimeError):
    """Requested system is too large for the chosen solver."""


class IntegrationError(RuntimeError):
    """The ODE integrator failed (step-size underflow, non-finite state)."""


class NumericalQualityError(RuntimeError):
    """A trajectory violated a numerical quality bound (positivity, cutoff)."""
