"""Exception types shared across the suite."""


class ConfigurationError(ValueError):
    """Invalid construction parameters or run configuration."""


class CapabilityError(RuntimeError):
    """A (model, kernel) pair has no analytic oracle."""


class DomainError(ValueError):
    """A parameter value lies outside the prior's support."""


class BudgetExhaustedError(RuntimeError):
    """A proposal/initialization budget ran out before the target was met."""

    def __init__(self, message, proposals_used=0, accepted=0):
        super().__init__(message)
        self.proposals_used = proposals_used
        self.accepted = accepted


class ParticleCollapseError(RuntimeError):
    """Every particle weight became zero at some SMC step."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step
