"""Exception types shared across the package."""


class HyprodError(Exception):
    """Base class."""


class DomainError(HyprodError, ValueError):
    """A point or input lies outside the domain of an operation."""


class NoPathError(HyprodError):
    """No path joins the two points."""


class InfeasibleError(HyprodError, ValueError):
    """Inputs admit no solution (e.g. no T-function through the endpoint data)."""


class HorizonTooShortError(HyprodError):
    """Finite-horizon Busemann evaluation did not settle within tolerance."""

    def __init__(self, msg, defect):
        super().__init__(msg)
        self.defect = defect


class TruncatedRayError(HyprodError):
    """A ray hit the truncation before reaching the requested length."""

    def __init__(self, msg, achieved):
        super().__init__(msg)
        self.achieved = achieved


class DiscretizationError(HyprodError):
    """A discretized construction left the level set, or the level set is empty."""

    def __init__(self, msg, sample=None):
        super().__init__(msg)
        self.sample = sample


class ConfigError(HyprodError, ValueError):
    """Configuration failed validation; ``fields`` lists offending locations."""

    def __init__(self, msg, fields=()):
        super().__init__(msg)
        self.fields = list(fields)
