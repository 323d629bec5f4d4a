"""Exception hierarchy shared by all critlab modules."""


class CritlabError(Exception):
    """Base class for all critlab errors."""


class ParameterError(CritlabError, ValueError):
    """Model parameters violate a documented invariant."""


class DomainError(CritlabError, ValueError):
    """An argument lies outside the documented domain of an operation."""


class SolverError(CritlabError, RuntimeError):
    """A root solve, quadrature, ODE integration or inversion failed."""


class TruncationError(CritlabError, RuntimeError):
    """A truncated series cannot meet the requested accuracy; retry with larger order."""


class ConfigError(CritlabError, ValueError):
    """An experiment configuration file is malformed or inconsistent."""
