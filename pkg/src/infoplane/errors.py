"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
divergence during training -> 4.
"""


class InfoplaneError(Exception):
    """Base class for all package errors."""


class ShapeError(InfoplaneError, ValueError):
    """Array arguments with incompatible shapes."""


class GraphError(InfoplaneError, ValueError):
    """Invalid network topology or failure attributed to a graph node."""


class ConfigError(InfoplaneError, ValueError):
    """Invalid experiment configuration."""


class DataError(InfoplaneError, ValueError):
    """Missing, malformed, or unfetchable dataset files."""


class DivergenceError(InfoplaneError, ArithmeticError):
    """Non-finite gradients: the run has diverged."""
