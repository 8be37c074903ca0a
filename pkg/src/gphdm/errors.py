import numpy as np


class GPHDMError(Exception):
    """Base class for library errors."""


class FactorizationError(GPHDMError, np.linalg.LinAlgError):
    """A covariance matrix could not be Cholesky-factorized."""


class QuadratureError(GPHDMError):
    """Numerical integration did not reach the requested tolerance."""


class DivergenceError(GPHDMError):
    """An optimization stopped making progress or blew up."""


class ValidationError(GPHDMError, ValueError):
    """Invalid user input (labels, shapes, flags)."""
