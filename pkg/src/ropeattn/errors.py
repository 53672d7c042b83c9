"""Exception types shared across the package.

Plain ValueError is used for size and domain violations; the classes here
mark conditions a caller may want to catch and react to specifically.
"""

__all__ = ["ResourceLimitError", "ApproximationError", "NormalizationError"]


class ResourceLimitError(RuntimeError):
    """A configured budget (dense-matrix limit, monomial budget) was exceeded."""


class ApproximationError(ValueError):
    """The requested polynomial accuracy is unreachable for the given radius."""


class NormalizationError(ArithmeticError):
    """A diagonal normalizer entry is too close to zero to divide by."""
