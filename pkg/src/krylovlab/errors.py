"""Typed errors raised across the package."""


class KrylovLabError(Exception):
    """Base class for all package errors."""


class BasisMismatchError(KrylovLabError, ValueError):
    """Two vectors or a vector and an operator live in different bases."""


class DomainError(KrylovLabError, ValueError):
    """Argument outside the domain of a function or operator."""


class WindowOverflowError(KrylovLabError):
    """A vector would need more coefficients than the configured cap."""


class DivergenceError(KrylovLabError, ArithmeticError):
    """Result norm exceeded the overflow guard."""


class CapabilityError(KrylovLabError, TypeError):
    """The operator does not support the requested operation."""


class ConfigError(KrylovLabError, ValueError):
    """Inconsistent or invalid configuration."""


class SpectralPointError(KrylovLabError, ValueError):
    """A resolvent was requested at a point of the spectrum."""


class EmptyFrameError(KrylovLabError, ValueError):
    """An operation needs a nonempty subspace frame."""


class QuadratureError(KrylovLabError, ArithmeticError):
    """Quadrature did not reach the requested accuracy."""


class GridResolutionError(KrylovLabError, ValueError):
    """A raster or spectral grid is too coarse for the requested tolerance."""
