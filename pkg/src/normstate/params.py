"""Problem data for the coupled system and its derived exponents."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import ConfigurationError

__all__ = ["Params", "SUBCRITICAL", "CRITICAL", "SUPERCRITICAL", "NONPOSITIVE"]

SUBCRITICAL = "subcritical"
CRITICAL = "critical"
SUPERCRITICAL = "supercritical"
NONPOSITIVE = "nonpositive"

_GAMMA_TOL = 1e-12


def gamma_of(dim: int, p: float) -> float:
    """Scaling exponent ``N(p-2)/2`` of the ``L^p`` term."""
    return dim * (p - 2.0) / 2.0


def regime_of(gamma: float, nu: float) -> str:
    """Fiber-map regime: the sign of the coupling, then the position of ``gamma`` against 2."""
    if nu <= 0:
        return NONPOSITIVE
    if abs(gamma - 2.0) <= _GAMMA_TOL:
        return CRITICAL
    return SUBCRITICAL if gamma < 2.0 else SUPERCRITICAL


@dataclass(frozen=True)
class Params:
    """Exponents, masses and coupling.

    Parameters
    ----------
    dim : int
        Space dimension, 3 or 4.
    alpha, beta : float
        Coupling exponents, both above 1 with ``alpha + beta < 2*``.
    a, b : float
        Mass radii: ``|u|_2 = a`` and ``|v|_2 = b``.
    nu : float
        Coupling strength; any real.
    """

    dim: int
    alpha: float
    beta: float
    a: float = 1.0
    b: float = 1.0
    nu: float = 0.0

    def __post_init__(self):
        if self.dim not in (3, 4):
            raise ConfigurationError(f"dimension must be 3 or 4, got {self.dim}")
        if not (self.alpha > 1 and self.beta > 1):
            raise ConfigurationError("alpha and beta must exceed 1")
        if not self.alpha + self.beta < self.two_star:
            raise ConfigurationError("alpha + beta must stay below the critical exponent")
        if not (self.a > 0 and self.b > 0):
            raise ConfigurationError("masses must be positive")
        if not math.isfinite(self.nu):
            raise ConfigurationError("nu must be finite")

    @property
    def two_star(self) -> float:
        return 2.0 * self.dim / (self.dim - 2)

    @property
    def p(self) -> float:
        return self.alpha + self.beta

    @property
    def gamma(self) -> float:
        return gamma_of(self.dim, self.alpha + self.beta)

    @property
    def mass_total(self) -> float:
        """``a^2 + b^2``."""
        return self.a**2 + self.b**2

    @property
    def regime(self) -> str:
        return regime_of(self.gamma, self.nu)

    @property
    def gamma_class(self) -> str:
        """Regime ignoring the sign of ``nu``."""
        return regime_of(self.gamma, 1.0)

    def with_nu(self, nu: float) -> "Params":
        return replace(self, nu=float(nu))

    def with_masses(self, a: float, b: float) -> "Params":
        return replace(self, a=float(a), b=float(b))

    def to_dict(self) -> dict:
        return {"dim": self.dim, "alpha": self.alpha, "beta": self.beta,
                "a": self.a, "b": self.b, "nu": self.nu}
