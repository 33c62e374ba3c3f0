"""Radial grids, quadrature and the discrete operators built on them.

Every field is a radial profile ``u(r)`` sampled on ``0 = r_0 < ... < r_{n-1} = R``
in dimension ``N`` (3 or 4).  Integrals are taken against ``omega_{N-1} r^{N-1} dr``.

The discretisation is the conservative finite-volume pair:

* a nodal value ``f(r_i)`` is weighted by the exact volume of its dual shell
  ``r_{i-1/2} < |x| < r_{i+1/2}`` (half cells at both ends),
* derivatives live on cells, ``(u_{i+1} - u_i) / h_i``, weighted by the area of
  the sphere through the cell midpoint.

``K / M`` (stiffness over dual volumes) is then exact on ``r^2`` at every node,
the origin included, so the discrete Laplacian is second-order consistent up to
``r = 0``.  The gradient of ``grad_sq`` with respect to the nodal values is the
3-point stiffness matrix, so the discrete Euler-Lagrange equations used by the
solver are the exact stationarity conditions of the discrete energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.linalg import solve_banded

from .errors import ConfigurationError, DomainError, ResolutionError

__all__ = [
    "RadialGrid",
    "Field",
    "Pair",
    "make_grid",
    "sphere_area",
    "mass_sq",
    "grad_sq",
    "lp_norm_p",
    "mixed_integral",
    "l2_scale",
    "neg_laplacian",
]

GRADINGS = ("uniform", "geometric")


def sphere_area(dim: int) -> float:
    """Surface area of the unit sphere in R^dim (4*pi for dim 3, 2*pi^2 for dim 4)."""
    return 2.0 * math.pi ** (dim / 2) / math.gamma(dim / 2)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Sample radii for radial functions on the ball of radius ``r_max``."""

    dim: int
    r_max: float
    nodes: np.ndarray
    surface_factor: float

    def __post_init__(self):
        if self.dim not in (3, 4):
            raise ConfigurationError(f"dimension must be 3 or 4, got {self.dim}")
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 3:
            raise ConfigurationError("a radial grid needs at least 3 nodes")
        if nodes[0] != 0.0 or np.any(np.diff(nodes) <= 0):
            raise ConfigurationError("nodes must start at 0 and be strictly increasing")
        if not math.isclose(nodes[-1], self.r_max, rel_tol=1e-12):
            raise ConfigurationError("last node must equal r_max")
        if self.surface_factor <= 0:
            raise ConfigurationError("surface_factor must be positive")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def size(self) -> int:
        return self.nodes.size

    @cached_property
    def spacing(self) -> np.ndarray:
        h = np.diff(self.nodes)
        h.setflags(write=False)
        return h

    @cached_property
    def midpoints(self) -> np.ndarray:
        m = 0.5 * (self.nodes[1:] + self.nodes[:-1])
        m.setflags(write=False)
        return m

    @cached_property
    def weights(self) -> np.ndarray:
        """Dual-shell volumes; they sum to the volume of the ball."""
        r = self.nodes
        edges = np.concatenate(([0.0], self.midpoints, [r[-1]]))
        w = self.surface_factor / self.dim * np.diff(edges**self.dim)
        w.setflags(write=False)
        return w

    @cached_property
    def cell_weights(self) -> np.ndarray:
        """Midpoint sphere area of each cell divided by its width."""
        w = self.surface_factor * self.midpoints ** (self.dim - 1) / self.spacing
        w.setflags(write=False)
        return w

    def integrate(self, values: np.ndarray) -> float:
        """Integral of a nodal function over the ball."""
        return float(np.dot(self.weights, values))

    def stiffness_banded(self) -> np.ndarray:
        """Stiffness matrix ``K`` (``u.K.u = grad_sq``) in LAPACK banded storage."""
        w = self.cell_weights
        n = self.size
        ab = np.zeros((3, n))
        ab[1, :-1] += w
        ab[1, 1:] += w
        ab[0, 1:] = -w
        ab[2, :-1] = -w
        return ab

    def field(self, values) -> "Field":
        return Field(self, np.asarray(values, dtype=float))

    def sample(self, func: Callable[[np.ndarray], np.ndarray]) -> "Field":
        """Field obtained by evaluating ``func`` at the nodes."""
        return Field(self, np.asarray(func(self.nodes), dtype=float))


def make_grid(dim: int, r_max: float, count: int, grading: str = "uniform",
              ratio: float = 100.0) -> RadialGrid:
    """Build a radial grid with ``count`` nodes on ``[0, r_max]``.

    ``geometric`` grading uses cell widths growing by a constant factor, with
    ``ratio`` the width of the last cell over the width of the first one.
    """
    if dim not in (3, 4):
        raise ConfigurationError(f"dimension must be 3 or 4, got {dim}")
    if not r_max > 0:
        raise ConfigurationError("r_max must be positive")
    if count < 16:
        raise ConfigurationError("count must be at least 16")
    if grading not in GRADINGS:
        raise ConfigurationError(f"grading must be one of {GRADINGS}")
    if grading == "uniform":
        nodes = np.linspace(0.0, r_max, count)
    else:
        if ratio <= 1.0:
            raise ConfigurationError("geometric ratio must exceed 1")
        q = ratio ** (1.0 / (count - 2))
        widths = q ** np.arange(count - 1)
        nodes = np.concatenate(([0.0], np.cumsum(widths)))
        nodes *= r_max / nodes[-1]
        nodes[-1] = r_max
    return RadialGrid(dim, float(r_max), nodes, sphere_area(dim))


@dataclass(frozen=True, eq=False)
class Field:
    """A radial function sampled on a grid; immutable."""

    grid: RadialGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.grid.nodes.shape:
            raise ConfigurationError("field length does not match the grid")
        if not np.all(np.isfinite(vals)):
            raise DomainError("field values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __mul__(self, c: float) -> "Field":
        return Field(self.grid, c * self.values)

    __rmul__ = __mul__

    def __add__(self, other: "Field") -> "Field":
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        return Field(self.grid, self.values - other.values)


@dataclass(frozen=True, eq=False)
class Pair:
    """Two-component state ``(u, v)`` on a common grid."""

    u: Field
    v: Field

    def __post_init__(self):
        if self.u.grid is not self.v.grid:
            raise ConfigurationError("both components must share one grid")

    @property
    def grid(self) -> RadialGrid:
        return self.u.grid

    @classmethod
    def from_arrays(cls, grid: RadialGrid, u, v) -> "Pair":
        return cls(Field(grid, u), Field(grid, v))

    def swapped(self) -> "Pair":
        return Pair(self.v, self.u)


def mass_sq(u: Field) -> float:
    """Squared L2 norm."""
    return u.grid.integrate(u.values**2)


def grad_sq(u: Field) -> float:
    """Squared L2 norm of the gradient (cell differences, midpoint rule per cell)."""
    if u.grid.size < 3:
        raise ConfigurationError("grid too small for a derivative")
    du = np.diff(u.values)
    return float(np.dot(u.grid.cell_weights, du * du))


def lp_norm_p(u: Field, p: float) -> float:
    """``int |u|^p``."""
    if p <= 1:
        raise DomainError("p must exceed 1")
    return u.grid.integrate(np.abs(u.values) ** p)


def mixed_integral(pair: Pair, alpha: float, beta: float) -> float:
    """``int |u|^alpha |v|^beta``."""
    return pair.grid.integrate(np.abs(pair.u.values) ** alpha * np.abs(pair.v.values) ** beta)


def neg_laplacian(u: Field) -> np.ndarray:
    """Discrete ``-Laplace u`` at the nodes (L2 gradient of ``grad_sq / 2``)."""
    g = u.grid
    flux = g.cell_weights * np.diff(u.values)
    ku = np.zeros_like(u.values)
    ku[:-1] -= flux
    ku[1:] += flux
    return ku / g.weights


def _rescale_field(s: float, u: Field) -> Field:
    g = u.grid
    if s == 0.0:
        return u
    stretch = math.exp(s)
    support = g.r_max / stretch
    if np.count_nonzero(g.nodes < support) < 4:
        raise ResolutionError(f"scaling by s={s} leaves fewer than 4 nodes in the support")
    arg = g.nodes * stretch
    vals = np.zeros_like(u.values)
    inside = arg <= g.r_max
    # flat runs of zeros in the tail trip harmless overflows in the slope limiter
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        interp = PchipInterpolator(g.nodes, u.values, extrapolate=False)
        vals[inside] = interp(arg[inside])
    return Field(g, math.exp(g.dim * s / 2) * vals)


def l2_scale(s: float, state):
    """Mass preserving dilation ``s*u(x) = e^{Ns/2} u(e^s x)`` resampled on the same grid.

    Accepts a ``Field`` or a ``Pair`` (applied componentwise).
    """
    if isinstance(state, Pair):
        return Pair(_rescale_field(s, state.u), _rescale_field(s, state.v))
    return _rescale_field(s, state)


def solve_shifted_stiffness(grid: RadialGrid, shift: float, rhs: np.ndarray,
                            dirichlet: bool = True) -> np.ndarray:
    """Solve ``(K + shift*M) x = rhs`` with ``M`` the diagonal quadrature matrix.

    ``rhs`` is a Euclidean gradient (already carrying the quadrature weights), so
    ``x`` is the ``(-Laplace + shift)^{-1}`` preconditioned direction.  With
    ``dirichlet`` the last node is held at zero.
    """
    ab = grid.stiffness_banded()
    ab[1] += shift * grid.weights
    b = np.asarray(rhs, dtype=float)
    if dirichlet:
        n = grid.size - 1
        x = np.zeros(grid.size)
        x[:n] = solve_banded((1, 1), ab[:, :n], b[:n])
        return x
    return solve_banded((1, 1), ab, b)
