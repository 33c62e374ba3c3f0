"""Canonical radial profiles.

* ``Z``: the positive, radially decreasing solution of ``-w'' - (N-1)/r w' + w = w^{p-1}``
  obtained by shooting on ``w(0)``,
* the Aubin-Talenti bubbles ``U_eps`` and their cut-off versions,
* the Sobolev constant ``S`` evaluated on the exact bubble.

Shooting
--------
For a trial height ``w(0)`` the trajectory either crosses zero (the height is too
large) or turns back up while still positive (too small).  Bisection on that
dichotomy converges to ``Z(0)``.  Beyond the radius where the two bracketing
trajectories separate, the profile is continued by the linear decay
``c r^{-(N-2)/2} K_{(N-2)/2}(r)``.

The integrals entering the Nehari and Pohozaev identities are accumulated as extra
components of the ODE, so the reported residuals measure the shooting accuracy and
not the quadrature error of the output grid.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate, special

from .errors import ConfigurationError, DomainError, ResolutionError, SolverFailure
from .radial import Field, RadialGrid, grad_sq, lp_norm_p, make_grid, sphere_area

__all__ = [
    "ShootResult",
    "SobolevConstant",
    "solve_scalar_profile",
    "bubble",
    "bubble_values",
    "sobolev_constant",
    "cutoff",
    "cutoff_bubble",
    "export_profile_csv",
    "critical_exponent",
    "sobolev_value",
]

DEFAULT_BRACKET = (1.0, 50.0)
_R_LIMIT = 80.0


def critical_exponent(dim: int) -> float:
    """Sobolev critical exponent ``2N/(N-2)``."""
    if dim not in (3, 4):
        raise ConfigurationError(f"dimension must be 3 or 4, got {dim}")
    return 2.0 * dim / (dim - 2)


@dataclass(frozen=True, eq=False)
class ShootResult:
    """Scalar ground state ``Z`` and its diagnostics.

    Attributes
    ----------
    profile : Field
        ``Z`` sampled on the requested grid.
    initial_height : float
        Converged ``Z(0)``.
    nehari_residual, pohozaev_residual : float
        Relative residuals of ``G + M = P`` and ``(N-2)/2 G + N/2 M = N/p P``
        where ``G, M, P`` are the gradient, mass and ``L^p`` integrals.
    mass_sq, grad_sq, lp_p : float
        Those integrals over all of ``R^N`` (ODE quadrature plus exact tail).
    match_radius : float
        Radius where the bisection trajectories are replaced by the linear tail.
    """

    dim: int
    p: float
    profile: Field
    initial_height: float
    nehari_residual: float
    pohozaev_residual: float
    mass_sq: float
    grad_sq: float
    lp_p: float
    match_radius: float
    bracket: tuple
    evaluate: Callable[[np.ndarray], np.ndarray] = field(repr=False)


def _series(w0: float, dim: int, p: float, r: float):
    f0 = w0 ** (p - 1)
    df0 = (p - 1) * w0 ** (p - 2)
    c2 = (w0 - f0) / (2 * dim)
    c4 = c2 * (1.0 - df0) / (4 * (dim + 2))
    w = w0 + c2 * r**2 + c4 * r**4
    dw = 2 * c2 * r + 4 * c4 * r**3
    return w, dw


def _shoot(w0: float, dim: int, p: float, dense: bool = False):
    """Integrate from the origin; return (kind, solution).

    ``kind`` is ``"high"`` when the trajectory crosses zero and ``"low"`` when it
    turns back up or stays positive up to the integration limit.
    """
    r0 = 1e-3 / max(1.0, w0 ** ((p - 2) / 2))
    w, dw = _series(w0, dim, p, r0)
    # accumulated integrals (without the sphere factor)
    q0 = [w0**2 * r0**dim / dim, (dw / r0) ** 2 * r0 ** (dim + 2) / (dim + 2),
          w0**p * r0**dim / dim]

    def rhs(r, y):
        wv, dv = y[0], y[1]
        a = abs(wv)
        rn = r ** (dim - 1)
        return [dv, -(dim - 1) / r * dv + wv - a ** (p - 2) * wv,
                rn * wv * wv, rn * dv * dv, rn * a**p]

    def crossing(r, y):
        return y[0]

    crossing.terminal = True
    crossing.direction = -1

    def turning(r, y):
        return y[1]

    turning.terminal = True
    turning.direction = 1

    sol = integrate.solve_ivp(rhs, (r0, _R_LIMIT), [w, dw, *q0], method="DOP853",
                              rtol=1e-12, atol=1e-16, events=(crossing, turning),
                              dense_output=dense)
    if sol.status < 0:
        raise SolverFailure(f"shooting integration failed: {sol.message}")
    kind = "high" if sol.t_events[0].size else "low"
    return kind, sol


def _decay_shape(dim: int, r):
    order = (dim - 2) / 2
    r = np.asarray(r, dtype=float)
    return special.kve(order, r) * np.exp(-r) * r ** (-order)


def solve_scalar_profile(dim: int, p: float, grid: RadialGrid | None = None,
                         tol: float = 1e-13, bracket: tuple = DEFAULT_BRACKET,
                         max_iter: int = 200) -> ShootResult:
    """Compute ``Z`` for the exponent ``p`` by bisection shooting.

    Parameters
    ----------
    dim : int
        Space dimension, 3 or 4.
    p : float
        Nonlinearity exponent, ``2 < p < 2N/(N-2)``.
    grid : RadialGrid, optional
        Output grid; defaults to 2049 uniform nodes on ``[0, 30]``.
    tol : float
        Relative width of the final height bracket.
    bracket : (float, float)
        Search interval for ``Z(0)``.

    Raises
    ------
    SolverFailure
        If the bracket ends do not straddle the dichotomy.
    ResolutionError
        If ``tol`` is below what double precision can resolve.
    """
    two_star = critical_exponent(dim)
    if not 2.0 < p < two_star:
        raise DomainError(f"p must lie in (2, {two_star}), got {p}")
    if not tol > 0:
        raise ConfigurationError("tol must be positive")
    if tol < 4 * np.finfo(float).eps:
        raise ResolutionError(f"tol={tol} is below double precision resolution")
    if grid is None:
        grid = make_grid(dim, 30.0, 2049)
    if grid.dim != dim:
        raise ConfigurationError("grid dimension does not match dim")

    lo, hi = map(float, bracket)
    if not 0 < lo < hi:
        raise ConfigurationError("bracket must satisfy 0 < low < high")
    if _shoot(lo, dim, p)[0] != "low" or _shoot(hi, dim, p)[0] != "high":
        raise SolverFailure(f"bracket {bracket} does not straddle the shooting dichotomy")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol * hi or mid in (lo, hi):
            break
        if _shoot(mid, dim, p)[0] == "high":
            hi = mid
        else:
            lo = mid

    _, sol_lo = _shoot(lo, dim, p, dense=True)
    _, sol_hi = _shoot(hi, dim, p, dense=True)
    r_end = min(sol_lo.t[-1], sol_hi.t[-1])
    rs = np.linspace(sol_lo.t[0], r_end, 4001)
    w_lo = sol_lo.sol(rs)[0]
    w_hi = sol_hi.sol(rs)[0]
    gap = np.abs(w_lo - w_hi) > 1e-4 * np.abs(w_lo)
    idx = int(np.argmax(gap)) if gap.any() else rs.size - 1
    r_match = float(rs[max(idx - 1, 1)])

    y_match = 0.5 * (sol_lo.sol(r_match) + sol_hi.sol(r_match))
    w_m = float(y_match[0])
    scale = w_m / float(_decay_shape(dim, r_match))
    mass_in, grad_in, lp_in = (float(v) for v in y_match[2:5])

    def tail(r):
        return scale * _decay_shape(dim, r)

    def dtail(r):
        order = (dim - 2) / 2
        # d/dr [r^{-nu} K_nu(r)] = -r^{-nu} K_{nu+1}(r)
        return -scale * special.kve(order + 1, r) * np.exp(-r) * r ** (-order)

    quad = dict(limit=200, epsabs=0.0, epsrel=1e-12)
    mass_tail = integrate.quad(lambda r: tail(r) ** 2 * r ** (dim - 1), r_match, np.inf, **quad)[0]
    grad_tail = integrate.quad(lambda r: dtail(r) ** 2 * r ** (dim - 1), r_match, np.inf, **quad)[0]
    lp_tail = integrate.quad(lambda r: tail(r) ** p * r ** (dim - 1), r_match, np.inf, **quad)[0]

    omega = sphere_area(dim)
    m_tot = omega * (mass_in + mass_tail)
    g_tot = omega * (grad_in + grad_tail)
    p_tot = omega * (lp_in + lp_tail)
    nehari = abs(g_tot + m_tot - p_tot) / p_tot
    pohozaev = abs(0.5 * (dim - 2) * g_tot + 0.5 * dim * m_tot - dim / p * p_tot) / (dim / p * p_tot)

    w0 = 0.5 * (lo + hi)
    r_first = sol_lo.t[0]

    def evaluate(r):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        core = r < r_first
        mid = (r >= r_first) & (r <= r_match)
        far = r > r_match
        out[core] = _series(w0, dim, p, r[core])[0]
        if mid.any():
            out[mid] = 0.5 * (sol_lo.sol(r[mid])[0] + sol_hi.sol(r[mid])[0])
        out[far] = tail(r[far])
        return out

    profile = Field(grid, evaluate(grid.nodes))
    return ShootResult(dim=dim, p=p, profile=profile, initial_height=w0,
                       nehari_residual=float(nehari), pohozaev_residual=float(pohozaev),
                       mass_sq=float(m_tot), grad_sq=float(g_tot), lp_p=float(p_tot),
                       match_radius=r_match, bracket=(lo, hi), evaluate=evaluate)


def bubble_values(dim: int, eps: float, r) -> np.ndarray:
    """Exact ``U_eps(r)``."""
    if not eps > 0:
        raise DomainError("eps must be positive")
    r = np.asarray(r, dtype=float)
    k = (dim * (dim - 2)) ** ((dim - 2) / 4)
    return k * (eps / (eps**2 + r**2)) ** ((dim - 2) / 2)


def bubble(dim: int, eps: float, grid: RadialGrid) -> Field:
    """Aubin-Talenti bubble ``U_eps`` sampled on ``grid``."""
    if grid.dim != dim:
        raise ConfigurationError("grid dimension does not match dim")
    return Field(grid, bubble_values(dim, eps, grid.nodes))


def _bubble_tails(dim: int, eps: float, r_max: float):
    """Gradient and critical-norm integrals of ``U_eps`` over ``|x| > r_max``."""
    two_star = critical_exponent(dim)
    k = (dim * (dim - 2)) ** ((dim - 2) / 4)

    def du(r):
        # derivative of k (eps/(eps^2+r^2))^{(N-2)/2}
        return -k * (dim - 2) * eps ** ((dim - 2) / 2) * r * (eps**2 + r**2) ** (-dim / 2)

    omega = sphere_area(dim)
    opts = dict(limit=200, epsabs=0.0, epsrel=1e-12)
    g = integrate.quad(lambda r: du(r) ** 2 * r ** (dim - 1), r_max, np.inf, **opts)[0]
    c = integrate.quad(lambda r: bubble_values(dim, eps, r) ** two_star * r ** (dim - 1),
                       r_max, np.inf, **opts)[0]
    return omega * g, omega * c


@dataclass(frozen=True)
class SobolevConstant:
    """Numerical Sobolev constant with an R-doubling truncation estimate."""

    value: float
    truncation_error: float
    dim: int

    def __float__(self) -> float:
        return self.value


def _sobolev_quotient(dim: int, eps: float, grid: RadialGrid, tails: bool) -> float:
    u = bubble(dim, eps, grid)
    two_star = critical_exponent(dim)
    g = grad_sq(u)
    c = lp_norm_p(u, two_star)
    if tails:
        tg, tc = _bubble_tails(dim, eps, grid.r_max)
        g, c = g + tg, c + tc
    return g / c ** (2.0 / two_star)


def sobolev_constant(dim: int, grid: RadialGrid | None = None, eps: float = 1.0,
                     tol: float = 1e-3) -> SobolevConstant:
    """Sobolev quotient of the bubble ``U_eps``.

    The grid quadrature covers ``[0, r_max]`` and the exact bubble supplies the
    contribution of ``|x| > r_max``.  The truncation error is the change of the
    value when the grid is extended to ``2 r_max`` at the same spacing.

    Raises
    ------
    ResolutionError
        If the truncation estimate exceeds ``tol`` relative.
    """
    if grid is None:
        grid = make_grid(dim, 40.0, 4097)
    if grid.dim != dim:
        raise ConfigurationError("grid dimension does not match dim")
    value = _sobolev_quotient(dim, eps, grid, tails=True)
    doubled = make_grid(dim, 2 * grid.r_max, 2 * grid.size - 1)
    value2 = _sobolev_quotient(dim, eps, doubled, tails=True)
    err = abs(value2 - value)
    if err > tol * value:
        raise ResolutionError(f"Sobolev constant not converged under R-doubling: {err:.3e}")
    return SobolevConstant(value=float(value), truncation_error=float(err), dim=dim)


def cutoff(r) -> np.ndarray:
    """Smooth radial cut-off: 1 on ``r <= 1``, 0 on ``r >= 2``."""
    r = np.asarray(r, dtype=float)

    def psi(x):
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = np.exp(-1.0 / x[pos])
        return out

    a = psi(2.0 - r)
    b = psi(r - 1.0)
    return a / (a + b)


def cutoff_bubble(dim: int, eps: float, grid: RadialGrid) -> Field:
    """Test function ``eta_eps = cutoff * U_eps``, supported in the ball of radius 2."""
    if not 0 < eps <= 1:
        raise DomainError("eps must lie in (0, 1]")
    if grid.dim != dim:
        raise ConfigurationError("grid dimension does not match dim")
    r = grid.nodes
    return Field(grid, cutoff(r) * bubble_values(dim, eps, r))


def export_profile_csv(target, fields: dict | Field, grid: RadialGrid | None = None) -> None:
    """Write ``r`` and one column per field as CSV.

    ``fields`` is either a single Field (column ``value``) or a mapping from column
    name to Field.  ``target`` is a path or an open text file.
    """
    if isinstance(fields, Field):
        fields = {"value": fields}
    cols = list(fields.items())
    if not cols:
        raise ConfigurationError("nothing to export")
    grid = grid or cols[0][1].grid
    for _, f in cols:
        if f.grid is not grid:
            raise ConfigurationError("all exported fields must share the grid")

    def write(fh):
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["r", *[name for name, _ in cols]])
        for i, r in enumerate(grid.nodes):
            w.writerow([repr(float(r)), *[repr(float(f.values[i])) for _, f in cols]])

    if hasattr(target, "write"):
        write(target)
    else:
        with open(target, "w", newline="") as fh:
            write(fh)


@lru_cache(maxsize=4)
def sobolev_value(dim: int) -> float:
    """Cached Sobolev constant on the default grid."""
    return sobolev_constant(dim).value
