"""Fiber-map algebra on the scalar triple ``(A, B, D)``.

For a state ``(u, v)`` write ``A = |grad u|^2 + |grad v|^2``,
``B = |u|_{2*}^{2*} + |v|_{2*}^{2*}`` and ``D = int |u|^alpha |v|^beta``.  Under the
mass preserving dilation ``t * (u, v)`` these become ``e^{2t} A``, ``e^{2* t} B`` and
``e^{gamma t} D``, so every functional below, and the whole fiber map

    Phi(t) = e^{2t} A / 2 - e^{2* t} B / 2* - nu e^{gamma t} D,

is a closed-form function of the triple.  ``Phi'(t)`` is the Pohozaev functional
of the dilated state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, RegimeError, WindowError
from .params import CRITICAL, SUBCRITICAL, SUPERCRITICAL, Params, regime_of
from .radial import Pair, grad_sq, lp_norm_p, mass_sq, mixed_integral

__all__ = [
    "FiberScalars",
    "FiberCriticalSet",
    "LandscapeConstants",
    "scalars_of",
    "energy",
    "pohozaev",
    "j_functional",
    "phi",
    "critical_points",
    "classify_pohozaev",
    "nu_zero",
    "landscape_constants",
    "o_nu_predicate",
    "limit_energy",
    "limit_pohozaev",
    "limit_fiber_project",
    "limit_level",
    "manifold_tolerance",
]

WINDOW = (-30.0, 30.0)
PANELS = 512
T_TOL = 1e-12
_EXP_CAP = 700.0

PPLUS, PZERO, PMINUS, OFF = "Pplus", "Pzero", "Pminus", "off_manifold"
LOCAL_MIN, MAX, DEGENERATE = "local_min", "max", "degenerate"


@dataclass(frozen=True)
class FiberScalars:
    """Integrals ``(A, B, D)`` and the two masses of a state in dimension ``dim``."""

    A: float
    B: float
    D: float
    masses: tuple = (0.0, 0.0)
    dim: int = 3

    def __post_init__(self):
        for name in ("A", "B", "D"):
            val = getattr(self, name)
            if not math.isfinite(val) or val < 0:
                raise DomainError(f"{name} must be finite and nonnegative, got {val}")

    @property
    def two_star(self) -> float:
        return 2.0 * self.dim / (self.dim - 2)

    def rescaled(self, t: float, gamma: float) -> "FiberScalars":
        """Scalars of ``t * (u, v)``."""
        return FiberScalars(math.exp(2 * t) * self.A, math.exp(self.two_star * t) * self.B,
                            math.exp(gamma * t) * self.D, self.masses, self.dim)

    def to_dict(self) -> dict:
        return {"A": self.A, "B": self.B, "D": self.D, "masses": list(self.masses),
                "dim": self.dim}


def scalars_of(pair: Pair, params: Params) -> FiberScalars:
    """Collect ``(A, B, D)`` and the masses of ``pair``."""
    ts = params.two_star
    a = grad_sq(pair.u) + grad_sq(pair.v)
    b = lp_norm_p(pair.u, ts) + lp_norm_p(pair.v, ts)
    d = mixed_integral(pair, params.alpha, params.beta)
    return FiberScalars(a, b, d, (mass_sq(pair.u), mass_sq(pair.v)), pair.grid.dim)


def energy(s: FiberScalars, nu: float) -> float:
    """``I = A/2 - B/2* - nu D``."""
    return 0.5 * s.A - s.B / s.two_star - nu * s.D


def pohozaev(s: FiberScalars, nu: float, gamma: float) -> float:
    """``P = A - B - nu gamma D``."""
    return s.A - s.B - nu * gamma * s.D


def j_functional(s: FiberScalars, nu: float, gamma: float) -> float:
    """``J = A/N - (2* - gamma)/2* nu D``, which equals ``I - P/2*``."""
    return s.A / s.dim - (s.two_star - gamma) / s.two_star * nu * s.D


def phi(s: FiberScalars, nu: float, gamma: float, t):
    """Fiber map and its first two derivatives at ``t`` (scalar or array)."""
    ts = s.two_star
    t = np.asarray(t, dtype=float)
    e2, es, eg = np.exp(2 * t), np.exp(ts * t), np.exp(gamma * t)
    val = 0.5 * e2 * s.A - es * s.B / ts - nu * eg * s.D
    d1 = e2 * s.A - es * s.B - nu * gamma * eg * s.D
    d2 = 2 * e2 * s.A - ts * es * s.B - nu * gamma**2 * eg * s.D
    if t.ndim == 0:
        return float(val), float(d1), float(d2)
    return val, d1, d2


def _scaled_d1(s, nu, gamma, t):
    """``Phi'(t) e^{-2t}``: same sign as ``Phi'`` and free of overflow on the window."""
    t = np.asarray(t, dtype=float)
    k1 = np.minimum((s.two_star - 2) * t, _EXP_CAP)
    k2 = np.clip((gamma - 2) * t, -_EXP_CAP, _EXP_CAP)
    return s.A - s.B * np.exp(k1) - nu * gamma * s.D * np.exp(k2)


def _scaled_phi(s, nu, gamma, t):
    t = np.asarray(t, dtype=float)
    k1 = np.minimum((s.two_star - 2) * t, _EXP_CAP)
    k2 = np.clip((gamma - 2) * t, -_EXP_CAP, _EXP_CAP)
    return 0.5 * s.A - s.B * np.exp(k1) / s.two_star - nu * s.D * np.exp(k2)


def _scaled_d2(s, nu, gamma, t):
    t = np.asarray(t, dtype=float)
    k1 = np.minimum((s.two_star - 2) * t, _EXP_CAP)
    k2 = np.clip((gamma - 2) * t, -_EXP_CAP, _EXP_CAP)
    return 2 * s.A - s.two_star * s.B * np.exp(k1) - nu * gamma**2 * s.D * np.exp(k2)


def _roots(func, lo: float, hi: float, panels: int) -> list[float]:
    ts = np.linspace(lo, hi, panels + 1)
    vals = func(ts)
    out = []
    for i in range(panels):
        f0, f1 = vals[i], vals[i + 1]
        if f0 == 0.0:
            out.append(float(ts[i]))
        elif np.sign(f0) * np.sign(f1) < 0:
            out.append(brentq(lambda x: float(func(x)), ts[i], ts[i + 1],
                              xtol=T_TOL, rtol=4 * np.finfo(float).eps, maxiter=500))
    if vals[-1] == 0.0:
        out.append(float(ts[-1]))
    return out


@dataclass(frozen=True)
class FiberCriticalSet:
    """Critical points and zeros of the fiber map.

    ``points`` holds ``(t, kind)`` pairs sorted by ``t``; kind is ``local_min``,
    ``max`` or ``degenerate`` (a vanishing second derivative at a root).
    """

    regime: str
    points: list = field(default_factory=list)
    zeros: list = field(default_factory=list)
    window: tuple = WINDOW

    @property
    def degenerate(self) -> bool:
        return any(k == DEGENERATE for _, k in self.points)

    def times(self, kind: str | None = None) -> list[float]:
        return [t for t, k in self.points if kind is None or k == kind]

    def to_dict(self) -> dict:
        return {"regime": self.regime,
                "points": [{"t": t, "kind": k} for t, k in self.points],
                "zeros": list(self.zeros), "window": list(self.window),
                "degenerate": self.degenerate}


def critical_points(s: FiberScalars, nu: float, gamma: float, window: tuple = WINDOW,
                    panels: int = PANELS, expansions: int = 2) -> FiberCriticalSet:
    """Locate the critical points and zeros of ``Phi`` by sign scan and bisection.

    The window doubles up to ``expansions`` times when ``Phi'`` has no sign change.

    Raises
    ------
    DomainError
        If ``A`` or ``B`` vanishes.
    WindowError
        If no critical point is found after the expansions.
    """
    if not (s.A > 0 and s.B > 0):
        raise DomainError("critical points need A > 0 and B > 0")
    regime = regime_of(gamma, nu)
    lo, hi = map(float, window)
    for _ in range(expansions + 1):
        roots = _roots(lambda t: _scaled_d1(s, nu, gamma, t), lo, hi, panels)
        if roots:
            break
        lo, hi = 2 * lo, 2 * hi
    else:
        raise WindowError(f"no critical point of the fiber map in [{lo / 2}, {hi / 2}]")
    scale = 2 * s.A + s.two_star * s.B + abs(nu) * gamma**2 * s.D
    points = []
    for t in roots:
        d2 = float(_scaled_d2(s, nu, gamma, t))
        if abs(d2) <= 1e-10 * scale:
            kind = DEGENERATE
        else:
            kind = LOCAL_MIN if d2 > 0 else MAX
        points.append((float(t), kind))
    zeros = [float(t) for t in _roots(lambda t: _scaled_phi(s, nu, gamma, t), lo, hi, panels)]
    return FiberCriticalSet(regime=regime, points=points, zeros=zeros, window=(lo, hi))


def manifold_tolerance(s: FiberScalars, nu: float, gamma: float, rel: float = 1e-6) -> float:
    """Tolerance relative to the largest term of the Pohozaev functional."""
    scale = max(s.A, s.B, abs(nu * gamma) * s.D)
    return rel * (scale if scale > 0 else 1.0)


def classify_pohozaev(s: FiberScalars, nu: float, gamma: float, rel: float = 1e-6) -> str:
    """``Pplus``, ``Pzero``, ``Pminus`` or ``off_manifold``."""
    tol = manifold_tolerance(s, nu, gamma, rel)
    if abs(pohozaev(s, nu, gamma)) > tol:
        return OFF
    d2 = phi(s, nu, gamma, 0.0)[2]
    if abs(d2) <= tol:
        return PZERO
    return PPLUS if d2 > 0 else PMINUS


def _inputs(params: Params, gn_constant: float | None, sobolev: float | None):
    if gn_constant is None:
        from .gn import vector_constant
        gn_constant = vector_constant(params.dim, params.alpha, params.beta)
    if sobolev is None:
        from .profiles import sobolev_value
        sobolev = sobolev_value(params.dim)
    return float(gn_constant), float(sobolev)


def nu_zero(params: Params, gn_constant: float | None = None, sobolev: float | None = None) -> float:
    """Smallness threshold for the coupling.

    For ``gamma < 2`` the explicit threshold in terms of ``S``, ``C(N, alpha, beta)``
    and ``a^2 + b^2``; for ``N = 4``, ``alpha + beta = 3`` the value
    ``C^{-1} (a^2 + b^2)^{-1/2} / 2``.  ``gn_constant`` and ``sobolev`` default to
    the cached oracle values.

    Raises
    ------
    DomainError
        For ``gamma > 2``, or ``gamma = 2`` outside ``N = 4``.
    """
    cls = params.gamma_class
    if cls == SUPERCRITICAL:
        raise DomainError("nu_0 is only defined for gamma <= 2")
    if cls == CRITICAL and params.dim != 4:
        raise DomainError("gamma = 2 is only covered for N = 4")
    c, s = _inputs(params, gn_constant, sobolev if cls == SUBCRITICAL else 1.0)
    m = params.mass_total
    if cls == CRITICAL:
        return 0.5 / c / math.sqrt(m)
    g, ts, p = params.gamma, params.two_star, params.p
    first = min(1.0 / g, (ts + 2 - g) / (2 * ts))
    num = s ** (ts * (2 - g) / (2 * (ts - 2))) * (ts - 2) * (2 - g) ** ((2 - g) / (ts - 2))
    den = c * (ts - g) ** ((ts - g) / (ts - 2)) * m ** ((p - g) / 2)
    return first * num / den


@dataclass(frozen=True)
class LandscapeConstants:
    """Coefficients of ``h(rho) = rho^2/2 - A_h rho^gamma - B_h rho^{2*}`` and its landmarks."""

    rho_star: float
    R0: float
    R1: float
    h_rho_star: float
    g_rho_star: float
    A_h: float
    B_h: float
    gamma: float
    two_star: float

    def h(self, rho):
        rho = np.asarray(rho, dtype=float)
        return 0.5 * rho**2 - self.A_h * rho**self.gamma - self.B_h * rho**self.two_star

    def g(self, rho):
        rho = np.asarray(rho, dtype=float)
        return rho ** (2 - self.gamma) - self.two_star * self.B_h * rho ** (self.two_star - self.gamma)


def landscape_constants(params: Params, nu: float | None = None, gn_constant: float | None = None,
                        sobolev: float | None = None) -> LandscapeConstants:
    """``rho_*``, the zeros ``R0 < R1`` of ``h`` and the values ``h(rho_*)``, ``g(rho_*)``.

    Raises
    ------
    RegimeError
        If ``gamma >= 2``, ``nu <= 0`` or ``h(rho_*) <= 0`` (so ``h`` has no positive bump).
    """
    nu = params.nu if nu is None else float(nu)
    if params.gamma_class != SUBCRITICAL:
        raise RegimeError("the landscape constants need gamma < 2")
    if nu <= 0:
        raise RegimeError("the landscape constants need nu > 0")
    c, s = _inputs(params, gn_constant, sobolev)
    g, ts = params.gamma, params.two_star
    a_h = nu * c * params.mass_total ** ((params.p - g) / 2)
    b_h = s ** (-ts / 2) / ts
    rho_star = ((2 - g) / (ts * (ts - g) * b_h)) ** (1 / (ts - 2))

    def k(rho):
        # h(rho) / rho^gamma, same zeros on rho > 0
        return 0.5 * rho ** (2 - g) - a_h - b_h * rho ** (ts - g)

    h_star = rho_star**g * k(rho_star)
    g_star = rho_star ** (2 - g) - ts * b_h * rho_star ** (ts - g)
    if not (h_star > 0 and g_star > g * a_h):
        raise RegimeError(f"h(rho_*) = {h_star:.3e} <= 0: nu = {nu} is beyond the threshold")
    r0 = brentq(k, 0.0, rho_star, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=1000)
    upper = 2 * rho_star
    while k(upper) > 0:
        upper *= 2
    r1 = brentq(k, rho_star, upper, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=1000)
    return LandscapeConstants(rho_star=rho_star, R0=r0, R1=r1, h_rho_star=h_star,
                              g_rho_star=g_star, A_h=a_h, B_h=b_h, gamma=g, two_star=ts)


def o_nu_predicate(s: FiberScalars, nu: float) -> bool:
    """Membership in ``{A > 2 nu D}``."""
    return s.A > 2.0 * nu * s.D


def limit_energy(s: FiberScalars) -> float:
    """Limit-system energy ``K = A/2 - D``."""
    return 0.5 * s.A - s.D


def limit_pohozaev(s: FiberScalars, gamma: float) -> float:
    """Limit-system Pohozaev functional ``L = A - gamma D``."""
    return s.A - gamma * s.D


def limit_fiber_project(state, params: Params) -> tuple[float, float]:
    """Dilation onto ``{L = 0}`` and the reduced energy there.

    Returns ``(t_star, K_tilde)`` with ``e^{t_star} = (gamma D / A)^{1/(2-gamma)}``.
    ``state`` is a Pair or a FiberScalars.
    """
    s = scalars_of(state, params) if isinstance(state, Pair) else state
    g = params.gamma
    if params.gamma_class == CRITICAL:
        raise DomainError("the limit projection needs gamma != 2")
    if not s.D > 0:
        raise DomainError("the limit projection needs D > 0")
    if not s.A > 0:
        raise DomainError("the limit projection needs A > 0")
    t_star = math.log(g * s.D / s.A) / (2 - g)
    k_tilde = (g - 2) / (2 * g) * (s.A ** (g / 2) / (g * s.D)) ** (2 / (g - 2))
    return t_star, k_tilde


def limit_level(params: Params, gn_constant: float | None = None) -> float:
    """Closed-form limit ground-state level ``l(a, b)`` (valid when ``a^2/b^2 = alpha/beta``)."""
    if params.gamma_class == CRITICAL:
        raise DomainError("l(a, b) needs gamma != 2")
    c, _ = _inputs(params, gn_constant, 1.0)
    g, p = params.gamma, params.p
    return ((g - 2) / (2 * g) * g ** (2 / (2 - g))
            * params.mass_total ** ((p - g) / (2 - g)) * c ** (2 / (2 - g)))
