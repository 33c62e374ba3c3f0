"""Normalized ground states by reduced-functional descent.

The unknown is a pair ``w = (u, v)`` on a fixed radial grid with prescribed masses.
The physical state is the dilation ``t*(w) * w``, where ``t*`` is the branch critical
point of the fiber map of ``w``: the local minimum on the ``P+`` branch
(``gamma < 2``), the maximum otherwise.  Because ``t * w`` only rescales the triple
``(A, B, D)``, the reduced energy ``F(w) = Phi_w(t*(w))`` and every diagnostic of the
physical state (energy, multipliers, Pohozaev and PDE residuals) are evaluated
exactly from grid quantities of ``w`` and the number ``t*``.  No resampling is
needed, which keeps ground states representable when their physical length scale
is far outside the grid (``e^{t*}`` behaves like a power of ``nu``).

``F`` is invariant under dilation of ``w``, so the grid frame is free.  The shape is
re-dilated (and resampled) only when its half-mass radius leaves a window, to keep
it resolved.

Descent step (per component, ``K`` stiffness, ``M`` quadrature weights)::

    g   = e^{2t} K u - e^{2* t} M u^{2*-1} - nu alpha e^{gamma t} M u^{alpha-1} v^beta
    d   = P^{-1} (g - mu M u),   P = e^{2t} K + c M,   mu chosen so u^T M d = 0
    u  <- a |u - tau d| / |u - tau d|_2

with Armijo backtracking on ``F``.  The envelope theorem makes ``g`` the gradient of
``F`` because ``Phi_w'(t*) = 0``.
"""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigurationError, DomainError, RegimeError, WindowError
from .fiber import (LOCAL_MIN, MAX, PMINUS, PPLUS, FiberScalars, classify_pohozaev,
                    critical_points, limit_level, nu_zero, phi)
from .gn import extremal_coefficients
from .params import CRITICAL, NONPOSITIVE, SUBCRITICAL, SUPERCRITICAL, Params
from .profiles import (ShootResult, bubble_values, cutoff,
                       solve_scalar_profile, sobolev_value)
from .radial import (Field, Pair, RadialGrid, grad_sq, l2_scale, lp_norm_p, make_grid,
                     mass_sq, mixed_integral, neg_laplacian, solve_shifted_stiffness)

__all__ = [
    "SolveConfig",
    "SolveReport",
    "LimitSolution",
    "Nu1Estimate",
    "NonpositiveReport",
    "minimize_ground_state",
    "minimize_limit_system",
    "solve_limit_closed_form",
    "estimate_nu1",
    "verify_nonpositive_regime",
    "pde_residuals",
    "physical_pair",
    "initial_pair",
    "thread_count",
]

BRANCH_PLUS = "Pplus_local_min"
BRANCH_MINUS = "Pminus_mountain_pass"
BRANCH_LIMIT = "limit_reduced"
NU1_ZERO_FLAG = "consistent with nu1=0"


def thread_count() -> int:
    """Worker cap from ``NORMSTATE_THREADS`` (default 1)."""
    raw = os.environ.get("NORMSTATE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigurationError(f"NORMSTATE_THREADS must be an integer, got {raw!r}") from exc
    return max(1, n)


@dataclass(frozen=True)
class SolveConfig:
    """Grid, step control, tolerances and initial-guess recipe of a solve.

    ``grad_tol`` bounds the preconditioned gradient norm relative to the physical
    gradient energy.  ``energy_tol`` is the relative energy accuracy claimed by a
    converged solve (used for margins and monotonicity checks).  ``initial`` is
    ``auto``, ``gaussian`` or ``bubble_gaussian``.
    """

    r_max: float = 30.0
    count: int = 2049
    grading: str = "geometric"
    step: float = 1.0
    step_growth: float = 2.0
    step_shrink: float = 0.5
    max_halvings: int = 30
    max_iter: int = 4000
    grad_tol: float = 1e-7
    pohozaev_tol: float = 1e-6
    residual_tol: float = 1e-3
    energy_tol: float = 1e-6
    initial: str = "auto"
    width: float | None = None
    seed: int = 0
    perturbation: float = 1e-2

    def __post_init__(self):
        for name in ("grad_tol", "pohozaev_tol", "residual_tol", "energy_tol", "step", "r_max"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.count < 16:
            raise ConfigurationError("count must be at least 16")
        if self.initial not in ("auto", "gaussian", "bubble_gaussian"):
            raise ConfigurationError(f"unknown initial recipe {self.initial!r}")
        if not 0 < self.step_shrink < 1 or self.step_growth < 1:
            raise ConfigurationError("need 0 < step_shrink < 1 <= step_growth")

    def grid(self, dim: int) -> RadialGrid:
        return make_grid(dim, self.r_max, self.count, self.grading)

    @classmethod
    def from_dict(cls, data: dict | None) -> "SolveConfig":
        data = dict(data or {})
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown solver settings: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SolveReport:
    """Outcome of a ground-state or limit-system solve.

    ``t_star`` is the fiber parameter of the returned grid pair: the physical
    state is ``t_star * pair``.  ``A``, ``B``, ``D`` are the integrals of the
    physical state.
    """

    energy: float
    lambda1: float
    lambda2: float
    pohozaev_residual: float
    pde_residual: float
    branch: str
    classification: str
    iterations: int
    converged: bool
    t_star: float
    grad_norm: float
    A: float
    B: float
    D: float
    regime: str
    in_existence_regime: bool
    multiplier_gap: float
    resolved: bool = True
    message: str = ""

    def to_dict(self) -> dict:
        return {k: _clean(v) for k, v in asdict(self).items()}


def _clean(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


# --------------------------------------------------------------------------- functional


@dataclass
class _Scalars:
    Au: float
    Av: float
    Bu: float
    Bv: float
    D: float

    @property
    def A(self):
        return self.Au + self.Av

    @property
    def B(self):
        return self.Bu + self.Bv


class _Functional:
    """Reduced functional of the critical system (or of the limit system)."""

    def __init__(self, params: Params, grid: RadialGrid, limit: bool = False):
        self.params = params
        self.grid = grid
        self.limit = limit
        self.nu = 1.0 if limit else params.nu
        self.gamma = params.gamma
        self.ts = params.two_star
        self.dim = params.dim
        if limit:
            if params.gamma_class == CRITICAL:
                raise DomainError("the limit system needs gamma != 2")
            self.branch = BRANCH_LIMIT
        elif params.gamma_class == SUBCRITICAL and params.nu > 0:
            self.branch = BRANCH_PLUS
        else:
            self.branch = BRANCH_MINUS

    # integrals -----------------------------------------------------------
    def scalars(self, u: np.ndarray, v: np.ndarray) -> _Scalars:
        g = self.grid
        fu, fv = Field(g, u), Field(g, v)
        p = self.params
        if self.limit:
            bu = bv = 0.0
        else:
            bu, bv = lp_norm_p(fu, self.ts), lp_norm_p(fv, self.ts)
        return _Scalars(grad_sq(fu), grad_sq(fv), bu, bv,
                        mixed_integral(Pair(fu, fv), p.alpha, p.beta))

    def fiber(self, s: _Scalars) -> FiberScalars:
        return FiberScalars(s.A, s.B, s.D, dim=self.dim)

    # fiber parameter -----------------------------------------------------
    def t_star(self, s: _Scalars, guess: float | None = None) -> float:
        if self.limit:
            if not (s.D > 0 and s.A > 0):
                raise RegimeError("limit projection needs A > 0 and D > 0")
            return math.log(self.gamma * s.D / s.A) / (2 - self.gamma)
        f = self.fiber(s)
        nu, g, ts = self.nu, self.gamma, self.ts

        def d1(t):
            return f.A - f.B * math.exp(min((ts - 2) * t, 700.0)) \
                - nu * g * f.D * math.exp(max(min((g - 2) * t, 700.0), -700.0))

        want_up = self.branch == BRANCH_PLUS  # local min: d1 goes from - to +
        if guess is not None and math.isfinite(guess):
            delta = 0.25
            while delta <= 8.0:
                lo, hi = guess - delta, guess + delta
                flo, fhi = d1(lo), d1(hi)
                if (want_up and flo < 0 < fhi) or (not want_up and flo > 0 > fhi):
                    return brentq(d1, lo, hi, xtol=1e-13, rtol=1e-15, maxiter=200)
                delta *= 2
        try:
            crit = critical_points(f, nu, g)
        except WindowError as exc:
            raise RegimeError(f"fiber projection failed: {exc}") from exc
        kind = LOCAL_MIN if want_up else MAX
        times = [t for t, k in crit.points if k == kind]
        if not times:
            raise RegimeError(f"the fiber map has no {kind} critical point for this state")
        return times[0] if want_up else times[-1]

    def value(self, s: _Scalars, t: float) -> float:
        if self.limit:
            return 0.5 * math.exp(2 * t) * s.A - math.exp(self.gamma * t) * s.D
        return float(phi(self.fiber(s), self.nu, self.gamma, t)[0])

    def d1(self, s: _Scalars, t: float) -> float:
        if self.limit:
            return math.exp(2 * t) * s.A - self.gamma * math.exp(self.gamma * t) * s.D
        return float(phi(self.fiber(s), self.nu, self.gamma, t)[1])

    def d2(self, s: _Scalars, t: float) -> float:
        if self.limit:
            return 2 * math.exp(2 * t) * s.A - self.gamma**2 * math.exp(self.gamma * t) * s.D
        return float(phi(self.fiber(s), self.nu, self.gamma, t)[2])

    # derivatives ---------------------------------------------------------
    def stiffness_apply(self, u: np.ndarray) -> np.ndarray:
        flux = self.grid.cell_weights * np.diff(u)
        ku = np.zeros_like(u)
        ku[:-1] -= flux
        ku[1:] += flux
        return ku

    def gradient(self, u: np.ndarray, v: np.ndarray, t: float):
        """Euclidean gradients of ``Phi_w(t)`` with respect to the nodal values."""
        p = self.params
        w = self.grid.weights
        au, av = np.abs(u), np.abs(v)
        e2 = math.exp(2 * t)
        eg = self.nu * math.exp(self.gamma * t)
        gu = e2 * self.stiffness_apply(u) - eg * p.alpha * w * au ** (p.alpha - 1) * av**p.beta
        gv = e2 * self.stiffness_apply(v) - eg * p.beta * w * au**p.alpha * av ** (p.beta - 1)
        if not self.limit:
            es = math.exp(self.ts * t)
            gu -= es * w * au ** (self.ts - 1)
            gv -= es * w * av ** (self.ts - 1)
        return gu, gv

    def multipliers(self, s: _Scalars, t: float) -> tuple[float, float]:
        """Multipliers from testing each equation with its own component."""
        p = self.params
        e2, eg = math.exp(2 * t), self.nu * math.exp(self.gamma * t)
        es = 0.0 if self.limit else math.exp(self.ts * t)
        l1 = (-e2 * s.Au + es * s.Bu + p.alpha * eg * s.D) / p.a**2
        l2 = (-e2 * s.Av + es * s.Bv + p.beta * eg * s.D) / p.b**2
        return l1, l2


def pde_residuals(pair: Pair, params: Params, t_star: float, lambdas: tuple,
                  limit: bool = False) -> tuple[float, float]:
    """Relative discrete L2 residuals of the Euler-Lagrange system of ``t_star * pair``.

    Both equations are pulled back to the grid frame; the Dirichlet node is excluded.
    """
    fn = _Functional(params.with_nu(params.nu if not limit else 1.0), pair.grid, limit=limit)
    u, v = pair.u.values, pair.v.values
    w = pair.grid.weights
    gu, gv = fn.gradient(u, v, t_star)
    out = []
    e2 = math.exp(2 * t_star)
    for comp, g, lam, field_ in ((u, gu, lambdas[0], pair.u), (v, gv, lambdas[1], pair.v)):
        res = (g + lam * w * comp)[:-1] / w[:-1]
        lap = e2 * neg_laplacian(field_)[:-1]
        wn = w[:-1]
        num = math.sqrt(np.dot(wn, res**2))
        den = max(math.sqrt(np.dot(wn, lap**2)), abs(lam) * math.sqrt(np.dot(wn, comp[:-1] ** 2)))
        out.append(num / den if den > 0 else math.inf)
    return out[0], out[1]


def physical_pair(pair: Pair, report: SolveReport) -> Pair:
    """Resample ``t_star * pair`` on the same grid (may raise ResolutionError)."""
    return l2_scale(report.t_star, pair)


# --------------------------------------------------------------------------- initial data


def _normalize(u: np.ndarray, grid: RadialGrid, mass: float) -> np.ndarray:
    u = np.abs(u)
    u[-1] = 0.0
    m = float(np.dot(grid.weights, u * u))
    if not m > 0:
        raise DomainError("cannot normalize a zero component")
    return u * (mass / math.sqrt(m))


def _perturbation(grid: RadialGrid, rng: np.random.Generator, size: float) -> np.ndarray:
    r = grid.nodes
    centers = rng.uniform(0, 0.4 * grid.r_max, 4)
    widths = rng.uniform(0.05, 0.15, 4) * grid.r_max
    amps = rng.uniform(-1, 1, 4) * size
    return 1.0 + sum(a * np.exp(-((r - c) / w) ** 2) for a, c, w in zip(amps, centers, widths))


def initial_pair(params: Params, grid: RadialGrid, config: SolveConfig, limit: bool = False) -> Pair:
    """Default starting pair: scaled Gaussians, or a bubble plus Gaussian for the ``P-`` branch."""
    rng = np.random.default_rng(config.seed)
    r = grid.nodes
    width = config.width or grid.r_max / 12.0
    gauss = np.exp(-0.5 * (r / width) ** 2)
    recipe = config.initial
    if recipe == "auto":
        mp = not limit and not (params.gamma_class == SUBCRITICAL and params.nu > 0)
        recipe = "bubble_gaussian" if mp else "gaussian"
    u = gauss * _perturbation(grid, rng, config.perturbation)
    v = gauss * _perturbation(grid, rng, config.perturbation)
    if recipe == "bubble_gaussian":
        eps = width / 4
        bub = bubble_values(params.dim, eps, r) * cutoff(r / (2 * width))
        u = u + bub / bub[0] * 2.0
    return Pair.from_arrays(grid, _normalize(u, grid, params.a), _normalize(v, grid, params.b))


def _half_mass_radius(u: np.ndarray, v: np.ndarray, grid: RadialGrid) -> float:
    dens = grid.weights * (u * u + v * v)
    cum = np.cumsum(dens)
    return float(np.interp(0.5 * cum[-1], cum, grid.nodes))


# --------------------------------------------------------------------------- descent


@dataclass
class _State:
    u: np.ndarray
    v: np.ndarray
    s: _Scalars
    t: float
    F: float


def _evaluate(fn: _Functional, u, v, guess=None) -> _State:
    s = fn.scalars(u, v)
    t = fn.t_star(s, guess)
    return _State(u, v, s, t, fn.value(s, t))


def _dilation_generator(comp: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """Tangent ``(N/2) u + r u'`` of the mass-preserving dilation orbit."""
    z = 0.5 * grid.dim * comp + grid.nodes * np.gradient(comp, grid.nodes)
    z[-1] = 0.0
    return z


def _direction(fn: _Functional, st: _State, metric_scale: float):
    """Preconditioned descent directions and the squared dual norm.

    Directions are tangent to both mass spheres and orthogonal, in the
    preconditioner metric, to the dilation orbit.  The discrete functional is
    only approximately dilation invariant, and without this projection the
    iteration creeps along that nearly flat direction.
    """
    grid = fn.grid
    w = grid.weights
    gu, gv = fn.gradient(st.u, st.v, st.t)
    lam = fn.multipliers(st.s, st.t)
    e2 = math.exp(2 * st.t)
    dirs, zs, pds, pzs = [], [], [], []
    norm2 = 0.0
    for comp, g, lam_i in ((st.u, gu, lam[0]), (st.v, gv, lam[1])):
        shift = max(lam_i, metric_scale * e2)
        wu = w * comp
        pg = _precondition(grid, e2, shift, g)
        pw = _precondition(grid, e2, shift, wu)
        mu = float(np.dot(wu, pg) / np.dot(wu, pw))
        dirs.append(pg - mu * pw)
        pds.append(g - mu * wu)
        norm2 += float(np.dot(pds[-1], dirs[-1]))
        z = _dilation_generator(comp, grid)
        z = z - float(np.dot(wu, z) / np.dot(wu, comp)) * comp
        z[-1] = 0.0
        pz = e2 * fn.stiffness_apply(z) + shift * w * z
        pz[-1] = 0.0
        zs.append(z)
        pzs.append(pz)
    zpz = sum(float(np.dot(z, pz)) for z, pz in zip(zs, pzs))
    zpd = sum(float(np.dot(z, pd)) for z, pd in zip(zs, pds))
    if zpz > 0:
        c = zpd / zpz
        dirs = [d - c * z for d, z in zip(dirs, zs)]
        norm2 -= zpd * c
    return dirs[0], dirs[1], norm2


def _precondition(grid: RadialGrid, e2: float, shift: float, rhs: np.ndarray) -> np.ndarray:
    return solve_shifted_stiffness(grid, shift / e2, rhs, dirichlet=True) / e2


# grid-frame decay window: R * sqrt(lambda) e^{-t} is kept within these bounds
_DECAY_BAND = (18.0, 45.0)
_DECAY_TARGET = 28.0
_HALF_MASS_BAND = (1.0 / 80.0, 1.0 / 6.0)
_MAX_MOVE = 3.0


def _recentre(fn: _Functional, st: _State, params: Params) -> _State:
    """Re-dilate the grid-frame shape when its tail or its core is badly resolved.

    The preferred frame puts the exponential tail at a fixed number of decay
    lengths inside the grid; the half-mass radius is kept inside a band so the
    core stays resolved.
    """
    grid = fn.grid
    big_r = grid.r_max
    r_half = max(_half_mass_radius(st.u, st.v, grid), grid.nodes[1])
    lo, hi = (f * big_r for f in _HALF_MASS_BAND)
    lam = min(fn.multipliers(st.s, st.t))
    if lam > 0:
        decay = math.sqrt(lam) * math.exp(-st.t) * big_r
        if _DECAY_BAND[0] <= decay <= _DECAY_BAND[1] and lo <= r_half <= hi:
            return st
        shift = math.log(_DECAY_TARGET / decay)
    else:
        if lo <= r_half <= hi:
            return st
        shift = math.log(r_half / (big_r / 12.0))
    # keep the core inside the half-mass band after the move
    shift = min(max(shift, math.log(r_half / hi)), math.log(r_half / lo))
    shift = min(max(shift, -_MAX_MOVE), _MAX_MOVE)
    if abs(shift) < 1e-3:
        return st
    pair = l2_scale(shift, Pair.from_arrays(grid, st.u, st.v))
    u = _normalize(pair.u.values.copy(), grid, params.a)
    v = _normalize(pair.v.values.copy(), grid, params.b)
    return _evaluate(fn, u, v, st.t - shift)


# nodes a component must keep above half its peak value
_CORE_NODES = 6


def _unresolved_core(u: np.ndarray, v: np.ndarray, grid: RadialGrid) -> str:
    """Reason why a component has collapsed below grid resolution, or ``""``.

    Once one component concentrates on a handful of nodes while the other stays
    wide, no common dilation resolves both, and the quadrature understates the
    Sobolev quotient of the spike: the energy drops for purely numerical reasons.
    """
    for i, comp in enumerate((u, v), start=1):
        count = int(np.count_nonzero(comp >= 0.5 * comp.max()))
        if count < _CORE_NODES:
            return (f"component {i} collapsed below grid resolution "
                    f"({count} nodes above half its peak)")
    return ""


def _descend(fn: _Functional, pair: Pair, config: SolveConfig):
    params = fn.params
    grid = fn.grid
    metric_scale = (math.pi / grid.r_max) ** 2
    st = _evaluate(fn, _normalize(pair.u.values.copy(), grid, params.a),
                   _normalize(pair.v.values.copy(), grid, params.b))
    tau = config.step
    gnorm = math.inf
    converged = False
    message = ""
    it = 0
    for it in range(1, config.max_iter + 1):
        du, dv, norm2 = _direction(fn, st, metric_scale)
        scale = math.exp(2 * st.t) * st.s.A
        gnorm = math.sqrt(max(norm2, 0.0) / scale)
        if gnorm < config.grad_tol:
            converged = True
            break
        accepted = False
        for _ in range(config.max_halvings + 1):
            try:
                u1 = _normalize(st.u - tau * du, grid, params.a)
                v1 = _normalize(st.v - tau * dv, grid, params.b)
                trial = _evaluate(fn, u1, v1, st.t)
            except (RegimeError, DomainError):
                tau *= config.step_shrink
                continue
            if trial.F <= st.F - 1e-4 * tau * norm2:
                accepted = True
                break
            tau *= config.step_shrink
        if not accepted:
            # no decrease available at machine precision: accept if the gradient is tiny
            message = f"line search stalled at gradient norm {gnorm:.3e}"
            converged = gnorm < 1e2 * config.grad_tol
            break
        st = _recentre(fn, trial, params)
        collapse = _unresolved_core(st.u, st.v, grid)
        if collapse:
            message = collapse
            break
        tau = min(tau * config.step_growth, config.step)
    else:
        message = f"iteration limit reached at gradient norm {gnorm:.3e}"
    return st, it, gnorm, converged, message


def _report(fn: _Functional, st: _State, it: int, gnorm: float, converged: bool,
            message: str, config: SolveConfig, in_regime: bool) -> tuple[Pair, SolveReport]:
    params = fn.params
    pair = Pair.from_arrays(fn.grid, st.u, st.v)
    lam = fn.multipliers(st.s, st.t)
    fs = fn.fiber(st.s)
    nu = fn.nu
    if fn.limit:
        phys = FiberScalars(math.exp(2 * st.t) * st.s.A, 0.0, math.exp(fn.gamma * st.t) * st.s.D,
                            dim=fn.dim)
        poh = abs(phys.A - fn.gamma * phys.D) / max(phys.A, 1e-300)
        d2 = fn.d2(st.s, st.t)
        classification = PPLUS if d2 > 0 else PMINUS
    else:
        phys = fs.rescaled(st.t, fn.gamma)
        poh = abs(phys.A - phys.B - nu * fn.gamma * phys.D) / max(phys.A, phys.B,
                                                                   abs(nu * fn.gamma) * phys.D)
        classification = classify_pohozaev(phys, nu, fn.gamma, rel=config.pohozaev_tol)
    r1, r2 = pde_residuals(pair, params, st.t, lam, limit=fn.limit)
    # second extraction path: sum of the multipliers from the Pohozaev identity
    e2, eg = math.exp(2 * st.t), nu * math.exp(fn.gamma * st.t)
    es = 0.0 if fn.limit else math.exp(fn.ts * st.t)
    total = -e2 * st.s.A + es * st.s.B + (params.alpha + params.beta) * eg * st.s.D
    gap = abs(lam[0] * params.a**2 + lam[1] * params.b**2 - total) / max(abs(total), 1e-300)
    ok = (converged and poh < config.pohozaev_tol and math.isfinite(lam[0])
          and math.isfinite(lam[1]))
    if converged and not ok:
        message = (message + "; " if message else "") + "Pohozaev residual above tolerance"
    confined = _confinement(lam, st.t, fn.grid.r_max)
    if ok and confined:
        ok = False
        message = (message + "; " if message else "") + confined
    report = SolveReport(energy=st.F, lambda1=lam[0], lambda2=lam[1], pohozaev_residual=poh,
                         pde_residual=max(r1, r2), branch=fn.branch,
                         classification=classification, iterations=it, converged=ok,
                         t_star=st.t, grad_norm=gnorm, A=phys.A, B=phys.B, D=phys.D,
                         regime=params.regime if not fn.limit else params.gamma_class,
                         in_existence_regime=in_regime, multiplier_gap=gap,
                         resolved=not _unresolved_core(st.u, st.v, fn.grid), message=message)
    return pair, report


# minimum number of decay lengths of each component inside the grid
_DECAY_MIN = 10.0


def _confinement(lam, t_star: float, r_max: float) -> str:
    """Reason why a stationary grid state is held only by the outer boundary, or ``""``.

    A decaying solution has positive multipliers and a tail that fits inside the
    grid.  When one component spreads to fill the box (the other one
    concentrating), the box supports a stationary state with no counterpart on
    the whole space; its energy is not a ground-state level.
    """
    for i, lam_i in enumerate(lam, start=1):
        if not lam_i > 0:
            return f"component {i} is held by the grid boundary (lambda{i} <= 0)"
        lengths = math.sqrt(lam_i) * math.exp(-t_star) * r_max
        if lengths < _DECAY_MIN:
            return (f"component {i} is held by the grid boundary "
                    f"({lengths:.2f} decay lengths inside the grid)")
    return ""


def _existence_regime(params: Params) -> bool:
    reg = params.regime
    if reg == NONPOSITIVE:
        return False
    if reg == SUPERCRITICAL:
        return True  # existence above nu_1; the estimate is a separate computation
    if reg == CRITICAL and params.dim != 4:
        return False
    try:
        return params.nu < nu_zero(params)
    except DomainError:
        return False


def minimize_ground_state(params: Params, config: SolveConfig | None = None,
                          start: Pair | None = None, grid: RadialGrid | None = None):
    """Normalized ground state of the critical system by reduced descent.

    Returns ``(pair, report)``; ``pair`` is the grid-frame shape and
    ``report.t_star * pair`` the physical ground state.  Outside the parameter
    range with a known existence result the solve still runs and
    ``report.in_existence_regime`` is False.
    """
    config = config or SolveConfig()
    grid = grid or (start.grid if start is not None else config.grid(params.dim))
    fn = _Functional(params, grid)
    pair = start or initial_pair(params, grid, config)
    st, it, gnorm, conv, msg = _descend(fn, pair, config)
    return _report(fn, st, it, gnorm, conv, msg, config, _existence_regime(params))


def minimize_limit_system(params: Params, config: SolveConfig | None = None,
                          start: Pair | None = None, grid: RadialGrid | None = None):
    """Minimize the reduced limit energy ``K~`` over the masses torus.

    Returns ``(pair, report)``; the report energy approximates ``l(a, b)`` and
    ``report.t_star * pair`` lies on ``{L = 0}``.
    """
    if params.gamma_class == CRITICAL:
        raise DomainError("the limit system needs gamma != 2")
    config = config or SolveConfig()
    grid = grid or (start.grid if start is not None else config.grid(params.dim))
    fn = _Functional(params, grid, limit=True)
    pair = start or initial_pair(params, grid, config, limit=True)
    st, it, gnorm, conv, msg = _descend(fn, pair, config)
    return _report(fn, st, it, gnorm, conv, msg, config, True)


# --------------------------------------------------------------------------- limit closed form


@dataclass(frozen=True)
class LimitSolution:
    """Closed-form limit ground state ``W_i = sigma_i Z(mu x)`` and its checks.

    ``sigma``, ``mu`` solve the substitution system self-consistently
    (``mu^2 = sigma^{p-2}``, ``lambda_1 = lambda_2 = mu^2``).  The explicit
    alternative expressions for these constants are evaluated as given and kept in
    ``reference`` together with their relative gaps.  Iterating yields ``(pair, energy)``.
    """

    pair: Pair
    energy: float
    level: float
    sigma: float
    mu: float
    sigma1: float
    sigma2: float
    lambda1: float
    lambda2: float
    mass_errors: tuple
    residuals: tuple
    energy_gap: float
    reference: dict
    shoot: ShootResult = field(repr=False)

    def __iter__(self):
        return iter((self.pair, self.energy))

    def evaluate(self, r, shift: float = 0.0):
        """Exact ``(-shift) * W`` at radii ``r``: ``e^{-N s/2} W(e^{-s} r)``."""
        dim = self.shoot.dim
        k = math.exp(-dim * shift / 2)
        z = self.shoot.evaluate(self.mu * math.exp(-shift) * np.asarray(r, dtype=float))
        return k * self.sigma1 * z, k * self.sigma2 * z

    def to_dict(self) -> dict:
        return {"energy": self.energy, "level": self.level, "sigma": self.sigma, "mu": self.mu,
                "sigma1": self.sigma1, "sigma2": self.sigma2, "lambda1": self.lambda1,
                "lambda2": self.lambda2, "mass_errors": list(self.mass_errors),
                "residuals": list(self.residuals), "energy_gap": self.energy_gap,
                "reference": {k: _clean(v) for k, v in self.reference.items()}}


def _reference_values(params: Params, z_mass: float) -> dict:
    """Alternative explicit expressions for the constants, evaluated as given for comparison."""
    al, be, g, p = params.alpha, params.beta, params.gamma, params.p
    bracket = (al / be) ** (be / 2) + (be / al) ** (1 - be / 2)
    ratio = params.a / math.sqrt(z_mass)
    sigma = ratio ** (2 / (2 - g)) * bracket ** (1 / (g - 2) * 2 / (p - 2)) * p ** (1 / (p - 2))
    mu = ratio ** ((p - 2) / (2 - g)) * bracket ** (1 / (g - 2))
    s1 = sigma * al ** (-(2 - be) / (2 * (p - 2))) * be ** (-be / (2 * (p - 2)))
    s2 = sigma * al ** (-al / (2 - (p - 2))) * be ** (-(2 - be) / (2 * (p - 2)))
    return {"sigma": sigma, "mu": mu, "sigma1": s1, "sigma2": s2}


def solve_limit_closed_form(params: Params, grid: RadialGrid | None = None,
                            shoot: ShootResult | None = None, gn_constant: float | None = None,
                            count: int = 4097) -> LimitSolution:
    """Closed-form limit ground state for ``a^2 / b^2 = alpha / beta``.

    The default grid spans 30 decay lengths of ``W`` (``r_max = 30 / mu``).
    """
    if params.gamma_class == CRITICAL:
        raise DomainError("the limit system needs gamma != 2")
    if not math.isclose(params.a**2 / params.b**2, params.alpha / params.beta, rel_tol=1e-12):
        raise DomainError("the closed form needs a^2 / b^2 = alpha / beta")
    dim, p, g = params.dim, params.p, params.gamma
    if shoot is None:
        shoot = solve_scalar_profile(dim, p, make_grid(dim, 30.0, 4097))
    c1, c2 = extremal_coefficients(params.alpha, params.beta)
    m_big = params.a**2 / (c1**2 * shoot.mass_sq)
    sigma = m_big ** (1 / (2 - g))
    mu = m_big ** ((p - 2) / (2 * (2 - g)))
    s1, s2 = sigma * c1, sigma * c2
    if grid is None:
        grid = make_grid(dim, 30.0 / mu, count)
    z = shoot.evaluate(mu * grid.nodes)
    pair = Pair.from_arrays(grid, s1 * z, s2 * z)
    lam = mu**2
    # substitution checks on the grid
    masses = (mass_sq(pair.u), mass_sq(pair.v))
    mass_errors = (abs(masses[0] / params.a**2 - 1), abs(masses[1] / params.b**2 - 1))
    res = pde_residuals(pair, params.with_nu(1.0), 0.0, (lam, lam), limit=True)
    a_tot = grad_sq(pair.u) + grad_sq(pair.v)
    d_tot = mixed_integral(pair, params.alpha, params.beta)
    energy = 0.5 * a_tot - d_tot
    level = limit_level(params, gn_constant)
    ref = _reference_values(params, shoot.mass_sq)
    ref.update({f"{k}_gap": abs(ref[k] / val - 1) for k, val in
                (("sigma", sigma), ("mu", mu), ("sigma1", s1), ("sigma2", s2))})
    return LimitSolution(pair=pair, energy=energy, level=level, sigma=sigma, mu=mu,
                         sigma1=s1, sigma2=s2, lambda1=lam, lambda2=lam,
                         mass_errors=mass_errors, residuals=res,
                         energy_gap=abs(energy / level - 1), reference=ref, shoot=shoot)


# --------------------------------------------------------------------------- nu_1


@dataclass(frozen=True)
class Nu1Estimate:
    """Bisection result for the threshold below which ``m_nu`` equals ``S^{N/2}/N``."""

    value: float
    bracket: tuple
    flag: str
    bound: float
    margin: float
    probes: tuple

    def to_dict(self) -> dict:
        return {"value": self.value, "bracket": list(self.bracket), "flag": self.flag,
                "bound": self.bound, "margin": self.margin,
                "probes": [{"nu": n, "energy": e, "below": b} for n, e, b in self.probes]}


def estimate_nu1(params: Params, config: SolveConfig | None = None, bracket=(1e-4, 1e2),
                 iterations: int = 20, sobolev: float | None = None) -> Nu1Estimate:
    """Bisection on ``log nu`` of ``m_nu < S^{N/2}/N - margin``.

    The predicate holds when the solver ends at a resolved stationary state whose
    energy lies below the bound by more than ``margin``, three times the solver
    energy tolerance (relative to the bound).  Such a state is admissible, so
    its energy bounds ``m_nu`` from above, even when one component is held by
    the grid boundary.  Runs whose core collapses below grid resolution count
    as failures of the predicate.

    The flag is ``"consistent with nu1=0"`` when the predicate already holds at the
    lower end, ``"bracketed"`` after a bisection and ``"above range"`` when it
    fails at the upper end.
    """
    if params.gamma_class != SUPERCRITICAL:
        raise DomainError("nu_1 is estimated for gamma > 2")
    config = config or SolveConfig()
    s = sobolev if sobolev is not None else sobolev_value(params.dim)
    bound = s ** (params.dim / 2) / params.dim
    margin = 3 * config.energy_tol * bound
    probes = []

    def below(nu):
        _, rep = minimize_ground_state(params.with_nu(nu), config)
        # a resolved stationary state held by the outer boundary is still an
        # admissible function, so its energy bounds m_nu from above
        usable = rep.converged or (rep.resolved and rep.grad_norm <= config.grad_tol)
        flag = usable and rep.energy < bound - margin
        probes.append((float(nu), float(rep.energy), bool(flag)))
        return flag

    lo, hi = map(float, bracket)
    if below(lo):
        return Nu1Estimate(0.0, (0.0, lo), NU1_ZERO_FLAG, bound, margin, tuple(probes))
    if not below(hi):
        return Nu1Estimate(hi, (hi, math.inf), "above range", bound, margin, tuple(probes))
    for _ in range(iterations):
        mid = math.sqrt(lo * hi)
        if below(mid):
            hi = mid
        else:
            lo = mid
    return Nu1Estimate(math.sqrt(lo * hi), (lo, hi), "bracketed", bound, margin, tuple(probes))


# --------------------------------------------------------------------------- nu <= 0


@dataclass(frozen=True)
class NonpositiveReport:
    """Projected energies for ``nu <= 0`` against the bound ``S^{N/2}/N``."""

    nu: float
    bound: float
    sample_min: float
    bubble_eps: tuple
    bubble_energies: tuple
    recorded_inf: float
    holds: bool
    bubble_decreasing: bool

    def to_dict(self) -> dict:
        return asdict(self) | {"bubble_eps": list(self.bubble_eps),
                               "bubble_energies": list(self.bubble_energies)}


def _projected_max(fs: FiberScalars, nu: float, gamma: float) -> float:
    crit = critical_points(fs, nu, gamma)
    t = crit.times(MAX)[-1]
    return float(phi(fs, nu, gamma, t)[0])


def verify_nonpositive_regime(params: Params, samples: int = 500, seed: int = 0,
                              grid: RadialGrid | None = None, eps=(0.4, 0.2, 0.1, 0.05, 0.025),
                              rel_tol: float = 1e-2, sobolev: float | None = None) -> NonpositiveReport:
    """Record the infimum of fiber-projected energies for ``nu <= 0``.

    Random positive pairs on the torus are projected to their fiber maximum; so is
    a sequence built from a mass-normalized cut-off bubble ``eta_eps`` paired with
    a wide Gaussian.
    """
    if params.nu > 0:
        raise DomainError("this check needs nu <= 0")
    grid = grid or make_grid(params.dim, 12.0, 4097, "geometric")
    s = sobolev if sobolev is not None else sobolev_value(params.dim)
    bound = s ** (params.dim / 2) / params.dim
    rng = np.random.default_rng(seed)
    r = grid.nodes
    nu, g = params.nu, params.gamma

    def project(u, v):
        pair = Pair.from_arrays(grid, _normalize(u, grid, params.a), _normalize(v, grid, params.b))
        from .fiber import scalars_of
        return _projected_max(scalars_of(pair, params), nu, g)

    def shape():
        k = rng.integers(1, 4)
        out = np.zeros_like(r)
        for _ in range(k):
            c = rng.uniform(0, 0.3 * grid.r_max)
            w = rng.uniform(0.03, 0.2) * grid.r_max
            out += rng.uniform(0.2, 1.0) * np.exp(-((r - c) / w) ** 2)
        return out

    vals = [project(shape(), shape()) for _ in range(samples)]
    gauss = np.exp(-0.5 * (r / (grid.r_max / 6)) ** 2)
    bub = [project(cutoff(r) * bubble_values(params.dim, e, r), gauss) for e in eps]
    recorded = min(min(vals), min(bub))
    decreasing = all(b1 < b0 for b0, b1 in zip(bub, bub[1:])) and all(b > bound * (1 - rel_tol) for b in bub)
    return NonpositiveReport(nu=nu, bound=bound, sample_min=min(vals), bubble_eps=tuple(eps),
                             bubble_energies=tuple(bub), recorded_inf=recorded,
                             holds=recorded >= bound * (1 - rel_tol),
                             bubble_decreasing=decreasing)
