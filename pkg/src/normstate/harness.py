"""Coupling sweeps, power-law fits and distances to the limiting families.

Rows of a sweep are independent solves run on a thread pool.  Every solve keeps
its state in the grid frame (the physical state is ``t_star * pair``), so the
metrics below take the grid pair together with its fiber shift and evaluate the
reference profiles exactly at the grid nodes instead of resampling the state.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import minimize_scalar

from .errors import DomainError, RegimeError
from .fiber import limit_level
from .params import CRITICAL, NONPOSITIVE, SUBCRITICAL, SUPERCRITICAL, Params
from .profiles import bubble_values, _bubble_tails
from .radial import Pair, RadialGrid
from .solver import (LimitSolution, SolveConfig, minimize_ground_state,
                     minimize_limit_system, solve_limit_closed_form, thread_count)

__all__ = [
    "CSV_HEADER",
    "SweepRow",
    "D0Constant",
    "LimitTarget",
    "ScalingFit",
    "sweep_nu",
    "rows_to_csv",
    "fit_power_law",
    "fit_small_nu_scaling",
    "fit_large_nu_scaling",
    "limit_target",
    "limit_shift",
    "dist_to_limit_family",
    "dist_to_bubble_family",
]

CSV_HEADER = ("nu", "m", "lambda1", "lambda2", "A", "D", "t_fit", "dist_G", "dist_bubble")


@dataclass(frozen=True)
class SweepRow:
    """One solve of a coupling sweep.

    ``A`` and ``D`` are the integrals of the physical state and
    ``t_fit = log(A) / 2``, so that ``(-t_fit) * state`` has unit gradient energy.
    ``dist_G`` compares ``(-tau_nu) * state`` with the limit ground state, where
    ``e^{(2 - gamma) tau_nu} = nu``; ``dist_bubble`` is the gradient-norm distance
    to the bubble family.  Rows that did not converge keep their raw numbers but
    are written to CSV with empty value fields.
    """

    nu: float
    m: float
    lambda1: float
    lambda2: float
    A: float
    D: float
    t_fit: float
    dist_G: float
    dist_bubble: float
    converged: bool
    message: str = ""
    limit_flag: str = ""

    def to_dict(self) -> dict:
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v)
                for k, v in asdict(self).items()}


@dataclass(frozen=True)
class D0Constant:
    """Best constant ``D_0`` in ``int |u|^alpha |v|^beta <= D_0 A^{gamma/2}`` on the masses torus."""

    value: float
    level: float

    @classmethod
    def of(cls, params: Params, gn_constant: float | None = None) -> "D0Constant":
        g = params.gamma
        if not g > 2:
            raise DomainError("D_0 is defined for gamma > 2 only")
        lev = limit_level(params, gn_constant)
        return cls(((g - 2) / (2 * g * lev)) ** ((g - 2) / 2) / g, lev)

    def prefactor(self, gamma: float) -> float:
        """Leading coefficient of ``m_nu`` against ``nu^{2/(2-gamma)}`` at large coupling."""
        return (gamma - 2) / (2 * gamma) * (gamma * self.value) ** (2 / (2 - gamma))


# --------------------------------------------------------------------------- distances


@dataclass(frozen=True)
class LimitTarget:
    """Limit ground state used as the reference of ``dist_to_limit_family``.

    Built from the closed form when ``a^2 / b^2 = alpha / beta``.  Otherwise it
    interpolates a numerical minimizer of the reduced limit energy and
    ``flag`` says so.
    """

    closed: LimitSolution | None
    numeric: tuple | None
    flag: str

    def evaluate(self, r, shift: float = 0.0):
        """``(-shift) * W`` at radii ``r``."""
        if self.closed is not None:
            return self.closed.evaluate(r, shift)
        interp_u, interp_v, t_lim, dim, r_top = self.numeric
        # W = t_lim * w, so (-shift) * W = (t_lim - shift) * w
        s = t_lim - shift
        arg = math.exp(s) * np.asarray(r, dtype=float)
        k = math.exp(dim * s / 2)
        inside = arg <= r_top
        out = []
        for f in (interp_u, interp_v):
            vals = np.zeros_like(arg)
            vals[inside] = f(arg[inside])
            out.append(k * vals)
        return out[0], out[1]


def limit_target(params: Params, config: SolveConfig | None = None) -> LimitTarget:
    """Reference limit ground state for ``params`` (coupling ignored)."""
    if params.gamma_class == CRITICAL:
        raise DomainError("the limit system needs gamma != 2")
    if math.isclose(params.a**2 / params.b**2, params.alpha / params.beta, rel_tol=1e-12):
        return LimitTarget(solve_limit_closed_form(params), None, "")
    pair, rep = minimize_limit_system(params.with_nu(1.0), config)
    g = pair.grid
    numeric = (PchipInterpolator(g.nodes, pair.u.values, extrapolate=False),
               PchipInterpolator(g.nodes, pair.v.values, extrapolate=False),
               rep.t_star, g.dim, g.r_max)
    flag = "numeric limit minimizer" + ("" if rep.converged else " (not converged)")
    return LimitTarget(None, numeric, flag)


def limit_shift(params: Params, nu: float | None = None) -> float:
    """``tau_nu = log(nu) / (2 - gamma)``: the limit family sits at ``tau_nu * G(a, b)``."""
    nu = params.nu if nu is None else nu
    if not nu > 0:
        raise DomainError("the limit scaling needs nu > 0")
    return math.log(nu) / (2 - params.gamma)


def _h1_distance(grid: RadialGrid, diff: np.ndarray, scale: float) -> float:
    """H1 norm of ``s * f`` from the grid values of ``f``, with ``scale = e^{2s}``."""
    du = np.diff(diff)
    grad = float(np.dot(grid.cell_weights, du * du))
    mass = grid.integrate(diff * diff)
    return math.sqrt(max(mass + scale * grad, 0.0))


def dist_to_limit_family(pair: Pair, params: Params, shift: float = 0.0,
                         target: LimitTarget | None = None) -> float:
    """H1 distance of ``shift * pair`` to the limit ground state ``(W_1, W_2)``.

    The distance is the sum over components of ``|shift * w_i - W_i|_{H^1}``.
    With ``shift = t_star - tau_nu`` a grid pair returned by the solver is
    compared after undoing the coupling scaling.  Mass-preserving dilations
    rescale only the gradient part, so the difference is formed on the grid
    against the exact values of ``(-shift) * W``.  For the closed-form target the
    representative itself is at distance zero.

    The limit ground state on radial profiles is unique, so no minimization over
    symmetries is needed.
    """
    target = target or limit_target(params)
    grid = pair.grid
    wu, wv = target.evaluate(grid.nodes, shift)
    e2 = math.exp(2 * shift)
    return (_h1_distance(grid, pair.u.values - wu, e2)
            + _h1_distance(grid, pair.v.values - wv, e2))


def _grad_norm_sq(grid: RadialGrid, values: np.ndarray) -> float:
    du = np.diff(values)
    return float(np.dot(grid.cell_weights, du * du))


def _bubble_gap(grid: RadialGrid, comp: np.ndarray, eps: float) -> float:
    bub = bubble_values(grid.dim, eps, grid.nodes)
    inner = _grad_norm_sq(grid, comp - bub)
    # the component vanishes beyond r_max while the bubble does not
    outer, _ = _bubble_tails(grid.dim, eps, grid.r_max)
    return inner + outer


def dist_to_bubble_family(pair: Pair, t_star: float = 0.0,
                          eps_range: tuple = (1e-3, 1e1)) -> tuple[float, str]:
    """Gradient-norm distance of ``t_star * pair`` to ``U x {0}`` or ``{0} x U``.

    For one component the distance to ``U_eps`` is minimized over ``eps`` by a
    bounded golden-section search on ``log eps``; the other component is
    measured against zero.  Returns the smaller of the two assignments and
    ``"first"`` or ``"second"``.

    The bubble family is invariant under the gradient-norm preserving dilation,
    and ``t_star * w`` is ``e^{t_star}`` times such a dilation of ``w``, so the
    computation runs on the grid pair scaled by ``e^{t_star}``.  Bubble values
    beyond the grid contribute their exact gradient tail.
    """
    grid = pair.grid
    amp = math.exp(t_star)
    comps = (amp * pair.u.values, amp * pair.v.values)
    zero = tuple(math.sqrt(_grad_norm_sq(grid, c)) for c in comps)
    lo, hi = (math.log(e) for e in eps_range)
    best = []
    for i, comp in enumerate(comps):
        res = minimize_scalar(lambda x: _bubble_gap(grid, comp, math.exp(x)),
                              bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-6})
        best.append(math.sqrt(max(res.fun, 0.0)) + zero[1 - i])
    if best[0] <= best[1]:
        return best[0], "first"
    return best[1], "second"


# --------------------------------------------------------------------------- sweep


def _row(params: Params, nu: float, config: SolveConfig, target: LimitTarget | None) -> SweepRow:
    p = params.with_nu(nu)
    pair, rep = minimize_ground_state(p, config)
    a_tot, d_tot = rep.A, rep.D
    t_fit = 0.5 * math.log(a_tot) if a_tot > 0 else math.nan
    dist_g = math.nan
    if target is not None and nu > 0:
        dist_g = dist_to_limit_family(pair, p, rep.t_star - limit_shift(p), target)
    dist_b, _ = dist_to_bubble_family(pair, rep.t_star)
    return SweepRow(nu=float(nu), m=rep.energy, lambda1=rep.lambda1, lambda2=rep.lambda2,
                    A=a_tot, D=d_tot, t_fit=t_fit, dist_G=dist_g, dist_bubble=dist_b,
                    converged=bool(rep.converged), message=rep.message,
                    limit_flag=target.flag if target is not None else "")


def sweep_nu(params: Params, nus, config: SolveConfig | None = None,
             threads: int | None = None) -> list[SweepRow]:
    """Ground states along a list of couplings, sorted by ``nu``.

    All couplings must lie in one regime.  Rows are independent solves; the pool
    size is capped by ``NORMSTATE_THREADS`` unless ``threads`` is given.
    """
    nus = sorted(float(n) for n in nus)
    if not nus:
        return []
    regimes = {params.with_nu(n).regime for n in nus}
    if len(regimes) != 1:
        raise RegimeError(f"couplings span several regimes: {sorted(regimes)}")
    config = config or SolveConfig()
    target = None
    if regimes != {NONPOSITIVE} and params.gamma_class != CRITICAL:
        target = limit_target(params, config)
    workers = max(1, min(threads or thread_count(), len(nus)))
    if workers == 1:
        return [_row(params, n, config, target) for n in nus]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda n: _row(params, n, config, target), nus))


def _fmt(x: float) -> str:
    return repr(float(x)) if math.isfinite(x) else "nan"


def rows_to_csv(rows, target=None) -> str:
    """RFC 4180 CSV of a sweep; non-converged rows keep only their ``nu``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(CSV_HEADER)
    for row in sorted(rows, key=lambda r: r.nu):
        if row.converged:
            w.writerow([_fmt(getattr(row, k)) for k in CSV_HEADER])
        else:
            w.writerow([_fmt(row.nu)] + [""] * (len(CSV_HEADER) - 1))
    text = buf.getvalue()
    if target is not None:
        if hasattr(target, "write"):
            target.write(text)
        else:
            with open(target, "w", newline="") as fh:
                fh.write(text)
    return text


def rows_from_csv(text: str) -> list[SweepRow]:
    """Parse sweep CSV; rows with empty fields come back as non-converged."""
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_HEADER:
        raise DomainError("unexpected sweep CSV header")
    out = []
    for rec in reader:
        ok = all(rec[k] != "" for k in CSV_HEADER)
        vals = {k: float(rec[k]) if rec[k] != "" else math.nan for k in CSV_HEADER}
        out.append(SweepRow(**vals, converged=ok))
    return out


# --------------------------------------------------------------------------- fits


def fit_power_law(xs, ys) -> tuple[float, float, float]:
    """Least-squares fit of ``log y = e log x + log c``.

    Returns ``(e, c, r2)``.  A constant ``y`` gives ``r2 = 1``.

    Raises
    ------
    DomainError
        With fewer than 4 points, or nonpositive data.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DomainError("xs and ys must be 1-d arrays of equal length")
    if x.size < 4:
        raise DomainError("a power-law fit needs at least 4 points")
    if not (np.all(x > 0) and np.all(y > 0) and np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DomainError("power-law data must be positive and finite")
    lx, ly = np.log(x), np.log(y)
    if np.ptp(lx) == 0:
        raise DomainError("xs must not all coincide")
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot <= ss_res or ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(slope), float(math.exp(intercept)), float(r2)


@dataclass(frozen=True)
class ScalingFit:
    """Fitted against predicted scaling exponents of one sweep."""

    predicted: dict
    fitted: dict
    relative_errors: dict
    r2: dict
    extra: dict
    rows_used: int
    span_decades: float

    def to_dict(self) -> dict:
        return asdict(self)


def _usable(rows, min_span: float):
    used = sorted((r for r in rows if r.converged), key=lambda r: r.nu)
    if len(used) < 4:
        raise DomainError(f"need at least 4 converged rows, got {len(used)}")
    span = math.log10(used[-1].nu / used[0].nu) if used[0].nu > 0 else math.inf
    if not span >= min_span:
        raise DomainError(f"couplings span {span:.2f} decades, need {min_span}")
    return used, span


def _rel(fitted: float, predicted: float) -> float:
    return abs(fitted / predicted - 1)


def fit_small_nu_scaling(rows, params: Params, min_span: float = 1.5) -> ScalingFit:
    """Scaling of multipliers, gradient energy and ``t_fit`` as ``nu -> 0+`` (``gamma < 2``).

    Predicted: ``lambda_1 + lambda_2`` and ``A`` scale like ``nu^{2/(2-gamma)}`` and
    ``t_fit`` grows like ``log(nu) / (2 - gamma)``.
    """
    if params.gamma_class != SUBCRITICAL:
        raise DomainError("small-coupling scaling is fitted for gamma < 2")
    used, span = _usable(rows, min_span)
    g = params.gamma
    nus = [r.nu for r in used]
    e_lam, c_lam, r2_lam = fit_power_law(nus, [r.lambda1 + r.lambda2 for r in used])
    e_a, c_a, r2_a = fit_power_law(nus, [r.A for r in used])
    lx = np.log(nus)
    t = np.array([r.t_fit for r in used])
    slope, icpt = np.polyfit(lx, t, 1)
    pred = {"lambda_sum": 2 / (2 - g), "A": 2 / (2 - g), "t_fit": 1 / (2 - g)}
    fitted = {"lambda_sum": e_lam, "A": e_a, "t_fit": float(slope)}
    rel = {k: _rel(fitted[k], pred[k]) for k in pred}
    rel["lambda_vs_A"] = _rel(e_lam, e_a)
    return ScalingFit(pred, fitted, rel, {"lambda_sum": r2_lam, "A": r2_a},
                      {"lambda_sum_prefactor": c_lam, "A_prefactor": c_a,
                       "t_fit_intercept": float(icpt)}, len(used), span)


def fit_large_nu_scaling(rows, params: Params, min_span: float = 1.5,
                         gn_constant: float | None = None) -> ScalingFit:
    """Scaling of ``m_nu`` as ``nu -> infinity`` (``gamma > 2``).

    Predicted: ``m_nu ~ P nu^{2/(2-gamma)}`` with
    ``P = (gamma-2)/(2 gamma) (gamma D_0)^{2/(2-gamma)}``.  Besides the free fit,
    ``extra["prefactor_ratio"]`` is ``m_nu / (P nu^{2/(2-gamma)})`` at the largest
    coupling, the quantity whose limit is 1.
    """
    if params.gamma_class != SUPERCRITICAL:
        raise DomainError("large-coupling scaling is fitted for gamma > 2")
    used, span = _usable(rows, min_span)
    g = params.gamma
    nus = [r.nu for r in used]
    e_m, c_m, r2_m = fit_power_law(nus, [r.m for r in used])
    d0 = D0Constant.of(params, gn_constant)
    pref = d0.prefactor(g)
    expo = 2 / (2 - g)
    ratios = [r.m / (pref * r.nu**expo) for r in used]
    pred = {"m": expo, "prefactor": pref}
    fitted = {"m": e_m, "prefactor": c_m}
    rel = {"m": _rel(e_m, expo), "prefactor": _rel(ratios[-1], 1.0)}
    return ScalingFit(pred, fitted, rel, {"m": r2_m},
                      {"D0": d0.value, "prefactor_ratio": ratios[-1],
                       "ratios": ratios}, len(used), span)
