"""Independent reference computations used by the tests.

Nothing here imports the package: each routine rebuilds its quantity from
scratch with a different method than the library uses.
"""

from __future__ import annotations

import math

import numpy as np


def sobolev_exact(dim: int) -> float:
    """Best Sobolev constant ``pi N (N-2) (Gamma(N/2)/Gamma(N))^{2/N}``."""
    return math.pi * dim * (dim - 2) * (math.gamma(dim / 2) / math.gamma(dim)) ** (2 / dim)


def sphere_area(dim: int) -> float:
    return 2 * math.pi ** (dim / 2) / math.gamma(dim / 2)


def _rk4_shot(w0: float, dim: int, p: float, h: float, r_end: float) -> int:
    """Classify one trajectory of ``w'' + (N-1)/r w' - w + w^{p-1} = 0``.

    Returns +1 when ``w`` crosses zero (height too large) and -1 when ``w`` turns
    back up while still positive (height too small), 0 if undecided at ``r_end``.
    """
    # series start away from the singular origin
    r = h
    c2 = (w0 - w0 ** (p - 1)) / (2 * dim)
    w, dw = w0 + c2 * r * r, 2 * c2 * r

    def f(r, w, dw):
        return dw, -(dim - 1) / r * dw + w - abs(w) ** (p - 2) * w

    while r < r_end:
        k1 = f(r, w, dw)
        k2 = f(r + h / 2, w + h / 2 * k1[0], dw + h / 2 * k1[1])
        k3 = f(r + h / 2, w + h / 2 * k2[0], dw + h / 2 * k2[1])
        k4 = f(r + h, w + h * k3[0], dw + h * k3[1])
        w += h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        dw += h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        r += h
        if w < 0:
            return 1
        if dw > 0:
            return -1
    return 0


def shooting_height(dim: int, p: float, h: float = 2e-3, r_end: float = 25.0,
                    lo: float = 1.0001, hi: float = 50.0, steps: int = 60) -> float:
    """``Z(0)`` by fixed-step RK4 shooting and bisection."""
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        kind = _rk4_shot(mid, dim, p, h, r_end)
        if kind == 1:
            hi = mid
        elif kind == -1:
            lo = mid
        else:
            break
    return 0.5 * (lo + hi)


def gaussian_integrals(dim: int, width: float) -> dict:
    """Exact mass, gradient energy and quartic norm of ``exp(-r^2 / (2 width^2))``."""
    s = width
    mass = (math.pi * s * s) ** (dim / 2)
    grad = dim / (2 * s * s) * mass
    quartic = (math.pi * s * s / 2) ** (dim / 2)
    return {"mass": mass, "grad": grad, "quartic": quartic}


def gamma_exponent(dim: int, p: float) -> float:
    return dim * (p - 2) / 2


def log_log_slope(xs, ys) -> float:
    """Plain least-squares slope of ``log y`` on ``log x`` by normal equations."""
    lx, ly = np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float))
    lx0, ly0 = lx - lx.mean(), ly - ly.mean()
    return float(np.sum(lx0 * ly0) / np.sum(lx0 * lx0))
