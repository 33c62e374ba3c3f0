import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from normstate.errors import DomainError, RegimeError
from normstate.fiber import limit_level
from normstate.harness import (CSV_HEADER, D0Constant, SweepRow, dist_to_bubble_family,
                               dist_to_limit_family, fit_large_nu_scaling, fit_power_law,
                               fit_small_nu_scaling, limit_shift, limit_target, rows_from_csv,
                               rows_to_csv, sweep_nu)
from normstate.params import Params
from normstate.profiles import bubble_values
from normstate.radial import Pair, make_grid, mass_sq
from normstate.solver import minimize_ground_state, solve_limit_closed_form

from oracles import log_log_slope

SUB = Params(3, 1.5, 1.5)
SUP = Params(3, 2.4, 2.4)


def test_fit_exact_square():
    xs = np.geomspace(0.1, 10, 7)
    e, c, r2 = fit_power_law(xs, xs**2)
    assert e == pytest.approx(2.0, abs=1e-13)
    assert c == pytest.approx(1.0, abs=1e-13)
    assert r2 == 1.0


def test_fit_noisy_root():
    rng = np.random.default_rng(0)
    xs = np.geomspace(1e-2, 1e2, 20)
    ys = 3 * xs**0.5 * (1 + 0.01 * rng.standard_normal(xs.size))
    e, c, r2 = fit_power_law(xs, ys)
    assert abs(e - 0.5) < 0.05
    assert e == pytest.approx(log_log_slope(xs, ys), abs=1e-12)


def test_fit_constant():
    e, c, r2 = fit_power_law([1, 2, 3, 4], [5.0] * 4)
    assert e == pytest.approx(0.0, abs=1e-14)
    assert c == pytest.approx(5.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.floats(1e-3, 1e3))
def test_fit_recovers_exact_laws(expo, pref):
    xs = np.geomspace(0.5, 50, 6)
    e, c, _ = fit_power_law(xs, pref * xs**expo)
    assert e == pytest.approx(expo, abs=1e-10)
    assert c == pytest.approx(pref, rel=1e-9)


def test_fit_errors():
    with pytest.raises(DomainError):
        fit_power_law([1, 2, 3], [1, 2, 3])
    with pytest.raises(DomainError):
        fit_power_law([1, 2, 3, 4], [1, -2, 3, 4])
    with pytest.raises(DomainError):
        fit_power_law([0, 2, 3, 4], [1, 2, 3, 4])


def test_d0_constant():
    d0 = D0Constant.of(SUP)
    g = SUP.gamma
    # consistency with the level it was built from
    assert d0.prefactor(g) == pytest.approx(limit_level(SUP), rel=1e-12)
    with pytest.raises(DomainError):
        D0Constant.of(SUB)


def test_d0_is_best_constant_at_limit_state():
    lim = solve_limit_closed_form(SUP)
    d0 = D0Constant.of(SUP).value
    from normstate.radial import grad_sq, mixed_integral
    a = grad_sq(lim.pair.u) + grad_sq(lim.pair.v)
    d = mixed_integral(lim.pair, 2.4, 2.4)
    assert d / a ** (SUP.gamma / 2) == pytest.approx(d0, rel=1e-3)


def test_dist_limit_zero_for_representative():
    lim = solve_limit_closed_form(SUB)
    target = limit_target(SUB)
    assert dist_to_limit_family(lim.pair, SUB, 0.0, target) <= 1e-12


def test_dist_limit_positive_for_dilated_representative():
    target = limit_target(SUB)
    lim = target.closed
    grid = lim.pair.grid
    wu, wv = lim.evaluate(grid.nodes, shift=0.2)
    moved = Pair.from_arrays(grid, wu, wv)
    assert dist_to_limit_family(moved, SUB, 0.0, target) > 1e-3
    # undoing the dilation through the shift argument recovers the representative
    assert dist_to_limit_family(moved, SUB, 0.2, target) <= 1e-12


def test_limit_target_fallback_flagged():
    p = Params(3, 1.5, 1.5, 0.8, 1.1)
    target = limit_target(p)
    assert target.closed is None
    assert "numeric" in target.flag
    u, v = target.evaluate(np.linspace(0, 5, 11))
    assert np.all(u > 0) and np.all(v > 0)


def test_limit_shift():
    assert limit_shift(SUB, 0.5) == pytest.approx(math.log(0.5) / 0.5)
    with pytest.raises(DomainError):
        limit_shift(SUB, 0.0)


def truncated_bubble(grid, eps):
    """Dirichlet truncation ``U_eps - U_eps(R)`` and its exact gradient-norm distance to ``U_eps``."""
    bub = bubble_values(3, eps, grid.nodes)
    k = math.sqrt(3.0) ** 0.5
    # |U'|^2 r^2 integrated over r > R, by quadrature of the explicit derivative
    from scipy.integrate import quad
    du = lambda r: k * math.sqrt(eps) * r / (eps**2 + r**2) ** 1.5
    tail = 4 * math.pi * quad(lambda r: du(r) ** 2 * r**2, grid.r_max, np.inf)[0]
    return bub - bub[-1], math.sqrt(tail)


@pytest.mark.parametrize("which,eps", [("first", 0.3), ("second", 0.5)])
def test_bubble_distance_identifies_component(which, eps):
    grid = make_grid(3, 30.0, 4097, "geometric", ratio=1000)
    bub, trunc = truncated_bubble(grid, eps)
    zero = np.zeros(grid.size)
    pair = Pair.from_arrays(grid, bub, zero) if which == "first" else Pair.from_arrays(grid, zero, bub)
    dist, comp = dist_to_bubble_family(pair)
    assert comp == which
    # only the truncation error remains
    assert 0.5 * trunc < dist <= trunc * (1 + 1e-3)


def test_bubble_distance_uses_fiber_amplitude():
    grid = make_grid(3, 30.0, 4097, "geometric", ratio=1000)
    bub, trunc = truncated_bubble(grid, 0.3)
    pair = Pair.from_arrays(grid, 0.5 * bub, np.zeros(grid.size))
    far, _ = dist_to_bubble_family(pair)
    near, _ = dist_to_bubble_family(pair, t_star=math.log(2.0))
    assert near <= trunc * (1 + 1e-3) < far


def test_rows_csv_round_trip():
    rows = [SweepRow(2.0, 1.0, 0.1, 0.2, 3.0, 0.5, 0.4, 1e-3, 2.0, True),
            SweepRow(1.0, 1.5, 0.1, 0.2, 3.0, 0.5, 0.4, 1e-3, 2.0, False, "stalled")]
    text = rows_to_csv(rows)
    lines = text.split("\r\n")
    assert lines[0] == ",".join(CSV_HEADER)
    assert lines[1] == "1.0,,,,,,,,"
    back = rows_from_csv(text)
    assert [r.nu for r in back] == [1.0, 2.0]
    assert not back[0].converged and back[1].converged
    assert back[1].m == 1.0


def test_sweep_refuses_mixed_regimes():
    with pytest.raises(RegimeError):
        sweep_nu(SUB, [-1.0, 1.0])


@pytest.fixture(scope="module")
def small_sweep():
    return sweep_nu(SUB, np.geomspace(1e-3, 0.5, 5))


def test_small_sweep_rows(small_sweep):
    rows = small_sweep
    assert [r.nu for r in rows] == sorted(r.nu for r in rows)
    assert all(r.converged for r in rows)
    assert all(r.m < 0 for r in rows)
    assert all(b.m <= a.m for a, b in zip(rows, rows[1:]))


def test_small_sweep_fit(small_sweep):
    fit = fit_small_nu_scaling(small_sweep, SUB)
    assert fit.relative_errors["lambda_sum"] < 0.05
    assert fit.relative_errors["t_fit"] < 0.05
    assert fit.relative_errors["lambda_vs_A"] < 0.03


def test_fit_refuses_short_span(small_sweep):
    with pytest.raises(DomainError):
        fit_small_nu_scaling(small_sweep[-4:], SUB, min_span=3.0)
    with pytest.raises(DomainError):
        fit_small_nu_scaling(small_sweep[:3], SUB)
    with pytest.raises(DomainError):
        fit_large_nu_scaling(small_sweep, SUB)


def test_large_sweep_scaling():
    rows = sweep_nu(SUP, np.geomspace(50, 5000, 5))
    assert all(r.converged and r.m > 0 for r in rows)
    assert all(b.m < a.m for a, b in zip(rows, rows[1:]))
    fit = fit_large_nu_scaling(rows, SUP)
    assert fit.relative_errors["m"] < 0.05
    assert abs(fit.extra["prefactor_ratio"] - 1) < 0.1
    assert all(b.dist_G < a.dist_G for a, b in zip(rows, rows[1:]))


def test_rescaled_minimizer_keeps_masses():
    pair, rep = minimize_ground_state(SUP.with_nu(200.0))
    # the grid pair is the minimizer up to a dilation, which preserves masses
    assert mass_sq(pair.u) == pytest.approx(1.0, rel=1e-12)
    assert mass_sq(pair.v) == pytest.approx(1.0, rel=1e-12)


def test_sweep_deterministic_across_threads():
    nus = [60.0, 120.0, 240.0]
    a = rows_to_csv(sweep_nu(SUP, nus, threads=1))
    b = rows_to_csv(sweep_nu(SUP, nus, threads=3))
    assert a == b


@pytest.mark.xfail(strict=True, reason="decisions ledger: the near-bubble states at small "
                   "nu are held by the grid boundary, so no converged row shows the trend")
def test_bubble_distance_decreases_as_nu_decreases_dimension_four():
    rows = sweep_nu(Params(4, 1.6, 1.6), [2.2, 3.0, 5.0, 10.0])
    assert all(r.converged for r in rows)
    assert all(a.dist_bubble < b.dist_bubble for a, b in zip(rows, rows[1:]))
