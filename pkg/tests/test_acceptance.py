"""Acceptance criteria 1-10; each test records one PASS/FAIL summary line."""

import json
import math

import numpy as np
import pytest

from normstate.cli import main
from normstate.fiber import (LOCAL_MIN, MAX, PMINUS, PPLUS, FiberScalars, critical_points,
                             nu_zero, phi, scalars_of)
from normstate.gn import gn_constant_vector, q_vector, vector_constant, vector_extremal
from normstate.harness import fit_large_nu_scaling, fit_small_nu_scaling, sweep_nu
from normstate.params import Params
from normstate.profiles import solve_scalar_profile, sobolev_value
from normstate.radial import Field, Pair, make_grid, mass_sq
from normstate.solver import (NU1_ZERO_FLAG, estimate_nu1, minimize_ground_state,
                              minimize_limit_system, solve_limit_closed_form,
                              verify_nonpositive_regime)

from oracles import shooting_height


def test_criterion_1_scalar_profile(record):
    worst_res, worst_dig = 0.0, 0.0
    ok = True
    for dim, p in [(3, 3.0), (3, 4.0), (4, 3.0)]:
        z = solve_scalar_profile(dim, p, make_grid(dim, 30.0, 4097))
        ref = shooting_height(dim, p)
        res = max(z.nehari_residual, z.pohozaev_residual)
        gap = abs(z.initial_height / ref - 1)
        worst_res, worst_dig = max(worst_res, res), max(worst_dig, gap)
        ok &= res < 1e-6 and gap < 5e-5
    record(1, ok, f"max identity residual {worst_res:.2e}, max Z(0) gap to RK4 oracle {worst_dig:.2e}")
    assert ok


def _random_pair(grid, rng):
    r = grid.nodes

    def comp():
        w = rng.uniform(0.3, 3.0, size=2)
        c = rng.uniform(0.1, 2.0, size=2)
        return c[0] * np.exp(-r**2 / w[0] ** 2) + c[1] * np.exp(-(r - rng.uniform(0, 3)) ** 2 / w[1] ** 2)

    return Pair(Field(grid, comp()), Field(grid, comp()))


def test_criterion_2_gn_constants(record):
    ok = True
    gaps, margins = [], []
    for dim, al, be in [(3, 1.5, 1.5), (4, 1.2, 1.6)]:
        rep = gn_constant_vector(dim, al, be)
        gap = abs(rep.formula_value * q_vector(vector_extremal(dim, al, be), al, be) - 1)
        gaps.append(gap)
        c = vector_constant(dim, al, be)
        grid = make_grid(dim, 30.0, 2049)
        rng = np.random.default_rng(2024 + dim)
        margins.append(min(c * q_vector(_random_pair(grid, rng), al, be) - 1 for _ in range(200)))
    ok = max(gaps) < 1e-3 and min(margins) >= -1e-3
    record(2, ok, f"combination gap {max(gaps):.2e}, worst inequality margin {min(margins):.3e}")
    assert ok


def _torus_pair(grid, params, rng):
    r = grid.nodes

    def comp(mass):
        w = rng.uniform(0.4, 4.0, size=2)
        c = rng.uniform(0.05, 1.0, size=2)
        x = c[0] * np.exp(-r**2 / w[0] ** 2) + c[1] * np.exp(-(r - rng.uniform(0, 4)) ** 2 / w[1] ** 2)
        x[-1] = 0.0
        f = Field(grid, x)
        return f * math.sqrt(mass / mass_sq(f))

    return Pair(comp(params.a**2), comp(params.b**2))


def test_criterion_3_fiber_structure(record):
    rng = np.random.default_rng(3)
    sub = Params(3, 1.5, 1.5)
    sup = Params(3, 2.4, 2.4)
    nu = nu_zero(sub) / 2
    grid = make_grid(3, 40.0, 513)
    bad = {"nonpositive": 0, "supercritical": 0, "subcritical": 0, "Pzero": 0}
    for _ in range(1000):
        a, b, d = rng.uniform(1e-2, 1e2, size=3)
        s = FiberScalars(a, b, d)
        crit = critical_points(s, -1.0, sub.gamma)
        if [k for _, k in crit.points] != [MAX] or phi(s, -1.0, sub.gamma, crit.points[0][0])[0] <= 0:
            bad["nonpositive"] += 1
        crit = critical_points(s, 1.0, sup.gamma)
        if [k for _, k in crit.points] != [MAX]:
            bad["supercritical"] += 1
        s = scalars_of(_torus_pair(grid, sub, rng), sub)
        crit = critical_points(s, nu, sub.gamma)
        bad["Pzero"] += crit.degenerate
        kinds = [k for _, k in crit.points]
        good = kinds == [LOCAL_MIN, MAX] and len(crit.zeros) == 2
        if good:
            (t, _), (sv, _) = crit.points
            c, dz = crit.zeros
            good = (t < c < sv < dz and phi(s, nu, sub.gamma, t)[0] < 0
                    and phi(s, nu, sub.gamma, sv)[0] > 0)
        bad["subcritical"] += not good
    ok = not any(bad.values())
    record(3, ok, f"violations over 1000 samples per regime: {bad}")
    assert ok


def test_criterion_4_existence_values(record):
    sub = Params(3, 1.5, 1.5)
    _, r1 = minimize_ground_state(sub.with_nu(nu_zero(sub) / 2))
    _, r2 = minimize_ground_state(Params(3, 2.4, 2.4, 1.0, 1.0, 50.0))
    bound = sobolev_value(3) ** 1.5 / 3
    ok1 = (r1.converged and r1.energy < 0 and r1.lambda1 > 0 and r1.lambda2 > 0
           and r1.pde_residual < 1e-3 and r1.classification == PPLUS)
    ok2 = r2.converged and 0 < r2.energy < bound and r2.classification == PMINUS
    record(4, ok1 and ok2,
           f"P+ m={r1.energy:.6g} lambda=({r1.lambda1:.4g},{r1.lambda2:.4g}) "
           f"res={r1.pde_residual:.1e}; P- m={r2.energy:.6g} < {bound:.6g}")
    assert ok1 and ok2


def test_criterion_5_limit_cross_check(record):
    details, ok = [], True
    for params in (Params(3, 1.5, 1.5), Params(3, 2.4, 2.4)):
        pair, rep = minimize_limit_system(params.with_nu(1.0))
        lim = solve_limit_closed_form(params)
        wu, wv = lim.evaluate(pair.grid.nodes, shift=rep.t_star)
        w = pair.grid.weights
        num = np.dot(w, (pair.u.values - wu) ** 2) + np.dot(w, (pair.v.values - wv) ** 2)
        prof = math.sqrt(num / (np.dot(w, wu**2) + np.dot(w, wv**2)))
        egap = abs(rep.energy / lim.level - 1)
        ok &= rep.converged and egap < 1e-2 and prof < 1e-2
        details.append(f"gamma={params.gamma:g}: energy gap {egap:.1e}, profile gap {prof:.1e}")
    record(5, ok, "; ".join(details))
    assert ok


def test_criterion_6_small_nu(record):
    p = Params(3, 1.5, 1.5)
    nus = np.geomspace(1e-3, 0.1 * nu_zero(p), 6)
    rows = sweep_nu(p, nus)
    fit = fit_small_nu_scaling(rows, p)
    dists = [r.dist_G for r in rows]
    # nonincreasing as nu decreases, up to round-off at the grid floor
    slack = 1e-6 * max(dists)
    mono = all(a <= b + slack for a, b in zip(dists, dists[1:]))
    ok = (all(r.converged for r in rows) and fit.relative_errors["lambda_sum"] < 0.05
          and fit.relative_errors["t_fit"] < 0.05 and mono)
    record(6, ok, f"lambda exponent {fit.fitted['lambda_sum']:.6f} (4), t_fit slope "
                  f"{fit.fitted['t_fit']:.6f} (2), span {fit.span_decades:.2f} decades, "
                  f"dist_G {dists[-1]:.3e} -> {dists[0]:.3e}")
    assert ok


def test_criterion_7_large_nu(record):
    p = Params(3, 2.4, 2.4)
    rows = sweep_nu(p, np.geomspace(50.0, 5000.0, 6))
    fit = fit_large_nu_scaling(rows, p)
    dists = [r.dist_G for r in rows]
    ok = (all(r.converged for r in rows) and fit.relative_errors["m"] < 0.05
          and abs(fit.extra["prefactor_ratio"] - 1) < 0.1
          and all(b < a for a, b in zip(dists, dists[1:])))
    record(7, ok, f"m exponent {fit.fitted['m']:.5f} ({fit.predicted['m']:.5f}), prefactor ratio "
                  f"{fit.extra['prefactor_ratio']:.5f}, dist_G {dists[0]:.2e} -> {dists[-1]:.2e}")
    assert ok


def test_criterion_8_nonpositive(record):
    reps = [verify_nonpositive_regime(Params(3, 1.5, 1.5, 1.0, 1.0, nu), samples=500) for nu in (0.0, -1.0)]
    ok = all(r.holds and r.bubble_decreasing and r.recorded_inf >= r.bound * (1 - 1e-2) for r in reps)
    record(8, ok, "; ".join(f"nu={r.nu:g}: inf {r.recorded_inf:.4f} vs bound {r.bound:.4f}, "
                            f"bubbles {r.bubble_energies[0]:.3f}->{r.bubble_energies[-1]:.3f}"
                            for r in reps))
    assert ok


def test_criterion_9_nu1_positive_in_dimension_three(record):
    est = estimate_nu1(Params(3, 2.4, 2.4))
    ok = est.flag == "bracketed" and est.bracket[0] > 0
    record(9, ok, f"N=3 bracket ({est.bracket[0]:.4f}, {est.bracket[1]:.4f})")
    assert ok


@pytest.mark.xfail(strict=True, reason="decisions ledger: the energy gain below the bound at "
                   "small nu is far beneath solver and grid resolution in N=4")
def test_criterion_9_nu1_zero_in_dimension_four(record):
    est = estimate_nu1(Params(4, 1.6, 1.6))
    ok = est.flag == NU1_ZERO_FLAG
    record(9, ok, f"N=4 flag '{est.flag}', bracket ({est.bracket[0]:.4f}, {est.bracket[1]:.4f}); "
                  "N=3 part passes, N=4 part unattainable (see ledger)")
    assert ok


def test_criterion_10_determinism(record, tmp_path, monkeypatch):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({
        "problem": {"dim": 3, "alpha": 2.4, "beta": 2.4, "nu": 50.0},
        "grid": {"count": 1025}, "solver": {"seed": 7},
        "sweep": {"nus": [400.0, 50.0, 100.0, 200.0]}}))
    outputs = []
    for threads in ("1", "4"):
        monkeypatch.setenv("NORMSTATE_THREADS", threads)
        csv_path, json_path = tmp_path / f"s{threads}.csv", tmp_path / f"r{threads}.json"
        main(["sweep", "--config", str(cfg), "--out", str(csv_path)])
        main(["solve", "--config", str(cfg), "--out", str(json_path)])
        outputs.append((csv_path.read_bytes(), json_path.read_bytes()))
    ok = outputs[0] == outputs[1]
    record(10, ok, "sweep CSV and solve JSON byte-identical across runs and thread counts")
    assert ok
