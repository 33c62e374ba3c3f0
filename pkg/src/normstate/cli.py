"""Command-line entry point ``normstate``.

Every subcommand writes JSON (sorted keys, non-finite numbers as ``null``) or
RFC 4180 CSV.  Problem data come from a JSON config with the sections
``problem``, ``grid``, ``solver`` and ``sweep``; the ``grid`` and ``solver``
sections together populate :class:`~normstate.solver.SolveConfig`.  Flags given on
the command line override the ``problem`` section.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from .errors import ConfigurationError, NormStateError
from .fiber import FiberScalars, critical_points, nu_zero
from .gn import gn_constant_scalar, gn_constant_vector
from .harness import (fit_large_nu_scaling, fit_small_nu_scaling, rows_from_csv,
                      rows_to_csv, sweep_nu)
from .params import SUBCRITICAL, SUPERCRITICAL, Params
from .profiles import cutoff_bubble, solve_scalar_profile, sobolev_constant
from .radial import grad_sq, lp_norm_p, make_grid, mass_sq
from .solver import (SolveConfig, estimate_nu1, minimize_ground_state, minimize_limit_system,
                     solve_limit_closed_form, verify_nonpositive_regime)

__all__ = ["main", "load_config", "build_parser"]

SECTIONS = ("problem", "grid", "solver", "sweep", "fiber")
_PROBLEM_KEYS = ("dim", "alpha", "beta", "a", "b", "nu")


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    """Deterministic JSON text."""
    return json.dumps(_json_safe(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def load_config(path: str | None) -> dict:
    """Read a JSON config and check its section names."""
    if path is None:
        return {}
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ConfigurationError("config must be a JSON object")
    unknown = set(data) - set(SECTIONS)
    if unknown:
        raise ConfigurationError(f"unknown config sections: {sorted(unknown)}")
    return data


def _params(cfg: dict, args) -> Params:
    prob = dict(cfg.get("problem", {}))
    for key in _PROBLEM_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            prob[key] = val
    unknown = set(prob) - set(_PROBLEM_KEYS)
    if unknown:
        raise ConfigurationError(f"unknown problem keys: {sorted(unknown)}")
    missing = {"dim", "alpha", "beta"} - set(prob)
    if missing:
        raise ConfigurationError(f"problem needs {sorted(missing)}")
    return Params(int(prob["dim"]), float(prob["alpha"]), float(prob["beta"]),
                  float(prob.get("a", 1.0)), float(prob.get("b", 1.0)),
                  float(prob.get("nu", 0.0)))


def _solve_config(cfg: dict) -> SolveConfig:
    merged = dict(cfg.get("grid", {}))
    merged.update(cfg.get("solver", {}))
    return SolveConfig.from_dict(merged)


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _profile_csv(pair, t_star: float) -> str:
    """Physical profile ``t_star * pair`` on the stretched radii (no interpolation)."""
    g = pair.grid
    scale = math.exp(g.dim * t_star / 2)
    r = g.nodes * math.exp(-t_star)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(["r", "u", "v"])
    for i in range(g.size):
        w.writerow([repr(float(r[i])), repr(float(scale * pair.u.values[i])),
                    repr(float(scale * pair.v.values[i]))])
    return buf.getvalue()


# --------------------------------------------------------------------------- subcommands


def cmd_profile(args, cfg) -> int:
    grid = make_grid(args.dim, args.r_max, args.count)
    z = solve_scalar_profile(args.dim, args.p, grid)
    s = sobolev_constant(args.dim)
    bound = s.value ** (args.dim / 2)
    table = []
    fields = {"Z": z.profile}
    bgrid = make_grid(args.dim, 2.0, args.count)
    for eps in args.eps:
        eta = cutoff_bubble(args.dim, eps, bgrid)
        table.append({"eps": eps, "grad_sq": grad_sq(eta), "mass_sq": mass_sq(eta),
                      "crit_norm": lp_norm_p(eta, 2 * args.dim / (args.dim - 2)),
                      "grad_sq_minus_bound": grad_sq(eta) - bound})
    report = {"dim": args.dim, "p": args.p, "Z0": z.initial_height,
              "nehari_residual": z.nehari_residual, "pohozaev_residual": z.pohozaev_residual,
              "mass_sq": z.mass_sq, "grad_sq": z.grad_sq, "lp_p": z.lp_p,
              "sobolev": s.value, "sobolev_truncation_error": s.truncation_error,
              "eta_table": table}
    if args.csv:
        from .profiles import export_profile_csv
        export_profile_csv(args.csv, fields)
    _emit(dumps(report), args.out)
    return 0


def cmd_gn(args, cfg) -> int:
    if args.p is not None:
        rep = gn_constant_scalar(args.dim, args.p)
    elif args.alpha is not None and args.beta is not None:
        rep = gn_constant_vector(args.dim, args.alpha, args.beta)
    else:
        raise ConfigurationError("gn needs --p or both --alpha and --beta")
    _emit(dumps(rep.to_dict()), args.out)
    return 0


def cmd_fiber(args, cfg) -> int:
    params = _params(cfg, args)
    fib = dict(cfg.get("fiber", {}))
    for key in ("A", "B", "D"):
        if key not in fib:
            raise ConfigurationError(f"fiber section needs {key}")
    masses = tuple(fib.get("masses", (params.a**2, params.b**2)))
    s = FiberScalars(float(fib["A"]), float(fib["B"]), float(fib["D"]), masses, params.dim)
    crit = critical_points(s, params.nu, params.gamma)
    out = crit.to_dict()
    out["params"] = params.to_dict()
    _emit(dumps(out), args.out)
    return 0


def cmd_solve(args, cfg) -> int:
    params = _params(cfg, args)
    pair, rep = minimize_ground_state(params, _solve_config(cfg))
    out = rep.to_dict()
    out["params"] = params.to_dict()
    if args.csv:
        _emit(_profile_csv(pair, rep.t_star), args.csv)
    _emit(dumps(out), args.out)
    return 0 if rep.converged else 2


def cmd_limit(args, cfg) -> int:
    params = _params(cfg, args)
    config = _solve_config(cfg)
    pair, rep = minimize_limit_system(params.with_nu(1.0), config)
    out = {"params": params.to_dict(), "numeric": rep.to_dict()}
    if math.isclose(params.a**2 / params.b**2, params.alpha / params.beta, rel_tol=1e-12):
        lim = solve_limit_closed_form(params)
        out["closed_form"] = lim.to_dict()
        out["energy_gap"] = abs(rep.energy / lim.level - 1)
        wu, wv = lim.evaluate(pair.grid.nodes, shift=rep.t_star)
        w = pair.grid.weights
        den = math.sqrt(np.dot(w, wu**2) + np.dot(w, wv**2))
        num = math.sqrt(np.dot(w, (pair.u.values - wu) ** 2) + np.dot(w, (pair.v.values - wv) ** 2))
        out["profile_gap"] = num / den
    if args.csv:
        _emit(_profile_csv(pair, rep.t_star), args.csv)
    _emit(dumps(out), args.out)
    return 0 if rep.converged else 2


def cmd_nu1(args, cfg) -> int:
    params = _params(cfg, args)
    est = estimate_nu1(params, _solve_config(cfg), bracket=(args.lo, args.hi),
                       iterations=args.iterations)
    out = est.to_dict()
    out["params"] = params.to_dict()
    _emit(dumps(out), args.out)
    return 0


def cmd_nonpositive(args, cfg) -> int:
    params = _params(cfg, args)
    rep = verify_nonpositive_regime(params, samples=args.samples, seed=args.seed)
    _emit(dumps(rep.to_dict()), args.out)
    return 0


def _sweep_nus(cfg: dict, params: Params) -> list[float]:
    sw = cfg.get("sweep", {})
    if "nus" in sw:
        return [float(x) for x in sw["nus"]]
    if "range" in sw:
        rg = sw["range"]
        start, stop = float(rg["start"]), float(rg["stop"])
        if rg.get("relative_to_nu0"):
            n0 = nu_zero(params)
            start, stop = start * n0, stop * n0
        num = int(rg.get("num", 6))
        if rg.get("spacing", "log") == "log":
            return [float(x) for x in np.geomspace(start, stop, num)]
        return [float(x) for x in np.linspace(start, stop, num)]
    raise ConfigurationError("sweep section needs 'nus' or 'range'")


def cmd_sweep(args, cfg) -> int:
    params = _params(cfg, args)
    threads = cfg.get("sweep", {}).get("threads")
    rows = sweep_nu(params, _sweep_nus(cfg, params), _solve_config(cfg), threads=threads)
    _emit(rows_to_csv(rows), args.out)
    if args.json:
        _emit(dumps([r.to_dict() for r in rows]), args.json)
    return 0


def cmd_fit(args, cfg) -> int:
    params = _params(cfg, args)
    with open(args.csv_in) as fh:
        rows = rows_from_csv(fh.read())
    if params.gamma_class == SUBCRITICAL:
        fit = fit_small_nu_scaling(rows, params)
        kind = "small_nu"
    elif params.gamma_class == SUPERCRITICAL:
        fit = fit_large_nu_scaling(rows, params)
        kind = "large_nu"
    else:
        raise ConfigurationError("fits need gamma != 2")
    out = fit.to_dict()
    out["kind"] = kind
    _emit(dumps(out), args.out)
    return 0


# --------------------------------------------------------------------------- parser


def _problem_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--dim", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("-a", "--a", dest="a", type=float)
    p.add_argument("-b", "--b", dest="b", type=float)
    p.add_argument("--nu", type=float)
    p.add_argument("--out", help="output file (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="normstate",
                                     description="Normalized ground states of critical coupled systems")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", help="scalar profile Z, Sobolev constant and cutoff-bubble table")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--eps", type=float, nargs="+", default=[0.2, 0.1, 0.05, 0.025])
    p.add_argument("--r-max", type=float, default=30.0)
    p.add_argument("--count", type=int, default=4097)
    p.add_argument("--csv", help="write r,Z to this CSV file")
    p.add_argument("--out")
    p.add_argument("--config")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("gn", help="Gagliardo-Nirenberg constants")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--p", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--out")
    p.add_argument("--config")
    p.set_defaults(func=cmd_gn)

    p = sub.add_parser("fiber", help="critical points of the fiber map from (A, B, D)")
    _problem_flags(p)
    p.set_defaults(func=cmd_fiber)

    p = sub.add_parser("solve", help="normalized ground state")
    _problem_flags(p)
    p.add_argument("--csv", help="write the physical profile r,u,v to this CSV file")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("limit", help="limit-system ground state, numeric and closed form")
    _problem_flags(p)
    p.add_argument("--csv", help="write the numeric profile r,u,v to this CSV file")
    p.set_defaults(func=cmd_limit)

    p = sub.add_parser("nu1", help="bracket the existence threshold nu_1")
    _problem_flags(p)
    p.add_argument("--lo", type=float, default=1e-4)
    p.add_argument("--hi", type=float, default=1e2)
    p.add_argument("--iterations", type=int, default=20)
    p.set_defaults(func=cmd_nu1)

    p = sub.add_parser("nonpositive", help="projected-energy check for nu <= 0")
    _problem_flags(p)
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_nonpositive)

    p = sub.add_parser("sweep", help="ground states along a list of couplings (CSV)")
    _problem_flags(p)
    p.add_argument("--json", help="also write the rows with flags as JSON")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fit", help="fit the scaling laws of a sweep CSV")
    _problem_flags(p)
    p.add_argument("csv_in", help="sweep CSV produced by 'normstate sweep'")
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(getattr(args, "config", None))
        return args.func(args, cfg)
    except (NormStateError, OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"normstate: error: {exc}\n")
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
