"""Command line front end.

Subcommands: validate (hypothesis report), eigen (threshold eigenvalues),
periodic (carrying orbit, forced host profile, endemic pair), simulate
(trajectory CSV), classify (regime report), verify (convergence study),
sweep (classify over a parameter value list).

Exit codes: 0 success, 1 config or parse error, 2 numerical failure
(non-convergence, blowup, gap), 3 standing-hypothesis violation, 4 regime
INDETERMINATE when --strict asked for a decisive answer.

All tabular output is CSV with comma separators, LF line endings, a fixed
header row, and 17 significant digits so repeated runs are byte-identical.
Reports are key=value text, one pair per line.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .coeffs import validate_hypothesis_H
from .config import RunConfig, load_config, substituted_coeffs
from .dynamics import (INDETERMINATE, build_initial_state, classify_regime,
                       verify_trichotomy)
from .eigen import gamma_rho, lambda_V, lambda_V_eps
from .errors import (CoefficientError, ConfigError, DomainError, EvalError,
                     InputError, ParseError, RegimeError, VectorHostError)
from .grid import BoundarySpec, map_between
from .periodic import solve_Hbar, solve_endemic_pair, solve_logistic_orbit
from .stepper import NonlinearModel, integrate_trajectory

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_HYPOTHESIS = 3
EXIT_INDETERMINATE = 4

_FMT = "%.17g"
_CONFIG_ERRORS = (ConfigError, ParseError, DomainError, InputError, EvalError)


def _fmt(v) -> str:
    if isinstance(v, float):
        return _FMT % v
    return str(v)


def _write_report(path: str, items) -> None:
    with open(path, "w") as f:
        for key, value in items:
            f.write(f"{key}={_fmt(value)}\n")


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _pad(values: np.ndarray, bc: BoundarySpec) -> np.ndarray:
    # every CSV uses the full node set; Dirichlet data gets its zero endpoints back
    return map_between(values, bc, BoundarySpec.neumann(bc.group))


def _orbit_csv(path: str, grid, named) -> None:
    """Field-snapshot table: columns x, t, then one column per orbit.

    named is a sequence of (column, samples, bc) with samples shaped
    (m+1, n) on the layout of bc.
    """
    xs = grid.full_nodes()
    m = grid.steps_per_period
    padded = [np.stack([_pad(level, bc) for level in samples])
              for _, samples, bc in named]
    rows = []
    for k in range(m + 1):
        ts = _FMT % (k * grid.dt)
        for i, x in enumerate(xs):
            rows.append([_FMT % x, ts] + [_FMT % p[k, i] for p in padded])
    _write_csv(path, ["x", "t"] + [name for name, _, _ in named], rows)


def _trajectory_csv(path: str, grid, traj, bc1, bc2) -> None:
    xs = grid.full_nodes()
    layout = (bc1, bc2, bc2)
    rows = []
    for s in traj.states:
        ts = _FMT % s.t
        padded = [_pad(comp, bc) for comp, bc in zip(s.components, layout)]
        for i, x in enumerate(xs):
            rows.append([_FMT % x, ts] + [_FMT % p[i] for p in padded])
    _write_csv(path, ["x", "t", "H_i", "V_u", "V_i"], rows)


def _hypothesis_or_none(cfg: RunConfig):
    """None when the standing hypothesis holds, else the failed report."""
    rep = validate_hypothesis_H(cfg.coeffs, cfg.grid, cfg.run.t_offset)
    return None if rep.passed else rep


def _report_violations(rep, stream=None) -> None:
    stream = stream if stream is not None else sys.stderr
    print("standing hypothesis violated:", file=stream)
    for v in rep.violations:
        print(f"  {v.describe()}", file=stream)


# ─────────────────────────────────────────────────────────── subcommands ──


def cmd_validate(cfg: RunConfig, args) -> int:
    rep = validate_hypothesis_H(cfg.coeffs, cfg.grid, cfg.run.t_offset)
    items = [("status", "PASS" if rep.passed else "FAIL"),
             ("violations", len(rep.violations))]
    for i, v in enumerate(rep.violations, 1):
        items.append((f"violation_{i}", v.describe()))
    _write_report(os.path.join(args.out, "validation.txt"), items)
    if rep.passed:
        print("hypothesis checks passed")
        return EXIT_OK
    _report_violations(rep, sys.stdout)
    return EXIT_HYPOTHESIS


def cmd_eigen(cfg: RunConfig, args) -> int:
    bad = _hypothesis_or_none(cfg)
    if bad is not None:
        _report_violations(bad)
        return EXIT_HYPOTHESIS
    o = cfg.solver
    c, g = cfg.coeffs, cfg.grid
    lr = solve_logistic_orbit(c, cfg.bc2, g, o.orbit_tol, o.max_periods,
                              o.band, o.eigen_tol, o.max_eigen_iters)
    gr = gamma_rho(c, cfg.bc1, g, o.eigen_tol, o.max_eigen_iters)
    items = [("zeta", lr.zeta),
             ("zeta_iterations", lr.zeta_result.iterations),
             ("zeta_residual", lr.zeta_result.residual),
             ("gamma_rho", gr.value),
             ("gamma_rho_iterations", gr.iterations),
             ("gamma_rho_residual", gr.residual)]
    histories = [("zeta", lr.zeta_result.r_history),
                 ("gamma_rho", gr.r_history)]
    if lr.orbit.sup_norm() > 0.0:
        lam = lambda_V(c, (cfg.bc1, cfg.bc2), g, lr.orbit,
                       o.eigen_tol, o.max_eigen_iters)
        items += [("lambda_V", lam.value),
                  ("lambda_V_iterations", lam.iterations),
                  ("lambda_V_residual", lam.residual)]
        histories.append(("lambda_V", lam.r_history))
        if o.eps > 0.0:
            le = lambda_V_eps(c, (cfg.bc1, cfg.bc2), g, lr.orbit,
                              lr.zeta_result.eigenfunction, o.eps,
                              o.eigen_tol, o.max_eigen_iters)
            items += [("eps", o.eps), ("lambda_V_eps", le.value),
                      ("lambda_V_eps_iterations", le.iterations)]
            histories.append(("lambda_V_eps", le.r_history))
    else:
        items.append(("lambda_V", "ABSENT (carrying orbit is zero)"))
    _write_report(os.path.join(args.out, "eigen_report.txt"), items)
    rows = [[name, str(i), _FMT % r]
            for name, hist in histories for i, r in enumerate(hist)]
    _write_csv(os.path.join(args.out, "eigen_history.csv"),
               ["name", "iteration", "r_estimate"], rows)
    phi = lr.zeta_result.eigenfunction
    _orbit_csv(os.path.join(args.out, "phi_zeta.csv"), g,
               [("phi", phi.samples[0], cfg.bc2)])
    print(f"zeta={lr.zeta:.6g} gamma_rho={gr.value:.6g}")
    return EXIT_OK


def cmd_periodic(cfg: RunConfig, args) -> int:
    bad = _hypothesis_or_none(cfg)
    if bad is not None:
        _report_violations(bad)
        return EXIT_HYPOTHESIS
    o = cfg.solver
    c, g = cfg.coeffs, cfg.grid
    bcs = (cfg.bc1, cfg.bc2)
    lr = solve_logistic_orbit(c, cfg.bc2, g, o.orbit_tol, o.max_periods,
                              o.band, o.eigen_tol, o.max_eigen_iters)
    _orbit_csv(os.path.join(args.out, "V_orbit.csv"), g,
               [("V", lr.orbit.samples[0], cfg.bc2)])
    hbar = solve_Hbar(c, cfg.bc1, g, lr.orbit, tol=o.orbit_tol,
                      max_periods=o.max_periods)
    _orbit_csv(os.path.join(args.out, "Hbar.csv"), g,
               [("H_bar", hbar.samples[0], cfg.bc1)])
    items = [("zeta", lr.zeta),
             ("V_converged_in", lr.converged_in),
             ("V_fixed_point_residual", lr.fixed_point_residual),
             ("V_agreement_gap", lr.agreement_gap),
             ("Hbar_sup", hbar.sup_norm())]
    indeterminate = False
    try:
        pair = solve_endemic_pair(c, bcs, g, eps=o.eps, tol=o.orbit_tol,
                                  max_periods=o.max_periods, band=o.band,
                                  eigen_tol=o.eigen_tol,
                                  max_eigen_iters=o.max_eigen_iters,
                                  logistic=lr)
    except RegimeError as exc:
        items += [("endemic_status",
                   "INDETERMINATE" if exc.indeterminate else "ABSENT"),
                  ("endemic_detail", str(exc))]
        indeterminate = exc.indeterminate
    else:
        items += [("endemic_status", "PRESENT"),
                  ("lambda_V", pair.lambda_V_result.value),
                  ("eps_used", pair.eps_used),
                  ("endemic_gap", pair.gap),
                  ("endemic_converged_in", pair.converged_in),
                  ("endemic_upper_residual", pair.upper_residual),
                  ("endemic_lower_residual", pair.lower_residual)]
        _orbit_csv(os.path.join(args.out, "endemic_orbit.csv"), g,
                   [("H_i", pair.H_orbit.samples[0], cfg.bc1),
                    ("V_i", pair.Vi_orbit.samples[0], cfg.bc2)])
    _write_report(os.path.join(args.out, "periodic_report.txt"), items)
    print(f"zeta={lr.zeta:.6g} endemic={dict(items).get('endemic_status')}")
    if indeterminate and args.strict:
        return EXIT_INDETERMINATE
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, args) -> int:
    bad = _hypothesis_or_none(cfg)
    if bad is not None:
        _report_violations(bad)
        return EXIT_HYPOTHESIS
    o = cfg.solver
    u0 = build_initial_state(cfg.grid, cfg.bc1, cfg.bc2, cfg.run.initial)
    model = NonlinearModel(kind="full", c=cfg.coeffs, bc1=cfg.bc1,
                           bc2=cfg.bc2, grid=cfg.grid, cap=o.blowup_cap)
    traj = integrate_trajectory(model, u0, o.n_periods, o.sample_stride)
    _trajectory_csv(os.path.join(args.out, "trajectory.csv"), cfg.grid,
                    traj, cfg.bc1, cfg.bc2)
    last = traj.states[-1]
    items = [("n_periods", o.n_periods),
             ("sample_stride", o.sample_stride),
             ("samples", len(traj.states)),
             ("final_t", last.t)]
    for name, comp in zip(("H_i", "V_u", "V_i"), last.components):
        items.append((f"final_sup_{name}", float(np.max(np.abs(comp)))))
    _write_report(os.path.join(args.out, "simulate_report.txt"), items)
    print(f"integrated {o.n_periods} periods, {len(traj.states)} samples")
    return EXIT_OK


def _classify_items(rep) -> list:
    return [("regime", rep.regime),
            ("zeta", rep.zeta),
            ("lambda_V", "" if rep.lambda_V is None else rep.lambda_V),
            ("band", rep.band),
            ("attractor", rep.attractor_kind)]


def cmd_classify(cfg: RunConfig, args) -> int:
    bad = _hypothesis_or_none(cfg)
    if bad is not None:
        _report_violations(bad)
        return EXIT_HYPOTHESIS
    rep = classify_regime(cfg.coeffs, (cfg.bc1, cfg.bc2), cfg.grid, cfg.solver)
    _write_report(os.path.join(args.out, "classify_report.txt"),
                  _classify_items(rep))
    if rep.attractor is not None:
        a = rep.attractor
        _orbit_csv(os.path.join(args.out, "attractor.csv"), cfg.grid,
                   [("H_i", a.samples[0], cfg.bc1),
                    ("V_u", a.samples[1], cfg.bc2),
                    ("V_i", a.samples[2], cfg.bc2)])
    print(f"regime={rep.regime} zeta={rep.zeta:.6g}"
          + ("" if rep.lambda_V is None else f" lambda_V={rep.lambda_V:.6g}"))
    if rep.regime == INDETERMINATE and args.strict:
        return EXIT_INDETERMINATE
    return EXIT_OK


def cmd_verify(cfg: RunConfig, args) -> int:
    bad = _hypothesis_or_none(cfg)
    if bad is not None:
        _report_violations(bad)
        return EXIT_HYPOTHESIS
    o = cfg.solver
    u0 = build_initial_state(cfg.grid, cfg.bc1, cfg.bc2, cfg.run.initial)
    cr = verify_trichotomy(cfg.coeffs, (cfg.bc1, cfg.bc2), cfg.grid,
                           initial=u0, n_periods=o.n_periods,
                           target=o.target, tols=o)
    items = _classify_items(cr.regime_report)
    items += [("verdict", cr.verdict),
              ("final_error", cr.final_error),
              ("median_ratio", cr.median_ratio),
              ("n_periods", cr.n_periods),
              ("target", cr.target)]
    _write_report(os.path.join(args.out, "verify_report.txt"), items)
    _write_csv(os.path.join(args.out, "convergence.csv"), ["n", "e_n"],
               [[str(n), _FMT % e] for n, e in enumerate(cr.errors)])
    print(f"regime={cr.regime} verdict={cr.verdict}"
          f" final_error={cr.final_error:.6g}")
    if cr.regime == INDETERMINATE and args.strict:
        return EXIT_INDETERMINATE
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, args) -> int:
    if cfg.sweep is None:
        raise ConfigError("sweep subcommand needs a [sweep] section")
    bcs = (cfg.bc1, cfg.bc2)

    def run_row(value: float):
        try:
            c = substituted_coeffs(cfg, value)
            if not validate_hypothesis_H(c, cfg.grid, cfg.run.t_offset).passed:
                return (value, "", "", "ERROR")
            rep = classify_regime(c, bcs, cfg.grid, cfg.solver)
            lam = "" if rep.lambda_V is None else _FMT % rep.lambda_V
            return (value, _FMT % rep.zeta, lam, rep.regime)
        except VectorHostError:
            return (value, "", "", "ERROR")

    values = cfg.sweep.values
    with ThreadPoolExecutor(max_workers=min(4, len(values))) as ex:
        rows = list(ex.map(run_row, values))  # input order, not completion order
    _write_csv(os.path.join(args.out, "sweep.csv"),
               ["value", "zeta", "lambda_V", "regime"],
               [[_FMT % v, z, l, r] for v, z, l, r in rows])
    ok = sum(1 for row in rows if row[3] != "ERROR")
    _write_report(os.path.join(args.out, "sweep_report.txt"),
                  [("parameter", cfg.sweep.parameter),
                   ("rows", len(rows)),
                   ("succeeded", ok),
                   ("failed", len(rows) - ok)])
    for v, _, _, regime in rows:
        print(f"{cfg.sweep.parameter}<-{v:g}: {regime}")
    return EXIT_OK if ok else EXIT_NUMERICAL


_DISPATCH = {
    "validate": cmd_validate,
    "eigen": cmd_eigen,
    "periodic": cmd_periodic,
    "simulate": cmd_simulate,
    "classify": cmd_classify,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vectorhost",
        description="Seasonal vector-host model: eigenvalues, periodic "
                    "orbits, and regime classification.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "validate": "check the standing hypothesis and write a report",
        "eigen": "compute the threshold eigenvalues",
        "periodic": "build the carrying orbit, host profile, and endemic pair",
        "simulate": "integrate the full model and dump the trajectory",
        "classify": "name the long-time regime",
        "verify": "measure convergence of a trajectory to the attractor",
        "sweep": "classify over a parameter value list",
    }
    for name in _DISPATCH:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", required=True, metavar="PATH",
                       help="run configuration file")
        p.add_argument("--out", default="./out", metavar="DIR",
                       help="output directory, created if absent")
        p.add_argument("--override", action="append", default=[],
                       metavar="SECTION.KEY=VALUE",
                       help="replace a config value (repeatable)")
        p.add_argument("--seed", type=int, default=None,
                       help="seed for randomized property runs")
        p.add_argument("--strict", action="store_true",
                       help="exit 4 when the regime is INDETERMINATE")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # remap argparse usage errors onto the contract
        return EXIT_OK if not exc.code else EXIT_CONFIG
    try:
        cfg = load_config(args.config, tuple(args.override))
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    os.makedirs(args.out, exist_ok=True)
    if args.seed is not None:
        np.random.seed(args.seed % 2**32)
    try:
        return _DISPATCH[args.command](cfg, args)
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CoefficientError as exc:
        print(f"hypothesis violation: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except VectorHostError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
