"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 solver capacity exceeded,
4 numerical-quality flag (photon cutoff or positivity) raised by a run.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings

from . import __version__, scenarios
from .errors import CapacityError, IntegrationError, NumericalQualityError, ParameterError
from .output import SchemaError

EXIT_OK, EXIT_CONFIG, EXIT_CAPACITY, EXIT_QUALITY = 0, 2, 3, 4

log = logging.getLogger("superradiance")

diff_runs = scenarios.diff_runs


def _override(scenario, args):
    """Apply command-line overrides to a config-file scenario."""
    cfg = scenario.config_dict()
    if args.solver:
        cfg["solver"] = args.solver
    if args.gamma_phi_over_g is not None:
        cfg["gamma_phi_over_g"] = args.gamma_phi_over_g
    if args.n_emitters is not None:
        cfg["n_emitters"] = args.n_emitters
    return scenarios.scenario_from_dict(cfg)


def run_scenario(target, out_dir=None, solver=None, jobs=1, gamma_phi_over_g=None,
                 n_emitters=None, sweep_gamma=None) -> scenarios.RunManifest:
    """Run a built-in scenario by name or a configuration file by path."""
    gamma_phi = 0.0 if gamma_phi_over_g is None else float(gamma_phi_over_g)
    if target in scenarios.SCENARIOS:
        out_dir = out_dir or os.path.join("runs", target)
        if target == "fig1":
            return scenarios.fig1(out_dir, gamma_phi, jobs)
        if target == "fig2":
            return scenarios.fig2(out_dir, solver or "cluster",
                                  50 if n_emitters is None else n_emitters, gamma_phi)
        if target == "fig3":
            return scenarios.fig3(out_dir, gamma_phi)
        sweep = (scenarios.parse_sweep(sweep_gamma) if sweep_gamma
                 else scenarios.FIG4_SWEEP)
        return scenarios.fig4(out_dir, sweep, jobs, gamma_phi)
    if not os.path.isfile(target):
        raise ParameterError(f"unknown scenario or missing config file '{target}'; "
                             f"built-in scenarios: {', '.join(scenarios.SCENARIOS)}")
    ns = argparse.Namespace(solver=solver, gamma_phi_over_g=gamma_phi_over_g,
                            n_emitters=n_emitters)
    scenario = _override(scenarios.load_config(target), ns)
    out_dir = out_dir or os.path.join("runs", scenario.name)
    return scenarios.run_config(scenario, out_dir)


def _cmd_run(args):
    manifest = run_scenario(args.target, args.out_dir, args.solver, args.jobs,
                            args.gamma_phi_over_g, args.n_emitters, args.sweep_gamma)
    return _report(manifest)


def _cmd_sweep(args):
    scenario = scenarios.load_config(args.config)
    scenario = _override(scenario, args)
    values = scenarios.parse_sweep(args.values)
    out_dir = args.out_dir or os.path.join("runs", f"{scenario.name}_sweep")
    manifest = scenarios.sweep(scenario, args.param, values, out_dir, args.jobs)
    return _report(manifest)


def _report(manifest):
    print(f"{manifest.scenario}: {len(manifest.outputs)} file(s), "
          f"hash {manifest.config_hash}, {manifest.duration_s:.1f} s")
    for name in manifest.outputs:
        print(f"  {name}")
    for key, value in manifest.summary.items():
        if not isinstance(value, dict):
            print(f"  {key} = {value}")
    if not manifest.numerical_ok:
        for flag in manifest.flags:
            print(f"quality flag: {flag}", file=sys.stderr)
        if not manifest.cutoff_ok:
            print("quality flag: photon cutoff inadequate", file=sys.stderr)
        return EXIT_QUALITY
    return EXIT_OK


def _cmd_diff(args):
    report = diff_runs(args.a, args.b)
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True))
        return EXIT_OK
    for table, cols in report.items():
        print(table)
        print(f"  {'column':<14} {'max_abs':>12} {'rms':>12} {'peak_rel':>10}")
        for name, d in cols.items():
            print(f"  {name:<14} {d['max_abs']:12.4e} {d['rms']:12.4e} {d['peak_rel']:10.4f}")
    return EXIT_OK


def _cmd_list(args):
    for name, text in scenarios.SCENARIOS.items():
        print(f"{name:6s} {text}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="superradiance",
                                     description="Superradiant emission and Dicke-state entanglement in a cavity")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--solver", choices=("cluster", "exact", "both"))
        p.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
        p.add_argument("--out-dir")
        p.add_argument("--gamma-phi-over-g", type=float)
        p.add_argument("--n-emitters", type=int)

    p = sub.add_parser("run", help="run a built-in scenario or a YAML config")
    p.add_argument("target", help="scenario name (see list-scenarios) or config path")
    common(p)
    p.add_argument("--sweep-gamma", help="start:stop:count grid of gamma/g for fig4")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="sweep one parameter of a YAML config")
    p.add_argument("config")
    p.add_argument("--param", required=True, choices=scenarios.SWEEPABLE)
    p.add_argument("--values", required=True, help="start:stop:count")
    common(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("diff", help="compare two runs column by column")
    p.add_argument("a", help="manifest, run directory or CSV table")
    p.add_argument("b")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_diff)

    p = sub.add_parser("list-scenarios", help="list built-in scenarios")
    p.set_defaults(func=_cmd_list)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) is not None and getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    with warnings.catch_warnings():
        warnings.simplefilter("default")
        try:
            return args.func(args)
        except CapacityError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CAPACITY
        except (NumericalQualityError, IntegrationError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_QUALITY
        except (ParameterError, SchemaError, FileNotFoundError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
