"""Command-line interface.

Subcommands: simulate, estimate, oracle, sweep.  Each takes --config PATH,
--out DIR and an optional --seed override.  Exit codes: 0 success, 2 config
error, 3 numerical failure in all cells.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .basis import IntervalSupport, trig_basis
from .estimator import export_curve_csv, oracle_hat_b, practical_estimate, weighted_l2_error
from .harness import ConfigError, ExperimentConfig, cell_tag, risk_sweep, run_estimate
from .integrals import KernelGrid
from .sde import SdeConfig, save_ensemble, simulate_ensemble

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracdrift",
        description="Simulation and drift estimation for fractional SDE ensembles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in [
        ("simulate", "simulate one ensemble and write it to CSV"),
        ("estimate", "run the fixed-point estimator on one cell"),
        ("oracle", "run the true-drift estimator on one cell"),
        ("sweep", "run the full Monte Carlo risk sweep"),
    ]:
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument("--config", required=True, help="experiment config JSON")
        cmd.add_argument("--out", required=True, help="output directory")
        cmd.add_argument("--seed", type=int, default=None, help="override the config seed")
        cmd.add_argument("--dump-paths", action="store_true",
                         help="also write simulated ensembles to CSV")
    return parser


def _load_config(path: str, seed_override) -> ExperimentConfig:
    config = ExperimentConfig.from_json(path)
    if seed_override is not None:
        config.master_seed = int(seed_override)
    return config


def _first_cell(config: ExperimentConfig):
    return config.cells()[0]


def _single_cell_ensemble(config: ExperimentConfig, cell):
    from .harness import _cell_seed

    N, T, m = cell
    grid = config.grid_for(T)
    return simulate_ensemble(SdeConfig(
        drift=config.drift(), sigma=config.sigma, H=config.H, grid=grid,
        n_paths=N, seed=_cell_seed(config.master_seed, N, T, m, 0),
        init_mode=config.init_mode, x0=config.x0,
        burn_multiplier=config.burn_multiplier, sampler=config.sampler,
    ))


def _cmd_simulate(config: ExperimentConfig, out: Path, dump_paths: bool) -> int:
    cell = _first_cell(config)
    ensemble = _single_cell_ensemble(config, cell)
    tag = cell_tag(cell)
    save_ensemble(ensemble, out / f"ensemble_{tag}.csv", out / f"ensemble_{tag}.json")
    print(f"wrote ensemble_{tag}.csv ({ensemble.n_paths} paths)")
    return EXIT_OK


def _cmd_estimate(config: ExperimentConfig, out: Path, dump_paths: bool) -> int:
    cell = _first_cell(config)
    N, T, m = cell
    tag = cell_tag(cell)
    ensemble = _single_cell_ensemble(config, cell)
    if dump_paths:
        save_ensemble(ensemble, out / f"ensemble_{tag}.csv", out / f"ensemble_{tag}.json")
    support = IntervalSupport(*config.support)
    basis = trig_basis(support, m)
    kernel = KernelGrid(ensemble.grid, config.H)
    known = config.known_truth_density(support) if config.density_mode == "known" else None
    result = practical_estimate(
        ensemble, basis, kernel, config.estimator, config.density_mode,
        known_density=known, density_floor=config.density_floor,
    )
    result.save_json(out / f"estimate_{tag}.json")
    export_curve_csv(result, config.drift().b0, out / f"curve_{tag}.csv")
    print(f"wrote estimate_{tag}.json (converged={result.converged}, "
          f"truncated={result.truncated})")
    return EXIT_OK


def _cmd_oracle(config: ExperimentConfig, out: Path, dump_paths: bool) -> int:
    cell = _first_cell(config)
    N, T, m = cell
    tag = cell_tag(cell)
    ensemble = _single_cell_ensemble(config, cell)
    if dump_paths:
        save_ensemble(ensemble, out / f"ensemble_{tag}.csv", out / f"ensemble_{tag}.json")
    support = IntervalSupport(*config.support)
    basis = trig_basis(support, m)
    kernel = KernelGrid(ensemble.grid, config.H)
    drift = config.drift()
    coeffs = oracle_hat_b(ensemble, basis, kernel, drift)
    density = config.known_truth_density(support)
    doc = {
        "cell": {"N": N, "T": T, "m": m},
        "coefficients": [float(v) for v in coeffs.values],
        "support": [support.lo, support.hi],
    }
    if density is not None:
        doc["risk"] = weighted_l2_error(
            lambda x: coeffs.evaluate(x) / density.evaluate(x),
            drift.b0, density, support, config.estimator.quadrature_points,
        )
    (out / f"oracle_{tag}.json").write_text(json.dumps(doc, indent=2) + "\n")
    print(f"wrote oracle_{tag}.json")
    return EXIT_OK


def _cmd_sweep(config: ExperimentConfig, out: Path, dump_paths: bool) -> int:
    rows, errors = risk_sweep(config, out_dir=out, dump_paths=dump_paths)
    print(f"sweep: {len(rows)} rows, {len(errors)} failures -> {out / 'risk.csv'}")
    if not rows and errors:
        return EXIT_NUMERICAL
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _load_config(args.config, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    handler = {
        "simulate": _cmd_simulate,
        "estimate": _cmd_estimate,
        "oracle": _cmd_oracle,
        "sweep": _cmd_sweep,
    }[args.command]
    try:
        return handler(config, out, args.dump_paths)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
