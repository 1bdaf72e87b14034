"""Experiment driver: config ingestion, estimator runs, Monte Carlo sweeps.

A single JSON document describes an experiment: drift, noise parameters,
support, grids of ensemble sizes / horizons / dimensions (each either an
explicit list or the scaling rule from the tradeoff analysis), replication
count and a master seed.  One cell is one (N, T, m) triple; rows are fully
determined by (config, cell, replication) through seed splitting, so sweeps
are reproducible regardless of the worker pool.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .basis import IntervalSupport, TrigBasis, project_function, trig_basis
from .estimator import (
    DensityModel,
    EstimatorConfig,
    oracle_hat_b,
    practical_estimate,
    weighted_l2_error,
)
from .fbm import TimeGrid
from .integrals import KernelGrid
from .sde import (
    DriftSpec,
    SdeConfig,
    fou_stationary_density,
    get_drift,
    save_ensemble,
    simulate_ensemble,
)
from .validation import check_hurst, check_positive

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "RiskRow",
    "v_rate",
    "horizon_rule",
    "dimension_rule",
    "run_estimate",
    "risk_sweep",
    "write_risk_csv",
    "read_risk_csv",
    "write_summary_csv",
]

T_RULE = "N^(-1/(4H))"

RISK_COLUMNS = [
    "N", "T", "m", "replication", "risk_fixed_point", "risk_oracle",
    "bias_term", "V_N_T", "delta_c", "delta_l", "iterations", "wall_time",
]


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def v_rate(N: int, T: float, H: float) -> float:
    """The variance scale N^{-1/2} T^{-1} + T^{2H-1}."""
    return N ** (-0.5) / T + T ** (2.0 * H - 1.0)


def horizon_rule(N: int, H: float) -> float:
    """Horizon that balances the two variance terms, T(N) = N^{-1/(4H)}."""
    return float(N) ** (-1.0 / (4.0 * H))


def dimension_rule(N: int, H: float, beta: float, coefficient: float = 1.0) -> int:
    """Dimension from the bias-variance tradeoff, m ~ N^{(2H-1)/(4H(3+2beta))}."""
    exponent = (2.0 * H - 1.0) / (4.0 * H * (3.0 + 2.0 * beta))
    return max(1, int(round(coefficient * float(N) ** exponent)))


@dataclass
class RiskRow:
    N: int
    T: float
    m: int
    replication: int
    risk_fixed_point: float
    risk_oracle: float
    bias_term: float
    V_N_T: float
    delta_c: bool
    delta_l: bool
    iterations: int
    wall_time: float

    def key(self):
        return (self.N, self.T, self.m, self.replication)

    def to_csv_fields(self) -> list[str]:
        return [
            str(self.N), f"{self.T:.17g}", str(self.m), str(self.replication),
            f"{self.risk_fixed_point:.17g}", f"{self.risk_oracle:.17g}",
            f"{self.bias_term:.17g}", f"{self.V_N_T:.17g}",
            "true" if self.delta_c else "false",
            "true" if self.delta_l else "false",
            str(self.iterations), f"{self.wall_time:.17g}",
        ]

    @classmethod
    def from_csv_fields(cls, fields: list[str]) -> "RiskRow":
        return cls(
            N=int(fields[0]), T=float(fields[1]), m=int(fields[2]),
            replication=int(fields[3]), risk_fixed_point=float(fields[4]),
            risk_oracle=float(fields[5]), bias_term=float(fields[6]),
            V_N_T=float(fields[7]), delta_c=fields[8] == "true",
            delta_l=fields[9] == "true", iterations=int(fields[10]),
            wall_time=float(fields[11]),
        )


@dataclass
class ExperimentConfig:
    drift_id: str
    drift_params: dict
    H: float
    sigma: float
    support: tuple
    steps_per_unit_time: int
    min_steps: int
    N_list: list
    T_list: Optional[list]
    T_rule: bool
    m_list: Optional[list]
    m_rule: Optional[dict]
    replications: int
    master_seed: int
    init_mode: str
    x0: float
    burn_multiplier: float
    sampler: str
    density_mode: str
    density_floor: float
    estimator: EstimatorConfig

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        try:
            return cls._parse(doc)
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid experiment config: {exc}") from exc

    @classmethod
    def _parse(cls, doc: dict) -> "ExperimentConfig":
        drift_doc = dict(doc["drift"])
        drift_id = str(drift_doc.pop("id"))
        H = check_hurst(doc["H"], long_memory=True)
        sigma = float(doc["sigma"])
        if sigma == 0.0:
            raise ConfigError("sigma must be nonzero")
        lo, hi = doc["support"]
        support = (float(lo), float(hi))
        if not support[0] < support[1]:
            raise ConfigError("support must satisfy lo < hi")

        n_list = [int(v) for v in doc["N"]]
        if not n_list or any(v < 1 for v in n_list):
            raise ConfigError("N must be a nonempty list of positive integers")

        t_spec = doc["T"]
        if isinstance(t_spec, str):
            if t_spec != T_RULE:
                raise ConfigError(f"unknown T rule {t_spec!r}; supported: {T_RULE!r}")
            t_list, t_rule = None, True
        else:
            t_list = [check_positive("T", v) for v in t_spec]
            if not t_list:
                raise ConfigError("T list must be nonempty")
            t_rule = False

        m_spec = doc["m"]
        if isinstance(m_spec, dict):
            m_rule = {
                "beta": float(m_spec.get("beta", 1.0)),
                "coefficient": float(m_spec.get("coefficient", 1.0)),
            }
            if m_rule["beta"] <= 0 or m_rule["coefficient"] <= 0:
                raise ConfigError("m rule parameters must be positive")
            m_list = None
        else:
            m_list = [int(v) for v in m_spec]
            if not m_list or any(v < 1 for v in m_list):
                raise ConfigError("m must be a nonempty list of positive integers")
            m_rule = None

        replications = int(doc.get("replications", 1))
        if replications < 1:
            raise ConfigError("replications must be >= 1")

        est_doc = dict(doc.get("estimator", {}))
        density_floor = float(est_doc.pop("density_floor", 1e-3))
        estimator = EstimatorConfig(
            c_bound=float(est_doc.get("c_bound", 2.0)),
            l_target=float(est_doc.get("l_target", 0.5)),
            max_iter=int(est_doc.get("max_iter", 100)),
            tol=float(est_doc.get("tol", 1e-8)),
            quadrature_points=int(est_doc.get("quadrature_points", 10_001)),
            sup_grid_points=int(est_doc.get("sup_grid_points", 2048)),
        )

        density_mode = str(doc.get("density_mode", "known"))
        if density_mode not in ("known", "estimated"):
            raise ConfigError(f"density_mode must be 'known' or 'estimated', got {density_mode!r}")

        config = cls(
            drift_id=drift_id,
            drift_params=drift_doc,
            H=H,
            sigma=sigma,
            support=support,
            steps_per_unit_time=int(doc.get("steps_per_unit_time", 256)),
            min_steps=int(doc.get("min_steps", 32)),
            N_list=n_list,
            T_list=t_list,
            T_rule=t_rule,
            m_list=m_list,
            m_rule=m_rule,
            replications=replications,
            master_seed=int(doc["seed"]),
            init_mode=str(doc.get("init_mode", "stationary")),
            x0=float(doc.get("x0", 0.0)),
            burn_multiplier=float(doc.get("burn_multiplier", 10.0)),
            sampler=str(doc.get("sampler", "auto")),
            density_mode=density_mode,
            density_floor=density_floor,
            estimator=estimator,
        )
        # Fails fast on unknown drifts or bad drift parameters.
        drift = config.drift()
        if estimator.c_bound <= drift.lipschitz_bound:
            raise ConfigError(
                f"c_bound {estimator.c_bound} must exceed the drift derivative "
                f"bound {drift.lipschitz_bound}"
            )
        if density_mode == "known" and drift_id != "linear":
            raise ConfigError(
                "density_mode='known' requires the linear drift (closed-form "
                "stationary density); use density_mode='estimated' otherwise"
            )
        if config.init_mode not in ("fixed", "stationary"):
            raise ConfigError(f"unknown init_mode {config.init_mode!r}")
        return config

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(doc)

    def drift(self) -> DriftSpec:
        try:
            return get_drift(self.drift_id, **self.drift_params)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad drift spec: {exc}") from exc

    def grid_for(self, T: float) -> TimeGrid:
        n = max(self.min_steps, int(round(self.steps_per_unit_time * T)))
        return TimeGrid(T, n)

    def cells(self) -> list[tuple[int, float, int]]:
        """Full factorial of (N, T, m), canonically sorted; rules collapse
        their dimension to one entry per N."""
        out = []
        for n in self.N_list:
            ts = [horizon_rule(n, self.H)] if self.T_rule else self.T_list
            if self.m_rule is not None:
                ms = [dimension_rule(n, self.H, self.m_rule["beta"], self.m_rule["coefficient"])]
            else:
                ms = self.m_list
            for t in ts:
                for m in ms:
                    out.append((n, float(t), int(m)))
        return sorted(set(out))

    def known_truth_density(self, support: IntervalSupport) -> Optional[DensityModel]:
        """Closed-form stationary density when available (linear drift)."""
        if self.drift_id != "linear":
            return None
        theta = float(self.drift_params.get("theta", 1.0))
        f, f_prime = fou_stationary_density(theta, self.sigma, self.H)
        return DensityModel.known(f, support, f_prime=f_prime)


def _cell_seed(master_seed: int, N: int, T: float, m: int,
               replication: int) -> np.random.SeedSequence:
    """Deterministic seed for one (cell, replication), content-addressed so
    it does not depend on sweep enumeration order."""
    t_bits = int(np.float64(T).view(np.uint64))
    key = (int(N), int(m), int(replication), t_bits >> 32, t_bits & 0xFFFFFFFF)
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=key)


def run_estimate(config: ExperimentConfig, cell: tuple[int, float, int],
                 replication: int, dump_dir: Optional[Path] = None) -> RiskRow:
    """Simulate one ensemble and run both estimators on one cell."""
    start = time.perf_counter()
    N, T, m = cell
    drift = config.drift()
    grid = config.grid_for(T)
    seed = _cell_seed(config.master_seed, N, T, m, replication)
    ensemble = simulate_ensemble(SdeConfig(
        drift=drift, sigma=config.sigma, H=config.H, grid=grid, n_paths=N,
        seed=seed, init_mode=config.init_mode, x0=config.x0,
        burn_multiplier=config.burn_multiplier, sampler=config.sampler,
    ))
    if dump_dir is not None:
        tag = cell_tag(cell)
        save_ensemble(ensemble, dump_dir / f"ensemble_{tag}.csv",
                      dump_dir / f"ensemble_{tag}.json")

    support = IntervalSupport(*config.support)
    basis = trig_basis(support, m)
    kernel = KernelGrid(grid, config.H)

    truth_density = config.known_truth_density(support)
    if truth_density is None:
        # No closed form for this drift: fall back to a plug-in reference
        # weight for the risk metric.
        from .estimator import density_projection  # local import avoids cycle noise
        truth_density = DensityModel.estimated(
            density_projection(ensemble, basis), lower_floor=config.density_floor
        )

    known_density = truth_density if config.density_mode == "known" else None
    result = practical_estimate(
        ensemble, basis, kernel, config.estimator, config.density_mode,
        known_density=known_density, density_floor=config.density_floor,
    )

    oracle = oracle_hat_b(ensemble, basis, kernel, drift)

    def oracle_fn(x):
        return oracle.evaluate(x) / truth_density.evaluate(x)

    q = config.estimator.quadrature_points
    risk_fp = weighted_l2_error(result.evaluate, drift.b0, truth_density, support, q)
    risk_oracle = weighted_l2_error(oracle_fn, drift.b0, truth_density, support, q)

    bf_coeffs = project_function(
        lambda x: np.asarray(drift.b0(x), dtype=float) * truth_density.evaluate(x),
        basis, q,
    )

    def projection_fn(x):
        return bf_coeffs.evaluate(x) / truth_density.evaluate(x)

    bias = weighted_l2_error(projection_fn, drift.b0, truth_density, support, q)

    return RiskRow(
        N=N, T=T, m=m, replication=replication,
        risk_fixed_point=risk_fp, risk_oracle=risk_oracle, bias_term=bias,
        V_N_T=v_rate(N, T, config.H),
        delta_c=result.delta_c_holds, delta_l=result.delta_l_holds,
        iterations=result.iterations,
        wall_time=time.perf_counter() - start,
    )


def cell_tag(cell: tuple[int, float, int]) -> str:
    N, T, m = cell
    return f"N{N}_T{T:g}_m{m}"


def _worker_count() -> int:
    env = os.environ.get("FRACDRIFT_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"FRACDRIFT_THREADS must be an integer, got {env!r}")
        if n < 1:
            raise ConfigError("FRACDRIFT_THREADS must be >= 1")
        return n
    return min(32, os.cpu_count() or 1)


def risk_sweep(config: ExperimentConfig, out_dir=None, dump_paths: bool = False):
    """Run the full factorial of cells x replications.

    Rows are computed on a worker pool (capped by FRACDRIFT_THREADS) and
    written through a single sink in canonical (cell, replication) order.
    Completed rows are flushed even if the sweep is interrupted.  Per-row
    failures are recorded in errors.csv and do not abort the sweep.

    Returns (rows, errors).
    """
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    tasks = [
        (cell, rep)
        for cell in config.cells()
        for rep in range(config.replications)
    ]
    dump_dir = out if (dump_paths and out is not None) else None
    rows: list[RiskRow] = []
    errors: list[tuple] = []
    try:
        with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
            futures = {
                pool.submit(
                    run_estimate, config, cell, rep,
                    dump_dir if rep == 0 else None,
                ): (cell, rep)
                for cell, rep in tasks
            }
            for fut in as_completed(futures):
                cell, rep = futures[fut]
                try:
                    rows.append(fut.result())
                except Exception as exc:  # recorded, not fatal
                    errors.append((cell, rep, f"{type(exc).__name__}: {exc}"))
    finally:
        rows.sort(key=RiskRow.key)
        errors.sort(key=lambda e: (e[0], e[1]))
        if out is not None:
            write_risk_csv(rows, out / "risk.csv")
            write_summary_csv(rows, out / "risk_summary.csv")
            if errors:
                with (out / "errors.csv").open("w") as fh:
                    fh.write("N,T,m,replication,error\n")
                    for (cell, rep, msg) in errors:
                        n, t, m = cell
                        clean = msg.replace("\n", " ").replace(",", ";")
                        fh.write(f"{n},{t:.17g},{m},{rep},{clean}\n")
    return rows, errors


def write_risk_csv(rows: list[RiskRow], path) -> None:
    with Path(path).open("w") as fh:
        fh.write(",".join(RISK_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(row.to_csv_fields()) + "\n")


def read_risk_csv(path) -> list[RiskRow]:
    lines = Path(path).read_text().strip().splitlines()
    if not lines or lines[0] != ",".join(RISK_COLUMNS):
        raise ValueError(f"unexpected risk.csv header in {path}")
    return [RiskRow.from_csv_fields(line.split(",")) for line in lines[1:]]


def write_summary_csv(rows: list[RiskRow], path) -> None:
    """Per-cell medians and means across replications (median is the
    primary aggregate; it is robust to truncation-induced zeros)."""
    cells: dict[tuple, list[RiskRow]] = {}
    for row in rows:
        cells.setdefault((row.N, row.T, row.m), []).append(row)
    with Path(path).open("w") as fh:
        fh.write(
            "N,T,m,n_rows,median_risk_fixed_point,mean_risk_fixed_point,"
            "median_risk_oracle,mean_risk_oracle,bias_term,V_N_T,truncation_rate\n"
        )
        for key in sorted(cells):
            group = cells[key]
            fp = np.array([r.risk_fixed_point for r in group])
            orc = np.array([r.risk_oracle for r in group])
            trunc = np.mean([not (r.delta_c and r.delta_l) for r in group])
            fh.write(
                f"{key[0]},{key[1]:.17g},{key[2]},{len(group)},"
                f"{np.median(fp):.17g},{np.mean(fp):.17g},"
                f"{np.median(orc):.17g},{np.mean(orc):.17g},"
                f"{group[0].bias_term:.17g},{group[0].V_N_T:.17g},"
                f"{trunc:.17g}\n"
            )
