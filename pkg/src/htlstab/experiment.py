"""Negative-transfer experiment: held-out risk of the transfer predictor as the
target classes rotate away from the source classes.

For every replica a source sample is drawn once and a linear source scorer is
trained on it. Then, for every angle, one target train/test draw is shared by
all losses.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .datagen import SOURCE_STREAM, TEST_STREAM, TRAIN_STREAM, ScenarioConfig, make_rng, make_source, make_target
from .errors import ConfigError, ConvergenceError
from .kernels import KernelKind, KernelSpec, cross_gram, gram
from .losses import ALL_LOSSES, LossKind, LossSpec, loss_value
from .rerm import SolverConfig, fit_linear_primal, minimize_coefficients

logger = logging.getLogger(__name__)

CSV_HEADER = ("theta", "loss", "median_risk", "q25", "q75", "n_sims")
MIN_SUCCESS_FRACTION = 0.9
DEFAULT_GRID_SIZE = 17


def default_theta_grid(size: int = DEFAULT_GRID_SIZE) -> List[float]:
    return [float(t) for t in np.linspace(0.0, math.pi, size)]


class ExperimentError(RuntimeError):
    """Too many replicas failed for some (angle, loss) cell."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings of the negative-transfer sweep.

    ``scenario.theta`` is ignored; the angles come from ``theta_grid``. The
    source scorer is a linear model trained with ``source_loss`` and
    ``source_lambda``.
    """

    scenario: ScenarioConfig = ScenarioConfig()
    losses: Tuple[LossSpec, ...] = ALL_LOSSES
    lam: float = 1.0
    theta_grid: Tuple[float, ...] = tuple(default_theta_grid())
    n_sims: int = 1000
    kernel: KernelSpec = KernelSpec(KernelKind.GAUSSIAN, gamma=0.5)
    source_loss: LossSpec = LossSpec(LossKind.SQUARED_HINGE)
    source_lambda: float = 1e-3
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        object.__setattr__(self, "losses", tuple(self.losses))
        object.__setattr__(self, "theta_grid", tuple(float(t) for t in self.theta_grid))
        if not self.theta_grid:
            raise ConfigError("theta_grid must not be empty")
        if any(not 0.0 <= t <= math.pi + 1e-12 for t in self.theta_grid):
            raise ConfigError("every theta must lie in [0, pi]")
        if not self.losses:
            raise ConfigError("at least one loss is required")
        if self.n_sims < 1:
            raise ConfigError("n_sims must be at least 1")
        if not self.lam > 0 or not self.source_lambda > 0:
            raise ConfigError("regularization strengths must be positive")

    def to_dict(self) -> dict:
        scenario = self.scenario.to_dict()
        scenario.pop("theta")
        return {
            "scenario": scenario,
            "losses": [loss.to_dict() for loss in self.losses],
            "lambda": self.lam,
            "theta_grid": list(self.theta_grid),
            "n_sims": self.n_sims,
            "kernel": self.kernel.to_dict(),
            "source_loss": self.source_loss.to_dict(),
            "source_lambda": self.source_lambda,
            "solver": self.solver.to_dict(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ConfigError("experiment config must be a JSON object")
        known = {"scenario", "losses", "lambda", "theta_grid", "n_sims", "kernel", "source_loss", "source_lambda", "solver"}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown experiment settings: {sorted(unknown)}")
        kwargs = {}
        if "scenario" in obj:
            kwargs["scenario"] = ScenarioConfig.from_dict(obj["scenario"])
        if "losses" in obj:
            kwargs["losses"] = tuple(LossSpec.from_dict(x) for x in obj["losses"])
        if "lambda" in obj:
            kwargs["lam"] = float(obj["lambda"])
        if "theta_grid" in obj:
            grid = obj["theta_grid"]
            kwargs["theta_grid"] = default_theta_grid(int(grid)) if isinstance(grid, int) else tuple(grid)
        if "n_sims" in obj:
            kwargs["n_sims"] = int(obj["n_sims"])
        if "kernel" in obj:
            kwargs["kernel"] = KernelSpec.from_dict(obj["kernel"])
        if "source_loss" in obj:
            kwargs["source_loss"] = LossSpec.from_dict(obj["source_loss"])
        if "source_lambda" in obj:
            kwargs["source_lambda"] = float(obj["source_lambda"])
        if "solver" in obj:
            kwargs["solver"] = SolverConfig.from_dict(obj["solver"])
        return cls(**kwargs)


def run_replica(cfg: ExperimentConfig, replica: int) -> np.ndarray:
    """Held-out risks of one replica, shape ``(len(theta_grid), len(losses))``.

    A cell whose fit does not converge is ``nan``.
    """
    seed = cfg.scenario.seed + replica
    source_data = make_source(cfg.scenario, make_rng(seed, SOURCE_STREAM))
    source = fit_linear_primal(source_data, cfg.source_loss, cfg.source_lambda)
    risks = np.full((len(cfg.theta_grid), len(cfg.losses)), np.nan)
    for t, theta in enumerate(cfg.theta_grid):
        scenario = replace(cfg.scenario, theta=theta)
        train = make_target(scenario, "train", make_rng(seed, TRAIN_STREAM))
        test = make_target(scenario, "test", make_rng(seed, TEST_STREAM))
        g = gram(cfg.kernel, train.features)
        test_cross = cross_gram(cfg.kernel, test.features, train.features)
        train_source = source.score(train.features)
        test_source = source.score(test.features)
        for j, loss in enumerate(cfg.losses):
            try:
                coeffs, _ = minimize_coefficients(g, train_source, train.labels, loss, cfg.lam, cfg.solver)
            except ConvergenceError as exc:
                logger.warning("replica=%d theta=%.6f loss=%s failed: %s", replica, theta, loss.name, exc)
                continue
            margins = (test_cross @ coeffs + test_source) * test.labels
            risks[t, j] = float(np.mean(loss_value(loss, margins)))
    return risks


def _run(args):
    return run_replica(*args)


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> np.ndarray:
    """Risks of every replica, shape ``(n_sims, len(theta_grid), len(losses))``.

    Replicas are independent, so the result does not depend on ``threads``.
    """
    jobs = [(cfg, r) for r in range(cfg.n_sims)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run, jobs, chunksize=max(1, len(jobs) // (4 * threads))))
    else:
        results = [_run(job) for job in jobs]
    return np.stack(results)


@dataclass(frozen=True)
class CurveRow:
    theta: float
    loss: str
    median_risk: float
    q25: float
    q75: float
    n_sims: int


def _quartiles(values: np.ndarray) -> np.ndarray:
    # interpolating between two infinite risks yields nan; the quantile is infinite there
    with np.errstate(invalid="ignore"):
        out = np.quantile(values, [0.25, 0.5, 0.75])
    return np.where(np.isnan(out), np.inf, out)


def summarize(cfg: ExperimentConfig, risks: np.ndarray) -> List[CurveRow]:
    """Median and quartiles per (angle, loss) over successful replicas.

    Raises
    ------
    ExperimentError
        If fewer than 90% of replicas succeeded for some cell.
    """
    rows = []
    for t, theta in enumerate(cfg.theta_grid):
        for j, loss in enumerate(cfg.losses):
            values = risks[:, t, j]
            values = np.sort(values[~np.isnan(values)])
            if values.size < MIN_SUCCESS_FRACTION * risks.shape[0]:
                raise ExperimentError(
                    f"theta={theta:.6f} loss={loss.name}: only {values.size}/{risks.shape[0]} replicas succeeded"
                )
            q25, median, q75 = _quartiles(values)
            rows.append(CurveRow(theta, loss.name, float(median), float(q25), float(q75), int(values.size)))
    return rows


def rows_to_csv(rows: Sequence[CurveRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(
            [repr(row.theta), row.loss, repr(row.median_risk), repr(row.q25), repr(row.q75), row.n_sims]
        )
    return buf.getvalue()


def medians_by_cell(rows: Sequence[CurveRow]) -> Dict[Tuple[float, str], float]:
    return {(row.theta, row.loss): row.median_risk for row in rows}
