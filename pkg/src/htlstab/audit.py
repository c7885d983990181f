"""Empirical stability measurements, paired with the theoretical certificates.

Every leave-one-out refit of the training sample is compared with the full fit:

* loss changes at fresh points (hypothesis stability) and at the removed point
  (pointwise hypothesis stability);
* the RKHS distance between the two hypotheses against the deterministic bound
  ``sqrt(k(x_i, x_i)) * |phi'(margin_i)| / (lam * n)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np

from .data import Dataset
from .datagen import TEST_STREAM, TRAIN_STREAM, ScenarioConfig, make_rng, make_target
from .errors import DegenerateDatasetError
from .htl import empirical_risk, loo_losses, per_sample_losses
from .kernels import KernelSpec, cross_gram
from .losses import LossSpec, loss_derivative, loss_value
from .rerm import FittedModel, SolverConfig, fit, refit_without, rkhs_distance
from .sources import SourceHypothesis

# absolute slack for inequalities checked on numerically converged solutions
SOLVER_SLACK = 1e-6


@dataclass
class AuditReport:
    """Measured stability quantities for one training sample.

    ``uniform_witnessed_max`` is the largest loss change seen over the supplied
    evaluation points; it is a witness, not a certificate of uniform stability.
    """

    emp_hypothesis_stability: float
    emp_pointwise_stability: float
    emp_gen_gap: float
    loo_risk: float
    test_risk: float
    loo_gap: float
    lemma_a4_violations: int
    uniform_witnessed_max: float
    delta_ell_mean: np.ndarray = field(repr=False)
    delta_pointwise: np.ndarray = field(repr=False)
    rkhs_dev: np.ndarray = field(repr=False)
    lemma_a4_rhs: np.ndarray = field(repr=False)

    @property
    def violated(self) -> np.ndarray:
        return self.rkhs_dev > self.lemma_a4_rhs + SOLVER_SLACK

    def summary(self) -> dict:
        return {
            "emp_hypothesis_stability": self.emp_hypothesis_stability,
            "emp_pointwise_stability": self.emp_pointwise_stability,
            "emp_gen_gap": self.emp_gen_gap,
            "loo_risk": self.loo_risk,
            "test_risk": self.test_risk,
            "loo_gap": self.loo_gap,
            "lemma_a4_violations": self.lemma_a4_violations,
            "uniform_witnessed_max": self.uniform_witnessed_max,
        }

    def write_per_index_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["i", "delta_ell_mean", "rkhs_dev", "lemma_a4_rhs", "violated"])
            for i, row in enumerate(zip(self.delta_ell_mean, self.rkhs_dev, self.lemma_a4_rhs, self.violated)):
                writer.writerow([i, repr(float(row[0])), repr(float(row[1])), repr(float(row[2])), int(row[3])])


def deviation_bound(model: FittedModel) -> np.ndarray:
    """Per-index bound on ``||h - h_without_i||_k`` for a fitted model."""
    slopes = np.abs(loss_derivative(model.loss, model.train_margins()))
    return np.sqrt(np.clip(np.diag(model.gram), 0.0, None)) * slopes * model.weight / model.lam


def audit_stability(
    train: Dataset,
    fresh: Dataset,
    loss: LossSpec,
    kernel: KernelSpec,
    lam: float,
    source: SourceHypothesis,
    cfg: Optional[SolverConfig] = None,
) -> AuditReport:
    """Fit once, refit without each training point, and measure loss changes.

    ``fresh`` supplies the evaluation points for hypothesis stability and the
    held-out risk.

    Raises
    ------
    ConvergenceError
        From the full fit or any fold (with ``.fold`` set).
    """
    if train.n < 2:
        raise DegenerateDatasetError("stability audit needs at least two training points")
    model = fit(train, loss, kernel, lam, source, cfg)
    n = train.n
    fresh_cross = cross_gram(kernel, fresh.features, train.features)
    fresh_source = source.score(fresh.features)
    full_fresh = loss_value(loss, (fresh_cross @ model.coeffs + fresh_source) * fresh.labels)
    full_train = loss_value(loss, model.train_margins())

    delta_mean = np.empty(n)
    delta_point = np.empty(n)
    deviations = np.empty(n)
    loo = np.empty(n)
    witnessed = 0.0
    for i in range(n):
        fold = refit_without(model, i, cfg)
        keep = np.arange(n) != i
        fold_fresh = loss_value(loss, (fresh_cross[:, keep] @ fold.coeffs + fresh_source) * fresh.labels)
        fold_score_i = model.gram[i, keep] @ fold.coeffs + model.source_scores[i]
        loo[i] = loss_value(loss, fold_score_i * train.labels[i])
        delta = np.abs(full_fresh - fold_fresh)
        delta_mean[i] = float(np.mean(delta))
        delta_point[i] = abs(full_train[i] - loo[i])
        witnessed = max(witnessed, float(np.max(delta)), delta_point[i])
        deviations[i] = rkhs_distance(model, fold)

    rhs = deviation_bound(model)
    test_risk = float(np.mean(full_fresh))
    loo_risk = float(np.mean(loo))
    return AuditReport(
        emp_hypothesis_stability=float(np.mean(delta_mean)),
        emp_pointwise_stability=float(np.mean(delta_point)),
        emp_gen_gap=float(np.mean(full_train)) - test_risk,
        loo_risk=loo_risk,
        test_risk=test_risk,
        loo_gap=abs(loo_risk - test_risk),
        lemma_a4_violations=int(np.sum(deviations > rhs + SOLVER_SLACK)),
        uniform_witnessed_max=witnessed,
        delta_ell_mean=delta_mean,
        delta_pointwise=delta_point,
        rkhs_dev=deviations,
        lemma_a4_rhs=rhs,
    )


class LooAudit(NamedTuple):
    loo_risk: float
    test_risk: float
    gap: float


def audit_loo(
    train: Dataset,
    test: Dataset,
    loss: LossSpec,
    kernel: KernelSpec,
    lam: float,
    source: SourceHypothesis,
    cfg: Optional[SolverConfig] = None,
) -> LooAudit:
    """Leave-one-out estimate next to the held-out risk of the full fit."""
    model = fit(train, loss, kernel, lam, source, cfg)
    loo = float(np.mean(loo_losses(model, cfg)))
    test_risk = empirical_risk(model, test, loss)
    return LooAudit(loo, test_risk, abs(loo - test_risk))


class GapEstimate(NamedTuple):
    mean: float
    stderr: float
    values: np.ndarray


def audit_gen_gap(
    scenario: ScenarioConfig,
    loss: LossSpec,
    kernel: KernelSpec,
    lam: float,
    source: SourceHypothesis,
    replicas: int,
    test_size: int,
    seed: int,
    cfg: Optional[SolverConfig] = None,
) -> GapEstimate:
    """Monte Carlo estimate of ``E[R_hat - R]`` over fresh target draws.

    Replica ``r`` draws its target sample from seed ``seed + r``, so the first
    replicas of two runs with the same seed coincide.
    """
    if replicas < 1:
        raise ValueError("replicas must be at least 1")
    gaps = np.empty(replicas)
    for r in range(replicas):
        train = make_target(scenario, "train", make_rng(seed + r, TRAIN_STREAM))
        test = make_target(replace(scenario, n_test=test_size), "test", make_rng(seed + r, TEST_STREAM))
        model = fit(train, loss, kernel, lam, source, cfg)
        gaps[r] = float(np.mean(per_sample_losses(model, train, loss))) - empirical_risk(model, test, loss)
    stderr = float(np.std(gaps, ddof=1) / math.sqrt(replicas)) if replicas > 1 else math.inf
    return GapEstimate(float(np.mean(gaps)), stderr, gaps)
