"""Risk estimators for the transfer predictor: training, held-out and leave-one-out."""

from __future__ import annotations

from typing import Callable, Optional, Union

import numpy as np

from .data import Dataset
from .errors import DegenerateDatasetError
from .kernels import KernelSpec
from .losses import LossSpec, loss_value
from .rerm import FittedModel, SolverConfig, fit, refit_without
from .sources import SourceHypothesis

Scorer = Union[FittedModel, SourceHypothesis, Callable[[np.ndarray], np.ndarray]]


def _scores(scorer: Scorer, x: np.ndarray) -> np.ndarray:
    if isinstance(scorer, FittedModel):
        return scorer.predict(x)
    if isinstance(scorer, SourceHypothesis):
        return scorer.score(x)
    return np.asarray(scorer(x), dtype=float)


def predict_score(model: FittedModel, x) -> float:
    """Score ``h(x) + h_S(x)`` of a single point ``x`` of dimension ``d``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != model.train.d:
        raise ValueError(f"expected a point of dimension {model.train.d}, got shape {x.shape}")
    return float(model.predict(x[None, :])[0])


def per_sample_losses(scorer: Scorer, data: Dataset, loss: LossSpec) -> np.ndarray:
    """``phi(score(x_i) * y_i)`` for every sample."""
    return np.asarray(loss_value(loss, _scores(scorer, data.features) * data.labels), dtype=float)


def empirical_risk(scorer: Scorer, data: Dataset, loss: LossSpec) -> float:
    """Mean loss of ``scorer`` over ``data``."""
    return float(np.mean(per_sample_losses(scorer, data, loss)))


def risk_without(losses, i: int) -> float:
    """Mean of ``losses`` with entry ``i`` left out."""
    losses = np.asarray(losses, dtype=float)
    n = losses.size
    if n < 2:
        raise DegenerateDatasetError("leave-one-out risk needs at least two samples")
    if not 0 <= i < n:
        raise IndexError(f"index {i} out of range for {n} samples")
    return float(np.mean(np.delete(losses, i)))


def empirical_risk_minus_i(scorer: Scorer, data: Dataset, loss: LossSpec, i: int) -> float:
    """Mean loss over ``data`` without sample ``i``."""
    if data.n < 2:
        raise DegenerateDatasetError("leave-one-out risk needs at least two samples")
    return risk_without(per_sample_losses(scorer, data, loss), i)


def loo_losses(model: FittedModel, cfg: Optional[SolverConfig] = None) -> np.ndarray:
    """Loss of each leave-one-out refit at its held-out point."""
    n = model.n
    if n < 2:
        raise DegenerateDatasetError("leave-one-out needs at least two training points")
    x, y = model.train.features, model.train.labels
    out = np.empty(n)
    for i in range(n):
        fold = refit_without(model, i, cfg)
        out[i] = loss_value(model.loss, fold.predict(x[i : i + 1])[0] * y[i])
    return out


def loo_risk(
    train: Dataset,
    loss: LossSpec,
    kernel: KernelSpec,
    lam: float,
    source: SourceHypothesis,
    cfg: Optional[SolverConfig] = None,
) -> float:
    """Leave-one-out estimate: mean over ``i`` of the refit-without-``i`` loss at ``z_i``.

    Raises
    ------
    ConvergenceError
        From any fold, with the fold index in ``.fold``.
    """
    if train.n < 2:
        raise DegenerateDatasetError("leave-one-out needs at least two training points")
    model = fit(train, loss, kernel, lam, source, cfg)
    return float(np.mean(loo_losses(model, cfg)))
