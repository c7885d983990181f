"""Regularized risk minimization with a frozen source offset.

The hypothesis is parameterized by representer coefficients,
``h(x) = sum_j a_j k(x_j, x)``, and the solver minimizes

    F(a) = w * sum_i phi(((G a)_i + s_i) y_i) + lam * a' G a

with ``w = 1/n``, ``s_i = h_S(x_i)``. Convergence is measured on the
preconditioned residual ``r = w * y * phi'(m) + 2 lam a``; ``grad F = G r`` and
``r = 0`` is the exact stationarity condition, independent of the conditioning
of ``G``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .data import Dataset
from .errors import ConfigError, ConvergenceError, DegenerateDatasetError
from .kernels import KernelSpec, cross_gram, gram as build_gram
from .losses import LossKind, LossSpec, loss_derivative, loss_value
from .sources import LinearSource, SourceHypothesis

logger = logging.getLogger(__name__)

# relative slack on the sufficient-decrease test, absorbs roundoff near the optimum
ROUNDOFF = 1e-14
STEP_MIN, STEP_MAX = 1e-12, 1e12
# largest change of any training score allowed in a trial step
MAX_SCORE_STEP = 50.0


@dataclass(frozen=True)
class SolverConfig:
    """Gradient-descent settings.

    Attributes
    ----------
    max_iters : int
        Iteration budget before :class:`ConvergenceError` is raised.
    grad_tol : float
        Tolerance on the Euclidean norm of the preconditioned residual.
    shrink : float
        Backtracking factor in (0, 1).
    sufficient_decrease : float
        Armijo constant in (0, 1).
    max_backtracks : int
        Step halvings allowed per iteration.
    """

    max_iters: int = 5000
    grad_tol: float = 1e-8
    shrink: float = 0.5
    sufficient_decrease: float = 1e-4
    max_backtracks: int = 80

    def __post_init__(self):
        if self.max_iters < 1 or self.max_backtracks < 1:
            raise ConfigError("max_iters and max_backtracks must be positive")
        if not self.grad_tol > 0:
            raise ConfigError(f"grad_tol must be positive, got {self.grad_tol}")
        if not 0 < self.shrink < 1 or not 0 < self.sufficient_decrease < 1:
            raise ConfigError("shrink and sufficient_decrease must lie in (0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj) -> "SolverConfig":
        obj = obj or {}
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown solver settings: {sorted(unknown)}")
        try:
            return cls(**obj)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class SolverStats:
    iterations: int
    residual: float
    objective: float


def _check_shapes(coeffs, gram, source_scores, labels):
    n = np.shape(coeffs)[0]
    if np.shape(gram) != (n, n) or np.shape(source_scores) != (n,) or np.shape(labels) != (n,):
        raise ValueError(
            f"dimension mismatch: coeffs {np.shape(coeffs)}, gram {np.shape(gram)}, "
            f"source {np.shape(source_scores)}, labels {np.shape(labels)}"
        )


def _weight(n, weight):
    return 1.0 / n if weight is None else float(weight)


def objective(coeffs, gram, source_scores, labels, loss: LossSpec, lam: float, weight=None) -> float:
    """``F(a)``; ``weight`` defaults to ``1/n``."""
    a = np.asarray(coeffs, dtype=float)
    _check_shapes(a, gram, source_scores, labels)
    ga = gram @ a
    margins = (ga + source_scores) * labels
    return float(_weight(a.size, weight) * np.sum(loss_value(loss, margins)) + lam * (a @ ga))


def residual(coeffs, gram, source_scores, labels, loss: LossSpec, lam: float, weight=None) -> np.ndarray:
    """Preconditioned gradient ``w * y * phi'(m) + 2 lam a``."""
    a = np.asarray(coeffs, dtype=float)
    _check_shapes(a, gram, source_scores, labels)
    margins = (gram @ a + source_scores) * labels
    return _weight(a.size, weight) * labels * loss_derivative(loss, margins) + 2.0 * lam * a


def gradient(coeffs, gram, source_scores, labels, loss: LossSpec, lam: float, weight=None) -> np.ndarray:
    """``grad F(a) = G r(a)``."""
    return gram @ residual(coeffs, gram, source_scores, labels, loss, lam, weight)


def minimize_coefficients(gram, source_scores, labels, loss, lam, cfg=None, init=None, weight=None):
    """Minimize ``F`` by preconditioned gradient descent.

    The search direction is ``-r``; it is a descent direction because
    ``grad F . (-r) = -r' G r``. Trial steps are Barzilai-Borwein steps in the
    ``G`` metric, safeguarded by Armijo backtracking.

    Returns
    -------
    coeffs : ndarray
    stats : SolverStats

    Raises
    ------
    ConvergenceError
        If the residual is still above ``cfg.grad_tol`` after ``cfg.max_iters``.
    """
    cfg = cfg or SolverConfig()
    if not lam > 0:
        raise ConfigError(f"lambda must be positive, got {lam}")
    gram = np.asarray(gram, dtype=float)
    source_scores = np.asarray(source_scores, dtype=float)
    labels = np.asarray(labels, dtype=float)
    n = labels.size
    a = np.zeros(n) if init is None else np.array(init, dtype=float)
    _check_shapes(a, gram, source_scores, labels)
    w = _weight(n, weight)

    def evaluate(a, ga):
        m = (ga + source_scores) * labels
        f = w * np.sum(loss_value(loss, m)) + lam * (a @ ga)
        r = w * labels * loss_derivative(loss, m) + 2.0 * lam * a
        return float(f), r

    ga = gram @ a
    f, r = evaluate(a, ga)
    res = float(np.linalg.norm(r))
    step = 1.0 / (2.0 * lam)
    for it in range(cfg.max_iters):
        if res <= cfg.grad_tol:
            return a, SolverStats(it, res, f)
        gd = -(gram @ r)
        slope = float(r @ gd)
        slack = ROUNDOFF * max(1.0, abs(f))
        t = min(step, MAX_SCORE_STEP / max(float(np.max(np.abs(gd))), 1e-300))
        for _ in range(cfg.max_backtracks):
            a_new = a - t * r
            ga_new = ga + t * gd
            f_new, r_new = evaluate(a_new, ga_new)
            if f_new <= f + cfg.sufficient_decrease * t * slope + slack:
                break
            t *= cfg.shrink
        else:
            raise ConvergenceError(
                f"line search failed at iteration {it} (residual {res:.3e})", residual=res
            )
        # Barzilai-Borwein step in the G metric: s'Gs / s'G(dr); bounded by 1/(2 lam)
        s = a_new - a
        gs = ga_new - ga
        curvature = float(gs @ (r_new - r))
        sgs = float(s @ gs)
        step = sgs / curvature if sgs > 0 and curvature > 0 else 1.0 / (2.0 * lam)
        step = min(max(step, STEP_MIN), STEP_MAX)
        a, ga, f, r = a_new, ga_new, f_new, r_new
        res = float(np.linalg.norm(r))
        logger.debug("iteration=%d objective=%.17g residual=%.6e step=%.3e", it + 1, f, res, t)
    if res <= cfg.grad_tol:
        return a, SolverStats(cfg.max_iters, res, f)
    raise ConvergenceError(
        f"no convergence after {cfg.max_iters} iterations (residual {res:.3e} > {cfg.grad_tol:g})",
        residual=res,
    )


@dataclass(frozen=True, eq=False)
class FittedModel:
    """The transfer predictor ``x -> h(x) + h_S(x)`` with ``h`` in representer form.

    ``weight`` is the per-sample factor of the empirical term used in the fit;
    ``removed`` is the dropped index for a leave-one-out refit.
    """

    coeffs: np.ndarray
    train: Dataset
    kernel: KernelSpec
    lam: float
    loss: LossSpec
    source: SourceHypothesis
    stats: SolverStats
    gram: np.ndarray = field(repr=False)
    source_scores: np.ndarray = field(repr=False)
    weight: float = 0.0
    removed: Optional[int] = None

    @property
    def train_features(self) -> np.ndarray:
        return self.train.features

    @property
    def n(self) -> int:
        return self.train.n

    def rkhs_norm(self) -> float:
        return math.sqrt(max(float(self.coeffs @ self.gram @ self.coeffs), 0.0))

    def hypothesis(self, x) -> np.ndarray:
        """``h(x)``, the learned part only."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.train.d:
            raise ValueError(f"model expects dimension {self.train.d}, got {x.shape[1]}")
        return cross_gram(self.kernel, x, self.train.features) @ self.coeffs

    def predict(self, x) -> np.ndarray:
        """Scores ``h(x) + h_S(x)`` for each row of ``x``."""
        return self.hypothesis(x) + self.source.score(np.atleast_2d(np.asarray(x, dtype=float)))

    def train_scores(self) -> np.ndarray:
        return self.gram @ self.coeffs + self.source_scores

    def train_margins(self) -> np.ndarray:
        return self.train_scores() * self.train.labels

    def objective(self) -> float:
        return objective(
            self.coeffs, self.gram, self.source_scores, self.train.labels, self.loss, self.lam, self.weight
        )

    def residual(self) -> np.ndarray:
        return residual(
            self.coeffs, self.gram, self.source_scores, self.train.labels, self.loss, self.lam, self.weight
        )


def fit(
    train: Dataset,
    loss: LossSpec,
    kernel: KernelSpec,
    lam: float,
    source: SourceHypothesis,
    cfg: Optional[SolverConfig] = None,
    gram: Optional[np.ndarray] = None,
) -> FittedModel:
    """Fit the transfer predictor on ``train``.

    ``gram`` may be passed to reuse a precomputed Gram matrix of the training
    features.
    """
    g = build_gram(kernel, train.features) if gram is None else np.asarray(gram, dtype=float)
    s = source.score(train.features)
    coeffs, stats = minimize_coefficients(g, s, train.labels, loss, lam, cfg)
    return FittedModel(coeffs, train, kernel, float(lam), loss, source, stats, g, s, 1.0 / train.n)


def refit_without(model: FittedModel, i: int, cfg: Optional[SolverConfig] = None) -> FittedModel:
    """Refit with training point ``i`` removed, warm-started from ``model``.

    The remaining per-sample losses keep the full-sample factor ``1/n``, so the
    refit differs from the full problem only by the dropped loss term.
    """
    n = model.n
    if n < 2:
        raise DegenerateDatasetError("leave-one-out needs at least two training points")
    if not 0 <= i < n:
        raise IndexError(f"index {i} out of range for {n} points")
    keep = np.arange(n) != i
    g = model.gram[np.ix_(keep, keep)]
    s = model.source_scores[keep]
    train = model.train.without(i)
    try:
        coeffs, stats = minimize_coefficients(
            g, s, train.labels, model.loss, model.lam, cfg, init=model.coeffs[keep], weight=model.weight
        )
    except ConvergenceError as exc:
        raise ConvergenceError(f"fold {i}: {exc}", residual=exc.residual, fold=i) from None
    return FittedModel(
        coeffs, train, model.kernel, model.lam, model.loss, model.source, stats, g, s, model.weight, i
    )


def rkhs_distance(model_a: FittedModel, model_b: FittedModel) -> float:
    """``||h_a - h_b||_k``.

    A leave-one-out refit is embedded in its parent's support with a zero
    coefficient at the removed index; other pairs use the cross Gram matrix.
    """
    if model_a.kernel != model_b.kernel:
        raise ConfigError("rkhs_distance needs models built on the same kernel")
    a, b = model_a, model_b
    if b.n > a.n:
        a, b = b, a
    if a.n == b.n and np.array_equal(a.train.features, b.train.features):
        diff = a.coeffs - b.coeffs
        return math.sqrt(max(float(diff @ a.gram @ diff), 0.0))
    if b.removed is not None and b.n == a.n - 1:
        keep = np.arange(a.n) != b.removed
        if np.array_equal(a.train.features[keep], b.train.features):
            embedded = np.zeros(a.n)
            embedded[keep] = b.coeffs
            diff = a.coeffs - embedded
            return math.sqrt(max(float(diff @ a.gram @ diff), 0.0))
    cross = cross_gram(a.kernel, a.train.features, b.train.features)
    sq = a.coeffs @ a.gram @ a.coeffs - 2.0 * a.coeffs @ cross @ b.coeffs + b.coeffs @ b.gram @ b.coeffs
    return math.sqrt(max(float(sq), 0.0))


def ridge_oracle(train: Dataset, lam: float, source_scores, weight: Optional[float] = None) -> np.ndarray:
    """Primal minimizer ``u`` of ``w |X u + s - y|^2 + lam |u|^2`` with ``w = 1/n`` by default.

    Solves ``(w X'X + lam I) u = w X'(y - s)``; with a linear kernel and squared
    loss the fitted hypothesis equals ``x -> u . x``.
    """
    if not lam > 0:
        raise ConfigError(f"lambda must be positive, got {lam}")
    x = train.features
    w = _weight(train.n, weight)
    rhs = w * x.T @ (train.labels - np.asarray(source_scores, dtype=float))
    return np.linalg.solve(w * x.T @ x + lam * np.eye(train.d), rhs)


def fit_linear_primal(
    train: Dataset,
    loss: LossSpec = LossSpec(LossKind.SQUARED_HINGE),
    lam: float = 1e-3,
    tol: float = 1e-10,
) -> LinearSource:
    """Train a linear scorer ``x -> w . x`` (no intercept) by primal RERM.

    Minimizes ``(1/n) sum phi(y_i w . x_i) + lam |w|^2`` with L-BFGS. Used to
    produce source hypotheses from source data.
    """
    x, y = train.features, train.labels
    n = train.n

    def fun(w):
        m = y * (x @ w)
        value = np.sum(loss_value(loss, m)) / n + lam * (w @ w)
        grad = x.T @ (y * loss_derivative(loss, m)) / n + 2.0 * lam * w
        return value, grad

    result = minimize(fun, np.zeros(train.d), jac=True, method="L-BFGS-B", options={"gtol": tol, "maxiter": 10000})
    if not np.all(np.isfinite(result.x)):
        raise ConvergenceError("source trainer produced non-finite weights")
    return LinearSource(result.x)
