"""Theoretical stability certificates for the transfer predictor.

All quantities are driven by ``alpha = kappa / lam``, the source risk and the
per-loss functions :func:`~htlstab.losses.psi1` / :func:`~htlstab.losses.psi2`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, NamedTuple

import numpy as np

from .data import Dataset, concat
from .errors import ConfigError, DegenerateDatasetError
from .htl import per_sample_losses
from .kernels import KernelSpec
from .losses import LossKind, LossSpec, derivative_sup, exp_moment_constant, loss_value, psi1, psi2
from .sources import SourceHypothesis

# inflation of data-witnessed source-loss maxima
SOURCE_LOSS_INFLATION = 1.10


@dataclass(frozen=True)
class BoundContext:
    """Inputs shared by every certificate.

    Attributes
    ----------
    kappa : float
        Kernel bound ``sup k(x, x')``.
    lam : float
        Regularization strength.
    n : int
        Training sample size.
    r_hs : float
        Source risk on the target distribution (held-out estimate).
    r_hs_hat : float
        Source risk on the training sample.
    m_s : float
        Bound on the per-sample source loss.
    """

    kappa: float
    lam: float
    n: int
    r_hs: float = 0.0
    r_hs_hat: float = 0.0
    m_s: float = 0.0

    def __post_init__(self):
        if not self.kappa > 0 or not self.lam > 0:
            raise ConfigError(f"kappa and lambda must be positive, got {self.kappa}, {self.lam}")
        if self.n < 1:
            raise ConfigError(f"n must be at least 1, got {self.n}")
        for name in ("r_hs", "r_hs_hat", "m_s"):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"{name} must be non-negative, got {getattr(self, name)}")

    @property
    def alpha(self) -> float:
        return self.kappa / self.lam


class LooRadii(NamedTuple):
    radius: np.ndarray
    rho: np.ndarray
    tau: np.ndarray


class ExcessSchedule(NamedTuple):
    lam: float
    label: str


def c_s(ctx: BoundContext) -> float:
    """``exp(2 + 2 alpha M_S / n + 4 alpha^2 M_S^2 / (n - 1))``; needs ``n >= 2``."""
    return exp_moment_constant(ctx.alpha, ctx.m_s, ctx.n)


def radius(ctx: BoundContext) -> float:
    """Sup-norm radius ``sqrt(alpha * R_hat[h_S])`` containing the learned hypothesis."""
    return math.sqrt(ctx.alpha * ctx.r_hs_hat)


def radius_loo(ctx: BoundContext, source_losses) -> LooRadii:
    """Per-index radii for the leave-one-out refits.

    ``radius[i] = sqrt(alpha * R_i)`` with ``R_i`` the source training risk
    without sample ``i``; ``rho[i] = max(radius(ctx), radius[i])``;
    ``tau[i] = sqrt(alpha * (R_i + M_S / n))``.
    """
    losses = np.asarray(source_losses, dtype=float)
    n = losses.size
    if n < 2:
        raise DegenerateDatasetError("leave-one-out radii need at least two samples")
    without = np.maximum((np.sum(losses) - losses) / (n - 1), 0.0)
    r_loo = np.sqrt(ctx.alpha * without)
    rho = np.maximum(radius(ctx), r_loo)
    tau = np.sqrt(ctx.alpha * (without + ctx.m_s / n))
    return LooRadii(r_loo, rho, tau)


def _capped(value: float, cap: float) -> float:
    return value if math.isinf(cap) else min(value, cap)


def beta_bound(loss: LossSpec, ctx: BoundContext) -> float:
    """Hypothesis-stability parameter ``alpha * min(psi1(R), |phi'|_inf^2) / n``."""
    return ctx.alpha * _capped(psi1(loss, ctx.r_hs, ctx), derivative_sup(loss) ** 2) / ctx.n


def gamma_bound(loss: LossSpec, ctx: BoundContext) -> float:
    """Pointwise-hypothesis-stability parameter, :func:`beta_bound` with ``psi2``."""
    return ctx.alpha * _capped(psi2(loss, ctx.r_hs, ctx), derivative_sup(loss) ** 2) / ctx.n


def gen_gap_bound(loss: LossSpec, ctx: BoundContext) -> float:
    """Generalization-gap bound ``alpha * min(psi1 + psi2, 2 |phi'|_inf^2) / n``.

    The gap is also bounded by ``beta + gamma``; when exactly one of the two caps
    binds that sum is the smaller value and is returned instead.
    """
    total = psi1(loss, ctx.r_hs, ctx) + psi2(loss, ctx.r_hs, ctx)
    joint = ctx.alpha * _capped(total, 2.0 * derivative_sup(loss) ** 2) / ctx.n
    return min(joint, beta_bound(loss, ctx) + gamma_bound(loss, ctx))


def excess_lambda_schedule(loss: LossSpec, n: int, r_hs: float, m_s: float) -> ExcessSchedule:
    """Regularization level balancing the excess-risk bound, with its rate label.

    Schedules whose formula degenerates at ``r_hs = 0`` fall back to the
    unconditional choice of the same loss family.
    """
    if n < 2:
        raise ConfigError(f"schedule needs n >= 2, got {n}")
    if r_hs < 0 or m_s < 0:
        raise ConfigError("source risk and M_S must be non-negative")
    root_n = math.sqrt(n)
    log_n = math.log(n)
    kind = loss.kind
    if kind in (LossKind.MSE, LossKind.SQUARED_HINGE):
        if r_hs > 0:
            return ExcessSchedule(math.sqrt(r_hs / root_n), "sqrt(R/sqrt n)")
        return ExcessSchedule(1.0 / root_n, "1/√n")
    if kind is LossKind.EXPONENTIAL:
        if r_hs > 0 and n >= m_s**2 * log_n**2 / r_hs:
            return ExcessSchedule(4.0 * min(math.sqrt(r_hs), 1.0) / log_n, "(√R ∧1)/ln n")
        return ExcessSchedule(log_n**2 / root_n, "ln²n/√n")
    improved = n >= 9 and 0 < r_hs <= 1.0 / root_n
    if improved and kind is LossKind.SOFTPLUS:
        improved = 1.0 / loss.s <= -math.log(r_hs)
    if improved:
        return ExcessSchedule(8.0 / math.sqrt(-n * math.log(r_hs)), "1/√(−n ln R)")
    return ExcessSchedule(1.0 / root_n, "1/√n")


def source_loss_bound(loss: LossSpec, source: SourceHypothesis, *samples: Dataset) -> float:
    """Bound ``M_S`` on the per-sample source loss.

    With a sup-norm hint and a loss that decreases in the margin up to its
    minimum, ``phi(-sup|h_S|)`` is exact. Otherwise the pooled sample maximum
    is inflated by ``SOURCE_LOSS_INFLATION``.
    """
    hint = source.sup_norm_hint
    if hint is not None and loss.kind is not LossKind.EXPONENTIAL:
        return float(loss_value(loss, -float(hint)))
    if not samples:
        raise ConfigError("M_S needs a sup-norm hint or a sample")
    pooled = concat(*samples)
    return SOURCE_LOSS_INFLATION * float(np.max(per_sample_losses(source, pooled, loss)))


@dataclass
class StabilityBoundReport:
    """Every certificate for one loss; serializes to a flat record."""

    loss: str
    beta: float
    gamma: float
    gen_gap: float
    c_s: float
    radius: float
    radius_loo: List[float] = field(repr=False)
    rho_loo: List[float] = field(repr=False)
    tau_loo: List[float] = field(repr=False)
    excess_lambda: float
    excess_rate_label: str
    kappa: float
    lam: float
    alpha: float
    n: int
    r_hs: float
    r_hs_hat: float
    m_s: float

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["lambda"] = out.pop("lam")
        return out


def bound_report(
    loss: LossSpec,
    kernel: KernelSpec,
    lam: float,
    source: SourceHypothesis,
    train: Dataset,
    held_out: Dataset,
) -> StabilityBoundReport:
    """Evaluate all certificates for ``loss``.

    The source risk is estimated on ``held_out``; ``kernel.kappa`` must be set.
    """
    if kernel.kappa is None:
        raise ConfigError("kernel bound kappa must be resolved before computing certificates")
    if train.n < 2:
        raise DegenerateDatasetError("certificates need at least two training points")
    train_losses = per_sample_losses(source, train, loss)
    ctx = BoundContext(
        kappa=kernel.kappa,
        lam=float(lam),
        n=train.n,
        r_hs=float(np.mean(per_sample_losses(source, held_out, loss))),
        r_hs_hat=float(np.mean(train_losses)),
        m_s=source_loss_bound(loss, source, train, held_out),
    )
    loo = radius_loo(ctx, train_losses)
    schedule = excess_lambda_schedule(loss, ctx.n, ctx.r_hs, ctx.m_s)
    return StabilityBoundReport(
        loss=loss.name,
        beta=beta_bound(loss, ctx),
        gamma=gamma_bound(loss, ctx),
        gen_gap=gen_gap_bound(loss, ctx),
        c_s=c_s(ctx),
        radius=radius(ctx),
        radius_loo=loo.radius.tolist(),
        rho_loo=loo.rho.tolist(),
        tau_loo=loo.tau.tolist(),
        excess_lambda=schedule.lam,
        excess_rate_label=schedule.label,
        kappa=ctx.kappa,
        lam=ctx.lam,
        alpha=ctx.alpha,
        n=ctx.n,
        r_hs=ctx.r_hs,
        r_hs_hat=ctx.r_hs_hat,
        m_s=ctx.m_s,
    )
