"""Hypothesis transfer learning in an RKHS with stability certificates."""

from .bounds import BoundContext, StabilityBoundReport, beta_bound, bound_report, gamma_bound, gen_gap_bound
from .data import Dataset, read_csv, write_csv
from .errors import ConfigError, ConvergenceError, DegenerateDatasetError, DomainError
from .htl import empirical_risk, empirical_risk_minus_i, loo_risk, predict_score
from .kernels import KernelKind, KernelSpec, estimate_kappa, gram, resolve_kappa
from .losses import ALL_LOSSES, LossKind, LossSpec, derivative_sup, loss_derivative, loss_value, psi1, psi2
from .rerm import FittedModel, SolverConfig, fit, refit_without, ridge_oracle, rkhs_distance
from .sources import ConstantSource, KernelExpansionSource, LinearSource, SourceHypothesis, scale_score

__version__ = "0.1.0"
