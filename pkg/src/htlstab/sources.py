"""Frozen source hypotheses ``h_S`` and their serialization.

Three closed forms are supported (linear weights, a kernel expansion and a
constant) plus :class:`ScaledSource`, the squashed score returned by
:func:`scale_score`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError
from .kernels import KernelSpec, cross_gram

# tanh(SQUASH) = 0.99: the source sup-norm is mapped strictly inside the target interval
SQUASH = math.atanh(0.99)


def _points(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[None, :] if x.ndim == 1 else x


class SourceHypothesis:
    """Base class; subclasses implement :meth:`score` on an ``(m, d)`` matrix."""

    sup_norm_hint: Optional[float] = None

    def score(self, x) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x) -> np.ndarray:
        return self.score(x)

    def sup_norm(self, *samples) -> float:
        """``sup |h_S|``: the hint if set, else the max over the pooled ``samples``."""
        if self.sup_norm_hint is not None:
            return float(self.sup_norm_hint)
        if not samples:
            raise ConfigError("source sup-norm is unknown and no sample was given to estimate it")
        return float(max(np.max(np.abs(self.score(s))) for s in samples))

    def to_dict(self) -> dict:
        raise NotImplementedError

    def _hint_dict(self) -> dict:
        return {} if self.sup_norm_hint is None else {"sup_norm_hint": self.sup_norm_hint}


@dataclass(frozen=True, eq=False)
class LinearSource(SourceHypothesis):
    """``h_S(x) = w . x``."""

    weights: np.ndarray
    sup_norm_hint: Optional[float] = None

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        if w.size == 0 or not np.all(np.isfinite(w)):
            raise ConfigError("linear source needs a finite, non-empty weight vector")
        object.__setattr__(self, "weights", w)

    def score(self, x) -> np.ndarray:
        x = _points(x)
        if x.shape[1] != self.weights.size:
            raise ValueError(f"source expects dimension {self.weights.size}, got {x.shape[1]}")
        return x @ self.weights

    def to_dict(self) -> dict:
        return {"form": "linear", "w": self.weights.tolist(), **self._hint_dict()}


@dataclass(frozen=True, eq=False)
class ConstantSource(SourceHypothesis):
    """``h_S(x) = c``."""

    value: float
    sup_norm_hint: Optional[float] = None

    def score(self, x) -> np.ndarray:
        return np.full(_points(x).shape[0], float(self.value))

    def sup_norm(self, *samples) -> float:
        return abs(float(self.value)) if self.sup_norm_hint is None else float(self.sup_norm_hint)

    def to_dict(self) -> dict:
        return {"form": "constant", "c": float(self.value), **self._hint_dict()}


@dataclass(frozen=True, eq=False)
class KernelExpansionSource(SourceHypothesis):
    """``h_S(x) = sum_j c_j k(z_j, x)`` over a fixed support ``z``."""

    support: np.ndarray
    coeffs: np.ndarray
    kernel: KernelSpec
    sup_norm_hint: Optional[float] = None

    def __post_init__(self):
        z = np.array(self.support, dtype=float)
        z = z[:, None] if z.ndim == 1 else z
        c = np.array(self.coeffs, dtype=float).ravel()
        if z.shape[0] != c.size or c.size == 0:
            raise ConfigError(f"support has {z.shape[0]} points but {c.size} coefficients")
        object.__setattr__(self, "support", z)
        object.__setattr__(self, "coeffs", c)

    def score(self, x) -> np.ndarray:
        return cross_gram(self.kernel, _points(x), self.support) @ self.coeffs

    def to_dict(self) -> dict:
        return {
            "form": "kernel_expansion",
            "support": self.support.tolist(),
            "coeffs": self.coeffs.tolist(),
            "kernel": self.kernel.to_dict(),
            **self._hint_dict(),
        }


@dataclass(frozen=True, eq=False)
class ScaledSource(SourceHypothesis):
    """``bound * tanh(inner(x) / inner_sup * atanh(0.99))``."""

    inner: SourceHypothesis
    target_bound: float
    inner_sup: float

    @property
    def sup_norm_hint(self) -> float:
        return float(self.target_bound)

    def score(self, x) -> np.ndarray:
        raw = self.inner.score(x)
        if self.inner_sup == 0:
            return np.zeros_like(raw)
        return self.target_bound * np.tanh(raw / self.inner_sup * SQUASH)

    def to_dict(self) -> dict:
        return {
            "form": "scaled",
            "inner": self.inner.to_dict(),
            "target_bound": float(self.target_bound),
            "inner_sup": float(self.inner_sup),
        }


def scale_score(source: SourceHypothesis, target_bound: float, *samples) -> ScaledSource:
    """Squash the source score into ``(-target_bound, target_bound)``.

    The map is strictly increasing and odd, so signs and rankings are kept. A
    point where ``|h_S|`` reaches its sup-norm maps to ``+-0.99 * target_bound``.

    Raises
    ------
    ConfigError
        If ``target_bound <= 0`` or the sup-norm is neither hinted nor estimable.
    """
    if not target_bound > 0:
        raise ConfigError(f"target_bound must be positive, got {target_bound}")
    return ScaledSource(source, float(target_bound), source.sup_norm(*samples))


def source_from_dict(obj, base_dir=None) -> SourceHypothesis:
    """Inverse of ``to_dict``; a string is taken as a path to a JSON file."""
    if isinstance(obj, (str, Path)):
        path = Path(obj)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        with open(path) as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(obj, dict) or "form" not in obj:
        raise ConfigError(f"source entry must be a mapping with 'form': {obj!r}")
    hint = obj.get("sup_norm_hint")
    hint = None if hint is None else float(hint)
    if hint is not None and hint < 0:
        raise ConfigError("sup_norm_hint must be non-negative")
    form = obj["form"]
    try:
        if form == "linear":
            return LinearSource(obj["w"], hint)
        if form == "constant":
            return ConstantSource(float(obj["c"]), hint)
        if form == "kernel_expansion":
            return KernelExpansionSource(
                obj["support"], obj["coeffs"], KernelSpec.from_dict(obj["kernel"]), hint
            )
        if form == "scaled":
            return ScaledSource(
                source_from_dict(obj["inner"], base_dir), float(obj["target_bound"]), float(obj["inner_sup"])
            )
    except KeyError as exc:
        raise ConfigError(f"source form {form!r} is missing field {exc}") from None
    raise ConfigError(f"unknown source form {form!r}")
