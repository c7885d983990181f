"""Multivariate Student-t sampling and the rotating-target transfer scenario.

Random streams come from numpy's counter-based ``Philox`` generator. A stream
is identified by ``SeedSequence([seed, *keys])``; replica ``r`` of a run with
base seed ``b`` uses ``seed = b + r``, and the key names the purpose of the
stream (:data:`SOURCE_STREAM`, :data:`TRAIN_STREAM`, :data:`TEST_STREAM`).
The target streams do not depend on the rotation angle, so every angle sees
the same underlying noise.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .data import Dataset
from .errors import ConfigError

SOURCE_STREAM, TRAIN_STREAM, TEST_STREAM = 0, 1, 2
SPLIT_STREAMS = {"train": TRAIN_STREAM, "test": TEST_STREAM}

DEFAULT_DOF = 2.5
SOURCE_SCALE = 3.0


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Philox generator for the stream ``(seed, *keys)``."""
    if seed < 0 or any(k < 0 for k in keys):
        raise ConfigError(f"seeds and stream keys must be non-negative, got {seed}, {keys}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, keys)])))


@dataclass(frozen=True, eq=False)
class TComponent:
    """Multivariate Student-t law with location ``mean``, scale matrix ``scale`` and ``dof``."""

    mean: np.ndarray
    scale: np.ndarray
    dof: float = DEFAULT_DOF

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).ravel()
        scale = np.array(self.scale, dtype=float)
        if scale.shape != (mean.size, mean.size):
            raise ValueError(f"scale must be {mean.size}x{mean.size}, got {scale.shape}")
        if not np.allclose(scale, scale.T):
            raise ValueError("scale matrix must be symmetric")
        if not self.dof > 0:
            raise ValueError(f"dof must be positive, got {self.dof}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "scale", scale)


def sample_t(component: TComponent, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` points ``mean + z * sqrt(dof / w)``.

    ``z ~ N(0, scale)`` through a Cholesky factor and ``w ~ chi2(dof)``.

    Raises
    ------
    numpy.linalg.LinAlgError
        If the scale matrix is not positive definite.
    """
    if count < 1:
        raise ValueError(f"count must be positive, got {count}")
    chol = np.linalg.cholesky(component.scale)
    z = rng.standard_normal((count, component.mean.size)) @ chol.T
    w = rng.chisquare(component.dof, size=count)
    return component.mean + z * np.sqrt(component.dof / w)[:, None]


@dataclass(frozen=True)
class ScenarioConfig:
    """Two-class source/target geometry.

    The source classes sit at ``(+-r, 0)``; the target classes at
    ``+-(r + d_offset) * (cos theta, sin theta)``.
    """

    r: float = 5.0
    d_offset: float = 5.0
    theta: float = 0.0
    n_source: int = 10000
    n_target: int = 100
    n_test: int = 1000
    seed: int = 0
    dof: float = DEFAULT_DOF

    def __post_init__(self):
        if min(self.n_source, self.n_target, self.n_test) < 1:
            raise ConfigError("sample sizes must be at least 1")
        if not 0.0 <= self.theta <= math.pi + 1e-12:
            raise ConfigError(f"theta must lie in [0, pi], got {self.theta}")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "ScenarioConfig":
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown scenario settings: {sorted(unknown)}")
        return cls(**obj)

    def target_center(self) -> np.ndarray:
        radius = self.r + self.d_offset
        return radius * np.array([math.cos(self.theta), math.sin(self.theta)])


def _two_class(center, scale, dof, count, rng) -> Dataset:
    n_pos = (count + 1) // 2
    n_neg = count - n_pos
    parts = [sample_t(TComponent(center, scale, dof), n_pos, rng)]
    if n_neg:
        parts.append(sample_t(TComponent(-np.asarray(center), scale, dof), n_neg, rng))
    labels = np.concatenate([np.ones(n_pos), -np.ones(n_neg)])
    return Dataset(np.vstack(parts), labels)


def make_source(cfg: ScenarioConfig, rng=None) -> Dataset:
    """Balanced source sample of size ``n_source``."""
    rng = make_rng(cfg.seed, SOURCE_STREAM) if rng is None else rng
    return _two_class(np.array([cfg.r, 0.0]), SOURCE_SCALE * np.eye(2), cfg.dof, cfg.n_source, rng)


def make_target(cfg: ScenarioConfig, split: str, rng=None) -> Dataset:
    """Balanced target sample; ``split`` is ``"train"`` (``n_target``) or ``"test"`` (``n_test``)."""
    if split not in SPLIT_STREAMS:
        raise ConfigError(f"split must be 'train' or 'test', got {split!r}")
    rng = make_rng(cfg.seed, SPLIT_STREAMS[split]) if rng is None else rng
    count = cfg.n_target if split == "train" else cfg.n_test
    return _two_class(cfg.target_center(), np.eye(2), cfg.dof, count, rng)
