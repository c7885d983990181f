"""JSON run configuration for the fit / bounds / audit / loo commands.

Example::

    {
      "loss": {"name": "softplus", "s": 0.1},
      "kernel": {"kind": "gaussian", "gamma": 0.5},
      "lambda": 1.0,
      "source": {"form": "linear", "w": [0.2, 0.0]},
      "train": "train.csv",
      "test": "test.csv",
      "solver": {"grad_tol": 1e-8}
    }

``losses`` (a list) may replace ``loss`` for commands that sweep losses.
Relative paths are resolved against the directory of the config file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

from .data import Dataset, read_csv
from .errors import ConfigError
from .kernels import KernelSpec
from .losses import ALL_LOSSES, LossSpec
from .rerm import SolverConfig
from .sources import SourceHypothesis, source_from_dict

KNOWN_KEYS = {"loss", "losses", "kernel", "lambda", "source", "train", "test", "solver"}


def load_json(path):
    """Parse a JSON file; a missing file raises ``OSError``, bad JSON ``ConfigError``."""
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None


@dataclass(frozen=True, eq=False)
class RunConfig:
    losses: Tuple[LossSpec, ...]
    kernel: KernelSpec
    lam: float
    source: SourceHypothesis
    train_path: Path
    test_path: Optional[Path] = None
    solver: SolverConfig = field(default_factory=SolverConfig)

    @property
    def loss(self) -> LossSpec:
        return self.losses[0]

    def load_train(self) -> Dataset:
        return read_csv(self.train_path)

    def load_test(self) -> Optional[Dataset]:
        return None if self.test_path is None else read_csv(self.test_path)

    def to_dict(self) -> dict:
        out = {
            "losses": [loss.to_dict() for loss in self.losses],
            "kernel": self.kernel.to_dict(),
            "lambda": self.lam,
            "source": self.source.to_dict(),
            "train": str(self.train_path),
            "solver": self.solver.to_dict(),
        }
        if self.test_path is not None:
            out["test"] = str(self.test_path)
        return out

    @classmethod
    def from_dict(cls, obj, base_dir=None) -> "RunConfig":
        if not isinstance(obj, dict):
            raise ConfigError("run config must be a JSON object")
        unknown = set(obj) - KNOWN_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("kernel", "lambda", "source", "train"):
            if key not in obj:
                raise ConfigError(f"config is missing {key!r}")
        if "losses" in obj:
            losses = tuple(LossSpec.from_dict(x) for x in obj["losses"])
        elif "loss" in obj:
            losses = (LossSpec.from_dict(obj["loss"]),)
        else:
            losses = ALL_LOSSES
        if not losses:
            raise ConfigError("at least one loss is required")
        try:
            lam = float(obj["lambda"])
        except (TypeError, ValueError):
            raise ConfigError(f"lambda must be a number, got {obj['lambda']!r}") from None
        if not lam > 0:
            raise ConfigError(f"lambda must be positive, got {lam}")
        base = Path(base_dir) if base_dir is not None else None

        def resolve(p):
            p = Path(p)
            return base / p if base is not None and not p.is_absolute() else p

        return cls(
            losses=losses,
            kernel=KernelSpec.from_dict(obj["kernel"]),
            lam=lam,
            source=source_from_dict(obj["source"], base_dir),
            train_path=resolve(obj["train"]),
            test_path=resolve(obj["test"]) if obj.get("test") is not None else None,
            solver=SolverConfig.from_dict(obj.get("solver")),
        )

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        return cls.from_dict(load_json(path), path.parent)
