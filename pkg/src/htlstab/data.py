"""Labelled datasets and their CSV representation."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateDatasetError


class DatasetFileError(OSError):
    """A dataset file exists but cannot be parsed."""


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix ``(n, d)`` with labels in ``{-1, +1}``."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        x = np.array(self.features, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        y = np.array(self.labels, dtype=float).ravel()
        if x.ndim != 2 or x.shape[0] == 0:
            raise DegenerateDatasetError(f"dataset needs at least one row, got shape {x.shape}")
        if x.shape[0] != y.shape[0]:
            raise ValueError(f"{x.shape[0]} feature rows but {y.shape[0]} labels")
        if not np.all(np.isfinite(x)):
            raise ValueError("feature matrix contains non-finite entries")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.n

    def without(self, i: int) -> "Dataset":
        """Copy with row ``i`` removed."""
        if self.n < 2:
            raise DegenerateDatasetError("cannot remove a row from a one-row dataset")
        keep = np.arange(self.n) != i
        return Dataset(self.features[keep], self.labels[keep])

    def subset(self, index) -> "Dataset":
        return Dataset(self.features[index], self.labels[index])


def concat(*datasets: Dataset) -> Dataset:
    return Dataset(
        np.vstack([ds.features for ds in datasets]),
        np.concatenate([ds.labels for ds in datasets]),
    )


def write_csv(data: Dataset, path) -> None:
    """Write ``x1..xd,label`` with a header row; floats use ``repr`` for exact round trips."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{j + 1}" for j in range(data.d)] + ["label"])
        for row, label in zip(data.features, data.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])


def read_csv(path) -> Dataset:
    """Read a dataset written by :func:`write_csv` (any header names are accepted).

    Raises
    ------
    FileNotFoundError
        If ``path`` does not exist.
    DatasetFileError
        If the content is not a rectangular numeric table with ``{-1, 1}`` labels.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]
    if len(rows) < 2:
        raise DatasetFileError(f"{path}: expected a header row and at least one data row")
    width = len(rows[0])
    if width < 2:
        raise DatasetFileError(f"{path}: need at least one feature column and a label column")
    if any(len(r) != width for r in rows[1:]):
        raise DatasetFileError(f"{path}: ragged rows (header has {width} columns)")
    try:
        table = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise DatasetFileError(f"{path}: non-numeric entry ({exc})") from None
    try:
        return Dataset(table[:, :-1], table[:, -1])
    except ValueError as exc:
        raise DatasetFileError(f"{path}: {exc}") from None
