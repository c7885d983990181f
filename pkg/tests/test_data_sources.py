import json
import math

import numpy as np
import pytest

from htlstab.data import Dataset, DatasetFileError, read_csv, write_csv
from htlstab.errors import ConfigError, DegenerateDatasetError
from htlstab.kernels import KernelKind, KernelSpec
from htlstab.sources import (
    ConstantSource,
    KernelExpansionSource,
    LinearSource,
    ScaledSource,
    scale_score,
    source_from_dict,
)


class TestDataset:
    def test_shape_and_labels(self):
        ds = Dataset([[1.0, 2.0], [3.0, 4.0]], [1, -1])
        assert (ds.n, ds.d) == (2, 2)
        np.testing.assert_array_equal(ds.labels, [1.0, -1.0])

    def test_rejects_bad_labels(self):
        with pytest.raises(ValueError):
            Dataset([[0.0]], [0])

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Dataset([[np.nan]], [1])

    def test_rejects_empty(self):
        with pytest.raises(DegenerateDatasetError):
            Dataset(np.empty((0, 2)), [])

    def test_immutable(self):
        ds = Dataset([[1.0]], [1])
        with pytest.raises(ValueError):
            ds.features[0, 0] = 2.0

    def test_without(self):
        ds = Dataset([[1.0], [2.0], [3.0]], [1, -1, 1])
        np.testing.assert_array_equal(ds.without(1).features.ravel(), [1.0, 3.0])
        with pytest.raises(DegenerateDatasetError):
            Dataset([[1.0]], [1]).without(0)


class TestCsv:
    def test_round_trip_is_exact(self, tmp_path, rng):
        ds = Dataset(rng.normal(size=(7, 3)), rng.choice([-1, 1], size=7))
        write_csv(ds, tmp_path / "d.csv")
        back = read_csv(tmp_path / "d.csv")
        np.testing.assert_array_equal(back.features, ds.features)
        np.testing.assert_array_equal(back.labels, ds.labels)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_csv(tmp_path / "absent.csv")

    @pytest.mark.parametrize(
        "text",
        ["x1,label\n", "x1,label\n1.0,abc\n", "x1,label\n1.0,1\n2.0\n", "x1,label\n1.0,2\n", "label\n1\n"],
    )
    def test_corrupt_files(self, tmp_path, text):
        path = tmp_path / "bad.csv"
        path.write_text(text)
        with pytest.raises(DatasetFileError):
            read_csv(path)


class TestSources:
    def test_constant(self):
        src = ConstantSource(0.7)
        np.testing.assert_array_equal(src.score(np.zeros((3, 2))), 0.7)
        assert src.sup_norm() == 0.7

    def test_linear(self):
        src = LinearSource([1.0, -2.0])
        np.testing.assert_allclose(src.score([[1.0, 1.0], [0.5, 0.0]]), [-1.0, 0.5])
        with pytest.raises(ValueError):
            src.score(np.zeros((1, 3)))

    def test_kernel_expansion(self):
        k = KernelSpec(KernelKind.LINEAR)
        src = KernelExpansionSource([[1.0], [2.0]], [0.5, -1.0], k)
        np.testing.assert_allclose(src.score([[3.0]]), [0.5 * 3 - 2 * 3])

    def test_sup_norm_estimate_and_hint(self):
        src = LinearSource([1.0])
        assert src.sup_norm(np.array([[2.0], [-3.0]])) == 3.0
        assert LinearSource([1.0], sup_norm_hint=5.0).sup_norm() == 5.0
        with pytest.raises(ConfigError):
            src.sup_norm()

    @pytest.mark.parametrize(
        "src, dim",
        [
            (LinearSource([0.3, -0.1], sup_norm_hint=2.0), 2),
            (ConstantSource(-0.4), 2),
            (KernelExpansionSource([[0.0, 1.0]], [2.0], KernelSpec(KernelKind.GAUSSIAN, gamma=0.5)), 2),
            (ScaledSource(LinearSource([1.0]), 3.0, 2.0), 1),
        ],
        ids=["linear", "constant", "kernel_expansion", "scaled"],
    )
    def test_serialization_round_trip(self, src, dim, rng):
        back = source_from_dict(json.loads(json.dumps(src.to_dict())))
        x = rng.normal(size=(10, dim))
        np.testing.assert_array_equal(back.score(x), src.score(x))
        assert back.to_dict() == src.to_dict()

    def test_from_file(self, tmp_path):
        (tmp_path / "src.json").write_text(json.dumps({"form": "constant", "c": 1.5}))
        assert source_from_dict("src.json", tmp_path).score(np.zeros((1, 1)))[0] == 1.5

    def test_invalid_entries(self):
        with pytest.raises(ConfigError):
            source_from_dict({"form": "tree"})
        with pytest.raises(ConfigError):
            source_from_dict({"form": "linear"})
        with pytest.raises(ConfigError):
            source_from_dict({"form": "constant", "c": 1.0, "sup_norm_hint": -1.0})


class TestScaleScore:
    def test_zero_source_stays_zero(self):
        scaled = scale_score(ConstantSource(0.0), 5.0)
        np.testing.assert_array_equal(scaled.score(np.zeros((4, 2))), 0.0)

    def test_sup_norm_point_maps_to_099(self):
        x = np.array([[-2.0], [1.0], [0.5]])
        scaled = scale_score(LinearSource([1.0]), 4.0, x)
        np.testing.assert_allclose(scaled.score(x[:1]), [-0.99 * 4.0], rtol=1e-14)
        assert scaled.sup_norm() == 4.0

    def test_strictly_increasing_and_bounded(self, rng):
        x = np.sort(rng.normal(scale=5.0, size=200))[:, None]
        scaled = scale_score(LinearSource([1.0]), 2.0, x)
        values = scaled.score(x)
        assert np.all(np.diff(values) > 0)
        assert np.all(np.abs(values) < 2.0)

    def test_preserves_sign(self, rng):
        x = rng.normal(size=(100, 2))
        src = LinearSource([0.7, -1.2])
        scaled = scale_score(src, 10.0, x)
        np.testing.assert_array_equal(np.sign(scaled.score(x)), np.sign(src.score(x)))

    def test_errors(self):
        with pytest.raises(ConfigError):
            scale_score(LinearSource([1.0]), 1.0)
        with pytest.raises(ConfigError):
            scale_score(ConstantSource(1.0), 0.0)
