"""Dataset ingestion: tabular CSV, image directories, splits, round trips."""

import numpy as np
import pytest
from PIL import Image

from elicitd import (
    DatasetManifest,
    DecisionRecord,
    load_images,
    load_tabular,
    read_records_csv,
    split,
    write_records_csv,
)
from elicitd.datasets import nearest_index_map, read_manifest, standardize_features, write_manifest
from elicitd.errors import DataError, DomainError, SchemaError, SplitError

from conftest import make_records


def write_csv(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadTabular:
    def test_two_point_standardization(self, tmp_path):
        p = write_csv(tmp_path / "d.csv", "x,y\n0,0\n2,1\n")
        records, manifest = load_tabular(p, ["x"], "y")
        assert records[0].features[0] == pytest.approx(-1.0)
        assert records[1].features[0] == pytest.approx(1.0)
        assert manifest.record_count == 2
        assert manifest.class_counts == {"0": 1, "1": 1}

    def test_standardized_columns_have_zero_mean_unit_std(self, tmp_path):
        rng = np.random.default_rng(0)
        rows = ["a,b,y"] + [f"{rng.normal()},{rng.uniform(5, 9)},{i % 2}" for i in range(50)]
        p = write_csv(tmp_path / "d.csv", "\n".join(rows) + "\n")
        records, _ = load_tabular(p, ["a", "b"], "y")
        mat = np.stack([r.features for r in records])
        np.testing.assert_allclose(mat.mean(axis=0), 0.0, atol=1e-9)
        np.testing.assert_allclose(mat.std(axis=0), 1.0, atol=1e-9)

    def test_constant_column_dropped_and_listed(self, tmp_path):
        p = write_csv(tmp_path / "d.csv", "a,c,y\n1,5,0\n2,5,1\n3,5,0\n")
        records, manifest = load_tabular(p, ["a", "c"], "y")
        assert records[0].features.shape == (1,)
        assert manifest.dropped_features == ("c",)
        assert manifest.feature_names == ("a",)
        assert manifest.warnings

    def test_bad_label_names_the_row(self, tmp_path):
        p = write_csv(tmp_path / "d.csv", "a,y\n1,0\n2,2\n")
        with pytest.raises(DataError, match="row 1"):
            load_tabular(p, ["a"], "y")

    def test_missing_column_names_it(self, tmp_path):
        p = write_csv(tmp_path / "d.csv", "a,y\n1,0\n")
        with pytest.raises(SchemaError, match="z"):
            load_tabular(p, ["a", "z"], "y")

    def test_agreement_column_bounds_checked(self, tmp_path):
        p = write_csv(tmp_path / "d.csv", "a,y,agr\n1,0,7\n2,1,2\n")
        with pytest.raises(DataError):
            load_tabular(p, ["a"], "y", agreement_column="agr", panel_size=7)

    def test_agreement_column_loaded(self, tmp_path):
        p = write_csv(tmp_path / "d.csv", "a,y,agr\n1,0,7\n2,1,4\n")
        records, manifest = load_tabular(p, ["a"], "y", agreement_column="agr", panel_size=7)
        assert [r.agreement for r in records] == [7, 4]
        assert manifest.panel_size == 7

    def test_standardize_off_keeps_raw_values(self, tmp_path):
        p = write_csv(tmp_path / "d.csv", "a,y\n3,0\n9,1\n")
        records, manifest = load_tabular(p, ["a"], "y", standardize=False)
        assert records[0].features[0] == 3.0
        assert manifest.normalization["kind"] == "none"


class TestStandardizeFeatures:
    def test_returns_statistics_for_later_reuse(self):
        mat = np.array([[0.0, 5.0], [2.0, 5.0], [4.0, 5.0]])
        out, kept, means, stds, dropped = standardize_features(mat, ["a", "c"])
        assert kept == ["a"]
        assert dropped == ["c"]
        assert means[0] == pytest.approx(2.0)
        np.testing.assert_allclose(out[:, 0], (mat[:, 0] - 2.0) / mat[:, 0].std())


class TestRecordsRoundTrip:
    def test_bit_equal_features(self, tmp_path, rng):
        records = make_records(rng, 17, agreement=True)
        path = tmp_path / "records.csv"
        write_records_csv(records, path)
        back = read_records_csv(path)
        assert len(back) == 17
        for a, b in zip(records, back):
            assert a.record_id == b.record_id
            assert a.label == b.label
            assert a.agreement == b.agreement
            np.testing.assert_array_equal(a.features, b.features)

    def test_feature_shape_restored(self, tmp_path, rng):
        plane = rng.random((8, 8, 1))
        records = [DecisionRecord("img0", plane, 1, 5)]
        path = tmp_path / "records.csv"
        write_records_csv(records, path)
        back = read_records_csv(path, feature_shape=(8, 8, 1))
        assert back[0].features.shape == (8, 8, 1)
        np.testing.assert_array_equal(back[0].features, plane)


class TestSplit:
    @pytest.mark.parametrize("fraction", [0.1, 0.2, 0.3])
    def test_disjoint_and_exhaustive(self, fraction, rng):
        records = make_records(rng, 40)
        for seed in range(100):
            train, test = split(records, fraction, seed)
            train_ids = {r.record_id for r in train}
            test_ids = {r.record_id for r in test}
            assert not train_ids & test_ids
            assert len(train_ids | test_ids) == 40

    def test_deterministic(self, rng):
        records = make_records(rng, 30)
        a = split(records, 0.2, seed=9)
        b = split(records, 0.2, seed=9)
        assert [r.record_id for r in a[1]] == [r.record_id for r in b[1]]

    def test_split_index_changes_partition(self, rng):
        records = make_records(rng, 30)
        a = split(records, 0.2, seed=9, index=0)
        b = split(records, 0.2, seed=9, index=1)
        assert {r.record_id for r in a[1]} != {r.record_id for r in b[1]}

    def test_stratified_counts(self):
        records = [
            DecisionRecord(f"n{i}", np.array([float(i)]), 0) for i in range(5)
        ] + [
            DecisionRecord(f"p{i}", np.array([float(i)]), 1) for i in range(5)
        ]
        _, test = split(records, 0.2, seed=1)
        assert sum(r.label == 0 for r in test) == 1
        assert sum(r.label == 1 for r in test) == 1

    def test_counting_example(self, rng):
        records = make_records(rng, 10)
        train, test = split(records, 0.2, seed=3)
        assert len(train) == 8
        assert len(test) == 2

    def test_empty_side_rejected(self):
        records = [
            DecisionRecord("a", np.array([0.0]), 0),
            DecisionRecord("b", np.array([1.0]), 1),
        ]
        with pytest.raises(SplitError):
            split(records, 0.05, seed=0)

    def test_output_preserves_input_order(self, rng):
        records = make_records(rng, 20)
        order = {r.record_id: i for i, r in enumerate(records)}
        train, test = split(records, 0.25, seed=5)
        for part in (train, test):
            idx = [order[r.record_id] for r in part]
            assert idx == sorted(idx)


def write_png(path, arr):
    Image.fromarray(arr.astype(np.uint8), mode="L").save(path)


class TestLoadImages:
    def _labels(self, tmp_path, rows):
        body = "filename,label,agreement\n" + "\n".join(rows) + "\n"
        return write_csv(tmp_path / "labels.csv", body)

    def test_uniform_gray_standardizes_to_zeros(self, tmp_path):
        write_png(tmp_path / "g.png", np.full((8, 8), 128))
        labels = self._labels(tmp_path, ["g.png,1,"])
        records, manifest = load_images(tmp_path, labels, side=8)
        np.testing.assert_array_equal(records[0].features, 0.0)
        assert manifest.warnings  # zero global std leaves the scale at 1

    def test_identity_resize_preserves_pattern(self, tmp_path):
        rng = np.random.default_rng(8)
        src = rng.integers(0, 256, size=(8, 8))
        write_png(tmp_path / "a.png", src)
        labels = self._labels(tmp_path, ["a.png,0,"])
        records, _ = load_images(tmp_path, labels, side=8)
        feats = records[0].features[:, :, 0]
        # standardization is monotone, so the pixel ordering must survive
        assert feats.shape == (8, 8)
        got_order = np.argsort(feats.ravel(), kind="stable")
        want_order = np.argsort((src / 255.0).ravel(), kind="stable")
        np.testing.assert_array_equal(got_order, want_order)

    def test_downscale_matches_index_oracle(self, tmp_path):
        rng = np.random.default_rng(9)
        src = rng.integers(0, 256, size=(16, 16))
        write_png(tmp_path / "c.png", src)
        labels = self._labels(tmp_path, ["c.png,1,"])
        records, manifest = load_images(tmp_path, labels, side=8)
        # independent oracle: output pixel (i, j) samples source (i*16//8, j*16//8)
        want = np.empty((8, 8))
        for i in range(8):
            for j in range(8):
                want[i, j] = src[(i * 16) // 8, (j * 16) // 8] / 255.0
        mean, std = manifest.normalization["mean"], manifest.normalization["std"]
        np.testing.assert_allclose(records[0].features[:, :, 0], (want - mean) / std, atol=1e-12)

    def test_records_ordered_by_filename(self, tmp_path):
        for name in ("b.png", "a.png", "c.png"):
            write_png(tmp_path / name, np.full((8, 8), 100))
        labels = self._labels(tmp_path, ["b.png,1,", "a.png,0,", "c.png,1,"])
        records, _ = load_images(tmp_path, labels, side=8)
        assert [r.record_id for r in records] == ["a.png", "b.png", "c.png"]

    def test_missing_file_names_it(self, tmp_path):
        labels = self._labels(tmp_path, ["ghost.png,1,"])
        with pytest.raises(DataError, match="ghost.png"):
            load_images(tmp_path, labels, side=8)

    def test_corrupt_file_names_it(self, tmp_path):
        (tmp_path / "bad.png").write_bytes(b"not an image")
        labels = self._labels(tmp_path, ["bad.png,1,"])
        with pytest.raises(DataError, match="bad.png"):
            load_images(tmp_path, labels, side=8)

    def test_small_side_rejected(self, tmp_path):
        labels = self._labels(tmp_path, ["a.png,1,"])
        with pytest.raises(DomainError):
            load_images(tmp_path, labels, side=4)

    def test_agreement_parsed_from_labels(self, tmp_path):
        write_png(tmp_path / "a.png", np.arange(64).reshape(8, 8) * 3)
        labels = self._labels(tmp_path, ["a.png,1,6"])
        records, _ = load_images(tmp_path, labels, side=8, panel_size=7)
        assert records[0].agreement == 6


class TestNearestIndexMap:
    def test_identity(self):
        np.testing.assert_array_equal(nearest_index_map(4, 4), [0, 1, 2, 3])

    def test_downscale_by_two(self):
        np.testing.assert_array_equal(nearest_index_map(4, 8), [0, 2, 4, 6])

    def test_nonintegral_ratio(self):
        np.testing.assert_array_equal(nearest_index_map(4, 10), [0, 2, 5, 7])


class TestManifest:
    def test_json_round_trip(self, tmp_path):
        manifest = DatasetManifest(
            source_kind="tabular",
            record_count=3,
            class_counts={"0": 1, "1": 2},
            feature_shape=(4,),
            normalization={"kind": "per_feature", "means": [0.5], "stds": [1.5]},
            panel_size=7,
            feature_names=("a",),
            dropped_features=("c",),
            warnings=("w",),
        )
        path = tmp_path / "manifest.json"
        write_manifest(manifest, path)
        assert read_manifest(path) == manifest

    def test_class_counts_must_sum(self):
        with pytest.raises(DataError):
            DatasetManifest(
                source_kind="tabular",
                record_count=5,
                class_counts={"0": 1, "1": 2},
                feature_shape=(4,),
                normalization={"kind": "none"},
            )
