"""Dataset loading, schema validation, scaling, and the stratified split."""

import json

import numpy as np
import pytest

from deepfeat.datasets import (
    DatasetError,
    FeatureMatrix,
    LabeledDataset,
    ScalerParams,
    SplitSpec,
    apply_scaler,
    load_feature_csv,
    load_manifest,
    minmax_scale,
    save_feature_csv,
    stratified_split,
    stratified_split_indices,
)


def _write_dataset(tmp_path, rows, class_names=("a", "b"), d=2, name="toy",
                   extractor="resnet101"):
    csv_path = tmp_path / f"{name}.csv"
    header = "id,label," + ",".join(f"f{j}" for j in range(d))
    csv_path.write_text("\n".join([header] + rows) + "\n", encoding="utf-8")
    manifest = {
        "extractor_model": extractor,
        "feature_dim": d,
        "class_names": list(class_names),
        "image_size": "320x240",
        "extractor_version": "0.1.0",
    }
    (tmp_path / f"{name}.manifest.json").write_text(json.dumps(manifest),
                                                    encoding="utf-8")
    return csv_path


class TestFeatureMatrix:
    def test_rejects_nan(self):
        with pytest.raises(DatasetError, match="finite"):
            FeatureMatrix(np.array([[1.0, np.nan]]))

    def test_rejects_wrong_ndim(self):
        with pytest.raises(DatasetError):
            FeatureMatrix(np.zeros(3))

    def test_values_read_only(self):
        m = FeatureMatrix(np.ones((2, 2)))
        with pytest.raises(ValueError):
            m.values[0, 0] = 5.0


class TestLabeledDataset:
    def test_label_range_checked(self):
        with pytest.raises(DatasetError):
            LabeledDataset(FeatureMatrix(np.ones((2, 1))),
                           np.array([0, 2]), ("a", "b"))

    def test_take_preserves_ids(self):
        ds = LabeledDataset(FeatureMatrix(np.arange(6.0).reshape(3, 2)),
                            np.array([0, 1, 0]), ("a", "b"),
                            ids=("r0", "r1", "r2"))
        sub = ds.take(np.array([2, 0]))
        assert sub.ids == ("r2", "r0")
        assert list(sub.labels) == [0, 0]
        assert np.array_equal(sub.matrix.values, ds.matrix.values[[2, 0]])


class TestLoadFeatureCsv:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        ds = LabeledDataset(FeatureMatrix(rng.normal(size=(5, 3))),
                            np.array([0, 1, 1, 0, 1]), ("a", "b"))
        path = save_feature_csv(ds, tmp_path / "rt.csv")
        back = load_feature_csv(path)
        assert np.array_equal(back.matrix.values, ds.matrix.values)
        assert np.array_equal(back.labels, ds.labels)
        assert back.class_names == ds.class_names

    def test_missing_manifest(self, tmp_path):
        p = tmp_path / "solo.csv"
        p.write_text("id,label,f0\nr0,a,1.0\n", encoding="utf-8")
        with pytest.raises(DatasetError, match="manifest"):
            load_feature_csv(p)

    def test_header_mismatch(self, tmp_path):
        path = _write_dataset(tmp_path, ["r0,a,1.0,2.0"])
        bad = path.read_text().replace("f0,f1", "f1,f0")
        path.write_text(bad, encoding="utf-8")
        with pytest.raises(DatasetError, match="header"):
            load_feature_csv(path)

    def test_bad_value_names_row_and_column(self, tmp_path):
        path = _write_dataset(tmp_path, ["r0,a,1.0,2.0", "r1,b,oops,0.5"])
        with pytest.raises(DatasetError, match=r"data row 2.*'f0'"):
            load_feature_csv(path)

    def test_non_finite_rejected(self, tmp_path):
        path = _write_dataset(tmp_path, ["r0,a,inf,2.0", "r1,b,1.0,0.5"])
        with pytest.raises(DatasetError, match="data row 1"):
            load_feature_csv(path)

    def test_unknown_label(self, tmp_path):
        path = _write_dataset(tmp_path, ["r0,zzz,1.0,2.0"])
        with pytest.raises(DatasetError, match="zzz"):
            load_feature_csv(path)

    def test_wrong_field_count(self, tmp_path):
        path = _write_dataset(tmp_path, ["r0,a,1.0"])
        with pytest.raises(DatasetError, match="data row 1"):
            load_feature_csv(path)

    def test_no_data_rows(self, tmp_path):
        path = _write_dataset(tmp_path, [])
        with pytest.raises(DatasetError, match="no data rows"):
            load_feature_csv(path)

    def test_feature_dim_mismatch_with_manifest(self, tmp_path):
        path = _write_dataset(tmp_path, ["r0,a,1.0,2.0"])
        manifest_path = tmp_path / "toy.manifest.json"
        doc = json.loads(manifest_path.read_text())
        doc["feature_dim"] = 7
        manifest_path.write_text(json.dumps(doc), encoding="utf-8")
        with pytest.raises(DatasetError, match="feature_dim"):
            load_feature_csv(path)


class TestManifest:
    # load_manifest takes the CSV path and finds <stem>.manifest.json

    @staticmethod
    def _write(tmp_path, doc):
        (tmp_path / "m.manifest.json").write_text(json.dumps(doc), encoding="utf-8")
        return tmp_path / "m.csv"

    def test_unknown_extractor(self, tmp_path):
        p = self._write(tmp_path, {
            "extractor_model": "alexnet", "feature_dim": 4,
            "class_names": ["a", "b"], "image_size": "320x240",
            "extractor_version": "0",
        })
        with pytest.raises(DatasetError, match="alexnet"):
            load_manifest(p)

    def test_missing_field(self, tmp_path):
        p = self._write(tmp_path, {"extractor_model": "vgg19"})
        with pytest.raises(DatasetError, match="missing field"):
            load_manifest(p)

    def test_duplicate_class_names(self, tmp_path):
        p = self._write(tmp_path, {
            "extractor_model": "vgg19", "feature_dim": 4,
            "class_names": ["a", "a"], "image_size": "320x240",
            "extractor_version": "0",
        })
        with pytest.raises(DatasetError, match="class_names"):
            load_manifest(p)


class TestMinMaxScale:
    def test_train_columns_map_to_unit_range(self, rng):
        x = rng.normal(size=(20, 4)) * 10
        m = FeatureMatrix(x)
        _, scaled = minmax_scale(m, m)
        assert np.allclose(scaled.values.min(axis=0), 0.0)
        assert np.allclose(scaled.values.max(axis=0), 1.0)

    def test_constant_column_becomes_zero(self):
        x = np.array([[1.0, 5.0], [2.0, 5.0]])
        _, scaled = minmax_scale(FeatureMatrix(x), FeatureMatrix(x))
        assert np.array_equal(scaled.values[:, 1], [0.0, 0.0])

    def test_test_rows_can_exceed_unit_range(self):
        train = FeatureMatrix(np.array([[0.0], [1.0]]))
        test = FeatureMatrix(np.array([[2.0], [-1.0]]))
        params, _ = minmax_scale(train, train)
        out = apply_scaler(params, test)
        assert out.values[0, 0] == 2.0
        assert out.values[1, 0] == -1.0

    def test_dimension_mismatch(self):
        with pytest.raises(DatasetError):
            apply_scaler(ScalerParams(np.zeros(2), np.ones(2)),
                         FeatureMatrix(np.ones((1, 3))))


class TestStratifiedSplit:
    def test_reference_counts(self):
        # class sizes 504/985/963/804 at fraction 0.2 give per-class
        # test counts 101/197/193/161 under half-up rounding
        labels = np.repeat([0, 1, 2, 3], [504, 985, 963, 804])
        train_idx, test_idx = stratified_split_indices(
            labels, 4, SplitSpec(test_fraction=0.2, seed=11))
        test_counts = np.bincount(labels[test_idx], minlength=4)
        assert list(test_counts) == [101, 197, 193, 161]
        assert len(train_idx) + len(test_idx) == labels.size

    def test_partition_is_exact(self, rng):
        labels = rng.integers(0, 3, size=100)
        labels[:3] = [0, 1, 2]
        train_idx, test_idx = stratified_split_indices(
            labels, 3, SplitSpec(test_fraction=0.25, seed=5))
        merged = np.sort(np.concatenate([train_idx, test_idx]))
        assert np.array_equal(merged, np.arange(100))

    def test_every_class_on_both_sides(self):
        labels = np.array([0, 0, 1, 1, 1, 1, 1, 1, 1, 1])
        train_idx, test_idx = stratified_split_indices(
            labels, 2, SplitSpec(test_fraction=0.1, seed=0))
        assert set(labels[train_idx]) == {0, 1}
        assert set(labels[test_idx]) == {0, 1}

    def test_deterministic_per_seed(self):
        labels = np.repeat([0, 1], [30, 30])
        a = stratified_split_indices(labels, 2, SplitSpec(0.2, 9))
        b = stratified_split_indices(labels, 2, SplitSpec(0.2, 9))
        c = stratified_split_indices(labels, 2, SplitSpec(0.2, 10))
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
        assert not np.array_equal(a[1], c[1])

    def test_split_requires_two_per_class(self):
        labels = np.array([0, 1, 1])
        with pytest.raises(DatasetError):
            stratified_split_indices(labels, 2, SplitSpec(0.5, 0))

    def test_dataset_level_split(self, tiny_dataset):
        train, test = stratified_split(tiny_dataset, SplitSpec(0.5, 3))
        assert train.matrix.n_rows == 2
        assert test.matrix.n_rows == 2
        assert set(train.labels) == {0, 1}
        assert set(test.labels) == {0, 1}
