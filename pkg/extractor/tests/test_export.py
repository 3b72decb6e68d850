import json

import numpy as np
import pytest
from conftest import make_record, write_tree

from deepfeat_extractor import (
    ExtractorSpec,
    PreprocessError,
    export_features,
    load_image_dir,
)


def _tiny_export(tmp_path, n=3):
    recs = [make_record(f"Benign/r{i}", "Benign", seed=i) for i in range(n - 1)]
    recs.append(make_record("Early/r0", "Early", seed=9))
    rng = np.random.default_rng(0)
    matrix = rng.normal(size=(n, 1280)) * 10
    spec = ExtractorSpec.of("mobilenetv2")
    return export_features(matrix, recs, spec, tmp_path / "mobilenetv2.csv"), \
        recs, matrix


class TestExport:
    def test_writes_csv_and_manifest(self, tmp_path):
        (csv_path, mpath), recs, matrix = _tiny_export(tmp_path)
        lines = csv_path.read_text().splitlines()
        assert lines[0].startswith("id,label,f0,f1,")
        assert len(lines) == 4
        assert lines[1].startswith("Benign/r0,Benign,")
        manifest = json.loads(mpath.read_text())
        assert manifest["extractor_model"] == "mobilenetv2"
        assert manifest["feature_dim"] == 1280
        assert manifest["class_names"] == ["Benign", "Early"]
        assert manifest["image_size"] == "320x240"

    def test_nine_digit_precision(self, tmp_path):
        (csv_path, _), _, matrix = _tiny_export(tmp_path)
        cells = csv_path.read_text().splitlines()[1].split(",")[2:]
        loaded = np.array([float(c) for c in cells])
        np.testing.assert_allclose(loaded, matrix[0], rtol=1e-6)

    def test_row_count_mismatch(self, tmp_path):
        recs = [make_record("Benign/r0", "Benign")]
        with pytest.raises(ValueError, match="rows for 1 records"):
            export_features(np.zeros((2, 1280)), recs,
                            ExtractorSpec.of("mobilenetv2"), tmp_path / "m.csv")

    def test_width_mismatch(self, tmp_path):
        recs = [make_record("Benign/r0", "Benign")]
        with pytest.raises(ValueError, match="width 7"):
            export_features(np.zeros((1, 7)), recs,
                            ExtractorSpec.of("mobilenetv2"), tmp_path / "m.csv")

    def test_creates_parent_dirs(self, tmp_path):
        (csv_path, _), _, _ = _tiny_export(tmp_path / "deep" / "er")
        assert csv_path.exists()


class TestLoadImageDir:
    def test_sorted_classes_and_files(self, tmp_path):
        write_tree(tmp_path, {"Pre": 2, "Benign": 2}, width=40, height=30)
        recs = load_image_dir(tmp_path)
        assert [r.id for r in recs] == ["Benign/img000", "Benign/img001",
                                        "Pre/img000", "Pre/img001"]
        assert recs[0].pixels.shape == (30, 40, 3)

    def test_missing_root(self, tmp_path):
        with pytest.raises(PreprocessError, match="no such data directory"):
            load_image_dir(tmp_path / "nope")

    def test_no_class_dirs(self, tmp_path):
        (tmp_path / "stray.txt").write_text("x")
        with pytest.raises(PreprocessError, match="no class subdirectories"):
            load_image_dir(tmp_path)

    def test_empty_class_dir(self, tmp_path):
        (tmp_path / "Benign").mkdir()
        with pytest.raises(PreprocessError, match="has no images"):
            load_image_dir(tmp_path)

    def test_non_image_files_ignored(self, tmp_path):
        write_tree(tmp_path, {"Benign": 1}, width=20, height=20)
        (tmp_path / "Benign" / "notes.txt").write_text("skip me")
        assert len(load_image_dir(tmp_path)) == 1
