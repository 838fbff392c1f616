import numpy as np
import pytest
from numpy.testing import assert_allclose

from farfield.archive import read_feature_archive, write_feature_archive
from farfield.checkpoint import load_checkpoint, save_checkpoint


class TestFeatureArchive:
    def test_roundtrip_preserves_values_and_order(self, tmp_path, rng):
        items = {f"utt{i}": rng.standard_normal((int(rng.integers(1, 50)), 40)).astype(np.float32)
                 for i in range(7)}
        path = tmp_path / "x.fea"
        write_feature_archive(path, items)
        back = read_feature_archive(path)
        assert list(back) == list(items)
        for k in items:
            assert back[k].dtype == np.float32
            assert_allclose(back[k], items[k])

    def test_float32_exact_roundtrip(self, tmp_path):
        x = np.array([[1.5, -0.1, 3e-8]], dtype=np.float32)
        path = tmp_path / "x.fea"
        write_feature_archive(path, {"a": x})
        assert np.array_equal(read_feature_archive(path)["a"], x)

    def test_unicode_ids(self, tmp_path):
        path = tmp_path / "x.fea"
        write_feature_archive(path, {"utt-ü-1": np.zeros((2, 3), np.float32)})
        assert "utt-ü-1" in read_feature_archive(path)

    def test_unknown_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.fea"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(ValueError, match="magic"):
            read_feature_archive(path)

    def test_truncated_record_rejected(self, tmp_path):
        path = tmp_path / "x.fea"
        write_feature_archive(path, {"a": np.ones((4, 4), np.float32)})
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(ValueError, match="truncated"):
            read_feature_archive(path)

    def test_non_2d_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            write_feature_archive(tmp_path / "x.fea", {"a": np.zeros(5, np.float32)})


class TestCheckpoint:
    def test_roundtrip(self, tmp_path, rng):
        arrays = {"w1": rng.standard_normal((3, 4)).astype(np.float32),
                  "w2": rng.standard_normal(7).astype(np.float32),
                  "step": np.asarray(5.0, dtype=np.float32)}
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, "generator", {"model": {"base_filters": 8}}, arrays)
        kind, config, back = load_checkpoint(path)
        assert kind == "generator"
        assert config["model"]["base_filters"] == 8
        for k in arrays:
            assert back[k].shape == arrays[k].shape
            assert np.array_equal(back[k], arrays[k])

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "m.ckpt"
        path.write_bytes(b"WRONG" + b"\x00" * 32)
        with pytest.raises(ValueError, match="magic"):
            load_checkpoint(path)

    def test_truncated_rejected(self, tmp_path):
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, "generator", {}, {"w": np.ones((100, 100), np.float32)})
        path.write_bytes(path.read_bytes()[:-100])
        with pytest.raises(ValueError, match="truncated"):
            load_checkpoint(path)
