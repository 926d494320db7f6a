import gzip
import hashlib
import os
import struct

import numpy as np
import pytest

from infoplane import DataError, load_dataset, load_idx_images, load_idx_labels
from infoplane.mnist import test_error as classification_error
from infoplane.mnist import GZ_SHA256, fetch

from conftest import needs_mnist, write_idx_images, write_idx_labels


class TestIdxFormat:
    def test_round_trip_images(self, tmp_path):
        g = np.random.default_rng(0)
        raw = g.integers(0, 256, size=(7, 28, 28), dtype=np.uint8)
        path = str(tmp_path / "imgs")
        write_idx_images(path, raw)
        loaded = load_idx_images(path)
        assert loaded.shape == (7, 784)
        assert np.array_equal(loaded, raw.reshape(7, 784) / 255.0)

    def test_gzip_transparent(self, tmp_path):
        raw = np.zeros((2, 28, 28), dtype=np.uint8)
        plain = str(tmp_path / "a")
        zipped = str(tmp_path / "b.gz")
        write_idx_images(plain, raw)
        write_idx_images(zipped, raw)
        assert np.array_equal(load_idx_images(plain), load_idx_images(zipped))

    def test_loading_is_deterministic(self, tmp_path):
        raw = np.random.default_rng(1).integers(0, 256, size=(3, 28, 28), dtype=np.uint8)
        path = str(tmp_path / "imgs")
        write_idx_images(path, raw)
        assert np.array_equal(load_idx_images(path), load_idx_images(path))

    def test_wrong_image_magic_names_offset_zero(self, tmp_path):
        path = str(tmp_path / "bad")
        with open(path, "wb") as f:
            f.write(struct.pack(">IIII", 0x00000801, 1, 28, 28) + bytes(784))
        with pytest.raises(DataError, match="byte offset 0"):
            load_idx_images(path)

    def test_truncated_header_names_offset(self, tmp_path):
        path = str(tmp_path / "bad")
        with open(path, "wb") as f:
            f.write(struct.pack(">II", 0x00000803, 1))  # stops before rows
        with pytest.raises(DataError, match="byte offset 8"):
            load_idx_images(path)

    def test_truncated_pixels_reports_expected_vs_actual(self, tmp_path):
        path = str(tmp_path / "bad")
        with open(path, "wb") as f:
            f.write(struct.pack(">IIII", 0x00000803, 2, 28, 28) + bytes(1000))
        with pytest.raises(DataError, match="expected 1568 pixel bytes at byte offset 16, found 1000"):
            load_idx_images(path)

    def test_wrong_dimensions_rejected(self, tmp_path):
        path = str(tmp_path / "bad")
        with open(path, "wb") as f:
            f.write(struct.pack(">IIII", 0x00000803, 1, 14, 14) + bytes(196))
        with pytest.raises(DataError, match="14x14 at byte offset 8"):
            load_idx_images(path)

    def test_wrong_label_magic(self, tmp_path):
        path = str(tmp_path / "bad")
        with open(path, "wb") as f:
            f.write(struct.pack(">II", 0x00000803, 1) + bytes([3]))
        with pytest.raises(DataError, match="bad magic"):
            load_idx_labels(path)

    def test_label_out_of_range_names_byte_offset(self, tmp_path):
        path = str(tmp_path / "bad")
        with open(path, "wb") as f:
            f.write(struct.pack(">II", 0x00000801, 3) + bytes([4, 17, 2]))
        with pytest.raises(DataError, match="label 17 out of range 0..9 at byte offset 9"):
            load_idx_labels(path)

    def test_label_round_trip(self, tmp_path):
        path = str(tmp_path / "labels.gz")
        write_idx_labels(path, [0, 9, 5, 5])
        assert load_idx_labels(path).tolist() == [0, 9, 5, 5]

    def test_missing_file_mentions_fetch(self, tmp_path):
        with pytest.raises(DataError, match="fetch"):
            load_dataset(str(tmp_path), "train")


class TestTestError:
    def test_all_correct(self):
        logits = np.eye(10)[np.arange(10)] * 5.0
        assert classification_error(logits, np.arange(10)) == 0.0

    def test_single_wrong(self):
        logits = np.zeros((1, 10))
        logits[0, 2] = 3.0
        assert classification_error(logits, np.array([7])) == 1.0

    def test_argmax_ties_break_low(self):
        logits = np.zeros((1, 10))  # all tied: argmax is class 0
        assert classification_error(logits, np.array([0])) == 0.0
        assert classification_error(logits, np.array([1])) == 1.0

    def test_uniform_random_logits_near_ninety_percent(self):
        g = np.random.default_rng(0)
        logits = g.normal(size=(10_000, 10))
        labels = np.arange(10_000) % 10
        assert classification_error(logits, labels) == pytest.approx(0.9, abs=0.02)


@needs_mnist
class TestOfficialFiles:
    def test_counts(self, mnist_dir):
        train = load_dataset(mnist_dir, "train")
        test = load_dataset(mnist_dir, "test")
        assert len(train) == 60_000
        assert len(test) == 10_000

    def test_gzip_checksums_match_fixtures(self, mnist_dir):
        for name, expected in GZ_SHA256.items():
            path = os.path.join(mnist_dir, name)
            if not os.path.exists(path):
                pytest.skip(f"{name} present only uncompressed")
            with open(path, "rb") as f:
                assert hashlib.sha256(f.read()).hexdigest() == expected, name

    def test_first_training_example_fixture(self, mnist_dir):
        train = load_dataset(mnist_dir, "train")
        assert train.labels[0] == 5
        raw = np.round(train.images[0] * 255.0).astype(np.uint8)
        assert int(raw.sum()) == 27525
        assert hashlib.sha256(raw.tobytes()).hexdigest() == (
            "23ceaef5eb61f0e70d64ac18fdf0f60df3d5971cf30bbadac7b6ebf07f782d2c"
        )

    def test_label_histogram_balanced(self, mnist_dir):
        train = load_dataset(mnist_dir, "train")
        counts = np.bincount(train.labels, minlength=10)
        assert counts.shape == (10,)
        assert counts.min() >= 5400 and counts.max() <= 7000

    def test_normalization_bounds(self, mnist_dir):
        train = load_dataset(mnist_dir, "train")
        assert train.images.min() >= 0.0
        assert train.images.max() == 1.0  # 255/255 present in the official files

    def test_fetch_skips_verified_files(self, mnist_dir):
        # no network needed: all four files exist and pass their checksums
        digests = fetch(mnist_dir)
        assert digests == GZ_SHA256
