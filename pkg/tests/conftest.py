import gzip
import os
import struct

import numpy as np
import pytest

from infoplane import Dataset

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def data_dir():
    return os.environ.get("INFOPLANE_DATA_DIR", os.path.join(REPO_ROOT, "data"))


def mnist_present():
    from infoplane.mnist import FILE_STEMS

    d = data_dir()
    return all(
        os.path.exists(os.path.join(d, stem + ".gz")) or os.path.exists(os.path.join(d, stem))
        for stem in FILE_STEMS
    )


needs_mnist = pytest.mark.skipif(
    not mnist_present(), reason="MNIST files not present; run `infoplane fetch` first"
)


@pytest.fixture(scope="session")
def mnist_dir():
    if not mnist_present():
        pytest.skip("MNIST files not present")
    return data_dir()


def make_synthetic_dataset(rng, n, input_width=12, classes=10):
    """Small separable classification problem: class-dependent Gaussian blobs."""
    centers = rng.generator.normal(size=(classes, input_width)) * 2.0
    labels = rng.generator.integers(0, classes, size=n)
    images = centers[labels] + 0.3 * rng.generator.normal(size=(n, input_width))
    # squash into [0, 1] like pixel data
    images = 1.0 / (1.0 + np.exp(-images))
    return Dataset(images=images, labels=labels.astype(np.int64))


def write_idx_images(path, images_u8):
    """images_u8: (n, 28, 28) uint8."""
    n = images_u8.shape[0]
    payload = struct.pack(">IIII", 0x00000803, n, 28, 28) + images_u8.tobytes()
    if path.endswith(".gz"):
        payload = gzip.compress(payload)
    with open(path, "wb") as f:
        f.write(payload)


def write_idx_labels(path, labels_u8):
    payload = struct.pack(">II", 0x00000801, len(labels_u8)) + bytes(labels_u8)
    if path.endswith(".gz"):
        payload = gzip.compress(payload)
    with open(path, "wb") as f:
        f.write(payload)


@pytest.fixture
def synthetic_mnist_dir(tmp_path):
    """A data directory holding tiny drop-in IDX files (120 train / 80 test)."""
    g = np.random.default_rng(99)
    train_n, test_n = 120, 80
    labels_train = (np.arange(train_n) % 10).astype(np.uint8)
    labels_test = (np.arange(test_n) % 10).astype(np.uint8)

    def images_for(labels, noise_seed):
        noise = np.random.default_rng(noise_seed)
        images = np.zeros((len(labels), 28, 28), dtype=np.uint8)
        for i, lab in enumerate(labels):
            # a blocky class-dependent pattern plus noise
            images[i, lab : lab + 10, lab : lab + 10] = 200
            images[i] += noise.integers(0, 40, size=(28, 28), dtype=np.uint8)
        return images

    d = tmp_path / "data"
    d.mkdir()
    write_idx_images(str(d / "train-images-idx3-ubyte.gz"), images_for(labels_train, 1))
    write_idx_labels(str(d / "train-labels-idx1-ubyte.gz"), labels_train)
    write_idx_images(str(d / "t10k-images-idx3-ubyte.gz"), images_for(labels_test, 2))
    write_idx_labels(str(d / "t10k-labels-idx1-ubyte.gz"), labels_test)
    return str(d)
