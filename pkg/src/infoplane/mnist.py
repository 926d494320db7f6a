"""MNIST IDX loading, download with checksum verification, and test error.

IDX layout (all integers big-endian):
  images: u32 magic 0x00000803 | u32 count | u32 rows | u32 cols | u8 pixels
  labels: u32 magic 0x00000801 | u32 count | u8 labels
Files may be raw or gzip-compressed (sniffed by the gzip magic bytes).
"""

import gzip
import hashlib
import os
import struct
import urllib.error
import urllib.request
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ShapeError

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

TRAIN_IMAGES = "train-images-idx3-ubyte"
TRAIN_LABELS = "train-labels-idx1-ubyte"
TEST_IMAGES = "t10k-images-idx3-ubyte"
TEST_LABELS = "t10k-labels-idx1-ubyte"
FILE_STEMS = (TRAIN_IMAGES, TRAIN_LABELS, TEST_IMAGES, TEST_LABELS)

# sha256 of the official gzip distribution, recorded from a verified download.
GZ_SHA256 = {
    TRAIN_IMAGES + ".gz": "440fcabf73cc546fa21475e81ea370265605f56be210a4024d2ca8f203523609",
    TRAIN_LABELS + ".gz": "3552534a0a558bbed6aed32b30c495cca23d567ec52cac8be1a0730e8010255c",
    TEST_IMAGES + ".gz": "8d422c7b0a1c1c79245a5bcf07fe86e33eeafee792b84584aec276f5a2dbc4e6",
    TEST_LABELS + ".gz": "f7ae60f92e00ec6debd23a6088c31dbd2371eca3ffa0defaefb259924204aec6",
}

MIRRORS = (
    "https://ossci-datasets.s3.amazonaws.com/mnist/",
    "https://storage.googleapis.com/cvdf-datasets/mnist/",
    "https://yann.lecun.com/exdb/mnist/",
)


@dataclass(frozen=True)
class Dataset:
    """Flattened images in [0, 1] (n x 784) plus integer labels (n,)."""

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise DataError(
                f"image/label counts differ: {self.images.shape[0]} vs {self.labels.shape[0]}"
            )

    def __len__(self):
        return self.images.shape[0]


def _read_bytes(path):
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:2] == b"\x1f\x8b":
        try:
            return gzip.decompress(raw)
        except OSError as exc:
            raise DataError(f"{path}: corrupt gzip stream: {exc}") from exc
    return raw


def _be32(data, offset, what, path):
    if len(data) < offset + 4:
        raise DataError(
            f"{path}: truncated file: need 4 bytes for {what} at byte offset {offset}, "
            f"have {max(0, len(data) - offset)}"
        )
    return struct.unpack_from(">I", data, offset)[0]


def load_idx_images(path):
    """Images from an IDX file as an (n x 784) float64 matrix scaled by 1/255."""
    data = _read_bytes(path)
    magic = _be32(data, 0, "magic", path)
    if magic != IMAGE_MAGIC:
        raise DataError(
            f"{path}: bad magic 0x{magic:08x} at byte offset 0, expected 0x{IMAGE_MAGIC:08x}"
        )
    n = _be32(data, 4, "image count", path)
    rows = _be32(data, 8, "row count", path)
    cols = _be32(data, 12, "column count", path)
    if rows != 28 or cols != 28:
        raise DataError(
            f"{path}: unexpected image dimensions {rows}x{cols} at byte offset 8, expected 28x28"
        )
    expected = n * rows * cols
    actual = len(data) - 16
    if actual != expected:
        raise DataError(
            f"{path}: expected {expected} pixel bytes at byte offset 16, found {actual}"
        )
    pixels = np.frombuffer(data, dtype=np.uint8, offset=16).reshape(n, rows * cols)
    return pixels.astype(np.float64) / 255.0


def load_idx_labels(path):
    """Labels from an IDX file as an (n,) int64 vector with values in 0..9."""
    data = _read_bytes(path)
    magic = _be32(data, 0, "magic", path)
    if magic != LABEL_MAGIC:
        raise DataError(
            f"{path}: bad magic 0x{magic:08x} at byte offset 0, expected 0x{LABEL_MAGIC:08x}"
        )
    n = _be32(data, 4, "label count", path)
    actual = len(data) - 8
    if actual != n:
        raise DataError(f"{path}: expected {n} label bytes at byte offset 8, found {actual}")
    labels = np.frombuffer(data, dtype=np.uint8, offset=8)
    bad = np.nonzero(labels > 9)[0]
    if bad.size:
        raise DataError(
            f"{path}: label {labels[bad[0]]} out of range 0..9 at byte offset {8 + int(bad[0])}"
        )
    return labels.astype(np.int64)


def _resolve(data_dir, stem):
    for candidate in (os.path.join(data_dir, stem + ".gz"), os.path.join(data_dir, stem)):
        if os.path.exists(candidate):
            return candidate
    raise DataError(
        f"missing dataset file {stem}[.gz] in {data_dir!r}; run the fetch subcommand first"
    )


def load_dataset(data_dir, split):
    """Dataset for split "train" or "test" from data_dir."""
    if split == "train":
        image_stem, label_stem = TRAIN_IMAGES, TRAIN_LABELS
    elif split == "test":
        image_stem, label_stem = TEST_IMAGES, TEST_LABELS
    else:
        raise ValueError(f"unknown split {split!r}, expected 'train' or 'test'")
    return Dataset(
        images=load_idx_images(_resolve(data_dir, image_stem)),
        labels=load_idx_labels(_resolve(data_dir, label_stem)),
    )


def test_error(logits, labels):
    """Fraction of rows whose argmax (ties to the lowest class index)
    disagrees with the label."""
    logits = np.asarray(logits)
    labels = np.asarray(labels)
    if logits.ndim != 2 or logits.shape[0] != labels.shape[0]:
        raise ShapeError(f"logits {logits.shape} do not match {labels.shape} labels")
    return float(np.mean(np.argmax(logits, axis=1) != labels))


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def fetch(data_dir, base_url=None, force=False):
    """Download the four gzip files into data_dir and verify their sha256.

    Tries base_url (or the INFOPLANE_MNIST_URL environment variable) first,
    then the known mirrors. Existing files that pass verification are kept
    unless force is set. Returns {filename: sha256}.
    """
    os.makedirs(data_dir, exist_ok=True)
    env_url = os.environ.get("INFOPLANE_MNIST_URL")
    bases = [u.rstrip("/") + "/" for u in (base_url, env_url) if u]
    bases.extend(MIRRORS)

    digests = {}
    for stem in FILE_STEMS:
        name = stem + ".gz"
        target = os.path.join(data_dir, name)
        expected = GZ_SHA256[name]
        if os.path.exists(target) and not force:
            got = _sha256(target)
            if got == expected:
                digests[name] = got
                continue
        failures = []
        for base in bases:
            url = base + name
            try:
                with urllib.request.urlopen(url, timeout=60) as response:
                    payload = response.read()
            except (urllib.error.URLError, OSError, ValueError) as exc:
                failures.append(f"{url}: {exc}")
                continue
            got = hashlib.sha256(payload).hexdigest()
            if got != expected:
                failures.append(f"{url}: sha256 {got} != expected {expected}")
                continue
            tmp = target + ".part"
            with open(tmp, "wb") as f:
                f.write(payload)
            os.replace(tmp, target)
            digests[name] = got
            break
        else:
            detail = "; ".join(failures) if failures else "no sources configured"
            raise DataError(f"could not fetch {name}: {detail}")
    return digests
