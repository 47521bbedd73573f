"""IDX dataset ingestion (MNIST and drop-in replacements), preprocessing,
one-hot labels, and seeded batching.

Files are read from a local directory; `.gz` inputs are decompressed on the
fly.  Nothing here touches the network except the optional fetch helper.
"""

from __future__ import annotations

import gzip
import os
import struct
import urllib.request
from dataclasses import dataclass

import numpy as np

IDX_MAGIC_IMAGES = 0x00000803
IDX_MAGIC_LABELS = 0x00000801

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}

DEFAULT_MIRROR = "https://ossci-datasets.s3.amazonaws.com/mnist/"


@dataclass
class Dataset:
    images: np.ndarray  # (n, 784) float64 in [0, 1]
    labels: np.ndarray  # (n,) int64 in [0, 9]
    split: str

    def __post_init__(self):
        if self.images.ndim != 2 or self.images.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"images {self.images.shape} and labels {self.labels.shape} disagree"
            )
        if self.images.size and (self.images.min() < 0.0 or self.images.max() > 1.0):
            raise ValueError("pixel values must lie in [0, 1]")

    def __len__(self) -> int:
        return self.images.shape[0]


def parse_idx(data: bytes) -> np.ndarray:
    """Decode one IDX payload (big-endian header, u8 data) to an ndarray."""
    if len(data) < 4:
        raise ValueError(f"IDX header truncated: {len(data)} bytes")
    (magic,) = struct.unpack_from(">i", data, 0)
    if magic not in (IDX_MAGIC_IMAGES, IDX_MAGIC_LABELS):
        raise ValueError(f"bad IDX magic 0x{magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(data) < header:
        raise ValueError(f"IDX header truncated: {len(data)} bytes, need {header}")
    shape = struct.unpack_from(f">{ndim}i", data, 4)
    if any(d < 0 for d in shape):
        raise ValueError(f"negative IDX dimension in {shape}")
    count = int(np.prod(shape, dtype=np.int64))
    if count > 1 << 33:
        raise ValueError(f"IDX dimensions {shape} overflow a sane payload")
    expected = header + count
    if len(data) != expected:
        raise ValueError(f"IDX payload holds {len(data)} bytes, expected {expected}")
    return np.frombuffer(data, dtype=np.uint8, offset=header).reshape(shape).copy()


def load_idx(path) -> np.ndarray:
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rb") as fh:
        return parse_idx(fh.read())


def preprocess(raw: np.ndarray) -> np.ndarray:
    """u8 images -> float64 rows in [0, 1], flattened."""
    raw = np.asarray(raw)
    flat = raw.reshape(raw.shape[0], -1) if raw.ndim > 1 else raw.reshape(1, -1)
    return flat.astype(np.float64) / 255.0


def one_hot(labels, num_classes: int = 10) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.shape[0], num_classes), dtype=np.float64)
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def _find_file(data_dir, name: str) -> str:
    for candidate in (name, name + ".gz"):
        path = os.path.join(data_dir, candidate)
        if os.path.exists(path):
            return path
    raise FileNotFoundError(f"{name}[.gz] not found under {data_dir}")


def load_mnist(data_dir, split: str, limit: int | None = None) -> Dataset:
    """Load one split from IDX files in data_dir (gzipped or plain)."""
    if split not in MNIST_FILES:
        raise ValueError(f"split must be train or test, got {split!r}")
    img_name, lbl_name = MNIST_FILES[split]
    images = load_idx(_find_file(data_dir, img_name))
    labels = load_idx(_find_file(data_dir, lbl_name)).astype(np.int64)
    if images.shape[0] != labels.shape[0]:
        raise ValueError(
            f"{img_name} has {images.shape[0]} samples, {lbl_name} has {labels.shape[0]}"
        )
    if limit is not None:
        images, labels = images[:limit], labels[:limit]
    return Dataset(images=preprocess(images), labels=labels, split=split)


def batches(ds: Dataset, batch_size: int, seed: int = 0, shuffle: bool = True):
    """Yield (inputs, one-hot targets) covering the dataset exactly once;
    the final partial batch is included."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    n = len(ds)
    if n == 0:
        raise ValueError("empty dataset")
    order = np.arange(n)
    if shuffle:
        order = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed))).permutation(n)
    targets = one_hot(ds.labels)
    for start in range(0, n, batch_size):
        idx = order[start : start + batch_size]
        yield ds.images[idx], targets[idx]


def fetch_mnist(data_dir, base_url: str = DEFAULT_MIRROR) -> None:
    """Download the canonical gzip archives into data_dir (convenience only;
    tests never go to the network)."""
    os.makedirs(data_dir, exist_ok=True)
    for img, lbl in MNIST_FILES.values():
        for name in (img, lbl):
            dest = os.path.join(data_dir, name + ".gz")
            if os.path.exists(dest):
                continue
            urllib.request.urlretrieve(base_url + name + ".gz", dest)
