"""IDX decoding, preprocessing, batching, and the bundled MNIST files."""

import gzip
import os
import struct

import numpy as np
import pytest

from hopeq.data import Dataset, batches, load_idx, load_mnist, one_hot, parse_idx, preprocess


def idx_images(array: np.ndarray) -> bytes:
    array = np.asarray(array, dtype=np.uint8)
    header = struct.pack(">i", 0x00000803) + struct.pack(f">{array.ndim}i", *array.shape)
    return header + array.tobytes()


def idx_labels(values) -> bytes:
    values = np.asarray(values, dtype=np.uint8)
    return struct.pack(">i", 0x00000801) + struct.pack(">i", len(values)) + values.tobytes()


def test_parse_idx_images():
    pixels = np.arange(12, dtype=np.uint8).reshape(2, 2, 3)
    out = parse_idx(idx_images(pixels))
    assert out.shape == (2, 2, 3) and out.dtype == np.uint8
    np.testing.assert_array_equal(out, pixels)


def test_parse_idx_single_pixel():
    out = parse_idx(idx_images(np.array([[[255]]], dtype=np.uint8)))
    np.testing.assert_array_equal(out, [[[255]]])


def test_parse_idx_labels():
    np.testing.assert_array_equal(parse_idx(idx_labels([7, 2, 1, 0])), [7, 2, 1, 0])


def test_parse_idx_error_paths():
    with pytest.raises(ValueError, match="truncated"):
        parse_idx(b"\x00\x00")
    with pytest.raises(ValueError, match="magic"):
        parse_idx(struct.pack(">i", 0x00000905) + b"\x00" * 8)
    good = idx_images(np.zeros((2, 2, 3), dtype=np.uint8))
    with pytest.raises(ValueError, match="expected"):
        parse_idx(good[:-1])
    with pytest.raises(ValueError, match="expected"):
        parse_idx(good + b"\x00")
    with pytest.raises(ValueError, match="negative"):
        parse_idx(struct.pack(">ii", 0x00000801, -3))
    with pytest.raises(ValueError, match="overflow"):
        parse_idx(struct.pack(">iiii", 0x00000803, 1 << 20, 1 << 20, 1 << 20))


def test_load_idx_handles_gzip(tmp_path):
    pixels = np.arange(8, dtype=np.uint8).reshape(2, 2, 2)
    plain = tmp_path / "plain.idx"
    plain.write_bytes(idx_images(pixels))
    zipped = tmp_path / "zipped.idx.gz"
    with gzip.open(zipped, "wb") as fh:
        fh.write(idx_images(pixels))
    np.testing.assert_array_equal(load_idx(plain), pixels)
    np.testing.assert_array_equal(load_idx(zipped), pixels)


def test_preprocess_scales_and_flattens():
    raw = np.array([[[0, 255], [128, 64]]], dtype=np.uint8)
    out = preprocess(raw)
    assert out.shape == (1, 4) and out.dtype == np.float64
    np.testing.assert_allclose(out[0], [0.0, 1.0, 128 / 255, 64 / 255], atol=1e-15)
    # every byte value survives the round trip exactly
    all_vals = np.arange(256, dtype=np.uint8).reshape(1, -1)
    np.testing.assert_array_equal(preprocess(all_vals) * 255.0, all_vals.astype(np.float64))


def test_one_hot():
    out = one_hot(np.array([3, 0]))
    assert out.shape == (2, 10)
    np.testing.assert_array_equal(out[0], np.eye(10)[3])
    np.testing.assert_array_equal(out[1], np.eye(10)[0])


def test_dataset_validation():
    with pytest.raises(ValueError, match="disagree"):
        Dataset(images=np.zeros((3, 4)), labels=np.zeros(2, dtype=np.int64), split="train")
    with pytest.raises(ValueError, match="pixel"):
        Dataset(images=np.full((2, 4), 2.0), labels=np.zeros(2, dtype=np.int64), split="train")


def write_mnist_dir(tmp_path, n=6):
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(7)))
    images = rng.integers(0, 256, size=(n, 4, 3), dtype=np.uint8)
    labels = rng.integers(0, 10, size=n, dtype=np.uint8)
    names = {
        "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
        "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
    }
    for split, (img_name, lbl_name) in names.items():
        with gzip.open(os.path.join(tmp_path, img_name + ".gz"), "wb") as fh:
            fh.write(idx_images(images))
        with gzip.open(os.path.join(tmp_path, lbl_name + ".gz"), "wb") as fh:
            fh.write(idx_labels(labels))
    return images, labels


def test_load_mnist_from_idx_fixtures(tmp_path):
    images, labels = write_mnist_dir(tmp_path)
    ds = load_mnist(tmp_path, "train")
    assert ds.images.shape == (6, 12)
    np.testing.assert_array_equal(ds.labels, labels.astype(np.int64))
    np.testing.assert_allclose(ds.images * 255.0, images.reshape(6, -1), atol=1e-12)

    limited = load_mnist(tmp_path, "test", limit=2)
    assert len(limited) == 2

    with pytest.raises(ValueError, match="split"):
        load_mnist(tmp_path, "validation")
    with pytest.raises(FileNotFoundError, match="train-images"):
        load_mnist(tmp_path / "nowhere", "train")


def test_batches_cover_the_dataset_exactly_once(tmp_path):
    write_mnist_dir(tmp_path, n=10)
    ds = load_mnist(tmp_path, "train")
    got = list(batches(ds, 4, seed=3))
    assert [xb.shape[0] for xb, _ in got] == [4, 4, 2]
    seen = np.concatenate([np.argmax(yb, axis=1) for _, yb in got])
    rows = np.concatenate([xb for xb, _ in got])
    # reassemble: every sample appears once, inputs paired with their labels
    order = []
    for row, label in zip(rows, seen):
        matches = np.flatnonzero((np.abs(ds.images - row) < 1e-12).all(axis=1))
        assert len(matches) >= 1
        assert any(ds.labels[m] == label for m in matches)
        order.append(matches[0])
    assert sorted(set(order)) == list(range(10))


def test_batches_are_deterministic_per_seed(tmp_path):
    write_mnist_dir(tmp_path, n=10)
    ds = load_mnist(tmp_path, "train")
    a = [xb for xb, _ in batches(ds, 4, seed=5)]
    b = [xb for xb, _ in batches(ds, 4, seed=5)]
    c = [xb for xb, _ in batches(ds, 4, seed=6)]
    for xa, xb in zip(a, b):
        np.testing.assert_array_equal(xa, xb)
    assert any((xa != xc).any() for xa, xc in zip(a, c))


def test_batches_unshuffled_and_errors(tmp_path):
    write_mnist_dir(tmp_path, n=5)
    ds = load_mnist(tmp_path, "train")
    got = list(batches(ds, 2, shuffle=False))
    np.testing.assert_array_equal(got[0][0], ds.images[:2])
    with pytest.raises(ValueError, match="batch_size"):
        list(batches(ds, 0))
    empty = Dataset(images=np.zeros((0, 4)), labels=np.zeros(0, dtype=np.int64), split="train")
    with pytest.raises(ValueError, match="empty"):
        list(batches(empty, 2))


def test_bundled_mnist_head(mnist_dir):
    ds = load_mnist(mnist_dir, "train", limit=10)
    assert ds.images.shape == (10, 784)
    assert ds.images.min() >= 0.0 and ds.images.max() <= 1.0
    np.testing.assert_array_equal(ds.labels, [5, 0, 4, 1, 9, 2, 1, 3, 1, 4])
