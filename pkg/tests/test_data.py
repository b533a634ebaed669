import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare

from gossipdda.data import (
    IDX_IMAGES_MAGIC,
    IDX_LABELS_MAGIC,
    Dataset,
    SampleStream,
    draw,
    generate_synthetic,
    read_idx,
    write_idx,
)
from gossipdda.errors import BadMagic, CountMismatch, IDXError, InvalidParam, TruncatedFile


def perceptron_accuracy(X, y, epochs=50):
    Xa = np.hstack([X, np.ones((len(X), 1))])
    s = np.where(y == 1, 1.0, -1.0)
    w = np.zeros(Xa.shape[1])
    for _ in range(epochs):
        for xi, si in zip(Xa, s):
            if si * (xi @ w) <= 0:
                w += si * xi
    return np.mean(np.sign(Xa @ w) == s)


def test_synthetic_separable_two_class():
    ds = generate_synthetic(2, 5, 400, separation=10.0, seed=3, noise=0.3)
    assert perceptron_accuracy(ds.inputs, ds.labels) >= 0.99


def test_synthetic_one_per_class():
    ds = generate_synthetic(6, 3, 6, seed=0)
    assert sorted(ds.labels.tolist()) == list(range(6))


def test_synthetic_deterministic_bytes():
    a = generate_synthetic(4, 3, 100, seed=9)
    b = generate_synthetic(4, 3, 100, seed=9)
    assert a.inputs.tobytes() == b.inputs.tobytes()
    assert a.labels.tobytes() == b.labels.tobytes()
    assert a.checksum() == b.checksum()
    assert generate_synthetic(4, 3, 100, seed=10).checksum() != a.checksum()


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 8), st.integers(1, 6), st.integers(0, 200), st.integers(0, 10_000))
def test_synthetic_invariants(M, d, extra, seed):
    ds = generate_synthetic(M, d, M + extra, seed=seed)
    assert ds.inputs.min() >= 0.0 and ds.inputs.max() <= 1.0
    counts = np.bincount(ds.labels, minlength=M)
    assert counts.max() - counts.min() <= 1
    assert ds.N == M + extra and ds.d == d and ds.M == M


@pytest.mark.parametrize("args", [(1, 2, 10), (3, 0, 10), (3, 2, 2)])
def test_synthetic_rejects(args):
    with pytest.raises(InvalidParam):
        generate_synthetic(*args)


def test_dataset_is_read_only():
    ds = generate_synthetic(2, 2, 10)
    with pytest.raises(ValueError):
        ds.inputs[0, 0] = 5.0
    with pytest.raises(InvalidParam):
        Dataset(np.zeros((2, 2)), np.array([0, 3]), 2)


def raw_images(count, rows, cols, pixels, magic=IDX_IMAGES_MAGIC):
    return struct.pack(">4I", magic, count, rows, cols) + bytes(pixels)


def raw_labels(labels, magic=IDX_LABELS_MAGIC, count=None):
    return struct.pack(">2I", magic, len(labels) if count is None else count) + bytes(labels)


def test_idx_hand_built_fixture(tmp_path):
    (tmp_path / "i").write_bytes(raw_images(1, 2, 2, [0, 255, 0, 255]))
    (tmp_path / "l").write_bytes(raw_labels([7]))
    ds = read_idx(tmp_path / "i", tmp_path / "l")
    assert (ds.N, ds.d) == (1, 4)
    np.testing.assert_array_equal(ds.inputs[0], [0.0, 1.0, 0.0, 1.0])
    assert ds.labels[0] == 7


def test_idx_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    pixels = rng.integers(0, 256, size=(25, 4, 3), dtype=np.uint8)
    labels = rng.integers(0, 10, size=25)
    write_idx(tmp_path / "i", tmp_path / "l", pixels, labels)
    ds = read_idx(tmp_path / "i", tmp_path / "l")
    np.testing.assert_array_equal(np.rint(ds.inputs * 255).astype(np.uint8), pixels.reshape(25, 12))
    np.testing.assert_array_equal(ds.labels, labels)
    # rewriting reproduces the files byte for byte
    write_idx(tmp_path / "i2", tmp_path / "l2", np.rint(ds.inputs * 255).astype(np.uint8).reshape(25, 4, 3), ds.labels)
    assert (tmp_path / "i2").read_bytes() == (tmp_path / "i").read_bytes()
    assert (tmp_path / "l2").read_bytes() == (tmp_path / "l").read_bytes()


def test_idx_count_mismatch(tmp_path):
    (tmp_path / "i").write_bytes(raw_images(2, 1, 1, [1, 2]))
    (tmp_path / "l").write_bytes(raw_labels([1, 2, 3]))
    with pytest.raises(CountMismatch):
        read_idx(tmp_path / "i", tmp_path / "l")


def test_idx_bad_magic(tmp_path):
    (tmp_path / "i").write_bytes(raw_images(1, 1, 1, [1], magic=0x00000802))
    (tmp_path / "l").write_bytes(raw_labels([1]))
    with pytest.raises(BadMagic):
        read_idx(tmp_path / "i", tmp_path / "l")
    (tmp_path / "i").write_bytes(raw_images(1, 1, 1, [1]))
    (tmp_path / "l").write_bytes(raw_labels([1], magic=0x00000803))
    with pytest.raises(BadMagic):
        read_idx(tmp_path / "i", tmp_path / "l")


@pytest.mark.parametrize(
    "images,labels",
    [
        (raw_images(2, 2, 2, [0] * 7), raw_labels([0, 1])),
        (raw_images(1, 1, 1, [0]), raw_labels([], count=1)),
        (b"\x00\x00\x08", raw_labels([0])),
    ],
)
def test_idx_truncated(tmp_path, images, labels):
    (tmp_path / "i").write_bytes(images)
    (tmp_path / "l").write_bytes(labels)
    with pytest.raises(TruncatedFile) as exc:
        read_idx(tmp_path / "i", tmp_path / "l")
    assert isinstance(exc.value, IDXError)


def test_stream_deterministic_per_key():
    ds = generate_synthetic(3, 2, 500, seed=0)
    s = SampleStream(ds, seed=4)
    a = draw(s, 3, 1, 50)
    b = SampleStream(ds, seed=4).draw(3, 1, 50)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])
    assert not np.array_equal(s.indices(3, 2, 50), s.indices(3, 1, 50))
    assert not np.array_equal(s.indices(4, 1, 50), s.indices(3, 1, 50))


def test_stream_rejects_zero_count():
    s = SampleStream(generate_synthetic(2, 1, 10), 0)
    with pytest.raises(InvalidParam):
        s.indices(1, 0, 0)
    with pytest.raises(InvalidParam):
        SampleStream(s.dataset, 0, mode="partition")


def test_stream_uniformity():
    ds = generate_synthetic(2, 1, 100, seed=0)
    s = SampleStream(ds, seed=1)
    idx = np.concatenate([s.indices(t, node, 10_000) for t in range(25) for node in range(4)])
    assert idx.size == 10**6
    counts = np.bincount(idx, minlength=100)
    assert chisquare(counts).pvalue > 0.001
    expected = idx.size / 100
    sd = np.sqrt(expected * (1 - 1 / 100))
    assert np.all(np.abs(counts - expected) <= 5 * sd)


def test_streams_of_different_nodes_look_independent():
    ds = generate_synthetic(2, 1, 100, seed=0)
    s = SampleStream(ds, seed=2)
    a, b = s.indices(1, 0, 100_000), s.indices(1, 1, 100_000)
    joint = np.bincount((a // 10) * 10 + b // 10, minlength=100)
    assert chisquare(joint).pvalue > 0.001
