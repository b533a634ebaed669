"""Sample sources: synthetic multiclass data, IDX files and keyed streams."""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadMagic, CountMismatch, InvalidParam, TruncatedFile

__all__ = [
    "Dataset",
    "SampleStream",
    "generate_synthetic",
    "read_idx",
    "write_idx",
    "draw",
    "IDX_IMAGES_MAGIC",
    "IDX_LABELS_MAGIC",
]

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class Dataset:
    """``N`` feature rows in ``[0, 1]^d`` with class labels in ``[0, M)``."""

    inputs: np.ndarray
    labels: np.ndarray
    M: int

    def __post_init__(self) -> None:
        X = np.ascontiguousarray(self.inputs, dtype=float)
        y = np.ascontiguousarray(self.labels, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] < 1:
            raise InvalidParam(f"inputs must be (N, d) with N >= 1, got {X.shape}")
        if y.shape != (X.shape[0],):
            raise InvalidParam(f"labels shape {y.shape} does not match N={X.shape[0]}")
        if self.M < 1 or y.min() < 0 or y.max() >= self.M:
            raise InvalidParam(f"labels must lie in [0, {self.M})")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "labels", y)

    @property
    def N(self) -> int:
        return self.inputs.shape[0]

    @property
    def d(self) -> int:
        return self.inputs.shape[1]

    def take(self, idx) -> tuple[np.ndarray, np.ndarray]:
        return self.inputs[idx], self.labels[idx]

    def checksum(self) -> str:
        h = hashlib.sha256()
        h.update(self.inputs.tobytes())
        h.update(self.labels.tobytes())
        return h.hexdigest()[:16]

    def manifest(self) -> dict:
        return {"N": self.N, "d": self.d, "M": self.M, "checksum": self.checksum()}


def _minmax(X: np.ndarray) -> np.ndarray:
    lo, hi = X.min(axis=0), X.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return np.clip((X - lo) / span, 0.0, 1.0)


def generate_synthetic(
    M: int, d: int, N: int, separation: float = 4.0, seed: int = 0, noise: float = 1.0
) -> Dataset:
    """Balanced Gaussian class clusters rescaled per feature to ``[0, 1]``.

    Class centres are drawn at random and scaled so the closest pair is
    exactly ``separation`` apart (before feature rescaling).
    """
    if M < 2 or d < 1 or N < M:
        raise InvalidParam(f"need M >= 2, d >= 1 and N >= M, got M={M}, d={d}, N={N}")
    if separation <= 0 or noise < 0:
        raise InvalidParam("separation must be positive and noise non-negative")
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((M, d))
    dist = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=-1)
    closest = dist[np.triu_indices(M, k=1)].min()
    if closest <= 0:
        raise InvalidParam("degenerate class centres; try another seed")
    centers *= separation / closest
    labels = np.arange(N) % M
    rng.shuffle(labels)
    X = centers[labels] + noise * rng.standard_normal((N, d))
    return Dataset(_minmax(X), labels, M)


# IDX files: big-endian uint32 magic, uint32 dims, then unsigned bytes.

def _read_u32s(buf: bytes, offset: int, count: int, path) -> tuple[int, ...]:
    end = offset + 4 * count
    if len(buf) < end:
        raise TruncatedFile(f"{path}: header truncated")
    return struct.unpack(f">{count}I", buf[offset:end])


def read_idx(images_path: str | Path, labels_path: str | Path) -> Dataset:
    """Read an IDX image/label file pair, scaling pixels by ``1/255``."""
    ibuf = Path(images_path).read_bytes()
    lbuf = Path(labels_path).read_bytes()

    (magic,) = _read_u32s(ibuf, 0, 1, images_path)
    if magic != IDX_IMAGES_MAGIC:
        raise BadMagic(f"{images_path}: magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}")
    count, rows, cols = _read_u32s(ibuf, 4, 3, images_path)
    npix = count * rows * cols
    if len(ibuf) < 16 + npix:
        raise TruncatedFile(f"{images_path}: expected {npix} pixel bytes, found {len(ibuf) - 16}")

    (lmagic,) = _read_u32s(lbuf, 0, 1, labels_path)
    if lmagic != IDX_LABELS_MAGIC:
        raise BadMagic(f"{labels_path}: magic 0x{lmagic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}")
    (lcount,) = _read_u32s(lbuf, 4, 1, labels_path)
    if lcount != count:
        raise CountMismatch(f"{count} images but {lcount} labels")
    if len(lbuf) < 8 + lcount:
        raise TruncatedFile(f"{labels_path}: expected {lcount} label bytes, found {len(lbuf) - 8}")

    pixels = np.frombuffer(ibuf, dtype=np.uint8, count=npix, offset=16)
    labels = np.frombuffer(lbuf, dtype=np.uint8, count=lcount, offset=8).astype(np.int64)
    X = pixels.reshape(count, rows * cols).astype(float) / 255.0
    M = max(10, int(labels.max()) + 1) if count else 10
    return Dataset(X, labels, M)


def write_idx(images_path, labels_path, pixels: np.ndarray, labels) -> None:
    """Write ``pixels`` (``count x rows x cols`` uint8) and labels as IDX files."""
    pixels = np.asarray(pixels, dtype=np.uint8)
    if pixels.ndim != 3:
        raise InvalidParam(f"pixels must be (count, rows, cols), got {pixels.shape}")
    labels = np.asarray(labels, dtype=np.uint8)
    count, rows, cols = pixels.shape
    Path(images_path).write_bytes(
        struct.pack(">4I", IDX_IMAGES_MAGIC, count, rows, cols) + pixels.tobytes()
    )
    Path(labels_path).write_bytes(struct.pack(">2I", IDX_LABELS_MAGIC, labels.size) + labels.tobytes())


@dataclass(frozen=True)
class SampleStream:
    """Uniform with-replacement sampling keyed by ``(seed, round, node)``."""

    dataset: Dataset
    seed: int
    mode: str = "with_replacement"

    def __post_init__(self) -> None:
        if self.mode != "with_replacement":
            raise InvalidParam(f"unsupported sampling mode {self.mode!r}")

    def indices(self, round_: int, node: int, count: int) -> np.ndarray:
        if count < 1:
            raise InvalidParam(f"count must be >= 1, got {count}")
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, round_, node]))
        return rng.integers(0, self.dataset.N, size=count)

    def draw(self, round_: int, node: int, count: int) -> tuple[np.ndarray, np.ndarray]:
        return self.dataset.take(self.indices(round_, node, count))


def draw(stream: SampleStream, round_: int, node: int, count: int):
    return stream.draw(round_, node, count)
