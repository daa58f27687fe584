"""Datasets: seeded Gaussian blobs, CSV (label,pixels...) and IDX files."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IDX_IMAGES = 0x00000803
IDX_LABELS = 0x00000801


@dataclass
class Dataset:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=np.int64)
        if len(self.x) != len(self.y):
            raise ValueError(f"{len(self.x)} samples but {len(self.y)} labels")

    def __len__(self):
        return len(self.y)

    @property
    def n_classes(self):
        return int(self.y.max()) + 1 if len(self) else 0

    @property
    def sample_shape(self):
        return self.x.shape[1:]

    def subset(self, idx):
        return Dataset(self.x[idx], self.y[idx])


def make_blobs(n_samples=400, n_features=2, n_classes=2, spread=1.0, separation=4.0, seed=0,
               n_informative=None):
    """Isotropic Gaussian clusters whose centers sit ``separation`` apart on average.

    Only the first ``n_informative`` features (default: all) carry class
    information; the rest are pure noise.
    """
    rng = np.random.default_rng(seed)
    k = n_features if n_informative is None else n_informative
    if not 1 <= k <= n_features:
        raise ValueError(f"n_informative must be in [1, {n_features}], got {k}")
    centers = np.zeros((n_classes, n_features))
    centers[:, :k] = rng.normal(size=(n_classes, k)) * (separation / np.sqrt(2 * k))
    y = np.arange(n_samples) % n_classes
    x = centers[y] + rng.normal(scale=spread, size=(n_samples, n_features))
    perm = rng.permutation(n_samples)
    return Dataset(x[perm], y[perm])


def split(data, test_fraction=0.25, seed=0):
    perm = np.random.default_rng(seed).permutation(len(data))
    n_test = int(round(len(data) * test_fraction))
    return data.subset(perm[n_test:]), data.subset(perm[:n_test])


def load_csv(path, image_shape=None, scale=1.0):
    """Rows of ``label,v1,v2,...``; an optional non-numeric header row is skipped."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    with path.open() as f:
        first = f.readline()
    skip = 0 if first.split(",")[0].strip().lstrip("-").isdigit() else 1
    raw = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
    x = raw[:, 1:] * scale
    if image_shape is not None:
        x = x.reshape((len(x), *image_shape))
    return Dataset(x, raw[:, 0].astype(np.int64))


def _open(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    return gzip.open(path, "rb") if path.suffix == ".gz" else path.open("rb")


def read_idx(path):
    """Array stored in an IDX file (unsigned-byte payload)."""
    with _open(path) as f:
        magic = struct.unpack(">I", f.read(4))[0]
        if magic not in (IDX_IMAGES, IDX_LABELS):
            raise ValueError(f"{path}: unsupported IDX magic 0x{magic:08x}")
        ndim = magic & 0xFF
        dims = struct.unpack(f">{ndim}I", f.read(4 * ndim))
        data = np.frombuffer(f.read(), dtype=np.uint8)
    if data.size != int(np.prod(dims)):
        raise ValueError(f"{path}: payload has {data.size} bytes, header promises {int(np.prod(dims))}")
    return data.reshape(dims)


def write_idx(path, array):
    array = np.asarray(array, dtype=np.uint8)
    magic = {1: IDX_LABELS, 3: IDX_IMAGES}.get(array.ndim)
    if magic is None:
        raise ValueError("IDX writer supports 1-d labels or 3-d images")
    with open(path, "wb") as f:
        f.write(struct.pack(">I", magic))
        f.write(struct.pack(f">{array.ndim}I", *array.shape))
        f.write(array.tobytes())


def load_idx(images, labels, scale=1 / 255.0, channels_first=True):
    x = read_idx(images).astype(float) * scale
    y = read_idx(labels).astype(np.int64)
    if channels_first and x.ndim == 3:
        x = x[:, None]
    return Dataset(x, y)


def batch_order(n, batch_size, seed, epoch):
    """Index batches for one epoch; the shuffle depends only on (seed, epoch)."""
    if n < 1:
        raise ValueError("dataset is empty")
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    perm = np.random.default_rng([seed, epoch]).permutation(n)
    return [perm[i:i + batch_size] for i in range(0, n, batch_size)]
