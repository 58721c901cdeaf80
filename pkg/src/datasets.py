"""
Dataset ingestion and client partitioning

Supports MNIST in the IDX file format (plain or gzip-compressed) and a
synthetic Gaussian-blobs classification set for fast experiments.

Author: Edgar McOchieng
"""

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from config.logger import get_logger
from .errors import DatasetError
from .rng import substream

logger = get_logger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
IDX_UBYTE = 0x08

MNIST_FILES = {
    "images": ("train-images-idx3-ubyte", "train-images.idx3-ubyte"),
    "labels": ("train-labels-idx1-ubyte", "train-labels.idx1-ubyte"),
}

PARTITION_MODES = ("iid", "dirichlet")


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with integer class labels"""

    features: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        if len(self.features) != len(self.labels):
            raise DatasetError(
                f"{len(self.features)} feature rows but {len(self.labels)} labels"
            )
        if len(self.labels):
            low, high = int(np.min(self.labels)), int(np.max(self.labels))
            if low < 0 or high >= self.n_classes:
                raise DatasetError(
                    f"Labels must lie in [0, {self.n_classes}), found range [{low}, {high}]"
                )

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, indices: np.ndarray) -> "Dataset":
        return Dataset(self.features[indices], self.labels[indices], self.n_classes)


@dataclass(frozen=True)
class DatasetShard:
    """Local dataset held by one client"""

    client: int
    features: np.ndarray
    labels: np.ndarray
    indices: np.ndarray

    def __len__(self) -> int:
        return len(self.labels)


# =============================================================================
# IDX parsing
# =============================================================================

def _open_bytes(path: Path) -> bytes:
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        try:
            return gzip.decompress(raw)
        except (OSError, EOFError) as e:
            raise DatasetError(f"Corrupt gzip file {path}: {e}")
    return raw


def read_idx(path, expected_magic: Optional[int] = None) -> np.ndarray:
    """
    Parse an IDX file into an array of unsigned bytes

    Layout: big-endian 32-bit magic (0x0000 | type | ndim), ndim big-endian
    32-bit dimension sizes, then the data.

    Raises:
        DatasetError: On bad magic, unsupported type, or truncated data
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"IDX file not found: {path}")
    raw = _open_bytes(path)
    if len(raw) < 4:
        raise DatasetError(f"IDX file too short for a header: {path}")

    (magic,) = struct.unpack(">I", raw[:4])
    if expected_magic is not None and magic != expected_magic:
        raise DatasetError(f"Bad IDX magic 0x{magic:08x} in {path} (expected 0x{expected_magic:08x})")
    if magic >> 16 != 0:
        raise DatasetError(f"Bad IDX magic 0x{magic:08x} in {path}")
    dtype_code = (magic >> 8) & 0xFF
    ndim = magic & 0xFF
    if dtype_code != IDX_UBYTE:
        raise DatasetError(f"Unsupported IDX element type 0x{dtype_code:02x} in {path}")

    header_end = 4 + 4 * ndim
    if len(raw) < header_end:
        raise DatasetError(f"IDX header truncated in {path}")
    dims = struct.unpack(">" + "I" * ndim, raw[4:header_end])
    expected = int(np.prod(dims)) if dims else 0
    payload = raw[header_end:]
    if len(payload) != expected:
        raise DatasetError(
            f"IDX payload in {path} has {len(payload)} bytes, header declares {expected}"
        )
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims)


def _find(directory: Path, names: Sequence[str]) -> Path:
    for name in names:
        for candidate in (directory / name, directory / f"{name}.gz"):
            if candidate.exists():
                return candidate
    raise DatasetError(f"None of {', '.join(names)} found in {directory}")


def load_mnist(directory) -> Dataset:
    """Load the MNIST training images and labels from a directory"""
    directory = Path(directory)
    images = read_idx(_find(directory, MNIST_FILES["images"]), IDX_IMAGES_MAGIC)
    labels = read_idx(_find(directory, MNIST_FILES["labels"]), IDX_LABELS_MAGIC)
    if images.ndim != 3:
        raise DatasetError(f"MNIST images must be 3-D, got shape {images.shape}")
    if len(images) != len(labels):
        raise DatasetError(f"{len(images)} images but {len(labels)} labels")
    features = images.reshape(len(images), -1).astype(np.float64) / 255.0
    logger.info(f"Loaded {len(labels)} MNIST examples from {directory}")
    return Dataset(features=features, labels=labels.astype(np.int64), n_classes=10)


# =============================================================================
# Synthetic data
# =============================================================================

def make_synthetic(n: int = 6000, n_features: int = 20, n_classes: int = 10, seed: int = 0,
                   cluster_std: float = 1.0, class_sep: float = 2.0) -> Dataset:
    """Balanced Gaussian blobs: one isotropic cluster per class"""
    if n < 1 or n_features < 1 or n_classes < 2:
        raise DatasetError(f"Invalid synthetic dataset size (n={n}, features={n_features}, classes={n_classes})")
    rng = substream(seed, "synthetic")
    centers = rng.normal(0.0, class_sep, size=(n_classes, n_features))
    labels = rng.permutation(np.arange(n) % n_classes)
    features = centers[labels] + rng.normal(0.0, cluster_std, size=(n, n_features))
    return Dataset(features=features, labels=labels.astype(np.int64), n_classes=n_classes)


def load_dataset(source: str, seed: int = 0, validation_fraction: float = 0.1,
                 synthetic: Optional[Dict[str, float]] = None) -> Tuple[Dataset, Dataset]:
    """
    Load a dataset and hold out the BS validation split

    Args:
        source: "synthetic", or a directory holding MNIST IDX files
        seed: Root seed (synthetic generation and the hold-out split)
        validation_fraction: Share of examples reserved for the BS
        synthetic: Keyword overrides for make_synthetic

    Returns:
        (train, validation)
    """
    if source == "synthetic":
        data = make_synthetic(seed=seed, **(synthetic or {}))
    else:
        data = load_mnist(source)

    if not 0 < validation_fraction < 1:
        raise DatasetError(f"validation_fraction must be in (0, 1) (got {validation_fraction})")
    order = substream(seed, "data").permutation(len(data))
    n_val = max(1, int(round(validation_fraction * len(data))))
    if n_val >= len(data):
        raise DatasetError("Validation split leaves no training data")
    return data.subset(np.sort(order[n_val:])), data.subset(np.sort(order[:n_val]))


# =============================================================================
# Partitioning
# =============================================================================

def partition(train: Dataset, clients: Sequence[int], mode: str = "iid", seed: int = 0,
              alpha_dir: float = 0.5) -> Dict[int, DatasetShard]:
    """
    Split the training set into disjoint client shards

    iid: uniform random split into near-equal shards.
    dirichlet: each class is divided across clients by proportions drawn
    from Dirichlet(alpha_dir); larger alpha_dir approaches iid.

    Every client receives at least one example.

    Raises:
        DatasetError: If there are more clients than examples or the mode is unknown
    """
    clients = list(clients)
    n_clients = len(clients)
    if n_clients == 0:
        return {}
    if len(train) < n_clients:
        raise DatasetError(f"Cannot give {n_clients} clients at least one of {len(train)} examples")
    rng = substream(seed, "partition")

    if mode == "iid":
        parts = np.array_split(rng.permutation(len(train)), n_clients)
    elif mode == "dirichlet":
        if not alpha_dir > 0:
            raise DatasetError(f"alpha_dir must be > 0 (got {alpha_dir})")
        buckets = [[] for _ in range(n_clients)]
        for label in range(train.n_classes):
            members = rng.permutation(np.flatnonzero(train.labels == label))
            if len(members) == 0:
                continue
            fractions = rng.dirichlet(np.full(n_clients, alpha_dir))
            cuts = (np.cumsum(fractions)[:-1] * len(members)).astype(int)
            for bucket, chunk in zip(buckets, np.split(members, cuts)):
                bucket.extend(chunk.tolist())
        parts = [np.array(b, dtype=np.int64) for b in buckets]
        _fill_empty(parts)
    else:
        raise DatasetError(f"Unknown partition mode '{mode}' (known: {', '.join(PARTITION_MODES)})")

    shards = {}
    for client, part in zip(clients, parts):
        part = np.sort(np.asarray(part, dtype=np.int64))
        shards[client] = DatasetShard(client=client, features=train.features[part],
                                      labels=train.labels[part], indices=part)
    return shards


def _fill_empty(parts) -> None:
    """Move one example from the largest shard into each empty shard"""
    for i, part in enumerate(parts):
        if len(part) == 0:
            donor = int(np.argmax([len(p) for p in parts]))
            parts[i] = parts[donor][-1:]
            parts[donor] = parts[donor][:-1]
