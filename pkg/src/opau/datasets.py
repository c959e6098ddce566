"""IDX (MNIST) and CSV dataset loading.

IDX layout, big-endian::

    [0x00 0x00 type ndim] [dim_0] ... [dim_{ndim-1}] payload

with ``type = 0x08`` (unsigned byte).  Images use magic ``0x00000803``
(count x rows x cols), labels ``0x00000801`` (count).  Gzipped files are
detected by their header and read transparently.
"""
from __future__ import annotations

import csv
import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "DatasetError",
    "IdxMagicError",
    "TruncatedIdxError",
    "LabelRangeError",
    "DatasetBatch",
    "read_idx",
    "write_idx",
    "load_idx",
    "load_csv",
]

IDX_IMAGES = 0x00000803
IDX_LABELS = 0x00000801


class DatasetError(ValueError):
    pass


class IdxMagicError(DatasetError):
    pass


class TruncatedIdxError(DatasetError):
    pass


class LabelRangeError(DatasetError):
    pass


@dataclass
class DatasetBatch:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.size:
            raise DatasetError(
                f"{self.features.shape} features do not match {self.labels.size} labels"
            )
        if not np.all(np.isfinite(self.features)):
            raise DatasetError("features contain non-finite values")
        _check_label_range(self.labels, self.num_classes)

    def __len__(self):
        return self.labels.size

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "DatasetBatch":
        return DatasetBatch(self.features[idx], self.labels[idx], self.num_classes)

    def batches(self, batch_size: int, rng: np.random.Generator | None = None):
        """Yield mini-batches, shuffled when ``rng`` is given."""
        if batch_size < 1:
            raise ValueError("batch size must be >= 1")
        order = rng.permutation(len(self)) if rng is not None else np.arange(len(self))
        for start in range(0, len(self), batch_size):
            yield self.subset(order[start : start + batch_size])


def _check_label_range(labels, num_classes):
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        bad = labels[(labels < 0) | (labels >= num_classes)][0]
        raise LabelRangeError(f"label {bad} outside [0, {num_classes})")


def _read_bytes(path) -> bytes:
    data = Path(path).read_bytes()
    if data[:2] == b"\x1f\x8b":
        data = gzip.decompress(data)
    return data


def read_idx(path, expect_magic: int | None = None) -> np.ndarray:
    """Parse an unsigned-byte IDX file into an array of its declared shape."""
    data = _read_bytes(path)
    if len(data) < 4:
        raise TruncatedIdxError(f"{path}: file shorter than the IDX header")
    (magic,) = struct.unpack(">I", data[:4])
    if magic >> 8 != 0x08 or (expect_magic is not None and magic != expect_magic):
        want = f"0x{expect_magic:08x}" if expect_magic is not None else "an unsigned-byte IDX magic"
        raise IdxMagicError(f"{path}: magic 0x{magic:08x}, expected {want}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(data) < header:
        raise TruncatedIdxError(f"{path}: truncated dimension header")
    dims = struct.unpack(f">{ndim}I", data[4:header])
    count = int(np.prod(dims, dtype=np.int64))
    if len(data) - header < count:
        raise TruncatedIdxError(
            f"{path}: payload has {len(data) - header} bytes, header declares {count}"
        )
    return np.frombuffer(data, dtype=np.uint8, count=count, offset=header).reshape(dims)


def write_idx(path, array: np.ndarray, compress: bool | None = None):
    arr = np.ascontiguousarray(array, dtype=np.uint8)
    header = struct.pack(">I", 0x0800 | arr.ndim) + struct.pack(f">{arr.ndim}I", *arr.shape)
    payload = header + arr.tobytes()
    path = Path(path)
    if compress or (compress is None and path.suffix == ".gz"):
        payload = gzip.compress(payload, mtime=0)
    path.write_bytes(payload)


def load_idx(images_path, labels_path=None, num_classes: int = 10) -> DatasetBatch:
    """Images scaled to [0, 1] and flattened to one row per sample.

    Without ``labels_path`` every label is 0.
    """
    images = read_idx(images_path, IDX_IMAGES)
    features = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    if labels_path is None:
        labels = np.zeros(images.shape[0], dtype=np.int64)
    else:
        labels = read_idx(labels_path, IDX_LABELS).astype(np.int64)
        if labels.size != images.shape[0]:
            raise DatasetError(f"{labels.size} labels for {images.shape[0]} images")
    _check_label_range(labels, num_classes)
    return DatasetBatch(features, labels, num_classes)


def load_csv(path, label_column: str | None = None, num_classes: int | None = None) -> DatasetBatch:
    """UTF-8 CSV with a header row.

    ``label_column`` names the integer label column (default: the last
    column); all other columns are features.  ``num_classes`` defaults to
    ``max(label) + 1``.
    """
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty CSV file") from None
        rows = [row for row in reader if row]
    if label_column is None:
        li = len(header) - 1
    elif label_column in header:
        li = header.index(label_column)
    else:
        raise DatasetError(f"{path}: no column named {label_column!r} in {header}")
    feats, labels = [], []
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise DatasetError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            label = float(row[li])
            feats.append([float(v) for j, v in enumerate(row) if j != li])
        except ValueError as exc:
            raise DatasetError(f"{path}:{lineno}: {exc}") from None
        if label != int(label):
            raise DatasetError(f"{path}:{lineno}: label {row[li]!r} is not an integer")
        labels.append(int(label))
    labels_arr = np.array(labels, dtype=np.int64)
    features = np.array(feats, dtype=np.float64).reshape(len(rows), len(header) - 1)
    if num_classes is None:
        num_classes = int(labels_arr.max()) + 1 if labels_arr.size else 1
    _check_label_range(labels_arr, num_classes)
    return DatasetBatch(features, labels_arr, num_classes)
