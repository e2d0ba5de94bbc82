"""Reader and writer for the big-endian IDX files MNIST and Fashion-MNIST ship in."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from stdpsim.errors import IdxParseError

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
N_CLASSES = 10


@dataclass
class IdxDataset:
    images: np.ndarray  # (n, rows, cols) uint8
    labels: np.ndarray  # (n,) uint8

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise IdxParseError(
                f"{self.images.shape[0]} images but {self.labels.shape[0]} labels", 0)

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def flat(self) -> np.ndarray:
        """Images as (n, rows*cols) intensity vectors."""
        return self.images.reshape(len(self), -1)

    def head(self, n: int) -> "IdxDataset":
        return IdxDataset(self.images[:n], self.labels[:n])


def _read_bytes(path) -> bytes:
    path = Path(path)
    data = path.read_bytes()
    if data[:2] == b"\x1f\x8b":
        data = gzip.decompress(data)
    return data


def _header(data: bytes, magic: int, ndim: int, what: str) -> tuple[int, ...]:
    if len(data) < 4:
        raise IdxParseError(f"{what} file truncated in magic number ({len(data)} bytes)", len(data))
    (got,) = struct.unpack(">I", data[:4])
    if got != magic:
        raise IdxParseError(f"wrong magic 0x{got:08x} for {what} file, expected 0x{magic:08x}", 0)
    end = 4 + 4 * ndim
    if len(data) < end:
        raise IdxParseError(f"{what} file truncated in dimension header", len(data))
    return struct.unpack(f">{ndim}I", data[4:end])


def parse_images(data: bytes) -> np.ndarray:
    n, rows, cols = _header(data, IMAGES_MAGIC, 3, "images")
    need = 16 + n * rows * cols
    if len(data) < need:
        raise IdxParseError(f"images payload truncated: expected {need} bytes, got {len(data)}", len(data))
    if len(data) > need:
        raise IdxParseError(f"{len(data) - need} trailing bytes after images payload", need)
    return np.frombuffer(data, dtype=np.uint8, count=n * rows * cols, offset=16).reshape(n, rows, cols).copy()


def parse_labels(data: bytes, n_classes: int = N_CLASSES) -> np.ndarray:
    (n,) = _header(data, LABELS_MAGIC, 1, "labels")
    need = 8 + n
    if len(data) < need:
        raise IdxParseError(f"labels payload truncated: expected {need} bytes, got {len(data)}", len(data))
    if len(data) > need:
        raise IdxParseError(f"{len(data) - need} trailing bytes after labels payload", need)
    labels = np.frombuffer(data, dtype=np.uint8, count=n, offset=8).copy()
    bad = np.flatnonzero(labels >= n_classes)
    if bad.size:
        raise IdxParseError(f"label {labels[bad[0]]} outside [0, {n_classes - 1}]", 8 + int(bad[0]))
    return labels


def load_idx(images_path, labels_path) -> IdxDataset:
    images = parse_images(_read_bytes(images_path))
    labels = parse_labels(_read_bytes(labels_path))
    if images.shape[0] != labels.shape[0]:
        raise IdxParseError(f"count mismatch: {images.shape[0]} images, {labels.shape[0]} labels", 4)
    return IdxDataset(images, labels)


def encode_images(images: np.ndarray) -> bytes:
    images = np.asarray(images, dtype=np.uint8)
    n, rows, cols = images.shape
    return struct.pack(">4I", IMAGES_MAGIC, n, rows, cols) + images.tobytes()


def encode_labels(labels: np.ndarray) -> bytes:
    labels = np.asarray(labels, dtype=np.uint8)
    return struct.pack(">2I", LABELS_MAGIC, labels.shape[0]) + labels.tobytes()


def write_idx(dataset: IdxDataset, images_path, labels_path):
    Path(images_path).write_bytes(encode_images(dataset.images))
    Path(labels_path).write_bytes(encode_labels(dataset.labels))
