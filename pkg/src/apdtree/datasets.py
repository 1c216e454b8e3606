"""Synthetic data generation and dataset file formats.

Synthetic points: each point draws a peak ``p ~ U[0, 1]`` and then every
coordinate from ``N(p, 1)``. Point ``i`` uses its own Philox stream keyed by
``(seed, i)`` with Box-Muller normals, so any row can be regenerated alone.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import Dataset
from .rules import box_muller

__all__ = [
    "SyntheticSpec",
    "gen_synthetic",
    "synthetic_point",
    "DatasetFormatError",
    "BadMagicError",
    "TruncatedFileError",
    "DimensionMismatchError",
    "EmptyFileError",
    "RaggedRowError",
    "NonNumericCellError",
    "load_idx_images",
    "load_delimited",
    "save_dataset",
    "load_dataset",
    "dataset_to_bytes",
    "dataset_from_bytes",
    "load_any",
    "idx_image_bytes",
]

IDX_IMAGE_MAGIC = 0x00000803
DATASET_MAGIC = b"APDDATA\x00"
DATASET_VERSION = 1


class DatasetFormatError(ValueError):
    """A dataset file could not be parsed."""


class BadMagicError(DatasetFormatError):
    pass


class TruncatedFileError(DatasetFormatError):
    pass


class DimensionMismatchError(DatasetFormatError):
    pass


class EmptyFileError(DatasetFormatError):
    pass


class RaggedRowError(DatasetFormatError):
    def __init__(self, message, line):
        super().__init__(message)
        self.line = line


class NonNumericCellError(DatasetFormatError):
    def __init__(self, message, line):
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class SyntheticSpec:
    n: int = 10_000
    dim: int = 1_000
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.dim < 1:
            raise ValueError("synthetic spec needs n >= 1 and dim >= 1")


def synthetic_point(seed: int, index: int, dim: int):
    """Return ``(peak, coordinates)`` for point ``index``."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(int(index),))
    gen = np.random.Generator(np.random.Philox(ss))
    peak = gen.random()
    return peak, peak + box_muller(gen, dim)


def gen_synthetic(spec: SyntheticSpec) -> Dataset:
    X = np.empty((spec.n, spec.dim))
    for i in range(spec.n):
        X[i] = synthetic_point(spec.seed, i, spec.dim)[1]
    return Dataset(X)


# -- IDX images ---------------------------------------------------------------

def load_idx_images(path, scale: bool = False) -> Dataset:
    """Read an IDX3 unsigned-byte image file (e.g. MNIST) as ``n x (rows*cols)``.

    Pixels stay in ``[0, 255]`` unless ``scale`` maps them to ``[0, 1]``.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 16:
        if len(raw) >= 4 and struct.unpack(">I", raw[:4])[0] != IDX_IMAGE_MAGIC:
            raise BadMagicError(f"{path}: magic {struct.unpack('>I', raw[:4])[0]:#010x}, "
                                f"expected {IDX_IMAGE_MAGIC:#010x} (IDX3 images)")
        raise TruncatedFileError(f"{path}: {len(raw)} bytes, shorter than the 16-byte IDX3 header")
    magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IDX_IMAGE_MAGIC:
        raise BadMagicError(f"{path}: magic {magic:#010x}, expected {IDX_IMAGE_MAGIC:#010x} (IDX3 images)")
    if count < 1 or rows < 1 or cols < 1:
        raise DimensionMismatchError(f"{path}: header declares {count} images of {rows}x{cols}")
    need = count * rows * cols
    body = len(raw) - 16
    if body < need:
        raise TruncatedFileError(f"{path}: header declares {need} pixel bytes, file has {body}")
    if body > need:
        raise DimensionMismatchError(f"{path}: {body - need} bytes beyond the declared {count}x{rows}x{cols} pixels")
    pixels = np.frombuffer(raw, dtype=np.uint8, offset=16).reshape(count, rows * cols)
    X = pixels.astype(np.float64)
    if scale:
        X /= 255.0
    return Dataset(X)


def idx_image_bytes(images) -> bytes:
    """Encode a ``(count, rows, cols)`` uint8 array as an IDX3 file body."""
    images = np.asarray(images, dtype=np.uint8)
    count, rows, cols = images.shape
    return struct.pack(">IIII", IDX_IMAGE_MAGIC, count, rows, cols) + images.tobytes()


# -- delimited text ----------------------------------------------------------------

def load_delimited(path, delimiter=None, skip_columns=()) -> Dataset:
    """Read a numeric table, one point per line.

    ``delimiter=None`` splits on runs of whitespace. Lines starting with ``#``
    and blank lines are ignored. ``skip_columns`` lists zero-based column
    positions (e.g. id or label fields) dropped before parsing.
    """
    skip = set(int(c) for c in skip_columns)
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            fields = text.split(delimiter)
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise RaggedRowError(
                    f"{path}:{lineno}: expected {width} fields, found {len(fields)}", lineno)
            values = []
            for col, cell in enumerate(fields):
                if col in skip:
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    raise NonNumericCellError(
                        f"{path}:{lineno}: column {col} is not numeric: {cell!r}", lineno) from None
            rows.append(values)
    if not rows:
        raise EmptyFileError(f"{path}: no data rows")
    if not rows[0]:
        raise DimensionMismatchError(f"{path}: every column was skipped")
    return Dataset(np.array(rows, dtype=np.float64))


# -- native format -------------------------------------------------------------------
#
#   b"APDDATA\0"  u32 version  u64 n  u64 dim  f64[n*dim] row-major, little-endian

_DS_HEAD = struct.Struct("<IQQ")


def dataset_to_bytes(data: Dataset) -> bytes:
    return (DATASET_MAGIC + _DS_HEAD.pack(DATASET_VERSION, data.n, data.dim)
            + data.points.astype("<f8", copy=False).tobytes())


def dataset_from_bytes(raw: bytes, source="<bytes>") -> Dataset:
    head = len(DATASET_MAGIC) + _DS_HEAD.size
    if len(raw) < head:
        raise TruncatedFileError(f"{source}: shorter than the dataset header")
    if raw[:len(DATASET_MAGIC)] != DATASET_MAGIC:
        raise BadMagicError(f"{source}: not a native dataset file")
    version, n, dim = _DS_HEAD.unpack_from(raw, len(DATASET_MAGIC))
    if version != DATASET_VERSION:
        raise DatasetFormatError(f"{source}: unsupported dataset version {version}")
    need = n * dim * 8
    if len(raw) - head != need:
        cls = TruncatedFileError if len(raw) - head < need else DimensionMismatchError
        raise cls(f"{source}: expected {need} data bytes for {n}x{dim}, found {len(raw) - head}")
    X = np.frombuffer(raw, dtype="<f8", offset=head).reshape(n, dim)
    return Dataset(X)


def save_dataset(data: Dataset, path) -> None:
    Path(path).write_bytes(dataset_to_bytes(data))


def load_dataset(path) -> Dataset:
    return dataset_from_bytes(Path(path).read_bytes(), source=str(path))


def load_any(path, fmt="auto", delimiter=None, skip_columns=(), scale=False) -> Dataset:
    """Load a dataset, picking the reader from ``fmt`` or the file's contents."""
    path = Path(path)
    if fmt == "auto":
        with open(path, "rb") as fh:
            head = fh.read(8)
        if head == DATASET_MAGIC:
            fmt = "native"
        elif len(head) >= 4 and struct.unpack(">I", head[:4])[0] == IDX_IMAGE_MAGIC:
            fmt = "idx"
        else:
            fmt = "delimited"
    if fmt == "native":
        return load_dataset(path)
    if fmt == "idx":
        return load_idx_images(path, scale=scale)
    if fmt == "delimited":
        return load_delimited(path, delimiter, skip_columns)
    raise ValueError(f"unknown dataset format {fmt!r}")
