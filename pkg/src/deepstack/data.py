"""Dataset loading and preprocessing: IDX files, labelled-pixel CSV, resizing."""
from __future__ import annotations

import csv
import gzip
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional, Tuple

import numpy as np

from .exceptions import FormatError, ParameterError, ParseError, RangeError, ShapeError

IDX_IMAGES_MAGIC = 2051
IDX_LABELS_MAGIC = 2049


@dataclass
class Dataset:
    """Examples ``X`` (m x n, in [0, 1]), labels ``y`` and one-hot targets ``Y``."""

    X: np.ndarray
    y: np.ndarray
    Y: np.ndarray

    @classmethod
    def from_arrays(cls, X, y, n_classes: Optional[int] = None) -> "Dataset":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise ShapeError(f"X {X.shape} and y {y.shape} do not describe the same examples")
        if X.size and (X.min() < 0.0 or X.max() > 1.0):
            raise RangeError("dataset features must lie in [0, 1]")
        if n_classes is None:
            n_classes = int(y.max()) + 1 if y.size else 0
        return cls(X, y, one_hot(y, n_classes))

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def n_classes(self) -> int:
        return self.Y.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx], self.Y[idx])


def _open(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    return gzip.open(path, "rb") if path.suffix == ".gz" else open(path, "rb")


def _read_idx(path, magic: int, ndim: int) -> np.ndarray:
    with _open(path) as f:
        raw = f.read()
    if len(raw) < 4:
        raise FormatError(f"{path}: truncated header at byte offset {len(raw)}")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise FormatError(f"{path}: bad magic number, expected {magic}, got {found}")
    header_len = 4 + 4 * ndim
    if len(raw) < header_len:
        raise FormatError(f"{path}: truncated header at byte offset {len(raw)}")
    dims = struct.unpack(f">{ndim}I", raw[4:header_len])
    expected = int(np.prod(dims, dtype=np.int64))
    payload = len(raw) - header_len
    if payload < expected:
        raise FormatError(
            f"{path}: truncated payload at byte offset {len(raw)}, header promises {header_len + expected} bytes"
        )
    if payload > expected:
        raise FormatError(f"{path}: {payload - expected} trailing bytes after offset {header_len + expected}")
    return np.frombuffer(raw, dtype=np.uint8, offset=header_len).reshape(dims).copy()


def load_idx_images(path) -> np.ndarray:
    """uint8 array of shape (count, rows, cols)."""
    return _read_idx(path, IDX_IMAGES_MAGIC, 3)


def load_idx_labels(path) -> np.ndarray:
    return _read_idx(path, IDX_LABELS_MAGIC, 1)


def write_idx_images(path, images) -> None:
    images = np.asarray(images, dtype=np.uint8)
    if images.ndim != 3:
        raise ShapeError(f"images must be (count, rows, cols), got {images.shape}")
    with open(path, "wb") as f:
        f.write(struct.pack(">4I", IDX_IMAGES_MAGIC, *images.shape))
        f.write(images.tobytes())


def write_idx_labels(path, labels) -> None:
    labels = np.asarray(labels, dtype=np.uint8).reshape(-1)
    with open(path, "wb") as f:
        f.write(struct.pack(">2I", IDX_LABELS_MAGIC, labels.size))
        f.write(labels.tobytes())


class LabelledPixels(NamedTuple):
    labels: np.ndarray
    pixels: np.ndarray


def load_csv(path, has_header: bool = False) -> LabelledPixels:
    """Parse ``label,p0,...,p(n-1)`` rows of integers; pixels must be in [0, 255]."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    labels, rows = [], []
    width = None
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        for line_no, row in enumerate(reader, start=1):
            if has_header and line_no == 1:
                continue
            if not row:
                continue
            if width is None:
                width = len(row)
                if width < 2:
                    raise FormatError(f"{path}: row {line_no} has no pixel columns")
            elif len(row) != width:
                raise FormatError(f"{path}: row {line_no} has {len(row)} cells, expected {width}")
            values = []
            for col, cell in enumerate(row):
                try:
                    values.append(int(cell.strip()))
                except ValueError:
                    raise ParseError(f"{path}: row {line_no}, column {col}: {cell!r} is not an integer") from None
            pix = values[1:]
            bad = [c for c, p in enumerate(pix, start=1) if not 0 <= p <= 255]
            if bad:
                raise RangeError(f"{path}: row {line_no}, column {bad[0]}: pixel {pix[bad[0] - 1]} outside [0, 255]")
            if values[0] < 0:
                raise RangeError(f"{path}: row {line_no}: negative label {values[0]}")
            labels.append(values[0])
            rows.append(pix)
    if not rows:
        return LabelledPixels(np.zeros(0, dtype=np.int64), np.zeros((0, 0), dtype=np.uint8))
    return LabelledPixels(np.array(labels, dtype=np.int64), np.array(rows, dtype=np.uint8))


def write_csv(path, labels, pixels, header: bool = False) -> None:
    pixels = np.asarray(pixels)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        if header:
            writer.writerow(["label"] + [f"p{i}" for i in range(pixels.shape[1])])
        for label, row in zip(labels, pixels):
            writer.writerow([int(label)] + [int(p) for p in row])


def normalize_255(X_bytes) -> np.ndarray:
    """Map integer intensities in [0, 255] to floats in [0, 1]."""
    X = np.asarray(X_bytes, dtype=np.float64)
    if X.size and (X.min() < 0 or X.max() > 255):
        raise RangeError(f"pixel values must lie in [0, 255], got range [{X.min()}, {X.max()}]")
    return X / 255.0


def bilinear_downsample_2x(image) -> np.ndarray:
    """Halve both dimensions; each output pixel is the mean of a 2x2 block.

    This is exactly bilinear interpolation at scale 0.5 with half-pixel
    centres, where the four neighbours carry equal weight.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ShapeError(f"expected a 2-D image, got shape {img.shape}")
    r, c = img.shape
    if r % 2 or c % 2:
        raise ParameterError(f"image dimensions must be even, got {r}x{c}")
    return img.reshape(r // 2, 2, c // 2, 2).mean(axis=(1, 3))


def downsample_rows(pixels, side: Optional[int] = None) -> np.ndarray:
    """Apply :func:`bilinear_downsample_2x` to flattened square images."""
    pixels = np.asarray(pixels, dtype=np.float64)
    n = pixels.shape[1]
    side = side or int(round(np.sqrt(n)))
    if side * side != n:
        raise ShapeError(f"rows of {n} pixels are not square images")
    out = [bilinear_downsample_2x(row.reshape(side, side)).reshape(-1) for row in pixels]
    return np.array(out).reshape(len(pixels), (side // 2) ** 2)


def one_hot(y, n_classes: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64).reshape(-1)
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise RangeError(f"labels must lie in [0, {n_classes}), got range [{y.min()}, {y.max()}]")
    Y = np.zeros((y.size, n_classes))
    Y[np.arange(y.size), y] = 1.0
    return Y


def train_test_split(ds: Dataset, n_train: int, n_test: int, seed: int = 0) -> Tuple[Dataset, Dataset]:
    """Shuffle with numpy's PCG64 generator, then take disjoint head slices."""
    m = len(ds)
    if n_train < 0 or n_test < 0 or n_train + n_test > m:
        raise ParameterError(f"cannot take {n_train} + {n_test} examples from {m}")
    order = np.random.default_rng(seed).permutation(m)
    return ds.subset(order[:n_train]), ds.subset(order[n_train:n_train + n_test])


def load_mnist(images_path, labels_path, limit: Optional[int] = None) -> Dataset:
    images = load_idx_images(images_path)
    labels = load_idx_labels(labels_path)
    if len(images) != len(labels):
        raise FormatError(f"{images_path} holds {len(images)} images but {labels_path} holds {len(labels)} labels")
    if limit is not None:
        images, labels = images[:limit], labels[:limit]
    X = normalize_255(images.reshape(len(images), -1))
    return Dataset.from_arrays(X, labels, n_classes=10)
