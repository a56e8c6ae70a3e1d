"""Dataset ingestion, subsampling, synthetic data and on-disk formats.

Formats handled here:

* IDX (MNIST family): big-endian header, magic ``0x00000803`` for
  ``(N, H, W)`` unsigned-byte images and ``0x00000801`` for ``(N,)`` labels.
* Feature cache ``QNVF`` (little-endian)::

      b"QNVF"  u32 version  u32 count  u32 height  u32 width  u32 channels
      u64 ansatz_seed  u32 ansatz_layers  u32 patch_order (0 = row-major)
      f64[count*height*width*channels] features   u8[count] labels

* PGM P5 snapshots of a single feature-map channel.
"""

from __future__ import annotations

import csv
import hashlib
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CacheError, ConfigError, FormatError, ShapeError
from .rng import SplitMix64

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

CACHE_MAGIC = b"QNVF"
CACHE_VERSION = 1
PATCH_ORDER_ROW_MAJOR = 0
_CACHE_HEADER = struct.Struct("<4sIIIIIQII")


@dataclass
class Dataset:
    """Images ``(N, H, W, 1)`` in [0, 1] with binary labels (1 = pneumonia)."""

    images: np.ndarray
    labels: np.ndarray
    split: str = "train"
    indices: np.ndarray | None = None

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim == 3:
            self.images = self.images[..., None]
        if len(self.images) != len(self.labels):
            raise ShapeError(f"{len(self.images)} images but {len(self.labels)} labels")
        if self.labels.size and not np.isin(self.labels, (0, 1)).all():
            raise ConfigError("labels must be 0 or 1")

    def __len__(self) -> int:
        return len(self.labels)

    def flat(self) -> np.ndarray:
        return self.images.reshape(len(self), -1)

    def take(self, idx: np.ndarray) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        src = idx if self.indices is None else self.indices[idx]
        return Dataset(self.images[idx], self.labels[idx], self.split, src)


@dataclass
class FeatureDataset:
    """Quanvolution outputs ``(N, H/2, W/2, 4)`` stamped with the ansatz that made them."""

    features: np.ndarray
    labels: np.ndarray
    ansatz_seed: int
    ansatz_layers: int
    indices: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.labels)

    def flat(self) -> np.ndarray:
        return self.features.reshape(len(self), -1)

    def take(self, idx: np.ndarray) -> "FeatureDataset":
        idx = np.asarray(idx, dtype=np.int64)
        src = idx if self.indices is None else self.indices[idx]
        return FeatureDataset(
            self.features[idx], self.labels[idx], self.ansatz_seed, self.ansatz_layers, src
        )


def sha256_file(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def atomic_write_bytes(path: str | os.PathLike, payload: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


# -- IDX ----------------------------------------------------------------------

def _read_idx(path: Path, magic: int, ndim: int) -> np.ndarray:
    raw = Path(path).read_bytes()
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes, need {header}) at offset 0")
    (got,) = struct.unpack_from(">I", raw, 0)
    if got != magic:
        raise FormatError(f"{path}: bad magic 0x{got:08x} at offset 0, expected 0x{magic:08x}")
    dims = struct.unpack_from(f">{ndim}I", raw, 4)
    need = int(np.prod(dims))
    if len(raw) - header < need:
        raise FormatError(
            f"{path}: truncated payload at offset {len(raw)}: expected {header + need} bytes"
        )
    return np.frombuffer(raw, dtype=np.uint8, count=need, offset=header).reshape(dims)


def load_idx(images_path: str | os.PathLike, labels_path: str | os.PathLike, split: str = "train") -> Dataset:
    images = _read_idx(Path(images_path), IDX_IMAGES_MAGIC, 3)
    labels = _read_idx(Path(labels_path), IDX_LABELS_MAGIC, 1)
    if len(images) != len(labels):
        raise FormatError(
            f"{labels_path}: label count {len(labels)} at offset 4 does not match "
            f"image count {len(images)}"
        )
    if labels.size and labels.max() > 1:
        raise FormatError(f"{labels_path}: labels must be binary, found {int(labels.max())}")
    return Dataset(images.astype(np.float64) / 255.0, labels.astype(np.int64), split)


def write_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path) -> None:
    """Write ``(N, H, W)`` uint8 images and ``(N,)`` labels as an IDX pair."""
    images = np.asarray(images)
    if images.ndim == 4:
        images = images[..., 0]
    if images.dtype != np.uint8:
        images = np.clip(np.floor(np.asarray(images, dtype=np.float64) * 255 + 0.5), 0, 255).astype(np.uint8)
    labels = np.asarray(labels).astype(np.uint8).ravel()
    n, h, w = images.shape
    atomic_write_bytes(images_path, struct.pack(">IIII", IDX_IMAGES_MAGIC, n, h, w) + images.tobytes())
    atomic_write_bytes(labels_path, struct.pack(">II", IDX_LABELS_MAGIC, n) + labels.tobytes())


def load_medmnist_npz(npz_path, split: str = "train") -> Dataset:
    """One split of a MedMNIST ``.npz`` release (``<split>_images`` / ``<split>_labels``)."""
    with np.load(npz_path) as npz:
        key = f"{split}_images"
        if key not in npz:
            raise FormatError(f"{npz_path}: no {key!r} array")
        images = npz[key]
        labels = npz[f"{split}_labels"].ravel()
    if images.ndim != 3:
        raise FormatError(f"{npz_path}: expected grayscale (N, H, W) images, got {images.shape}")
    return Dataset(images.astype(np.float64) / 255.0, labels.astype(np.int64), split)


def convert_medmnist_npz(npz_path, out_dir, prefix: str = "pneumonia") -> dict[str, tuple[Path, Path]]:
    """Split a MedMNIST ``pneumoniamnist.npz`` into IDX pairs per split."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    with np.load(npz_path) as npz:
        for split in ("train", "val", "test"):
            if f"{split}_images" not in npz:
                continue
            img = npz[f"{split}_images"]
            lab = npz[f"{split}_labels"].ravel()
            ip = out_dir / f"{prefix}-{split}-images.idx"
            lp = out_dir / f"{prefix}-{split}-labels.idx"
            write_idx(img.astype(np.uint8), lab, ip, lp)
            written[split] = (ip, lp)
    if not written:
        raise FormatError(f"{npz_path}: no train/val/test arrays found")
    return written


# -- CSV ----------------------------------------------------------------------

def load_csv(path: str | os.PathLike, height: int = 28, width: int = 28, split: str = "train") -> Dataset:
    """Rows of ``label, pixel_0, ..., pixel_{H*W-1}``; byte-range pixels are divided by 255."""
    labels, rows = [], []
    with open(path, newline="") as f:
        for lineno, row in enumerate(csv.reader(f), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 1 + height * width:
                raise FormatError(
                    f"{path}: row {lineno} has {len(row) - 1} pixels, expected {height * width}"
                )
            try:
                vals = [float(cell) for cell in row]
            except ValueError as exc:
                raise FormatError(f"{path}: row {lineno}: non-numeric cell ({exc})") from None
            if vals[0] not in (0.0, 1.0):
                raise FormatError(f"{path}: row {lineno}: label must be 0 or 1, got {row[0]}")
            labels.append(int(vals[0]))
            rows.append(vals[1:])
    if not rows:
        return Dataset(np.zeros((0, height, width, 1)), np.zeros(0, dtype=np.int64), split)
    pix = np.asarray(rows, dtype=np.float64)
    if pix.max() > 1.0:
        pix = pix / 255.0
    if pix.min() < 0.0 or pix.max() > 1.0:
        raise FormatError(f"{path}: pixel values outside [0, 255]")
    return Dataset(pix.reshape(-1, height, width), np.asarray(labels), split)


# -- subsampling and synthetic data -------------------------------------------

def subsample_indices(size: int, n: int, seed: int) -> np.ndarray:
    """First ``n`` entries of a seeded permutation of ``range(size)``."""
    if n < 1 or n > size:
        raise ConfigError(f"cannot draw {n} samples from a dataset of {size}")
    return SplitMix64(seed).permutation(size)[:n]


def subsample(dataset, n: int, seed: int):
    """Seeded draw of ``n`` samples; works on ``Dataset`` and ``FeatureDataset``.

    The chosen source indices are kept on the result's ``indices`` field.
    """
    return dataset.take(subsample_indices(len(dataset), n, seed))


def synthetic_dataset(n: int, side: int = 28, seed: int = 0, split: str = "train") -> Dataset:
    """Balanced toy data: class 1 carries a bright centered square, class 0 is noise only.

    Background noise is uniform on [0, 0.1]; blob pixels (the central
    ``side/2 x side/2`` block) are uniform on [0.8, 1].  Every class-1 image
    therefore has mean intensity >= 0.2 and every class-0 image <= 0.1.
    """
    if n < 1:
        raise ConfigError(f"n must be positive, got {n}")
    if side < 4 or side % 2:
        raise ConfigError(f"side must be an even integer >= 4, got {side}")
    rng = SplitMix64(seed)
    labels = (np.arange(n) % 2)[rng.split(1).permutation(n)]
    noise = rng.split(2).uniform(0.0, 0.1, n * side * side).reshape(n, side, side)
    blob = rng.split(3).uniform(0.8, 1.0, n * side * side).reshape(n, side, side)
    images = noise.copy()
    lo, hi = side // 4, side // 4 + side // 2
    pos = labels == 1
    images[pos, lo:hi, lo:hi] = blob[pos, lo:hi, lo:hi]
    return Dataset(images, labels, split)


# -- feature cache ------------------------------------------------------------

def save_feature_cache(fd: FeatureDataset, path: str | os.PathLike) -> None:
    feats = np.ascontiguousarray(fd.features, dtype="<f8")
    if feats.ndim != 4:
        raise ShapeError(f"features must be (N, H, W, C), got shape {feats.shape}")
    n, h, w, c = feats.shape
    if len(fd.labels) != n:
        raise ShapeError(f"{n} feature maps but {len(fd.labels)} labels")
    header = _CACHE_HEADER.pack(
        CACHE_MAGIC, CACHE_VERSION, n, h, w, c, fd.ansatz_seed, fd.ansatz_layers, PATCH_ORDER_ROW_MAJOR
    )
    labels = np.asarray(fd.labels, dtype=np.uint8)
    try:
        atomic_write_bytes(path, header + feats.tobytes() + labels.tobytes())
    except OSError as exc:
        raise CacheError(f"{path}: cannot write feature cache ({exc})") from exc


def read_cache_header(raw: bytes, path="<cache>") -> dict:
    if len(raw) < _CACHE_HEADER.size:
        raise CacheError(
            f"{path}: header truncated: expected {_CACHE_HEADER.size} bytes, got {len(raw)}"
        )
    magic, version, n, h, w, c, seed, layers, order = _CACHE_HEADER.unpack_from(raw)
    if magic != CACHE_MAGIC:
        raise CacheError(f"{path}: magic: expected {CACHE_MAGIC!r}, got {magic!r}")
    if version != CACHE_VERSION:
        raise CacheError(f"{path}: version: expected {CACHE_VERSION}, got {version}")
    if order != PATCH_ORDER_ROW_MAJOR:
        raise CacheError(f"{path}: patch_order: unsupported value {order}")
    return {"count": n, "height": h, "width": w, "channels": c,
            "ansatz_seed": seed, "ansatz_layers": layers, "patch_order": "row-major"}


def load_feature_cache(
    path: str | os.PathLike,
    expected_seed: int | None = None,
    expected_layers: int | None = None,
) -> FeatureDataset:
    raw = Path(path).read_bytes()
    hdr = read_cache_header(raw, path)
    n, h, w, c = hdr["count"], hdr["height"], hdr["width"], hdr["channels"]
    expected = _CACHE_HEADER.size + 8 * n * h * w * c + n
    if len(raw) != expected:
        raise CacheError(f"{path}: length: expected {expected} bytes, got {len(raw)}")
    if expected_seed is not None and hdr["ansatz_seed"] != expected_seed:
        raise CacheError(
            f"{path}: ansatz_seed: cache stamped {hdr['ansatz_seed']}, requested {expected_seed}"
        )
    if expected_layers is not None and hdr["ansatz_layers"] != expected_layers:
        raise CacheError(
            f"{path}: ansatz_layers: cache stamped {hdr['ansatz_layers']}, requested {expected_layers}"
        )
    off = _CACHE_HEADER.size
    feats = np.frombuffer(raw, dtype="<f8", count=n * h * w * c, offset=off).reshape(n, h, w, c)
    labels = np.frombuffer(raw, dtype=np.uint8, count=n, offset=off + 8 * feats.size)
    return FeatureDataset(
        feats.astype(np.float64), labels.astype(np.int64), hdr["ansatz_seed"], hdr["ansatz_layers"]
    )


# -- PGM export ---------------------------------------------------------------

def feature_to_bytes(values: np.ndarray) -> np.ndarray:
    """Map [-1, 1] to 0..255 as ``floor((v + 1) / 2 * 255 + 0.5)`` (round half up)."""
    v = np.clip(np.asarray(values, dtype=np.float64), -1.0, 1.0)
    return np.floor((v + 1.0) / 2.0 * 255.0 + 0.5).astype(np.uint8)


def export_feature_map_pgm(fm: np.ndarray, channel: int, path: str | os.PathLike) -> None:
    fm = np.asarray(fm)
    if fm.ndim != 3:
        raise ShapeError(f"feature map must be (H, W, C), got shape {fm.shape}")
    if not 0 <= channel < fm.shape[2]:
        raise ConfigError(f"channel must be in 0..{fm.shape[2] - 1}, got {channel}")
    pix = feature_to_bytes(fm[:, :, channel])
    h, w = pix.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + pix.tobytes())
