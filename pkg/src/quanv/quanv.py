"""Quanvolution: run the 4-qubit circuit over non-overlapping 2x2 patches.

Each patch's pixels, read row-major (top-left, top-right, bottom-left,
bottom-right), are angle-encoded onto qubits 0..3 with ``RY(pi * x)``; the
seeded ansatz follows and the four Pauli-Z expectations become the patch's
output channels.  The result for an ``H x W`` image is an
``H/2 x W/2 x 4`` feature map of raw expectations in [-1, 1].
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import FeatureDataset, save_feature_cache
from .errors import ConfigError, ShapeError
from .sim import CircuitSpec, expectation_z_all, new_state, apply_rotation, run_circuit

N_PATCH_QUBITS = 4


def _as_2d(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 3:
        if image.shape[2] != 1:
            raise ShapeError(f"expected a single channel, got {image.shape[2]}")
        image = image[:, :, 0]
    if image.ndim != 2:
        raise ShapeError(f"expected an (H, W) or (H, W, 1) image, got shape {image.shape}")
    h, w = image.shape
    if h == 0 or w == 0 or h % 2 or w % 2:
        raise ShapeError(f"image dimensions must be even and non-zero, got {h}x{w}")
    return image


def patch_array(image: np.ndarray) -> np.ndarray:
    """All 2x2 patches as an ``(H/2, W/2, 4)`` array in row-major pixel order."""
    img = _as_2d(image)
    h, w = img.shape
    return img.reshape(h // 2, 2, w // 2, 2).transpose(0, 2, 1, 3).reshape(h // 2, w // 2, 4)


def extract_patches(image: np.ndarray) -> list[tuple[int, int, np.ndarray]]:
    """Non-overlapping stride-2 patches, traversed row-major, as ``(row, col, pixels)``."""
    blocks = patch_array(image)
    return [
        (r, c, blocks[r, c].copy())
        for r in range(blocks.shape[0])
        for c in range(blocks.shape[1])
    ]


def encode_patch(pixels: Sequence[float]) -> np.ndarray:
    """Rotation angles ``pi * x`` for pixels in [0, 1]."""
    x = np.asarray(pixels, dtype=np.float64)
    if x.shape != (N_PATCH_QUBITS,):
        raise ShapeError(f"a patch has {N_PATCH_QUBITS} pixels, got shape {x.shape}")
    if np.any(~np.isfinite(x)) or np.any(x < 0.0) or np.any(x > 1.0):
        raise ConfigError(f"pixel values must lie in [0, 1], got {x.tolist()}")
    return math.pi * x


def _check_ansatz(ansatz: CircuitSpec) -> None:
    if ansatz.n_qubits != N_PATCH_QUBITS:
        raise ConfigError(f"ansatz must act on {N_PATCH_QUBITS} qubits, got {ansatz.n_qubits}")


def quanv_thetas(thetas: np.ndarray, ansatz: CircuitSpec) -> np.ndarray:
    """Circuit outputs for a stack of encoded patches, shape ``(P, 4) -> (P, 4)``."""
    _check_ansatz(ansatz)
    thetas = np.asarray(thetas, dtype=np.float64)
    state = new_state(N_PATCH_QUBITS, thetas.shape[:-1])
    for j in range(N_PATCH_QUBITS):
        apply_rotation(state, "RY", j, thetas[..., j])
    run_circuit(state, ansatz)
    return expectation_z_all(state)


def quanv_patch(thetas: Sequence[float], ansatz: CircuitSpec) -> np.ndarray:
    """``(<Z_0>, ..., <Z_3>)`` for one encoded patch."""
    thetas = np.asarray(thetas, dtype=np.float64)
    if thetas.shape != (N_PATCH_QUBITS,):
        raise ShapeError(f"expected {N_PATCH_QUBITS} angles, got shape {thetas.shape}")
    return quanv_thetas(thetas[None, :], ansatz)[0]


def _check_pixels(x: np.ndarray) -> None:
    if x.size and (not np.all(np.isfinite(x)) or x.min() < 0.0 or x.max() > 1.0):
        raise ConfigError("pixel values must lie in [0, 1]; normalize at ingestion")


def _run_chunked(thetas: np.ndarray, ansatz: CircuitSpec, workers: int) -> np.ndarray:
    flat = thetas.reshape(-1, N_PATCH_QUBITS)
    if workers <= 1 or len(flat) < 2 * workers:
        return quanv_thetas(flat, ansatz).reshape(thetas.shape)
    chunks = np.array_split(flat, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda ch: quanv_thetas(ch, ansatz), chunks))
    return np.concatenate(parts).reshape(thetas.shape)


def quanv_image(image: np.ndarray, ansatz: CircuitSpec, workers: int = 1) -> np.ndarray:
    """Feature map ``(H/2, W/2, 4)`` for one image.

    Patches are independent, so splitting them across ``workers`` threads
    gives bit-identical output.
    """
    _check_ansatz(ansatz)
    blocks = patch_array(image)
    _check_pixels(blocks)
    return _run_chunked(math.pi * blocks, ansatz, workers)


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)


def precompute_features(
    images: np.ndarray | Sequence[np.ndarray],
    ansatz: CircuitSpec,
    path: str | os.PathLike | None = None,
    labels: Sequence[int] | None = None,
    workers: int = 1,
    chunk_images: int = 256,
) -> list[np.ndarray]:
    """Feature maps for a batch of equally shaped images, optionally cached to ``path``.

    The cache is stamped with the ansatz seed and layer count.  When
    ``labels`` is omitted the cache stores zeros in their place.
    """
    _check_ansatz(ansatz)
    images = [np.asarray(im, dtype=np.float64) for im in images]
    shapes = {im.shape for im in images}
    if len(shapes) > 1:
        raise ShapeError(f"images must share one shape, got {sorted(shapes)}")
    if labels is not None and len(labels) != len(images):
        raise ShapeError(f"{len(images)} images but {len(labels)} labels")

    if images:
        blocks = np.stack([patch_array(im) for im in images])
        _check_pixels(blocks)
        out = np.empty(blocks.shape, dtype=np.float64)
        for start in range(0, len(blocks), chunk_images):
            sl = slice(start, start + chunk_images)
            out[sl] = _run_chunked(math.pi * blocks[sl], ansatz, workers)
        features = list(out)
    else:
        features = []

    if path is not None:
        if features:
            arr = np.stack(features)
        else:
            arr = np.zeros((0, 0, 0, N_PATCH_QUBITS))
        lab = np.zeros(len(features), dtype=np.uint8) if labels is None else np.asarray(labels, dtype=np.uint8)
        save_feature_cache(
            FeatureDataset(arr, lab, ansatz.seed, ansatz.n_layers), Path(path)
        )
    return features
