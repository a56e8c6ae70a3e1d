"""End-to-end QNN-vs-baseline runs under one shared protocol."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .data import Dataset, atomic_write_bytes, sha256_file, subsample_indices
from .nn import classifier_specs, init_model
from .quanv import precompute_features
from .rng import derive_seed
from .sim import build_random_layers
from .train import RunHistory, TrainConfig, train

VAL_SEED_KEY = 1


def train_indices(size: int, n: int, data_seed: int) -> np.ndarray:
    return subsample_indices(size, n, data_seed)


def val_indices(size: int, n: int, data_seed: int) -> np.ndarray:
    return subsample_indices(size, n, derive_seed(data_seed, VAL_SEED_KEY))


def fit(train_x, train_y, val_x, val_y, config: TrainConfig, label: str):
    model = init_model(classifier_specs(np.asarray(train_x[0]).size), config.init_seed)
    return train(model, train_x, train_y, val_x, val_y, config, label=label)


@dataclass
class SeedResult:
    data_seed: int
    train_indices: list[int]
    val_indices: list[int]
    qnn: RunHistory
    baseline: RunHistory


@dataclass
class ExperimentResult:
    seeds: list[SeedResult] = field(default_factory=list)

    def mean_val_accuracy(self, which: str) -> float:
        return float(np.mean([getattr(s, which).epochs[-1].val_accuracy for s in self.seeds]))

    def summary(self) -> dict:
        per_seed = [
            {
                "data_seed": s.data_seed,
                "qnn_val_accuracy": s.qnn.epochs[-1].val_accuracy,
                "baseline_val_accuracy": s.baseline.epochs[-1].val_accuracy,
                "qnn_train_accuracy": s.qnn.epochs[-1].train_accuracy,
                "baseline_train_accuracy": s.baseline.epochs[-1].train_accuracy,
            }
            for s in self.seeds
        ]
        return {
            "per_seed": per_seed,
            "qnn_mean_val_accuracy": self.mean_val_accuracy("qnn"),
            "baseline_mean_val_accuracy": self.mean_val_accuracy("baseline"),
        }


def run_experiment(
    train_set: Dataset,
    val_set: Dataset,
    data_seeds=(0,),
    train_n: int = 50,
    val_n: int = 30,
    config: TrainConfig = TrainConfig(),
    ansatz_layers: int = 1,
    workers: int = 1,
) -> ExperimentResult:
    """Train both models on the same subsample for each data seed.

    Only the drawn images are passed through the circuit.  The hybrid model
    sees flattened 14x14x4 expectations; the baseline sees the raw pixels.
    """
    ansatz = build_random_layers(config.ansatz_seed, ansatz_layers, 4)
    result = ExperimentResult()
    for seed in data_seeds:
        cfg = TrainConfig(config.epochs, config.batch_size, config.adam, seed,
                          config.init_seed, config.ansatz_seed, config.shuffle_each_epoch)
        ti = train_indices(len(train_set), train_n, seed)
        vi = val_indices(len(val_set), val_n, seed)
        tr, va = train_set.take(ti), val_set.take(vi)
        ftr = np.stack(precompute_features(tr.images, ansatz, workers=workers))
        fva = np.stack(precompute_features(va.images, ansatz, workers=workers))
        _, hq = fit(ftr.reshape(len(tr), -1), tr.labels, fva.reshape(len(va), -1), va.labels, cfg, "Hybrid QNN")
        _, hb = fit(tr.flat(), tr.labels, va.flat(), va.labels, cfg, "Classical baseline")
        result.seeds.append(SeedResult(seed, ti.tolist(), vi.tolist(), hq, hb))
    return result


def write_manifest(path, **fields) -> Path:
    """JSON manifest, written atomically; ``inputs``/``outputs`` path lists get sha256 digests."""
    doc = {"tool": "quanv", "version": __version__}
    for key in ("inputs", "outputs"):
        if key in fields:
            fields[key] = {str(p): sha256_file(p) for p in fields[key] if Path(p).exists()}
    doc.update(fields)
    atomic_write_bytes(path, (json.dumps(doc, indent=2, default=_jsonable) + "\n").encode())
    return Path(path)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if hasattr(obj, "__dataclass_fields__"):
        return asdict(obj)
    if isinstance(obj, os.PathLike):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")
