"""Training loop, evaluation metrics and run comparison."""

from __future__ import annotations

import csv
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, ShapeError
from .nn import AdamConfig, DenseModel, adam_step, backward, bce_loss, classify, forward, predict_batch
from .rng import SplitMix64


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 4
    adam: AdamConfig = field(default_factory=AdamConfig)
    data_seed: int = 0
    init_seed: int = 0
    ansatz_seed: int = 42
    shuffle_each_epoch: bool = True

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError(f"epochs must be non-negative, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch size must be positive, got {self.batch_size}")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_loss: float
    val_accuracy: float
    epoch_ms: float


@dataclass
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    specificity: float
    f1: float
    auc_roc: float
    tp: int
    fp: int
    tn: int
    fn: int
    undefined: list[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self) -> dict:
        return asdict(self)

    def table(self) -> str:
        rows = [
            ("accuracy", self.accuracy),
            ("precision", self.precision),
            ("recall (sensitivity)", self.recall),
            ("specificity", self.specificity),
            ("f1", self.f1),
            ("auc_roc", self.auc_roc),
        ]
        lines = [f"{name:<22}{value:>10.4f}" for name, value in rows]
        lines.append(f"{'confusion (tp fp tn fn)':<22} {self.tp} {self.fp} {self.tn} {self.fn}")
        if self.undefined:
            lines.append(f"{'undefined (set to 0)':<22} {', '.join(self.undefined)}")
        return "\n".join(lines)


@dataclass
class RunHistory:
    label: str = ""
    epochs: list[EpochRecord] = field(default_factory=list)
    final: MetricsReport | None = None

    def series(self, name: str) -> list[float]:
        return [getattr(e, name) for e in self.epochs]

    def mean_epoch_ms(self) -> float:
        return float(np.mean(self.series("epoch_ms"))) if self.epochs else 0.0

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "epochs": [asdict(e) for e in self.epochs],
            "final": None if self.final is None else self.final.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RunHistory":
        final = doc.get("final")
        return cls(
            doc.get("label", ""),
            [EpochRecord(**e) for e in doc["epochs"]],
            None if final is None else MetricsReport(**final),
        )

    def save_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> "RunHistory":
        """Read a history JSON, or a metrics CSV written by ``emit_curves``."""
        path = Path(path)
        if path.suffix == ".csv":
            return read_history_csv(path)
        return cls.from_dict(json.loads(path.read_text()))


# -- metrics ------------------------------------------------------------------

def auc_roc(scores, labels) -> float:
    """Area under the ROC curve by the trapezoidal rule over tied-score groups.

    Returns NaN when either class is absent.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        return math.nan
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    # ends of tied groups in descending-score order
    last = np.r_[np.nonzero(np.diff(s))[0], len(s) - 1]
    tps = np.cumsum(y)[last]
    fps = np.cumsum(~y)[last]
    tpr = np.r_[0, tps] / n_pos
    fpr = np.r_[0, fps] / n_neg
    return float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2.0))


def auc_pairwise(scores, labels) -> float:
    """Mann-Whitney statistic over all positive/negative pairs, ties counting 1/2."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    pos, neg = s[y], s[~y]
    if len(pos) == 0 or len(neg) == 0:
        return math.nan
    total = 0.0
    for p in pos:
        for q in neg:
            total += 1.0 if p > q else 0.5 if p == q else 0.0
    return total / (len(pos) * len(neg))


def _ratio(num: float, den: float, name: str, undefined: list[str]) -> float:
    if den == 0:
        undefined.append(name)
        return 0.0
    return num / den


def metrics_from_scores(scores, labels) -> MetricsReport:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(np.int64)
    if len(scores) == 0:
        raise ConfigError("cannot evaluate on an empty dataset")
    if len(scores) != len(labels):
        raise ShapeError(f"{len(scores)} scores but {len(labels)} labels")
    pred = classify(scores)
    tp = int(np.sum((pred == 1) & (labels == 1)))
    fp = int(np.sum((pred == 1) & (labels == 0)))
    tn = int(np.sum((pred == 0) & (labels == 0)))
    fn = int(np.sum((pred == 0) & (labels == 1)))
    undefined: list[str] = []
    precision = _ratio(tp, tp + fp, "precision", undefined)
    recall = _ratio(tp, tp + fn, "recall", undefined)
    specificity = _ratio(tn, tn + fp, "specificity", undefined)
    f1 = _ratio(2 * precision * recall, precision + recall, "f1", undefined)
    auc = auc_roc(scores, labels)
    if math.isnan(auc):
        undefined.append("auc_roc")
        auc = 0.0
    return MetricsReport(
        accuracy=(tp + tn) / len(labels),
        precision=precision,
        recall=recall,
        specificity=specificity,
        f1=f1,
        auc_roc=auc,
        tp=tp, fp=fp, tn=tn, fn=fn,
        undefined=undefined,
    )


def evaluate(model: DenseModel, inputs, labels) -> MetricsReport:
    inputs = np.asarray(inputs, dtype=np.float64)
    if len(inputs) == 0:
        raise ConfigError("cannot evaluate on an empty dataset")
    return metrics_from_scores(predict_batch(model, inputs), labels)


# -- training -----------------------------------------------------------------

def _check_data(model: DenseModel, x: np.ndarray, y: np.ndarray, name: str) -> None:
    if x.ndim != 2 or x.shape[1] != model.layers[0].in_dim:
        raise ShapeError(f"{name} inputs have shape {x.shape}, model expects {model.layers[0].in_dim} features")
    if len(x) != len(y):
        raise ShapeError(f"{name}: {len(x)} inputs but {len(y)} labels")
    if y.size and not np.isin(y, (0, 1)).all():
        raise ConfigError(f"{name} labels must be 0 or 1")


def _full_pass(model: DenseModel, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    if len(x) == 0:
        return math.nan, math.nan
    p = predict_batch(model, x)
    return bce_loss(p, y), float(np.mean(classify(p) == y))


def batch_order(n: int, epoch: int, config: TrainConfig) -> np.ndarray:
    """Sample order for one epoch; depends only on ``data_seed``, ``epoch`` and ``n``."""
    if not config.shuffle_each_epoch:
        return np.arange(n)
    return SplitMix64(config.data_seed).split(epoch).permutation(n)


def train(
    model: DenseModel,
    train_x,
    train_y,
    val_x,
    val_y,
    config: TrainConfig = TrainConfig(),
    label: str = "",
) -> tuple[DenseModel, RunHistory]:
    """Mini-batch Adam on mean-batch BCE; metrics on full train/val passes after each epoch.

    ``model`` is updated in place and also returned.
    """
    train_x = np.asarray(train_x, dtype=np.float64).reshape(len(train_x), -1)
    train_y = np.asarray(train_y, dtype=np.int64)
    val_x = np.asarray(val_x, dtype=np.float64).reshape(len(val_x), -1)
    val_y = np.asarray(val_y, dtype=np.int64)
    _check_data(model, train_x, train_y, "train")
    if len(val_x):
        _check_data(model, val_x, val_y, "validation")

    history = RunHistory(label)
    n = len(train_x)
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        order = batch_order(n, epoch, config)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            _, acts = forward(model, train_x[idx])
            adam_step(model, backward(model, acts, train_y[idx]), config.adam)
        tr_loss, tr_acc = _full_pass(model, train_x, train_y)
        va_loss, va_acc = _full_pass(model, val_x, val_y)
        ms = (time.perf_counter() - t0) * 1000.0
        history.epochs.append(EpochRecord(epoch + 1, tr_loss, tr_acc, va_loss, va_acc, ms))
    if len(val_x):
        history.final = evaluate(model, val_x, val_y)
    return model, history


# -- comparison ---------------------------------------------------------------

TABLE_ROWS = (
    ("Training Accuracy", "train_accuracy", True),
    ("Validation Accuracy", "val_accuracy", True),
    ("Training Loss", "train_loss", False),
    ("Validation Loss", "val_loss", False),
)


@dataclass
class ComparisonReport:
    names: tuple[str, str]
    rows: list[dict]
    curves: dict[str, dict[str, list[float]]]

    def to_dict(self) -> dict:
        return {"names": list(self.names), "rows": self.rows, "curves": self.curves}

    def row(self, metric: str) -> dict:
        for r in self.rows:
            if r["metric"] == metric:
                return r
        raise KeyError(metric)

    def table(self) -> str:
        a, b = self.names
        wa, wb = max(12, len(a) + 2), max(12, len(b) + 2)
        head = f"{'Metric':<24}{a:>{wa}}{b:>{wb}}{'Delta':>12}  Leader"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            fmt = ".2f" if r["metric"].endswith("(ms)") else ".4f"
            lines.append(
                f"{r['metric']:<24}{r[a]:>{wa}{fmt}}{r[b]:>{wb}{fmt}}{r['delta']:>12{fmt}}  {r['leader']}"
            )
        return "\n".join(lines)

    def write_csv(self, path) -> None:
        a, b = self.names
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["metric", a, b, "delta", "leader"])
            for r in self.rows:
                w.writerow([r["metric"], repr(r[a]), repr(r[b]), repr(r["delta"]), r["leader"]])


def _leader(a: float, b: float, higher_is_better: bool, names: tuple[str, str]) -> str:
    if a == b:
        return "tie"
    return names[0] if (a > b) == higher_is_better else names[1]


def compare_runs(qnn: RunHistory, baseline: RunHistory, names=("Hybrid QNN", "Classical baseline")) -> ComparisonReport:
    """Final-epoch table (Table-1 metrics, generalization gap, mean epoch time) plus curve series."""
    if len(qnn.epochs) != len(baseline.epochs):
        raise ConfigError(
            f"epoch counts differ: {len(qnn.epochs)} vs {len(baseline.epochs)}"
        )
    if not qnn.epochs:
        raise ConfigError("cannot compare empty histories")
    names = tuple(names)
    if names[0] == names[1]:
        names = (names[0] + " (1)", names[1] + " (2)")
    fa, fb = qnn.epochs[-1], baseline.epochs[-1]
    rows = []
    for title, attr, higher in TABLE_ROWS:
        va, vb = getattr(fa, attr), getattr(fb, attr)
        rows.append({"metric": title, names[0]: va, names[1]: vb, "delta": va - vb,
                     "leader": _leader(va, vb, higher, names)})
    ga = fa.train_accuracy - fa.val_accuracy
    gb = fb.train_accuracy - fb.val_accuracy
    rows.append({"metric": "Generalization Gap", names[0]: ga, names[1]: gb, "delta": ga - gb,
                 "leader": _leader(ga, gb, False, names)})
    ta, tb = qnn.mean_epoch_ms(), baseline.mean_epoch_ms()
    rows.append({"metric": "Mean Epoch Time (ms)", names[0]: ta, names[1]: tb, "delta": ta - tb,
                 "leader": _leader(ta, tb, False, names)})
    curves = {}
    for name, h in zip(names, (qnn, baseline)):
        curves[name] = {k: h.series(k) for k in
                        ("train_accuracy", "val_accuracy", "train_loss", "val_loss", "epoch_ms")}
    return ComparisonReport(names, rows, curves)


# -- curve files --------------------------------------------------------------

HISTORY_COLUMNS = ("epoch", "train_loss", "train_acc", "val_loss", "val_acc")


def write_history_csv(history: RunHistory, path) -> None:
    """Per-epoch metrics; timing lives in a separate file so this one is reproducible."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(HISTORY_COLUMNS)
        for e in history.epochs:
            w.writerow([e.epoch, repr(e.train_loss), repr(e.train_accuracy),
                        repr(e.val_loss), repr(e.val_accuracy)])


def write_timing_csv(history: RunHistory, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "epoch_ms"])
        for e in history.epochs:
            w.writerow([e.epoch, repr(e.epoch_ms)])


def read_history_csv(path) -> RunHistory:
    path = Path(path)
    timing = {}
    tpath = path.with_name(path.stem + "-timing.csv")
    if tpath.exists():
        with open(tpath, newline="") as f:
            timing = {int(r["epoch"]): float(r["epoch_ms"]) for r in csv.DictReader(f)}
    epochs = []
    with open(path, newline="") as f:
        for r in csv.DictReader(f):
            ep = int(r["epoch"])
            epochs.append(EpochRecord(ep, float(r["train_loss"]), float(r["train_acc"]),
                                      float(r["val_loss"]), float(r["val_acc"]),
                                      timing.get(ep, 0.0)))
    return RunHistory(path.stem, epochs)


def emit_curves(history: RunHistory, out_dir, stem: str = "history") -> list[Path]:
    """Write ``<stem>.csv`` (metrics), ``<stem>-timing.csv`` and one SVG chart per quantity."""
    from .plotting import svg_line_chart

    if not history.epochs:
        raise ConfigError("history is empty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / f"{stem}.csv", out_dir / f"{stem}-timing.csv"]
    write_history_csv(history, paths[0])
    write_timing_csv(history, paths[1])
    x = [e.epoch for e in history.epochs]
    for quantity, ylabel in (("train_loss", "loss"), ("train_accuracy", "accuracy"),
                             ("val_loss", "loss"), ("val_accuracy", "accuracy"),
                             ("epoch_ms", "ms")):
        p = out_dir / f"{stem}-{quantity}.svg"
        p.write_text(svg_line_chart({quantity: (x, history.series(quantity))},
                                    title=f"{history.label} {quantity}".strip(),
                                    xlabel="epoch", ylabel=ylabel))
        paths.append(p)
    return paths
