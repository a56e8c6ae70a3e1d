"""Exit criteria for the toolkit, one test per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the PASS/FAIL lines
as they happen; they are also repeated in the terminal summary.

Criterion 8 needs PneumoniaMNIST.  Point ``QUANV_PNEUMONIA`` at either the
MedMNIST ``pneumoniamnist.npz`` or a directory holding the IDX files written
by ``quanv convert`` (``pneumonia-{train,val}-{images,labels}.idx``).
``~/.medmnist/pneumoniamnist.npz`` is tried when the variable is unset.
"""

import math
import os
import time
from pathlib import Path

import numpy as np

from quanv.cli import main
from quanv.data import load_idx, load_medmnist_npz, synthetic_dataset
from quanv.experiment import run_experiment
from quanv.nn import LayerSpec, backward, forward, init_model
from quanv.quanv import quanv_image
from quanv.rng import SplitMix64
from quanv.sim import build_random_layers, new_state, oracle_statevector, random_circuit, run_circuit
from quanv.train import TrainConfig, auc_pairwise, auc_roc, compare_runs

from test_nn import max_relative_error, numeric_gradients


def test_ac1_simulator_matches_kronecker_oracle(criterion):
    rng = SplitMix64(20250101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        c = random_circuit(rng, 4, int(rng.integers(21, 1)[0]))
        diff = run_circuit(new_state(4), c).amplitudes - oracle_statevector(c, 4).amplitudes
        worst = max(worst, float(np.max(np.abs(diff))))
    elapsed = time.perf_counter() - t0
    criterion("AC1 simulator oracle equivalence", worst < 1e-10 and elapsed < 5.0,
              f"max error {worst:.2e} (< 1e-10), {elapsed:.2f} s (< 5 s)")


def test_ac2_closed_form_quanvolution(criterion):
    img = SplitMix64(7).random(28 * 28).reshape(28, 28)
    img[0, 0], img[0, 1], img[27, 27] = 0.0, 1.0, 0.5
    fm = quanv_image(img, build_random_layers(42, 0, 4))
    blocks = img.reshape(14, 2, 14, 2).transpose(0, 2, 1, 3).reshape(14, 14, 4)
    err = float(np.max(np.abs(fm - np.cos(math.pi * blocks))))
    criterion("AC2 closed-form cos(pi x) with zero layers", err < 1e-10, f"max error {err:.2e} (< 1e-10)")


def test_ac3_shape_law(criterion):
    ansatz = build_random_layers(42, 1, 4)
    fm = quanv_image(np.zeros((28, 28)), ansatz)
    bad = []
    for h in range(2, 29, 2):
        for w in range(2, 29, 2):
            out = quanv_image(SplitMix64(h * 100 + w).random(h * w).reshape(h, w), ansatz)
            if out.shape != (h // 2, w // 2, 4):
                bad.append((h, w, out.shape))
    criterion("AC3 shape law 28x28 -> 14x14x4, all even sizes 2..28",
              fm.shape == (14, 14, 4) and not bad, f"28x28 -> {fm.shape}; {len(bad)} mismatches")


def test_ac4_gradients_match_finite_differences(criterion):
    """25 cases; the 784-128-1 net checks a seeded sample of ~250 parameters per case."""
    archs = [(4, 1)] * 9 + [(16, 8, 1)] * 8 + [(784, 128, 1)] * 8
    worst = 0.0
    for case, dims in enumerate(archs):
        rng = SplitMix64(1000 + case)
        acts = ["ReLU"] * (len(dims) - 2) + ["Sigmoid"]
        model = init_model([LayerSpec(a, b, k) for a, b, k in zip(dims, dims[1:], acts)], 1000 + case)
        for b in model.biases:
            b[:] = rng.uniform(-0.1, 0.1, b.size)
        x = rng.random(2 * dims[0]).reshape(2, dims[0])
        y = rng.integers(2, 2).astype(float)
        pick = None
        if dims[0] == 784:
            pick = [rng.integers(p.size, min(p.size, n)) for p, n in
                    zip(model.params(), (120, 40, 128, 1))]
        _, a = forward(model, x)
        err = max_relative_error(backward(model, a, y), numeric_gradients(model, x, y, 1e-5, pick))
        worst = max(worst, err)
    criterion("AC4 backprop vs central differences (h=1e-5)", worst < 1e-5,
              f"max relative error {worst:.2e} (< 1e-5) over 25 cases")


def test_ac5_auc_matches_pairwise_statistic(criterion):
    rng = SplitMix64(55)
    worst, sets = 0.0, 0
    while sets < 50:
        n = int(rng.integers(199, 1)[0]) + 2
        # coarse grid forces ties
        scores = np.floor(rng.random(n) * 20) / 20
        labels = rng.integers(2, n)
        if labels.min() == labels.max():
            continue
        worst = max(worst, abs(auc_roc(scores, labels) - auc_pairwise(scores, labels)))
        sets += 1
    criterion("AC5 trapezoidal AUC vs brute-force pairs", worst < 1e-12, f"max diff {worst:.2e} (< 1e-12)")


def test_ac6_cli_runs_are_byte_identical(tmp_path, criterion):
    d = tmp_path
    assert main(["synth", "--n", "80", "--seed", "3", "--out-images", str(d / "tr.idx"),
                 "--out-labels", str(d / "trl.idx")]) == 0
    assert main(["synth", "--n", "40", "--seed", "4", "--out-images", str(d / "va.idx"),
                 "--out-labels", str(d / "val.idx")]) == 0
    for run, threads in (("r1", "1"), ("r2", "4")):
        for split, img, lab in (("tr", "tr.idx", "trl.idx"), ("va", "va.idx", "val.idx")):
            assert main(["extract", "--images", str(d / img), "--labels", str(d / lab), "--seed", "42",
                         "--layers", "1", "--threads", threads, "--out", str(d / f"{run}-{split}.qnvf")]) == 0
        assert main(["train", "--mode", "qnn", "--train-cache", str(d / f"{run}-tr.qnvf"),
                     "--val-cache", str(d / f"{run}-va.qnvf"), "--data-seed", "5", "--init-seed", "6",
                     "--out-dir", str(d / run)]) == 0
    same = {
        "train cache": (d / "r1-tr.qnvf").read_bytes() == (d / "r2-tr.qnvf").read_bytes(),
        "val cache": (d / "r1-va.qnvf").read_bytes() == (d / "r2-va.qnvf").read_bytes(),
        "checkpoint": (d / "r1" / "checkpoint.qnvm").read_bytes() == (d / "r2" / "checkpoint.qnvm").read_bytes(),
        "history csv": (d / "r1" / "history.csv").read_bytes() == (d / "r2" / "history.csv").read_bytes(),
    }
    criterion("AC6 extract+train determinism", all(same.values()),
              ", ".join(f"{k} {'identical' if v else 'DIFFERS'}" for k, v in same.items()))


def test_ac7_synthetic_end_to_end(criterion):
    t0 = time.perf_counter()
    train_set = synthetic_dataset(50, 28, seed=11, split="train")
    val_set = synthetic_dataset(30, 28, seed=12, split="val")
    result = run_experiment(train_set, val_set, data_seeds=(0,), train_n=50, val_n=30,
                            config=TrainConfig(), ansatz_layers=1)
    elapsed = time.perf_counter() - t0
    s = result.seeds[0]
    q, b = s.qnn.epochs[-1].val_accuracy, s.baseline.epochs[-1].val_accuracy
    criterion("AC7 synthetic 50/30, both models >= 0.95 val accuracy",
              q >= 0.95 and b >= 0.95 and len(s.qnn.epochs) == 10 and elapsed < 60,
              f"QNN {q:.4f}, baseline {b:.4f}, {elapsed:.1f} s (< 60 s)")


def _pneumonia_source():
    env = os.environ.get("QUANV_PNEUMONIA")
    candidates = [Path(env)] if env else []
    candidates.append(Path.home() / ".medmnist" / "pneumoniamnist.npz")
    for c in candidates:
        if c.is_file():
            return load_medmnist_npz(c, "train"), load_medmnist_npz(c, "val")
        if c.is_dir() and (c / "pneumonia-train-images.idx").exists():
            return (load_idx(c / "pneumonia-train-images.idx", c / "pneumonia-train-labels.idx", "train"),
                    load_idx(c / "pneumonia-val-images.idx", c / "pneumonia-val-labels.idx", "val"))
    return None


def test_ac8_pneumonia_desk_scale(criterion):
    data = _pneumonia_source()
    if data is None:
        criterion("AC8 PneumoniaMNIST desk-scale reproduction", False,
                  "dataset not found: set QUANV_PNEUMONIA to pneumoniamnist.npz or an IDX directory")
    t0 = time.perf_counter()
    result = run_experiment(*data, data_seeds=(0, 1, 2, 3, 4), train_n=50, val_n=30,
                            config=TrainConfig(), ansatz_layers=1)
    elapsed = time.perf_counter() - t0
    q, b = result.mean_val_accuracy("qnn"), result.mean_val_accuracy("baseline")
    criterion("AC8 PneumoniaMNIST desk-scale reproduction",
              q >= 0.70 and q >= b and elapsed < 600,
              f"mean val acc QNN {q:.4f} (>= 0.70), baseline {b:.4f} (QNN >= baseline), {elapsed:.0f} s")


def test_ac9_comparison_report_fields(tmp_path, criterion):
    tr = synthetic_dataset(50, 28, seed=21)
    va = synthetic_dataset(30, 28, seed=22, split="val")
    result = run_experiment(tr, va, data_seeds=(0,), config=TrainConfig(epochs=3))
    rep = compare_runs(result.seeds[0].qnn, result.seeds[0].baseline)
    needed = ["Training Accuracy", "Validation Accuracy", "Training Loss", "Validation Loss",
              "Mean Epoch Time (ms)"]
    present = [m for m in needed if all(n in rep.row(m) for n in rep.names)]
    table = rep.table()
    times = [rep.row("Mean Epoch Time (ms)")[n] for n in rep.names]
    criterion("AC9 comparison report carries accuracy, loss and epoch time",
              present == needed and all(m in table for m in needed) and all(t > 0 for t in times),
              "mean epoch ms " + ", ".join(f"{n}={t:.1f}" for n, t in zip(rep.names, times)) + " (reported only)")
