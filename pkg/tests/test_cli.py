import json
import math
import re
import subprocess
import sys

import numpy as np
import pytest

from quanv.cli import main
from quanv.data import load_feature_cache, load_idx


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--n", "80", "--seed", "1", "--out-images", str(d / "tr.idx"),
                 "--out-labels", str(d / "trl.idx")]) == 0
    assert main(["synth", "--n", "40", "--seed", "2", "--out-images", str(d / "va.idx"),
                 "--out-labels", str(d / "val.idx")]) == 0
    for split, img, lab in (("tr", "tr.idx", "trl.idx"), ("va", "va.idx", "val.idx")):
        assert main(["extract", "--images", str(d / img), "--labels", str(d / lab), "--seed", "42",
                     "--layers", "1", "--out", str(d / f"{split}.qnvf"), "--threads", "2"]) == 0
    return d


def _train_qnn(d, out, *extra):
    return main(["train", "--mode", "qnn", "--train-cache", str(d / "tr.qnvf"),
                 "--val-cache", str(d / "va.qnvf"), "--out-dir", str(out), *extra])


def _train_baseline(d, out):
    return main(["train", "--mode", "baseline", "--train-images", str(d / "tr.idx"),
                 "--train-labels", str(d / "trl.idx"), "--val-images", str(d / "va.idx"),
                 "--val-labels", str(d / "val.idx"), "--out-dir", str(out)])


def test_extract_writes_stamped_cache_and_manifest(workspace):
    fd = load_feature_cache(workspace / "tr.qnvf", expected_seed=42, expected_layers=1)
    assert fd.features.shape == (80, 14, 14, 4)
    man = json.loads((workspace / "tr.qnvf.manifest.json").read_text())
    assert man["seeds"]["ansatz_seed"] == 42 and len(man["ansatz"]["gates"]) == 8
    assert str(workspace / "tr.qnvf") in man["outputs"]


def test_extract_layers_zero_is_closed_form(workspace, tmp_path):
    assert main(["extract", "--images", str(workspace / "va.idx"), "--labels", str(workspace / "val.idx"),
                 "--layers", "0", "--out", str(tmp_path / "z.qnvf")]) == 0
    fd = load_feature_cache(tmp_path / "z.qnvf")
    ds = load_idx(workspace / "va.idx", workspace / "val.idx")
    img = ds.images[3, :, :, 0]
    np.testing.assert_allclose(fd.features[3, 2, 5], np.cos(math.pi * img[4:6, 10:12].ravel()), atol=1e-12)


def test_missing_file_exits_2_naming_path(tmp_path, capsys):
    code = main(["extract", "--images", str(tmp_path / "nope.idx"), "--labels", "x", "--out", "o"])
    assert code == 2
    assert "nope.idx" in capsys.readouterr().err


def test_train_outputs_and_determinism(workspace, tmp_path):
    assert _train_qnn(workspace, tmp_path / "a") == 0
    assert _train_qnn(workspace, tmp_path / "b") == 0
    for name in ("checkpoint.qnvm", "history.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert len(man["subsample"]["train_indices"]) == 50 and len(man["subsample"]["val_indices"]) == 30
    assert man["config"]["epochs"] == 10 and man["config"]["batch_size"] == 4
    assert (tmp_path / "a" / "history.png").stat().st_size > 0
    rows = (tmp_path / "a" / "history.csv").read_text().strip().splitlines()
    assert len(rows) == 11


def test_train_stamp_mismatch_exits_2(workspace, tmp_path, capsys):
    assert _train_qnn(workspace, tmp_path / "x", "--seed", "43") == 2
    assert "ansatz_seed" in capsys.readouterr().err


def test_baseline_consumes_784_pixels(workspace, tmp_path, capsys):
    assert _train_baseline(workspace, tmp_path / "base") == 0
    assert main(["inspect", str(tmp_path / "base" / "checkpoint.qnvm")]) == 0
    out = capsys.readouterr().out
    assert "784 -> 128 ReLU" in out and "128 -> 1 Sigmoid" in out


def test_eval_prints_and_writes_json(workspace, tmp_path, capsys):
    _train_qnn(workspace, tmp_path / "q")
    capsys.readouterr()
    assert main(["eval", "--checkpoint", str(tmp_path / "q" / "checkpoint.qnvm"),
                 "--cache", str(workspace / "va.qnvf"), "--out", str(tmp_path / "m.json")]) == 0
    printed = capsys.readouterr().out
    report = json.loads((tmp_path / "m.json").read_text())
    assert report["accuracy"] == 1.0 and report["auc_roc"] == 1.0
    assert f"{report['accuracy']:.4f}" in printed and f"{report['f1']:.4f}" in printed


def test_eval_empty_set_is_config_error(workspace, tmp_path, capsys):
    _train_qnn(workspace, tmp_path / "q")
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    code = main(["eval", "--checkpoint", str(tmp_path / "q" / "checkpoint.qnvm"),
                 "--images", str(empty), "--format", "csv"])
    assert code == 2
    assert "empty" in capsys.readouterr().err


def test_compare_outputs(workspace, tmp_path, capsys):
    _train_qnn(workspace, tmp_path / "q")
    _train_baseline(workspace, tmp_path / "b")
    capsys.readouterr()
    assert main(["compare", "--qnn", str(tmp_path / "q" / "history.json"),
                 "--baseline", str(tmp_path / "b" / "history.json"), "--out-dir", str(tmp_path / "c")]) == 0
    table = capsys.readouterr().out
    for metric in ("Training Accuracy", "Validation Accuracy", "Training Loss", "Validation Loss",
                   "Mean Epoch Time"):
        assert metric in table
    svg = (tmp_path / "c" / "compare-accuracy.svg").read_text()
    assert svg.count("<polyline") == 4
    assert (tmp_path / "c" / "comparison.png").stat().st_size > 0
    assert (tmp_path / "c" / "comparison.csv").read_text().startswith("metric,")


def test_compare_same_file_zero_deltas(workspace, tmp_path):
    _train_qnn(workspace, tmp_path / "q")
    h = str(tmp_path / "q" / "history.csv")
    assert main(["compare", "--qnn", h, "--baseline", h, "--out-dir", str(tmp_path / "c")]) == 0
    rep = json.loads((tmp_path / "c" / "comparison.json").read_text())
    assert all(r["delta"] == 0 for r in rep["rows"])


def test_compare_epoch_mismatch(workspace, tmp_path, capsys):
    _train_qnn(workspace, tmp_path / "q")
    _train_qnn(workspace, tmp_path / "s", "--epochs", "3")
    assert main(["compare", "--qnn", str(tmp_path / "q" / "history.json"),
                 "--baseline", str(tmp_path / "s" / "history.json"), "--out-dir", str(tmp_path / "c")]) == 2
    assert "epoch" in capsys.readouterr().err


def test_inspect_cache_and_export(workspace, tmp_path, capsys):
    assert main(["inspect", str(workspace / "tr.qnvf"), "--export-pgm", "--index", "0",
                 "--out-dir", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "80" in out and "14x14x4" in out and "seed       42" in out and "layers     1" in out
    assert len(list(tmp_path.glob("*.pgm"))) == 4


def test_inspect_circuit_json(tmp_path, capsys):
    assert main(["circuit", "--seed", "42", "--layers", "1", "--out", str(tmp_path / "c.json")]) == 0
    assert main(["inspect", str(tmp_path / "c.json")]) == 0
    out = capsys.readouterr().out
    assert "8 gates" in out
    assert len(re.findall(r"^\s+\d+ (?:RX|RY|RZ|CNOT)", out, re.M)) == 8


def test_inspect_unknown_magic(tmp_path, capsys):
    p = tmp_path / "junk.bin"
    p.write_bytes(b"\x00\x01\x02\x03junk")
    assert main(["inspect", str(p)]) == 2
    assert "unknown" in capsys.readouterr().err


def test_inputs_are_not_mutated(workspace, tmp_path):
    before = (workspace / "tr.qnvf").read_bytes()
    _train_qnn(workspace, tmp_path / "q")
    assert (workspace / "tr.qnvf").read_bytes() == before


def test_reproduce_synthetic(tmp_path):
    assert main(["reproduce", "--synthetic", "--synthetic-n", "100", "--data-seeds", "0", "1",
                 "--epochs", "3", "--threads", "1", "--out-dir", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert len(summary["per_seed"]) == 2
    assert (tmp_path / "seed-0" / "comparison.png").exists()


def test_entry_point_usage_error_exit_code():
    proc = subprocess.run([sys.executable, "-m", "quanv.cli", "train"], capture_output=True, text=True)
    assert proc.returncode == 2
