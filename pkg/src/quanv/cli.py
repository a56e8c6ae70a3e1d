"""Command-line entry point.

Exit codes: 0 success, 1 runtime failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    CACHE_MAGIC,
    Dataset,
    convert_medmnist_npz,
    export_feature_map_pgm,
    load_csv,
    load_feature_cache,
    load_idx,
    read_cache_header,
    synthetic_dataset,
    write_idx,
)
from .errors import ConfigError, QuanvError
from .experiment import fit, run_experiment, train_indices, val_indices, write_manifest
from .nn import CHECKPOINT_MAGIC, AdamConfig, load_checkpoint, save_checkpoint
from .plotting import comparison_figure, comparison_svgs, feature_map_figure, history_figure
from .quanv import default_workers, precompute_features
from .sim import CircuitSpec, build_random_layers
from .train import RunHistory, TrainConfig, compare_runs, emit_curves, evaluate

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


def _load_dataset(images, labels, fmt: str, side: int, split: str) -> Dataset:
    if fmt == "csv":
        return load_csv(images, side, side, split)
    if labels is None:
        raise ConfigError("--labels is required for IDX input")
    return load_idx(images, labels, split)


def _ansatz(args) -> CircuitSpec:
    return build_random_layers(args.seed, args.layers, 4)


# -- commands -----------------------------------------------------------------

def cmd_synth(args) -> int:
    ds = synthetic_dataset(args.n, args.side, args.seed)
    pix = np.floor(ds.images[..., 0] * 255 + 0.5).astype(np.uint8)
    write_idx(pix, ds.labels, args.out_images, args.out_labels)
    print(f"wrote {len(ds)} synthetic {args.side}x{args.side} images to {args.out_images}")
    return EXIT_OK


def cmd_convert(args) -> int:
    written = convert_medmnist_npz(args.npz, args.out_dir, args.prefix)
    for split, (ip, lp) in written.items():
        print(f"{split}: {ip} {lp}")
    return EXIT_OK


def cmd_extract(args) -> int:
    ds = _load_dataset(args.images, args.labels, args.format, args.side, "train")
    ansatz = _ansatz(args)
    out = Path(args.out)
    features = precompute_features(ds.images, ansatz, out, ds.labels, workers=args.threads)
    manifest = write_manifest(
        out.with_name(out.name + ".manifest.json"),
        command="extract",
        argv=sys.argv[1:],
        seeds={"ansatz_seed": args.seed},
        ansatz=json.loads(ansatz.to_json()),
        config={"layers": args.layers, "format": args.format, "threads": args.threads},
        inputs=[p for p in (args.images, args.labels) if p],
        outputs=[out],
    )
    shape = features[0].shape if features else (0, 0, 4)
    print(f"extracted {len(features)} feature maps of {shape[0]}x{shape[1]}x{shape[2]} -> {out}")
    print(f"manifest: {manifest}")
    return EXIT_OK


def _training_data(args):
    """(train_x, train_y, val_x, val_y, train_idx, val_idx, inputs) for either mode."""
    if args.mode == "qnn":
        if not (args.train_cache and args.val_cache):
            raise ConfigError("--mode qnn needs --train-cache and --val-cache")
        tr = load_feature_cache(args.train_cache, args.seed, args.layers)
        va = load_feature_cache(args.val_cache, args.seed, args.layers)
        inputs = [args.train_cache, args.val_cache]
    else:
        if not (args.train_images and args.val_images):
            raise ConfigError("--mode baseline needs --train-images and --val-images")
        tr = _load_dataset(args.train_images, args.train_labels, args.format, args.side, "train")
        va = _load_dataset(args.val_images, args.val_labels, args.format, args.side, "val")
        inputs = [p for p in (args.train_images, args.train_labels, args.val_images, args.val_labels) if p]
    ti = train_indices(len(tr), args.train_n, args.data_seed)
    vi = val_indices(len(va), args.val_n, args.data_seed)
    tr, va = tr.take(ti), va.take(vi)
    return tr.flat(), tr.labels, va.flat(), va.labels, ti, vi, inputs


def cmd_train(args) -> int:
    train_x, train_y, val_x, val_y, ti, vi, inputs = _training_data(args)
    adam = AdamConfig(learning_rate=args.lr)
    config = TrainConfig(args.epochs, args.batch_size, adam, args.data_seed, args.init_seed, args.seed)
    label = "Hybrid QNN" if args.mode == "qnn" else "Classical baseline"
    model, history = fit(train_x, train_y, val_x, val_y, config, label)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = out / "checkpoint.qnvm"
    save_checkpoint(model, ckpt, adam)
    curves = emit_curves(history, out, "history")
    history.save_json(out / "history.json")
    figure = history_figure(history, out / "history.png")
    write_manifest(
        out / "manifest.json",
        command="train",
        argv=sys.argv[1:],
        mode=args.mode,
        seeds={"data_seed": args.data_seed, "init_seed": args.init_seed, "ansatz_seed": args.seed},
        ansatz=json.loads(build_random_layers(args.seed, args.layers, 4).to_json()) if args.mode == "qnn" else None,
        subsample={"train_indices": ti, "val_indices": vi},
        config={"epochs": args.epochs, "batch_size": args.batch_size, "adam": adam,
                "train_n": args.train_n, "val_n": args.val_n, "layers": args.layers},
        inputs=inputs,
        outputs=[ckpt, out / "history.json", figure, *curves],
    )
    last = history.epochs[-1] if history.epochs else None
    if last:
        print(f"{label}: epoch {last.epoch} train acc {last.train_accuracy:.4f} loss {last.train_loss:.4f} "
              f"| val acc {last.val_accuracy:.4f} loss {last.val_loss:.4f}")
    print(f"outputs in {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    model, _ = load_checkpoint(args.checkpoint)
    if args.cache:
        data = load_feature_cache(args.cache, args.seed, args.layers)
    elif args.images:
        data = _load_dataset(args.images, args.labels, args.format, args.side, "test")
    else:
        raise ConfigError("give --cache or --images")
    if len(data) == 0:
        raise ConfigError("evaluation set is empty")
    if args.n:
        data = data.take(val_indices(len(data), args.n, args.data_seed))
    report = evaluate(model, data.flat(), data.labels)
    print(report.table())
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_dict(), indent=2))
    return EXIT_OK


def cmd_compare(args) -> int:
    qnn = RunHistory.load(args.qnn)
    base = RunHistory.load(args.baseline)
    report = compare_runs(qnn, base, (args.qnn_name, args.baseline_name))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = report.table()
    print(table)
    (out / "comparison.txt").write_text(table + "\n")
    (out / "comparison.json").write_text(json.dumps(report.to_dict(), indent=2))
    report.write_csv(out / "comparison.csv")
    svgs = comparison_svgs(report, out)
    fig = comparison_figure(report, out / "comparison.png")
    write_manifest(out / "manifest.json", command="compare", argv=sys.argv[1:],
                   inputs=[args.qnn, args.baseline],
                   outputs=[out / "comparison.json", out / "comparison.csv", fig, *svgs])
    return EXIT_OK


def cmd_inspect(args) -> int:
    path = Path(args.path)
    raw = path.read_bytes()
    if raw[:4] == CACHE_MAGIC:
        hdr = read_cache_header(raw, path)
        fd = load_feature_cache(path)
        print(f"feature cache {path}")
        print(f"  count      {hdr['count']}")
        print(f"  shape      {hdr['height']}x{hdr['width']}x{hdr['channels']}")
        print(f"  seed       {hdr['ansatz_seed']}")
        print(f"  layers     {hdr['ansatz_layers']}")
        print(f"  patch order {hdr['patch_order']}")
        if len(fd):
            print(f"  labels     {int(fd.labels.sum())} positive / {len(fd)}")
            print(f"  range      [{fd.features.min():.4f}, {fd.features.max():.4f}]")
        if args.show_circuit:
            _print_circuit(build_random_layers(hdr["ansatz_seed"], hdr["ansatz_layers"], 4))
        if args.export_pgm:
            if not 0 <= args.index < len(fd):
                raise ConfigError(f"--index {args.index} out of range for {len(fd)} feature maps")
            out = Path(args.out_dir or path.parent)
            out.mkdir(parents=True, exist_ok=True)
            fm = fd.features[args.index]
            for ch in range(fm.shape[2]):
                p = out / f"{path.stem}-{args.index}-ch{ch}.pgm"
                export_feature_map_pgm(fm, ch, p)
                print(f"  wrote {p}")
            feature_map_figure(fm, out / f"{path.stem}-{args.index}.png")
        return EXIT_OK
    if raw[:4] == CHECKPOINT_MAGIC:
        model, adam = load_checkpoint(path)
        print(f"checkpoint {path}")
        for i, s in enumerate(model.layers):
            print(f"  layer {i}: {s.in_dim} -> {s.out_dim} {s.activation}")
        print(f"  parameters {model.n_params()}")
        print(f"  adam step  {model.step} (lr {adam.learning_rate})")
        return EXIT_OK
    try:
        circuit = CircuitSpec.from_json(raw.decode("utf-8"))
    except (UnicodeDecodeError, ValueError, KeyError, TypeError):
        raise ConfigError(f"{path}: unknown file format (magic {raw[:4]!r})") from None
    print(f"circuit {path}: {circuit.n_qubits} qubits, seed {circuit.seed}, layers {circuit.n_layers}")
    _print_circuit(circuit)
    return EXIT_OK


def _print_circuit(circuit: CircuitSpec) -> None:
    print(f"  {len(circuit.gates)} gates")
    for i, g in enumerate(circuit.gates):
        if g.kind == "CNOT":
            print(f"  {i:3d} CNOT  control={g.wires[0]} target={g.wires[1]}")
        else:
            print(f"  {i:3d} {g.kind:<5} wire={g.wires[0]} angle={g.angle:.6f}")


def cmd_circuit(args) -> int:
    circuit = build_random_layers(args.seed, args.layers, args.qubits)
    text = circuit.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def cmd_reproduce(args) -> int:
    if args.synthetic:
        tr = synthetic_dataset(args.synthetic_n, 28, args.synthetic_seed, "train")
        va = synthetic_dataset(args.synthetic_n, 28, args.synthetic_seed + 1, "val")
        inputs = []
    else:
        if not (args.train_images and args.val_images):
            raise ConfigError("give --train-images/--val-images (IDX) or --synthetic")
        tr = load_idx(args.train_images, args.train_labels, "train")
        va = load_idx(args.val_images, args.val_labels, "val")
        inputs = [args.train_images, args.train_labels, args.val_images, args.val_labels]
    config = TrainConfig(args.epochs, args.batch_size, AdamConfig(learning_rate=args.lr),
                         init_seed=args.init_seed, ansatz_seed=args.seed)
    result = run_experiment(tr, va, args.data_seeds, args.train_n, args.val_n, config,
                            args.layers, args.threads)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for s in result.seeds:
        sd = out / f"seed-{s.data_seed}"
        emit_curves(s.qnn, sd, "qnn-history")
        emit_curves(s.baseline, sd, "baseline-history")
        s.qnn.save_json(sd / "qnn-history.json")
        s.baseline.save_json(sd / "baseline-history.json")
        report = compare_runs(s.qnn, s.baseline)
        (sd / "comparison.txt").write_text(report.table() + "\n")
        report.write_csv(sd / "comparison.csv")
        comparison_figure(report, sd / "comparison.png")
        print(f"data seed {s.data_seed}")
        print(report.table())
        print()
    summary = result.summary()
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    write_manifest(out / "manifest.json", command="reproduce", argv=sys.argv[1:],
                   seeds={"data_seeds": list(args.data_seeds), "init_seed": args.init_seed,
                          "ansatz_seed": args.seed},
                   subsample={str(s.data_seed): {"train_indices": s.train_indices,
                                                 "val_indices": s.val_indices} for s in result.seeds},
                   config={"epochs": args.epochs, "batch_size": args.batch_size, "lr": args.lr,
                           "train_n": args.train_n, "val_n": args.val_n, "layers": args.layers},
                   inputs=inputs, outputs=[out / "summary.json"])
    print(f"mean validation accuracy: QNN {summary['qnn_mean_val_accuracy']:.4f}  "
          f"baseline {summary['baseline_mean_val_accuracy']:.4f}")
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def _add_ansatz_flags(p, stamp_check: bool = False) -> None:
    p.add_argument("--seed", type=int, default=42 if not stamp_check else None,
                   help="ansatz seed" + (" (checked against cache stamps)" if stamp_check else ""))
    p.add_argument("--layers", type=int, default=1 if not stamp_check else None,
                   help="number of random layers")


def _add_format_flags(p) -> None:
    p.add_argument("--format", choices=("idx", "csv"), default="idx")
    p.add_argument("--side", type=int, default=28, help="image side for CSV input")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quanv", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"quanv {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic IDX dataset")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--side", type=int, default=28)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-images", required=True)
    p.add_argument("--out-labels", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("convert", help="MedMNIST pneumoniamnist.npz -> IDX files")
    p.add_argument("--npz", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--prefix", default="pneumonia")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("extract", help="quanvolve a dataset into a feature cache")
    p.add_argument("--images", required=True)
    p.add_argument("--labels")
    _add_format_flags(p)
    _add_ansatz_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=default_workers())
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train the hybrid or the baseline classifier")
    p.add_argument("--mode", choices=("qnn", "baseline"), required=True)
    p.add_argument("--train-cache")
    p.add_argument("--val-cache")
    p.add_argument("--train-images")
    p.add_argument("--train-labels")
    p.add_argument("--val-images")
    p.add_argument("--val-labels")
    _add_format_flags(p)
    _add_ansatz_flags(p)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--train-n", type=int, default=50)
    p.add_argument("--val-n", type=int, default=30)
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--init-seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="metrics of a checkpoint on a dataset or cache")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--cache")
    p.add_argument("--images")
    p.add_argument("--labels")
    _add_format_flags(p)
    _add_ansatz_flags(p, stamp_check=True)
    p.add_argument("--n", type=int, default=0, help="evaluate on a seeded subsample of this size")
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--out", help="write the report as JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="side-by-side report of two training runs")
    p.add_argument("--qnn", required=True, help="history JSON or CSV of the hybrid run")
    p.add_argument("--baseline", required=True, help="history JSON or CSV of the baseline run")
    p.add_argument("--qnn-name", default="Hybrid QNN")
    p.add_argument("--baseline-name", default="Classical baseline")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("inspect", help="describe a cache, checkpoint or circuit JSON")
    p.add_argument("path")
    p.add_argument("--show-circuit", action="store_true")
    p.add_argument("--export-pgm", action="store_true")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("circuit", help="write the seeded ansatz as JSON")
    _add_ansatz_flags(p)
    p.add_argument("--qubits", type=int, default=4)
    p.add_argument("--out")
    p.set_defaults(func=cmd_circuit)

    p = sub.add_parser("reproduce", help="QNN vs baseline over several data seeds")
    p.add_argument("--train-images")
    p.add_argument("--train-labels")
    p.add_argument("--val-images")
    p.add_argument("--val-labels")
    p.add_argument("--synthetic", action="store_true")
    p.add_argument("--synthetic-n", type=int, default=200)
    p.add_argument("--synthetic-seed", type=int, default=0)
    _add_ansatz_flags(p)
    p.add_argument("--data-seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--train-n", type=int, default=50)
    p.add_argument("--val-n", type=int, default=30)
    p.add_argument("--init-seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=default_workers())
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: no such file: {exc.filename}", file=sys.stderr)
        return EXIT_USAGE
    except QuanvError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
