"""Curve rendering: a dependency-free SVG line chart and matplotlib report figures."""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")

WIDTH, HEIGHT = 480, 320
MARGIN = 48


def _span(values: list[float]) -> tuple[float, float]:
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return 0.0, 1.0
    lo, hi = min(finite), max(finite)
    if lo == hi:
        pad = abs(lo) * 0.05 or 0.5
        return lo - pad, hi + pad
    return lo, hi


def chart_coords(x, y, xlim, ylim) -> list[tuple[float, float]]:
    """Map data to SVG pixels; larger data values sit higher (smaller pixel y)."""
    (x0, x1), (y0, y1) = xlim, ylim
    pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN
    pts = []
    for xi, yi in zip(x, y):
        px = MARGIN + (xi - x0) / (x1 - x0) * pw if x1 != x0 else MARGIN + pw / 2
        py = MARGIN + (y1 - yi) / (y1 - y0) * ph
        pts.append((round(px, 3), round(py, 3)))
    return pts


def svg_line_chart(series: dict[str, tuple[list, list]], title: str = "",
                   xlabel: str = "", ylabel: str = "") -> str:
    """One ``<polyline>`` per named series, shared axes, minimal ticks and a legend."""
    xs = [v for x, _ in series.values() for v in x]
    ys = [v for _, y in series.values() for v in y]
    xlim, ylim = _span(xs), _span(ys)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 10}" text-anchor="middle" font-size="11">{escape(xlabel)}</text>',
        f'<text x="14" y="{HEIGHT / 2}" text-anchor="middle" font-size="11" '
        f'transform="rotate(-90 14 {HEIGHT / 2})">{escape(ylabel)}</text>',
    ]
    for frac in (0.0, 0.5, 1.0):
        yv = ylim[0] + frac * (ylim[1] - ylim[0])
        (_, py), = chart_coords([xlim[0]], [yv], xlim, ylim)
        out.append(f'<text x="{MARGIN - 4}" y="{py + 4}" text-anchor="end" font-size="10">{yv:.3g}</text>')
    for i, (name, (x, y)) in enumerate(series.items()):
        color = _COLORS[i % len(_COLORS)]
        pts = chart_coords(x, y, xlim, ylim)
        out.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="2" data-series="{escape(name)}" '
            f'points="{" ".join(f"{px},{py}" for px, py in pts)}"/>'
        )
        ly = MARGIN + 14 * i
        out.append(f'<text x="{WIDTH - MARGIN}" y="{ly}" text-anchor="end" font-size="10" fill="{color}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def comparison_svgs(report, out_dir) -> list[Path]:
    """Overlaid curves of both runs, one SVG per quantity."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for quantity, ylabel in (("accuracy", "accuracy"), ("loss", "loss")):
        series = {}
        for name, curves in report.curves.items():
            x = list(range(1, len(curves[f"train_{quantity}"]) + 1))
            series[f"{name} train"] = (x, curves[f"train_{quantity}"])
            series[f"{name} val"] = (x, curves[f"val_{quantity}"])
        p = out_dir / f"compare-{quantity}.svg"
        p.write_text(svg_line_chart(series, title=f"{quantity} per epoch", xlabel="epoch", ylabel=ylabel))
        paths.append(p)
    return paths


def comparison_figure(report, path, dpi: int = 150) -> Path:
    """2x2 grid: accuracy on top, loss below; one column per model."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    names = list(report.curves)
    fig, axes = plt.subplots(2, len(names), figsize=(5 * len(names), 7), squeeze=False, sharex=True)
    for col, name in enumerate(names):
        curves = report.curves[name]
        epochs = range(1, len(curves["train_accuracy"]) + 1)
        for row, quantity in enumerate(("accuracy", "loss")):
            ax = axes[row][col]
            ax.plot(epochs, curves[f"train_{quantity}"], marker="o", label="train")
            ax.plot(epochs, curves[f"val_{quantity}"], marker="s", label="validation")
            ax.set_title(f"{name}: {quantity}")
            ax.set_ylabel(quantity)
            ax.grid(alpha=0.3)
            ax.legend(frameon=False)
        axes[1][col].set_xlabel("epoch")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
    return path


def history_figure(history, path, dpi: int = 150) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    epochs = [e.epoch for e in history.epochs]
    fig, (ax_acc, ax_loss) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax_acc.plot(epochs, history.series("train_accuracy"), marker="o", label="train")
    ax_acc.plot(epochs, history.series("val_accuracy"), marker="s", label="validation")
    ax_acc.set_ylabel("accuracy")
    ax_loss.plot(epochs, history.series("train_loss"), marker="o", label="train")
    ax_loss.plot(epochs, history.series("val_loss"), marker="s", label="validation")
    ax_loss.set_ylabel("loss")
    for ax in (ax_acc, ax_loss):
        ax.set_xlabel("epoch")
        ax.grid(alpha=0.3)
        ax.legend(frameon=False)
    if history.label:
        fig.suptitle(history.label)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
    return path


def feature_map_figure(fm, path, dpi: int = 150) -> Path:
    """The four channels of one feature map side by side."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, fm.shape[2], figsize=(2.5 * fm.shape[2], 2.7))
    for j, ax in enumerate(axes):
        ax.imshow(fm[:, :, j], cmap="viridis", vmin=-1, vmax=1)
        ax.set_title(f"<Z_{j}>")
        ax.axis("off")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
    return path
