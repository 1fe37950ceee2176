"""Error metrics, error maps and report export."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .fields import FieldError, ScalarGrid

HEATMAP_CMAP = "viridis"
ERROR_CMAP = "magma"


def _pair(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    p = pred.values if isinstance(pred, ScalarGrid) else np.asarray(pred, dtype=np.float64)
    t = truth.values if isinstance(truth, ScalarGrid) else np.asarray(truth, dtype=np.float64)
    if p.shape != t.shape:
        raise FieldError(f"lattice mismatch: prediction {p.shape} vs truth {t.shape}")
    return p, t


def mae(pred, truth) -> float:
    p, t = _pair(pred, truth)
    return float(np.mean(np.abs(p - t)))


def mre(pred, truth) -> float:
    """Mean relative error in percent; truth must be strictly positive."""
    p, t = _pair(pred, truth)
    if not np.all(t > 0):
        raise FieldError("relative error needs a strictly positive truth field")
    return float(100.0 * np.mean(np.abs(p - t) / t))


def error_map(pred: ScalarGrid, truth: ScalarGrid) -> ScalarGrid:
    p, t = _pair(pred, truth)
    return truth.like(np.abs(p - t))


def export_heatmap(grid, path, color_scale: str = HEATMAP_CMAP, title: str | None = None,
                   vmin: float | None = None, vmax: float | None = None) -> Path:
    """Render ``grid`` to a PNG with its min/max written in the margin.

    Row 0 is drawn at the top, matching the lattice convention.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    values = grid.values if isinstance(grid, ScalarGrid) else np.asarray(grid)
    lo = float(values.min()) if vmin is None else vmin
    hi = float(values.max()) if vmax is None else vmax
    if hi == lo:
        hi = lo + 1.0
    fig, ax = plt.subplots(figsize=(4.0, 3.6), dpi=80)
    im = ax.imshow(values, cmap=color_scale, vmin=lo, vmax=hi, interpolation="nearest")
    fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
    ax.set_xticks([])
    ax.set_yticks([])
    if title:
        ax.set_title(title, fontsize=9)
    fig.text(0.01, 0.01, f"min {values.min():.4g}  max {values.max():.4g}", fontsize=7)
    path = Path(path)
    fig.savefig(path)
    plt.close(fig)
    return path


def field_pairs(predicted: dict, truth: dict) -> dict:
    """Intersect two ``name -> ScalarGrid`` maps on names present in both."""
    return {k: (predicted[k], truth[k]) for k in predicted if k in truth}


def write_metrics_csv(pairs: dict, path, relative=("E", "nu")) -> list[dict]:
    rows = []
    for name, (p, t) in pairs.items():
        row = {"field": name, "mae": mae(p, t), "mre": ""}
        if name in relative:
            row["mre"] = mre(p, t)
        rows.append(row)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["field", "mae", "mre"])
        w.writeheader()
        for r in rows:
            w.writerow({k: (format(v, ".17g") if isinstance(v, float) else v) for k, v in r.items()})
    return rows


def report_manifest(names) -> list[str]:
    files = ["metrics.csv"]
    for n in names:
        files += [f"{n}_pred.png", f"{n}_true.png", f"{n}_error.png"]
    return files


def export_report(run_dir, pairs: dict) -> list[Path]:
    """Write ``metrics.csv`` and predicted/true/error heatmaps for every field
    pair into ``run_dir/report``; returns the written paths."""
    out = Path(run_dir) / "report"
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "metrics.csv"]
    write_metrics_csv(pairs, written[0])
    for name, (p, t) in pairs.items():
        lo = float(min(p.values.min(), t.values.min()))
        hi = float(max(p.values.max(), t.values.max()))
        written.append(export_heatmap(p, out / f"{name}_pred.png", title=f"{name} predicted", vmin=lo, vmax=hi))
        written.append(export_heatmap(t, out / f"{name}_true.png", title=f"{name} true", vmin=lo, vmax=hi))
        written.append(export_heatmap(error_map(p, t), out / f"{name}_error.png", ERROR_CMAP,
                                      title=f"{name} |error|"))
    return written
