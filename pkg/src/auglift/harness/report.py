"""Render a finished run: text table, CSV, and matplotlib figures.

The text and CSV renderings are pure functions of the run record, so
re-rendering produces identical bytes.  Figures (PNG) are written alongside
the delimited output under ``figures/``.
"""

from __future__ import annotations

import csv
import io as stdio
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .runner import RunPaths, load_run_record

CSV_COLUMNS = [
    "variant",
    "rescaling",
    "split",
    "n_seeds",
    "mpjpe_mean_mm",
    "mpjpe_std_mm",
    "p_mpjpe_mean_mm",
    "pck150_mean",
    "auc_mean",
    "delta_vs_xy_pct",
    "delta_rescaling_pct",
]


def _rows(record: dict) -> list[dict]:
    agg = record["aggregates"]
    deltas = record.get("deltas", {})
    rows = []
    for variant in sorted(agg):
        for arm in sorted(agg[variant]):
            for split in sorted(agg[variant][arm]):
                stats = agg[variant][arm][split]
                d_xy = deltas.get("vs_xy", {}).get(variant, {}).get(arm, {}).get(split)
                d_rs = deltas.get("rescaling", {}).get(variant, {}).get(split)
                rows.append(
                    {
                        "variant": variant,
                        "rescaling": arm,
                        "split": split,
                        "n_seeds": stats["n_seeds"],
                        "mpjpe_mean_mm": f"{stats['mpjpe_mean']:.4f}",
                        "mpjpe_std_mm": f"{stats['mpjpe_std']:.4f}",
                        "p_mpjpe_mean_mm": f"{stats['p_mpjpe_mean']:.4f}",
                        "pck150_mean": f"{stats['pck150_mean']:.4f}",
                        "auc_mean": f"{stats['auc_mean']:.4f}",
                        "delta_vs_xy_pct": "" if d_xy is None else f"{d_xy:.2f}",
                        "delta_rescaling_pct": "" if d_rs is None else f"{d_rs:.2f}",
                    }
                )
    return rows


def render_csv(record: dict) -> str:
    buf = stdio.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in _rows(record):
        writer.writerow(row)
    return buf.getvalue()


def render_text(record: dict) -> str:
    rows = _rows(record)
    headers = ["variant", "rescaling", "split", "MPJPE (mm)", "P-MPJPE", "PCK150", "AUC", "d% vs xy"]
    table = [
        [
            r["variant"],
            r["rescaling"],
            r["split"],
            f"{float(r['mpjpe_mean_mm']):8.2f} +- {float(r['mpjpe_std_mm']):.2f}",
            f"{float(r['p_mpjpe_mean_mm']):8.2f}",
            f"{float(r['pck150_mean']):.3f}",
            f"{float(r['auc_mean']):.3f}",
            r["delta_vs_xy_pct"] or "-",
        ]
        for r in rows
    ]
    widths = [max(len(h), *(len(row[i]) for row in table)) if table else len(h) for i, h in enumerate(headers)]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for row in table:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))
    if record.get("deltas", {}).get("rescaling"):
        lines.append("")
        lines.append("rescaling on vs off (positive = rescaling lowers error):")
        for variant, per_split in sorted(record["deltas"]["rescaling"].items()):
            for split, delta in sorted(per_split.items()):
                lines.append(f"  {variant:8s} {split:10s} {delta:+.2f}%")
    return "\n".join(lines) + "\n"


def render_figures(record: dict, figures_dir: Path) -> list[Path]:
    """Bar chart of MPJPE by variant/split plus per-cell training curves."""
    figures_dir.mkdir(parents=True, exist_ok=True)
    written = []

    agg = record["aggregates"]
    variants = sorted(agg)
    arms = sorted({arm for v in agg.values() for arm in v})
    splits = sorted({s for v in agg.values() for per in v.values() for s in per})

    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    width = 0.8 / max(len(splits), 1)
    labels = [f"{v}/{a}" for v in variants for a in arms if agg[v].get(a)]
    for si, split in enumerate(splits):
        xs, means, stds = [], [], []
        for li, label in enumerate(labels):
            v, a = label.split("/")
            stats = agg[v][a].get(split)
            if stats is None:
                continue
            xs.append(li + si * width)
            means.append(stats["mpjpe_mean"])
            stds.append(stats["mpjpe_std"])
        ax.bar(xs, means, width=width, yerr=stds, capsize=2, label=split)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(labels))])
    ax.set_xticklabels(labels, rotation=20, ha="right")
    ax.set_ylabel("MPJPE (mm)")
    ax.set_title("Lifting error by input variant")
    ax.legend()
    fig.tight_layout()
    path = figures_dir / "mpjpe_by_variant.png"
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    written.append(path)

    # training curves, read from the per-cell metric files when present
    run_root = figures_dir.parent
    metrics_dir = run_root / "metrics"
    if metrics_dir.is_dir():
        fig, ax = plt.subplots(figsize=(7.0, 4.0))
        plotted = False
        for cell_path in sorted(metrics_dir.glob("*.json")):
            cell = json.loads(cell_path.read_text(encoding="utf-8"))
            history = cell.get("history") or []
            if history:
                ax.plot(history, alpha=0.7, label=cell_path.stem)
                plotted = True
        if plotted:
            ax.set_xlabel("epoch")
            ax.set_ylabel("train loss")
            ax.set_yscale("log")
            ax.set_title("Training loss per cell")
            if len(ax.lines) <= 12:
                ax.legend(fontsize=6)
            fig.tight_layout()
            path = figures_dir / "train_loss.png"
            fig.savefig(path, dpi=120, metadata={"Software": None})
            written.append(path)
        plt.close(fig)

    return written


def cmd_report(out_dir) -> dict[str, Path]:
    """Write report.txt, report.csv, and figures for a finished run."""
    paths = RunPaths(Path(out_dir))
    record = load_run_record(paths.root)
    text = render_text(record)
    csv_text = render_csv(record)
    (paths.root / "report.txt").write_text(text, encoding="utf-8")
    (paths.root / "report.csv").write_text(csv_text, encoding="utf-8")
    figures = render_figures(record, paths.figures)
    return {
        "report_txt": paths.root / "report.txt",
        "report_csv": paths.root / "report.csv",
        "figures": figures,
    }
