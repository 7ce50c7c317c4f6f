#!/usr/bin/env python3
"""Render accuracy-vs-dimension figures from a sweep CSV.

Reads only the frozen sweep schema (`# sweep-csv v1` comment line, fixed
column set) and produces one SVG per variant plus a combined panel. Each
curve groups rows by ground-truth dimension D: a median line over seeds, a
min-max band, and one marker per CSV row (so the plotted point count equals
the row count). Every figure carries the 0.5 random-baseline line and, when
D is known, the dotted 0.5 + sqrt(d / D) prediction capped at 1.

Output is deterministic: fixed figure geometry, a fixed SVG hash salt, and
no timestamps, so re-rendering an unchanged CSV reproduces identical bytes.

Usage: render_figures.py --csv PATH --out DIR [--audit] [--png]
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
from matplotlib.ticker import ScalarFormatter

CSV_VERSION_LINE = "# sweep-csv v1"
CSV_COLUMNS = [
    "model",
    "n",
    "m",
    "D",
    "d",
    "variant",
    "seed",
    "final_accuracy",
    "baseline_accuracy",
    "steps_run",
    "wall_seconds",
]

FIGSIZE = (7.0, 4.5)
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class Row:
    index: int
    model: str
    dim: int | None  # ground-truth dimension D, when known
    d: int
    variant: str
    seed: int
    accuracy: float


@dataclass(frozen=True)
class PlotSpec:
    csv_path: str
    out_dir: str
    audit: bool = False
    png: bool = False


def load_rows(csv_path: str) -> list[Row]:
    with open(csv_path, "r", encoding="ascii") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != CSV_VERSION_LINE:
        raise SchemaError(
            f"{csv_path!r} lacks the version line {CSV_VERSION_LINE!r}; "
            f"expected columns {','.join(CSV_COLUMNS)}"
        )
    if len(lines) < 2 or lines[1] != ",".join(CSV_COLUMNS):
        raise SchemaError(
            f"{csv_path!r} header mismatch; expected columns {','.join(CSV_COLUMNS)}"
        )
    rows = []
    for i, ln in enumerate(lines[2:]):
        if not ln:
            continue
        parts = ln.split(",")
        if len(parts) != len(CSV_COLUMNS):
            raise SchemaError(f"{csv_path!r} row {i} has {len(parts)} fields")
        rows.append(
            Row(
                index=i,
                model=parts[0],
                dim=int(parts[3]) if parts[3] else None,
                d=int(parts[4]),
                variant=parts[5],
                seed=int(parts[6]),
                accuracy=float(parts[7]),
            )
        )
    if not rows:
        raise SchemaError(f"{csv_path!r} has no data rows")
    return rows


def _median(values: list[float]) -> float:
    ordered = sorted(values)
    k = len(ordered)
    mid = k // 2
    return ordered[mid] if k % 2 else 0.5 * (ordered[mid - 1] + ordered[mid])


def _dim_label(dim: int | None) -> str:
    return f"D={dim}" if dim is not None else "no ground truth"


def _draw_variant(ax, rows: list[Row], audit_sink: list[tuple[Row, str]], file_label: str):
    dims = sorted({r.dim for r in rows}, key=lambda x: (x is None, x))
    all_d = sorted({r.d for r in rows})
    for color_index, dim in enumerate(dims):
        color = COLORS[color_index % len(COLORS)]
        grouped: dict[int, list[Row]] = {}
        for r in rows:
            if r.dim == dim:
                grouped.setdefault(r.d, []).append(r)
        ds = sorted(grouped)
        medians = [_median([r.accuracy for r in grouped[d]]) for d in ds]
        lows = [min(r.accuracy for r in grouped[d]) for d in ds]
        highs = [max(r.accuracy for r in grouped[d]) for d in ds]
        ax.fill_between(ds, lows, highs, color=color, alpha=0.15, linewidth=0)
        ax.plot(ds, medians, color=color, label=_dim_label(dim))
        for d in ds:
            for r in grouped[d]:
                gid = f"row-{r.index}"
                (pt,) = ax.plot([r.d], [r.accuracy], marker="o", markersize=3.0,
                                color=color, linestyle="none")
                pt.set_gid(gid)
                audit_sink.append((r, f"{file_label}:{gid}"))
        if dim is not None:
            prediction = [min(1.0, 0.5 + math.sqrt(d / dim)) for d in all_d]
            (pred_line,) = ax.plot(all_d, prediction, color=color, linestyle=":",
                                   linewidth=1.0, alpha=0.8)
            pred_line.set_gid(f"prediction-D{dim}")
    baseline = ax.axhline(0.5, color="black", linestyle="--", linewidth=1.0)
    baseline.set_gid("baseline-0.5")
    ax.set_xscale("log", base=2)
    ax.set_xticks(all_d)
    ax.get_xaxis().set_major_formatter(ScalarFormatter())
    ax.minorticks_off()
    ax.set_xlabel("target dimension d")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0.0, 1.05)
    ax.legend(loc="lower right", fontsize=8)


def _save(fig, path: str, png: bool):
    fig.savefig(path, format="svg", metadata={"Date": None})
    if png:
        fig.savefig(os.path.splitext(path)[0] + ".png", format="png", dpi=150)
    plt.close(fig)


def render(spec: PlotSpec) -> list[str]:
    """Write one SVG per variant plus a combined panel; returns the paths."""
    plt.rcParams["svg.hashsalt"] = "sweep-figures"
    plt.rcParams["figure.max_open_warning"] = 0
    rows = load_rows(spec.csv_path)
    os.makedirs(spec.out_dir, exist_ok=True)
    variants = sorted({r.variant for r in rows})
    audit: list[tuple[Row, str]] = []
    written = []
    for variant in variants:
        fig, ax = plt.subplots(figsize=FIGSIZE)
        subset = [r for r in rows if r.variant == variant]
        name = f"accuracy_{variant}.svg"
        _draw_variant(ax, subset, audit, name)
        ax.set_title(f"{variant} embeddings")
        path = os.path.join(spec.out_dir, name)
        _save(fig, path, spec.png)
        written.append(path)

    fig, axes = plt.subplots(1, len(variants), figsize=(FIGSIZE[0] * len(variants), FIGSIZE[1]))
    if len(variants) == 1:
        axes = [axes]
    panel_audit: list[tuple[Row, str]] = []
    for ax, variant in zip(axes, variants):
        _draw_variant(ax, [r for r in rows if r.variant == variant], panel_audit, "panel")
        ax.set_title(f"{variant} embeddings")
    panel_path = os.path.join(spec.out_dir, "accuracy_panel.svg")
    _save(fig, panel_path, spec.png)
    written.append(panel_path)

    if spec.audit:
        print("row_index,model,D,d,variant,seed,accuracy,point")
        for r, point in sorted(audit, key=lambda item: item[0].index):
            dim = "" if r.dim is None else r.dim
            print(f"{r.index},{r.model},{dim},{r.d},{r.variant},{r.seed},{r.accuracy:.17g},{point}")
    return written


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--csv", required=True, help="sweep CSV in the frozen schema")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--audit", action="store_true", help="print the row-to-point mapping")
    parser.add_argument("--png", action="store_true", help="also write PNG copies")
    args = parser.parse_args(argv)
    try:
        written = render(PlotSpec(csv_path=args.csv, out_dir=args.out, audit=args.audit, png=args.png))
    except (SchemaError, OSError) as exc:
        print(f"render_figures: error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(f"wrote {path}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
