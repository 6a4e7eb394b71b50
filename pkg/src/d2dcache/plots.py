"""Render result figures from a sweep CSV, written alongside the delimited output."""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import numpy as np
from matplotlib.figure import Figure

METRIC_LABELS = {
    "welfare": "social welfare",
    "avg_delay_s": "average access delay (s)",
    "offloading_self": "offloading ratio (self-cache)",
    "offloading_reach": "offloading ratio (reachable)",
}


def _read_rows(results_csv: Path) -> list[dict]:
    rows = []
    with results_csv.open(newline="") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        for row in reader:
            if row.get("error"):
                continue
            rows.append(row)
    return rows


def _sweep_key(value: str):
    try:
        return float(value)
    except ValueError:
        return value


def render_report(results_csv, out_dir=None) -> list[Path]:
    """One PNG per metric (mean +- std over seeds, per algorithm), plus timing if present."""
    results_csv = Path(results_csv)
    out_dir = Path(out_dir) if out_dir is not None else results_csv.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = _read_rows(results_csv)
    if not rows:
        return []

    stem = results_csv.stem
    sweep_var = rows[0]["sweep_var"]
    written: list[Path] = []

    def grouped(metric: str, table: list[dict]) -> dict:
        series: dict[str, dict] = defaultdict(lambda: defaultdict(list))
        for row in table:
            series[row["algorithm"]][row["sweep_value"]].append(float(row[metric]))
        return series

    def draw(metric: str, label: str, table: list[dict], suffix: str) -> None:
        series = grouped(metric, table)
        fig = Figure(figsize=(6.0, 4.0))
        ax = fig.subplots()
        for algo in sorted(series):
            points = sorted(series[algo].items(), key=lambda kv: _sweep_key(kv[0]))
            xs = [_sweep_key(k) for k, _ in points]
            means = [float(np.mean(v)) for _, v in points]
            stds = [float(np.std(v)) for _, v in points]
            numeric = all(isinstance(x, float) for x in xs)
            positions = xs if numeric else range(len(xs))
            ax.errorbar(positions, means, yerr=stds, marker="o", capsize=3, label=algo)
            if not numeric:
                ax.set_xticks(range(len(xs)))
                ax.set_xticklabels([str(x) for x in xs])
        ax.set_xlabel(sweep_var)
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
        ax.legend()
        fig.tight_layout()
        path = out_dir / f"{stem}_{suffix}.png"
        fig.savefig(path, dpi=150)
        written.append(path)

    for metric, label in METRIC_LABELS.items():
        draw(metric, label, rows, metric)

    timing_csv = results_csv.with_suffix(".timing.csv")
    if timing_csv.exists():
        with timing_csv.open(newline="") as fh:
            timing_rows = list(csv.DictReader(fh))
        if timing_rows:
            draw("wall_time_ms", "wall time (ms)", timing_rows, "wall_time_ms")
    return written
