"""Result records, delimited/JSON output and matplotlib figures."""

from __future__ import annotations

import csv
import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .stats import Report, relative_gain

SUMMARY_COLUMNS = ("label", "throughput_mbps", "coverage_kbps", "jain", "bler", "seconds")
GAIN_COLUMNS = ("label", "baseline", "throughput_gain_pct", "coverage_gain_pct", "jain_gain_pct")


@dataclass
class ResultRecord:
    label: str
    fingerprint: str
    seeds: list
    throughput_mbps: float = float("nan")      # mean cell throughput
    coverage_kbps: float = float("nan")        # 5th-percentile UE throughput
    jain: float = float("nan")
    bler: float = float("nan")
    seconds: float = 0.0
    ue_throughput: list = field(default_factory=list)   # bits/s, pooled over drops
    scheduler: str = ""
    mask: str = ""
    antenna: str = ""
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @classmethod
    def from_report(cls, label, fingerprint, seeds, report: Report, seconds, **meta) -> "ResultRecord":
        return cls(label, fingerprint, list(seeds), report.mean_cell_throughput / 1e6, report.coverage / 1e3,
                   report.jain, report.bler, seconds, [float(x) for x in report.ue_throughput], **meta)


def fmt(value) -> str:
    """Six significant digits for floats, plain text otherwise."""
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.6g}"
    return str(value)


def safe_name(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", label).strip("_")


def _baseline_for(rec: ResultRecord, records):
    """The PF run with the same mask and antenna, else the first record."""
    for r in records:
        if r.ok and r.scheduler == "pf" and r.mask == rec.mask and r.antenna == rec.antenna:
            return r
    return records[0]


def gain_rows(records) -> list:
    rows = []
    for rec in records:
        base = _baseline_for(rec, records)
        rows.append({
            "label": rec.label,
            "baseline": base.label,
            "throughput_gain_pct": relative_gain(rec.throughput_mbps, base.throughput_mbps),
            "coverage_gain_pct": relative_gain(rec.coverage_kbps, base.coverage_kbps),
            "jain_gain_pct": relative_gain(rec.jain, base.jain),
        })
    return rows


def _write_csv(path: Path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(row[c]) for c in columns])


def emit_report(records, out_dir, format: str = "csv", figures: bool = True) -> list:
    """
    Write the summary table, per-UE distributions, plot data and figures.

    Returns the written paths. Raises ``OSError`` if ``out_dir`` cannot be
    created or written.
    """
    records = list(records)
    if not records:
        raise ValueError("emit_report needs at least one record")
    if format not in ("csv", "json"):
        raise ValueError(f"unknown format {format!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    summary = [{c: getattr(r, c) for c in SUMMARY_COLUMNS} for r in records]
    if format == "csv":
        path = out / "results.csv"
        _write_csv(path, SUMMARY_COLUMNS, summary)
    else:
        path = out / "results.json"
        path.write_text(json.dumps([asdict(r) for r in records], indent=2, allow_nan=True) + "\n")
    written.append(path)

    ue_dir = out / "ue"
    ue_dir.mkdir(exist_ok=True)
    for r in records:
        path = ue_dir / f"{safe_name(r.label)}.{format}"
        values = sorted(r.ue_throughput)
        if format == "csv":
            _write_csv(path, ("ue_throughput_kbps",), [{"ue_throughput_kbps": v / 1e3} for v in values])
        else:
            path.write_text(json.dumps({"label": r.label, "ue_throughput_kbps": [v / 1e3 for v in values]}) + "\n")
        written.append(path)

    path = out / "gains.csv"
    _write_csv(path, GAIN_COLUMNS, gain_rows(records))
    written.append(path)

    path = out / "plot_data.csv"
    rows = [{"x": r.label, "throughput_mbps": r.throughput_mbps, "coverage_kbps": r.coverage_kbps,
             "jain": r.jain} for r in records]
    _write_csv(path, ("x", "throughput_mbps", "coverage_kbps", "jain"), rows)
    written.append(path)

    path = out / "manifest.json"
    manifest = [{"label": r.label, "fingerprint": r.fingerprint, "seeds": r.seeds, "scheduler": r.scheduler,
                 "mask": r.mask, "antenna": r.antenna, "error": r.error} for r in records]
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    written.append(path)

    if figures:
        written += render_figures([r for r in records if r.ok], out / "figures")
    return written


def read_results(path) -> list:
    """Load ``results.json`` back into records."""
    return [ResultRecord(**row) for row in json.loads(Path(path).read_text())]


def render_figures(records, fig_dir) -> list:
    """Bar charts per metric, the throughput/coverage trade-off and UE throughput CDFs."""
    if not records:
        return []
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig_dir = Path(fig_dir)
    fig_dir.mkdir(parents=True, exist_ok=True)
    labels = [r.label for r in records]
    paths = []

    fig, axes = plt.subplots(1, 3, figsize=(12, 4), constrained_layout=True)
    for ax, (attr, title) in zip(axes, [("throughput_mbps", "Mean cell throughput [Mbps]"),
                                        ("coverage_kbps", "Coverage, 5th pct. UE [kbps]"),
                                        ("jain", "Jain fairness index")]):
        ax.bar(range(len(records)), [getattr(r, attr) for r in records], color="tab:blue")
        ax.set_xticks(range(len(records)), labels, rotation=45, ha="right", fontsize=8)
        ax.set_title(title, fontsize=10)
        ax.grid(axis="y", alpha=0.3)
    paths.append(fig_dir / "summary.png")
    fig.savefig(paths[-1], dpi=120)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(5.5, 4.5), constrained_layout=True)
    for r in records:
        ax.plot(r.coverage_kbps, r.throughput_mbps, "o")
        ax.annotate(r.label, (r.coverage_kbps, r.throughput_mbps), fontsize=7,
                    textcoords="offset points", xytext=(4, 4))
    ax.set_xlabel("Coverage [kbps]")
    ax.set_ylabel("Mean cell throughput [Mbps]")
    ax.grid(alpha=0.3)
    paths.append(fig_dir / "tradeoff.png")
    fig.savefig(paths[-1], dpi=120)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(6, 4.5), constrained_layout=True)
    for r in records:
        x = np.sort(np.asarray(r.ue_throughput)) / 1e3
        ax.step(x, np.arange(1, len(x) + 1) / len(x), where="post", label=r.label)
    ax.set_xlabel("UE throughput [kbps]")
    ax.set_ylabel("CDF")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7)
    paths.append(fig_dir / "ue_cdf.png")
    fig.savefig(paths[-1], dpi=120)
    plt.close(fig)
    return paths
