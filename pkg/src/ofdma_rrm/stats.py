"""Per-drop results and multi-drop aggregation: throughput, coverage, Jain index."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class DropStats:
    """Statistics of one drop, central-site UEs only."""
    seed: int
    ue_bits: np.ndarray              # ACKed payload bits inside the window
    ue_sector: np.ndarray            # serving sector per UE
    window_s: float
    first_tx: int = 0
    first_tx_errors: int = 0
    trace: np.ndarray | None = None  # delivered bits per TTI (whole window)
    seconds: float = 0.0             # wall-clock, shared channel time split evenly

    @property
    def ue_throughput(self) -> np.ndarray:
        return self.ue_bits / self.window_s

    @property
    def cell_throughput(self) -> np.ndarray:
        """bits/s per central sector."""
        n = int(self.ue_sector.max()) + 1 if self.ue_sector.size else 0
        return np.bincount(self.ue_sector, weights=self.ue_throughput, minlength=n)

    @property
    def bler(self) -> float:
        return self.first_tx_errors / self.first_tx if self.first_tx else float("nan")


@dataclass
class Report:
    mean_cell_throughput: float      # bits/s
    coverage: float                  # bits/s, 5th percentile of UE throughput
    jain: float
    bler: float
    ue_throughput: np.ndarray = field(repr=False)
    n_drops: int = 1

    @property
    def mean_ue_throughput(self) -> float:
        return float(np.mean(self.ue_throughput))


def jain_index(throughputs) -> float:
    x = np.asarray(throughputs, dtype=float)
    if x.size == 0:
        raise ValueError("jain_index needs at least one value")
    if np.any(x < 0):
        raise ValueError("throughputs must be nonnegative")
    sq = float(np.sum(x * x))
    if sq == 0:
        raise ValueError("jain_index is undefined when every throughput is zero")
    return float(np.sum(x)) ** 2 / (x.size * sq)


def coverage(throughputs, percentile: float = 5.0) -> float:
    """Nearest-rank lower percentile (5th by default) of the UE throughputs."""
    x = np.sort(np.asarray(throughputs, dtype=float))
    if x.size == 0:
        raise ValueError("coverage needs at least one value")
    idx = max(math.ceil(percentile / 100 * x.size) - 1, 0)
    return float(x[idx])


def aggregate(drops) -> Report:
    """Pool UE throughputs over drops; cell throughput is averaged over drops."""
    drops = list(drops)
    if not drops:
        raise ValueError("aggregate needs at least one drop")
    pooled = np.concatenate([d.ue_throughput for d in drops])
    cell = float(np.mean([d.cell_throughput.mean() for d in drops]))
    n_tx = sum(d.first_tx for d in drops)
    bler = sum(d.first_tx_errors for d in drops) / n_tx if n_tx else float("nan")
    return Report(cell, coverage(pooled), jain_index(pooled), bler, pooled, len(drops))


def relative_gain(value: float, baseline: float) -> float:
    """Percentage change of ``value`` over ``baseline``."""
    if baseline == 0:
        return float("nan")
    return 100.0 * (value - baseline) / baseline
