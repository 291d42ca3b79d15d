"""
Link adaptation: EESM compression, logistic BLEP model, inner-loop MCS
selection and the outer-loop offset controller.

SINR arguments are linear unless the name ends in ``_db``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

RE_PER_PRB = 12 * 14


@dataclass(frozen=True)
class McsEntry:
    name: str
    bits: int
    code_rate: float
    beta: float
    threshold_db: float
    slope_db: float

    def __post_init__(self):
        if self.bits <= 0 or not 0 < self.code_rate <= 1:
            raise ValueError(f"{self.name}: invalid modulation/code rate")
        if self.beta <= 0 or self.slope_db <= 0:
            raise ValueError(f"{self.name}: beta and slope must be positive")

    @property
    def efficiency(self) -> float:
        """Information bits per resource element."""
        return self.bits * self.code_rate


@dataclass(frozen=True)
class McsTable:
    entries: tuple

    def __post_init__(self):
        if not self.entries:
            raise ValueError("empty MCS table")
        eff = [e.efficiency for e in self.entries]
        if any(b <= a for a, b in zip(eff, eff[1:])):
            raise ValueError("entries must have strictly increasing spectral efficiency")
        object.__setattr__(self, "betas", np.array([e.beta for e in self.entries]))
        object.__setattr__(self, "thresholds_db", np.array([e.threshold_db for e in self.entries]))
        object.__setattr__(self, "slopes_db", np.array([e.slope_db for e in self.entries]))
        object.__setattr__(self, "efficiencies", np.array(eff))

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, i) -> McsEntry:
        return self.entries[i]

    def required_db(self, target: float = 0.2) -> np.ndarray:
        """Lowest SINR (dB) at which each MCS meets ``BLEP <= target``."""
        return self.thresholds_db + self.slopes_db * math.log((1 - target) / target)


def eesm(sinrs, beta: float) -> float:
    """Exponential effective SINR of a set of linear SINRs."""
    x = np.asarray(sinrs, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("eesm needs at least one SINR")
    if beta <= 0:
        raise ValueError("beta must be positive")
    a = -x / beta
    amax = a.max()
    # log-sum-exp keeps high-SINR inputs from underflowing to log(0)
    return float(-beta * (amax + math.log(np.exp(a - amax).mean())))


def eesm_masked(values: np.ndarray, mask: np.ndarray, betas: np.ndarray) -> np.ndarray:
    """
    Batched EESM over the last axis, restricted to ``mask``.

    Parameters
    ----------
    values : (..., K) linear SINRs
    mask : (..., K) bool, at least one True wherever a result is used
    betas : (M,) EESM parameters

    Returns
    -------
    (..., M) effective SINRs; NaN where the mask row is empty.
    """
    v = np.where(mask, values, np.inf)[..., None, :]
    a = -v / betas[:, None]
    amax = a.max(axis=-1, keepdims=True)
    n = mask.sum(axis=-1)[..., None]
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.exp(a - amax).sum(axis=-1)
        out = -betas * (amax[..., 0] + np.log(s / n))
    return np.where(n > 0, out, np.nan)


def blep(table: McsTable, mcs, sinr_db) -> np.ndarray | float:
    """Logistic waterfall block-error probability of ``mcs`` (scalar or array) at ``sinr_db``."""
    mcs = np.asarray(mcs)
    z = (np.asarray(sinr_db, dtype=float) - table.thresholds_db[mcs]) / table.slopes_db[mcs]
    p = 1.0 / (1.0 + np.exp(np.clip(z, -700, 700)))
    return float(p) if np.ndim(p) == 0 else p


def select_mcs(effective_sinr_db, olla_offset_db: float, table: McsTable, target: float = 0.2) -> int:
    """
    Highest MCS whose BLEP at ``effective_sinr_db - olla_offset_db`` meets the target.

    ``effective_sinr_db`` is a scalar or one value per table entry (EESM with
    each entry's beta). Falls back to the lowest MCS when nothing qualifies.
    """
    eff = np.broadcast_to(np.asarray(effective_sinr_db, dtype=float), (len(table),))
    return int(select_mcs_batch(eff[None], olla_offset_db, table.required_db(target))[0])


def select_mcs_batch(effective_sinr_db: np.ndarray, olla_offset_db, required_db: np.ndarray) -> np.ndarray:
    """:func:`select_mcs` for a batch ``(B, M)`` of per-entry effective SINRs."""
    off = np.asarray(olla_offset_db, dtype=float)
    ok = effective_sinr_db - off[..., None] >= required_db
    last = ok.shape[-1] - 1 - np.argmax(ok[..., ::-1], axis=-1)
    return np.where(ok.any(axis=-1), last, 0)


def select_mcs_array(sinr_db: np.ndarray, olla_offset_db, required_db: np.ndarray) -> np.ndarray:
    """Vectorised :func:`select_mcs` for per-PRB SINRs (EESM over one PRB is the identity)."""
    x = np.asarray(sinr_db) - np.asarray(olla_offset_db)
    return np.maximum(np.searchsorted(required_db, x, side="right") - 1, 0)


def estimate_rate(table: McsTable, mcs: int, n_prb: int, re_per_prb: int = RE_PER_PRB) -> int:
    """Transport block size in bits for ``n_prb`` PRBs at ``mcs``."""
    if n_prb < 1:
        raise ValueError("n_prb must be >= 1")
    # guard against 112 becoming 111.99999999999999
    return int(math.floor(n_prb * re_per_prb * table[mcs].efficiency + 1e-9))


@dataclass(frozen=True)
class OllaState:
    offset_db: float = 0.0
    step_up_db: float = 0.5
    step_down_db: float = 0.125
    min_db: float = -5.0
    max_db: float = 5.0

    @classmethod
    def for_target(cls, target: float, step_up_db: float = 0.5, min_db=-5.0, max_db=5.0) -> "OllaState":
        # zero drift when target * up == (1 - target) * down
        return cls(0.0, step_up_db, step_up_db * target / (1 - target), min_db, max_db)


def olla_update(state: OllaState, ack: bool) -> OllaState:
    """One outer-loop step; call on first-transmission feedback only."""
    offset = state.offset_db - state.step_down_db if ack else state.offset_db + state.step_up_db
    return replace(state, offset_db=min(max(offset, state.min_db), state.max_db))
