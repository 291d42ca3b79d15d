"""Soft-frequency-reuse sub-bands and per-PRB transmit power maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import SECTORS_PER_SITE

PM1_DB = (0.0, -4.0, -4.0)
PM2_DB = (0.0, -1.0, -4.0)
RB_PATTERN_DB = (0.0, -1.0, -2.0)


@dataclass(frozen=True)
class PowerMask:
    kind: str               # "sfr" | "rb-pattern" | "flat"
    levels_db: tuple
    subband_sizes: tuple

    def __post_init__(self):
        if any(level > 0 for level in self.levels_db):
            raise ValueError("mask levels must be <= 0 dB")
        if self.kind == "sfr" and len(self.levels_db) != len(self.subband_sizes):
            raise ValueError("SFR mask needs one level per sub-band")

    @property
    def n_prb(self) -> int:
        return int(sum(self.subband_sizes))


@dataclass(frozen=True)
class PrbPowerMap:
    power_w: np.ndarray      # (n_prb,) absolute power
    fraction: np.ndarray     # (n_prb,) relative to the per-PRB maximum

    @property
    def total_w(self) -> float:
        return float(self.power_w.sum())


def partition_subbands(n_prb: int, n_subbands: int) -> tuple:
    """Split PRBs into near-equal contiguous sub-bands, larger ones first."""
    if n_subbands < 1:
        raise ValueError("n_subbands must be >= 1")
    if n_subbands > n_prb:
        raise ValueError("more sub-bands than PRBs")
    base, extra = divmod(n_prb, n_subbands)
    return tuple(base + 1 if i < extra else base for i in range(n_subbands))


def db_to_fraction(levels_db) -> np.ndarray:
    return 10.0 ** (np.asarray(levels_db, dtype=float) / 10.0)


def make_mask(kind: str, n_prb: int, n_subbands: int = 3, levels_db=()) -> PowerMask:
    """Named mask (``flat``, ``pm1``, ``pm2``, ``rb012``, ``custom``) for ``n_prb`` PRBs."""
    kind = kind.lower()
    if kind == "flat":
        return PowerMask("flat", (0.0,), (n_prb,))
    if kind == "rb012":
        return PowerMask("rb-pattern", RB_PATTERN_DB, (n_prb,))
    levels = {"pm1": PM1_DB, "pm2": PM2_DB}.get(kind, tuple(levels_db))
    if kind not in ("pm1", "pm2", "custom"):
        raise ValueError(f"unknown mask {kind!r}")
    return PowerMask("sfr", tuple(float(x) for x in levels), partition_subbands(n_prb, len(levels)))


def apply_sfr_mask(mask: PowerMask, sector_reuse_index: int, p_max_prb: float) -> PrbPowerMap:
    """
    Per-PRB powers of one sector.

    For SFR masks the level list is rotated by ``sector_reuse_index`` so the
    0 dB level lands on sub-band ``sector_reuse_index``.
    """
    if mask.kind == "flat":
        frac = np.ones(mask.n_prb)
    elif mask.kind == "rb-pattern":
        return apply_rb_pattern(p_max_prb, mask.n_prb, mask.levels_db)
    else:
        n = len(mask.levels_db)
        levels = [mask.levels_db[(b - sector_reuse_index) % n] for b in range(n)]
        frac = np.repeat(db_to_fraction(levels), mask.subband_sizes)
    return PrbPowerMap(p_max_prb * frac, frac)


def apply_rb_pattern(p_max_prb: float, n_prb: int, levels_db=RB_PATTERN_DB) -> PrbPowerMap:
    """Repeating per-PRB pattern, by default 0, -1, -2 dB."""
    if n_prb < 1:
        raise ValueError("n_prb must be >= 1")
    frac = db_to_fraction(levels_db)[np.arange(n_prb) % len(levels_db)]
    return PrbPowerMap(p_max_prb * frac, frac)


def reuse_index_for(sector: int) -> int:
    """Within-site sector index; co-site sectors get disjoint full-power sub-bands."""
    if sector < 0:
        raise ValueError("invalid sector id")
    return sector % SECTORS_PER_SITE


def sector_fractions(mask: PowerMask, n_sectors: int) -> np.ndarray:
    """(n_sectors, n_prb) power fractions for the whole network (same mask everywhere)."""
    rows = {r: apply_sfr_mask(mask, r, 1.0).fraction for r in range(SECTORS_PER_SITE)}
    return np.stack([rows[reuse_index_for(s)] for s in range(n_sectors)])
