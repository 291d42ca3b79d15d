"""Hexagonal 19-site / 57-sector layout, UE drops and large-scale gains."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

N_RINGS = 2
SECTORS_PER_SITE = 3
BORESIGHTS_DEG = (30.0, 150.0, 270.0)
MIN_DISTANCE_M = 35.0


@dataclass(frozen=True)
class CellLayout:
    sites: np.ndarray            # (19, 2) metres
    sector_site: np.ndarray      # (57,) site index per sector
    sector_boresight: np.ndarray  # (57,) degrees
    inter_site_distance: float

    @property
    def n_sectors(self) -> int:
        return len(self.sector_site)

    @property
    def sectors(self):
        return list(zip(self.sector_site.tolist(), self.sector_boresight.tolist()))


@dataclass(frozen=True)
class UePlacement:
    position: np.ndarray         # (2,) metres
    serving_sector: int
    distance_to_serving: float


@dataclass(frozen=True)
class LargeScaleGain:
    """Per (UE, sector) large-scale terms in dB; fixed for the drop."""
    path_loss_db: np.ndarray
    shadowing_db: np.ndarray
    antenna_gain_db: np.ndarray

    @property
    def total_db(self) -> np.ndarray:
        return self.antenna_gain_db - self.path_loss_db + self.shadowing_db

    @property
    def linear(self) -> np.ndarray:
        return 10 ** (self.total_db / 10)


def build_layout(inter_site_distance: float = 500.0) -> CellLayout:
    if inter_site_distance <= 0:
        raise ValueError("inter_site_distance must be positive")
    # axial hex coordinates within two rings of the origin
    coords = [(q, r) for q in range(-N_RINGS, N_RINGS + 1) for r in range(-N_RINGS, N_RINGS + 1)
              if max(abs(q), abs(r), abs(q + r)) <= N_RINGS]
    xy = np.array([(q + r / 2, r * np.sqrt(3) / 2) for q, r in coords]) * inter_site_distance
    ring = np.array([max(abs(q), abs(r), abs(q + r)) for q, r in coords])
    angle = np.mod(np.degrees(np.arctan2(xy[:, 1], xy[:, 0])), 360.0)
    order = np.lexsort((np.round(angle, 6), ring))
    sites = xy[order]
    sector_site = np.repeat(np.arange(len(sites)), SECTORS_PER_SITE)
    sector_boresight = np.tile(np.array(BORESIGHTS_DEG), len(sites))
    return CellLayout(sites, sector_site, sector_boresight, float(inter_site_distance))


def path_loss(distance):
    """Macro-cell distance loss in dB, distance in metres."""
    d = np.asarray(distance, dtype=float)
    if np.any(d < MIN_DISTANCE_M):
        raise ValueError(f"distance below the {MIN_DISTANCE_M} m minimum")
    pl = 128.1 + 37.6 * np.log10(d / 1000.0)
    return float(pl) if pl.ndim == 0 else pl


def sector_gain(angle_off_boresight):
    """Horizontal 3-sector antenna pattern in dB (70 deg beamwidth, 20 dB floor)."""
    # fold to [0, 180] via |angle| so the pattern is exactly even
    theta = np.abs(np.asarray(angle_off_boresight, dtype=float)) % 360.0
    theta = np.where(theta > 180.0, 360.0 - theta, theta)
    g = -np.minimum(12.0 * (theta / 70.0) ** 2, 20.0)
    return float(g) if g.ndim == 0 else g


def _gains(layout: CellLayout, positions: np.ndarray, site_shadowing: np.ndarray):
    """Distance, path loss, antenna gain and shadowing for (N, 2) positions vs all sectors."""
    site_xy = layout.sites[layout.sector_site]
    delta = positions[:, None, :] - site_xy[None, :, :]
    dist = np.hypot(delta[..., 0], delta[..., 1])
    bearing = np.degrees(np.arctan2(delta[..., 1], delta[..., 0]))
    ant = sector_gain(bearing - layout.sector_boresight[None, :])
    shadow = site_shadowing[:, layout.sector_site]
    return dist, ant, shadow


def drop_ues(layout: CellLayout, ues_per_cell: int, rng: np.random.Generator,
             shadowing_std_db: float = 8.0, min_distance: float = MIN_DISTANCE_M,
             max_attempts: int = 200_000):
    """
    Place ``ues_per_cell`` UEs in each sector of the central site.

    Candidates are drawn uniformly over a disc of one inter-site distance
    around the central site, each with one log-normal shadowing value per
    site. A candidate is kept when it is at least ``min_distance`` from every
    site and its best server (antenna gain - path loss + shadowing) is a
    central sector that still needs UEs.

    Returns
    -------
    placements : list of UePlacement, grouped by serving sector
    gains : LargeScaleGain for every (UE, sector) pair
    """
    if ues_per_cell < 1:
        raise ValueError("ues_per_cell must be >= 1")
    n_central = SECTORS_PER_SITE
    quota = np.full(n_central, ues_per_cell)
    kept = {s: [] for s in range(n_central)}
    radius = layout.inter_site_distance
    attempts = 0
    batch = 64
    while quota.sum() > 0:
        if attempts >= max_attempts:
            raise RuntimeError("UE drop failed: too many rejections, check the layout parameters")
        r = radius * np.sqrt(rng.random(batch))
        phi = rng.uniform(0, 2 * np.pi, batch)
        pos = np.stack([r * np.cos(phi), r * np.sin(phi)], axis=1)
        shadow = rng.normal(0.0, shadowing_std_db, (batch, len(layout.sites)))
        attempts += batch
        dist, ant, sh = _gains(layout, pos, shadow)
        ok_dist = dist.min(axis=1) >= min_distance
        for i in np.flatnonzero(ok_dist):
            total = ant[i] - path_loss(dist[i]) + sh[i]
            best = int(np.argmax(total))  # first max: lowest sector id wins ties
            if best < n_central and quota[best] > 0:
                quota[best] -= 1
                kept[best].append((pos[i], shadow[i]))
                if quota.sum() == 0:
                    break

    positions = np.array([p for s in range(n_central) for p, _ in kept[s]])
    site_shadow = np.array([sh for s in range(n_central) for _, sh in kept[s]])
    serving = np.repeat(np.arange(n_central), ues_per_cell)
    dist, ant, shadow = _gains(layout, positions, site_shadow)
    gains = LargeScaleGain(path_loss(dist), shadow, ant)
    placements = [UePlacement(positions[i], int(serving[i]), float(dist[i, serving[i]]))
                  for i in range(len(positions))]
    return placements, gains
