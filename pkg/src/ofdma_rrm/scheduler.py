"""
Two-stage packet scheduling: time-domain (TD) user ranking followed by
per-PRB frequency/spatial-domain (FD/SD) allocation.

Metric families
---------------
pf      R / T_i
ppf     (P_ks / P_max) R / T_i
mmpf    (CQI_iks / CQI_i_avg)^a1 (T_i / T_tot)^-a2
mpmpf   (P_ks / P_max) (CQI_iks / CQI_i_avg)^a1 (T_i / T_tot)^-a2

The power ratio of a dual-stream candidate is the per-stream share, i.e.
half the PRB's mask fraction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MODE_FREE, MODE_SINGLE, MODE_SU, MODE_MU, MODE_RETX = -1, 0, 1, 2, 3
MODE_NAMES = {MODE_SINGLE: "single", MODE_SU: "su-dual", MODE_MU: "mu-dual", MODE_RETX: "retx"}

ALGORITHMS = ("pf", "ppf", "mmpf", "mpmpf")


class SchedulerError(ValueError):
    pass


@dataclass(frozen=True)
class SchedulerParams:
    algorithm: str = "pf"
    alpha1: float = 1.0
    alpha2: float = 1.0
    max_mux_ues: int = 10
    forgetting_factor: float = 0.002

    def _check(self):
        # imported lazily to keep config errors in one exception family
        from .config import ConfigError
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"scheduler.algorithm: expected one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.alpha1 < 0 or self.alpha2 < 0:
            raise ConfigError("scheduler.alpha1/alpha2: must be >= 0")
        if self.max_mux_ues < 1:
            raise ConfigError("scheduler.max_mux_ues: must be >= 1")
        if not 0 < self.forgetting_factor < 1:
            raise ConfigError("scheduler.forgetting_factor: must lie in (0, 1)")

    @property
    def power_aware(self) -> bool:
        return self.algorithm in ("ppf", "mpmpf")

    @property
    def cqi_based(self) -> bool:
        return self.algorithm in ("mmpf", "mpmpf")


# ---------------------------------------------------------------------------
# scalar / elementwise metrics

def _all_positive(*xs):
    return all(np.all(np.asarray(x) > 0) for x in xs)


def metric_pf(rate, avg_throughput):
    if not _all_positive(avg_throughput):
        raise SchedulerError("average throughput must be positive")
    return np.asarray(rate) / avg_throughput


def metric_ppf(power, p_max, rate, avg_throughput):
    if not (_all_positive(power, p_max) and np.all(np.asarray(power) <= np.asarray(p_max))):
        raise SchedulerError("power must lie in (0, P_max]")
    return np.asarray(power) / p_max * metric_pf(rate, avg_throughput)


def metric_mmpf(cqi, cqi_avg, avg_throughput, total_throughput, alpha1, alpha2):
    if not _all_positive(cqi, cqi_avg, avg_throughput, total_throughput):
        raise SchedulerError("metric inputs must be positive")
    cqi_ratio = np.asarray(cqi) / cqi_avg
    thr_ratio = np.asarray(avg_throughput) / total_throughput
    return cqi_ratio ** alpha1 * thr_ratio ** (-alpha2)


def metric_mpmpf(power, p_max, cqi, cqi_avg, avg_throughput, total_throughput, alpha1, alpha2):
    if not (_all_positive(power, p_max) and np.all(np.asarray(power) <= np.asarray(p_max))):
        raise SchedulerError("power must lie in (0, P_max]")
    return np.asarray(power) / p_max * metric_mmpf(cqi, cqi_avg, avg_throughput, total_throughput,
                                                   alpha1, alpha2)


# ---------------------------------------------------------------------------
# trackers

@dataclass
class Trackers:
    """Throughput and CQI averages for the UEs of one cell."""
    avg_throughput: np.ndarray            # T_i, bits per TTI
    total_throughput: float               # T_tot, bits per TTI
    cqi_avg: np.ndarray                   # linear, NaN until the first report
    delivered: np.ndarray = field(default=None)

    @classmethod
    def start(cls, n_ue: int, initial_rate: float) -> "Trackers":
        return cls(np.full(n_ue, float(initial_rate)), float(initial_rate),
                   np.full(n_ue, np.nan), np.zeros(n_ue))


def update_trackers(tr: Trackers, delivered_bits: np.ndarray, ranked: np.ndarray, rho: float) -> Trackers:
    """One exponential-forgetting step; every UE is updated, unscheduled ones with 0 bits."""
    if not 0 < rho < 1:
        raise SchedulerError("forgetting factor must lie in (0, 1)")
    d = np.asarray(delivered_bits, dtype=float)
    tr.avg_throughput = (1 - rho) * tr.avg_throughput + rho * d
    ranked_mean = float(d[ranked].mean()) if np.size(ranked) else 0.0
    tr.total_throughput = (1 - rho) * tr.total_throughput + rho * ranked_mean
    tr.delivered = tr.delivered + d
    return tr


def update_cqi_avg(tr: Trackers, report_mean: np.ndarray, weight: float) -> Trackers:
    """Fold a new full-band report mean (linear) into ``cqi_avg``."""
    fresh = np.isnan(tr.cqi_avg)
    tr.cqi_avg = np.where(fresh, report_mean, (1 - weight) * tr.cqi_avg + weight * report_mean)
    return tr


# ---------------------------------------------------------------------------
# metric arrays

def prb_metrics(params: SchedulerParams, frac, tr: Trackers, rate1, rate2=None, cqi1=None, cqi2=None):
    """
    Per-PRB, per-stream metrics for one cell.

    Parameters
    ----------
    frac : (K,) or (U, K) mask fraction P_k / P_max of the serving sector
    rate1, cqi1 : (U, K) single-stream estimated rate (bits/TTI) and linear CQI
    rate2, cqi2 : (U, K, 2) dual-stream per-stream values, or None

    Returns
    -------
    m1 : (U, K), m2 : (U, K, 2) or None
    """
    T = tr.avg_throughput[:, None]
    frac = np.asarray(frac, dtype=float)
    if params.cqi_based:
        scale = (T / tr.total_throughput) ** (-params.alpha2)
        cavg = tr.cqi_avg[:, None]
        m1 = (cqi1 / cavg) ** params.alpha1 * scale
        m2 = None if cqi2 is None else (cqi2 / cavg[..., None]) ** params.alpha1 * scale[..., None]
    else:
        m1 = rate1 / T
        m2 = None if rate2 is None else rate2 / T[..., None]
    if params.power_aware:
        m1 = m1 * frac
        if m2 is not None:
            m2 = m2 * (frac / 2)[..., None]
    return m1, m2


def fullband_metric(params: SchedulerParams, frac, tr: Trackers, rate1, rate2=None, cqi1=None, cqi2=None):
    """
    TD-stage metric per UE: the configured metric on band-averaged inputs,
    best over single-stream, SU dual-stream (sum of streams) and MU (one stream).
    """
    avg = lambda a: None if a is None else a.mean(axis=1, keepdims=True)
    m1, m2 = prb_metrics(params, np.mean(frac, axis=-1, keepdims=True), tr,
                         avg(rate1), avg(rate2), avg(cqi1), avg(cqi2))
    best = m1[:, 0]
    if m2 is not None:
        best = np.maximum(best, np.maximum(m2[:, 0].sum(-1), m2[:, 0].max(-1)))
    return best


def td_rank(metric, max_mux_ues: int, eligible=None) -> np.ndarray:
    """Indices of the top ``max_mux_ues`` eligible UEs, best first; ties go to the lower id."""
    m = np.asarray(metric, dtype=float)
    if eligible is not None:
        m = np.where(eligible, m, -np.inf)
    order = np.argsort(-m, kind="stable")
    order = order[m[order] > -np.inf]
    return order[:max_mux_ues]


# ---------------------------------------------------------------------------
# FD/SD allocation

@dataclass
class Allocation:
    mode: np.ndarray          # (K,) MODE_* per PRB
    ue: np.ndarray            # (K, 2) UE per stream; -1 where unused
    metric: np.ndarray        # (K,) winning metric value (NaN for retransmissions/free)
    retx: dict                # retransmission key -> PRB indices

    @classmethod
    def empty(cls, n_prb: int) -> "Allocation":
        return cls(np.full(n_prb, MODE_FREE, dtype=np.int8), np.full((n_prb, 2), -1, dtype=np.int64),
                   np.full(n_prb, np.nan), {})

    def check(self, candidates=None):
        """Raise on internal inconsistencies."""
        seen = np.concatenate([v for v in self.retx.values()]) if self.retx else np.array([], int)
        if len(seen) != len(set(seen.tolist())):
            raise SchedulerError("PRB allocated to more than one retransmission")
        if np.any(self.mode[seen] != MODE_RETX) or np.sum(self.mode == MODE_RETX) != len(seen):
            raise SchedulerError("retransmission bookkeeping mismatch")
        if np.any(self.ue[self.mode == MODE_RETX, 1] >= 0):
            raise SchedulerError("retransmission PRB carries two streams")
        if candidates is not None:
            new = np.isin(self.mode, (MODE_SINGLE, MODE_SU, MODE_MU))
            used = self.ue[new]
            if not np.all(np.isin(used[used >= 0], candidates)):
                raise SchedulerError("new data allocated to a UE outside the TD selection")


def _top2(v):
    """Best and second-best row per column: values and indices (ties to lower row)."""
    if v.shape[0] < 2:
        v = np.vstack([v, np.full((2 - v.shape[0], v.shape[1]), -np.inf)])
    order = np.argsort(-v, axis=0, kind="stable")[:2]
    vals = np.take_along_axis(v, order, axis=0)
    return vals, order


def fd_sd_allocate(m1, m2, candidates, stream_ok=None, retx=(), free=None) -> Allocation:
    """
    Greedy per-PRB allocation.

    Parameters
    ----------
    m1 : (U, K) single-stream metric
    m2 : (U, K, 2) dual-stream per-stream metric, or None for single-stream only
    candidates : UE indices selected by the TD stage
    stream_ok : (U, 2) bool, whether the UE can take new data on each stream
    retx : sequence of (key, ue, n_prb), oldest first; served before new data
    free : (K,) bool PRBs available (default all)
    """
    m1 = np.asarray(m1, dtype=float)
    U, K = m1.shape
    alloc = Allocation.empty(K)
    avail = np.ones(K, bool) if free is None else np.asarray(free, bool).copy()
    if stream_ok is None:
        stream_ok = np.ones((U, 2), bool)

    for key, ue, n_prb in retx:
        idx = np.flatnonzero(avail)
        if len(idx) < n_prb:
            continue
        pick = idx[np.argsort(-m1[ue, idx], kind="stable")[:n_prb]]
        alloc.mode[pick] = MODE_RETX
        alloc.ue[pick, 0] = ue
        alloc.retx[key] = np.sort(pick)
        avail[pick] = False

    cand = np.zeros(U, bool)
    cand[np.asarray(candidates, dtype=int)] = True
    ok0 = (cand & stream_ok[:, 0])[:, None]
    ok1 = (cand & stream_ok[:, 1])[:, None]
    ninf = -np.inf

    v1 = np.where(ok0, m1, ninf)
    best1 = np.argmax(v1, axis=0)
    options = [v1[best1, np.arange(K)]]
    if m2 is not None:
        m2 = np.asarray(m2, dtype=float)
        su = np.where(ok0 & ok1, m2[..., 0] + m2[..., 1], ninf)
        best_su = np.argmax(su, axis=0)
        options.append(su[best_su, np.arange(K)])

        (a, ia), (b, ib) = _top2(np.where(ok0, m2[..., 0], ninf)), _top2(np.where(ok1, m2[..., 1], ninf))
        distinct = ia[0] != ib[0]
        alt_first = a[0] + b[1] >= a[1] + b[0]
        mu_val = np.where(distinct, a[0] + b[0], np.where(alt_first, a[0] + b[1], a[1] + b[0]))
        mu_ue0 = np.where(distinct | alt_first, ia[0], ia[1])
        mu_ue1 = np.where(distinct, ib[0], np.where(alt_first, ib[1], ib[0]))
        options.append(mu_val)

    vals = np.vstack(options)
    choice = np.argmax(vals, axis=0)         # ties favour fewer streams
    win = vals[choice, np.arange(K)]
    take = avail & np.isfinite(win)

    k = np.flatnonzero(take & (choice == 0))
    alloc.mode[k], alloc.ue[k, 0], alloc.metric[k] = MODE_SINGLE, best1[k], win[k]
    if m2 is not None:
        k = np.flatnonzero(take & (choice == 1))
        alloc.mode[k], alloc.metric[k] = MODE_SU, win[k]
        alloc.ue[k, 0] = alloc.ue[k, 1] = best_su[k]
        k = np.flatnonzero(take & (choice == 2))
        alloc.mode[k], alloc.metric[k] = MODE_MU, win[k]
        alloc.ue[k, 0], alloc.ue[k, 1] = mu_ue0[k], mu_ue1[k]
    return alloc
