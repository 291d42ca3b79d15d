"""
TTI-level system simulation of the central site of a 57-sector network.

A drop fixes the UE positions, shadowing and fading processes. Scheduler
variants that differ only in scheduling, mask or antenna mode can run in
lockstep on one :class:`NetworkChannel`, which is read-only for them; each
variant owns its CQI pipeline, trackers, OLLA and HARQ state.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import detection as det
from .channel import CqiPipeline, PowerDelayProfile, init_fading, prb_sample_freqs, steering
from .config import SystemConfig
from .geometry import SECTORS_PER_SITE, build_layout, drop_ues
from .harq import HarqError, HarqPool, on_feedback, pending_retransmissions, retransmit, start_transmission
from .linkadapt import RE_PER_PRB, OllaState, blep, eesm_masked, olla_update, select_mcs_array, select_mcs_batch
from .scheduler import (MODE_MU, MODE_SINGLE, MODE_SU, SchedulerError, Trackers, fd_sd_allocate,
                        fullband_metric, prb_metrics, td_rank, update_cqi_avg, update_trackers)
from .sfr import make_mask, sector_fractions
from .stats import DropStats

log = logging.getLogger(__name__)


class SimulationError(RuntimeError):
    """Internal consistency violation; aborts the run."""


def _db(x):
    return 10 * np.log10(x)


def _lin(x_db):
    return 10 ** (np.asarray(x_db) / 10)


def _streams(seed: int):
    geo, fading, outcome = np.random.SeedSequence(seed).spawn(3)
    return geo, fading, outcome


# ---------------------------------------------------------------------------
# shared radio channel

def _cov(power, cross):
    """(U, r, rx, F) powers and (U, r, F) h0 h1* terms -> (U, r, F, 2, 2) Hermitian covariances."""
    out = np.empty(cross.shape + (2, 2), dtype=np.complex128)
    out[..., 0, 0] = power[:, :, 0]
    out[..., 1, 1] = power[:, :, 1]
    out[..., 0, 1] = cross
    out[..., 1, 0] = np.conj(cross)
    return out


class NetworkChannel:
    """
    Large-scale gains and 2x2 fading of every central UE towards all sectors.

    Per TTI it builds, for each reuse index r, the unmasked interference
    covariance ``S_r = sum_j P g_j H_j D H_j^H`` over the non-serving sectors
    with that index. A power mask then gives ``Sz = sum_r frac[r] S_r``, so
    any number of masks and antenna modes reuse one fading evaluation.
    """

    def __init__(self, config: SystemConfig, seed: int):
        radio = config.radio
        geo_ss, fading_ss, _ = _streams(seed)
        self.layout = build_layout(config.layout.inter_site_distance)
        placements, gains = drop_ues(self.layout, config.layout.ues_per_cell, np.random.default_rng(geo_ss),
                                     config.layout.shadowing_std_db, config.layout.min_distance)
        self.placements = placements
        self.serving = np.array([p.serving_sector for p in placements])
        self.gain = gains.linear                                   # (U, S)
        self.n_ue, self.n_sectors = self.gain.shape
        self.n_prb = radio.prbs
        self.p_prb = radio.prb_power_w
        self.noise_w = radio.noise_w
        self.tti_s = radio.tti_s
        self.samples = radio.samples_per_prb

        pdp = PowerDelayProfile.from_table()
        self.fading = init_fading(pdp, radio.doppler_hz, np.random.default_rng(fading_ss),
                                  (self.n_ue, self.n_sectors, 2, 2), config.channel.oscillators,
                                  dtype=np.complex64)
        freqs = prb_sample_freqs(radio.prbs, radio.subcarriers_per_prb, radio.subcarrier_spacing_khz * 1e3,
                                 radio.active_subcarriers, radio.samples_per_prb)
        self._steer = steering(pdp.delays_s, freqs, np.complex64)

        w = self.p_prb * self.gain
        w[np.arange(self.n_ue), self.serving] = 0.0               # serving sector is not interference
        self._w = w.reshape(self.n_ue, -1, SECTORS_PER_SITE).astype(np.float32)   # (U, site, r)
        self.serving_gain = self.gain[np.arange(self.n_ue), self.serving]
        self.tti = -1
        self._cache = {}

    def advance(self, tti: int):
        if tti == self.tti:
            return
        if tti < self.tti:
            raise SimulationError("channel time must not go backwards")
        self.fading.advance(tti * self.tti_s)
        taps = self.fading.taps()
        U, S = self.n_ue, self.n_sectors
        H = (taps.reshape(-1, taps.shape[-1]) @ self._steer).reshape(U, S, 2, 2, -1)   # (U, S, rx, tx, F)
        self.H_serv = np.moveaxis(H[np.arange(U), self.serving], -1, 1).astype(np.complex128)  # (U, F, rx, tx)
        # per transmit antenna t: |h_at|^2 and h_0t conj(h_1t), summed over sites with weights P g
        power = np.abs(H)
        power *= power
        cross = (H[:, :, 0] * np.conj(H[:, :, 1])).view(np.float32)      # interleaved re/im
        power = power.reshape(U, -1, SECTORS_PER_SITE, power[0, 0].size)
        cross = cross.reshape(U, -1, SECTORS_PER_SITE, cross[0, 0].size)
        w = self._w
        p = np.stack([np.matmul(w[:, None, :, r], power[:, :, r])[:, 0] for r in range(SECTORS_PER_SITE)], 1)
        c = np.stack([np.matmul(w[:, None, :, r], cross[:, :, r])[:, 0] for r in range(SECTORS_PER_SITE)], 1)
        p = p.reshape(U, SECTORS_PER_SITE, 2, 2, -1).astype(np.float64)  # (U, r, rx, tx, F)
        c = np.ascontiguousarray(c).view(np.complex64).reshape(U, SECTORS_PER_SITE, 2, -1).astype(np.complex128)
        self._interf = {"simo": _cov(p[:, :, :, 0], c[:, :, 0]),
                        "mimo": _cov(0.5 * p.sum(axis=3), 0.5 * c.sum(axis=2))}
        self.tti = tti
        self._cache.clear()

    def sinr(self, antenna: str, mask_key: tuple, fractions: np.ndarray):
        """
        True per-PRB SINRs (linear) for one antenna mode and power mask.

        Returns ``(single, dual)``: ``(U, K)`` and ``(U, K, 2)`` (``None`` for SIMO).
        With several samples per PRB the values are the per-PRB mean.
        """
        key = (antenna, mask_key)
        if key in self._cache:
            return self._cache[key]
        frac = np.repeat(fractions, self.samples, axis=1)                # (3, F)
        sz = np.einsum("rf,urfab->ufab", frac, self._interf[antenna])
        sn = det.noise_cov(self.noise_w)
        s = self.p_prb * self.serving_gain[:, None] * frac[self.serving]  # (U, F)
        h = self.H_serv[..., 0]
        if antenna == "simo":
            single = det.sinr_single(det.mrc_weights(h), h, s, sn, sz)
            dual = None
        else:
            single = det.sinr_single(det.lmmse_single(h, s, sn, sz), h, s, sn, sz)
            px = np.stack([s / 2, s / 2], axis=-1)
            dual = det.sinr_dual(det.lmmse_dual(self.H_serv, px, sn, sz), self.H_serv, px, sn, sz)
        if self.samples > 1:
            single = single.reshape(self.n_ue, self.n_prb, self.samples).mean(-1)
            if dual is not None:
                dual = dual.reshape(self.n_ue, self.n_prb, self.samples, 2).mean(2)
        self._cache[key] = (single, dual)
        return single, dual


# ---------------------------------------------------------------------------
# per-variant state

@dataclass
class _Feedback:
    due: int
    ue: int
    stream: int
    pid: int
    ack: bool
    first: bool


@dataclass
class Cell:
    """Scheduler view of one central sector."""
    sector: int
    ues: np.ndarray                        # global UE indices
    trackers: Trackers


@dataclass
class VariantState:
    config: SystemConfig
    rng: np.random.Generator
    fractions: np.ndarray                  # (3, K) mask fraction per reuse index
    mask_key: tuple
    cqi: CqiPipeline
    cells: list
    olla: list                             # OllaState per UE
    pools: list                            # pools[ue][stream]
    feedback: list = field(default_factory=list)
    ue_bits: np.ndarray = None
    first_tx: int = 0
    first_tx_errors: int = 0
    trace: list = field(default_factory=list)
    allocations: dict = field(default_factory=dict)   # sector -> last Allocation (global UE ids)

    @property
    def mimo(self) -> bool:
        return self.config.radio.antenna == "mimo"


def init_variant(config: SystemConfig, channel: NetworkChannel, seed: int) -> VariantState:
    _, _, outcome_ss = _streams(seed)
    mask = make_mask(config.mask.kind, config.radio.prbs, config.mask.subbands, config.mask.levels_db)
    ch, h, ln = config.channel, config.harq, config.link
    n_ue = channel.n_ue
    pools = [[HarqPool(h.processes, h.max_retx, h.feedback_delay, s) for s in range(2)] for _ in range(n_ue)]
    olla = [OllaState.for_target(ln.bler_target, ln.olla_step_up_db, ln.olla_min_db, ln.olla_max_db)] * n_ue
    # smallest transport block: one PRB at the lowest MCS
    initial = np.floor(RE_PER_PRB * config.mcs.efficiencies[0] + 1e-9)
    cells = []
    for sector in np.unique(channel.serving):
        ues = np.flatnonzero(channel.serving == sector)
        cells.append(Cell(int(sector), ues, Trackers.start(len(ues), initial)))
    return VariantState(
        config=config,
        rng=np.random.default_rng(outcome_ss),
        fractions=sector_fractions(mask, SECTORS_PER_SITE),
        mask_key=(mask.kind, mask.levels_db, mask.subband_sizes),
        cqi=CqiPipeline(ch.cqi_period, ch.cqi_delay, ch.cqi_step_db, ch.cqi_min_db, ch.cqi_max_db),
        cells=cells,
        olla=olla,
        pools=pools,
        ue_bits=np.zeros(n_ue),
    )


def _rates(cfg: SystemConfig, sinr_db, offset_db, required_db):
    """Per-PRB transport block bits at the MCS picked from ``sinr_db``."""
    mcs = select_mcs_array(sinr_db, offset_db, required_db)
    return np.floor(RE_PER_PRB * cfg.mcs.efficiencies[mcs] + 1e-9)


def run_tti(state: VariantState, channel: NetworkChannel, tti: int) -> VariantState:
    """
    Advance one variant by one TTI.

    Order: channel, true SINRs, CQI pipeline, HARQ feedback, scheduling on the
    delayed CQI, link adaptation and outcome draws on the true SINRs,
    tracker updates and statistics.
    """
    cfg = state.config
    rho = cfg.scheduler.forgetting_factor
    channel.advance(tti)
    single, dual = channel.sinr(cfg.radio.antenna, state.mask_key, state.fractions)
    n_ue = single.shape[0]

    applied = state.cqi.step(tti, _db(single), None if dual is None else _db(dual))
    if applied is not None:
        values = [_lin(applied.single_db).reshape(n_ue, -1)]
        if applied.dual_db is not None:
            values.append(_lin(applied.dual_db).reshape(n_ue, -1))
        mean = np.concatenate(values, axis=1).mean(axis=1)
        weight = 1 - (1 - rho) ** cfg.channel.cqi_period
        for cell in state.cells:
            update_cqi_avg(cell.trackers, mean[cell.ues], weight)

    delivered = np.zeros(n_ue)
    due = [f for f in state.feedback if f.due == tti]
    if due:
        state.feedback = [f for f in state.feedback if f.due != tti]
    for f in due:
        delivered[f.ue] += on_feedback(state.pools[f.ue][f.stream], f.pid, f.ack, tti)
        if f.first:
            state.olla[f.ue] = olla_update(state.olla[f.ue], f.ack)
    in_window = tti >= cfg.run.warmup_ttis
    if in_window:
        state.ue_bits += delivered
        state.trace.append(delivered.sum())

    report = state.cqi.current
    for cell in state.cells:
        ranked = np.array([], dtype=int)
        if report is not None:
            ranked = _schedule_cell(state, cell, tti, report, single, dual, in_window)
        update_trackers(cell.trackers, delivered[cell.ues], ranked, rho)
    return state


def _schedule_cell(state: VariantState, cell: Cell, tti, report, single, dual, in_window) -> np.ndarray:
    """TD + FD/SD scheduling of one sector; returns the TD-ranked local indices."""
    cfg = state.config
    params = cfg.scheduler
    required = cfg.mcs.required_db(cfg.link.bler_target)
    ues = cell.ues
    offset = np.array([state.olla[u].offset_db for u in ues])[:, None]

    cqi1_db = report.single_db[ues]
    rate1 = _rates(cfg, cqi1_db, offset, required)
    rate2 = cqi2 = None
    if state.mimo:
        cqi2_db = report.dual_db[ues]
        # rank adaptation: a layer is offered only if its CQI supports some MCS
        layer_ok = cqi2_db - offset[..., None] >= required[0]
        rate2 = np.where(layer_ok, _rates(cfg, cqi2_db, offset[..., None], required), 0.0)
        cqi2 = _lin(cqi2_db)
    cqi1 = _lin(cqi1_db)
    frac = state.fractions[cell.sector]
    stream_ok = np.array([[p.has_idle() for p in state.pools[u]] for u in ues])
    if not state.mimo:
        stream_ok[:, 1] = False

    m1, m2 = prb_metrics(params, frac, cell.trackers, rate1, rate2, cqi1, cqi2)
    if m2 is not None:
        m2 = np.where(layer_ok, m2, -np.inf)
    full = fullband_metric(params, frac, cell.trackers, rate1, rate2, cqi1, cqi2)
    ranked = td_rank(full, params.max_mux_ues, stream_ok.any(axis=1))

    pending = []
    for i, u in enumerate(ues):
        for s in range(2):
            pool = state.pools[u][s]
            for pid, _, _ in pending_retransmissions(pool):
                pending.append((pool.processes[pid].pending_since, i, s, pid))
    pending.sort()
    retx = [((ues[i], s, pid), i, state.pools[ues[i]][s].processes[pid].n_prb) for _, i, s, pid in pending]

    alloc = fd_sd_allocate(m1, m2, ranked, stream_ok, retx)
    try:
        alloc.check(ranked)
    except SchedulerError as exc:
        raise SimulationError(f"TTI {tti}, sector {cell.sector}: {exc}") from exc
    used = alloc.ue >= 0
    alloc.ue[used] = ues[alloc.ue[used]]
    state.allocations[cell.sector] = alloc
    _transmit(state, tti, alloc, single, dual, report, in_window)
    return ranked


def _transmit(state: VariantState, tti, alloc, single, dual, report, in_window):
    """Link adaptation, outcome draws and HARQ bookkeeping for one sector's allocation."""
    cfg = state.config
    table = cfg.mcs
    delay = cfg.harq.feedback_delay
    n_ue, n_prb = single.shape

    # new data: one transport block per (UE, stream) over every PRB carrying that layer
    true = np.zeros((n_ue, 2, n_prb))
    dec_db = np.zeros((n_ue, 2, n_prb))
    layer = np.zeros((n_ue, 2, n_prb), bool)
    k = np.flatnonzero(alloc.mode == MODE_SINGLE)
    u = alloc.ue[k, 0]
    true[u, 0, k], dec_db[u, 0, k], layer[u, 0, k] = single[u, k], report.single_db[u, k], True
    k = np.flatnonzero((alloc.mode == MODE_SU) | (alloc.mode == MODE_MU))
    for s in range(2 if k.size else 0):
        u = alloc.ue[k, s]
        true[u, s, k], dec_db[u, s, k], layer[u, s, k] = dual[u, k, s], report.dual_db[u, k, s], True

    blocks_u, blocks_s = np.nonzero(layer.any(axis=-1))
    if blocks_u.size:
        mask = layer[blocks_u, blocks_s]
        eff_dec = _db(eesm_masked(_lin(dec_db[blocks_u, blocks_s]), mask, table.betas))    # (B, M)
        eff_true = eesm_masked(true[blocks_u, blocks_s], mask, table.betas)                  # (B, M)
        offsets = np.array([state.olla[u].offset_db for u in blocks_u])
        mcs = select_mcs_batch(eff_dec, offsets, table.required_db(cfg.link.bler_target))
        n = mask.sum(axis=1)
        bits = np.floor(n * RE_PER_PRB * table.efficiencies[mcs] + 1e-9).astype(int)
        eff = eff_true[np.arange(len(mcs)), mcs]
        ack = state.rng.random(len(mcs)) >= blep(table, mcs, _db(eff))
        for i, (u, s) in enumerate(zip(blocks_u.tolist(), blocks_s.tolist())):
            try:
                pid = start_transmission(state.pools[u][s], int(bits[i]), int(mcs[i]), float(eff[i]),
                                         int(n[i]), tti)
            except HarqError as exc:
                raise SimulationError(f"TTI {tti}: UE {u} stream {s}: {exc}") from exc
            state.feedback.append(_Feedback(tti + delay, u, s, pid, bool(ack[i]), True))
        if in_window:
            state.first_tx += len(mcs)
            state.first_tx_errors += int(np.sum(~ack))

    # retransmissions: same format, single stream, chase combined
    if alloc.retx:
        keys = list(alloc.retx)
        mask = np.zeros((len(keys), n_prb), bool)
        rows = np.array([key[0] for key in keys])
        for i, key in enumerate(keys):
            mask[i, alloc.retx[key]] = True
        procs = [state.pools[u][s].processes[pid] for u, s, pid in keys]
        mcs = np.array([p.mcs for p in procs])
        if np.any(mask.sum(axis=1) != [p.n_prb for p in procs]):
            raise SimulationError(f"TTI {tti}: retransmission size mismatch")
        eff = eesm_masked(single[rows], mask, table.betas)[np.arange(len(keys)), mcs]
        combined = np.array([retransmit(state.pools[u][s], pid, e, tti) for (u, s, pid), e in zip(keys, eff)])
        ack = state.rng.random(len(keys)) >= blep(table, mcs, _db(combined))
        for key, a in zip(keys, ack):
            state.feedback.append(_Feedback(tti + delay, *key, bool(a), False))


# ---------------------------------------------------------------------------
# drops

def _window(config: SystemConfig) -> int:
    n = config.run.n_ttis - config.run.warmup_ttis
    if n <= 0:
        raise ValueError("run.n_ttis must exceed run.warmup_ttis: the statistics window is empty")
    return n


def run_variants(configs, seed: int, trace: bool = False) -> list:
    """
    Run several variants of one drop in lockstep on a shared channel.

    All configs must agree on everything that defines the radio channel and
    on the run length. Returns one entry per config: :class:`DropStats`, or
    the exception that aborted that variant.
    """
    configs = list(configs)
    if not configs:
        return []
    base = configs[0]
    for c in configs[1:]:
        if c.channel_key() != base.channel_key() or c.run != base.run:
            raise ValueError("variants of one drop must share channel and run settings")
    n_window = _window(base)
    t0 = time.perf_counter()
    channel = NetworkChannel(base, seed)
    states = [init_variant(c, channel, seed) for c in configs]
    shared = time.perf_counter() - t0
    own = np.zeros(len(configs))
    results: list = [None] * len(configs)
    live = list(range(len(configs)))
    for tti in range(base.run.n_ttis):
        t0 = time.perf_counter()
        channel.advance(tti)
        shared += time.perf_counter() - t0
        for i in list(live):
            t0 = time.perf_counter()
            try:
                run_tti(states[i], channel, tti)
            except (SimulationError, HarqError, SchedulerError, ValueError, FloatingPointError) as exc:
                log.error("variant %d aborted at TTI %d: %s", i, tti, exc)
                results[i] = exc
                live.remove(i)
            own[i] += time.perf_counter() - t0
        if not live:
            break
    window_s = n_window * base.radio.tti_s
    for i in live:
        st = states[i]
        results[i] = DropStats(seed, st.ue_bits.copy(), channel.serving.copy(), window_s,
                               st.first_tx, st.first_tx_errors,
                               np.array(st.trace) if trace else None,
                               own[i] + shared / len(configs))
    return results


def run_drop(config: SystemConfig, seed: int, trace: bool = False) -> DropStats:
    """One drop of one configuration."""
    result = run_variants([config], seed, trace)[0]
    if isinstance(result, Exception):
        raise result
    return result
