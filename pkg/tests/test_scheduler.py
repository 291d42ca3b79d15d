import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ofdma_rrm.config import ConfigError
from ofdma_rrm.scheduler import (MODE_FREE, MODE_MU, MODE_RETX, MODE_SINGLE, MODE_SU, SchedulerError,
                                 SchedulerParams, Trackers, fd_sd_allocate, fullband_metric, metric_mmpf,
                                 metric_mpmpf, metric_pf, metric_ppf, prb_metrics, td_rank, update_trackers)

pos = st.floats(0.01, 100.0)


def test_metric_examples():
    assert metric_pf(700.0, 700.0) == 1.0
    assert metric_pf(1000.0, 500.0) == 2.0
    assert metric_ppf(1.0, 1.0, 1000.0, 500.0) == metric_pf(1000.0, 500.0)
    assert metric_ppf(0.5, 1.0, 1000.0, 500.0) == 1.0
    assert metric_mpmpf(0.5, 1.0, 2.0, 1.0, 0.5, 1.0, 1, 1) == pytest.approx(2.0)
    assert metric_mmpf(4.0, 1.0, 3.0, 3.0, 2, 1) == pytest.approx(16.0)
    for a1, a2 in [(0, 0), (1, 1), (4, 1)]:
        assert metric_mmpf(2.0, 2.0, 5.0, 5.0, a1, a2) == pytest.approx(1.0)
    assert metric_mpmpf(0.3, 1.0, 9.0, 2.0, 1.0, 7.0, 0, 0) == pytest.approx(0.3)


def test_metric_errors():
    with pytest.raises(SchedulerError):
        metric_pf(1.0, 0.0)
    with pytest.raises(SchedulerError):
        metric_ppf(1.5, 1.0, 1.0, 1.0)
    with pytest.raises(SchedulerError):
        metric_ppf(0.0, 1.0, 1.0, 1.0)
    with pytest.raises(SchedulerError):
        metric_mmpf(-1.0, 1.0, 1.0, 1.0, 1, 1)
    with pytest.raises(SchedulerError):
        metric_mpmpf(0.5, 1.0, 1.0, 0.0, 1.0, 1.0, 1, 1)


@given(pos, pos, pos, pos, pos, st.floats(0.01, 100.0), st.floats(0, 4), st.floats(0, 2))
def test_mpmpf_scale_invariance(p, cqi, cavg, t, ttot, c, a1, a2):
    p = min(p / 100.0, 1.0)
    ref = metric_mpmpf(p, 1.0, cqi, cavg, t, ttot, a1, a2)
    assert metric_mpmpf(p, 1.0, c * cqi, c * cavg, t, ttot, a1, a2) == pytest.approx(ref, rel=1e-9)
    assert metric_mpmpf(p, 1.0, cqi, cavg, c * t, c * ttot, a1, a2) == pytest.approx(ref, rel=1e-9)
    assert metric_mpmpf(1.0, 1.0, cqi, cavg, t, ttot, a1, a2) == pytest.approx(
        metric_mmpf(cqi, cavg, t, ttot, a1, a2), rel=1e-12)


@given(st.floats(0.01, 0.99), st.floats(0.001, 0.5), pos, pos)
def test_power_monotone(p, dp, r, t):
    hi = min(p + dp, 1.0)
    assert metric_ppf(hi, 1.0, r, t) > metric_ppf(p, 1.0, r, t)
    assert metric_mpmpf(hi, 1.0, r, 1.0, t, 1.0, 1, 1) > metric_mpmpf(p, 1.0, r, 1.0, t, 1.0, 1, 1)


def test_params_validation():
    SchedulerParams()._check()
    with pytest.raises(ConfigError):
        SchedulerParams(algorithm="rr")._check()
    with pytest.raises(ConfigError):
        SchedulerParams(alpha1=-1)._check()
    with pytest.raises(ConfigError):
        SchedulerParams(forgetting_factor=1.0)._check()


def test_update_trackers():
    tr = Trackers.start(3, 1000.0)
    update_trackers(tr, np.zeros(3), np.array([0, 1]), 0.002)
    assert np.allclose(tr.avg_throughput, 998.0)
    assert tr.total_throughput == pytest.approx(998.0)
    tr = Trackers.start(1, 1.0)
    for _ in range(5000):
        update_trackers(tr, np.array([250.0]), np.array([0]), 0.002)
    assert tr.avg_throughput[0] == pytest.approx(250.0, rel=1e-3)
    with pytest.raises(SchedulerError):
        update_trackers(tr, np.zeros(1), np.array([0]), 0.0)


def test_update_trackers_time_constant():
    tr = Trackers.start(1, 1.0)
    for _ in range(500):
        update_trackers(tr, np.array([0.0]), np.array([]), 0.002)
    assert tr.avg_throughput[0] == pytest.approx(np.exp(-1), rel=2e-3)


def test_td_rank():
    assert len(td_rank(np.arange(15.0), 10)) == 10
    m = np.array([0.3, 2.0, 1.1])
    assert list(td_rank(m, 10)) == sorted(range(3), key=lambda i: -m[i])
    assert list(td_rank(np.ones(15), 10)) == list(range(10))
    assert list(td_rank(m, 10, eligible=np.array([True, False, True]))) == [2, 0]


def test_allocate_hand_example():
    m1 = np.array([[3.0, 1.0], [2.0, 4.0]])
    alloc = fd_sd_allocate(m1, None, [0, 1])
    assert list(alloc.ue[:, 0]) == [0, 1]
    assert list(alloc.mode) == [MODE_SINGLE, MODE_SINGLE]
    # greedy matches the best of the four assignments
    best = max(itertools.product(range(2), repeat=2), key=lambda a: m1[a[0], 0] + m1[a[1], 1])
    assert best == (0, 1)


def test_allocate_retx_priority():
    m1 = np.array([[9.0], [0.1]])
    alloc = fd_sd_allocate(m1, None, [0, 1], retx=[("r", 1, 1)])
    assert alloc.mode[0] == MODE_RETX and alloc.ue[0, 0] == 1 and alloc.ue[0, 1] == -1
    assert list(alloc.retx["r"]) == [0]


def test_allocate_retx_on_best_prbs():
    m1 = np.array([[1.0, 5.0, 3.0, 4.0]])
    alloc = fd_sd_allocate(m1, None, [], retx=[("r", 0, 2)])
    assert list(alloc.retx["r"]) == [1, 3]
    assert list(alloc.mode) == [MODE_FREE, MODE_RETX, MODE_FREE, MODE_RETX]


def test_allocate_empty():
    alloc = fd_sd_allocate(np.ones((3, 4)), np.ones((3, 4, 2)), [])
    assert np.all(alloc.mode == MODE_FREE) and np.all(alloc.ue == -1)


def test_allocate_modes():
    # UE 0 is good on both streams, so SU beats one stream
    m1 = np.array([[1.0], [0.5]])
    m2 = np.array([[[0.8, 0.8]], [[0.1, 0.1]]])
    a = fd_sd_allocate(m1, m2, [0, 1])
    assert a.mode[0] == MODE_SU and list(a.ue[0]) == [0, 0]
    # two UEs each strong on one stream
    m2 = np.array([[[0.9, 0.1]], [[0.1, 0.9]]])
    a = fd_sd_allocate(m1, m2, [0, 1])
    assert a.mode[0] == MODE_MU and list(a.ue[0]) == [0, 1]
    # no second HARQ slot forbids dual modes for UE 0
    a = fd_sd_allocate(m1, np.array([[[0.8, 0.8]], [[0.1, 0.1]]]), [0, 1],
                       stream_ok=np.array([[True, False], [True, True]]))
    assert a.mode[0] in (MODE_SINGLE, MODE_MU)


def _brute(m1, m2, cand, ok):
    """Best (value, mode) per PRB by enumerating every single, SU and MU option."""
    U, K = m1.shape
    out = []
    for k in range(K):
        best = (-np.inf, None)
        for i in cand:
            if ok[i, 0] and m1[i, k] > best[0]:
                best = (m1[i, k], (MODE_SINGLE, i, -1))
        for i in cand:
            if ok[i, 0] and ok[i, 1] and m2[i, k].sum() > best[0]:
                best = (m2[i, k].sum(), (MODE_SU, i, i))
        for i, j in itertools.permutations(cand, 2):
            if ok[i, 0] and ok[j, 1] and m2[i, k, 0] + m2[j, k, 1] > best[0]:
                best = (m2[i, k, 0] + m2[j, k, 1], (MODE_MU, i, j))
        out.append(best)
    return out


def test_allocate_vs_brute_force(rng):
    for trial in range(2000):
        U, K = rng.integers(1, 5), rng.integers(1, 5)
        m1 = rng.random((U, K))
        m2 = rng.random((U, K, 2)) * 0.7
        cand = sorted(rng.choice(U, rng.integers(0, U + 1), replace=False).tolist())
        ok = rng.random((U, 2)) < 0.8
        alloc = fd_sd_allocate(m1, m2, cand, stream_ok=ok)
        for k, (val, how) in enumerate(_brute(m1, m2, cand, ok)):
            if how is None:
                assert alloc.mode[k] == MODE_FREE
                continue
            assert alloc.metric[k] == pytest.approx(val, abs=1e-12)
            assert alloc.mode[k] == how[0]
        alloc.check(cand)


def _instance(rng, U=6, K=8):
    tr = Trackers(rng.uniform(50, 500, U), float(rng.uniform(50, 500)), rng.uniform(0.5, 20, U))
    cqi1 = rng.uniform(0.1, 30, (U, K))
    cqi2 = rng.uniform(0.05, 15, (U, K, 2))
    frac = rng.choice([1.0, 10 ** -0.1, 10 ** -0.4], K)
    return tr, cqi1, cqi2, frac


def _decisions(params, frac, tr, cqi1, cqi2):
    rate2 = None if cqi2 is None else cqi2 * 10
    m1, m2 = prb_metrics(params, frac, tr, cqi1 * 10, rate2, cqi1, cqi2)
    fb = fullband_metric(params, frac, tr, cqi1 * 10, rate2, cqi1, cqi2)
    cand = td_rank(fb, 4)
    a = fd_sd_allocate(m1, m2, cand)
    return list(cand), a.mode.tolist(), a.ue.tolist()


def test_metric_scaling_leaves_decisions(rng):
    params = SchedulerParams("mpmpf", 2.0, 1.0)
    for _ in range(1000):
        tr, cqi1, cqi2, frac = _instance(rng)
        ref = _decisions(params, frac, tr, cqi1, cqi2)
        c = rng.uniform(0.1, 10, tr.cqi_avg.size)
        tr_c = Trackers(tr.avg_throughput, tr.total_throughput, tr.cqi_avg * c)
        assert _decisions(params, frac, tr_c, cqi1 * c[:, None], cqi2 * c[:, None, None]) == ref
        g = rng.uniform(0.1, 10)
        tr_g = Trackers(tr.avg_throughput * g, tr.total_throughput * g, tr.cqi_avg)
        assert _decisions(params, frac, tr_g, cqi1, cqi2) == ref


def test_flat_mask_equivalences(rng):
    for _ in range(200):
        tr, cqi1, cqi2, _ = _instance(rng)
        flat = np.ones(cqi1.shape[1])
        # single-stream only: a dual-stream candidate carries half the PRB power
        assert (_decisions(SchedulerParams("mpmpf"), flat, tr, cqi1, None)
                == _decisions(SchedulerParams("mmpf"), flat, tr, cqi1, None))
        m_pf, _ = prb_metrics(SchedulerParams("pf"), flat, tr, cqi1)
        m_ppf, _ = prb_metrics(SchedulerParams("ppf"), flat, tr, cqi1)
        assert np.array_equal(m_pf, m_ppf)


def test_prb_metrics_per_ue_fraction():
    tr = Trackers(np.array([100.0, 200.0]), 150.0, np.array([1.0, 1.0]))
    rate = np.full((2, 3), 100.0)
    frac = np.array([[1.0, 0.5, 0.25], [0.5, 0.5, 0.5]])
    m1, m2 = prb_metrics(SchedulerParams("ppf"), frac, tr, rate, np.full((2, 3, 2), 100.0))
    assert np.allclose(m1, [[1.0, 0.5, 0.25], [0.25, 0.25, 0.25]])
    assert np.allclose(m2[..., 0], m1 / 2)
