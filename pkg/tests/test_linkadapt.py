import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ofdma_rrm.config import parse_config
from ofdma_rrm.linkadapt import (McsEntry, McsTable, OllaState, blep, eesm, eesm_masked, estimate_rate,
                                 olla_update, select_mcs, select_mcs_array, select_mcs_batch)

TABLE = parse_config().mcs


def test_table_order_and_size():
    assert len(TABLE) == 9
    assert np.all(np.diff(TABLE.efficiencies) > 0)
    assert TABLE[0].name == "QPSK 1/3" and TABLE[8].name == "64QAM 4/5"


def test_thresholds_follow_shannon_plus_margin():
    # BLEP = 0.2 at 10 log10(2^SE - 1) + 2 dB
    for e in TABLE.entries:
        gamma20 = 10 * math.log10(2 ** e.efficiency - 1) + 2.0
        assert blep(TABLE, TABLE.entries.index(e), gamma20) == pytest.approx(0.2, abs=2e-3)


def test_table_rejects_unsorted():
    a = McsEntry("a", 4, 0.5, 1.0, 0.0, 0.6)
    b = McsEntry("b", 2, 0.5, 1.0, 0.0, 0.6)
    with pytest.raises(ValueError):
        McsTable((a, b))


def test_eesm_examples():
    assert eesm([0.0, 2.0], 1.0) == pytest.approx(-math.log(0.5 * (1 + math.exp(-2))), rel=1e-12)
    assert eesm([0.0, 2.0], 1.0) == pytest.approx(0.566, abs=5e-4)
    with pytest.raises(ValueError):
        eesm([], 1.0)
    with pytest.raises(ValueError):
        eesm([1.0], 0.0)


def test_eesm_large_inputs_stay_finite():
    assert eesm([1e4, 1e4], 1.0) == pytest.approx(1e4)


@given(st.floats(0, 1e4), st.floats(0.5, 20), st.integers(1, 50))
def test_eesm_identity(g, beta, n):
    assert eesm(np.full(n, g), beta) == pytest.approx(g, rel=1e-12, abs=1e-12)


@given(st.lists(st.floats(0, 1e3), min_size=1, max_size=20), st.floats(0.5, 20))
def test_eesm_jensen(values, beta):
    assert eesm(values, beta) <= np.mean(values) * (1 + 1e-12) + 1e-12


def test_eesm_masked_matches_scalar(rng):
    vals = rng.exponential(5, (6, 10))
    mask = rng.random((6, 10)) < 0.5
    mask[0] = False
    out = eesm_masked(vals, mask, TABLE.betas)
    assert np.all(np.isnan(out[0]))
    for i in range(1, 6):
        for m, beta in enumerate(TABLE.betas):
            if mask[i].any():
                assert out[i, m] == pytest.approx(eesm(vals[i, mask[i]], beta), rel=1e-12)


def test_blep_shape():
    t = TABLE[3].threshold_db
    assert blep(TABLE, 3, t) == pytest.approx(0.5)
    assert blep(TABLE, 3, 200.0) < 1e-100
    assert blep(TABLE, 3, -200.0) == pytest.approx(1.0)
    x = np.linspace(-10, 30, 101)
    assert np.all(np.diff(blep(TABLE, 3, x)) < 0)


def test_select_mcs_examples():
    assert select_mcs(60.0, 0.0, TABLE) == 8
    assert select_mcs(-20.0, 0.0, TABLE) == 0
    grid = np.arange(-10, 30.01, 0.25)
    idx = [select_mcs(g, 0.0, TABLE) for g in grid]
    assert idx == sorted(idx)


def test_select_mcs_meets_target():
    req = TABLE.required_db(0.2)
    for m in range(9):
        assert blep(TABLE, m, req[m]) == pytest.approx(0.2, rel=1e-9)
        assert select_mcs(req[m] + 1e-9, 0.0, TABLE) == m


@given(st.floats(-15, 35), st.floats(-5, 5))
def test_select_mcs_shift_equivariance(g, off):
    assert select_mcs(g, off, TABLE) == select_mcs(g - off, 0.0, TABLE)


def test_vectorised_selectors_agree(rng):
    g = rng.uniform(-15, 35, 500)
    off = rng.uniform(-5, 5, 500)
    req = TABLE.required_db(0.2)
    ref = [select_mcs(a, b, TABLE) for a, b in zip(g, off)]
    np.testing.assert_array_equal(select_mcs_array(g, off, req), ref)
    np.testing.assert_array_equal(select_mcs_batch(np.repeat(g[:, None], 9, 1), off, req), ref)


def test_estimate_rate_examples():
    assert estimate_rate(TABLE, 0, 1) == 112
    assert estimate_rate(TABLE, 8, 1) == 806
    assert estimate_rate(TABLE, 8, 5) == 4032
    with pytest.raises(ValueError):
        estimate_rate(TABLE, 0, 0)


def test_olla_steps():
    s = OllaState.for_target(0.2)
    assert s.step_down_db == pytest.approx(0.125)
    assert s.step_up_db / s.step_down_db == pytest.approx(4.0)
    assert olla_update(s, True).offset_db == pytest.approx(-0.125)
    t = s
    for ack in (True, True, True, True, False):
        t = olla_update(t, ack)
    assert t.offset_db == pytest.approx(0.0, abs=1e-12)


def test_olla_clamp():
    s = OllaState.for_target(0.2)
    for _ in range(100):
        s = olla_update(s, False)
    assert s.offset_db == 5.0
    for _ in range(1000):
        s = olla_update(s, True)
    assert s.offset_db == -5.0


def run_synthetic_olla(rng, n_ttis=105_000, warmup=5_000, mean_db=8.0, std_db=3.0, cqi_error_db=1.5):
    """Link with known logistic BLEP: reported SINR differs from the true one by a random error."""
    table = TABLE
    req = table.required_db(0.2)
    state = OllaState.for_target(0.2)
    true_db = rng.normal(mean_db, std_db, n_ttis)
    reported = true_db + rng.normal(0.5, cqi_error_db, n_ttis)   # biased, noisy CQI
    draws = rng.random(n_ttis)
    errors = 0
    for n in range(n_ttis):
        m = int(select_mcs_array(reported[n], state.offset_db, req))
        ack = draws[n] >= blep(table, m, true_db[n])
        if n >= warmup:
            errors += not ack
        state = olla_update(state, ack)
    return errors / (n_ttis - warmup)


def test_olla_converges_to_target():
    assert 0.18 <= run_synthetic_olla(np.random.default_rng(2)) <= 0.22
