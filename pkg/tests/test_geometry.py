import numpy as np
import pytest
from hypothesis import given, strategies as st

from ofdma_rrm.geometry import build_layout, drop_ues, path_loss, sector_gain
from ofdma_rrm.sfr import reuse_index_for


def _nearest_spacing(layout):
    d = np.linalg.norm(layout.sites[:, None] - layout.sites[None], axis=-1)
    d[d == 0] = np.inf
    return d.min(axis=1)


def test_layout_counts_and_spacing():
    lay = build_layout(500.0)
    assert lay.sites.shape == (19, 2)
    assert lay.n_sectors == 57
    np.testing.assert_allclose(_nearest_spacing(lay), 500.0, rtol=1e-12)
    np.testing.assert_allclose(lay.sites[0], 0.0)
    ring1 = np.sort(np.linalg.norm(lay.sites, axis=1))[1:7]
    np.testing.assert_allclose(ring1, 500.0, rtol=1e-12)


def test_layout_scales_linearly():
    a, b = build_layout(500.0), build_layout(1000.0)
    np.testing.assert_allclose(_nearest_spacing(b), 2 * _nearest_spacing(a))


def test_boresights_120_apart():
    lay = build_layout()
    for site in range(19):
        b = np.sort(lay.sector_boresight[lay.sector_site == site])
        np.testing.assert_allclose(np.diff(b), 120.0)


def test_path_loss_values():
    assert path_loss(1000.0) == pytest.approx(128.1, abs=1e-12)
    assert path_loss(500.0) == pytest.approx(128.1 + 37.6 * np.log10(0.5), abs=1e-12)
    assert path_loss(500.0) == pytest.approx(116.78, abs=0.005)
    assert path_loss(1000.0) - path_loss(100.0) == pytest.approx(37.6, abs=1e-12)
    with pytest.raises(ValueError):
        path_loss(34.9)


@given(st.floats(35, 5000), st.floats(0.1, 1000))
def test_path_loss_increasing(d, step):
    assert path_loss(d + step) > path_loss(d)


def test_sector_gain_values():
    assert sector_gain(0.0) == 0.0
    assert sector_gain(70.0) == pytest.approx(-12.0)
    assert sector_gain(180.0) == -20.0


@given(st.floats(-180, 180))
def test_sector_gain_even_and_bounded(theta):
    g = sector_gain(theta)
    assert -20.0 <= g <= 0.0
    assert g == sector_gain(-theta)


def test_drop_counts_distance_and_best_server():
    lay = build_layout()
    placements, gains = drop_ues(lay, 15, np.random.default_rng(3))
    assert len(placements) == 45
    serving = np.array([p.serving_sector for p in placements])
    assert np.all(np.bincount(serving, minlength=3) == 15)
    assert all(p.distance_to_serving >= 35.0 for p in placements)
    np.testing.assert_array_equal(np.argmax(gains.total_db, axis=1), serving)
    site_d = np.linalg.norm(np.array([p.position for p in placements])[:, None] - lay.sites[None], axis=-1)
    assert site_d.min() >= 35.0


def test_drop_one_per_cell():
    placements, _ = drop_ues(build_layout(), 1, np.random.default_rng(0))
    assert sorted(p.serving_sector for p in placements) == [0, 1, 2]


def test_drop_deterministic_and_seed_dependent():
    lay = build_layout()
    a, ga = drop_ues(lay, 15, np.random.default_rng(7))
    b, gb = drop_ues(lay, 15, np.random.default_rng(7))
    c, _ = drop_ues(lay, 15, np.random.default_rng(8))
    np.testing.assert_array_equal([p.position for p in a], [p.position for p in b])
    np.testing.assert_array_equal(ga.shadowing_db, gb.shadowing_db)
    assert not np.allclose([p.position for p in a], [p.position for p in c])


def test_shadowing_statistics():
    _, gains = drop_ues(build_layout(), 15, np.random.default_rng(1))
    # one value per (UE, site): every sector of a site shares it
    sh = gains.shadowing_db.reshape(45, 19, 3)
    np.testing.assert_array_equal(sh[..., 0], sh[..., 1])


def test_drop_gives_up_on_impossible_geometry():
    with pytest.raises(RuntimeError):
        drop_ues(build_layout(50.0), 15, np.random.default_rng(0), min_distance=40.0, max_attempts=2000)


def test_vertex_sectors_have_distinct_reuse_indices():
    lay = build_layout()
    for k in range(3):
        ang = np.radians(lay.sector_boresight[k])
        vertex = 500.0 / np.sqrt(3) * np.array([np.cos(ang), np.sin(ang)])
        # the three sectors pointing at this hexagon vertex
        delta = vertex - lay.sites[lay.sector_site]
        dist = np.linalg.norm(delta, axis=1)
        off = np.degrees(np.arctan2(delta[:, 1], delta[:, 0])) - lay.sector_boresight
        facing = np.flatnonzero((dist < 300) & (np.abs((off + 180) % 360 - 180) < 1e-6))
        assert len(facing) == 3
        assert sorted(reuse_index_for(int(s)) for s in facing) == [0, 1, 2]
