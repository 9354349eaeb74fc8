import math

import numpy as np
import pytest

import oracles
from atmochan.errors import InvalidArgument
from atmochan.screens import (
    Grid,
    evaluate_on_axes,
    evaluate_points,
    evaluate_screen,
    ring_variances,
    sample_screen_set,
    sample_spectrum,
    wind_shift,
)
from atmochan.turbulence import ChannelGeometry, TurbulenceParams

P = TurbulenceParams(1e-14, 0.01, 5.0)
G = ChannelGeometry(808e-9, 1000.0, 1, 256, 0.005, 0.1)
GRID = Grid(256, 0.005)


def test_mode_count_and_support():
    s = sample_spectrum(P, G, seed=3, ring_count=1024)
    assert len(s.kx) == s.ring_count == 1024
    kap = np.hypot(s.kx, s.ky)
    assert np.all(kap >= P.kmin) and np.all(kap <= P.kmax)
    assert np.all(s.amplitude >= 0)


def test_one_mode_per_logarithmic_ring():
    s = sample_spectrum(P, G, seed=4, ring_count=64)
    edges = np.geomspace(P.kmin, P.kmax, 65)
    ring = np.searchsorted(edges, np.hypot(s.kx, s.ky), side="right") - 1
    assert np.array_equal(np.clip(ring, 0, 63), np.arange(64))


@pytest.mark.parametrize("rings", [0, 1, 7])
def test_too_few_rings(rings):
    with pytest.raises(InvalidArgument):
        sample_spectrum(P, G, seed=0, ring_count=rings)


def test_unknown_amplitude_law():
    with pytest.raises(InvalidArgument):
        sample_spectrum(P, G, seed=0, amplitude_law="gamma")


def test_ring_variances_sum_to_slab_variance():
    ref = oracles.slab_phase_variance(P.cn2, P.l0, P.L0, G.k, G.slab, P.kmin, P.kmax)
    assert ring_variances(P, G, 1024).sum() == pytest.approx(ref, rel=1e-6)


def test_same_seed_same_screen():
    a = evaluate_screen(sample_spectrum(P, G, seed=11), GRID)
    b = evaluate_screen(sample_spectrum(P, G, seed=11), GRID)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, evaluate_screen(sample_spectrum(P, G, seed=12), GRID))


@pytest.mark.parametrize("cells", [1, 7, 40])
def test_shift_translates_columns(cells):
    s = sample_spectrum(P, G, seed=5)
    base = evaluate_on_axes(s, (np.arange(256 + cells) - 128) * GRID.step, GRID.coords)
    shifted = evaluate_screen(s, GRID, shift=cells * GRID.step)
    np.testing.assert_allclose(shifted, base[:, cells:cells + 256], rtol=0, atol=1e-9)


def test_point_evaluation_matches_closed_form():
    s = sample_spectrum(P, G, seed=6, ring_count=16)
    x, y, shift = 0.12, -0.3, 0.05
    direct = np.sum(s.amplitude * np.cos(s.kx * (x + shift) + s.ky * y + s.phase_offset))
    assert evaluate_points(s, np.array([x]), np.array([y]), shift)[0] == pytest.approx(direct, rel=1e-12)


def test_ensemble_point_variance():
    """Single-point variance over 1000 seeds agrees with the slab variance within 3 sigma.

    The target is the variance of the slab phase, 4 pi^2 k^2 dz int kappa Phi_n:
    the 2-D phase spectrum 2 pi k^2 dz Phi_n integrated over the plane.
    """
    ref = oracles.slab_phase_variance(P.cn2, P.l0, P.L0, G.k, G.slab, P.kmin, P.kmax)
    vals = np.array(
        [evaluate_points(sample_spectrum(P, G, seed=i, ring_count=256), np.zeros(1), np.zeros(1))[0] for i in range(1000)]
    )
    est = np.mean(vals**2)
    se = np.std(vals**2, ddof=1) / math.sqrt(len(vals))
    assert abs(est - ref) < 3 * se


def test_rayleigh_amplitudes_keep_mean_square():
    ref = ring_variances(P, G, 64)
    amps = np.array([sample_spectrum(P, G, seed=i, ring_count=64, amplitude_law="rayleigh").amplitude for i in range(2000)])
    ratio = np.mean(amps**2, axis=0) / (2 * ref)
    assert np.all(np.abs(ratio - 1) < 0.15)


def _structure(screens, lags):
    out = np.zeros(len(lags))
    for phi in screens:
        for j, lag in enumerate(lags):
            out[j] += np.mean((phi[:, lag:] - phi[:, :-lag]) ** 2)
    return out / len(screens)


def test_structure_function_is_shift_invariant():
    lags = [10, 40]
    specs = [sample_spectrum(P, G, seed=100 + i, ring_count=256) for i in range(150)]
    d0 = _structure([evaluate_screen(s, GRID) for s in specs], lags)
    d1 = _structure([evaluate_screen(s, GRID, shift=3.7) for s in specs], lags)
    np.testing.assert_allclose(d1, d0, rtol=0.12)


def test_screen_set_positions_and_seeds():
    g = ChannelGeometry(808e-9, 1000.0, 4, 256, 0.005, 0.1)
    ss = sample_screen_set(P, g, seed=9, ring_count=32)
    assert len(ss) == 4
    np.testing.assert_allclose(ss.screen_positions, 250.0 * (np.arange(4) + 0.5))
    assert len({s.rng_seed for s in ss.screens}) == 4
    again = sample_screen_set(P, g, seed=9, ring_count=32)
    assert all(np.array_equal(a.kx, b.kx) for a, b in zip(ss.screens, again.screens))


@pytest.mark.parametrize("v, tau, s", [(10.0, 1e-3, 0.01), (5.0, 2e-3, 0.01), (10.0, 0.0, 0.0)])
def test_wind_shift(v, tau, s):
    assert wind_shift(v, tau) == pytest.approx(s, abs=1e-15)


@pytest.mark.parametrize("v, tau", [(-1.0, 1.0), (1.0, -1.0)])
def test_wind_shift_rejects_negative(v, tau):
    with pytest.raises(InvalidArgument):
        wind_shift(v, tau)
