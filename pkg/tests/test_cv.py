import math
from types import SimpleNamespace

import numpy as np
import pytest
from scipy import optimize

import oracles
from atmochan.cv import DeterministicLosses, simon_certifier, squeezing_db, threshold_shift
from atmochan.errors import InvalidArgument


def _moments(mean0, mean_s, cross, shift=0.0):
    return SimpleNamespace(mean0=mean0, mean_s=mean_s, cross=cross, shift=shift)


PERFECT = _moments(1.0, 1.0, 1.0)


def test_lossless_perfect_channel():
    v = simon_certifier(PERFECT, 1.0)
    assert float(v.W) == pytest.approx(-math.sinh(1) ** 2 * math.cosh(1) ** 2, rel=1e-14)
    assert float(v.bracket1) == pytest.approx(-math.sinh(1) ** 2, rel=1e-14)
    assert float(v.bracket2) == pytest.approx(math.cosh(1) ** 2, rel=1e-14)


@pytest.mark.parametrize("m", [PERFECT, _moments(0.3, 0.1, 0.05), _moments(0.0, 0.0, 0.0)])
def test_zero_squeezing_gives_zero(m):
    assert float(simon_certifier(m, 0.0).W) == 0.0


@pytest.mark.parametrize("xi", [-0.1, math.nan, math.inf])
def test_rejects_bad_squeezing(xi):
    with pytest.raises(InvalidArgument):
        simon_certifier(PERFECT, xi)


def test_squeezing_in_db():
    assert squeezing_db(2.0) == pytest.approx(17.37, abs=0.01)


@pytest.mark.parametrize("rho", [0.0, 0.4, 0.9])
@pytest.mark.parametrize("xi", [0.3, 1.0, 2.0])
def test_beta_moments_match_scalar_oracle(rho, xi):
    rng = np.random.default_rng(int(rho * 10))
    z = rng.standard_normal((5000, 2))
    z[:, 1] = rho * z[:, 0] + math.sqrt(1 - rho * rho) * z[:, 1]
    from scipy import stats

    eta = stats.beta(2, 5).ppf(stats.norm.cdf(z))
    m = _moments(eta[:, 0].mean(), eta[:, 1].mean(), np.sqrt(eta[:, 0] * eta[:, 1]).mean())
    assert float(simon_certifier(m, xi).W) == pytest.approx(oracles.simon_w(m.mean0, m.mean_s, m.cross, xi), rel=1e-12)


def test_losses_fold_into_moments():
    losses = DeterministicLosses(0.1, 50.0, 1.0, 2.0, 1.0)
    m = _moments(0.4, 0.3, 0.3)
    t0, tt = 10 ** (-0.6), 10 ** (-0.9)
    ref = oracles.simon_w(t0 * 0.4, tt * 0.3, math.sqrt(t0 * tt) * 0.3, 1.2)
    assert float(simon_certifier(m, 1.2, losses).W) == pytest.approx(ref, rel=1e-12)
    assert losses.t_early == pytest.approx(t0, rel=1e-14)


def test_negative_losses_rejected():
    with pytest.raises(InvalidArgument):
        DeterministicLosses(optics_db=-1.0)


def test_deterministic_losses_keep_the_sign():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        m0, ms = rng.uniform(0.01, 1, 2)
        cross = rng.uniform(0, math.sqrt(m0 * ms))
        xi = rng.uniform(0.01, 3)
        losses = DeterministicLosses(optics_db=rng.uniform(0, 20), memory_write_db=rng.uniform(0, 10))
        a = simon_certifier(_moments(m0, ms, cross), xi)
        b = simon_certifier(_moments(m0, ms, cross), xi, losses)
        assert np.sign(a.bracket1) == np.sign(b.bracket1)
        if a.second_positive and b.second_positive:
            assert np.sign(a.W) == np.sign(b.W)


def test_fully_correlated_transmittances_are_entangled():
    eta = np.random.default_rng(1).beta(3, 2, 2000)
    m = _moments(eta.mean(), eta.mean(), np.sqrt(eta * eta).mean())
    for xi in (0.1, 0.5, 1.0, 3.0):
        v = simon_certifier(m, xi)
        assert v.second_positive and float(v.W) < 0


def test_finite_up_to_large_squeezing():
    assert np.isfinite(simon_certifier(_moments(0.5, 0.5, 0.4), 5.0).W)


def _exponential_table(a, mean=0.5, points=401, span=8.0):
    s = np.linspace(0, span * a, points)
    return SimpleNamespace(shift=s, mean0=np.full_like(s, mean), mean_s=np.full_like(s, mean), cross=mean * np.exp(-s / a))


@pytest.mark.parametrize("a", [0.01, 0.05])
@pytest.mark.parametrize("xi", [0.25, 0.5, 1.0, 2.0])
def test_threshold_matches_scalar_root(a, xi):
    table = _exponential_table(a)
    th = threshold_shift(table, xi)
    assert th.status == "crossing"
    root = optimize.brentq(lambda s: oracles.simon_w(0.5, 0.5, 0.5 * math.exp(-s / a), xi), 1e-12, 8 * a, xtol=1e-15)
    assert root == pytest.approx(-a * math.log(math.tanh(xi)), rel=1e-10)
    assert abs(th.s_th - root) <= 1e-6 * a
    assert th.cell[0] <= th.s_th <= th.cell[1]


def test_threshold_decreases_with_squeezing():
    table = _exponential_table(0.05)
    s = [threshold_shift(table, xi).s_th for xi in (0.5, 1.0, 2.0)]
    assert s[0] > s[1] > s[2]


def test_threshold_degenerate_and_one_sided_statuses():
    table = _exponential_table(0.05)
    assert threshold_shift(table, 0.0).status == "degenerate"
    flat = SimpleNamespace(shift=table.shift, mean0=table.mean0, mean_s=table.mean_s, cross=np.full_like(table.shift, 0.5))
    th = threshold_shift(flat, 1.0)
    assert th.status == "entangled throughout" and th.w_max < 0
    dead = SimpleNamespace(shift=table.shift, mean0=table.mean0, mean_s=table.mean_s, cross=np.zeros_like(table.shift))
    assert threshold_shift(dead, 1.0).status == "never entangled"
