import math

import numpy as np
import pytest

import oracles
from atmochan.bell import (
    OPTIMAL_ANGLES,
    DvExperiment,
    chsh_max_over_xi,
    chsh_parameter,
    correlation_given_eta,
    correlator,
    pattern_probabilities,
    source_weights,
)
from atmochan.errors import CutoffInsufficient, InvalidArgument, UndefinedStatistic
from atmochan.samples import SampleSet

TSIRELSON = 2 * math.sqrt(2)
IDEAL = DvExperiment(source="bell", noise_mean=0.0, deterministic_db=0.0, splitter_db=0.0)


def _samples(eta0, eta_s):
    return SampleSet.synthetic(np.column_stack([eta0, eta_s]), [0.0, 0.01])


PERFECT = _samples(np.ones(4), np.ones(4))


@pytest.mark.parametrize("ta, tb", [(0.0, 0.3), (0.4, 0.4)])
def test_ideal_singlet_correlation(ta, tb):
    for th_a, th_b in [(0.0, 0.0), (0.0, math.pi / 8), (0.3, 1.1), (math.pi / 4, 0.0)]:
        e = correlation_given_eta(IDEAL, 1.0, 1.0, (th_a, th_b))
        assert e == pytest.approx(-math.cos(2 * (th_a - th_b)), abs=1e-14)


def test_ideal_correlation_flips_sign_on_quarter_turn():
    for d in (0.1, 0.5, 1.3):
        e1 = correlation_given_eta(IDEAL, 1.0, 1.0, (d, 0.0))
        e2 = correlation_given_eta(IDEAL, 1.0, 1.0, (d + math.pi / 2, 0.0))
        assert e1 == pytest.approx(-e2, abs=1e-14)


def test_noise_only_gives_zero():
    exp = DvExperiment(source="bell", noise_mean=0.01)
    assert correlation_given_eta(exp, 0.0, 0.0, (0.0, math.pi / 8)) == pytest.approx(0.0, abs=1e-15)


def test_no_coincidences_is_undefined():
    with pytest.raises(UndefinedStatistic):
        correlation_given_eta(IDEAL, 0.0, 0.0, (0.0, 0.0))


@pytest.mark.parametrize("t, noise", [(1.0, 0.0), (0.3, 5e-4), (0.05, 0.02), (0.7, 0.1)])
def test_singlet_matches_closed_form(t, noise):
    exp = DvExperiment(source="bell", noise_mean=noise, deterministic_db=0.0, splitter_db=0.0)
    for th_a, th_b in [(0.0, math.pi / 8), (math.pi / 4, 3 * math.pi / 8), (0.2, 0.9)]:
        got = pattern_probabilities(exp, t, 0.8 * t, th_a, th_b)[0]
        ref = oracles.singlet_pattern_probabilities(t, 0.8 * t, th_a, th_b, noise)
        np.testing.assert_allclose(got, ref, rtol=0, atol=1e-12)
        assert correlator(got) == pytest.approx(oracles.squashed_correlator(ref), abs=1e-10)


@pytest.mark.parametrize(
    "xi, ta, tb, noise, cutoff",
    [(0.1, 1.0, 1.0, 0.0, 6), (0.1, 1.0, 1.0, 1e-3, 6), (0.3, 0.6, 0.8, 5e-4, 6), (0.2, 0.2, 0.9, 0.05, 5)],
)
def test_pdc_matches_fock_oracle(xi, ta, tb, noise, cutoff):
    exp = DvExperiment(source="pdc", xi=xi, noise_mean=noise, fock_cutoff=cutoff, deterministic_db=0.0, splitter_db=0.0)
    psi = oracles.pdc_state(xi, cutoff)
    for th_a, th_b in [(0.0, math.pi / 8), (math.pi / 4, 3 * math.pi / 8), (0.4, 1.0)]:
        got = pattern_probabilities(exp, ta, tb, th_a, th_b)[0]
        ref = oracles.fock_pattern_probabilities(psi, ta, tb, th_a, th_b, noise)
        np.testing.assert_allclose(got, ref, rtol=0, atol=1e-10)
        if noise or ta < 1:
            assert correlator(got) == pytest.approx(oracles.squashed_correlator(ref), abs=1e-8)


def test_pdc_cutoff_too_small():
    with pytest.raises(CutoffInsufficient) as info:
        source_weights(DvExperiment(source="pdc", xi=1.5, fock_cutoff=3))
    assert info.value.tail_mass > 1e-6


@pytest.mark.parametrize(
    "kwargs",
    [dict(source="ghz"), dict(noise_mean=-1.0), dict(source="pdc", fock_cutoff=1), dict(angles=(0, 1, 2)), dict(splitter_db=-3.0)],
)
def test_invalid_experiment(kwargs):
    with pytest.raises(InvalidArgument):
        DvExperiment(**kwargs)


def test_tsirelson_bound_for_ideal_singlet():
    v = chsh_parameter(IDEAL, PERFECT, 0.01)
    assert v.B == pytest.approx(TSIRELSON, abs=1e-12)
    assert v.stderr == pytest.approx(0.0, abs=1e-12)


def test_noise_dominated_channel():
    exp = DvExperiment(source="bell", noise_mean=0.01)
    assert chsh_parameter(exp, _samples(np.zeros(3), np.zeros(3)), 0.01).B == pytest.approx(0.0, abs=1e-12)
    assert chsh_parameter(exp, _samples(np.full(3, 1e-6), np.full(3, 1e-6)), 0.01).B < 0.01


def test_chsh_requires_samples():
    with pytest.raises(InvalidArgument):
        chsh_parameter(IDEAL, None, 0.0)


def test_b_decreases_with_noise():
    rng = np.random.default_rng(0)
    s = _samples(rng.uniform(0.2, 0.9, 50), rng.uniform(0.2, 0.9, 50))
    b = [chsh_parameter(DvExperiment(source="bell", noise_mean=n), s, 0.01, n_boot=0).B for n in (0, 1e-4, 5e-4, 2e-3, 1e-2)]
    assert np.all(np.diff(b) <= 1e-15)


def test_common_rotation_invariance():
    rng = np.random.default_rng(1)
    s = _samples(rng.uniform(0.1, 1, 20), rng.uniform(0.1, 1, 20))
    base = DvExperiment(source="bell", noise_mean=1e-3)
    b0 = chsh_parameter(base, s, 0.01, n_boot=0).B
    for phi in (0.2, 1.0, 2.5):
        rotated = DvExperiment(source="bell", noise_mean=1e-3, angles=tuple(a + phi for a in OPTIMAL_ANGLES))
        assert chsh_parameter(rotated, s, 0.01, n_boot=0).B == pytest.approx(b0, abs=1e-12)


def test_probabilities_are_averaged_before_ratios():
    eta = np.random.default_rng(2).uniform(0.05, 1.0, 10)
    exp = DvExperiment(source="pdc", xi=0.2, noise_mean=1e-3, fock_cutoff=8)
    s = _samples(eta, eta)
    got = chsh_parameter(exp, s, 0.0, n_boot=0)
    ta, tb = exp.side_efficiencies(eta, eta, 0.0)
    e = []
    for th_a, th_b in [(0, math.pi / 8), (0, 3 * math.pi / 8), (math.pi / 4, math.pi / 8), (math.pi / 4, 3 * math.pi / 8)]:
        per_record = [pattern_probabilities(exp, a, b, th_a, th_b)[0] for a, b in zip(ta, tb)]
        e.append(correlator(np.mean(per_record, axis=0)))
    assert got.B == pytest.approx(abs(e[0] - e[1] + e[2] + e[3]), abs=1e-13)
    # Averaging correlators instead would give a different answer.
    naive = np.mean([chsh_parameter(exp, _samples([x], [x]), 0.0, n_boot=0).B for x in eta])
    assert abs(naive - got.B) > 1e-6


def test_memory_decay_on_stored_arm():
    exp = DvExperiment(memory_decay_db_per_ms=3.0, wind_v=10.0)
    assert exp.delay(0.01) == pytest.approx(1e-3)
    ta, tb = exp.side_efficiencies(1.0, 1.0, 1e-3)
    assert ta / tb == pytest.approx(10 ** -0.3, rel=1e-14)
    late = DvExperiment(memory_decay_db_per_ms=3.0, stored_arm="late")
    ta, tb = late.side_efficiencies(1.0, 1.0, 1e-3)
    assert tb / ta == pytest.approx(10 ** -0.3, rel=1e-14)


def test_bootstrap_error_is_positive_for_spread_samples():
    rng = np.random.default_rng(3)
    s = _samples(rng.uniform(0, 1, 200), rng.uniform(0, 1, 200))
    v = chsh_parameter(DvExperiment(), s, 0.01, n_boot=50)
    assert v.stderr > 0
    assert all(abs(e) <= 1 for e in v.correlators)


def test_xi_optimum_approaches_single_pair_limit():
    exp = DvExperiment(source="pdc", noise_mean=0.0, deterministic_db=0.0, splitter_db=0.0, fock_cutoff=12)
    res = chsh_max_over_xi(exp, PERFECT, 0.01, [0.01, 0.05, 0.1, 0.2, 0.4])
    assert res.at_edge and res.xi_opt == 0.01
    assert np.all(np.diff(res.grid_values) < 0)
    assert res.B_max == pytest.approx(TSIRELSON, abs=1e-3)


def test_xi_optimum_with_noise_and_losses():
    rng = np.random.default_rng(4)
    s = _samples(rng.uniform(0.3, 0.9, 30), rng.uniform(0.3, 0.9, 30))
    exp = DvExperiment(source="pdc", noise_mean=5e-4)
    grid = [0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.45]
    res = chsh_max_over_xi(exp, s, 0.01, grid)
    assert not res.at_edge
    assert res.B_max < TSIRELSON
    assert res.B_max >= res.grid_values.max()
    assert 0.05 < res.xi_opt < 0.15
    # No point of a fine local scan beats the refined optimum.
    fine = np.linspace(res.xi_opt - 0.01, res.xi_opt + 0.01, 41)
    best = max(chsh_parameter(exp, s, 0.01, xi=x, n_boot=0).B for x in fine)
    assert best <= res.B_max + 1e-9
    assert chsh_parameter(exp, s, 0.01, xi=res.xi_opt, n_boot=0).B == pytest.approx(res.B_max, abs=1e-14)


@pytest.mark.parametrize("grid", [[0.1, 0.2], [0.0, 0.1, 0.2]])
def test_xi_grid_validation(grid):
    with pytest.raises(InvalidArgument):
        chsh_max_over_xi(DvExperiment(source="pdc"), PERFECT, 0.01, grid)


def test_xi_optimization_needs_pdc():
    with pytest.raises(InvalidArgument):
        chsh_max_over_xi(DvExperiment(source="bell"), PERFECT, 0.01, [0.1, 0.2, 0.3])
