import json
import logging

import numpy as np
import pytest

from atmochan.errors import InvalidArgument
from atmochan.montecarlo import MonteCarloConfig, realization_seed, run_monte_carlo, simulate
from atmochan.turbulence import ChannelGeometry, TurbulenceParams


def _cfg(n=6, shifts=(0.0, 0.01, 0.03), **kw):
    geom = ChannelGeometry(808e-9, 3000.0, 2, 64, 4e-3, 0.03, w0=0.03, aperture_radii=(0.03, 0.015))
    return MonteCarloConfig(TurbulenceParams(5e-15, 5e-3, 20.0), geom, shifts, n, master_seed=3, ring_count=32, **kw)


@pytest.fixture(scope="module")
def reference():
    return simulate(_cfg())


def test_shape_and_meta(reference):
    assert len(reference) == 2
    big, small = reference
    assert big.eta.shape == (6, 3)
    assert np.all(small.eta <= big.eta + 1e-15)
    assert big.meta["aperture_radius"] == 0.03
    assert big.meta["master_seed"] == 3
    assert "version" in big.meta and "turbulence" in big.meta


def test_identical_seed_is_bit_identical(reference):
    again = simulate(_cfg())
    assert all(a.equals(b) for a, b in zip(reference, again))


def test_different_seed_differs(reference):
    other = simulate(MonteCarloConfig(**{**_cfg().__dict__, "master_seed": 4}))
    assert not np.array_equal(other[0].eta, reference[0].eta)


def test_seed_rule_is_documented_splitting():
    expected = int(np.random.SeedSequence([3, 5]).generate_state(1, np.uint64)[0])
    assert realization_seed(3, 5) == expected


def test_single_shift_sampler():
    s = run_monte_carlo(_cfg(n=2, shifts=(0.0,)))
    assert s.eta.shape == (2, 1)


def test_worker_count_does_not_change_results(reference):
    parallel = simulate(_cfg(), threads=2)
    assert all(a.equals(b) for a, b in zip(reference, parallel))


def test_resume_after_interruption(reference, tmp_path):
    ck = tmp_path / "ck.jsonl"
    assert simulate(_cfg(), checkpoint=ck, stop_after=4) is None
    calls = []
    resumed = simulate(_cfg(), checkpoint=ck, progress=lambda done, n: calls.append(done))
    assert calls == [5, 6]  # only the two missing realizations ran
    assert all(a.equals(b) for a, b in zip(reference, resumed))


def test_truncated_checkpoint_line_is_ignored(reference, tmp_path):
    ck = tmp_path / "ck.jsonl"
    simulate(_cfg(), checkpoint=ck, stop_after=3)
    with open(ck, "a") as fh:
        fh.write('{"id": 3, "seed": 1, "et')
    resumed = simulate(_cfg(), checkpoint=ck)
    assert all(a.equals(b) for a, b in zip(reference, resumed))


def test_checkpoint_of_other_config_is_rejected(tmp_path):
    ck = tmp_path / "ck.jsonl"
    ck.write_text(json.dumps({"config_hash": "deadbeef"}) + "\n")
    with pytest.raises(InvalidArgument):
        simulate(_cfg(), checkpoint=ck)


@pytest.mark.parametrize("shifts", [(), (0.1,), (0.0, 0.0), (0.0, 0.2, 0.1)])
def test_bad_shift_lists(shifts):
    with pytest.raises(InvalidArgument):
        _cfg(shifts=shifts)


def test_zero_samples_rejected():
    with pytest.raises(InvalidArgument):
        _cfg(n=0)


def test_flagged_records_raise_warning(caplog):
    geom = ChannelGeometry(808e-9, 20_000.0, 2, 64, 2e-3, 0.05, w0=0.01)
    cfg = MonteCarloConfig(TurbulenceParams(1e-16, 5e-3, 20.0), geom, (0.0,), 2, ring_count=8)
    with caplog.at_level(logging.WARNING):
        s = run_monte_carlo(cfg)
    assert s.flags.all()
    assert s.meta["warnings"] and "aliasing" in caplog.text
