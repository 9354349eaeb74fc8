import numpy as np
import pytest

from atmochan.errors import InvalidArgument
from atmochan.samples import SampleSet, read_array, read_binary, read_csv, write_array, write_binary, write_csv


@pytest.fixture
def sample_set():
    rng = np.random.default_rng(2)
    eta = rng.random((37, 4))
    eta[3, 1] = 0.1 + 0.2  # a value without a short decimal form
    flags = np.zeros(37, dtype=bool)
    flags[[4, 20]] = True
    seeds = rng.integers(0, 2**63, 37, dtype=np.uint64) * np.uint64(2)
    return SampleSet([0.0, 0.005, 0.01, 0.0333], np.arange(37), seeds, eta, flags, {"note": "x", "cn2": 1e-15})


def test_csv_round_trip_is_exact(sample_set, tmp_path):
    back = read_csv(write_csv(sample_set, tmp_path / "s.csv"))
    assert back.equals(sample_set)


def test_binary_round_trip_is_exact(sample_set, tmp_path):
    back = read_binary(write_binary(sample_set, tmp_path / "s"))
    assert back.equals(sample_set)


def test_csv_rows_follow_documented_layout(sample_set, tmp_path):
    lines = write_csv(sample_set, tmp_path / "s.csv").read_text().splitlines()
    body = [ln for ln in lines if not ln.startswith("#")]
    assert body[0] == "realization_id,shift_m,eta"
    assert len(body) == 1 + 37 * 4
    assert body[2].split(",")[:2] == ["0", "0.005"]


def test_complex_array_round_trip(tmp_path):
    a = np.random.default_rng(0).normal(size=(8, 8)) * (1 + 2j)
    back, side = read_array(write_array(a, tmp_path / "f", grid_step=1e-3))
    assert np.array_equal(back, a)
    assert side["grid_step"] == 1e-3


@pytest.mark.parametrize(
    "shifts, ids, eta",
    [
        ([0.1, 0.2], [0, 1], [[0.5, 0.5], [0.5, 0.5]]),  # shifts[0] != 0
        ([0.0, 0.0], [0, 1], [[0.5, 0.5], [0.5, 0.5]]),  # not strictly increasing
        ([0.0, 0.1], [0, 0], [[0.5, 0.5], [0.5, 0.5]]),  # duplicate ids
        ([0.0, 0.1], [0, 1], [[0.5, 1.5], [0.5, 0.5]]),  # eta > 1
        ([0.0, 0.1], [0, 1], [[0.5, np.nan], [0.5, 0.5]]),
        ([0.0, 0.1], [0, 1], [[0.5, 0.5]]),  # shape mismatch
        ([0.0], [], np.zeros((0, 1))),  # no records
    ],
)
def test_invariants_enforced(shifts, ids, eta):
    with pytest.raises(InvalidArgument):
        SampleSet(shifts, ids, np.zeros(len(ids), dtype=np.uint64), eta)


def test_single_shift_sampler():
    s = SampleSet.synthetic([[0.2], [0.4]], [0.0])
    assert np.array_equal(s.eta0, [0.2, 0.4])


def test_unknown_shift(sample_set):
    with pytest.raises(InvalidArgument):
        sample_set.column(0.5)
