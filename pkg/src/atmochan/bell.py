"""CHSH tests with polarization-entangled pulse pairs over a fluctuating channel.

Measurement model: each side rotates the polarization by its analyzer angle
and splits it on a polarizing beam splitter into two on-off detectors ('+'
and '-'). Every detector has an independent Poissonian noise click with
probability ``p = 1 - exp(-noise_mean)``. Photons reach the detectors with
the side's total efficiency ``t`` (channel transmittance times fixed losses
times memory efficiency), so a detector seeing ``n`` photons stays dark with
probability ``(1 - p) (1 - t)^n``.

Events with no click on one side are discarded. A side with both detectors
firing is squashed to a uniformly random outcome, so it contributes zero to
the correlator on average.

Click-pattern probabilities come from inclusion-exclusion over the no-click
generating function ``G(S) = (1-p)^|S| <prod_{d in S} (1 - t_d)^{n_d}>``.
For a fixed source and analyzer setting, ``G`` is a bivariate polynomial in
``(1 - t_A, 1 - t_B)`` whose coefficients are computed once; averaging over
sampled transmittance pairs then costs one small matrix product per record.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from scipy import optimize
from scipy.special import comb

from .errors import CutoffInsufficient, InvalidArgument, UndefinedStatistic
from .samples import SampleSet

OPTIMAL_ANGLES = (0.0, math.pi / 4, math.pi / 8, 3 * math.pi / 8)
TRUNCATION_TOL = 1e-6

# Detector bits: A+, A-, B+, B-.
_A_PLUS, _A_MINUS, _B_PLUS, _B_MINUS = 1, 2, 4, 8


@dataclass(frozen=True)
class DvExperiment:
    source: str = "bell"
    xi: float = 0.0
    angles: tuple = OPTIMAL_ANGLES
    noise_mean: float = 5e-4
    deterministic_db: float = 9.42
    splitter_db: float = 3.0
    memory_decay_db_per_ms: float = 0.0
    wind_v: float = 10.0
    fock_cutoff: int = 14
    stored_arm: str = "early"

    def __post_init__(self):
        if self.source not in ("bell", "pdc"):
            raise InvalidArgument(f"unknown source {self.source!r}")
        if self.noise_mean < 0:
            raise InvalidArgument("noise_mean must be >= 0")
        if self.source == "pdc" and self.fock_cutoff < 2:
            raise InvalidArgument("PDC needs fock_cutoff >= 2")
        if len(self.angles) != 4 or not all(math.isfinite(a) for a in self.angles):
            raise InvalidArgument("need four finite analyzer angles")
        if self.stored_arm not in ("early", "late"):
            raise InvalidArgument("stored_arm must be 'early' or 'late'")
        if min(self.deterministic_db, self.splitter_db, self.memory_decay_db_per_ms) < 0:
            raise InvalidArgument("losses must be non-negative")

    @property
    def fixed_transmittance(self) -> float:
        return 10.0 ** (-(self.deterministic_db + self.splitter_db) / 10.0)

    def memory_efficiency(self, tau: float) -> float:
        """Memory efficiency after storing for ``tau`` seconds."""
        return 10.0 ** (-self.memory_decay_db_per_ms * (tau * 1e3) / 10.0)

    def delay(self, shift: float) -> float:
        """Pulse separation tau = s / v in seconds."""
        if shift == 0:
            return 0.0
        if self.wind_v <= 0:
            raise InvalidArgument("wind speed must be positive for non-zero shifts")
        return shift / self.wind_v

    def side_efficiencies(self, eta0, eta_tau, tau):
        t_fix = self.fixed_transmittance
        mem = self.memory_efficiency(tau)
        ta = np.asarray(eta0, dtype=float) * t_fix
        tb = np.asarray(eta_tau, dtype=float) * t_fix
        if self.stored_arm == "early":
            ta = ta * mem
        else:
            tb = tb * mem
        return ta, tb


def rotation_rep(n: int, theta: float) -> np.ndarray:
    """Matrix <k, n-k|_rot |j, n-j>_hv of a polarization rotation on n photons.

    Rotated modes: a_+ = cos(theta) a_h + sin(theta) a_v,
    a_- = -sin(theta) a_h + cos(theta) a_v.
    """
    c, s = math.cos(theta), math.sin(theta)
    r = np.zeros((n + 1, n + 1))
    for j in range(n + 1):
        norm = 1.0 / math.sqrt(math.factorial(j) * math.factorial(n - j))
        for p in range(j + 1):
            cp = comb(j, p, exact=True) * c**p * (-s) ** (j - p)
            for q in range(n - j + 1):
                k = p + q
                cq = comb(n - j, q, exact=True) * s**q * c ** (n - j - q)
                r[k, j] += cp * cq * norm * math.sqrt(math.factorial(k) * math.factorial(n - k))
    return r


def source_weights(exp: DvExperiment, xi: float | None = None) -> np.ndarray:
    """Probability of the n-pair sector |Phi_n>, n = 0..cutoff."""
    if exp.source == "bell":
        w = np.zeros(2)
        w[1] = 1.0
        return w
    xi = exp.xi if xi is None else xi
    if xi < 0:
        raise InvalidArgument("squeezing parameter must be >= 0")
    n = np.arange(exp.fock_cutoff + 1)
    w = (n + 1) * math.tanh(xi) ** (2 * n) / math.cosh(xi) ** 4
    if w.sum() < 1.0 - TRUNCATION_TOL:
        raise CutoffInsufficient(
            f"fock_cutoff={exp.fock_cutoff} keeps only {w.sum():.8f} of the PDC norm at xi={xi}",
            tail_mass=1.0 - w.sum(),
        )
    # Sectors beyond this point change probabilities by < 1e-15.
    keep = np.flatnonzero(w > 1e-16 * w.max())
    return w[: keep[-1] + 1]


def _sector_distribution(n: int, theta_a: float, theta_b: float) -> np.ndarray:
    """Joint distribution of (+ photons at A, + photons at B) for |Phi_n>."""
    d = np.zeros((n + 1, n + 1))
    for m in range(n + 1):
        d[n - m, m] = (-1) ** m / math.sqrt(n + 1)
    amp = rotation_rep(n, theta_a) @ d @ rotation_rep(n, theta_b).T
    return amp**2


@functools.lru_cache(maxsize=1024)
def _sector_coefficients(n: int, theta_a: float, theta_b: float) -> np.ndarray:
    """Contribution C[sa, sb, a, b] of the n-pair sector, unweighted.

    Side subset codes: 0 none, 1 '+' only, 2 '-' only, 3 both detectors;
    (a, b) are the powers of (1 - t_A) and (1 - t_B).
    """
    coef = np.zeros((4, 4, n + 1, n + 1))
    dist = _sector_distribution(n, theta_a, theta_b)
    k = np.arange(n + 1)
    exps = [np.zeros(n + 1, int), k, n - k, np.full(n + 1, n)]
    for sa in range(4):
        for sb in range(4):
            np.add.at(coef[sa, sb], (exps[sa][:, None], exps[sb][None, :]), dist)
    return coef


def _poly_coefficients(weights, theta_a: float, theta_b: float) -> np.ndarray:
    """Source-weighted sum of the sector coefficients."""
    nmax = len(weights) - 1
    coef = np.zeros((4, 4, nmax + 1, nmax + 1))
    for n, w in enumerate(weights):
        if w != 0:
            coef[:, :, : n + 1, : n + 1] += w * _sector_coefficients(n, theta_a, theta_b)
    return coef


def _popcount(x):
    return bin(x).count("1")


def pattern_probabilities(exp: DvExperiment, ta, tb, theta_a, theta_b, xi=None) -> np.ndarray:
    """Probabilities of the 16 click patterns, shape (..., 16).

    Pattern index bits: 1 = A+, 2 = A-, 4 = B+, 8 = B-.
    """
    w = source_weights(exp, xi)
    coef = _poly_coefficients(w, float(theta_a), float(theta_b))
    nmax = len(w) - 1
    ta = np.atleast_1d(np.asarray(ta, dtype=float))
    tb = np.atleast_1d(np.asarray(tb, dtype=float))
    xa = (1.0 - ta)[:, None] ** np.arange(nmax + 1)
    xb = (1.0 - tb)[:, None] ** np.arange(nmax + 1)
    dark = math.exp(-exp.noise_mean)
    g = np.empty((len(ta), 16))
    for subset in range(16):
        sa = subset & 3
        sb = (subset >> 2) & 3
        g[:, subset] = dark ** _popcount(subset) * np.einsum("ia,ab,ib->i", xa, coef[sa, sb], xb)
    probs = np.empty_like(g)
    for clicked in range(16):
        dark_set = 15 & ~clicked
        total = 0.0
        t = clicked
        while True:
            # Iterate over all subsets t of the clicked set.
            total = total + (-1) ** _popcount(t) * g[:, dark_set | t]
            if t == 0:
                break
            t = (t - 1) & clicked
        probs[:, clicked] = total
    return probs


def _side_value(bits_plus, bits_minus, pattern):
    plus, minus = bool(pattern & bits_plus), bool(pattern & bits_minus)
    if plus and minus:
        return 0.0
    return 1.0 if plus else -1.0


_COUNTED = np.array([bool(c & 3) and bool(c & 12) for c in range(16)])
# Events without a click on one side are discarded, so they carry no value.
_VALUE = np.array(
    [
        _side_value(_A_PLUS, _A_MINUS, c) * _side_value(_B_PLUS, _B_MINUS, c) if _COUNTED[c] else 0.0
        for c in range(16)
    ]
)


def correlator(probs: np.ndarray) -> np.ndarray:
    """Squashed coincidence correlator from pattern probabilities (..., 16)."""
    den = probs[..., _COUNTED].sum(axis=-1)
    if np.any(den <= 0):
        raise UndefinedStatistic("no coincidences: correlator undefined")
    return (probs @ _VALUE) / den


def correlation_given_eta(exp: DvExperiment, eta0, eta_tau, angles, tau: float = 0.0, xi=None):
    """Correlator E(theta_A, theta_B) for fixed channel transmittances."""
    ta, tb = exp.side_efficiencies(eta0, eta_tau, tau)
    p = pattern_probabilities(exp, ta, tb, angles[0], angles[1], xi)
    e = correlator(p)
    return float(e[0]) if np.ndim(eta0) == 0 and np.ndim(eta_tau) == 0 else e


def _settings(exp):
    a, a2, b, b2 = exp.angles
    return ((a, b), (a, b2), (a2, b), (a2, b2))


_CHSH_SIGNS = np.array([1.0, -1.0, 1.0, 1.0])


class ChshValue(NamedTuple):
    B: float
    stderr: float
    correlators: tuple


def _averaged_probs(exp, eta0, eta_s, tau, xi):
    ta, tb = exp.side_efficiencies(eta0, eta_s, tau)
    return np.stack([pattern_probabilities(exp, ta, tb, th_a, th_b, xi) for th_a, th_b in _settings(exp)])


def chsh_from_probs(mean_probs: np.ndarray) -> tuple:
    e = correlator(mean_probs)
    return abs(float(_CHSH_SIGNS @ e)), e


def chsh_parameter(
    exp: DvExperiment, samples: SampleSet, shift: float, xi=None, n_boot: int = 200, seed: int = 0
) -> ChshValue:
    """CHSH value B = |E(a,b) - E(a,b') + E(a',b) + E(a',b')| over the sampled two-time PDT.

    Click-pattern probabilities, not correlators, are averaged over the
    records. The standard error comes from a bootstrap over records.
    """
    if samples is None or len(samples) == 0:
        raise InvalidArgument("empty sample set")
    eta0, eta_s = samples.eta0, samples.column(shift)
    probs = _averaged_probs(exp, eta0, eta_s, exp.delay(shift), xi)  # (4, N, 16)
    b, e = chsh_from_probs(probs.mean(axis=1))
    se = 0.0
    n = probs.shape[1]
    if n_boot and n > 1:
        rng = np.random.default_rng(seed)
        flat = probs.transpose(1, 0, 2).reshape(n, -1)
        reps = []
        for _ in range(n_boot):
            weights = np.bincount(rng.integers(0, n, n), minlength=n) / n
            reps.append(chsh_from_probs((weights @ flat).reshape(4, 16))[0])
        se = float(np.std(reps, ddof=1))
    return ChshValue(b, se, tuple(float(x) for x in e))


class ChshMax(NamedTuple):
    B_max: float
    xi_opt: float
    at_edge: bool
    grid_values: np.ndarray


def chsh_max_over_xi(exp: DvExperiment, samples: SampleSet, shift: float, xi_grid) -> ChshMax:
    """Maximize B over the PDC squeezing parameter: coarse grid, then bounded Brent search."""
    if exp.source != "pdc":
        raise InvalidArgument("squeezing optimization applies to the PDC source")
    grid = np.asarray(sorted(xi_grid), dtype=float)
    if len(grid) < 3 or grid[0] <= 0:
        raise InvalidArgument("xi grid needs at least three positive points")
    eta0, eta_s = samples.eta0, samples.column(shift)
    tau = exp.delay(shift)

    def b_of(xi):
        probs = _averaged_probs(exp, eta0, eta_s, tau, xi)
        return chsh_from_probs(probs.mean(axis=1))[0]

    vals = np.array([b_of(x) for x in grid])
    i = int(np.argmax(vals))
    if i == 0 or i == len(grid) - 1:
        return ChshMax(float(vals[i]), float(grid[i]), True, vals)
    res = optimize.minimize_scalar(
        lambda x: -b_of(x),
        bounds=(grid[i - 1], grid[i + 1]),
        method="bounded",
        options={"xatol": 1e-6},
    )
    if -res.fun >= vals[i]:
        return ChshMax(float(-res.fun), float(res.x), False, vals)
    return ChshMax(float(vals[i]), float(grid[i]), False, vals)


def with_source(exp: DvExperiment, **changes) -> DvExperiment:
    return replace(exp, **changes)
