"""Photocounting nonclassicality of an amplitude-squeezed coherent state.

Everything is done in the Fock basis: the input photon-number distribution,
binomial loss averaged over the selected transmittance records, the click
POVM of an array of ``N`` on-off detectors, Mandel Q, the binomial Q_N and a
linear-programming witness built from the click-statistics inequalities.

Squeezing convention: ``S(xi) = exp(xi (a^2 - a^dag^2) / 2)`` so that
``xi > 0`` squeezes the amplitude quadrature of a real displacement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import optimize, special, stats

from .errors import CutoffInsufficient, EmptySelection, InvalidArgument, NumericalGuard, UndefinedStatistic
from .samples import SampleSet

TAIL_TOLERANCE = 1e-10
GRID_POINTS = 400
GRID_FLOOR = 1e-4
PLATEAU = 1e-6  # Pi(N | A_max) must exceed 1 - PLATEAU
SUP_TOLERANCE = 1e-9
DOUBLING_TOLERANCE = 1e-6
_CHUNK = 4096


@dataclass(frozen=True)
class SqueezedCoherentState:
    """D(alpha0) S(xi) |0> with real alpha0."""

    alpha0: float
    xi: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha0) and math.isfinite(self.xi)):
            raise InvalidArgument("alpha0 and xi must be finite")

    @property
    def mean_photon_number(self) -> float:
        return self.alpha0**2 + math.sinh(self.xi) ** 2

    def auto_cutoff(self) -> int:
        """Cutoff that keeps the tail below TAIL_TOLERANCE, with margin."""
        n = self.mean_photon_number
        spread = math.sqrt(n * math.exp(2 * abs(self.xi)) + 2 * math.sinh(2 * self.xi) ** 2) + 1.0
        return int(math.ceil(n + 14 * spread + 20))


@dataclass(frozen=True)
class ClickDetector:
    """Array of ``N`` on-off detectors fed by a balanced splitter."""

    N: int
    fock_cutoff: int

    def __post_init__(self):
        if self.N < 1 or self.fock_cutoff < 0:
            raise InvalidArgument("need N >= 1 and a non-negative cutoff")

    def povm(self) -> np.ndarray:
        return click_povm_fock(self.N, self.fock_cutoff)


def input_pnd(state: SqueezedCoherentState, cutoff: int | None = None) -> np.ndarray:
    """Photon-number distribution p(m), m = 0..cutoff, of the input state.

    The amplitudes obey ``cosh(xi) sqrt(n+1) c[n+1] + sinh(xi) sqrt(n) c[n-1] =
    alpha0 e^xi c[n]`` (the state is annihilated by the transformed mode
    operator) starting from ``c[0] = exp(-alpha0^2 (1 + tanh xi) / 2) / sqrt(cosh xi)``.

    Raises
    ------
    CutoffInsufficient
        If more than 1e-10 of the probability lies above ``cutoff``.
    """
    if cutoff is None:
        cutoff = state.auto_cutoff()
    if cutoff < 0:
        raise InvalidArgument("cutoff must be non-negative")
    a, r = state.alpha0, state.xi
    ch, sh = math.cosh(r), math.sinh(r)
    c = np.zeros(cutoff + 1)
    c[0] = math.exp(-0.5 * a * a * (1.0 + math.tanh(r))) / math.sqrt(ch)
    rhs = a * math.exp(r)
    for n in range(cutoff):
        prev = sh * math.sqrt(n) * c[n - 1] if n else 0.0
        c[n + 1] = (rhs * c[n] - prev) / (ch * math.sqrt(n + 1))
    p = c * c
    tail = 1.0 - float(p.sum())
    if tail > TAIL_TOLERANCE:
        raise CutoffInsufficient(f"cutoff {cutoff} leaves tail mass {tail:.3g}", tail_mass=tail)
    return p


def _loss_matrix(eta, size: int) -> np.ndarray:
    """B[..., m, n] = C(n, m) eta^m (1 - eta)^(n - m), for every eta given."""
    n = np.arange(size)
    eta = np.asarray(eta, dtype=float)[..., None, None]
    return stats.binom.pmf(n[:, None], n[None, :], eta)


def _lossy_rows(p_in: np.ndarray, etas: np.ndarray) -> np.ndarray:
    """Output statistics for many transmittances at once, shape (len(etas), len(p_in)).

    Uses p_out(m) = eta^m sum_j C(m+j, m) p_in(m+j) (1 - eta)^j: one matrix
    product per chunk, and every term is non-negative so nothing cancels.
    """
    size = len(p_in)
    m = np.arange(size)
    total = m[:, None] + m[None, :]  # m + j
    inside = total < size
    coef = np.zeros((size, size))
    coef[inside] = special.comb(total[inside], m[:, None].repeat(size, 1)[inside]) * p_in[total[inside]]
    out = np.empty((len(etas), size))
    for start in range(0, len(etas), _CHUNK):
        e = etas[start:start + _CHUNK, None]
        out[start:start + _CHUNK] = e**m * ((1.0 - e) ** m @ coef.T)
    return out


def lossy_pnd(p_in, eta: float) -> np.ndarray:
    """Number statistics after a beam splitter of transmittance ``eta``."""
    if not 0.0 <= eta <= 1.0:
        raise InvalidArgument(f"eta must lie in [0, 1], got {eta}")
    p_in = np.asarray(p_in, dtype=float)
    return _loss_matrix(eta, len(p_in)) @ p_in


def _selected(samples: SampleSet, eta_min: float, shift: float, t_det: float) -> np.ndarray:
    if not 0.0 <= t_det <= 1.0:
        raise InvalidArgument("deterministic transmittance must lie in [0, 1]")
    if not 0.0 <= eta_min < 1.0:
        raise InvalidArgument(f"eta_min must lie in [0, 1), got {eta_min}")
    keep = samples.eta0 >= eta_min
    if not keep.any():
        raise EmptySelection(f"no record has eta_0 >= {eta_min}", survivors=0)
    return t_det * samples.column(shift)[keep]


def selected_pnd(state_or_p, samples: SampleSet, eta_min: float, shift: float, t_det: float = 1.0) -> np.ndarray:
    """Photon statistics at the receiver averaged over the selected records.

    ``state_or_p`` is a SqueezedCoherentState or an input distribution.
    """
    p_in = input_pnd(state_or_p) if isinstance(state_or_p, SqueezedCoherentState) else np.asarray(state_or_p, float)
    etas = _selected(samples, eta_min, shift, t_det)
    out = _lossy_rows(p_in, etas).mean(axis=0)
    return out / out.sum()


def _mean_var(p):
    p = np.asarray(p, dtype=float)
    p = p / p.sum()
    k = np.arange(len(p))
    mean = float(k @ p)
    return mean, float(((k - mean) ** 2) @ p)


def mandel_q(p) -> float:
    """Q = Var(n) / <n> - 1."""
    mean, var = _mean_var(p)
    if mean <= 0:
        raise UndefinedStatistic("Mandel Q is undefined for zero mean photon number")
    return var / mean - 1.0


def click_povm_fock(N: int, cutoff: int) -> np.ndarray:
    """Pi(n | m): probability that exactly ``n`` of ``N`` detectors click for ``m`` photons.

    Built with the occupancy recursion (each photon lands on a uniformly
    random detector), which equals the alternating-sum formula but stays
    in [0, 1] without cancellation.
    """
    if N < 1:
        raise InvalidArgument("N must be >= 1")
    if cutoff < 0:
        raise InvalidArgument("cutoff must be non-negative")
    out = np.zeros((N + 1, cutoff + 1))
    col = np.zeros(N + 1)
    col[0] = 1.0
    out[:, 0] = col
    n = np.arange(N + 1)
    stay, move = n / N, (N - n + 1) / N
    for m in range(1, cutoff + 1):
        new = col * stay
        new[1:] += col[:-1] * move[1:]
        col = new
        out[:, m] = col
    return out


def coherent_click_povm(N: int, intensity) -> np.ndarray:
    """Pi(n | alpha) for coherent light, shape (N+1, len(intensity))."""
    a = np.atleast_1d(np.asarray(intensity, dtype=float))
    x = -np.expm1(-a / N)
    n = np.arange(N + 1)[:, None]
    return stats.binom.pmf(n, N, x[None, :])


def click_distribution(p, N: int) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    out = click_povm_fock(N, len(p) - 1) @ p
    return out / out.sum()


def binomial_q(P, N: int) -> float:
    """Q_N = N Var(c) / (<c> (N - <c>)) - 1."""
    if len(P) != N + 1:
        raise InvalidArgument("click distribution must have N + 1 entries")
    mean, var = _mean_var(P)
    if mean <= 0 or mean >= N * (1.0 - 1e-14):
        raise UndefinedStatistic(f"binomial Q is undefined for mean click number {mean}")
    return N * var / (mean * (N - mean)) - 1.0


# --------------------------------------------------------------------------
# Linear-programming witness


def intensity_grid(N: int, points: int = GRID_POINTS) -> np.ndarray:
    """0 plus ``points`` log-spaced |alpha|^2 values up to A_max.

    A_max is chosen so that Pi(N | A_max) = 1 - 1e-6 / 2, safely above the
    required plateau.
    """
    a_max = -N * math.log1p(-((1.0 - PLATEAU / 2) ** (1.0 / N)))
    return np.concatenate([[0.0], np.geomspace(GRID_FLOOR, a_max, points)])


def _bernstein(lam, x):
    n = np.arange(len(lam))
    return stats.binom.pmf(n[:, None], len(lam) - 1, np.atleast_1d(x)[None, :]).T @ lam


def _sup_over_coherent(lam) -> tuple:
    """max over |alpha|^2 in [0, inf] of sum_n lam_n Pi(n | alpha).

    With x = 1 - exp(-|alpha|^2 / N) the objective is a Bernstein polynomial
    on [0, 1]; it is scanned densely and the best candidates polished.
    """
    xs = np.linspace(0.0, 1.0, 4097)
    f = _bernstein(lam, xs)
    best_x, best_f = float(xs[np.argmax(f)]), float(f.max())
    for i in np.argsort(f)[-3:]:
        lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, len(xs) - 1)]
        res = optimize.minimize_scalar(
            lambda x: -_bernstein(lam, x)[0], bounds=(lo, hi), method="bounded", options={"xatol": 1e-13}
        )
        if -res.fun > best_f:
            best_x, best_f = float(res.x), float(-res.fun)
    return best_x, best_f


def _solve_lp(P, columns):
    n = len(P)
    cost = np.concatenate([-P, [1.0]])
    a_ub = np.hstack([columns.T, -np.ones((columns.shape[1], 1))])
    res = optimize.linprog(
        cost,
        A_ub=a_ub,
        b_ub=np.zeros(columns.shape[1]),
        bounds=[(-1.0, 1.0)] * n + [(None, None)],
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise NumericalGuard(f"witness LP failed: {res.message}")
    return res.x[:n], float(res.x[n])


class Witness(NamedTuple):
    violation: float
    lam: np.ndarray
    bound: float
    cuts: int


def witness_violation(P, N: int, alpha_grid=None, refine: bool = True) -> Witness:
    """Largest violation of the coherent-state click inequalities.

    Solves ``max sum_n lam(n) P(n) - t`` over ``lam in [-1, 1]^(N+1)`` subject to
    ``sum_n lam(n) Pi(n | A) <= t`` on the |alpha|^2 grid ``alpha_grid``. With
    ``refine`` the constraint at the continuous maximizer is added until the
    bound holds on all of [0, inf] to 1e-9. The returned violation is always
    certified against the exact supremum, so it is >= 0 and a positive value
    proves nonclassicality.
    """
    P = np.asarray(P, dtype=float)
    if len(P) != N + 1:
        raise InvalidArgument("click distribution must have N + 1 entries")
    grid = intensity_grid(N) if alpha_grid is None else np.asarray(alpha_grid, dtype=float)
    xs = list(-np.expm1(-grid / N))
    cuts = 0
    while True:
        cols = stats.binom.pmf(np.arange(N + 1)[:, None], N, np.asarray(xs)[None, :])
        lam, t = _solve_lp(P, cols)
        x_star, sup = _sup_over_coherent(lam)
        if not refine or sup - t <= SUP_TOLERANCE or cuts >= 100:
            break
        xs.append(x_star)
        cuts += 1
    value = float(P @ lam) - sup
    if value <= 0:
        return Witness(0.0, np.zeros(N + 1), 0.0, cuts)
    return Witness(value, lam, sup, cuts)


def grid_doubling_change(P, N: int) -> float:
    """|violation(2x grid) - violation(grid)|; large values mean the grid is too coarse."""
    a = witness_violation(P, N, intensity_grid(N, GRID_POINTS)).violation
    b = witness_violation(P, N, intensity_grid(N, 2 * GRID_POINTS)).violation
    return abs(b - a)


# --------------------------------------------------------------------------
# Selection scans


class ScanRow(NamedTuple):
    shift: float
    N: int
    Q: float
    Q_N: float
    violation: float
    q_ci: tuple
    qn_ci: tuple
    violation_ci: tuple


def _ci(values, level=0.95):
    v = np.asarray([x for x in values if math.isfinite(x)])
    if v.size == 0:
        return (math.nan, math.nan)
    lo, hi = np.quantile(v, [(1 - level) / 2, (1 + level) / 2])
    return (float(lo), float(hi))


def _safe(fn, *args):
    try:
        return fn(*args)
    except UndefinedStatistic:
        return math.nan


def selection_scan(
    state: SqueezedCoherentState,
    samples: SampleSet,
    eta_min: float,
    shifts,
    Ns,
    t_det: float = 1.0,
    events: int = 10**6,
    resamples: int = 1000,
    seed: int = 0,
) -> list:
    """Q, Q_N and witness violation versus shift for each detector count.

    Confidence intervals come from multinomial resampling of ``events``
    selected pulses: photon counts for Q, click counts for Q_N and the
    violation (resampled violations use the base grid without refinement).
    """
    p_in = input_pnd(state)
    rng = np.random.default_rng(seed)
    rows = []
    for s in shifts:
        p = selected_pnd(p_in, samples, eta_min, s, t_det)
        q = mandel_q(p)
        q_reps = [_safe(mandel_q, rng.multinomial(events, p) / events) for _ in range(resamples)]
        for N in Ns:
            P = click_distribution(p, N)
            reps = [rng.multinomial(events, P) / events for _ in range(resamples)]
            qn_reps = [_safe(binomial_q, r, N) for r in reps]
            v_reps = [witness_violation(r, N, refine=False).violation for r in reps]
            rows.append(
                ScanRow(
                    float(s), int(N), q, _safe(binomial_q, P, N), witness_violation(P, N).violation,
                    _ci(q_reps), _ci(qn_reps), _ci(v_reps),
                )
            )
    return rows


def crossing_shift(shifts, values, level: float = 0.0) -> float:
    """First shift at which ``values`` rises through ``level`` (linear interpolation).

    Returns nan when it never does and ``shifts[0]`` when it starts above.
    """
    s = np.asarray(shifts, dtype=float)
    v = np.asarray(values, dtype=float)
    above = np.flatnonzero(v >= level)
    if above.size == 0:
        return math.nan
    i = int(above[0])
    if i == 0:
        return float(s[0])
    return float(s[i - 1] + (level - v[i - 1]) * (s[i] - s[i - 1]) / (v[i] - v[i - 1]))


def vanishing_shift(shifts, violation, tol: float = 1e-9) -> float:
    """Shift where the witness violation reaches zero.

    The violation is non-negative and hits zero at a kink, so the last two
    positive points are extrapolated linearly to zero; the result is
    clipped to the bracketing cell. Falls back to interpolation between the
    last positive point and the first zero one.
    """
    s = np.asarray(shifts, dtype=float)
    v = np.asarray(violation, dtype=float)
    zero = np.flatnonzero(v <= tol)
    if zero.size == 0:
        return math.nan
    i = int(zero[0])
    if i == 0:
        return float(s[0])
    if i >= 2 and v[i - 2] > v[i - 1]:
        guess = s[i - 1] + v[i - 1] * (s[i - 1] - s[i - 2]) / (v[i - 2] - v[i - 1])
        return float(min(max(guess, s[i - 1]), s[i]))
    return float(s[i - 1] + v[i - 1] * (s[i] - s[i - 1]) / (v[i - 1] - v[i]))


def mandel_moment_ratio(samples: SampleSet, eta_min: float, shift: float) -> float:
    """<eta^2> / <Delta eta^2> over the selected records at ``shift``.

    The received Mandel Q turns positive once <n>_in / |Q_in| exceeds this
    ratio (deterministic losses cancel in it).
    """
    e = _selected(samples, eta_min, shift, 1.0)
    var = float(np.var(e))
    return math.inf if var == 0 else float(np.mean(e * e)) / var
