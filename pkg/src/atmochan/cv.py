"""Gaussian entanglement of a two-mode squeezed vacuum shared by two pulses.

The received state is characterized entirely by three transmittance moments,
<eta_0>, <eta_tau> and <sqrt(eta_0 eta_tau)>; no covariance matrices are built.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import interpolate, optimize

from .errors import InvalidArgument


@dataclass(frozen=True)
class DeterministicLosses:
    """Fixed losses folded into the two arms.

    The early arm (sent at t=0) sees atmospheric absorption over
    ``path_km`` plus optics; the stored arm additionally pays the memory
    write and read losses.
    """

    atmospheric_db_per_km: float = 0.0
    path_km: float = 0.0
    optics_db: float = 0.0
    memory_write_db: float = 0.0
    memory_read_db: float = 0.0

    def __post_init__(self):
        vals = (self.atmospheric_db_per_km, self.path_km, self.optics_db, self.memory_write_db, self.memory_read_db)
        if any(v < 0 or not math.isfinite(v) for v in vals):
            raise InvalidArgument("losses must be finite and non-negative")

    @property
    def t_early(self) -> float:
        return 10.0 ** (-(self.atmospheric_db_per_km * self.path_km + self.optics_db) / 10.0)

    @property
    def t_stored(self) -> float:
        return self.t_early * 10.0 ** (-(self.memory_write_db + self.memory_read_db) / 10.0)


NO_LOSS = DeterministicLosses()


def squeezing_db(xi: float) -> float:
    """Squeezing in dB, 10 log10(exp(2 xi))."""
    return 10.0 * math.log10(math.exp(2.0 * xi))


class SimonValue(NamedTuple):
    W: np.ndarray
    bracket1: np.ndarray
    bracket2: np.ndarray
    second_positive: bool


def simon_certifier(m, xi: float, losses: DeterministicLosses = NO_LOSS) -> SimonValue:
    """Simon certifier W for the received two-mode squeezed vacuum; W < 0 means entangled.

    ``m`` is anything with ``mean0``, ``mean_s`` and ``cross`` attributes
    (a MomentRow, a ChannelMoments table, or a simple namespace); arrays
    broadcast.
    """
    if not xi >= 0 or not math.isfinite(xi):
        raise InvalidArgument(f"squeezing parameter must be finite and >= 0, got {xi}")
    t0, tt = losses.t_early, losses.t_stored
    m0 = t0 * np.asarray(m.mean0, dtype=float)
    mt = tt * np.asarray(m.mean_s, dtype=float)
    c = math.sqrt(t0 * tt) * np.asarray(m.cross, dtype=float)
    sh2 = math.sinh(xi) ** 2
    ch2 = math.cosh(xi) ** 2
    b1 = -(c**2) * ch2 + m0 * mt * sh2
    b2 = 1.0 - c**2 * math.sinh(2.0 * xi) ** 2 / 4.0 + sh2 * (m0 + mt + m0 * mt * sh2)
    w = sh2 * b1 * b2
    return SimonValue(w, sh2 * b1, b2, bool(np.all(b2 > 0)))


class _Moments(NamedTuple):
    mean0: float
    mean_s: float
    cross: float


class Threshold(NamedTuple):
    s_th: float
    cell: tuple
    status: str
    w_min: float
    w_max: float


def threshold_shift(m, xi: float, losses: DeterministicLosses = NO_LOSS, shifts=None) -> Threshold:
    """First wind shift at which W turns non-negative.

    W is sampled on the moment table's shift grid to find the first sign
    change. Inside that cell the three moments are interpolated with monotone
    (PCHIP) cubics and W is evaluated exactly from them, so the strong
    curvature of W itself never enters the interpolant; the crossing is then
    located by bisection. Status is
    one of ``"crossing"``, ``"entangled throughout"``, ``"never entangled"``
    or ``"degenerate"`` (xi = 0, where W vanishes identically).
    """
    s = np.asarray(m.shift if shifts is None else shifts, dtype=float)
    w = np.asarray(simon_certifier(m, xi, losses).W, dtype=float)
    w_min, w_max = float(w.min()), float(w.max())
    if xi == 0:
        return Threshold(math.nan, (), "degenerate", w_min, w_max)
    neg = w < 0
    if not neg.any():
        return Threshold(math.nan, (), "never entangled", w_min, w_max)
    first_neg = int(np.argmax(neg))
    after = np.flatnonzero(~neg[first_neg:])
    if after.size == 0:
        return Threshold(math.nan, (), "entangled throughout", w_min, w_max)
    i = first_neg + int(after[0])
    if w[i] == 0:
        return Threshold(float(s[i]), (float(s[i - 1]), float(s[i])), "crossing", w_min, w_max)
    curves = [interpolate.PchipInterpolator(s, np.broadcast_to(np.asarray(v, dtype=float), s.shape)) for v in (m.mean0, m.mean_s, m.cross)]

    def f(x):
        m0, ms, c = (float(g(x)) for g in curves)
        return float(simon_certifier(_Moments(m0, ms, c), xi, losses).W)

    lo, hi = float(s[i - 1]), float(s[i])
    root = optimize.bisect(f, lo, hi, xtol=1e-14 * max(hi, 1e-300), rtol=4 * np.finfo(float).eps, maxiter=400)
    return Threshold(float(root), (lo, hi), "crossing", w_min, w_max)
