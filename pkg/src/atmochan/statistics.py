"""Estimators over two-time transmittance samples."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import EmptySelection, InvalidArgument, OutOfRange
from .samples import SampleSet

DEFAULT_BINS = 100


def _histogram(values, bins):
    if bins < 1:
        raise InvalidArgument("bins must be positive")
    counts, edges = np.histogram(values, bins=bins, range=(0.0, 1.0))
    density = counts / (len(values) * np.diff(edges))
    return density, edges


def marginal_pdt(samples: SampleSet, shift: float = 0.0, bins: int = DEFAULT_BINS):
    """Histogram estimate of the single-time PDT; returns (density, edges)."""
    return _histogram(samples.column(shift), bins)


def select(samples: SampleSet, eta_min: float) -> np.ndarray:
    """Boolean mask of records whose test transmittance eta_0 reaches ``eta_min``."""
    if not 0 <= eta_min < 1:
        raise InvalidArgument(f"eta_min must lie in [0, 1), got {eta_min}")
    return samples.eta0 >= eta_min


def conditional_pdt(samples: SampleSet, eta_min: float, shift: float, bins: int = DEFAULT_BINS):
    """PDT of eta at ``shift`` given eta_0 >= eta_min; returns (density, edges)."""
    keep = select(samples, eta_min)
    if not keep.any():
        raise EmptySelection(f"no record has eta_0 >= {eta_min}", survivors=0)
    return _histogram(samples.column(shift)[keep], bins)


def exceedance(samples: SampleSet, eta_min: float):
    """Fraction of records with eta_0 >= eta_min and its binomial standard error."""
    n = len(samples)
    f = float(np.count_nonzero(select(samples, eta_min))) / n
    return f, math.sqrt(f * (1.0 - f) / n)


@dataclass
class MomentRow:
    shift: float
    mean0: float
    mean_s: float
    cross: float
    m2: float
    var: float
    pearson: float
    count: int
    se_mean0: float
    se_mean_s: float
    se_cross: float
    se_pearson: float
    pearson_degenerate: bool = False


@dataclass
class ChannelMoments:
    """Column-wise moment table, one entry per shift."""

    shift: np.ndarray
    mean0: np.ndarray
    mean_s: np.ndarray
    cross: np.ndarray
    m2: np.ndarray
    var: np.ndarray
    pearson: np.ndarray
    count: np.ndarray
    se_mean0: np.ndarray
    se_mean_s: np.ndarray
    se_cross: np.ndarray
    se_pearson: np.ndarray
    pearson_degenerate: np.ndarray

    @classmethod
    def from_rows(cls, rows):
        return cls(**{f.name: np.array([getattr(r, f.name) for r in rows]) for f in fields(cls)})

    def row(self, i) -> MomentRow:
        return MomentRow(**{f.name: getattr(self, f.name)[i].item() for f in fields(self)})

    def __len__(self):
        return len(self.shift)


def _se(x):
    n = len(x)
    return float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else 0.0


def pearson(a: np.ndarray, b: np.ndarray):
    """Pearson coefficient and a flag for zero-variance inputs.

    Identical inputs give exactly 1. Degenerate inputs never yield NaN: they
    report 1 when the two columns coincide and 0 otherwise, with the flag set.
    """
    if a is b or np.array_equal(a, b):
        return 1.0, bool(np.ptp(a) == 0)
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return 0.0, True
    da, db = a - a.mean(), b - b.mean()
    saa, sbb = float(da @ da), float(db @ db)
    r = float(da @ db) / math.sqrt(saa * sbb)
    return min(max(r, -1.0), 1.0), False


def moments(samples: SampleSet, shift: float) -> MomentRow:
    e0 = samples.eta0
    es = samples.column(shift)
    n = len(e0)
    root = np.sqrt(e0 * es)
    r, degenerate = pearson(e0, es)
    se_r = (1.0 - r * r) / math.sqrt(n - 3) if n > 3 else math.inf
    return MomentRow(
        shift=float(shift),
        mean0=float(e0.mean()),
        mean_s=float(es.mean()),
        cross=float(root.mean()),
        m2=float(np.mean(es * es)),
        var=float(np.var(es, ddof=1)) if n > 1 and np.ptp(es) > 0 else 0.0,
        pearson=r,
        count=n,
        se_mean0=_se(e0),
        se_mean_s=_se(es),
        se_cross=_se(root),
        se_pearson=se_r,
        pearson_degenerate=degenerate,
    )


def channel_moments(samples: SampleSet, mask=None) -> ChannelMoments:
    """Moments at every shift, optionally over a subset of records."""
    if mask is not None:
        if not np.any(mask):
            raise EmptySelection("empty record subset", survivors=0)
        samples = SampleSet(
            samples.shifts,
            samples.realization_ids[mask],
            samples.seeds[mask],
            samples.eta[mask],
            samples.flags[mask],
            samples.meta,
        )
    return ChannelMoments.from_rows([moments(samples, s) for s in samples.shifts])


def pearson_curve(eta: np.ndarray) -> np.ndarray:
    """Pearson coefficient of column 0 against every column of ``eta``."""
    return np.array([pearson(eta[:, 0], eta[:, j])[0] for j in range(eta.shape[1])])


def coherence_radius(curve) -> float:
    """Shift at which the correlation curve first falls to 1/e (linear interpolation).

    ``curve`` is a sequence of (shift, r) pairs with r(0) = 1.
    """
    pts = np.asarray(curve, dtype=float)
    s, r = pts[:, 0], pts[:, 1]
    if s[0] != 0 or not math.isclose(r[0], 1.0, abs_tol=1e-12):
        raise InvalidArgument("correlation curve must start at (0, 1)")
    level = math.exp(-1.0)
    below = np.flatnonzero(r < level)
    if below.size == 0:
        raise OutOfRange(f"correlation never drops below 1/e (min {r.min():.4g})", extreme=float(r.min()))
    i = below[0]
    return float(s[i - 1] + (r[i - 1] - level) * (s[i] - s[i - 1]) / (r[i - 1] - r[i]))


def coherence_radius_with_error(samples: SampleSet, n_boot: int = 200, seed: int = 0):
    """Coherence radius and its bootstrap standard error over records."""
    rho = coherence_radius(list(zip(samples.shifts, pearson_curve(samples.eta))))
    rng = np.random.default_rng(seed)
    n = len(samples)
    reps = []
    for _ in range(n_boot):
        idx = rng.integers(0, n, n)
        try:
            reps.append(coherence_radius(list(zip(samples.shifts, pearson_curve(samples.eta[idx])))))
        except OutOfRange:
            continue
    se = float(np.std(reps, ddof=1)) if len(reps) > 1 else math.inf
    return rho, se
