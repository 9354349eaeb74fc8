"""Sparse-spectrum phase screens evaluable at any transverse wind shift.

Each screen stores one random Fourier mode per spectral ring. Rings partition
``[kmin, kmax]`` logarithmically; a ring's mode carries the whole phase
variance of the ring, its wavenumber is drawn inside the ring with density
proportional to ``kappa * Phi_n(kappa)`` and its direction and phase are
uniform. With that choice the ensemble structure function of the screen is
unbiased, ring by ring.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import InvalidArgument
from .turbulence import ChannelGeometry, TurbulenceParams, phase_psd, phase_spectrum_weight

MIN_RINGS = 8
AMPLITUDE_LAWS = ("deterministic", "rayleigh")


@dataclass(frozen=True)
class Grid:
    """Square transverse grid centred on the optical axis (index n//2 is r=0)."""

    n: int
    step: float

    @classmethod
    def from_geometry(cls, g: ChannelGeometry) -> "Grid":
        return cls(g.grid_n, g.grid_step)

    @property
    def coords(self) -> np.ndarray:
        return (np.arange(self.n) - self.n // 2) * self.step

    @property
    def extent(self) -> float:
        return self.n * self.step


@dataclass(frozen=True, eq=False)
class SparseSpectrum:
    kx: np.ndarray
    ky: np.ndarray
    amplitude: np.ndarray
    phase_offset: np.ndarray
    ring_count: int
    rng_seed: int

    @property
    def kappa(self) -> np.ndarray:
        return np.hypot(self.kx, self.ky)

    @property
    def variance(self) -> float:
        """Point variance of the screen phase, sum(a^2)/2."""
        return float(0.5 * np.sum(self.amplitude**2))


@dataclass(frozen=True, eq=False)
class SparseScreenSet:
    screens: tuple
    screen_positions: tuple
    slab: float

    def __len__(self):
        return len(self.screens)


@functools.lru_cache(maxsize=16)
def _ring_table(p: TurbulenceParams, k: float, dz: float, ring_count: int):
    """Per-ring variance and inverse-CDF tables (log-kappa nodes, normalized CDF)."""
    sub = max(33, 2 * (4096 // ring_count) + 1)
    edges = np.log(np.geomspace(p.kmin, p.kmax, ring_count + 1))
    t = np.linspace(0.0, 1.0, sub)
    logk = edges[:-1, None] + (edges[1:] - edges[:-1])[:, None] * t[None, :]
    kap = np.exp(logk)
    # d kappa = kappa d(log kappa)
    density = kap * kap * phase_psd(kap, p)
    ring_int = integrate.simpson(density, x=logk, axis=1)
    cdf = integrate.cumulative_trapezoid(density, x=logk, axis=1, initial=0.0)
    cdf /= cdf[:, -1:]
    variance = phase_spectrum_weight(k, dz) * ring_int
    return variance, logk, cdf


def ring_variances(p: TurbulenceParams, g: ChannelGeometry, ring_count: int) -> np.ndarray:
    """Slab phase variance carried by each spectral ring, rad^2."""
    return _ring_table(p, g.k, g.slab, ring_count)[0].copy()


def _inverse_cdf(logk, cdf, u):
    idx = np.minimum((cdf < u[:, None]).sum(axis=1), cdf.shape[1] - 1)
    idx = np.maximum(idx, 1)
    rows = np.arange(len(u))
    c0, c1 = cdf[rows, idx - 1], cdf[rows, idx]
    w = np.where(c1 > c0, (u - c0) / np.where(c1 > c0, c1 - c0, 1.0), 0.0)
    return np.exp(logk[rows, idx - 1] + w * (logk[rows, idx] - logk[rows, idx - 1]))


def sample_spectrum(
    p: TurbulenceParams,
    g: ChannelGeometry,
    seed: int,
    ring_count: int = 1024,
    amplitude_law: str = "deterministic",
) -> SparseSpectrum:
    """Draw one sparse-spectrum phase screen for a slab of thickness ``g.slab``."""
    if ring_count < MIN_RINGS:
        raise InvalidArgument(f"ring_count must be >= {MIN_RINGS}, got {ring_count}")
    if amplitude_law not in AMPLITUDE_LAWS:
        raise InvalidArgument(f"unknown amplitude law {amplitude_law!r}")
    variance, logk, cdf = _ring_table(p, g.k, g.slab, ring_count)
    rng = np.random.default_rng(seed)
    kappa = _inverse_cdf(logk, cdf, rng.random(ring_count))
    direction = rng.uniform(0.0, 2.0 * math.pi, ring_count)
    offset = rng.uniform(0.0, 2.0 * math.pi, ring_count)
    amplitude = np.sqrt(2.0 * variance)
    if amplitude_law == "rayleigh":
        # E[a^2] = 2 sigma^2 is kept.
        amplitude = amplitude * np.sqrt(-np.log1p(-rng.random(ring_count)))
    # Guard against the inverse CDF rounding one ulp outside its ring.
    kappa = np.clip(kappa, p.kmin, p.kmax)
    return SparseSpectrum(
        kx=kappa * np.cos(direction),
        ky=kappa * np.sin(direction),
        amplitude=amplitude,
        phase_offset=offset,
        ring_count=ring_count,
        rng_seed=int(seed),
    )


def screen_seed(realization_seed: int, index: int) -> int:
    """Seed of screen ``index`` within one atmospheric realization."""
    return int(np.random.SeedSequence([int(realization_seed), int(index)]).generate_state(1, np.uint64)[0])


def sample_screen_set(
    p: TurbulenceParams,
    g: ChannelGeometry,
    seed: int,
    ring_count: int = 1024,
    amplitude_law: str = "deterministic",
) -> SparseScreenSet:
    screens = tuple(
        sample_spectrum(p, g, screen_seed(seed, j), ring_count, amplitude_law)
        for j in range(g.n_screens)
    )
    positions = tuple(g.slab * (j + 0.5) for j in range(g.n_screens))
    return SparseScreenSet(screens=screens, screen_positions=positions, slab=g.slab)


def evaluate_on_axes(s: SparseSpectrum, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Phase on the tensor grid ``y x x`` (rows are y), shape ``(len(y), len(x))``.

    Uses cos(a + b) = cos a cos b - sin a sin b so the sum over modes becomes
    one real matrix product.
    """
    ax = np.outer(s.kx, x) + s.phase_offset[:, None]
    by = np.outer(y, s.ky)
    left = np.hstack([np.cos(by), -np.sin(by)])
    right = np.vstack([s.amplitude[:, None] * np.cos(ax), s.amplitude[:, None] * np.sin(ax)])
    return left @ right


def evaluate_screen(s: SparseSpectrum, grid: Grid, shift: float = 0.0) -> np.ndarray:
    """Screen phase on ``grid`` after a transverse shift along +x, radians.

    phi(x, y) = sum_j a_j cos(kx_j (x + shift) + ky_j y + theta_j)
    """
    c = grid.coords
    return evaluate_on_axes(s, c + shift, c)


def evaluate_points(s: SparseSpectrum, x, y, shift: float = 0.0) -> np.ndarray:
    """Direct modal sum at scattered points; slow, meant for checks."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    arg = (
        np.multiply.outer(x + shift, s.kx)
        + np.multiply.outer(y, s.ky)
        + s.phase_offset
    )
    return np.cos(arg) @ s.amplitude


def wind_shift(v: float, tau: float) -> float:
    """Frozen-flow displacement s = v * tau."""
    if v < 0 or tau < 0:
        raise InvalidArgument("wind speed and delay must be non-negative")
    return v * tau
