"""Split-step paraxial propagation of a Gaussian beam through phase screens."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.fft as sfft

from .errors import InvalidArgument
from .screens import Grid, SparseScreenSet, evaluate_on_axes, evaluate_screen
from .turbulence import ChannelGeometry

PRECISIONS = {"double": np.complex128, "single": np.complex64}

ABSORBER_BAND = 0.05  # fraction of the grid width covered by the absorber on each side
ABSORBER_EDGE_VALUE = 1e-4
GUARD_BAND = 0.10
GUARD_FRACTION = 0.01


@dataclass
class ComplexField:
    """Transverse field u(r, z) on a square grid; sum |u|^2 dx^2 is the power."""

    values: np.ndarray
    grid_step: float
    z: float = 0.0
    aliasing_flag: bool = False

    @property
    def grid(self) -> Grid:
        return Grid(self.values.shape[0], self.grid_step)

    @property
    def power(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2, dtype=np.float64) * self.grid_step**2)


def init_gaussian_beam(w0: float, f0: float, grid: Grid, k: float, precision="double") -> ComplexField:
    """Gaussian source sqrt(2/(pi W0^2)) exp(-r^2/W0^2 - i k r^2/(2 F0)).

    ``f0 = inf`` gives a collimated beam; ``f0 > 0`` focuses.
    """
    if w0 <= 0 or f0 == 0:
        raise InvalidArgument("need w0 > 0 and f0 != 0")
    if w0 < 4 * grid.step:
        raise InvalidArgument(f"beam radius {w0} m is not resolved by grid step {grid.step} m")
    c = grid.coords
    r2 = c[None, :] ** 2 + c[:, None] ** 2
    curvature = 0.0 if math.isinf(f0) else k / (2.0 * f0)
    u = math.sqrt(2.0 / (math.pi * w0**2)) * np.exp(-r2 / w0**2 - 1j * curvature * r2)
    return ComplexField(u.astype(PRECISIONS[precision]), grid.step, 0.0)


@functools.lru_cache(maxsize=32)
def _transfer(n: int, step: float, dz: float, k: float, dtype) -> np.ndarray:
    kap = 2.0 * math.pi * np.fft.fftfreq(n, step)
    k2 = kap[None, :] ** 2 + kap[:, None] ** 2
    return np.exp(-1j * k2 * dz / (2.0 * k)).astype(dtype)


def vacuum_propagate(f: ComplexField, dz: float, k: float) -> ComplexField:
    """Angular-spectrum step: FFT, multiply by exp(-i kappa^2 dz / 2k), inverse FFT."""
    if dz < 0:
        raise InvalidArgument("dz must be non-negative")
    if dz == 0:
        return replace(f, values=f.values.copy())
    h = _transfer(f.values.shape[0], f.grid_step, float(dz), float(k), f.values.dtype)
    out = sfft.ifft2(sfft.fft2(f.values) * h)
    return replace(f, values=out, z=f.z + dz)


def apply_screen(f: ComplexField, phi: np.ndarray) -> ComplexField:
    """Thin phase screen: u -> u exp(i phi)."""
    if phi.shape != f.values.shape:
        raise InvalidArgument(f"screen shape {phi.shape} does not match field {f.values.shape}")
    kick = np.exp(1j * phi).astype(f.values.dtype)
    return replace(f, values=f.values * kick)


@functools.lru_cache(maxsize=32)
def _aperture_mask(n: int, step: float, radius: float) -> np.ndarray:
    c = (np.arange(n) - n // 2) * step
    return (c[None, :] ** 2 + c[:, None] ** 2) <= radius**2


def aperture_transmittance(f: ComplexField, radius: float) -> float:
    """Power collected by a centred circular aperture (cell-centre inclusion)."""
    if radius < 0:
        raise InvalidArgument("aperture radius must be non-negative")
    if radius == 0:
        # A zero-area aperture collects nothing, even though the on-axis cell centre sits at |r| = 0.
        return 0.0
    mask = _aperture_mask(f.values.shape[0], f.grid_step, float(radius))
    eta = float(np.sum(np.abs(f.values[mask]) ** 2, dtype=np.float64) * f.grid_step**2)
    return min(max(eta, 0.0), 1.0)


@functools.lru_cache(maxsize=8)
def absorber_ramp(n: int) -> np.ndarray:
    """1-D super-Gaussian ramp: 1 inside, falling to ~1e-4 over the outer 5 %."""
    u = np.abs(np.arange(n) - n // 2) / (n / 2)
    start = 1.0 - 2.0 * ABSORBER_BAND
    d = np.clip((u - start) / (1.0 - start), 0.0, None)
    return np.exp(math.log(ABSORBER_EDGE_VALUE) * d**4)


def absorber_mask(n: int) -> np.ndarray:
    """Separable 2-D absorber mask."""
    m = absorber_ramp(n)
    return np.outer(m, m)


def _band_width(n: int, fraction: float) -> int:
    return int(round(fraction * n))


def edge_fraction(values: np.ndarray) -> float:
    """Fraction of the power in the outer 10 % band of the grid."""
    p = np.abs(values) ** 2
    total = float(p.sum(dtype=np.float64))
    if total == 0:
        return 0.0
    b = _band_width(values.shape[0], GUARD_BAND)
    inner = float(p[b:-b, b:-b].sum(dtype=np.float64))
    return (total - inner) / total


def _apply_absorber(u: np.ndarray, ramp: np.ndarray, b: int):
    """In-place multiply by the separable absorber, touching only the edge bands."""
    u[:, :b] *= ramp[:b]
    u[:, -b:] *= ramp[-b:]
    u[:b, :] *= ramp[:b, None]
    u[-b:, :] *= ramp[-b:, None]


class ChannelPropagator:
    """Reusable split-step solver for one channel geometry.

    Screens sit at the slab centres; the half-slab vacuum steps on either side
    of an interior screen are fused into one full-slab step.
    """

    def __init__(self, g: ChannelGeometry, precision="double", absorber=True):
        if precision not in PRECISIONS:
            raise InvalidArgument(f"unknown precision {precision!r}")
        self.g = g
        self.grid = Grid.from_geometry(g)
        self.precision = precision
        self.dtype = PRECISIONS[precision]
        self.absorber = absorber
        self.source = init_gaussian_beam(g.w0, g.f0, self.grid, g.k, precision)
        n, dx, k = g.grid_n, g.grid_step, g.k
        self._half = _transfer(n, dx, g.slab / 2, k, self.dtype)
        self._full = _transfer(n, dx, g.slab, k, self.dtype)
        self._ramp = absorber_ramp(n).astype(np.float32 if precision == "single" else np.float64)
        # Ramp is exactly 1 outside this many cells from each edge.
        self._band = int(np.count_nonzero(self._ramp[: n // 2] < 1.0)) + 1
        # Source to first screen is the same for every realization.
        self._first = self._vacuum(self.source.values.copy(), self._half)

    def _vacuum(self, u, h):
        u = sfft.ifft2(sfft.fft2(u) * h)
        flagged = edge_fraction(u) > GUARD_FRACTION
        if self.absorber:
            _apply_absorber(u, self._ramp, self._band)
        return u, flagged

    def _run(self, kicks):
        """Propagate the source through the given per-screen phase factors."""
        u, flagged = self._first
        u = u.copy()
        m = len(kicks)
        for j, kick in enumerate(kicks):
            u *= kick
            u, f = self._vacuum(u, self._full if j < m - 1 else self._half)
            flagged |= f
        return ComplexField(u, self.g.grid_step, self.g.z_ap, bool(flagged))

    def propagate(self, screens: SparseScreenSet, shift: float = 0.0) -> ComplexField:
        self._check(screens)
        kicks = [
            self._kick(evaluate_screen(s, self.grid, shift))
            for s in screens.screens
        ]
        return self._run(kicks)

    def propagate_shifts(self, screens: SparseScreenSet, shifts):
        """Fields at the receiver for every shift, reusing one screen evaluation.

        Each screen is evaluated once on a strip long enough to cover the
        largest shift; on-grid shifts are then column slices of that strip.
        Off-grid shifts fall back to direct evaluation.
        """
        self._check(screens)
        dx, n = self.g.grid_step, self.g.grid_n
        cols = np.rint(np.asarray(shifts, dtype=float) / dx)
        on_grid = np.abs(np.asarray(shifts) / dx - cols) < 1e-9
        extra = int(cols[on_grid].max()) if on_grid.any() else 0
        c = self.grid.coords
        x_strip = (np.arange(n + extra) - n // 2) * dx
        strips = [
            self._kick(evaluate_on_axes(s, x_strip, c)) for s in screens.screens
        ]
        fields = []
        for shift, col, ok in zip(shifts, cols.astype(int), on_grid):
            if ok:
                kicks = [st[:, col:col + n] for st in strips]
            else:
                kicks = [
                    self._kick(evaluate_screen(s, self.grid, shift))
                    for s in screens.screens
                ]
            fields.append(self._run(kicks))
        return fields

    def _kick(self, phi):
        if self.precision == "single":
            return np.exp(1j * phi.astype(np.float32))
        return np.exp(1j * phi)

    def _check(self, screens):
        if len(screens) != self.g.n_screens or not math.isclose(screens.slab, self.g.slab):
            raise InvalidArgument("screen set does not match the channel geometry")


def propagate_channel(
    screens: SparseScreenSet, shift: float, g: ChannelGeometry, precision="double", absorber=True
) -> ComplexField:
    """Field at the receiver for one atmospheric realization shifted by ``shift``."""
    return ChannelPropagator(g, precision, absorber).propagate(screens, shift)


def vacuum_channel(g: ChannelGeometry, precision="double") -> ComplexField:
    """Source propagated over the full path without turbulence or absorber."""
    src = init_gaussian_beam(g.w0, g.f0, Grid.from_geometry(g), g.k, precision)
    return vacuum_propagate(src, g.z_ap, g.k)


def second_moment_radius(f: ComplexField) -> float:
    """Beam radius sqrt(2 <r^2>) from the intensity second moment."""
    c = f.grid.coords
    p = np.abs(f.values) ** 2
    r2 = c[None, :] ** 2 + c[:, None] ** 2
    return math.sqrt(2.0 * float((p * r2).sum() / p.sum()))
