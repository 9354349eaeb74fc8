"""Refractive-index spectrum, channel geometry and scalar turbulence diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import InvalidArgument

# Modified von Karman constants.
SPECTRUM_PREFACTOR = 0.033
INNER_SCALE_FACTOR = 5.92


@dataclass(frozen=True)
class TurbulenceParams:
    """Refractive-index turbulence of a horizontal path.

    ``kmin`` and ``kmax`` bound the spectral support used by the phase
    screens. They default to ``1/(15*L0)`` and ``2/l0``.
    """

    cn2: float
    l0: float
    L0: float
    kmin: float | None = None
    kmax: float | None = None

    def __post_init__(self):
        if self.kmin is None:
            object.__setattr__(self, "kmin", 1.0 / (15.0 * self.L0))
        if self.kmax is None:
            object.__setattr__(self, "kmax", 2.0 / self.l0)
        if not (self.cn2 > 0 and math.isfinite(self.cn2)):
            raise InvalidArgument(f"cn2 must be positive, got {self.cn2}")
        if not (0 < self.l0 < self.L0):
            raise InvalidArgument(f"need 0 < l0 < L0, got l0={self.l0}, L0={self.L0}")
        if not (0 < self.kmin < self.kmax):
            raise InvalidArgument(f"need 0 < kmin < kmax, got {self.kmin}, {self.kmax}")

    @property
    def kappa_m(self) -> float:
        return INNER_SCALE_FACTOR / self.l0

    @property
    def kappa_0(self) -> float:
        return 2.0 * math.pi / self.L0


@dataclass(frozen=True)
class ChannelGeometry:
    """Propagation path, numerical grid, source beam and receiver aperture."""

    wavelength: float
    z_ap: float
    n_screens: int
    grid_n: int
    grid_step: float
    aperture_radius: float
    w0: float = 0.08
    f0: float = math.inf
    aperture_radii: tuple = field(default=())

    def __post_init__(self):
        if not self.aperture_radii:
            object.__setattr__(self, "aperture_radii", (float(self.aperture_radius),))
        else:
            object.__setattr__(self, "aperture_radii", tuple(float(r) for r in self.aperture_radii))
        if self.wavelength <= 0:
            raise InvalidArgument("wavelength must be positive")
        if self.z_ap < 0:
            raise InvalidArgument("z_ap must be non-negative")
        if self.n_screens < 1:
            raise InvalidArgument("need at least one phase screen")
        n = self.grid_n
        if n < 2 or n & (n - 1):
            raise InvalidArgument(f"grid_n must be a power of two, got {n}")
        if self.grid_step <= 0:
            raise InvalidArgument("grid_step must be positive")
        if self.aperture_radius < 0 or min(self.aperture_radii) < 0:
            raise InvalidArgument("aperture radius must be non-negative")
        if self.w0 <= 0 or self.f0 == 0:
            raise InvalidArgument("need w0 > 0 and f0 != 0")

    @property
    def k(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def slab(self) -> float:
        return self.z_ap / self.n_screens

    @property
    def extent(self) -> float:
        return self.grid_n * self.grid_step

    def vacuum_radius(self, z: float | None = None) -> float:
        """Gaussian beam-spot radius W(z) in free space."""
        z = self.z_ap if z is None else z
        return gaussian_beam_radius(self.w0, self.f0, self.k, z)

    def check_grid(self):
        """Reject grids narrower than four vacuum beam radii at the receiver."""
        w = self.vacuum_radius()
        if self.extent < 4.0 * w:
            raise InvalidArgument(
                f"grid extent {self.extent:.3g} m < 4 x beam radius {w:.3g} m at the receiver"
            )


def gaussian_beam_radius(w0, f0, k, z):
    focus = 0.0 if math.isinf(f0) else z / f0
    return w0 * math.sqrt((1.0 - focus) ** 2 + (2.0 * z / (k * w0**2)) ** 2)


def phase_psd(kappa, p: TurbulenceParams):
    """Modified von Karman refractive-index spectrum Phi_n(kappa), m^3.

    Parameters
    ----------
    kappa : float or ndarray
        Spatial wavenumber magnitude in rad/m, non-negative.
    p : TurbulenceParams
    """
    kappa = np.asarray(kappa, dtype=float)
    if not np.all(np.isfinite(kappa)) or np.any(kappa < 0):
        raise InvalidArgument("kappa must be finite and non-negative")
    k2 = kappa * kappa
    out = (
        SPECTRUM_PREFACTOR
        * p.cn2
        * np.exp(-k2 / p.kappa_m**2)
        / (k2 + p.kappa_0**2) ** (11.0 / 6.0)
    )
    return out if out.ndim else float(out)


def rytov_variance(p: TurbulenceParams, g: ChannelGeometry) -> float:
    """Plane-wave Rytov variance 1.23 Cn^2 k^(7/6) L^(11/6)."""
    return 1.23 * p.cn2 * g.k ** (7.0 / 6.0) * g.z_ap ** (11.0 / 6.0)


def phase_spectrum_weight(k: float, dz: float) -> float:
    """Factor turning the radial integral of kappa*Phi_n into slab phase variance.

    The 2-D phase spectrum of a slab is 2*pi*k^2*dz*Phi_n; integrating it over
    the plane contributes another 2*pi from the azimuth.
    """
    return 4.0 * math.pi**2 * k**2 * dz


def slab_phase_variance(p: TurbulenceParams, k: float, dz: float, lo=None, hi=None) -> float:
    """Phase variance of one slab restricted to lo <= kappa <= hi (default kmin..kmax)."""
    lo = p.kmin if lo is None else lo
    hi = p.kmax if hi is None else hi
    edges = np.geomspace(lo, hi, 64)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        total += integrate.quad(lambda x: x * phase_psd(x, p), a, b, epsabs=0, epsrel=1e-11)[0]
    return phase_spectrum_weight(k, dz) * total
