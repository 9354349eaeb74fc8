"""Built-in oracle suite run by ``atmochan selfcheck``.

Each oracle recomputes a quantity independently (closed forms, literal
constants, direct quadrature) and compares it with the package at a stated
tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, special

from . import bell, cv, nonclassical
from .propagation import aperture_transmittance, second_moment_radius, vacuum_channel
from .screens import Grid, evaluate_screen, sample_spectrum
from .turbulence import ChannelGeometry, TurbulenceParams, rytov_variance


@dataclass
class OracleResult:
    name: str
    tolerance: str
    passed: bool
    detail: str


def von_karman_structure_function(cn2, l0, L0, k, dz, r):
    """Phase structure function of one slab by direct quadrature over [0, inf).

    D(r) = 8 pi^2 k^2 dz int kappa Phi_n(kappa) (1 - J0(kappa r)) dkappa with
    Phi_n = 0.033 Cn^2 exp(-kappa^2/kappa_m^2) / (kappa^2 + kappa_0^2)^(11/6).
    Constants are written out here on purpose, independent of the package.
    """
    km, k0 = 5.92 / l0, 2.0 * math.pi / L0

    def f(x):
        return x * 0.033 * cn2 * math.exp(-x * x / km**2) / (x * x + k0 * k0) ** (11.0 / 6.0) * (1.0 - special.j0(x * r))

    pts = np.concatenate([[0.0], np.geomspace(1e-4 / L0, 20.0 * km, 90)])
    total = sum(integrate.quad(f, a, b, limit=200)[0] for a, b in zip(pts[:-1], pts[1:]))
    return 8.0 * math.pi**2 * k * k * dz * total


def ensemble_structure_function(p, g, lags, n_screens, seed=0, ring_count=1024):
    """Screen-ensemble D at integer grid lags, averaged over x and y pairs."""
    grid = Grid(g.grid_n, g.grid_step)
    acc = np.zeros(len(lags))
    for i in range(n_screens):
        phi = evaluate_screen(sample_spectrum(p, g, seed=seed * 1_000_003 + i, ring_count=ring_count), grid)
        for j, lag in enumerate(lags):
            dx = phi[:, lag:] - phi[:, :-lag]
            dy = phi[lag:, :] - phi[:-lag, :]
            acc[j] += 0.5 * (np.mean(dx * dx) + np.mean(dy * dy))
    return acc / n_screens


# Screens with l0 = 1 cm, L0 = 5 m fit [10 l0, L0/10] inside a 1.28 m grid.
SF_TURBULENCE = TurbulenceParams(1e-14, 0.01, 5.0)
SF_GEOMETRY = ChannelGeometry(808e-9, 1000.0, 1, 256, 0.005, 0.1)
SF_LAGS = (20, 30, 45, 70, 100)


def structure_function_deviation(n_screens=400, seed=0, lags=SF_LAGS):
    """Relative deviations D_screens / D_quadrature - 1 at each lag."""
    p, g = SF_TURBULENCE, SF_GEOMETRY
    est = ensemble_structure_function(p, g, list(lags), n_screens, seed)
    ref = np.array([von_karman_structure_function(p.cn2, p.l0, p.L0, g.k, g.slab, lag * g.grid_step) for lag in lags])
    return est / ref - 1.0


def _check_rytov():
    g = ChannelGeometry(808e-9, 50_000.0, 1, 2, 1.0, 0.1)
    got = [rytov_variance(TurbulenceParams(c * 1e-16, 1e-3, 80.0), g) for c in (1, 2, 3)]
    err = max(abs(v / t - 1) for v, t in zip(got, (5.5, 11.0, 16.5)))
    return err <= 0.05, f"values {', '.join(f'{v:.3f}' for v in got)}; max rel. error {err:.3%}"


def _check_vacuum():
    g = ChannelGeometry(808e-9, 10_000.0, 1, 256, 0.003, 0.1, w0=0.03)
    f = vacuum_channel(g)
    w = g.vacuum_radius()
    werr = abs(second_moment_radius(f) / w - 1)
    eerr = max(
        abs(aperture_transmittance(f, r) / (1 - math.exp(-2 * r * r / w / w)) - 1) for r in (0.5 * w, w, 1.5 * w)
    )
    return max(werr, eerr) <= 0.01, f"beam radius error {werr:.2e}, transmittance error {eerr:.2e}"


def _check_structure_function():
    dev = structure_function_deviation()
    ok = abs(dev.mean()) <= 0.04 and np.abs(dev).max() <= 0.10
    return ok, f"mean deviation {dev.mean():+.2%}, max |deviation| {np.abs(dev).max():.2%}"


def _check_povm():
    worst_norm, worst_coh = 0.0, 0.0
    for N in (1, 2, 3, 5, 10):
        povm = nonclassical.click_povm_fock(N, 80)
        worst_norm = max(worst_norm, float(np.abs(povm.sum(axis=0) - 1).max()))
        for a in (0.5, 1.0, 4.0):
            poisson = np.exp(-a + np.arange(81) * math.log(a) - special.gammaln(np.arange(81) + 1))
            x = 1 - math.exp(-a / N)
            closed = np.array([math.comb(N, n) * x**n * (1 - x) ** (N - n) for n in range(N + 1)])
            worst_coh = max(worst_coh, float(np.abs(povm @ poisson - closed).max()))
    ok = worst_norm <= 1e-12 and worst_coh <= 1e-9
    return ok, f"column sums {worst_norm:.1e} (tol 1e-12), coherent closed form {worst_coh:.1e} (tol 1e-9)"


def _check_lp():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(10):
        a = rng.exponential(2.0, 4)
        w = rng.dirichlet(np.ones(4))
        worst = max(worst, nonclassical.witness_violation(nonclassical.coherent_click_povm(3, a) @ w, 3).violation)
    p = nonclassical.input_pnd(nonclassical.SqueezedCoherentState(1.15, 0.59))
    v = nonclassical.witness_violation(nonclassical.click_distribution(p, 5), 5).violation
    return worst <= 1e-9 and v > 0, f"classical max violation {worst:.1e} (tol 1e-9), squeezed N=5 violation {v:.4f} > 0"


def _check_simon():
    m = type("M", (), {"mean0": 1.0, "mean_s": 1.0, "cross": 1.0})()
    got = float(cv.simon_certifier(m, 1.0).W)
    ref = -math.sinh(1.0) ** 2 * math.cosh(1.0) ** 2
    return abs(got - ref) <= 1e-12, f"W(1) = {got:.15f}, expected {ref:.15f}"


def _check_chsh():
    exp = bell.DvExperiment(source="bell", noise_mean=0.0, deterministic_db=0.0, splitter_db=0.0)
    ones = np.ones((1, 2))
    from .samples import SampleSet

    b = bell.chsh_parameter(exp, SampleSet.synthetic(ones, [0.0, 0.01]), 0.0, n_boot=0).B
    return abs(b - 2 * math.sqrt(2)) <= 1e-10, f"B = {b:.15f}"


ORACLES: list[tuple[str, str, Callable]] = [
    ("rytov variance, 50 km", "5 %", _check_rytov),
    ("vacuum Gaussian beam, 10 km", "1 %", _check_vacuum),
    ("phase structure function vs quadrature", "mean 4 %, max 10 %", _check_structure_function),
    ("click POVM identities", "1e-12 / 1e-9", _check_povm),
    ("witness LP sanity", "1e-9", _check_lp),
    ("Simon certifier, lossless", "1e-12", _check_simon),
    ("CHSH, ideal Bell pair", "1e-10", _check_chsh),
]


def run_selfcheck(echo=print) -> bool:
    """Run every oracle, print one line each and return overall success."""
    all_ok = True
    for name, tol, fn in ORACLES:
        try:
            ok, detail = fn()
        except Exception as exc:  # an oracle that crashes is a failed oracle
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        all_ok &= bool(ok)
        echo(f"{'PASS' if ok else 'FAIL'}  {name}  [tol {tol}]  {detail}")
    echo("selfcheck " + ("passed" if all_ok else "FAILED"))
    return all_ok
