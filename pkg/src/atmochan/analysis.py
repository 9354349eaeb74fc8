"""Figure tables computed from stored sample sets.

Every builder returns ``(columns, rows)``; the CLI writes them as CSV.
"""

from __future__ import annotations

import math

from . import bell, cv, nonclassical, statistics
from .errors import ConfigError, OutOfRange
from .samples import SampleSet


def pick_radius(sets: dict, radius: float | None, default: float) -> SampleSet:
    r = default if radius is None else radius
    for key, s in sets.items():
        if math.isclose(key, r, rel_tol=0, abs_tol=1e-9):
            return s
    raise ConfigError(f"no samples for aperture radius {r} m (have {sorted(sets)})")


def fig2_conditional_pdt(samples: SampleSet, opts: dict):
    cols = ["eta_min", "shift_m", "bin_lo", "bin_hi", "density", "exceedance"]
    rows = []
    for eta_min in opts["eta_min"]:
        frac, _ = statistics.exceedance(samples, eta_min)
        for s in samples.shifts:
            dens, edges = statistics.conditional_pdt(samples, eta_min, s, opts["bins"])
            rows += [
                (eta_min, float(s), float(lo), float(hi), float(d), frac)
                for lo, hi, d in zip(edges[:-1], edges[1:], dens)
            ]
    return cols, rows


def fig3_pearson(sets: dict):
    cols = ["aperture_radius_m", "shift_m", "pearson", "se_pearson"]
    rows = []
    for r, s in sorted(sets.items()):
        m = statistics.channel_moments(s)
        rows += [(r, float(a), float(b), float(c)) for a, b, c in zip(m.shift, m.pearson, m.se_pearson)]
    return cols, rows


def fig3_coherence(sets: dict, opts: dict):
    cols = ["aperture_radius_m", "rho0_m", "rho0_se_m", "status"]
    rows = []
    for r, s in sorted(sets.items()):
        try:
            rho, se = statistics.coherence_radius_with_error(s, opts["bootstrap"], opts["seed"])
            rows.append((r, rho, se, "ok"))
        except OutOfRange:
            rows.append((r, math.nan, math.nan, "no 1/e crossing within the shift grid"))
    return cols, rows


def _losses(opts) -> cv.DeterministicLosses:
    return cv.DeterministicLosses(
        opts["atmospheric_db_per_km"], opts["path_km"], opts["optics_db"], opts["memory_write_db"], opts["memory_read_db"]
    )


def fig4_gaussian(samples: SampleSet, opts: dict):
    m = statistics.channel_moments(samples)
    losses = _losses(opts)
    cols = ["xi", "shift_m", "W", "bracket1", "bracket2"]
    rows = []
    for xi in opts["xi"]:
        v = cv.simon_certifier(m, xi, losses)
        rows += [(xi, float(s), float(w), float(b1), float(b2)) for s, w, b1, b2 in zip(m.shift, v.W, v.bracket1, v.bracket2)]
    return cols, rows


def fig4_thresholds(samples: SampleSet, opts: dict):
    m = statistics.channel_moments(samples)
    losses = _losses(opts)
    cols = ["xi", "squeezing_db", "s_th_m", "status"]
    rows = []
    for xi in opts["xi"]:
        th = cv.threshold_shift(m, xi, losses)
        rows.append((xi, cv.squeezing_db(xi), th.s_th, th.status))
    return cols, rows


def fig5_bell(samples: SampleSet, opts: dict):
    cols = ["tau_s", "shift_m", "source", "decay_db_per_ms", "wind_v", "B", "stderr", "xi_opt"]
    rows = []
    for source in opts["sources"]:
        for decay in opts["memory_decay_db_per_ms"]:
            for v in opts["wind_v"]:
                exp = bell.DvExperiment(
                    source=source,
                    xi=opts["xi_grid"][0],
                    noise_mean=opts["noise_mean"],
                    deterministic_db=opts["deterministic_db"],
                    splitter_db=opts["splitter_db"],
                    memory_decay_db_per_ms=decay,
                    wind_v=v,
                    fock_cutoff=opts["fock_cutoff"],
                )
                for s in samples.shifts:
                    xi = None
                    if source == "pdc":
                        xi = bell.chsh_max_over_xi(exp, samples, s, opts["xi_grid"]).xi_opt
                    val = bell.chsh_parameter(exp, samples, s, xi=xi, n_boot=opts["bootstrap"])
                    rows.append((float(exp.delay(s)), float(s), source, decay, v, val.B, val.stderr, math.nan if xi is None else xi))
    return cols, rows


def fig6_nonclassicality(samples: SampleSet, opts: dict, seed: int = 0):
    state = nonclassical.SqueezedCoherentState(opts["alpha0"], opts["xi"])
    t_det = 10.0 ** (-opts["deterministic_db"] / 10.0)
    scan = nonclassical.selection_scan(
        state, samples, opts["eta_min"], samples.shifts, opts["N"], t_det, opts["events"], opts["resamples"], seed
    )
    cols = [
        "shift_m", "N", "Q", "Q_lo", "Q_hi", "Q_N", "Q_N_lo", "Q_N_hi", "violation", "violation_lo", "violation_hi",
    ]
    rows = [
        (r.shift, r.N, r.Q, *r.q_ci, r.Q_N, *r.qn_ci, r.violation, *r.violation_ci)
        for r in scan
    ]
    return (cols, rows), _fig6_thresholds(state, samples, opts, scan)


def _fig6_thresholds(state, samples, opts, scan):
    shifts = samples.shifts
    q = [r.Q for r in scan if r.N == opts["N"][0]]
    p_in = nonclassical.input_pnd(state)
    lhs = state.mean_photon_number / abs(nonclassical.mandel_q(p_in))
    ratio = [nonclassical.mandel_moment_ratio(samples, opts["eta_min"], s) for s in shifts]
    s_q = nonclassical.crossing_shift(shifts, q)
    s_moment = nonclassical.crossing_shift(shifts, [lhs - r for r in ratio])
    frac, frac_se = statistics.exceedance(samples, opts["eta_min"])
    cols = ["N", "s_Q_m", "s_moment_criterion_m", "s_Q_N_m", "s_witness_m", "exceedance", "exceedance_se"]
    rows = []
    for N in opts["N"]:
        sub = [r for r in scan if r.N == N]
        rows.append(
            (
                N,
                s_q,
                s_moment,
                nonclassical.crossing_shift(shifts, [r.Q_N for r in sub]),
                nonclassical.vanishing_shift(shifts, [r.violation for r in sub]),
                frac,
                frac_se,
            )
        )
    return cols, rows

