"""Monte-Carlo sampling of multi-shift transmittances.

Seed rule: realization ``i`` of a run with master seed ``m`` uses seed
``SeedSequence([m, i]).generate_state(1, uint64)[0]``; screen ``j`` of that
realization uses ``SeedSequence([seed_i, j])`` in the same way. Results
therefore do not depend on worker count or on interruption and resumption.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InvalidArgument
from .propagation import ChannelPropagator, aperture_transmittance
from .samples import SampleSet
from .screens import sample_screen_set
from .turbulence import ChannelGeometry, TurbulenceParams, rytov_variance

log = logging.getLogger(__name__)

FLAG_WARN_FRACTION = 0.01


@dataclass(frozen=True)
class MonteCarloConfig:
    turbulence: TurbulenceParams
    geometry: ChannelGeometry
    shifts: tuple
    n_samples: int
    master_seed: int = 0
    ring_count: int = 1024
    amplitude_law: str = "deterministic"
    precision: str = "double"
    absorber: bool = True
    config_hash: str = ""
    extra_meta: dict = field(default_factory=dict, hash=False, compare=False)

    def __post_init__(self):
        shifts = tuple(float(s) for s in self.shifts)
        object.__setattr__(self, "shifts", shifts)
        if not shifts or shifts[0] != 0 or any(b <= a for a, b in zip(shifts, shifts[1:])):
            raise InvalidArgument("shift list must start at 0 and increase strictly")
        if self.n_samples < 1:
            raise InvalidArgument("n_samples must be >= 1")


def realization_seed(master_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([int(master_seed), int(index)]).generate_state(1, np.uint64)[0])


_WORKER = {}


def _propagator(cfg: MonteCarloConfig) -> ChannelPropagator:
    key = (cfg.geometry, cfg.precision, cfg.absorber)
    if _WORKER.get("key") != key:
        _WORKER["key"] = key
        _WORKER["prop"] = ChannelPropagator(cfg.geometry, cfg.precision, cfg.absorber)
    return _WORKER["prop"]


def realize(cfg: MonteCarloConfig, index: int):
    """One atmospheric realization: (id, seed, eta[radius, shift], aliasing flag)."""
    seed = realization_seed(cfg.master_seed, index)
    screens = sample_screen_set(cfg.turbulence, cfg.geometry, seed, cfg.ring_count, cfg.amplitude_law)
    fields = _propagator(cfg).propagate_shifts(screens, cfg.shifts)
    eta = [[aperture_transmittance(f, r) for f in fields] for r in cfg.geometry.aperture_radii]
    return index, seed, eta, any(f.aliasing_flag for f in fields)


def _realize_packed(args):
    return realize(*args)


def _load_checkpoint(path: Path, cfg_hash: str):
    done = {}
    if not path.exists():
        return done
    with open(path) as fh:
        lines = fh.read().split("\n")
    if not lines or not lines[0]:
        return done
    header = json.loads(lines[0])
    if header.get("config_hash") != cfg_hash:
        raise InvalidArgument(f"checkpoint {path} belongs to a different configuration")
    for line in lines[1:]:
        try:
            rec = json.loads(line)
        except json.JSONDecodeError:
            # Truncated last line of an interrupted run.
            continue
        done[rec["id"]] = (rec["id"], rec["seed"], rec["eta"], rec["flag"])
    return done


def _hash(cfg: MonteCarloConfig) -> str:
    if cfg.config_hash:
        return cfg.config_hash
    import hashlib

    blob = json.dumps(
        {
            "turbulence": asdict(cfg.turbulence),
            "geometry": asdict(cfg.geometry),
            "shifts": cfg.shifts,
            "n_samples": cfg.n_samples,
            "master_seed": cfg.master_seed,
            "ring_count": cfg.ring_count,
            "amplitude_law": cfg.amplitude_law,
            "precision": cfg.precision,
            "absorber": cfg.absorber,
        },
        sort_keys=True,
        default=str,
    )
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def simulate(cfg: MonteCarloConfig, checkpoint=None, threads: int = 1, progress=None, stop_after=None):
    """Run the Monte-Carlo and return one SampleSet per aperture radius.

    Parameters
    ----------
    checkpoint : path, optional
        JSON-lines file of completed realizations. Existing entries are
        reused, new ones appended as they complete.
    threads : int
        Worker processes; results are identical for any value.
    progress : callable, optional
        Called with (completed, total).
    stop_after : int, optional
        Stop after this many new realizations (used to emulate interruption).
    """
    cfg_hash = _hash(cfg)
    done = {}
    fh = None
    if checkpoint is not None:
        checkpoint = Path(checkpoint)
        done = _load_checkpoint(checkpoint, cfg_hash)
        fresh = not checkpoint.exists() or checkpoint.stat().st_size == 0
        fh = open(checkpoint, "a")
        if fresh:
            fh.write(json.dumps({"config_hash": cfg_hash}) + "\n")
            fh.flush()
    todo = [i for i in range(cfg.n_samples) if i not in done]
    if stop_after is not None:
        todo = todo[:stop_after]

    def record(res):
        done[res[0]] = res
        if fh is not None:
            fh.write(json.dumps({"id": res[0], "seed": res[1], "eta": res[2], "flag": res[3]}) + "\n")
            fh.flush()
        if progress is not None:
            progress(len(done), cfg.n_samples)

    try:
        if threads > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                chunk = max(1, min(16, len(todo) // (4 * threads)))
                for res in pool.map(_realize_packed, [(cfg, i) for i in todo], chunksize=chunk):
                    record(res)
        else:
            for i in todo:
                record(realize(cfg, i))
    finally:
        if fh is not None:
            fh.close()

    if len(done) < cfg.n_samples:
        return None
    return _assemble(cfg, done, cfg_hash)


def _assemble(cfg, done, cfg_hash):
    ids = np.arange(cfg.n_samples)
    seeds = np.array([done[i][1] for i in ids], dtype=np.uint64)
    eta = np.array([done[i][2] for i in ids], dtype=float)  # (n, radius, shift)
    flags = np.array([done[i][3] for i in ids], dtype=bool)
    warnings = []
    if flags.mean() > FLAG_WARN_FRACTION:
        msg = f"{flags.mean():.1%} of realizations tripped the aliasing guard"
        log.warning(msg)
        warnings.append(msg)
    out = []
    for r_idx, radius in enumerate(cfg.geometry.aperture_radii):
        meta = {
            "turbulence": asdict(cfg.turbulence),
            "geometry": {**asdict(cfg.geometry), "aperture_radii": list(cfg.geometry.aperture_radii)},
            "aperture_radius": radius,
            "master_seed": cfg.master_seed,
            "ring_count": cfg.ring_count,
            "amplitude_law": cfg.amplitude_law,
            "precision": cfg.precision,
            "rytov_variance": rytov_variance(cfg.turbulence, cfg.geometry),
            "config_hash": cfg_hash,
            "version": __version__,
            "warnings": warnings,
            **cfg.extra_meta,
        }
        out.append(SampleSet(cfg.shifts, ids, seeds, eta[:, r_idx, :], flags, meta))
    return out


def run_monte_carlo(cfg: MonteCarloConfig, **kwargs) -> SampleSet:
    """Sample set for the primary aperture radius (``geometry.aperture_radii[0]``)."""
    res = simulate(cfg, **kwargs)
    return None if res is None else res[0]


def default_threads() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)
