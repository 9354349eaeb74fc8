"""Monte-Carlo transmittance records and their on-disk formats.

CSV layout::

    # key=<json value>        (one line per metadata key)
    realization_id,shift_m,eta
    0,0.0,0.53125...
    ...

Floats are written with ``repr`` so every value round-trips exactly. The
binary variant is a row-major little-endian float64 matrix (records x shifts)
plus a JSON sidecar carrying everything else.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidArgument

CSV_COLUMNS = "realization_id,shift_m,eta"


@dataclass(eq=False)
class SampleSet:
    shifts: np.ndarray
    realization_ids: np.ndarray
    seeds: np.ndarray
    eta: np.ndarray
    flags: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.shifts = np.asarray(self.shifts, dtype=float)
        self.realization_ids = np.asarray(self.realization_ids, dtype=np.int64)
        self.seeds = np.asarray(self.seeds, dtype=np.uint64)
        self.eta = np.asarray(self.eta, dtype=float)
        if self.flags is None:
            self.flags = np.zeros(len(self.realization_ids), dtype=bool)
        self.flags = np.asarray(self.flags, dtype=bool)
        n, k = len(self.realization_ids), len(self.shifts)
        if n < 1:
            raise InvalidArgument("a sample set needs at least one record")
        if self.eta.shape != (n, k) or self.seeds.shape != (n,) or self.flags.shape != (n,):
            raise InvalidArgument("record arrays have inconsistent shapes")
        if self.shifts[0] != 0 or np.any(np.diff(self.shifts) <= 0):
            raise InvalidArgument("shifts must start at 0 and be strictly increasing")
        if len(np.unique(self.realization_ids)) != n:
            raise InvalidArgument("realization ids must be unique")
        if np.any(~np.isfinite(self.eta)) or np.any(self.eta < 0) or np.any(self.eta > 1):
            raise InvalidArgument("transmittances must lie in [0, 1]")

    def __len__(self):
        return len(self.realization_ids)

    def column(self, shift: float) -> np.ndarray:
        """Transmittances of all records at ``shift`` (must be in the shift list)."""
        idx = np.flatnonzero(np.isclose(self.shifts, shift, rtol=0, atol=1e-12))
        if idx.size == 0:
            raise InvalidArgument(f"shift {shift} m is not in the sample shift list")
        return self.eta[:, idx[0]]

    @property
    def eta0(self) -> np.ndarray:
        return self.eta[:, 0]

    def equals(self, other: "SampleSet") -> bool:
        """Bitwise equality of all records and metadata."""
        return (
            np.array_equal(self.shifts, other.shifts)
            and np.array_equal(self.realization_ids, other.realization_ids)
            and np.array_equal(self.seeds, other.seeds)
            and np.array_equal(self.eta, other.eta)
            and np.array_equal(self.flags, other.flags)
            and self.meta == other.meta
        )

    @classmethod
    def synthetic(cls, eta, shifts, meta=None) -> "SampleSet":
        """Wrap a (records x shifts) array with consecutive ids and zero seeds."""
        eta = np.atleast_2d(np.asarray(eta, dtype=float))
        n = eta.shape[0]
        return cls(shifts, np.arange(n), np.zeros(n, dtype=np.uint64), eta, meta=dict(meta or {}))


def write_csv(samples: SampleSet, path) -> Path:
    path = Path(path)
    head = dict(samples.meta)
    head["shifts"] = [float(s) for s in samples.shifts]
    head["record_seeds"] = [int(s) for s in samples.seeds]
    head["flagged_ids"] = [int(i) for i in samples.realization_ids[samples.flags]]
    with open(path, "w", newline="\n") as fh:
        for key, value in head.items():
            fh.write(f"# {key}={json.dumps(value, sort_keys=True)}\n")
        fh.write(CSV_COLUMNS + "\n")
        shifts = [repr(float(s)) for s in samples.shifts]
        for rid, row in zip(samples.realization_ids, samples.eta):
            for s, e in zip(shifts, row):
                fh.write(f"{int(rid)},{s},{float(e)!r}\n")
    return path


def read_csv(path) -> SampleSet:
    head = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                head[key] = json.loads(value)
            elif line == CSV_COLUMNS or not line:
                continue
            else:
                rid, s, e = line.split(",")
                rows.append((int(rid), float(s), float(e)))
    shifts = np.asarray(head.pop("shifts"), dtype=float)
    seeds = head.pop("record_seeds")
    flagged = set(head.pop("flagged_ids"))
    k = len(shifts)
    if len(rows) % k:
        raise InvalidArgument(f"{path}: row count is not a multiple of the shift count")
    ids = np.array([r[0] for r in rows[::k]], dtype=np.int64)
    eta = np.array([r[2] for r in rows], dtype=float).reshape(-1, k)
    file_shifts = np.array([r[1] for r in rows[:k]])
    if not np.array_equal(file_shifts, shifts):
        raise InvalidArgument(f"{path}: row shifts disagree with the header")
    flags = np.array([int(i) in flagged for i in ids], dtype=bool)
    return SampleSet(shifts, ids, np.array(seeds, dtype=np.uint64), eta, flags, head)


def write_binary(samples: SampleSet, path) -> Path:
    """Write ``<path>.bin`` and ``<path>.json``; returns the .bin path."""
    path = Path(path).with_suffix(".bin")
    samples.eta.astype("<f8").tofile(path)
    sidecar = {
        "dtype": "float64",
        "byteorder": "little",
        "shape": list(samples.eta.shape),
        "order": "row-major",
        "shifts": [float(s) for s in samples.shifts],
        "realization_ids": [int(i) for i in samples.realization_ids],
        "record_seeds": [int(s) for s in samples.seeds],
        "flags": [bool(f) for f in samples.flags],
        "meta": samples.meta,
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=1, sort_keys=True))
    return path


def read_binary(path) -> SampleSet:
    path = Path(path).with_suffix(".bin")
    side = json.loads(path.with_suffix(".json").read_text())
    eta = np.fromfile(path, dtype="<f8").reshape(side["shape"])
    return SampleSet(
        side["shifts"],
        side["realization_ids"],
        np.array(side["record_seeds"], dtype=np.uint64),
        eta,
        side["flags"],
        side["meta"],
    )


def write_array(array: np.ndarray, path, **meta) -> Path:
    """Dump a real or complex 2-D array as little-endian float64 plus JSON sidecar.

    Complex arrays are stored as interleaved (re, im) pairs.
    """
    path = Path(path).with_suffix(".bin")
    a = np.ascontiguousarray(array)
    kind = "complex128" if np.iscomplexobj(a) else "float64"
    a.astype("<c16" if kind == "complex128" else "<f8").tofile(path)
    side = {"dtype": kind, "byteorder": "little", "order": "row-major", "shape": list(a.shape)}
    side.update(meta)
    path.with_suffix(".json").write_text(json.dumps(side, indent=1, sort_keys=True))
    return path


def read_array(path):
    path = Path(path).with_suffix(".bin")
    side = json.loads(path.with_suffix(".json").read_text())
    dt = "<c16" if side["dtype"] == "complex128" else "<f8"
    return np.fromfile(path, dtype=dt).reshape(side["shape"]), side
