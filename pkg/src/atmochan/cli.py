"""Command-line entry point: ``atmochan simulate | analyze | selfcheck``.

Exit codes: 0 success, 2 configuration error, 3 numerical guard tripped,
4 selfcheck failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__, analysis
from .config import RunConfig, load_raw, preset_names, resolve
from .errors import ConfigError, EmptySelection, InvalidArgument, NumericalGuard
from .montecarlo import default_threads, simulate
from .samples import read_binary, read_csv, write_binary, write_csv
from .selfcheck import run_selfcheck

OUT_ENV = "ATMOCHAN_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_SELFCHECK = 0, 2, 3, 4

log = logging.getLogger("atmochan")


def _radius_tag(r: float) -> str:
    return f"{r:.4f}".rstrip("0").rstrip(".")


def _sample_path(out: Path, r: float, binary=False) -> Path:
    return out / f"samples_R{_radius_tag(r)}.{'bin' if binary else 'csv'}"


def _default_out(run: RunConfig) -> Path:
    root = Path(os.environ.get(OUT_ENV, "runs"))
    return root / f"{run.name}-{run.hash}"


def write_table(path: Path, columns, rows, config_hash: str):
    """CSV with ``# config_hash`` and ``# version`` header lines; floats written with repr."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={config_hash}\n# version={__version__}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
    return path


def _write_resolved(out: Path, run: RunConfig):
    body = {"config_hash": run.hash, "version": __version__, "config": run.resolved}
    (out / "resolved_config.json").write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")


def cmd_simulate(args) -> int:
    run = RunConfig.load(args.config, args.preset, args.seed)
    out = Path(args.out) if args.out else _default_out(run)
    out.mkdir(parents=True, exist_ok=True)
    _write_resolved(out, run)
    cfg = run.monte_carlo()
    total = cfg.n_samples
    step = max(1, total // 20)

    def progress(done, n):
        if done % step == 0 or done == n:
            log.info("%d / %d realizations", done, n)

    log.info("simulating %d realizations into %s with %d worker(s)", total, out, args.threads)
    sets = simulate(cfg, checkpoint=out / "checkpoint.jsonl", threads=args.threads, progress=progress)
    binary = run.simulation["binary"]
    for r, s in zip(run.geometry.aperture_radii, sets):
        write_csv(s, _sample_path(out, r))
        if binary:
            write_binary(s, _sample_path(out, r, binary=True))
    for w in sets[0].meta.get("warnings", []):
        log.warning(w)
    print(out)
    return EXIT_OK


def load_run(run_dir: Path):
    """Resolved RunConfig and {radius: SampleSet} from a simulate output directory."""
    try:
        body = json.loads((run_dir / "resolved_config.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{run_dir} is not a simulation output directory: {exc}") from None
    run = RunConfig.from_raw(body["config"])
    sets = {}
    for r in run.geometry.aperture_radii:
        csv_path, bin_path = _sample_path(run_dir, r), _sample_path(run_dir, r, binary=True)
        if csv_path.exists():
            sets[r] = read_csv(csv_path)
        elif bin_path.exists():
            sets[r] = read_binary(bin_path)
    if not sets:
        raise ConfigError(f"no sample files in {run_dir}")
    return run, sets


def _analysis_block(run: RunConfig, path):
    if path is None:
        return run.analysis
    raw = load_raw(path)
    if set(raw) <= {"analysis", "name"}:
        merged = dict(run.resolved)
        merged["analysis"] = raw.get("analysis", {})
        return resolve(merged)["analysis"]
    return resolve(raw)["analysis"]


def cmd_analyze(args) -> int:
    run_dir = Path(args.samples)
    run, sets = load_run(run_dir)
    opts = _analysis_block(run, args.config)
    out = Path(args.out) if args.out else run_dir
    out.mkdir(parents=True, exist_ok=True)
    primary = run.geometry.aperture_radii[0]
    seed = run.simulation["master_seed"] if args.seed is None else args.seed

    def emit(name, table):
        write_table(out / name, *table, run.hash)
        log.info("wrote %s", out / name)

    if "pdt" in opts:
        o = opts["pdt"]
        emit("fig2_conditional_pdt.csv", analysis.fig2_conditional_pdt(analysis.pick_radius(sets, o.get("aperture_radius"), primary), o))
    if "coherence" in opts:
        emit("fig3_pearson.csv", analysis.fig3_pearson(sets))
        emit("fig3_coherence.csv", analysis.fig3_coherence(sets, opts["coherence"]))
    if "cv" in opts:
        o = opts["cv"]
        s = analysis.pick_radius(sets, o.get("aperture_radius"), primary)
        emit("fig4_gaussian.csv", analysis.fig4_gaussian(s, o))
        emit("fig4_thresholds.csv", analysis.fig4_thresholds(s, o))
    if "dv" in opts:
        o = opts["dv"]
        emit("fig5_bell.csv", analysis.fig5_bell(analysis.pick_radius(sets, o.get("aperture_radius"), primary), o))
    if "nonclassicality" in opts:
        o = opts["nonclassicality"]
        table, thresholds = analysis.fig6_nonclassicality(analysis.pick_radius(sets, o.get("aperture_radius"), primary), o, seed)
        emit("fig6_nonclassicality.csv", table)
        emit("fig6_thresholds.csv", thresholds)
    if out != run_dir:
        _write_resolved(out, run)
    return EXIT_OK


def cmd_selfcheck(args) -> int:
    return EXIT_OK if run_selfcheck() else EXIT_SELFCHECK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="atmochan", description="Time-correlated atmospheric quantum channel simulator.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the Monte-Carlo and write sample files")
    src = sim.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="JSON configuration file")
    src.add_argument("--preset", help=f"built-in preset ({', '.join(preset_names())})")
    sim.add_argument("--out", help=f"output directory (default ${OUT_ENV}/<name>-<hash> or runs/...)")
    sim.add_argument("--threads", type=int, default=default_threads(), help="worker processes")
    sim.add_argument("--seed", type=int, help="override the master seed")
    sim.set_defaults(func=cmd_simulate)

    ana = sub.add_parser("analyze", help="compute figure tables from a simulation directory")
    ana.add_argument("samples", help="directory written by 'simulate'")
    ana.add_argument("--config", help="configuration whose analysis block replaces the stored one")
    ana.add_argument("--out", help="output directory (default: the samples directory)")
    ana.add_argument("--seed", type=int, help="seed for resampling (default: the master seed)")
    ana.set_defaults(func=cmd_analyze)

    chk = sub.add_parser("selfcheck", help="run the built-in oracle suite")
    chk.set_defaults(func=cmd_selfcheck)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, InvalidArgument, EmptySelection) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalGuard as exc:
        print(f"numerical guard: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
