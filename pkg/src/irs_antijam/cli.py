"""``simulate`` command line entry point."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .disco import clt_diagnostics, write_clt_csv
from .harness import DEFAULT_GRIDS, SWEEP_KINDS, BenchmarkId, TrialState, emit_report, sweep
from .scenario import desk_profile, load_scenario, paper_profile, rng_stream

PROFILES = {"desk": desk_profile, "paper": paper_profile}


def _grid(kind, text):
    if text is None:
        return list(DEFAULT_GRIDS[kind])
    cast = float if kind == "power" else int
    return [cast(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="simulate",
        description="Ergodic-rate sweeps for a multi-user downlink under surface-based jamming.")
    p.add_argument("--config", type=Path, help="scenario file (dotted key = value lines)")
    p.add_argument("--sweep", required=True, choices=SWEEP_KINDS)
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--profile", choices=sorted(PROFILES), default="desk")
    p.add_argument("--benchmarks", help="comma-separated subset of "
                   + ",".join(b.value for b in BenchmarkId))
    p.add_argument("--grid", help="comma-separated sweep values (per-user dBm for power)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--emit-diagnostics", action="store_true",
                   help="also write an RCG trace and CLT diagnostics")
    return p


def run(args) -> Path:
    config = PROFILES[args.profile]()
    if args.config is not None:
        config = load_scenario(args.config, base=config)
    changes = {}
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.seed is not None:
        changes["seed"] = args.seed
    if changes:
        config = config.replace(**changes)
    benchmarks = ([BenchmarkId(b.strip()) for b in args.benchmarks.split(",")]
                  if args.benchmarks else list(BenchmarkId))
    grid = _grid(args.sweep, args.grid)
    report = sweep(args.sweep, grid, config, benchmarks=benchmarks, workers=args.workers)

    args.out.mkdir(parents=True, exist_ok=True)
    csv_path = emit_report(report, args.out / f"sweep_{args.sweep}.csv",
                           args.out / "run_manifest.json")
    if args.emit_diagnostics:
        state = TrialState(config, 0)
        state.continuous_irs()
        state.rcg_trace.to_csv(args.out / "rcg_trace.csv")
        clt = clt_diagnostics(config, state.geometry, 2000, rng_stream(config.seed, 0, "clt"))
        write_clt_csv([clt], args.out / "clt_diagnostics.csv")
    return csv_path


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        path = run(args)
    except Exception as exc:  # one diagnostic line, nonzero exit
        print(f"simulate: error: {exc}", file=sys.stderr)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
