"""Command-line entry point: ``railguard validate|run|sweep``."""
from __future__ import annotations

import argparse
import logging
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .engine import Mode, run_scenario
from .errors import ParseError, ValidationError
from .generate import MIXED, SAFE_CORPUS, TWO_WAY_BANDED, sweep_scenario
from .report import csv_text, row_from_report
from .scenario_io import dump_scenario, load_scenario

log = logging.getLogger("railguard")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INVALID = 2

TRACE = 5
LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING,
          "info": logging.INFO, "trace": TRACE}
PROFILES = {"mixed": MIXED, "directional": SAFE_CORPUS, "two-way-banded": TWO_WAY_BANDED}


def setup_logging() -> None:
    logging.addLevelName(TRACE, "TRACE")
    name = os.environ.get("RAILGUARD_LOG", "warn").strip().lower()
    level = LEVELS.get(name, logging.WARNING)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    if name and name not in LEVELS:
        log.warning("unknown RAILGUARD_LOG value %r, using 'warn'", name)


def parse_counts(text: str) -> list[int]:
    """Train counts from ``a..b[:step]``, a comma list, or a single number."""
    text = text.strip()
    m = re.fullmatch(r"(\d+)\s*\.\.\s*(\d+)(?:\s*:\s*(\d+))?", text)
    if m:
        lo, hi = int(m.group(1)), int(m.group(2))
        step = int(m.group(3) or 1)
        if step < 1:
            raise ValidationError("step must be >= 1")
        counts = list(range(lo, hi + 1, step))
    elif re.fullmatch(r"\d+(\s*,\s*\d+)*", text):
        counts = [int(x) for x in text.split(",")]
    else:
        raise ValidationError(f"cannot read train counts from {text!r}; use a..b[:step]")
    if not counts:
        raise ValidationError(f"train count range {text!r} is empty")
    if min(counts) < 1:
        raise ValidationError("train counts must be >= 1")
    return counts


def _trace_sink():
    if log.isEnabledFor(TRACE):
        return lambda line: log.log(TRACE, line)
    return None


def _timed_run(scenario):
    t0 = time.perf_counter()
    report = run_scenario(scenario, trace=_trace_sink())
    return report, (time.perf_counter() - t0) * 1000.0


def cmd_validate(args) -> int:
    sc = load_scenario(args.file)
    net = sc.network
    print(f"ok: {net.n_stations} stations, {net.n_junctions} junctions, "
          f"{len(net.tracks)} tracks, {len(sc.trains)} trains")
    return EXIT_OK


def cmd_run(args) -> int:
    sc = load_scenario(args.file)
    if args.mode:
        sc = sc.with_mode(args.mode)
    report, ms = _timed_run(sc)
    row = row_from_report(report, 0.0 if args.no_timing else ms)
    text = csv_text([row])
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{sc.name}.csv").write_text(text, encoding="utf-8")
        (out / f"{sc.name}.events.log").write_text(report.event_log(), encoding="utf-8")
    if report.occurred:
        log.warning("%d collision(s) occurred", report.occurred)
    log.info("%s: detected=%d avoided=%d occurred=%d messages=%d", sc.name, report.detected,
             report.avoided, report.occurred, report.messages_total)
    return EXIT_OK


def _sweep_point(job):
    base, m, seed, mode, profile, no_timing = job
    sc = sweep_scenario(base, m, seed, mode, profile)
    report, ms = _timed_run(sc)
    return sc, row_from_report(report, 0.0 if no_timing else ms), report.event_log()


def cmd_sweep(args) -> int:
    base = load_scenario(args.file)
    counts = parse_counts(args.trains)
    modes = [Mode(m.strip().lower()) for part in args.modes for m in part.split(",") if m.strip()]
    if not modes:
        raise ValidationError("at least one mode is required")
    if args.horizon is not None:
        base = replace(base, horizon=args.horizon)
    profile = PROFILES[args.profile]
    jobs = [(base, m, args.seed, mode, profile, args.no_timing) for m in counts for mode in modes]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    text = csv_text([row for _, row, _ in results])
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        (out / "scenarios").mkdir(parents=True, exist_ok=True)
        (out / "logs").mkdir(parents=True, exist_ok=True)
        (out / "sweep.csv").write_text(text, encoding="utf-8")
        for sc, row, events in results:
            stem = f"m{row.trains:03d}-{row.mode}"
            dump_scenario(sc, out / "scenarios" / f"m{row.trains:03d}.toml")
            (out / "logs" / f"{stem}.events.log").write_text(events, encoding="utf-8")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="railguard",
                                 description="Collision detection and resolution simulator for rail networks")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="simulate one scenario")
    p.add_argument("file")
    p.add_argument("--mode", choices=[m.value for m in Mode], default=None,
                   help="override the scenario's coordination mode")
    p.add_argument("--out", default=None, help="directory for the CSV row and event log")
    p.add_argument("--no-timing", action="store_true",
                   help="write runtime_ms as 0 so repeated runs are byte-identical")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run generated scenarios over a range of train counts")
    p.add_argument("file", help="base scenario; its network and run settings are reused")
    p.add_argument("--trains", required=True, help="train counts, e.g. 2..30:2")
    p.add_argument("--modes", nargs="+", default=["distributed", "centralized"])
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=int, default=None, help="override the base horizon (ticks)")
    p.add_argument("--profile", choices=sorted(PROFILES), default="mixed",
                   help="how trains are drawn (default: mixed directions and speeds)")
    p.add_argument("--out", default=None)
    p.add_argument("--no-timing", action="store_true")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
