"""The ``evfilt`` command line.

Subcommands: add-noise, mix, filter, eval, sweep, pipeline, bench.
Every command that writes an output also writes a JSON manifest
sidecar. A ``--config FILE`` of ``key=value`` lines supplies defaults
that explicit flags override.

Exit codes: 0 ok, 2 input-format error, 3 configuration error,
4 internal invariant breach.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import nnb_filter, stcf_filter
from .core import FilterConfig, ScoredStream, filter_stream
from .errors import (
    ConfigError,
    CoordinateError,
    EvfiltError,
    FormatError,
    GeometryMismatchError,
    InternalError,
    LabelError,
    TimestampOrderError,
)
from .events import EventStream, merge_streams, read_events, relabel_noise, write_events
from .hw import (
    DEFAULT_OVERHEAD_CYCLES,
    HwParams,
    hw_filter_stream,
    pipeline_simulate,
    pipeline_stats,
    throughput_report,
)
from .manifest import RunManifest, sha256_file
from .metrics import auprc_from_scores, roc_from_scores
from .noise import NoiseConfig, generate_noise

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CONFIG = 3
EXIT_INTERNAL = 4

_INPUT_ERRORS = (FormatError, CoordinateError, TimestampOrderError,
                 GeometryMismatchError, LabelError, FileNotFoundError, OSError)

REFERENCE_ALGOS = ("dif", "bif")
ALL_ALGOS = ("dif", "bif", "dif-hw", "nnb", "stcf")


def _fmt_of(path: str, explicit: str | None) -> str:
    if explicit:
        return explicit
    return "csv" if str(path).endswith(".csv") else "evt64"


def _read(path: str, fmt: str | None, width: int | None, height: int | None) -> EventStream:
    return read_events(path, _fmt_of(path, fmt), width=width, height=height)


def _parse_algo(token: str):
    """'stcf2' -> ('stcf', 2); plain names pass through with n=None."""
    if token.startswith("stcf") and token[4:].isdigit():
        return "stcf", int(token[4:])
    if token in ALL_ALGOS:
        return token, None
    raise ConfigError(f"unknown algorithm {token!r}")


def _filter_config(args) -> FilterConfig:
    return FilterConfig(
        scale=args.scale,
        update_shift=args.update_shift,
        filter_length_us=args.filter_len_us,
        global_update_period_us=args.global_update_us,
        init_interval_us=args.init_interval_us,
    )


def _hw_params(args) -> HwParams:
    return HwParams(trunc_bits=args.trunc_bits, k_sat_bits=args.sat_bits,
                    update_shift=args.update_shift)


def run_algo(stream: EventStream, algo: str, n: int | None, args) -> ScoredStream:
    if algo in REFERENCE_ALGOS:
        return filter_stream(stream, _filter_config(args), algo, engine=args.engine)
    if algo == "dif-hw":
        return hw_filter_stream(stream, _filter_config(args), _hw_params(args),
                                engine=args.engine)
    if algo == "nnb":
        return nnb_filter(stream, args.filter_len_us, engine=args.engine)
    if algo == "stcf":
        return stcf_filter(stream, n if n is not None else args.n,
                           args.filter_len_us, engine=args.engine)
    raise ConfigError(f"unknown algorithm {algo!r}")


def _write_scores_csv(scored: ScoredStream, path) -> None:
    s = scored.stream
    with open(path, "w", encoding="ascii") as fh:
        fh.write("t,x,y,p,score,decision\n")
        for i in range(len(s)):
            fh.write(f"{s.t[i]},{s.x[i]},{s.y[i]},{s.p[i]},"
                     f"{float(scored.scores[i])!r},{int(scored.decisions[i])}\n")


def _read_scores_csv(path):
    """Returns (p, score) arrays from a scores CSV."""
    ps, scores, ts = [], [], []
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if header != "t,x,y,p,score,decision":
            raise FormatError(f"{path}: unexpected scores header {header!r}")
        for i, line in enumerate(fh):
            parts = line.strip().split(",")
            if len(parts) != 6:
                raise FormatError(f"{path}: record {i} has {len(parts)} fields")
            ts.append(int(parts[0]))
            ps.append(int(parts[3]))
            scores.append(float(parts[4]))
    return np.asarray(ts), np.asarray(ps, dtype=np.uint8), np.asarray(scores)


class _Scores:
    """Adapter giving metrics the scored-stream surface for CSV data."""

    def __init__(self, p, scores):
        self.scores = scores
        self._p = p

    def is_noise(self):
        return self._p >= 2


# ---------------------------------------------------------------- commands


def cmd_add_noise(args) -> int:
    t0 = time.perf_counter()
    cfg = NoiseConfig(width=args.width, height=args.height, rate_hz_px=args.rate,
                      duration_us=args.duration_us, time_step_us=args.step_us,
                      seed=args.seed)
    stream = generate_noise(cfg)
    fmt = _fmt_of(args.out, args.format)
    write_events(stream, args.out, fmt)
    RunManifest(
        command="add-noise",
        config={"width": args.width, "height": args.height, "rate_hz_px": args.rate,
                "duration_us": args.duration_us, "step_us": args.step_us,
                "format": fmt, "rng": "numpy-pcg64"},
        seeds={"noise": args.seed},
        wall_clock_s=time.perf_counter() - t0,
    ).write(args.out)
    print(f"wrote {len(stream)} noise events to {args.out}")
    return EXIT_OK


def cmd_mix(args) -> int:
    t0 = time.perf_counter()
    clean = _read(args.clean, args.format, args.width, args.height)
    noise = _read(args.noise, args.format, args.width, args.height)
    if args.relabel:
        noise = relabel_noise(noise)
    elif not bool(np.all(noise.is_noise())) and len(noise):
        raise ConfigError(
            "noise stream carries signal polarities; pass --relabel to label it")
    merged = merge_streams(clean, noise)
    fmt = _fmt_of(args.out, args.format)
    write_events(merged, args.out, fmt)
    RunManifest(
        command="mix",
        config={"relabel": args.relabel, "format": fmt},
        inputs={str(args.clean): sha256_file(args.clean),
                str(args.noise): sha256_file(args.noise)},
        wall_clock_s=time.perf_counter() - t0,
    ).write(args.out)
    print(f"wrote {len(merged)} events ({len(clean)} clean + {len(noise)} noise) "
          f"to {args.out}")
    return EXIT_OK


def cmd_filter(args) -> int:
    t0 = time.perf_counter()
    if args.out is None and args.emit_scores is None:
        raise ConfigError("nothing to do: give --out and/or --emit-scores")
    stream = _read(args.input, args.format, args.width, args.height)
    algo, n = _parse_algo(args.algo)
    scored = run_algo(stream, algo, n, args)
    wall = time.perf_counter() - t0
    meps = len(stream) / wall / 1e6 if wall > 0 else None

    config = {"algo": args.algo, "scale": args.scale, "update_shift": args.update_shift,
              "filter_len_us": args.filter_len_us,
              "global_update_us": args.global_update_us, "n": args.n,
              "trunc_bits": args.trunc_bits, "sat_bits": args.sat_bits,
              "engine": args.engine}
    inputs = {str(args.input): sha256_file(args.input)}
    if args.out:
        passed = scored.passed_stream()
        write_events(passed, args.out, _fmt_of(args.out, args.format))
        RunManifest(command="filter", config=config, inputs=inputs,
                    wall_clock_s=wall, meps=meps).write(args.out)
        print(f"passed {len(passed)}/{len(stream)} events -> {args.out}")
    if args.emit_scores:
        _write_scores_csv(scored, args.emit_scores)
        RunManifest(command="filter", config=config, inputs=inputs,
                    wall_clock_s=wall, meps=meps).write(args.emit_scores)
        print(f"scores -> {args.emit_scores}")
    return EXIT_OK


def cmd_eval(args) -> int:
    t0 = time.perf_counter()
    ts, ps, scores = _read_scores_csv(args.scores)
    if args.skip_us > 0 and len(ts):
        keep = ts >= ts[0] + args.skip_us
        ps, scores = ps[keep], scores[keep]
    adapter = _Scores(ps, scores)
    roc = roc_from_scores(adapter)
    pr = auprc_from_scores(adapter)
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            fh.write("threshold,fpr,tpr\n")
            for th, fp, tp in zip(roc.thresholds, roc.fpr, roc.tpr):
                fh.write(f"{float(th)!r},{float(fp)!r},{float(tp)!r}\n")
        RunManifest(
            command="eval",
            config={"skip_us": args.skip_us},
            inputs={str(args.scores): sha256_file(args.scores)},
            wall_clock_s=time.perf_counter() - t0,
        ).write(args.out)
    if args.pr_out:
        with open(args.pr_out, "w", encoding="ascii") as fh:
            fh.write("threshold,recall,precision\n")
            for th, rc, pc in zip(pr.thresholds, pr.recall, pr.precision):
                fh.write(f"{float(th)!r},{float(rc)!r},{float(pc)!r}\n")
    print(f"AUROC {roc.auroc:.6f}")
    print(f"AUPRC {pr.auprc:.6f}")
    return EXIT_OK


def _sweep_cells(args):
    rates = [float(r) for r in args.rates.split(",") if r]
    seeds = [int(s) for s in args.seeds.split(",") if s]
    scales = [int(s) for s in args.scales.split(",") if s]
    shifts = [int(s) for s in args.shifts.split(",") if s]
    for token in args.algos.split(","):
        algo, n = _parse_algo(token.strip())
        area_axes = algo in ("dif", "bif", "dif-hw")
        for rate in rates:
            for seed in seeds:
                if area_axes:
                    for scale in scales:
                        for shift in shifts:
                            yield token, algo, n, rate, seed, scale, shift
                else:
                    yield token, algo, n, rate, seed, 0, 0


def cmd_sweep(args) -> int:
    t0 = time.perf_counter()
    clean = _read(args.input, args.format, args.width, args.height)
    duration = int(clean.t[-1]) + 1 if len(clean) else args.step_us
    out = Path(args.out)

    # resume: the manifest sidecar records which cells completed
    done = set()
    rows = []
    if out.exists():
        manifest_cells = None
        try:
            manifest_cells = set(RunManifest.load(out).config.get("cells", []))
        except FileNotFoundError:
            pass
        for line in out.read_text().splitlines()[1:]:
            if line:
                key = ",".join(line.split(",")[:5])
                if manifest_cells is None or key in manifest_cells:
                    rows.append(line)
                    done.add(key)

    noise_cache = {}
    added = 0
    for token, algo, n, rate, seed, scale, shift in _sweep_cells(args):
        key = f"{token},{rate!r},{seed},{scale},{shift}"
        if key in done:
            continue
        ck = (rate, seed)
        if ck not in noise_cache:
            ncfg = NoiseConfig(width=clean.width, height=clean.height,
                               rate_hz_px=rate, duration_us=max(duration, args.step_us),
                               time_step_us=args.step_us, seed=seed)
            noise_cache[ck] = generate_noise(ncfg)
        mixed = merge_streams(clean, noise_cache[ck])
        cell = argparse.Namespace(**vars(args))
        if scale:
            cell.scale, cell.update_shift = scale, shift
        scored = run_algo(mixed, algo, n, cell)
        roc = roc_from_scores(scored)
        pr = auprc_from_scores(scored)
        rows.append(f"{key},{roc.auroc!r},{pr.auprc!r}")
        done.add(key)
        added += 1

    with open(out, "w", encoding="ascii") as fh:
        fh.write("algo,rate,seed,scale,shift,auroc,auprc\n")
        for row in rows:
            fh.write(row + "\n")
    RunManifest(
        command="sweep",
        config={"algos": args.algos, "rates": args.rates, "scales": args.scales,
                "shifts": args.shifts, "filter_len_us": args.filter_len_us,
                "global_update_us": args.global_update_us,
                "step_us": args.step_us, "cells": sorted(done)},
        inputs={str(args.input): sha256_file(args.input)},
        seeds={"noise": args.seeds},
        wall_clock_s=time.perf_counter() - t0,
    ).write(out)
    print(f"sweep: {added} new cells, {len(rows)} total -> {out}")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    clock_hz = args.clock_mhz * 1e6
    if args.input:
        stream = _read(args.input, args.format, args.width, args.height)
        cfg = _filter_config(args)
        decisions, stats = pipeline_simulate(stream, cfg, _hw_params(args), clock_hz,
                                             overhead_cycles=args.overhead_cycles)
        print(f"simulated {len(stream)} events, {int(decisions.sum())} passed")
    else:
        stats = pipeline_stats(args.width, args.height, args.scale, clock_hz,
                               args.global_update_us,
                               overhead_cycles=args.overhead_cycles)
    report = throughput_report(stats, "csv" if args.csv else "text")
    print(report, end="")
    if args.out:
        Path(args.out).write_text(report)
        RunManifest(command="pipeline",
                    config={"clock_mhz": args.clock_mhz, "width": args.width,
                            "height": args.height, "scale": args.scale,
                            "global_update_us": args.global_update_us,
                            "overhead_cycles": args.overhead_cycles},
                    ).write(args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    stream = _read(args.input, args.format, args.width, args.height)
    algo, n = _parse_algo(args.algo)
    run_algo(stream, algo, n, args)  # warm-up: JIT compilation, page-in
    best = None
    for _ in range(args.repeat):
        t0 = time.perf_counter()
        scored = run_algo(stream, algo, n, args)
        dt = time.perf_counter() - t0
        best = dt if best is None else min(best, dt)
    meps = len(stream) / best / 1e6
    print(f"events {len(stream)}")
    print(f"best wall time {best:.4f} s")
    print(f"throughput {meps:.2f} MEPS")

    agreement = None
    if args.compare:
        algo2, n2 = _parse_algo(args.compare)
        other = run_algo(stream, algo2, n2, args)
        agreement = float(np.mean(scored.decisions == other.decisions))
        print(f"decision agreement vs {args.compare}: {agreement:.6f}")

    if args.out:
        Path(args.out).write_text(
            f"events,{len(stream)}\nseconds,{best!r}\nmeps,{meps!r}\n"
            + (f"agreement,{agreement!r}\n" if agreement is not None else ""))
        RunManifest(command="bench",
                    config={"algo": args.algo, "compare": args.compare,
                            "repeat": args.repeat, "engine": args.engine},
                    inputs={str(args.input): sha256_file(args.input)},
                    wall_clock_s=best, meps=meps).write(args.out)
    return EXIT_OK


# ----------------------------------------------------------------- parser


def _add_geometry(p):
    p.add_argument("--width", type=int, default=None,
                   help="sensor width (required for CSV inputs)")
    p.add_argument("--height", type=int, default=None)
    p.add_argument("--format", choices=["evt64", "csv"], default=None,
                   help="override the extension-based format guess")


def _add_filter_flags(p):
    p.add_argument("--scale", type=int, default=16, help="subarea side in pixels")
    p.add_argument("--update-shift", type=int, default=2,
                   help="IIR shift o, update factor 2**-o")
    p.add_argument("--filter-len-us", type=float, default=200.0,
                   help="pass threshold / baseline window, microseconds")
    p.add_argument("--global-update-us", type=int, default=20_000,
                   help="inactive-area update period, 0 disables")
    p.add_argument("--init-interval-us", type=float, default=None,
                   help="cold-start interval (default: the global update period)")
    p.add_argument("--n", type=int, default=2, help="STCF support count")
    p.add_argument("--trunc-bits", type=int, default=8,
                   help="bits truncated from hardware coefficients")
    p.add_argument("--sat-bits", type=int, default=12,
                   help="hardware coefficient width after saturation")
    p.add_argument("--engine", choices=["auto", "python", "numba"], default="auto")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="evfilt", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--version", action="version", version=f"evfilt {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("add-noise", help="generate labeled Bernoulli noise")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--rate", type=float, required=True, help="Hz per pixel")
    p.add_argument("--duration-us", type=int, required=True)
    p.add_argument("--step-us", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=["evt64", "csv"], default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_add_noise)

    p = sub.add_parser("mix", help="merge a clean stream with labeled noise")
    p.add_argument("--clean", required=True)
    p.add_argument("--noise", required=True)
    p.add_argument("--relabel", action="store_true",
                   help="relabel the noise stream's polarities to {2,3} first")
    p.add_argument("--out", required=True)
    _add_geometry(p)
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("filter", help="run a filter over a stream")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--algo", default="dif",
                   help="dif | bif | dif-hw | nnb | stcf (or stcfN)")
    p.add_argument("--out", default=None, help="write passing events here")
    p.add_argument("--emit-scores", default=None, help="write per-event scores CSV")
    _add_geometry(p)
    _add_filter_flags(p)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("eval", help="ROC/PR evaluation of a scores CSV")
    p.add_argument("--scores", required=True)
    p.add_argument("--out", default=None, help="ROC points CSV")
    p.add_argument("--pr-out", dest="pr_out", default=None, help="PR points CSV")
    p.add_argument("--skip-us", type=int, default=0,
                   help="drop the first N microseconds (warm-up)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="AUROC/AUPRC grid over algos and noise rates")
    p.add_argument("--in", dest="input", required=True, help="clean stream")
    p.add_argument("--rates", default="0.01,0.1,0.25,0.5,1,2,5")
    p.add_argument("--algos", default="dif,nnb,stcf2")
    p.add_argument("--scales", default="16")
    p.add_argument("--shifts", default="2")
    p.add_argument("--seeds", default="0")
    p.add_argument("--step-us", type=int, default=100)
    p.add_argument("--out", required=True)
    _add_geometry(p)
    _add_filter_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("pipeline", help="cycle-level pipeline model / throughput math")
    p.add_argument("--clock-mhz", type=float, required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--in", dest="input", default=None,
                   help="optionally simulate this stream cycle by cycle")
    p.add_argument("--overhead-cycles", type=int, default=DEFAULT_OVERHEAD_CYCLES)
    p.add_argument("--csv", action="store_true")
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=["evt64", "csv"], default=None)
    _add_filter_flags(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("bench", help="end-to-end throughput measurement")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--algo", default="dif")
    p.add_argument("--compare", default=None,
                   help="second algorithm; reports decision agreement")
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--out", default=None)
    _add_geometry(p)
    _add_filter_flags(p)
    p.set_defaults(func=cmd_bench)

    return ap


def _load_config_file(path: str) -> list[str]:
    """key=value lines -> CLI tokens, inserted before explicit flags."""
    tokens = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        tokens += [f"--{key.replace('_', '-')}", value]
    return tokens


def _expand_config(argv: list[str]) -> list[str]:
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise ConfigError("--config needs a file path")
    tokens = _load_config_file(argv[i + 1])
    rest = argv[:i] + argv[i + 2:]
    if not rest:
        raise ConfigError("--config requires a subcommand")
    # defaults go right after the subcommand so explicit flags win
    return rest[:1] + tokens + rest[1:]


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _expand_config(argv)
        args = build_parser().parse_args(argv)
        return args.func(args)
    except _INPUT_ERRORS as exc:
        print(f"evfilt: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConfigError as exc:
        print(f"evfilt: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InternalError, AssertionError) as exc:
        print(f"evfilt: internal invariant breach: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except EvfiltError as exc:
        print(f"evfilt: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
