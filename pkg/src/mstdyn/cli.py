"""Command-line entry point.

Subcommands: run, synth-panel, synth-series, simulate-ladder,
fit-nucleation, fit-lambda, export-frames, kernel-estimate. Exit codes:
0 success, 2 config error, 3 data error, 4 fit error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import kinetics, laddersim, phasefit, synthgen
from .errors import ConfigError, DataError, FitError
from .pipeline import PipelineConfig, run_pipeline, validate_config


def _pipeline_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--prices", help="input CSV (date,ticker,close)")
    parser.add_argument("--survivorship", choices=["strict", "window"])
    parser.add_argument("--start")
    parser.add_argument("--end")
    parser.add_argument("--width", type=int, dest="width_td")
    parser.add_argument("--step", type=int, dest="step_td")
    parser.add_argument("--horizon", choices=["day", "week"])
    parser.add_argument("--follow")
    parser.add_argument("--exclude")
    parser.add_argument("--out", dest="out_dir")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--threads", type=int)


def _build_config(args, extra: dict | None = None) -> PipelineConfig:
    text = ""
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file {args.config!r} does not exist")
        text = path.read_text(encoding="utf-8")
    overrides = {}
    for key in ("prices", "survivorship", "start", "end", "width_td", "step_td",
                "horizon", "follow", "exclude", "out_dir", "seed", "threads"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    if extra:
        overrides.update(extra)
    return validate_config(text, overrides)


def _cmd_run(args) -> int:
    extra = {}
    if args.kinetics:
        extra["kinetics"] = True
    if args.fits:
        extra["fits"] = True
    if args.snapshots:
        extra["snapshots"] = True
    config = _build_config(args, extra)
    manifest = run_pipeline(config)
    print(json.dumps({"out_dir": str(config.resolved_out_dir()),
                      "frames": manifest["frames"],
                      "incomplete": manifest["incomplete"]}, indent=2))
    return 0


def _cmd_synth_panel(args) -> int:
    values = {}
    if args.spec:
        path = Path(args.spec)
        if not path.exists():
            raise ConfigError(f"spec file {args.spec!r} does not exist")
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise ConfigError(f"line {lineno}: expected key=value")
            key, raw = (p.strip() for p in body.split("=", 1))
            values[key] = raw
    known = {"n": int, "t_days": int, "market_vol": float, "idio_vol": float,
             "beta_low": float, "beta_high": float, "seed": int,
             "episode_asset": int, "episode_start": int, "episode_end": int,
             "peak_loading": float, "profile": str}
    for key in values:
        if key not in known:
            raise ConfigError(f"unknown synth-panel key {key!r}")
    parsed = {k: known[k](v) for k, v in values.items()}
    for key in known:
        flag = getattr(args, key, None)
        if flag is not None:
            parsed[key] = flag
    episode = None
    if "episode_asset" in parsed:
        episode = synthgen.PlantedEpisode(
            asset=parsed["episode_asset"],
            start=parsed.get("episode_start", 0),
            end=parsed.get("episode_end", parsed.get("t_days", 500)),
            peak_loading=parsed.get("peak_loading", 6.0),
            profile=parsed.get("profile", "ramp-plateau-ramp"))
    spec = synthgen.FactorModelSpec(
        n=parsed.get("n", 50), t_days=parsed.get("t_days", 500),
        market_vol=parsed.get("market_vol", 0.01),
        idio_vol=parsed.get("idio_vol", 0.02),
        beta_range=(parsed.get("beta_low", 0.6), parsed.get("beta_high", 1.4)),
        episode=episode, seed=parsed.get("seed", 0))
    panel = synthgen.generate_panel(spec)
    prices = synthgen.prices_from_returns(panel)
    from .ingest import panel_to_csv
    text = panel_to_csv(prices)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_synth_series(args) -> int:
    if args.law == "nucleation":
        params = {"a0": args.a0, "amplitude": args.amplitude, "z": args.z,
                  "t_crit": args.t_crit}
    else:
        params = {"a_left": args.a_left, "tau_left": args.tau_left,
                  "a_right": args.a_right, "tau_right": args.tau_right,
                  "t_lambda": args.t_lambda}
    missing = [k for k, v in params.items() if v is None]
    if missing:
        raise ConfigError(f"law {args.law!r} requires {', '.join(missing)}")
    series = synthgen.generate_law_series(args.law, params, args.length,
                                          noise_sigma=args.noise, seed=args.seed,
                                          integer=args.integer)
    lines = ["frame_index,value"]
    lines += [f"{i},{v!r}" for i, v in enumerate(series.tolist())]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_simulate_ladder(args) -> int:
    kernel = kinetics.kernel_from_json(Path(args.kernel).read_text(encoding="utf-8"))
    hist = laddersim.stationary_histogram(kernel, args.steps, burn_in=args.burn_in,
                                          seed=args.seed, k0=args.k0, thin=args.thin)
    lines = ["k,frequency"]
    lines += [f"{k},{float(hist[k])!r}" for k in range(1, kernel.k_cap + 1)]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _load_series(path: str, which: str) -> np.ndarray:
    column = {"leader": "k_leader", "delta": "delta"}.get(which, which)
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or column not in reader.fieldnames:
            if reader.fieldnames and "value" in reader.fieldnames:
                column = "value"
            else:
                raise DataError(f"column {column!r} not found in {path!r}")
        vals = [row[column] for row in reader]
    if not vals:
        raise DataError(f"no rows in {path!r}")
    if any(v == "" for v in vals):
        raise DataError(f"column {column!r} has missing entries")
    return np.array([float(v) for v in vals])


def _cmd_fit_nucleation(args) -> int:
    series = _load_series(args.input, args.series)
    if args.horizon == "week":
        series = phasefit.weekly_downsample(series)
    if args.t_crit is not None:
        fit = phasefit.fit_nucleation(series, args.t_crit)
        detection = None
    else:
        detection = phasefit.detect_t_crit(series)
        fit = phasefit.fit_nucleation(series, detection.candidate)
    report = {"horizon": args.horizon, "series": args.series,
              "a0": fit.a0, "t_crit": fit.t_crit, "amplitude": fit.amplitude,
              "z": fit.z, "z_stderr": fit.z_stderr, "residual": fit.residual,
              "fit_range": list(fit.fit_range), "n_points": fit.n_points}
    if detection is not None:
        report["detection"] = {"jump": detection.jump_candidate,
                               "jump_confident": detection.jump_confident,
                               "scan": detection.scan_candidate}
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _cmd_fit_lambda(args) -> int:
    series = _load_series(args.input, args.series)
    if args.horizon == "week":
        series = phasefit.weekly_downsample(series)
    fit = phasefit.fit_lambda_peak(series, guard=args.guard, prior=args.prior)
    report = {"horizon": args.horizon, "series": args.series,
              "t_lambda": fit.t_lambda, "a_left": fit.a_left,
              "tau_left": fit.tau_left, "a_right": fit.a_right,
              "tau_right": fit.tau_right, "residual": fit.residual,
              "guard": fit.guard, "n_left": fit.n_left, "n_right": fit.n_right}
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _cmd_export_frames(args) -> int:
    extra = {"snapshots": True}
    if args.frames_from is not None:
        extra["snapshot_from"] = args.frames_from
    if args.frames_to is not None:
        extra["snapshot_to"] = args.frames_to
    if args.format:
        extra["snapshot_format"] = args.format
    config = _build_config(args, extra)
    manifest = run_pipeline(config)
    exported = [name for name in manifest["outputs"] if name.startswith("frame_")]
    print(json.dumps({"out_dir": str(config.resolved_out_dir()),
                      "exported": len(exported)}, indent=2))
    return 0


def _cmd_kernel_estimate(args) -> int:
    extra = {"kinetics": True}
    if args.min_samples is not None:
        extra["min_samples"] = args.min_samples
    if args.stride is not None:
        extra["transition_stride"] = args.stride
    if args.frames_from is not None:
        extra["kinetics_from"] = args.frames_from
    if args.frames_to is not None:
        extra["kinetics_to"] = args.frames_to
    config = _build_config(args, extra)
    run_pipeline(config)
    print(json.dumps({"kernel": str(config.resolved_out_dir() / "kernel.json")},
                     indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mstdyn",
        description="Rolling-correlation spanning-tree dynamics toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="full pipeline")
    _pipeline_flags(p)
    p.add_argument("--kinetics", action="store_true")
    p.add_argument("--fits", action="store_true")
    p.add_argument("--snapshots", action="store_true")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("synth-panel", help="synthetic factor-model price panel")
    p.add_argument("--spec", help="key=value spec file")
    p.add_argument("--n", type=int)
    p.add_argument("--t-days", type=int, dest="t_days")
    p.add_argument("--seed", type=int)
    p.add_argument("--episode-asset", type=int, dest="episode_asset")
    p.add_argument("--episode-start", type=int, dest="episode_start")
    p.add_argument("--episode-end", type=int, dest="episode_end")
    p.add_argument("--peak-loading", type=float, dest="peak_loading")
    p.add_argument("--profile", choices=["ramp-plateau-ramp", "triangle"])
    p.add_argument("--out")
    p.set_defaults(func=_cmd_synth_panel, market_vol=None, idio_vol=None,
                   beta_low=None, beta_high=None)

    p = sub.add_parser("synth-series", help="closed-form law series")
    p.add_argument("--law", choices=["nucleation", "lambda"], required=True)
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--integer", action="store_true")
    p.add_argument("--a0", type=float)
    p.add_argument("--amplitude", type=float)
    p.add_argument("--z", type=float)
    p.add_argument("--t-crit", type=float, dest="t_crit")
    p.add_argument("--a-left", type=float, dest="a_left")
    p.add_argument("--tau-left", type=float, dest="tau_left")
    p.add_argument("--a-right", type=float, dest="a_right")
    p.add_argument("--tau-right", type=float, dest="tau_right")
    p.add_argument("--t-lambda", type=float, dest="t_lambda")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_synth_series)

    p = sub.add_parser("simulate-ladder", help="seeded degree-ladder walk")
    p.add_argument("--kernel", required=True, help="kernel JSON file")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--burn-in", type=int, default=0, dest="burn_in")
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--k0", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_simulate_ladder)

    p = sub.add_parser("fit-nucleation", help="growth-law fit of a series")
    p.add_argument("--input", required=True, help="CSV with the series")
    p.add_argument("--series", default="leader", help="leader|delta|<column>")
    p.add_argument("--horizon", choices=["day", "week"], default="day")
    p.add_argument("--t-crit", type=int, dest="t_crit")
    p.set_defaults(func=_cmd_fit_nucleation)

    p = sub.add_parser("fit-lambda", help="two-branch peak fit of a series")
    p.add_argument("--input", required=True, help="CSV with the series")
    p.add_argument("--series", default="leader", help="leader|delta|<column>")
    p.add_argument("--horizon", choices=["day", "week"], default="day")
    p.add_argument("--guard", type=int, default=3)
    p.add_argument("--prior", type=int)
    p.set_defaults(func=_cmd_fit_lambda)

    p = sub.add_parser("export-frames", help="write frame graph files")
    _pipeline_flags(p)
    p.add_argument("--from", type=int, dest="frames_from")
    p.add_argument("--to", type=int, dest="frames_to")
    p.add_argument("--format", choices=["dot", "graphml"])
    p.set_defaults(func=_cmd_export_frames)

    p = sub.add_parser("kernel-estimate", help="empirical transition kernel")
    _pipeline_flags(p)
    p.add_argument("--min-samples", type=int, dest="min_samples")
    p.add_argument("--stride", type=int)
    p.add_argument("--frames-from", type=int, dest="frames_from",
                   help="restrict counting to a frame (phase) range")
    p.add_argument("--frames-to", type=int, dest="frames_to")
    p.set_defaults(func=_cmd_kernel_estimate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except FitError as exc:
        print(f"fit error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
