"""Pipeline orchestration: config parsing, the fused frame scan, series
output and the reproducibility manifest.

Configuration is a plain key=value file (CLI flags override). A run
executes ingest -> rolling scan -> per-frame observables (and optionally
transition counting, phase fits and frame exports), writes one CSV per
series family plus JSON reports, and finishes with a manifest listing the
config hash, library versions and a sha256 per output. Worker threads only
change scheduling: per-frame work is pure and merged in frame order, so
byte-identical outputs are produced for any thread count.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import __version__, kinetics, observables, phasefit, snapshots
from .corrnet import TreeFrame, WindowSpec, _RollingScan, _mst_positions, \
    _tree_from_positions
from .errors import ConfigError, DataError, FitError, MstdynError
from .ingest import load_prices, log_returns

__all__ = ["PipelineConfig", "validate_config", "run_pipeline",
           "ordered_parallel_map", "OUT_DIR_ENV"]

OUT_DIR_ENV = "MSTDYN_OUT_DIR"

_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class PipelineConfig:
    prices: str | None = None
    survivorship: str = "strict"
    start: str | None = None
    end: str | None = None
    width_td: int = 400
    step_td: int = 1
    horizon: str = "day"
    follow: str | None = None
    exclude: str | None = None
    observable_columns: str | None = None  # comma list; default = all
    k_min: int = 2
    k_max: int = 12
    alpha_method: str = "ols"
    central_rule: str = "degree"
    variogram_block_td: int = 60
    variogram_squared: bool = False
    efficiency_entropy: bool = False
    kinetics: bool = False
    min_samples: int = 30
    transition_stride: int = 1
    kinetics_from: int | None = None
    kinetics_to: int | None = None
    fits: bool = False
    snapshots: bool = False
    snapshot_from: int | None = None
    snapshot_to: int | None = None
    snapshot_format: str = "dot"
    recompute_every: int = 256
    out_dir: str | None = None
    seed: int = 0
    threads: int = 1

    def resolved_out_dir(self) -> Path:
        if self.out_dir:
            return Path(self.out_dir)
        return Path(os.environ.get(OUT_DIR_ENV, "mstdyn_out"))


def _coerce(name: str, raw: str, target_type):
    raw = raw.strip()
    if target_type is bool:
        low = raw.lower()
        if low in _BOOL_TRUE:
            return True
        if low in _BOOL_FALSE:
            return False
        raise ConfigError(f"key {name!r}: expected a boolean, got {raw!r}")
    try:
        return target_type(raw)
    except ValueError:
        raise ConfigError(f"key {name!r}: expected {target_type.__name__}, "
                          f"got {raw!r}") from None


def validate_config(text: str = "", overrides: dict | None = None) -> PipelineConfig:
    """Parse a key=value config document, apply overrides, validate.

    Unknown keys are rejected by name; defaults fill everything else.
    """
    spec_fields = {f.name: f for f in fields(PipelineConfig)}
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected key=value, got {body!r}")
        name, raw = (part.strip() for part in body.split("=", 1))
        if name not in spec_fields:
            raise ConfigError(f"unknown config key {name!r}")
        values[name] = raw
    cfg_kwargs = {}
    for name, raw in values.items():
        f = spec_fields[name]
        # field types are strings under `from __future__ import annotations`
        type_name = f.type if isinstance(f.type, str) else f.type.__name__
        if type_name.startswith("int"):
            cfg_kwargs[name] = _coerce(name, raw, int)
        elif type_name.startswith("bool"):
            cfg_kwargs[name] = _coerce(name, raw, bool)
        else:
            cfg_kwargs[name] = raw
    if overrides:
        for name, val in overrides.items():
            if name not in spec_fields:
                raise ConfigError(f"unknown config key {name!r}")
            if val is not None:
                cfg_kwargs[name] = val
    cfg = PipelineConfig(**cfg_kwargs)
    if cfg.horizon not in ("day", "week"):
        raise ConfigError(f"horizon must be 'day' or 'week', got {cfg.horizon!r}")
    if cfg.horizon == "week":
        cfg = replace(cfg, step_td=5)
    if cfg.width_td < 2:
        raise ConfigError("width_td must be >= 2")
    if cfg.step_td < 1:
        raise ConfigError("step_td must be >= 1")
    if not 1 <= cfg.k_min < cfg.k_max:
        raise ConfigError("need 1 <= k_min < k_max")
    if cfg.threads < 1:
        raise ConfigError("threads must be >= 1")
    if cfg.snapshot_format not in ("dot", "graphml"):
        raise ConfigError("snapshot_format must be 'dot' or 'graphml'")
    if cfg.survivorship not in ("strict", "window"):
        raise ConfigError("survivorship must be 'strict' or 'window'")
    if cfg.observable_columns is not None:
        selectable = set(_COLUMNS[2:])
        for name in _selected_columns(cfg):
            if name not in selectable:
                raise ConfigError(f"unknown observable column {name!r}")
    return cfg


def _selected_columns(cfg: PipelineConfig) -> list[str]:
    if cfg.observable_columns is None:
        return list(_COLUMNS[2:])
    return [c.strip() for c in cfg.observable_columns.split(",") if c.strip()]


def ordered_parallel_map(fn, iterable, threads: int = 1, window: int | None = None):
    """Map preserving input order; thread count changes scheduling only."""
    if threads <= 1:
        for item in iterable:
            yield fn(item)
        return
    window = window or threads * 2
    pending: deque = deque()
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for item in iterable:
            pending.append(pool.submit(fn, item))
            if len(pending) >= window:
                yield pending.popleft().result()
        while pending:
            yield pending.popleft().result()


# ---------------------------------------------------------------------------
# per-frame record

_COLUMNS = ["frame_index", "center_date", "mol", "mol_excluding", "mhsd",
            "degree_entropy", "alpha", "alpha_stderr", "k_leader", "leader_id",
            "k2", "k3", "delta", "delta2", "b_leader", "b_vice",
            "thsd2", "thsd2_twin", "thsd3", "thsd3_twin"]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _frame_record(frame: TreeFrame, cfg: PipelineConfig, follow_idx: int | None,
                  mol_excluding: float | None) -> dict:
    metrics = observables.TreeMetrics(frame)
    rec: dict = {"frame_index": frame.frame_index,
                 "center_date": frame.center_date}
    rec["mol"] = observables.mol(frame, central_rule=cfg.central_rule,
                                 metrics=metrics)
    rec["mol_excluding"] = mol_excluding
    rec["mhsd"] = observables.mhsd(frame, metrics)
    dd = observables.degree_distribution(frame)
    rec["degree_entropy"] = observables.degree_entropy(dd)
    try:
        fit = observables.fit_power_law(dd, cfg.k_min, cfg.k_max, cfg.alpha_method)
        rec["alpha"], rec["alpha_stderr"] = fit.alpha, fit.alpha_stderr
    except FitError:
        rec["alpha"] = rec["alpha_stderr"] = None
    ranks = observables.rank_track(frame, follow=follow_idx, metrics=metrics)
    rec.update(k_leader=ranks.k_leader, leader_id=ranks.leader_id, k2=ranks.k2,
               k3=ranks.k3, delta=ranks.delta, delta2=ranks.delta2,
               b_leader=ranks.b_leader, b_vice=ranks.b_vice,
               thsd2=ranks.thsd2, thsd2_twin=ranks.thsd2_twin,
               thsd3=ranks.thsd3, thsd3_twin=ranks.thsd3_twin)
    if cfg.efficiency_entropy:
        rec["efficiency_entropy"] = observables.efficiency_entropy(frame)
    return rec


def _scan_payloads(scan: _RollingScan, tickers, exclude_idx: int | None):
    """Sequential producer: per frame, the condensed distances (full and,
    when an exclusion is configured, reduced)."""
    px = scan.px
    if exclude_idx is not None:
        keep_mask = (px.i != exclude_idx) & (px.j != exclude_idx)
        red_i = px.i[keep_mask].astype(np.int64)
        red_j = px.j[keep_mask].astype(np.int64)
        red_i -= (red_i > exclude_idx)
        red_j -= (red_j > exclude_idx)
        red_i = red_i.astype(np.int32)
        red_j = red_j.astype(np.int32)
        red_tickers = tuple(t for v, t in enumerate(tickers) if v != exclude_idx)
    for f, _start, center_date, ccond, bad in scan.frames():
        if ccond is None:
            yield ("skip", f, center_date, bad)
            continue
        dcond = np.sqrt(2.0 * (1.0 - ccond))
        if exclude_idx is None:
            yield ("frame", f, center_date, dcond, ccond, None)
        else:
            yield ("frame", f, center_date, dcond, ccond,
                   (dcond[keep_mask], red_i, red_j, red_tickers))


class _ReducedIndex:
    """Pair bookkeeping for the exclusion-reduced vertex set."""

    def __init__(self, red_i, red_j, n):
        self.n = n
        self.i = red_i
        self.j = red_j


def run_pipeline(config: PipelineConfig) -> dict:
    """Execute the configured pipeline and return the manifest."""
    if not config.prices:
        raise ConfigError("config key 'prices' is required")
    prices_path = Path(config.prices)
    if not prices_path.exists():
        raise ConfigError(f"input file {config.prices!r} does not exist")

    with open(prices_path, "r", encoding="utf-8") as fh:
        panel = load_prices(fh, survivorship=config.survivorship,
                            start=config.start, end=config.end)
    returns = log_returns(panel)
    tickers = returns.tickers

    follow_idx = None
    if config.follow is not None:
        if config.follow not in tickers:
            raise ConfigError(f"follow ticker {config.follow!r} not in the panel")
        follow_idx = tickers.index(config.follow)
    exclude_name = config.exclude if config.exclude is not None else config.follow
    exclude_idx = None
    if exclude_name is not None:
        if exclude_name not in tickers:
            raise ConfigError(f"exclude ticker {exclude_name!r} not in the panel")
        exclude_idx = tickers.index(exclude_name)

    spec = WindowSpec(config.width_td, config.step_td)
    scan = _RollingScan(returns, spec, config.recompute_every)
    px = scan.px
    n = len(tickers)

    keep_frames = config.kinetics or config.snapshots

    def worker(payload):
        if payload[0] == "skip":
            _, f, center_date, bad = payload
            names = tuple(tickers[v] for v in bad)
            return ("skip", f, center_date, names)
        _, f, center_date, dcond, ccond, reduced = payload
        try:
            sel = _mst_positions(dcond, px)
            frame = _tree_from_positions(sel, dcond, px, f, center_date, tickers,
                                         bool(np.any(ccond[sel] < 0.0)))
        except MstdynError as exc:
            raise DataError(f"corrnet stage failed at frame {f}: {exc}") from exc
        try:
            mol_ex = None
            if reduced is not None and n - 1 >= 2:
                dred, red_i, red_j, red_tickers = reduced
                rix = _ReducedIndex(red_i, red_j, n - 1)
                rsel = _mst_positions(dred, rix)
                rframe = _tree_from_positions(rsel, dred, rix, f, center_date,
                                              red_tickers, False)
                mol_ex = observables.mol(rframe, central_rule=config.central_rule)
            rec = _frame_record(frame, config, follow_idx, mol_ex)
        except MstdynError as exc:
            raise DataError(f"observables stage failed at frame {f}: {exc}") from exc
        return ("frame", frame if keep_frames else None, rec)

    out_dir = config.resolved_out_dir()
    out_dir.mkdir(parents=True, exist_ok=True)

    records: list[dict] = []
    skipped: list[dict] = []
    frames: list[TreeFrame] = []
    for result in ordered_parallel_map(worker,
                                       _scan_payloads(scan, tickers, exclude_idx),
                                       config.threads):
        if result[0] == "skip":
            _, f, center_date, names = result
            skipped.append({"frame_index": f, "center_date": center_date,
                            "tickers": list(names),
                            "reason": "zero variance in window"})
            continue
        _, frame, rec = result
        records.append(rec)
        if frame is not None:
            frames.append(frame)

    if not records:
        raise DataError("no frames were produced (window wider than the data?)")

    outputs: dict[str, str] = {}
    failed_fits: list[str] = []

    columns = _COLUMNS[:2] + _selected_columns(config)
    if config.efficiency_entropy:
        columns.append("efficiency_entropy")
    obs_path = out_dir / "observables.csv"
    with open(obs_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for rec in records:
            fh.write(",".join(_fmt(rec.get(c)) for c in columns) + "\n")
    outputs["observables.csv"] = _sha256(obs_path)

    mol_series = np.array([rec["mol"] for rec in records])
    frame_ids = [rec["frame_index"] for rec in records]
    if "mol" in columns and mol_series.size > config.variogram_block_td + 1:
        vg = observables.variogram(mol_series, lag=1,
                                   partial_window=config.variogram_block_td,
                                   squared=config.variogram_squared)
        vg_path = out_dir / "mol_variogram.csv"
        with open(vg_path, "w", encoding="utf-8", newline="") as fh:
            fh.write("frame_index,increment\n")
            for idx, inc in enumerate(vg.increments):
                fh.write(f"{frame_ids[idx + 1]},{float(inc)!r}\n")
        outputs["mol_variogram.csv"] = _sha256(vg_path)
        pv_path = out_dir / "mol_partial_variances.csv"
        with open(pv_path, "w", encoding="utf-8", newline="") as fh:
            fh.write("block_start_frame,variance\n")
            for start, var in vg.partial_variances:
                fh.write(f"{frame_ids[start + 1]},{float(var)!r}\n")
        outputs["mol_partial_variances.csv"] = _sha256(pv_path)

    if config.kinetics:
        lo = config.kinetics_from
        hi = config.kinetics_to
        in_range = [fr for fr in frames
                    if (lo is None or fr.frame_index >= lo)
                    and (hi is None or fr.frame_index <= hi)]
        counts = kinetics.count_transitions(in_range,
                                            stride=config.transition_stride)
        # mean exponent over the same frame window, used by the power-law
        # degree ratios
        alphas = [rec["alpha"] for rec in records
                  if rec["alpha"] is not None
                  and (lo is None or rec["frame_index"] >= lo)
                  and (hi is None or rec["frame_index"] <= hi)]
        try:
            alpha_bar, _ = observables.mean_alpha(alphas)
        except FitError:
            alpha_bar = None
            failed_fits.append("kinetics: no valid power-law exponents for "
                               "alpha_bar")
        kernel = kinetics.empirical_kernel(counts, min_samples=config.min_samples,
                                           alpha_bar=alpha_bar)
        kern_path = out_dir / "kernel.json"
        kern_path.write_text(kinetics.kernel_to_json(kernel), encoding="utf-8")
        outputs["kernel.json"] = _sha256(kern_path)

    if config.fits:
        report = {}
        leader = np.array([rec["k_leader"] for rec in records], dtype=np.float64)
        delta = np.array([rec["delta"] for rec in records], dtype=np.float64)
        for name, series in (("leader", leader), ("delta", delta)):
            entry = {}
            nfit = lfit = None
            try:
                tc = phasefit.detect_t_crit(series)
                nfit = phasefit.fit_nucleation(series, tc.candidate)
                entry["nucleation"] = _fit_dict(nfit)
                entry["t_crit_detection"] = {
                    "candidate": tc.candidate, "jump": tc.jump_candidate,
                    "jump_confident": tc.jump_confident, "scan": tc.scan_candidate}
            except FitError as exc:
                failed_fits.append(f"nucleation[{name}]: {exc}")
            try:
                lfit = phasefit.fit_lambda_peak(series)
                entry["lambda_peak"] = _fit_dict(lfit)
            except FitError as exc:
                failed_fits.append(f"lambda[{name}]: {exc}")
            # occupation-layer minimum as an alternative center prior
            mol_prior = int(np.argmin(mol_series))
            entry["t_lambda_mol_prior"] = mol_prior
            try:
                pfit = phasefit.fit_lambda_peak(series, t_lambda_grid=[mol_prior])
                entry["lambda_peak_at_mol_minimum"] = _fit_dict(pfit)
            except FitError as exc:
                failed_fits.append(f"lambda[{name}] at MOL prior: {exc}")
            if nfit is not None and lfit is not None:
                cross = phasefit.crossover_report(nfit, lfit)
                entry["crossover"] = {"window": cross.window, "t_nucl": cross.t_nucl,
                                      "tolerance": cross.tolerance}
            report[name] = entry
        fit_path = out_dir / "fit_report.json"
        fit_path.write_text(json.dumps(report, sort_keys=True, indent=2),
                            encoding="utf-8")
        outputs["fit_report.json"] = _sha256(fit_path)

    if config.snapshots:
        lo = config.snapshot_from if config.snapshot_from is not None else frames[0].frame_index
        hi = config.snapshot_to if config.snapshot_to is not None else frames[-1].frame_index
        by_index = {fr.frame_index: fr for fr in frames}
        ext = "dot" if config.snapshot_format == "dot" else "graphml"
        exporter = snapshots.export_dot if ext == "dot" else snapshots.export_graphml
        for fr in frames:
            if not lo <= fr.frame_index <= hi:
                continue
            # frame indices are scan ordinals: neighbors sit at +-1 whatever
            # the day stride
            diff = snapshots.diff_frames(by_index.get(fr.frame_index - 1),
                                         fr,
                                         by_index.get(fr.frame_index + 1))
            name = f"frame_{fr.frame_index}.{ext}"
            (out_dir / name).write_text(exporter(fr, diff), encoding="utf-8")
            outputs[name] = _sha256(out_dir / name)

    manifest = {
        "config": _config_dict(config),
        "config_sha256": _config_hash(config),
        "versions": {"mstdyn": __version__,
                     "python": sys.version.split()[0],
                     "numpy": np.__version__},
        "n_assets": n,
        "frames": {"expected": spec.frame_count(returns.n_rows()),
                   "produced": len(records),
                   "skipped": len(skipped)},
        "skipped_frames": skipped,
        "failed_fits": failed_fits,
        "incomplete": bool(skipped or failed_fits),
        "notes": {"efficiency_entropy": "nonstandard reconstruction"}
        if config.efficiency_entropy else {},
        "outputs": outputs,
    }
    man_path = out_dir / "manifest.json"
    man_path.write_text(json.dumps(manifest, sort_keys=True, indent=2),
                        encoding="utf-8")
    return manifest


def _fit_dict(fit) -> dict:
    out = {}
    for key, val in asdict(fit).items():
        if isinstance(val, tuple):
            val = list(val)
        out[key] = val
    return out


def _config_dict(config: PipelineConfig) -> dict:
    return {k: v for k, v in asdict(config).items()}


def _config_hash(config: PipelineConfig) -> str:
    blob = json.dumps(_config_dict(config), sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()
