"""Command-line front end.

Subcommands: synth, transform, run, report, diagnose. Configuration is a
YAML document; ``--config`` or the ``HDMACRO_CONFIG`` environment variable
points at it. Exit codes: 0 ok, 2 config, 3 data, 4 numerical, 5 I/O.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import os
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from . import __version__
from .diagnostics import TruncationWarning, aggregate_drivers, dump_ledger_json, export_driver_artifacts
from .errors import ConfigError, DataError, HdMacroError, NumericalError, RunAbortedError, StoreError
from .harness import (
    ExperimentConfig,
    evaluate,
    hs_summaries,
    load_store,
    persist_store,
    rank_table,
    run_rolling,
    with_levels,
    write_score_table,
)
from .panel import LEADS_LOST, SD_FLOOR, load_catalog_csv, load_panel_csv, transform_panel, write_catalog_csv, write_panel_csv
from .scoring import METRICS, SCORE_COLUMNS
from .synthetic import PanelSpec, TargetSpec, generate_synthetic_panel

log = logging.getLogger("hdmacro")

ENV_CONFIG = "HDMACRO_CONFIG"
EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4, 5
CLI_CONFIG_VERSION = 1
STORE_NAME = "store.zip"
_TOP_KEYS = {"version", "paths", "target_id", "threads", "verbosity", "experiment", "synth"}
_PATH_KEYS = {"panel", "catalog", "out"}
_SYNTH_KEYS = {"seed", "T", "p", "r_true", "target", "panel"}


@dataclass
class CliConfig:
    panel: Path | None = None
    catalog: Path | None = None
    out: Path = Path("out")
    target_id: str = "TARGET"
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)
    verbosity: str = "info"
    experiment: ExperimentConfig | None = None
    synth: dict = field(default_factory=dict)
    source: Path | None = None

    def require_inputs(self) -> None:
        for name in ("panel", "catalog"):
            p = getattr(self, name)
            if p is None:
                raise ConfigError(f"paths.{name} is required")
            if not p.exists():
                raise ConfigError(f"paths.{name} does not exist: {p}")

    def require_experiment(self) -> ExperimentConfig:
        if self.experiment is None:
            raise ConfigError("config has no 'experiment' section")
        return self.experiment


def parse_config(raw: dict | None, base_dir: Path | None = None) -> CliConfig:
    """Validate a config mapping (as loaded from YAML)."""
    raw = dict(raw or {})
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    version = raw.get("version", CLI_CONFIG_VERSION)
    if version != CLI_CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {version}")
    extra = sorted(set(raw) - _TOP_KEYS)
    if extra:
        raise ConfigError(f"unknown config keys: {extra}")
    base = base_dir or Path.cwd()
    paths = raw.get("paths") or {}
    if not isinstance(paths, dict) or set(paths) - _PATH_KEYS:
        raise ConfigError(f"paths accepts only {sorted(_PATH_KEYS)}")

    def resolve(v):
        if v is None:
            return None
        p = Path(str(v)).expanduser()
        return p if p.is_absolute() else base / p

    cfg = CliConfig(
        panel=resolve(paths.get("panel")),
        catalog=resolve(paths.get("catalog")),
        out=resolve(paths.get("out", "out")),
        target_id=str(raw.get("target_id", "TARGET")),
        verbosity=str(raw.get("verbosity", "info")).lower(),
        synth=dict(raw.get("synth") or {}),
    )
    if "threads" in raw:
        cfg.threads = _positive_int(raw["threads"], "threads")
    if cfg.verbosity not in ("debug", "info", "warning", "error"):
        raise ConfigError(f"bad verbosity {cfg.verbosity!r}")
    if set(cfg.synth) - _SYNTH_KEYS:
        raise ConfigError(f"synth accepts only {sorted(_SYNTH_KEYS)}")
    if raw.get("experiment") is not None:
        if not isinstance(raw["experiment"], dict):
            raise ConfigError("experiment must be a mapping")
        cfg.experiment = ExperimentConfig.from_dict(raw["experiment"])
    return cfg


def load_config(path) -> CliConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from None
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    cfg = parse_config(raw, path.parent.resolve())
    cfg.source = path
    return cfg


def _positive_int(v, name) -> int:
    try:
        i = int(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be an integer") from None
    if i < 1:
        raise ConfigError(f"{name} must be >= 1")
    return i


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# --------------------------------------------------------------------------
# commands


def cmd_synth(cfg: CliConfig, seed: int | None = None) -> tuple[Path, Path]:
    s = dict(cfg.synth)
    target = TargetSpec(**(s.pop("target", None) or {}))
    panel_spec = s.pop("panel", None) or {}
    if "factor_ar" in panel_spec:
        panel_spec["factor_ar"] = tuple(panel_spec["factor_ar"])
    panel_spec = PanelSpec(**panel_spec)
    panel = generate_synthetic_panel(
        seed=int(seed if seed is not None else s.get("seed", 0)),
        T=int(s.get("T", 200)),
        p=int(s.get("p", 120)),
        r_true=int(s.get("r_true", 3)),
        target_spec=target,
        panel_spec=panel_spec,
    )
    cfg.out.mkdir(parents=True, exist_ok=True)
    panel_path = cfg.panel or cfg.out / "panel.csv"
    catalog_path = cfg.catalog or cfg.out / "catalog.csv"
    panel_path.parent.mkdir(parents=True, exist_ok=True)
    write_panel_csv(panel.data, panel_path)
    write_catalog_csv(panel.metas, catalog_path)
    log.info("synthetic panel %d x %d written to %s", len(panel), panel.data.shape[1], panel_path)
    return panel_path, catalog_path


def _load_panel(cfg: CliConfig):
    cfg.require_inputs()
    catalog = load_catalog_csv(cfg.catalog)
    return load_panel_csv(cfg.panel, catalog, cfg.target_id)


def cmd_transform(cfg: CliConfig) -> tuple[Path, Path]:
    """Transformed panel plus a per-column report (code, rows lost, kept)."""
    panel = _load_panel(cfg)
    out = transform_panel(panel)
    rows = []
    for col in out.columns:
        v = out[col].to_numpy()
        finite = v[np.isfinite(v)]
        sd = float(np.std(finite, ddof=1)) if finite.size > 1 else float("nan")
        retained = bool(finite.size > 1 and sd >= SD_FLOOR)
        rows.append({
            "id": col,
            "transform_code": panel.metas[col].transform_code,
            "rows_lost": LEADS_LOST[panel.metas[col].transform_code],
            "n_missing": int(np.isnan(v).sum()),
            "retained": retained,
            "reason": "" if retained else ("constant" if finite.size > 1 else "too_few_values"),
        })
    cfg.out.mkdir(parents=True, exist_ok=True)
    data_path = cfg.out / "transformed.csv"
    report_path = cfg.out / "transform_report.csv"
    write_panel_csv(out, data_path)
    pd.DataFrame(rows).to_csv(report_path, index=False)
    return data_path, report_path


def cmd_run(cfg: CliConfig, threads: int | None = None) -> tuple[Path, Path]:
    exp = cfg.require_experiment()
    panel = _load_panel(cfg)
    threads = threads or cfg.threads
    cfg.out.mkdir(parents=True, exist_ok=True)
    started = _dt.datetime.now(_dt.timezone.utc)
    t0 = time.perf_counter()
    seen = {}

    def progress(h, done, total):
        seen[h] = seen.get(h, 0) + 1
        if done == total or (done % 25 == 0):
            print(f"[run] h={h} cells done {done}/{total}", file=sys.stderr, flush=True)

    store = run_rolling(panel, exp, threads=threads, progress=progress)
    elapsed = time.perf_counter() - t0
    store_path = persist_store(store, cfg.out / STORE_NAME)
    manifest = {
        "hdmacro_version": __version__,
        "created_utc": started.isoformat(timespec="seconds"),
        "wall_clock_seconds": round(elapsed, 3),
        "threads": threads,
        "seed": exp.seed,
        "config_hash": exp.config_hash(),
        "experiment": exp.to_dict(),
        "target_id": cfg.target_id,
        "inputs": {
            "panel": {"path": str(cfg.panel), "sha256": sha256_file(cfg.panel)},
            "catalog": {"path": str(cfg.catalog), "sha256": sha256_file(cfg.catalog)},
        },
        "store": {"path": str(store_path), "sha256": sha256_file(store_path)},
        "cells": {
            "total": len(store.records),
            "failed": len(store.failures()),
            "per_horizon": {str(h): len(store.origins(h)) for h in store.horizons()},
        },
    }
    manifest_path = cfg.out / "run_manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return store_path, manifest_path


def report_tables(table: pd.DataFrame, out: Path) -> list[Path]:
    """Full score table plus one ranked CSV per metric."""
    out.mkdir(parents=True, exist_ok=True)
    paths = [write_score_table(table, out / "scores.csv")]
    ranked = rank_table(table)
    cols = SCORE_COLUMNS + ["rank"] + [c for c in ("flag", "n") if c in ranked.columns]
    for metric in METRICS:
        part = ranked[ranked["metric"] == metric]
        if part.empty:
            continue
        p = out / f"report_{metric}.csv"
        part.loc[:, cols].to_csv(p, index=False, float_format="%.17g")
        paths.append(p)
    return paths


def cmd_report(cfg: CliConfig, store_path=None, levels_path=None) -> list[Path]:
    if levels_path is not None:
        levels = pd.read_csv(levels_path)
        need = {"model", "horizon", "subsample", "metric", "level"}
        if not need.issubset(levels.columns):
            raise DataError(f"levels file needs columns {sorted(need)}")
        table = with_levels(levels)
        for c in ("dm_p", "dm_hln_p"):
            if c not in table.columns:
                table[c] = np.nan
        return report_tables(table, cfg.out)
    store = load_store(store_path or cfg.out / STORE_NAME, cfg.experiment)
    table = evaluate(store, cfg.experiment)
    return report_tables(table, cfg.out)


def cmd_diagnose(cfg: CliConfig, store_path=None, K: int | None = None) -> list[Path]:
    store = load_store(store_path or cfg.out / STORE_NAME, cfg.experiment)
    if "hs" not in store.models():
        raise StoreError("store has no horseshoe cells to diagnose")
    if K is None:
        K = cfg.experiment.top_k if cfg.experiment else int(store.manifest.get("config", {}).get("top_k", 20))
    horizons = cfg.experiment.horizons if cfg.experiment else store.horizons()
    written = []
    for h in horizons:
        summaries = hs_summaries(store, h)
        if not summaries:
            log.warning("no horseshoe cells at h=%d", h)
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            ledger = aggregate_drivers(summaries, K)
        written.extend(export_driver_artifacts(ledger, cfg.out, prefix=f"drivers_h{h}"))
        json_path = cfg.out / f"drivers_h{h}.json"
        dump_ledger_json(ledger, json_path)
        written.append(json_path)
    if not written:
        raise StoreError("store has no usable horseshoe cells")
    return written


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"YAML config (default: ${ENV_CONFIG})")
    common.add_argument("--seed", type=int, help="override the experiment/synth seed")
    common.add_argument("--threads", type=int, help="worker processes (default: available CPUs)")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="count", default=0)
    common.add_argument("-q", "--quiet", action="store_true")

    parser = argparse.ArgumentParser(prog="hdmacro", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hdmacro {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="write a synthetic factor panel and catalog")
    sub.add_parser("transform", parents=[common], help="apply transform codes and report per column")
    sub.add_parser("run", parents=[common], help="expanding-window run; writes the forecast store")
    rep = sub.add_parser("report", parents=[common], help="score tables from a store")
    rep.add_argument("--store", help=f"store file (default: <out>/{STORE_NAME})")
    rep.add_argument("--levels", help="CSV of published levels; recompute relative skill only")
    dia = sub.add_parser("diagnose", parents=[common], help="horseshoe driver tables per horizon")
    dia.add_argument("--store", help=f"store file (default: <out>/{STORE_NAME})")
    dia.add_argument("-K", type=int, help="top-K size")
    return parser


def _resolve_config(args) -> CliConfig:
    path = args.config or os.environ.get(ENV_CONFIG)
    if path:
        cfg = load_config(path)
    elif args.command in ("synth", "report", "diagnose"):
        cfg = parse_config({})
    else:
        raise ConfigError(f"no config given (use --config or ${ENV_CONFIG})")
    if args.out:
        cfg.out = Path(args.out)
    if args.threads is not None:
        cfg.threads = _positive_int(args.threads, "--threads")
    if args.seed is not None and cfg.experiment is not None:
        cfg.experiment = ExperimentConfig.from_dict({**cfg.experiment.to_dict(), "seed": args.seed})
    return cfg


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, DataError):
        return EXIT_DATA
    if isinstance(exc, (NumericalError, RunAbortedError)):
        return EXIT_NUMERICAL
    if isinstance(exc, (StoreError, OSError)):
        return EXIT_IO
    return 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING if args.quiet else (logging.DEBUG if args.verbose else None)
    try:
        cfg = _resolve_config(args)
        if level is None:
            level = getattr(logging, cfg.verbosity.upper())
        logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
        if args.command == "synth":
            written = cmd_synth(cfg, seed=args.seed)
        elif args.command == "transform":
            written = cmd_transform(cfg)
        elif args.command == "run":
            written = cmd_run(cfg, threads=cfg.threads)
        elif args.command == "report":
            written = cmd_report(cfg, args.store, args.levels)
        else:
            written = cmd_diagnose(cfg, args.store, args.K)
    except (HdMacroError, OSError) as exc:
        print(f"hdmacro {args.command}: error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    for p in written:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
