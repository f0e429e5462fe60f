"""Expanding-window experiment: origins, per-origin refits, persisted
predictive draws and score tables."""
from __future__ import annotations

import hashlib
import io
import json
import logging
import math
import zipfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
import pandas as pd
from scipy.linalg import LinAlgError

from . import scoring
from .direct import ar_predictive, ar_regressor, fit_ar_flat, hs_direct_forecast
from .errors import ConfigError, CorruptStoreError, HdMacroError, RunAbortedError, StoreError
from .factors import (
    FactorConfig,
    default_grid,
    extract_factors_pca,
    fit_dfm_twostep,
    fit_fa_ar,
    fit_var,
    favar_iterate,
    kalman_filter_forecast,
    select_factor_config,
)
from .mcmc import HsChainConfig, RngStream
from .panel import LEADS_LOST, Panel, apply_transform, build_design, build_predictor_block, parse_month

log = logging.getLogger(__name__)

MODEL_TAGS = ("ar2", "hs", "faar", "favar", "dfm")
BASELINE = "ar2"
STORE_FORMAT = "hdmacro-store"
STORE_VERSION = 1
CONFIG_VERSION = 1
MAX_FAILURE_SHARE = 0.10
_ZIP_DATE = (1980, 1, 1, 0, 0, 0)

DEFAULT_SUBSAMPLES = (
    ("pre2019", None, "2019-12"),
    ("2020_2021", "2020-01", "2021-12"),
    ("2022_2024", "2022-01", "2024-12"),
)


@dataclass(frozen=True)
class ExperimentConfig:
    first_eval_date: str
    horizons: tuple[int, ...] = (1, 3, 6, 12)
    min_window: int = 36
    lag: int = 1
    models: tuple[str, ...] = MODEL_TAGS
    seed: int = 20250501
    mcmc: HsChainConfig = field(default_factory=HsChainConfig)
    ar_p: int = 2
    r_max: int = 8
    p_f_max: int = 3
    favar_q: int = 2
    factor_r: int | None = None
    top_k: int = 20
    subsamples: tuple[tuple[str, str | None, str | None], ...] = DEFAULT_SUBSAMPLES

    def __post_init__(self):
        if not self.horizons or any(int(h) < 1 for h in self.horizons):
            raise ConfigError("horizons must be a non-empty set of positive integers")
        object.__setattr__(self, "horizons", tuple(sorted({int(h) for h in self.horizons})))
        unknown = [m for m in self.models if m not in MODEL_TAGS]
        if unknown:
            raise ConfigError(f"unknown model tags {unknown}; known: {list(MODEL_TAGS)}")
        if not self.models:
            raise ConfigError("no models requested")
        if BASELINE not in self.models:
            raise ConfigError(f"baseline model {BASELINE!r} must be included")
        object.__setattr__(self, "models", tuple(m for m in MODEL_TAGS if m in self.models))
        if self.min_window < 2:
            raise ConfigError("min_window must be >= 2")
        if self.lag < 0:
            raise ConfigError("lag must be >= 0")
        if self.ar_p < 1 or self.r_max < 1 or self.p_f_max < 0 or self.favar_q < 1 or self.top_k < 1:
            raise ConfigError("ar_p, r_max, favar_q, top_k must be >= 1 and p_f_max >= 0")
        if self.factor_r is not None and self.factor_r < 1:
            raise ConfigError("factor_r must be >= 1")
        parse_month(self.first_eval_date)
        subs = []
        for item in self.subsamples:
            name, start, end = item
            if start is not None:
                parse_month(start)
            if end is not None:
                parse_month(end)
            subs.append((str(name), start, end))
        if len({s[0] for s in subs}) != len(subs) or any(s[0] == "full" for s in subs):
            raise ConfigError("subsample names must be unique and not 'full'")
        object.__setattr__(self, "subsamples", tuple(subs))

    @property
    def grid(self) -> list[FactorConfig]:
        return default_grid(self.r_max, self.p_f_max)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["version"] = CONFIG_VERSION
        d["horizons"] = list(self.horizons)
        d["models"] = list(self.models)
        d["subsamples"] = [list(s) for s in self.subsamples]
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        d = dict(raw)
        version = d.pop("version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {version}")
        known = {f for f in cls.__dataclass_fields__}
        extra = sorted(set(d) - known)
        if extra:
            raise ConfigError(f"unknown experiment keys: {extra}")
        if "first_eval_date" not in d:
            raise ConfigError("first_eval_date is required")
        mcmc = d.pop("mcmc", None)
        if isinstance(mcmc, dict):
            bad = sorted(set(mcmc) - set(HsChainConfig.__dataclass_fields__))
            if bad:
                raise ConfigError(f"unknown mcmc keys: {bad}")
            d["mcmc"] = HsChainConfig(**mcmc)
        elif mcmc is not None:
            raise ConfigError("mcmc must be a mapping")
        for key in ("horizons", "models"):
            if key in d:
                d[key] = tuple(d[key])
        if "subsamples" in d:
            d["subsamples"] = tuple(tuple(s) for s in d["subsamples"])
        d["first_eval_date"] = str(d["first_eval_date"])
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def config_hash(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()


@dataclass
class ForecastRecord:
    model: str
    horizon: int
    origin_index: int
    origin_date: pd.Timestamp
    target_date: pd.Timestamp
    realized: float
    draws: np.ndarray | None
    status: str = "ok"
    error: str = ""
    keep: np.ndarray | None = None
    keep_ids: tuple[str, ...] | None = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def mean(self) -> float:
        return float(np.mean(self.draws))


@dataclass
class ForecastRecordStore:
    records: dict[tuple[str, int, int], ForecastRecord]
    manifest: dict
    hash_mismatch: bool = False

    def horizons(self) -> list[int]:
        return sorted({k[1] for k in self.records})

    def models(self) -> list[str]:
        present = {k[0] for k in self.records}
        return [m for m in MODEL_TAGS if m in present]

    def origins(self, horizon: int, model: str | None = None) -> list[int]:
        return sorted({k[2] for k in self.records if k[1] == horizon and (model is None or k[0] == model)})

    def failures(self) -> list[ForecastRecord]:
        return [r for r in self.records.values() if not r.ok]

    def content_hash(self) -> str:
        buf = io.BytesIO()
        _write_store(self, buf)
        return hashlib.sha256(buf.getvalue()).hexdigest()


# --------------------------------------------------------------------------
# origins


def _leading_rows(panel: Panel) -> int:
    codes = [panel.metas[panel.target_id].transform_code]
    first = panel.data.iloc[0]
    for c in panel.predictor_ids:
        if not np.isnan(first[c]):
            codes.append(panel.metas[c].transform_code)
    return max(LEADS_LOST[c] for c in codes)


def enumerate_origins(panel: Panel, h: int, config: ExperimentConfig) -> list[int]:
    """Origins ``t0..T-1-h`` (0-based) where ``t0`` is the later of the origin
    whose target falls on the first evaluation date and the first origin
    with ``min_window`` usable monthly observations."""
    first_eval = parse_month(config.first_eval_date)
    dates = panel.dates
    if first_eval > dates[-1]:
        raise ConfigError(f"first evaluation date {config.first_eval_date} is after the panel end")
    eval_idx = int(np.searchsorted(dates.values, first_eval.to_datetime64()))
    t_min = config.min_window - 1 + _leading_rows(panel)
    t0 = max(eval_idx - h, t_min, 0)
    last = len(dates) - 1 - h
    if t0 > last:
        raise ConfigError(f"no forecast origins for h={h}")
    return list(range(t0, last + 1))


# --------------------------------------------------------------------------
# rolling run


_WORKER: dict = {}


def _init_worker(panel, config):
    _WORKER["panel"] = panel
    _WORKER["config"] = config


def _worker_cell(task):
    h, origin = task
    return run_cell(_WORKER["panel"], _WORKER["config"], h, origin)


_CELL_ERRORS = (HdMacroError, LinAlgError, ValueError, FloatingPointError)


def run_cell(panel: Panel, config: ExperimentConfig, h: int, origin: int) -> dict[str, dict]:
    """Forecast every configured model at one (horizon, origin).

    Reads ``panel.upto(origin)`` only. Returns per-model dicts with draws
    (or an error message) and, for the horseshoe, the keep vector.
    """
    sub = panel.upto(origin)
    S = config.mcmc.n_keep
    odate = sub.dates[origin]
    out: dict[str, dict] = {}
    shared: dict = {}

    def rng_for(tag):
        return RngStream(config.seed, (h, origin, tag)).generator()

    def factor_inputs():
        if "block" not in shared:
            block = build_predictor_block(sub, origin, config.lag, config.min_window)
            fcfg = select_factor_config(block.X, block.y, h, config.grid)
            r = config.factor_r or fcfg.r
            r = min(r, *block.X.shape)
            shared["block"] = block
            shared["fcfg"] = fcfg
            shared["fs"] = extract_factors_pca(block.X, max(r, fcfg.r))
            shared["r"] = r
        return shared["block"], shared["fcfg"], shared["fs"], shared["r"]

    for tag in config.models:
        try:
            if tag == "ar2":
                y = apply_transform(
                    sub.data[sub.target_id].to_numpy(dtype=float),
                    sub.metas[sub.target_id].transform_code,
                    column=sub.target_id,
                    dates=sub.dates,
                )
                y = y[np.flatnonzero(~np.isnan(y))[0]:]
                post = fit_ar_flat(y, config.ar_p, h)
                pred = ar_predictive(post, ar_regressor(y, config.ar_p), S, rng_for(tag),
                                     origin_date=odate, horizon=h, model_tag=tag)
                out[tag] = {"draws": pred.draws}
            elif tag == "hs":
                design = build_design(sub, h, config.lag, origin, min_window=config.min_window)
                res = hs_direct_forecast(design, config.mcmc, rng_for(tag), top_k=config.top_k)
                out[tag] = {"draws": res.predictive.draws, "keep": res.keep_mean, "keep_ids": res.ids}
            elif tag == "faar":
                block, fcfg, fs, _ = factor_inputs()
                pred = fit_fa_ar(block.y, fs.factors, fcfg, h, S, rng_for(tag), origin_date=odate)
                out[tag] = {"draws": pred.draws}
            elif tag == "favar":
                block, _, fs, r = factor_inputs()
                Z = np.column_stack([fs.factors[:, :r], block.y])
                fit = fit_var(Z, config.favar_q)
                pred = favar_iterate(fit, Z[-config.favar_q:], h, S, rng_for(tag), origin_date=odate)
                out[tag] = {"draws": pred.draws}
            elif tag == "dfm":
                block, _, _, r = factor_inputs()
                model = fit_dfm_twostep(block.X, r, y=block.y)
                pred = kalman_filter_forecast(model, block.X, h, S, rng_for(tag), origin_date=odate)
                out[tag] = {"draws": pred.draws}
            if not np.all(np.isfinite(out[tag]["draws"])):
                raise FloatingPointError("non-finite predictive draws")
        except _CELL_ERRORS as exc:
            out[tag] = {"error": f"{type(exc).__name__}: {exc}"}
    return out


def run_rolling(
    panel: Panel,
    config: ExperimentConfig,
    threads: int = 1,
    progress: Callable[[int, int, int], None] | None = None,
) -> ForecastRecordStore:
    """Run every (model, horizon, origin) cell and collect the draws.

    Cells are keyed to their own RNG streams, so the store does not depend
    on ``threads``. More than 10% failed cells aborts the run.
    """
    y_full = apply_transform(
        panel.data[panel.target_id].to_numpy(dtype=float),
        panel.metas[panel.target_id].transform_code,
        column=panel.target_id,
        dates=panel.dates,
    )
    tasks = [(h, t) for h in config.horizons for t in enumerate_origins(panel, h, config)]
    results = []

    def collect(it):
        for i, cell in enumerate(it):
            results.append(cell)
            if progress:
                progress(tasks[i][0], i + 1, len(tasks))

    if threads and threads > 1:
        with ProcessPoolExecutor(max_workers=threads, initializer=_init_worker, initargs=(panel, config)) as ex:
            collect(ex.map(_worker_cell, tasks, chunksize=max(1, len(tasks) // (8 * threads))))
    else:
        collect(run_cell(panel, config, h, t) for h, t in tasks)

    records: dict[tuple[str, int, int], ForecastRecord] = {}
    for (h, t), cell in zip(tasks, results):
        for tag in config.models:
            res = cell[tag]
            rec = ForecastRecord(
                model=tag,
                horizon=h,
                origin_index=t,
                origin_date=panel.dates[t],
                target_date=panel.dates[t + h],
                realized=float(y_full[t + h]),
                draws=res.get("draws"),
                status="ok" if "draws" in res else "failed",
                error=res.get("error", ""),
                keep=res.get("keep"),
                keep_ids=tuple(res["keep_ids"]) if "keep_ids" in res else None,
            )
            records[(tag, h, t)] = rec
    manifest = {
        "format": STORE_FORMAT,
        "version": STORE_VERSION,
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "config": config.to_dict(),
    }
    store = ForecastRecordStore(records, manifest)
    failed = store.failures()
    if records and len(failed) / len(records) > MAX_FAILURE_SHARE:
        sample = "; ".join(f"{r.model} h={r.horizon} t={r.origin_index}: {r.error}" for r in failed[:3])
        raise RunAbortedError(f"{len(failed)}/{len(records)} cells failed ({sample})")
    for r in failed:
        log.warning("cell failed: %s h=%d origin=%s: %s", r.model, r.horizon, r.origin_date.date(), r.error)
    return store


# --------------------------------------------------------------------------
# persistence


def _zip_write(zf: zipfile.ZipFile, name: str, data: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=_ZIP_DATE)
    info.compress_type = zipfile.ZIP_STORED
    info.external_attr = 0o644 << 16
    zf.writestr(info, data)


def _npy_bytes(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    np.save(buf, np.ascontiguousarray(arr), allow_pickle=False)
    return buf.getvalue()


def _write_store(store: ForecastRecordStore, fh) -> None:
    keys = sorted(store.records, key=lambda k: (k[1], MODEL_TAGS.index(k[0]), k[2]))
    meta, draws, keeps = [], [], []
    keep_offset = 0
    for key in keys:
        r = store.records[key]
        row = {
            "model": r.model,
            "horizon": r.horizon,
            "origin_index": r.origin_index,
            "origin_date": r.origin_date.strftime("%Y-%m"),
            "target_date": r.target_date.strftime("%Y-%m"),
            "realized": r.realized,
            "status": r.status,
            "error": r.error,
            "draws_row": -1,
            "keep_offset": -1,
            "keep_ids": None,
        }
        if r.draws is not None:
            row["draws_row"] = len(draws)
            draws.append(np.asarray(r.draws, dtype=float))
        if r.keep is not None:
            row["keep_offset"] = keep_offset
            row["keep_ids"] = list(r.keep_ids)
            keeps.append(np.asarray(r.keep, dtype=float))
            keep_offset += len(r.keep)
        meta.append(row)
    sizes = {d.size for d in draws}
    if len(sizes) > 1:
        raise StoreError(f"records carry unequal draw counts {sorted(sizes)}")
    S = sizes.pop() if sizes else 0
    draw_arr = np.vstack(draws) if draws else np.empty((0, S))
    keep_arr = np.concatenate(keeps) if keeps else np.empty(0)
    with zipfile.ZipFile(fh, "w") as zf:
        _zip_write(zf, "manifest.json", json.dumps(store.manifest, sort_keys=True, indent=1).encode())
        _zip_write(zf, "records.json", json.dumps(meta, indent=0).encode())
        _zip_write(zf, "draws.npy", _npy_bytes(draw_arr))
        _zip_write(zf, "keep.npy", _npy_bytes(keep_arr))


def persist_store(store: ForecastRecordStore, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        _write_store(store, fh)
    tmp.replace(path)
    return path


def load_store(path, expected_config: ExperimentConfig | None = None) -> ForecastRecordStore:
    """Read a store written by ``persist_store``.

    A config-hash mismatch against ``expected_config`` does not fail the load;
    it sets ``hash_mismatch`` and logs a warning.
    """
    try:
        with zipfile.ZipFile(path) as zf:
            manifest = json.loads(zf.read("manifest.json"))
            meta = json.loads(zf.read("records.json"))
            draw_arr = np.load(io.BytesIO(zf.read("draws.npy")), allow_pickle=False)
            keep_arr = np.load(io.BytesIO(zf.read("keep.npy")), allow_pickle=False)
    except FileNotFoundError:
        raise
    except (zipfile.BadZipFile, KeyError, ValueError, OSError, EOFError) as exc:
        raise CorruptStoreError(f"cannot read store {path}: {exc}") from exc
    if manifest.get("format") != STORE_FORMAT:
        raise CorruptStoreError(f"{path} is not a forecast store")
    if manifest.get("version") != STORE_VERSION:
        raise CorruptStoreError(f"store version {manifest.get('version')} unsupported (want {STORE_VERSION})")
    records = {}
    try:
        for row in meta:
            draws = draw_arr[row["draws_row"]].copy() if row["draws_row"] >= 0 else None
            keep = keep_ids = None
            if row["keep_offset"] >= 0:
                keep_ids = tuple(row["keep_ids"])
                keep = keep_arr[row["keep_offset"]: row["keep_offset"] + len(keep_ids)].copy()
            rec = ForecastRecord(
                model=row["model"],
                horizon=int(row["horizon"]),
                origin_index=int(row["origin_index"]),
                origin_date=parse_month(row["origin_date"]),
                target_date=parse_month(row["target_date"]),
                realized=float(row["realized"]),
                draws=draws,
                status=row["status"],
                error=row["error"],
                keep=keep,
                keep_ids=keep_ids,
            )
            records[(rec.model, rec.horizon, rec.origin_index)] = rec
    except (KeyError, IndexError, TypeError) as exc:
        raise CorruptStoreError(f"inconsistent store index in {path}: {exc}") from exc
    store = ForecastRecordStore(records, manifest)
    if expected_config is not None and manifest.get("config_hash") != expected_config.config_hash():
        log.warning("store %s was produced under a different config", path)
        store.hash_mismatch = True
    return store


# --------------------------------------------------------------------------
# evaluation


def subsample_masks(dates: pd.DatetimeIndex, subsamples) -> dict[str, np.ndarray]:
    """Boolean masks over evaluation (target) dates, ``full`` first."""
    out = {"full": np.ones(len(dates), dtype=bool)}
    for name, start, end in subsamples:
        m = np.ones(len(dates), dtype=bool)
        if start is not None:
            m &= dates >= parse_month(start)
        if end is not None:
            m &= dates <= parse_month(end)
        out[name] = m
    return out


def loss_frame(store: ForecastRecordStore, horizon: int) -> pd.DataFrame:
    """Per-origin losses on the origins where every model has a forecast."""
    models = store.models()
    common = None
    for m in models:
        ok = {r.origin_index for r in store.records.values() if r.model == m and r.horizon == horizon and r.ok}
        common = ok if common is None else common & ok
    common = sorted(common or [])
    realized = np.array([store.records[(models[0], horizon, t)].realized for t in common]) if common else np.empty(0)
    floor = 1e-8 * (float(np.var(realized)) if realized.size > 1 and np.var(realized) > 0 else 1.0)
    rows = []
    for m in models:
        for t in common:
            r = store.records[(m, horizon, t)]
            e = r.realized - r.mean
            row = {
                "model": m,
                "origin_index": t,
                "target_date": r.target_date,
                "error": e,
                "SE": e * e,
                "AE": abs(e),
                "CRPS": scoring.crps_sample(r.draws, r.realized),
                "LOGSCORE": scoring.log_score(r.draws, r.realized, var_floor=floor),
            }
            for scheme in scoring.QWS_SCHEMES:
                row[f"QWS_{scheme.upper()}"] = scoring.qws(r.draws, r.realized, scheme)
            rows.append(row)
    return pd.DataFrame(rows)


def _level(metric: str, part: pd.DataFrame) -> float:
    if metric == "RMSE":
        return float(np.sqrt(part["SE"].mean()))
    if metric == "MAE":
        return float(part["AE"].mean())
    return float(part[metric].mean())


def _loss_column(metric: str, part: pd.DataFrame) -> np.ndarray:
    if metric == "RMSE":
        return part["SE"].to_numpy()
    if metric == "MAE":
        return part["AE"].to_numpy()
    if metric == "LOGSCORE":
        return -part["LOGSCORE"].to_numpy()
    return part[metric].to_numpy()


def evaluate(store: ForecastRecordStore, config: ExperimentConfig | None = None) -> pd.DataFrame:
    """Score table over (model, horizon, subsample, metric).

    Levels average over origins; relative skill and DM/HLN p-values compare
    each model with the AR(2) baseline on the same origins. Cells that cannot
    be computed carry a ``flag`` instead of a number.
    """
    if not store.records:
        raise StoreError("store is empty")
    if BASELINE not in store.models():
        raise StoreError(f"store has no {BASELINE} baseline cells")
    subsamples = config.subsamples if config is not None else _subsamples_from(store)
    rows = []
    for h in store.horizons():
        lf = loss_frame(store, h)
        models = store.models()
        if lf.empty:
            dates = pd.DatetimeIndex([])
        else:
            dates = pd.DatetimeIndex(lf.loc[lf["model"] == BASELINE, "target_date"])
        masks = subsample_masks(dates, subsamples)
        for sub_name, mask in masks.items():
            base = lf[lf["model"] == BASELINE][mask] if len(lf) else lf
            for m in models:
                part = lf[lf["model"] == m][mask] if len(lf) else lf
                for metric in scoring.METRICS:
                    rows.append(_score_cell(m, h, sub_name, metric, part, base))
    return pd.DataFrame(rows, columns=scoring.SCORE_COLUMNS + ["flag", "n"])


def _score_cell(model, h, sub_name, metric, part, base) -> dict:
    cell = {"model": model, "horizon": h, "subsample": sub_name, "metric": metric,
            "level": math.nan, "relative_skill": math.nan, "dm_p": math.nan, "dm_hln_p": math.nan,
            "flag": "", "n": int(len(part))}
    if len(part) == 0:
        cell["flag"] = "empty"
        return cell
    level = _level(metric, part)
    base_level = _level(metric, base)
    cell["level"] = level
    try:
        cell["relative_skill"] = scoring.relative_skill(level, base_level, metric)
    except ZeroDivisionError:
        cell["flag"] = "zero_baseline"
    if model == BASELINE:
        return cell
    dates = pd.DatetimeIndex(part["target_date"])
    l1 = scoring.LossSeries(dates, _loss_column(metric, part), h)
    l2 = scoring.LossSeries(pd.DatetimeIndex(base["target_date"]), _loss_column(metric, base), h)
    try:
        res = scoring.dm_test(l1, l2, h)
        cell["dm_p"], cell["dm_hln_p"] = res.p, res.p_hln
    except HdMacroError as exc:
        cell["flag"] = (cell["flag"] + ";" if cell["flag"] else "") + f"dm_{type(exc).__name__}"
    except ValueError:
        cell["flag"] = (cell["flag"] + ";" if cell["flag"] else "") + "dm_too_short"
    return cell


def _subsamples_from(store: ForecastRecordStore):
    cfg = store.manifest.get("config", {})
    subs = cfg.get("subsamples")
    return tuple(tuple(s) for s in subs) if subs is not None else DEFAULT_SUBSAMPLES


def rank_table(table: pd.DataFrame) -> pd.DataFrame:
    """Add ``rank`` within each (metric, horizon, subsample): 1 is best."""
    out = table.copy()
    asc = out["metric"] != "LOGSCORE"
    score = np.where(asc, out["level"], -out["level"])
    out["_s"] = score
    out["rank"] = (
        out.groupby(["metric", "horizon", "subsample"])["_s"].rank(method="min", ascending=True).astype("Int64")
    )
    return out.drop(columns="_s")


def with_levels(levels: pd.DataFrame) -> pd.DataFrame:
    """Recompute relative skill from a level table (model, horizon, subsample,
    metric, level); used to rebuild published skill columns from levels."""
    out = levels.copy()
    base = out[out["model"] == BASELINE].set_index(["horizon", "subsample", "metric"])["level"]
    skills = []
    for _, row in out.iterrows():
        b = base.loc[(row["horizon"], row["subsample"], row["metric"])]
        skills.append(scoring.relative_skill(row["level"], b, row["metric"]))
    out["relative_skill"] = skills
    return out


def write_score_table(table: pd.DataFrame, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.loc[:, scoring.SCORE_COLUMNS].to_csv(path, index=False, float_format="%.17g")
    return path


def read_score_table(path) -> pd.DataFrame:
    return pd.read_csv(path)


def hs_summaries(store: ForecastRecordStore, horizon: int):
    """Per-origin keep summaries of the horseshoe cells at one horizon."""
    from .diagnostics import KappaSummary

    out = []
    for key in sorted(k for k in store.records if k[0] == "hs" and k[1] == horizon):
        r = store.records[key]
        if r.ok and r.keep is not None:
            out.append(KappaSummary(r.keep, r.keep_ids, r.origin_date, horizon))
    return out
