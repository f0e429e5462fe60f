"""Dated macro panel, FRED-MD style transforms, window standardization and
design-matrix construction.

Indexing convention used throughout: an *origin* is a 0-based row index into
``Panel.dates``. With publication lag ``L`` the predictor row paired with
the target ``y[s + h]`` is ``x[s - L]``; the out-of-sample regressor at origin
``t`` is ``x[t - L]``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import (
    DateGapError,
    DuplicateIdError,
    EmptyDesignError,
    InsufficientHistoryError,
    PanelFormatError,
    TransformDomainError,
)

__all__ = [
    "TRANSFORM_CODES",
    "LEADS_LOST",
    "SD_FLOOR",
    "SeriesMeta",
    "Panel",
    "WindowStats",
    "DesignPair",
    "PredictorBlock",
    "apply_transform",
    "transform_panel",
    "compute_window_stats",
    "build_design",
    "build_predictor_block",
    "parse_month",
    "load_catalog_csv",
    "load_panel_csv",
    "write_panel_csv",
    "write_catalog_csv",
]

TRANSFORM_CODES = (1, 2, 3, 4, 5, 6, 7)
LEADS_LOST = {1: 0, 2: 1, 3: 2, 4: 0, 5: 1, 6: 2, 7: 2}
_LOG_CODES = {4, 5, 6}
SD_FLOOR = 1e-8
DEFAULT_MIN_WINDOW = 36
DEFAULT_LAG = 1


@dataclass(frozen=True)
class SeriesMeta:
    id: str
    name: str
    transform_code: int
    source_tag: str = ""

    def __post_init__(self):
        if self.transform_code not in TRANSFORM_CODES:
            raise PanelFormatError(
                f"series {self.id!r}: transform_code {self.transform_code} not in 1..7"
            )


@dataclass(frozen=True, eq=False)
class Panel:
    """Raw (untransformed) monthly panel.

    ``data`` is indexed by first-of-month timestamps, one column per series id.
    Missing cells are NaN.
    """

    data: pd.DataFrame
    metas: Mapping[str, SeriesMeta]
    target_id: str

    def __post_init__(self):
        idx = self.data.index
        if not isinstance(idx, pd.DatetimeIndex):
            raise PanelFormatError("panel index must be a DatetimeIndex of month starts")
        _check_monthly(idx)
        if self.target_id not in self.data.columns:
            raise PanelFormatError(f"target {self.target_id!r} not among panel columns")
        missing = [c for c in self.data.columns if c not in self.metas]
        if missing:
            raise PanelFormatError(f"no catalog entry for columns: {missing}")
        if self.data.columns.duplicated().any():
            dup = list(self.data.columns[self.data.columns.duplicated()])
            raise DuplicateIdError(f"duplicate series ids: {dup}")

    @property
    def dates(self) -> pd.DatetimeIndex:
        return self.data.index

    @property
    def columns(self) -> dict[str, np.ndarray]:
        return {c: self.data[c].to_numpy() for c in self.data.columns}

    @property
    def predictor_ids(self) -> list[str]:
        return [c for c in self.data.columns if c != self.target_id]

    def __len__(self) -> int:
        return len(self.data)

    def upto(self, origin: int) -> "Panel":
        """Panel truncated to rows ``0..origin`` inclusive.

        This is the only accessor the design builders use, so nothing dated
        after ``origin`` can leak into a forecast.
        """
        if not 0 <= origin < len(self.data):
            raise IndexError(f"origin {origin} outside panel of length {len(self.data)}")
        return Panel(self.data.iloc[: origin + 1], self.metas, self.target_id)

    def index_of(self, date) -> int:
        ts = parse_month(date) if not isinstance(date, pd.Timestamp) else date
        pos = self.data.index.get_indexer([ts])[0]
        if pos < 0:
            raise KeyError(f"date {date} not in panel")
        return int(pos)


@dataclass(frozen=True)
class WindowStats:
    means: np.ndarray
    sds: np.ndarray
    retained_ids: tuple[str, ...]

    def standardize(self, frame: pd.DataFrame) -> np.ndarray:
        x = frame.loc[:, list(self.retained_ids)].to_numpy(dtype=float)
        return (x - self.means) / self.sds


@dataclass(frozen=True)
class DesignPair:
    X: np.ndarray
    y: np.ndarray
    x_oos: np.ndarray
    ids: tuple[str, ...]
    stats: WindowStats
    origin_date: pd.Timestamp
    horizon: int
    lag: int
    predictor_dates: pd.DatetimeIndex
    target_dates: pd.DatetimeIndex

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def k(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class PredictorBlock:
    """Standardized predictors dated up to ``origin - lag`` with the target
    aligned so that row ``i`` holds ``x[s - lag]`` next to ``y[s]``."""

    X: np.ndarray
    y: np.ndarray
    ids: tuple[str, ...]
    stats: WindowStats
    dates: pd.DatetimeIndex
    origin_date: pd.Timestamp
    lag: int


# --------------------------------------------------------------------------
# transforms


def apply_transform(series, code: int, *, column: str = "?", dates=None) -> np.ndarray:
    """Apply a FRED-MD transformation code to one series.

    Differencing consumes leading observations, which come back as NaN, so
    the output always has the input's length.

    Parameters
    ----------
    series : array_like
        Raw values; NaN marks a missing cell.
    code : int
        1 level, 2 first difference, 3 second difference, 4 log, 5 log first
        difference, 6 log second difference, 7 first difference of the
        period-on-period growth rate.
    column, dates : optional
        Only used to label a ``TransformDomainError``.
    """
    x = np.asarray(series, dtype=float)
    if code not in TRANSFORM_CODES:
        raise ValueError(f"unknown transform code {code}")
    if code in _LOG_CODES:
        bad = np.flatnonzero(~np.isnan(x) & (x <= 0))
        if bad.size:
            i = int(bad[0])
            when = dates[i] if dates is not None else i
            raise TransformDomainError(column, when, float(x[i]))
        x = np.log(x)

    if code in (1, 4):
        return x.copy()
    if code in (2, 5):
        return _diff(x, 1)
    if code in (3, 6):
        return _diff(_diff(x, 1), 1)
    # code 7
    growth = np.full_like(x, np.nan)
    growth[1:] = x[1:] / x[:-1] - 1.0
    return _diff(growth, 1)


def _diff(x: np.ndarray, lag: int) -> np.ndarray:
    out = np.full_like(x, np.nan)
    out[lag:] = x[lag:] - x[:-lag]
    return out


def transform_panel(panel: Panel) -> pd.DataFrame:
    """Transform every column with its catalog code."""
    out = {}
    for col in panel.data.columns:
        out[col] = apply_transform(
            panel.data[col].to_numpy(dtype=float),
            panel.metas[col].transform_code,
            column=col,
            dates=panel.dates,
        )
    return pd.DataFrame(out, index=panel.dates)


# --------------------------------------------------------------------------
# standardization and designs


def compute_window_stats(window: pd.DataFrame, sd_floor: float = SD_FLOOR) -> WindowStats:
    """Column means and sample sds (ddof 1) over a training window.

    Columns with any missing value in the window, or with sd below
    ``sd_floor``, are dropped.
    """
    if len(window) < 2:
        raise InsufficientHistoryError("window needs at least 2 rows")
    vals = window.to_numpy(dtype=float)
    complete = ~np.isnan(vals).any(axis=0)
    means = np.full(vals.shape[1], np.nan)
    sds = np.full(vals.shape[1], np.nan)
    if complete.any():
        means[complete] = vals[:, complete].mean(axis=0)
        sds[complete] = vals[:, complete].std(axis=0, ddof=1)
    keep = complete & (sds >= sd_floor)
    if not keep.any():
        raise EmptyDesignError("no column survives the missing-value and variance screens")
    ids = tuple(str(c) for c, k in zip(window.columns, keep) if k)
    return WindowStats(means=means[keep], sds=sds[keep], retained_ids=ids)


def _observed_predictors(raw: pd.DataFrame, ids: Sequence[str], last_row: int) -> list[str]:
    """Predictors with no missing raw cell at or before ``last_row``."""
    block = raw.iloc[: last_row + 1][list(ids)]
    ok = ~block.isna().any(axis=0)
    return [c for c in ids if ok[c]]


def build_design(
    panel: Panel,
    horizon: int,
    lag: int,
    origin: int,
    stats: WindowStats | None = None,
    min_window: int = DEFAULT_MIN_WINDOW,
) -> DesignPair:
    """Standardized direct-regression design for one forecast origin.

    Training pairs are ``(x[s - lag], y[s + horizon])`` for every ``s`` with
    ``s + horizon <= origin``; the held-out regressor is ``x[origin - lag]``.
    Only ``panel.upto(origin)`` is read.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if lag < 0:
        raise ValueError("lag must be >= 0")
    sub = panel.upto(origin)
    t = origin
    x_last = t - lag
    if x_last < 0:
        raise InsufficientHistoryError(f"origin {origin} leaves no predictor rows at lag {lag}")

    y_all = apply_transform(
        sub.data[sub.target_id].to_numpy(dtype=float),
        sub.metas[sub.target_id].transform_code,
        column=sub.target_id,
        dates=sub.dates,
    )
    if stats is None:
        cand = _observed_predictors(sub.data, sub.predictor_ids, x_last)
    else:
        cand = list(stats.retained_ids)
    if not cand:
        raise EmptyDesignError(f"no fully observed predictor at origin {sub.dates[t].date()}")
    xt = transform_panel(Panel(sub.data[cand + [sub.target_id]], sub.metas, sub.target_id))[cand]
    xv = xt.to_numpy(dtype=float)

    _check_history(xv, y_all, x_last, t, min_window)

    s = np.arange(lag, t - horizon + 1)
    rows_ok = ~np.isnan(xv[s - lag]).any(axis=1) & ~np.isnan(y_all[s + horizon])
    s = s[rows_ok]
    if s.size < 2:
        raise InsufficientHistoryError(
            f"only {s.size} training pairs at origin {sub.dates[t].date()} (h={horizon}, L={lag})"
        )
    train = xt.iloc[s - lag]
    if stats is None:
        stats = compute_window_stats(train)
    X = stats.standardize(train)
    x_oos = stats.standardize(xt.iloc[[x_last]])[0]
    if np.isnan(x_oos).any():
        raise EmptyDesignError("out-of-sample regressor has missing values")
    return DesignPair(
        X=X,
        y=y_all[s + horizon],
        x_oos=x_oos,
        ids=stats.retained_ids,
        stats=stats,
        origin_date=sub.dates[t],
        horizon=horizon,
        lag=lag,
        predictor_dates=sub.dates[s - lag],
        target_dates=sub.dates[s + horizon],
    )


def build_predictor_block(
    panel: Panel, origin: int, lag: int, min_window: int = DEFAULT_MIN_WINDOW
) -> PredictorBlock:
    """All usable predictor rows dated up to ``origin - lag``, standardized on
    themselves, paired with the target ``lag`` months later.

    Factor models extract their factors from this block.
    """
    sub = panel.upto(origin)
    t = origin
    x_last = t - lag
    if x_last < 1:
        raise InsufficientHistoryError(f"origin {origin} leaves too few predictor rows")
    y_all = apply_transform(
        sub.data[sub.target_id].to_numpy(dtype=float),
        sub.metas[sub.target_id].transform_code,
        column=sub.target_id,
        dates=sub.dates,
    )
    cand = _observed_predictors(sub.data, sub.predictor_ids, x_last)
    if not cand:
        raise EmptyDesignError(f"no fully observed predictor at origin {sub.dates[t].date()}")
    xt = transform_panel(Panel(sub.data[cand + [sub.target_id]], sub.metas, sub.target_id))[cand]
    xv = xt.to_numpy(dtype=float)
    _check_history(xv, y_all, x_last, t, min_window)

    rows = np.arange(0, x_last + 1)
    ok = ~np.isnan(xv[rows]).any(axis=1) & ~np.isnan(y_all[rows + lag])
    rows = rows[ok]
    window = xt.iloc[rows]
    stats = compute_window_stats(window)
    return PredictorBlock(
        X=stats.standardize(window),
        y=y_all[rows + lag],
        ids=stats.retained_ids,
        stats=stats,
        dates=sub.dates[rows],
        origin_date=sub.dates[t],
        lag=lag,
    )


def _check_history(xv, y_all, x_last, t, min_window):
    # Usable observations: rows through the origin once differencing leads are gone.
    lead_x = _first_complete_row(xv[: x_last + 1])
    lead_y = _first_finite(y_all[: t + 1])
    first = max(lead_x, lead_y)
    n_obs = t + 1 - first
    if n_obs < min_window:
        raise InsufficientHistoryError(
            f"{n_obs} usable monthly observations at origin index {t}; need {min_window}"
        )


def _first_complete_row(x: np.ndarray) -> int:
    ok = ~np.isnan(x).any(axis=1)
    hits = np.flatnonzero(ok)
    return int(hits[0]) if hits.size else len(x)


def _first_finite(y: np.ndarray) -> int:
    hits = np.flatnonzero(~np.isnan(y))
    return int(hits[0]) if hits.size else len(y)


# --------------------------------------------------------------------------
# I/O


def parse_month(value) -> pd.Timestamp:
    """Parse ``YYYY-MM`` or ``YYYY-MM-DD`` into a first-of-month timestamp."""
    text = str(value).strip()
    parts = text.split("-")
    try:
        if len(parts) not in (2, 3):
            raise ValueError
        year, month = int(parts[0]), int(parts[1])
        if len(parts) == 3:
            int(parts[2])
        return pd.Timestamp(year=year, month=month, day=1)
    except ValueError:
        raise PanelFormatError(f"unparseable month-stamp {text!r}") from None


def _check_monthly(idx: pd.DatetimeIndex) -> None:
    if len(idx) == 0:
        raise PanelFormatError("panel has no rows")
    if (idx.day != 1).any():
        raise PanelFormatError("panel dates must be first-of-month")
    months = idx.year * 12 + idx.month
    steps = np.diff(np.asarray(months))
    if (steps <= 0).any():
        raise DateGapError("dates are not strictly increasing")
    if (steps != 1).any():
        i = int(np.flatnonzero(steps != 1)[0])
        raise DateGapError(f"gap in monthly dates between {idx[i].date()} and {idx[i + 1].date()}")


def load_catalog_csv(path) -> dict[str, SeriesMeta]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        need = {"id", "name", "transform_code", "source_tag"}
        if reader.fieldnames is None or not need.issubset(reader.fieldnames):
            raise PanelFormatError(f"catalog header must contain {sorted(need)}")
        out: dict[str, SeriesMeta] = {}
        for row in reader:
            sid = row["id"].strip()
            if sid in out:
                raise DuplicateIdError(f"duplicate id {sid!r} in catalog")
            try:
                code = int(row["transform_code"])
            except ValueError:
                raise PanelFormatError(f"bad transform_code for {sid!r}") from None
            out[sid] = SeriesMeta(sid, row["name"], code, row.get("source_tag") or "")
    return out


def load_panel_csv(path, catalog: Mapping[str, SeriesMeta], target_id: str) -> Panel:
    frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    if frame.columns[0] != "date":
        raise PanelFormatError("first panel column must be 'date'")
    cols = list(frame.columns[1:])
    if len(set(cols)) != len(cols):
        raise DuplicateIdError("duplicate series ids in panel header")
    unmatched = [c for c in cols if c not in catalog]
    if unmatched:
        raise PanelFormatError(f"panel columns without catalog entry: {unmatched}")
    dates = pd.DatetimeIndex([parse_month(d) for d in frame["date"]], name="date")
    values = frame[cols].replace("", np.nan)
    try:
        values = values.astype(float)
    except ValueError as exc:
        raise PanelFormatError(f"non-numeric cell in panel: {exc}") from None
    values.index = dates
    return Panel(values, {c: catalog[c] for c in cols}, target_id)


def write_panel_csv(frame: pd.DataFrame, path) -> None:
    out = frame.copy()
    out.index = [d.strftime("%Y-%m") for d in frame.index]
    out.index.name = "date"
    # repr round-trips float64 exactly
    out.to_csv(path, float_format="%.17g", na_rep="")


def write_catalog_csv(metas: Mapping[str, SeriesMeta], path) -> None:
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "name", "transform_code", "source_tag"])
        for m in metas.values():
            w.writerow([m.id, m.name, m.transform_code, m.source_tag])
