"""Shrinkage diagnostics for the horseshoe regression.

For predictor j at draw s the shrinkage ratio is
``kappa_j = 1 / (1 + tau2 * lambda2_j * v_j)`` with ``v_j`` the column sum of
squares of the standardized training design; ``keep_j = 1 - E[kappa_j]``.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .mcmc import HsDraws

__all__ = [
    "KappaSummary",
    "DriverLedger",
    "TruncationWarning",
    "kappa",
    "kappa_from_draws",
    "top_k",
    "aggregate_drivers",
    "export_driver_artifacts",
    "read_driver_artifacts",
]

DEFAULT_K = 20


class TruncationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class KappaSummary:
    keep_mean: np.ndarray
    predictor_ids: tuple[str, ...]
    origin_date: pd.Timestamp | None = None
    horizon: int | None = None

    def as_series(self) -> pd.Series:
        return pd.Series(self.keep_mean, index=list(self.predictor_ids))


@dataclass
class DriverLedger:
    K: int
    top_lists: dict[pd.Timestamp, list[tuple[str, float]]]
    counts: dict[str, int]
    mean_keep: dict[str, float]
    keep_frame: pd.DataFrame
    horizon: int | None = None

    @property
    def n_origins(self) -> int:
        return len(self.top_lists)


def kappa(tau2, lambda2, v):
    return 1.0 / (1.0 + np.asarray(tau2) * np.asarray(lambda2) * np.asarray(v))


def kappa_from_draws(draws: HsDraws, v, ids: Sequence[str] | None = None, origin_date=None, horizon=None) -> KappaSummary:
    v = np.asarray(v, dtype=float)
    k = draws.lambda2_draws.shape[1]
    if v.shape != (k,):
        raise ValueError(f"v has shape {v.shape}, expected ({k},)")
    if np.any(~(v > 0)):
        raise ValueError("v entries must be positive")
    if ids is None:
        ids = tuple(f"x{j}" for j in range(k))
    if len(ids) != k:
        raise ValueError("ids length does not match number of predictors")
    kap = kappa(draws.tau2_draws[:, None], draws.lambda2_draws, v[None, :])
    keep = 1.0 - kap.mean(axis=0)
    return KappaSummary(keep, tuple(ids), origin_date, horizon)


def top_k(summary: KappaSummary, K: int = DEFAULT_K) -> list[tuple[str, float]]:
    """Predictors ranked by keep, descending; ties go to the smaller id."""
    if K < 1:
        raise ValueError("K must be >= 1")
    k = len(summary.predictor_ids)
    if K > k:
        warnings.warn(f"K={K} exceeds {k} predictors; truncating", TruncationWarning, stacklevel=2)
        K = k
    order = sorted(range(k), key=lambda j: (-summary.keep_mean[j], summary.predictor_ids[j]))
    return [(summary.predictor_ids[j], float(summary.keep_mean[j])) for j in order[:K]]


def aggregate_drivers(per_origin: Sequence[KappaSummary], K: int = DEFAULT_K) -> DriverLedger:
    if not per_origin:
        raise ValueError("need at least one origin")
    universes = [set(s.predictor_ids) for s in per_origin]
    common = set.intersection(*universes)
    if any(u != common for u in universes):
        warnings.warn(
            f"predictor sets differ across origins; aligning on {len(common)} common ids",
            stacklevel=2,
        )
    ids = sorted(common)
    rows = {}
    top_lists = {}
    for i, s in enumerate(per_origin):
        keep = s.as_series().loc[ids]
        label = s.origin_date if s.origin_date is not None else i
        rows[label] = keep
        aligned = KappaSummary(keep.to_numpy(), tuple(ids), s.origin_date, s.horizon)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            top_lists[label] = top_k(aligned, K)
    frame = pd.DataFrame(rows).T
    frame.index.name = "origin_date"
    counts = {sid: 0 for sid in ids}
    for lst in top_lists.values():
        for sid, _ in lst:
            counts[sid] += 1
    mean_keep = {sid: float(frame[sid].mean()) for sid in ids}
    return DriverLedger(K, top_lists, counts, mean_keep, frame, per_origin[0].horizon)


def export_driver_artifacts(ledger: DriverLedger, path, prefix: str = "drivers") -> tuple[Path, Path]:
    """Write the bar table (id, mean_keep, count, rank) and the per-origin
    keep heatmap restricted to ids that ever made a top-K list."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    bars = pd.DataFrame(
        {"id": list(ledger.mean_keep), "mean_keep": list(ledger.mean_keep.values())}
    )
    bars["count"] = bars["id"].map(ledger.counts)
    bars = bars.sort_values(["mean_keep", "id"], ascending=[False, True], kind="mergesort").reset_index(drop=True)
    bars["rank"] = np.arange(1, len(bars) + 1)
    bar_path = out / f"{prefix}_bars.csv"
    bars.to_csv(bar_path, index=False, float_format="%.17g")

    union = sorted({sid for lst in ledger.top_lists.values() for sid, _ in lst})
    heat = ledger.keep_frame.loc[:, union].copy()
    heat.index = [_label(ix) for ix in heat.index]
    heat.index.name = "origin_date"
    heat_path = out / f"{prefix}_heatmap.csv"
    heat.to_csv(heat_path, float_format="%.17g")
    return bar_path, heat_path


def read_driver_artifacts(bar_path, heat_path) -> tuple[pd.DataFrame, pd.DataFrame]:
    bars = pd.read_csv(bar_path, dtype={"id": str})
    heat = pd.read_csv(heat_path, index_col="origin_date")
    return bars, heat


def dump_ledger_json(ledger: DriverLedger, path) -> None:
    payload = {
        "K": ledger.K,
        "horizon": ledger.horizon,
        "counts": ledger.counts,
        "mean_keep": ledger.mean_keep,
        "top_lists": {_label(k): v for k, v in ledger.top_lists.items()},
    }
    Path(path).write_text(json.dumps(payload, indent=2))


def _label(ix) -> str:
    return ix.strftime("%Y-%m") if isinstance(ix, pd.Timestamp) else str(ix)
