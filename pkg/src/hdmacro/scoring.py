"""Point, density and quantile-weighted scores, relative skill and the
Diebold-Mariano test with the Harvey-Leybourne-Newbold correction."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import stats

from .errors import AlignmentError, ZeroVarianceError

log = logging.getLogger(__name__)

__all__ = [
    "METRICS",
    "LOSS_METRICS",
    "QWS_SCHEMES",
    "QUANTILE_GRID",
    "LossSeries",
    "DmResult",
    "point_metrics",
    "crps_sample",
    "crps_double_sum",
    "crps_gaussian",
    "log_score",
    "quantile_score",
    "qws",
    "relative_skill",
    "hac_variance",
    "hln_factor",
    "dm_test",
    "SCORE_COLUMNS",
]

METRICS = (
    "RMSE", "MAE", "CRPS", "LOGSCORE",
    "QWS_LEFT", "QWS_RIGHT", "QWS_TAILS", "QWS_CENTER", "QWS_UNIFORM",
)
LOSS_METRICS = frozenset(m for m in METRICS if m != "LOGSCORE")
QUANTILE_GRID = np.round(np.arange(1, 20) * 0.05, 10)
SCORE_COLUMNS = ["model", "horizon", "subsample", "metric", "level", "relative_skill", "dm_p", "dm_hln_p"]

QWS_SCHEMES = {
    "uniform": lambda tau: np.ones_like(tau),
    "center": lambda tau: tau * (1.0 - tau),
    "tails": lambda tau: (2.0 * tau - 1.0) ** 2,
    "left": lambda tau: (1.0 - tau) ** 2,
    "right": lambda tau: tau**2,
}


@dataclass(frozen=True)
class LossSeries:
    dates: pd.DatetimeIndex
    values: np.ndarray
    horizon: int


@dataclass(frozen=True)
class DmResult:
    dm: float
    dm_hln: float
    p: float
    p_hln: float


def point_metrics(errors) -> tuple[float, float]:
    e = np.asarray(errors, dtype=float)
    if e.size == 0:
        raise ValueError("no forecast errors")
    return float(np.sqrt(np.mean(e**2))), float(np.mean(np.abs(e)))


def crps_sample(draws, y: float) -> float:
    """Empirical-CDF CRPS of a sample, O(S log S).

    Equals mean|x_s - y| - (1 / 2S^2) sum_{s,s'} |x_s - x_s'|; the double sum
    is evaluated from the order statistics, sum_i (2i - S - 1) x_(i) / S^2.
    """
    x = np.sort(np.asarray(draws, dtype=float))
    S = x.size
    if S == 0:
        raise ValueError("empty draws")
    i = np.arange(1, S + 1)
    spread = np.sum((2 * i - S - 1) * x) / S**2
    return float(np.mean(np.abs(x - y)) - spread)


def crps_double_sum(draws, y: float) -> float:
    x = np.asarray(draws, dtype=float)
    return float(np.mean(np.abs(x - y)) - 0.5 * np.mean(np.abs(x[:, None] - x[None, :])))


def crps_gaussian(mu: float, sigma: float, y: float) -> float:
    z = (y - mu) / sigma
    return float(sigma * (z * (2 * stats.norm.cdf(z) - 1) + 2 * stats.norm.pdf(z) - 1 / np.sqrt(np.pi)))


def log_score(draws, y: float, var_floor: float = 1e-8) -> float:
    """Log density at ``y`` of a Gaussian with the draws' mean and variance."""
    x = np.asarray(draws, dtype=float)
    if x.size < 2:
        raise ValueError("log score needs at least 2 draws")
    var = float(np.var(x, ddof=1))
    if var < var_floor:
        log.debug("draw variance %.3g floored to %.3g", var, var_floor)
        var = var_floor
    return float(-0.5 * np.log(2 * np.pi * var) - 0.5 * (y - x.mean()) ** 2 / var)


def quantile_score(q, y: float, tau) -> np.ndarray:
    """Doubled pinball loss 2 (1{y <= q} - tau)(q - y)."""
    q = np.asarray(q, dtype=float)
    tau = np.asarray(tau, dtype=float)
    return 2.0 * ((y <= q).astype(float) - tau) * (q - y)


def qws(draws, y: float, scheme: str = "uniform", grid=QUANTILE_GRID) -> float:
    """Quantile-weighted score on the 19-point grid 0.05..0.95.

    Riemann sum of w(tau) QS_tau with step 0.05, i.e. the integral over tau
    that the uniform scheme shares with the CRPS. Quantiles interpolate
    linearly between order statistics (rank 1 + (S-1) tau).
    """
    try:
        w = QWS_SCHEMES[scheme]
    except KeyError:
        raise ValueError(f"unknown QWS scheme {scheme!r}; choose from {sorted(QWS_SCHEMES)}") from None
    x = np.asarray(draws, dtype=float)
    tau = np.asarray(grid, dtype=float)
    q = np.quantile(x, tau, method="linear")
    step = 1.0 / (tau.size + 1)
    return float(step * np.sum(w(tau) * quantile_score(q, y, tau)))


def relative_skill(level_model: float, level_baseline: float, metric_kind: str) -> float:
    """1 - model/baseline for loss metrics; model - baseline for the log score."""
    if metric_kind == "LOGSCORE":
        return float(level_model - level_baseline)
    if metric_kind not in LOSS_METRICS:
        raise ValueError(f"unknown metric {metric_kind!r}")
    if level_baseline == 0:
        raise ZeroDivisionError("baseline level is zero")
    return float(1.0 - level_model / level_baseline)


def hac_variance(d, h: int) -> float:
    """Variance of the mean of ``d``: (gamma_0 + 2 sum_{j<h} (1 - j/h) gamma_j) / T."""
    d = np.asarray(d, dtype=float)
    T = d.size
    dc = d - d.mean()
    lrv = dc @ dc / T
    for j in range(1, h):
        gamma = dc[j:] @ dc[:-j] / T
        lrv += 2.0 * (1.0 - j / h) * gamma
    return float(lrv / T)


def hln_factor(T: int, h: int) -> float:
    return float(np.sqrt((T + 1 - 2 * h + h * (h - 1) / T) / T))


def dm_test(loss1: LossSeries, loss2: LossSeries, h: int) -> DmResult:
    """Two-sided DM test of equal expected loss, d_t = loss1_t - loss2_t."""
    if h < 1:
        raise ValueError("h must be >= 1")
    if len(loss1.dates) != len(loss2.dates) or not loss1.dates.equals(loss2.dates):
        raise AlignmentError("loss series are not aligned on common dates")
    d = np.asarray(loss1.values, dtype=float) - np.asarray(loss2.values, dtype=float)
    T = d.size
    if T < 2:
        raise ValueError("DM test needs at least 2 loss differentials")
    if T < 8:
        log.warning("DM test on only %d observations", T)
    var = hac_variance(d, h)
    if not var > 0:
        raise ZeroVarianceError("loss differential has zero long-run variance")
    dm = float(d.mean() / np.sqrt(var))
    dm_hln = dm * hln_factor(T, h)
    p = float(2 * stats.norm.sf(abs(dm)))
    p_hln = float(2 * stats.norm.sf(abs(dm_hln)))
    return DmResult(dm, dm_hln, p, p_hln)
