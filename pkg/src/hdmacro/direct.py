"""Direct (horizon-specific) forecasters: the flat-prior AR baseline and the
high-dimensional horseshoe regression."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import linalg

from .errors import InsufficientHistoryError, SingularDesignError
from .mcmc import HsChainConfig, HsDraws, run_hs_chain
from .panel import DesignPair

__all__ = [
    "ArFlatPosterior",
    "PredictiveDraws",
    "HsForecastOutput",
    "fit_flat_regression",
    "ar_design",
    "fit_ar_flat",
    "ar_regressor",
    "ar_predictive",
    "student_t_params",
    "hs_direct_forecast",
]


@dataclass(frozen=True)
class PredictiveDraws:
    draws: np.ndarray
    origin_date: pd.Timestamp | None = None
    horizon: int = 1
    model_tag: str = ""
    mean: float = field(init=False)

    def __post_init__(self):
        d = np.asarray(self.draws, dtype=float).reshape(-1)
        object.__setattr__(self, "draws", d)
        object.__setattr__(self, "mean", float(d.mean()))

    def __len__(self) -> int:
        return self.draws.size


@dataclass(frozen=True)
class ArFlatPosterior:
    """Conjugate posterior under p(beta, sigma2) ~ 1/sigma2."""

    beta_hat: np.ndarray
    xtx_inv: np.ndarray
    sse: float
    n: int
    k: int

    @property
    def dof(self) -> int:
        return self.n - self.k

    @property
    def sigma2_hat(self) -> float:
        return self.sse / self.dof


@dataclass(frozen=True)
class HsForecastOutput:
    predictive: PredictiveDraws
    keep_mean: np.ndarray
    top_k: list[tuple[str, float]]
    ids: tuple[str, ...]
    chain: HsDraws


def fit_flat_regression(X, y) -> ArFlatPosterior:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    if n <= k:
        raise InsufficientHistoryError(f"need more observations ({n}) than regressors ({k})")
    # QR keeps the fit accurate when columns are close to collinear.
    q, r = linalg.qr(X, mode="economic")
    d = np.abs(np.diag(r))
    if d.min() <= 1e-10 * max(d.max(), 1.0):
        raise SingularDesignError("design matrix is rank deficient")
    beta = linalg.solve_triangular(r, q.T @ y)
    r_inv = linalg.solve_triangular(r, np.eye(k))
    xtx_inv = r_inv @ r_inv.T
    resid = y - X @ beta
    return ArFlatPosterior(beta, xtx_inv, float(resid @ resid), n, k)


def ar_design(y_history, p: int, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """Rows ``[1, y_s, ..., y_{s-p+1}]`` paired with ``y_{s+h}``."""
    y = np.asarray(y_history, dtype=float)
    s = np.arange(p - 1, y.size - horizon)
    if s.size == 0:
        return np.empty((0, p + 1)), np.empty(0)
    lags = np.column_stack([y[s - i] for i in range(p)]) if p else np.empty((s.size, 0))
    return np.column_stack([np.ones(s.size), lags]), y[s + horizon]


def ar_regressor(y_history, p: int) -> np.ndarray:
    y = np.asarray(y_history, dtype=float)
    return np.concatenate([[1.0], y[::-1][:p]])


def fit_ar_flat(y_history, p: int = 2, horizon: int = 1) -> ArFlatPosterior:
    """Direct AR(p) for ``y_{t+h}`` on an intercept and ``p`` lags of ``y_t``.

    Leading NaNs (differencing) are dropped; interior NaNs are an error.
    """
    y = np.asarray(y_history, dtype=float)
    first = np.flatnonzero(~np.isnan(y))
    if first.size == 0:
        raise InsufficientHistoryError("target history is empty")
    y = y[first[0]:]
    if np.isnan(y).any():
        raise InsufficientHistoryError("target history has interior missing values")
    X, target = ar_design(y, p, horizon)
    if X.shape[0] <= p + 1:
        raise InsufficientHistoryError(
            f"{X.shape[0]} usable pairs for AR({p}) at h={horizon}; need more than {p + 1}"
        )
    return fit_flat_regression(X, target)


def student_t_params(post: ArFlatPosterior, x_oos) -> tuple[float, float, int]:
    """Location, squared scale and dof of the Student-t predictive."""
    x = np.asarray(x_oos, dtype=float)
    loc = float(x @ post.beta_hat)
    scale2 = post.sigma2_hat * (1.0 + float(x @ post.xtx_inv @ x))
    return loc, scale2, post.dof


def ar_predictive(
    post: ArFlatPosterior,
    x_oos,
    n_draws: int,
    rng: np.random.Generator,
    *,
    origin_date=None,
    horizon: int = 1,
    model_tag: str = "ar2",
) -> PredictiveDraws:
    loc, scale2, dof = student_t_params(post, x_oos)
    if dof < 1:
        raise InsufficientHistoryError(f"predictive needs dof >= 1, got {dof}")
    draws = loc + np.sqrt(scale2) * rng.standard_t(dof, size=n_draws)
    return PredictiveDraws(draws, origin_date, horizon, model_tag)


def hs_direct_forecast(
    design: DesignPair,
    config: HsChainConfig,
    rng: np.random.Generator,
    x_oos=None,
    *,
    top_k: int = 20,
    center_y: bool = True,
    model_tag: str = "hs",
) -> HsForecastOutput:
    """Run the horseshoe chain on a standardized design and turn every retained
    draw into one predictive draw ``x_oos' beta_s + sigma_s * eps``.

    With ``center_y`` the training mean of the target is removed before
    sampling and added back to the draws (an unshrunk intercept).
    """
    from .diagnostics import kappa_from_draws, top_k as rank_top_k

    x = design.x_oos if x_oos is None else np.asarray(x_oos, dtype=float)
    y = design.y
    offset = float(y.mean()) if center_y else 0.0
    chain = run_hs_chain(design.X, y - offset, config, rng)
    eps = rng.standard_normal(chain.n_draws)
    draws = offset + chain.beta_draws @ x + np.sqrt(chain.sigma2_draws) * eps
    pred = PredictiveDraws(draws, design.origin_date, design.horizon, model_tag)

    v = np.sum(design.X**2, axis=0)
    summary = kappa_from_draws(chain, v, ids=design.ids, origin_date=design.origin_date, horizon=design.horizon)
    ranked = rank_top_k(summary, top_k)
    return HsForecastOutput(pred, summary.keep_mean, ranked, design.ids, chain)
