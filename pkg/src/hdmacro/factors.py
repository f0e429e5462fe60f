"""Factor-based forecasters: PCA factors, FA-AR (direct), FAVAR (iterated)
and a two-step dynamic factor model filtered with a Kalman recursion."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import linalg

from .direct import ArFlatPosterior, PredictiveDraws, fit_flat_regression, student_t_params
from .errors import ConfigError, InsufficientHistoryError, NumericalError, SingularDesignError

log = logging.getLogger(__name__)

__all__ = [
    "FactorSet",
    "FactorConfig",
    "VarFit",
    "DfmModel",
    "KalmanResult",
    "extract_factors_pca",
    "default_grid",
    "fa_ar_design",
    "select_factor_config",
    "fa_ar_posterior",
    "fit_fa_ar",
    "fit_var",
    "companion_matrix",
    "var_forecast_mean",
    "favar_iterate",
    "fit_dfm_twostep",
    "kalman_filter",
    "kalman_filter_forecast",
]


@dataclass(frozen=True)
class FactorSet:
    factors: np.ndarray
    loadings: np.ndarray
    eigenvalues: np.ndarray
    r: int

    def project(self, X) -> np.ndarray:
        """Scores of new standardized rows on the fitted loadings."""
        return np.asarray(X, dtype=float) @ self.loadings


@dataclass(frozen=True)
class FactorConfig:
    r: int
    p_f: int


@dataclass(frozen=True)
class VarFit:
    intercept: np.ndarray
    lags: np.ndarray  # (q, m, m); lags[l] multiplies z[t-l-1]
    resid_cov: np.ndarray
    lag_order: int

    @property
    def m(self) -> int:
        return self.intercept.size


@dataclass(frozen=True)
class DfmModel:
    Lambda: np.ndarray
    Phi: np.ndarray
    Q: np.ndarray
    R_diag: np.ndarray
    y_loading: np.ndarray
    y_intercept: float
    y_resid_var: float

    @property
    def r(self) -> int:
        return self.Phi.shape[0]

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.Phi)))) if self.r else 0.0


@dataclass(frozen=True)
class KalmanResult:
    filtered: np.ndarray
    filtered_cov: np.ndarray
    innovations: np.ndarray


# --------------------------------------------------------------------------
# PCA


def extract_factors_pca(X, r: int) -> FactorSet:
    """First ``r`` principal components of a standardized ``n x k`` matrix.

    Eigen-decomposes the k x k covariance when k <= n and the n x n Gram
    matrix otherwise. Each loading column is signed so that its largest
    absolute entry is positive.
    """
    X = np.asarray(X, dtype=float)
    n, k = X.shape
    if not 1 <= r <= min(n, k):
        raise ConfigError(f"r={r} outside [1, min(n, k)={min(n, k)}]")
    if k <= n:
        cov = X.T @ X / (n - 1)
        vals, vecs = linalg.eigh(cov)
        order = np.argsort(vals)[::-1][:r]
        vals, V = vals[order], vecs[:, order]
    else:
        gram = X @ X.T
        mu, U = linalg.eigh(gram)
        order = np.argsort(mu)[::-1][:r]
        mu, U = mu[order], U[:, order]
        mu = np.clip(mu, 0.0, None)
        with np.errstate(divide="ignore", invalid="ignore"):
            V = (X.T @ U) / np.sqrt(mu)
        V[:, mu <= 0] = 0.0
        vals = mu / (n - 1)
    vals = np.clip(vals, 0.0, None)
    anchor = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[anchor, np.arange(r)])
    signs[signs == 0] = 1.0
    V = V * signs
    return FactorSet(factors=X @ V, loadings=V, eigenvalues=vals, r=r)


# --------------------------------------------------------------------------
# FA-AR


def default_grid(r_max: int = 8, p_f_max: int = 3) -> list[FactorConfig]:
    return [FactorConfig(r, p) for r in range(1, r_max + 1) for p in range(0, p_f_max + 1)]


def fa_ar_design(y, F, p_f: int, horizon: int, start: int | None = None):
    """Regressors ``[1, y_i, F_i, F_{i-1}, ..., F_{i-p_f}]`` for target ``y_{i+h}``.

    Row ``i`` of ``F`` is the factor information paired with ``y_i``.
    Returns the training design, targets and the out-of-sample regressor
    built at the last row.
    """
    y = np.asarray(y, dtype=float)
    F = np.asarray(F, dtype=float)
    N = y.size
    first = p_f if start is None else max(start, p_f)
    rows = np.arange(first, N - horizon)

    def regs(idx):
        idx = np.atleast_1d(idx)
        parts = [np.ones(idx.size), y[idx]]
        cols = [np.column_stack(parts)]
        for lag in range(p_f + 1):
            cols.append(F[idx - lag])
        return np.hstack(cols)

    X = regs(rows) if rows.size else np.empty((0, 2 + F.shape[1] * (p_f + 1)))
    return X, y[rows + horizon], regs(N - 1)[0]


def select_factor_config(X, y_target, horizon: int, grid: Iterable[FactorConfig] | None = None) -> FactorConfig:
    """Minimize the BIC of the direct FA-AR regression over ``grid``.

    Every candidate is fitted on the same rows (those usable at the largest
    ``p_f`` in the grid) so the criteria are comparable. Ties go to the
    smaller ``r``, then the smaller ``p_f``.
    """
    grid = list(grid) if grid is not None else default_grid()
    if not grid:
        raise ConfigError("factor grid is empty")
    X = np.asarray(X, dtype=float)
    n, k = X.shape
    feasible = [c for c in grid if c.r <= min(n, k)]
    if not feasible:
        raise ConfigError("no grid point has r <= min(n, k)")
    fs = extract_factors_pca(X, max(c.r for c in feasible))
    start = max(c.p_f for c in feasible)
    best, best_key = None, None
    for cfg in feasible:
        Z, target, _ = fa_ar_design(y_target, fs.factors[:, : cfg.r], cfg.p_f, horizon, start=start)
        m = target.size
        try:
            post = fit_flat_regression(Z, target)
        except (SingularDesignError, InsufficientHistoryError):
            continue
        sse = max(post.sse, 1e-300)
        bic = m * np.log(sse / m) + post.k * np.log(m)
        key = (bic, cfg.r, cfg.p_f)
        if best_key is None or key < best_key:
            best, best_key = cfg, key
    if best is None:
        raise SingularDesignError("every factor-grid candidate failed to fit")
    return best


def fa_ar_posterior(y, factors, config: FactorConfig, horizon: int) -> tuple[ArFlatPosterior, np.ndarray]:
    F = np.asarray(factors, dtype=float)[:, : config.r]
    Z, target, x_oos = fa_ar_design(y, F, config.p_f, horizon)
    return fit_flat_regression(Z, target), x_oos


def fit_fa_ar(
    y,
    factors,
    config: FactorConfig,
    horizon: int,
    n_draws: int,
    rng: np.random.Generator,
    *,
    origin_date=None,
    model_tag: str = "faar",
) -> PredictiveDraws:
    post, x_oos = fa_ar_posterior(y, factors, config, horizon)
    loc, scale2, dof = student_t_params(post, x_oos)
    if dof < 1:
        raise InsufficientHistoryError("FA-AR predictive needs dof >= 1")
    draws = loc + np.sqrt(scale2) * rng.standard_t(dof, size=n_draws)
    return PredictiveDraws(draws, origin_date, horizon, model_tag)


# --------------------------------------------------------------------------
# VAR / FAVAR


def fit_var(Z, q: int) -> VarFit:
    """Equation-by-equation least squares VAR(q) with intercept."""
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    n, m = Z.shape
    if q < 1:
        raise ConfigError("VAR lag order must be >= 1")
    if n <= m * q + 1:
        raise InsufficientHistoryError(f"VAR({q}) on {m} series needs more than {m * q + 1} rows")
    rows = np.arange(q, n)
    W = np.hstack([np.ones((rows.size, 1))] + [Z[rows - l - 1] for l in range(q)])
    B, _, rank, _ = linalg.lstsq(W, Z[rows])
    if rank < W.shape[1]:
        raise SingularDesignError("VAR design is rank deficient")
    E = Z[rows] - W @ B
    dof = rows.size - (m * q + 1)
    if dof < 1:
        raise InsufficientHistoryError("no residual degrees of freedom in VAR")
    cov = E.T @ E / dof
    lags = np.stack([B[1 + l * m: 1 + (l + 1) * m].T for l in range(q)])
    return VarFit(intercept=B[0], lags=lags, resid_cov=(cov + cov.T) / 2, lag_order=q)


def companion_matrix(fit: VarFit) -> np.ndarray:
    m, q = fit.m, fit.lag_order
    C = np.zeros((m * q, m * q))
    C[:m] = np.hstack(list(fit.lags))
    if q > 1:
        C[m:, : m * (q - 1)] = np.eye(m * (q - 1))
    return C


def _check_state(fit: VarFit, last_state) -> np.ndarray:
    S = np.asarray(last_state, dtype=float)
    if S.ndim == 1:
        S = S[:, None]
    if S.shape != (fit.lag_order, fit.m):
        raise ValueError(f"last_state must be ({fit.lag_order}, {fit.m}); got {S.shape}")
    return S


def var_forecast_mean(fit: VarFit, last_state, h: int) -> np.ndarray:
    """Deterministic h-step iterate. ``last_state`` rows are oldest first."""
    S = _check_state(fit, last_state)
    hist = [row for row in S]
    for _ in range(h):
        nxt = fit.intercept + sum(fit.lags[l] @ hist[-l - 1] for l in range(fit.lag_order))
        hist.append(nxt)
    return hist[-1]


def _psd_sqrt(cov: np.ndarray) -> np.ndarray:
    vals, vecs = linalg.eigh(cov)
    tol = 1e-10 * max(1.0, float(np.max(np.abs(vals))))
    if vals.min() < -tol:
        raise NumericalError("innovation covariance is not positive semi-definite")
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def favar_iterate(
    fit: VarFit,
    last_state,
    h: int,
    n_sims: int,
    rng: np.random.Generator,
    *,
    target_index: int = -1,
    origin_date=None,
    model_tag: str = "favar",
) -> PredictiveDraws:
    """Simulate ``n_sims`` paths of the fitted VAR (coefficients fixed,
    Gaussian innovations) and keep the target component at step ``h``."""
    if h < 1:
        raise ValueError("h must be >= 1")
    S = _check_state(fit, last_state)
    root = _psd_sqrt(fit.resid_cov)
    q, m = fit.lag_order, fit.m
    hist = np.broadcast_to(S, (n_sims, q, m)).copy()
    for _ in range(h):
        shock = rng.standard_normal((n_sims, m)) @ root.T
        nxt = fit.intercept + shock
        for l in range(q):
            nxt = nxt + hist[:, q - 1 - l] @ fit.lags[l].T
        hist = np.concatenate([hist[:, 1:], nxt[:, None, :]], axis=1)
    return PredictiveDraws(hist[:, -1, target_index], origin_date, h, model_tag)


# --------------------------------------------------------------------------
# DFM


def fit_dfm_twostep(X, r: int, y=None) -> DfmModel:
    """Two-step DFM: PCA factors, then least-squares loadings, idiosyncratic
    variances and a VAR(1) for the factors. With ``y`` the target is
    regressed on an intercept and the factors as a separate measurement."""
    X = np.asarray(X, dtype=float)
    n, k = X.shape
    fs = extract_factors_pca(X, r)
    F = fs.factors
    ftf = F.T @ F
    if np.linalg.cond(ftf) > 1e12:
        raise SingularDesignError("factor regression is singular")
    Lam = linalg.solve(ftf, F.T @ X, assume_a="pos").T
    E = X - F @ Lam.T
    R = np.mean(E**2, axis=0)

    F0, F1 = F[:-1], F[1:]
    Phi = linalg.solve(F0.T @ F0, F0.T @ F1, assume_a="pos").T
    U = F1 - F0 @ Phi.T
    Q = U.T @ U / max(U.shape[0] - r, 1)
    Q = (Q + Q.T) / 2

    if y is None:
        yl, yc, yv = np.zeros(r), 0.0, 0.0
    else:
        y = np.asarray(y, dtype=float)
        post = fit_flat_regression(np.column_stack([np.ones(n), F]), y)
        yc, yl = float(post.beta_hat[0]), post.beta_hat[1:]
        yv = post.sse / max(post.dof, 1)
    model = DfmModel(Lam, Phi, Q, R, yl, yc, yv)
    if model.spectral_radius >= 1:
        log.warning("DFM transition has spectral radius %.3f >= 1", model.spectral_radius)
    return model


def _initial_cov(Phi: np.ndarray, Q: np.ndarray) -> np.ndarray:
    r = Phi.shape[0]
    if np.max(np.abs(np.linalg.eigvals(Phi))) < 1:
        P0 = linalg.solve_discrete_lyapunov(Phi, Q)
        if np.all(np.isfinite(P0)) and np.min(linalg.eigvalsh((P0 + P0.T) / 2)) > 1e-8:
            return (P0 + P0.T) / 2
    return np.eye(r)


def kalman_filter(model: DfmModel, X_window, r_floor: float = 1e-12) -> KalmanResult:
    """Filter the factor state through ``X_t = Lambda f_t + e_t``.

    With diagonal measurement noise the k-dimensional observation collapses
    to the r-dimensional GLS statistic ``(L'R^-1 L)^-1 L'R^-1 x_t``, whose
    noise covariance is ``(L'R^-1 L)^-1``; the filtered state is identical
    and every matrix inverted is r x r.
    """
    X = np.asarray(X_window, dtype=float)
    Lam, Phi, Q = model.Lambda, model.Phi, model.Q
    R = np.maximum(model.R_diag, r_floor)
    LtRi = Lam.T / R
    info = LtRi @ Lam
    H = linalg.inv(info)
    H = (H + H.T) / 2
    obs = X @ (LtRi.T @ H)  # rows: collapsed observations

    T, r = obs.shape[0], model.r
    a = np.zeros(r)
    P = _initial_cov(Phi, Q)
    filt = np.empty((T, r))
    covs = np.empty((T, r, r))
    innov = np.empty((T, r))
    for t in range(T):
        if t > 0:
            a = Phi @ a
            P = Phi @ P @ Phi.T + Q
        v = obs[t] - a
        S = P + H
        K = linalg.solve(S, P, assume_a="pos").T
        a = a + K @ v
        P = P - K @ P
        P = (P + P.T) / 2
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(P))):
            raise NumericalError(f"Kalman recursion diverged at step {t}")
        filt[t], covs[t], innov[t] = a, P, v
    return KalmanResult(filt, covs, innov)


def kalman_filter_forecast(
    model: DfmModel,
    X_window,
    h: int,
    n_draws: int,
    rng: np.random.Generator,
    *,
    origin_date=None,
    model_tag: str = "dfm",
) -> PredictiveDraws:
    """Gaussian predictive for the target ``h`` steps past the last filtered row."""
    mean, var = dfm_predictive_moments(model, X_window, h)
    draws = mean + np.sqrt(var) * rng.standard_normal(n_draws)
    return PredictiveDraws(draws, origin_date, h, model_tag)


def dfm_predictive_moments(model: DfmModel, X_window, h: int) -> tuple[float, float]:
    if h < 1:
        raise ValueError("h must be >= 1")
    kf = kalman_filter(model, X_window)
    a, P = kf.filtered[-1], kf.filtered_cov[-1]
    for _ in range(h):
        a = model.Phi @ a
        P = model.Phi @ P @ model.Phi.T + model.Q
    mean = model.y_intercept + float(model.y_loading @ a)
    var = float(model.y_loading @ P @ model.y_loading) + model.y_resid_var
    if not (np.isfinite(mean) and np.isfinite(var)):
        raise NumericalError("non-finite DFM predictive moments")
    return mean, max(var, 0.0)
