"""Samplers for the high-dimensional horseshoe regression.

The model is ``y = X beta + eps`` with ``eps ~ N(0, sigma2 I)`` and
``beta_j ~ N(0, sigma2 * tau2 * lambda2_j)``; the half-Cauchy scales use the
inverse-gamma auxiliary-variable representation, so every scale update is
conjugate. The coefficient block is drawn with the Gaussian-auxiliary
algorithm that only factorizes an ``n x n`` matrix, which is what makes
``k >> n`` designs tractable.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import ConfigError, NumericalError, SweepError

__all__ = [
    "RngStream",
    "HsState",
    "HsChainConfig",
    "HsDraws",
    "ConvergenceResult",
    "sample_inverse_gamma",
    "fast_beta_draw",
    "hs_gibbs_sweep",
    "initial_state",
    "run_hs_chain",
    "convergence_diagnostics",
    "autocorrelation",
]

_JITTER_STEPS = (1e-12, 1e-8, 1e-6)


@dataclass(frozen=True)
class RngStream:
    """Seed plus a ``(horizon, origin_index, model_tag)`` key.

    Equal keys give equal draw sequences; distinct keys give statistically
    independent streams (``SeedSequence`` spawn keys).
    """

    seed: int
    stream_key: tuple[int, int, str]

    def generator(self) -> np.random.Generator:
        h, origin, tag = self.stream_key
        ss = np.random.SeedSequence(
            int(self.seed), spawn_key=(int(h), int(origin), zlib.crc32(str(tag).encode()))
        )
        return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class HsChainConfig:
    n_iter: int = 10_000
    burn_in: int = 5_000
    thin: int = 1
    a_sigma: float = 0.0
    b_sigma: float = 0.0

    def __post_init__(self):
        if not self.n_iter > self.burn_in >= 0:
            raise ConfigError("need n_iter > burn_in >= 0")
        if self.thin < 1:
            raise ConfigError("thin must be >= 1")
        if self.a_sigma < 0 or self.b_sigma < 0:
            raise ConfigError("a_sigma and b_sigma must be nonnegative")

    @property
    def n_keep(self) -> int:
        return (self.n_iter - self.burn_in) // self.thin


@dataclass(frozen=True)
class HsState:
    beta: np.ndarray
    sigma2: float
    tau2: float
    lambda2: np.ndarray
    nu: np.ndarray
    xi: float

    def is_valid(self) -> bool:
        scales = np.concatenate([[self.sigma2, self.tau2, self.xi], self.lambda2, self.nu])
        return bool(np.all(np.isfinite(scales)) and np.all(scales > 0) and np.all(np.isfinite(self.beta)))


@dataclass(frozen=True)
class HsDraws:
    beta_draws: np.ndarray
    sigma2_draws: np.ndarray
    tau2_draws: np.ndarray
    lambda2_draws: np.ndarray

    @property
    def n_draws(self) -> int:
        return self.sigma2_draws.shape[0]


@dataclass(frozen=True)
class ConvergenceResult:
    geweke_z: float
    ess: float
    degenerate: bool = False


def sample_inverse_gamma(shape, rate, rng: np.random.Generator, size=None):
    """Draw from IG(shape, rate), density proportional to x^(-shape-1) exp(-rate/x).

    ``rate`` may be an array (vectorized over its entries).
    """
    shape = np.asarray(shape, dtype=float)
    rate = np.asarray(rate, dtype=float)
    if np.any(~(shape > 0)) or np.any(~(rate > 0)):
        raise ValueError("inverse-gamma needs shape > 0 and rate > 0")
    if size is None:
        size = np.broadcast(shape, rate).shape or None
    if np.all(shape == 1.0):
        g = rng.standard_exponential(size)
    else:
        g = rng.standard_gamma(shape, size)
    out = rate / g
    return float(out) if np.ndim(out) == 0 else out


def _cholesky_with_jitter(A: np.ndarray) -> np.ndarray:
    try:
        return linalg.cholesky(A, lower=True, check_finite=False)
    except linalg.LinAlgError:
        pass
    scale = float(np.mean(np.diag(A)))
    eye = np.eye(A.shape[0])
    for eps in _JITTER_STEPS:
        try:
            return linalg.cholesky(A + eps * scale * eye, lower=True, check_finite=False)
        except linalg.LinAlgError:
            continue
    raise NumericalError("Cholesky of X D X' + sigma2 I failed after jitter escalation")


def fast_beta_draw(X, y, sigma2: float, D, rng: np.random.Generator, size: int | None = None):
    """Exact draw from N(mu, Sigma) with Sigma = (X'X/sigma2 + D^-1)^-1 and
    mu = Sigma X'y / sigma2, without forming any k x k matrix.

    u ~ N(0, D), delta ~ N(0, sigma2 I_n), v = X u + delta,
    solve (X D X' + sigma2 I_n) w = y - v by Cholesky, return u + D X' w.

    ``size`` draws several betas sharing one factorization (rows of the result).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    D = np.asarray(D, dtype=float)
    n, k = X.shape
    if np.any(~(D > 0)):
        raise ValueError("prior variances D must be positive")
    m = 1 if size is None else int(size)

    sd = np.sqrt(D)
    Xs = X * sd
    A = Xs @ Xs.T
    A[np.diag_indices_from(A)] += sigma2
    L = _cholesky_with_jitter(A)

    u = rng.standard_normal((m, k)) * sd
    delta = rng.standard_normal((m, n)) * np.sqrt(sigma2)
    v = u @ X.T + delta
    w = linalg.cho_solve((L, True), (y[None, :] - v).T, check_finite=False)
    beta = u + (w.T @ X) * D
    return beta[0] if size is None else beta


def initial_state(k: int) -> HsState:
    return HsState(
        beta=np.zeros(k), sigma2=1.0, tau2=1.0, lambda2=np.ones(k), nu=np.ones(k), xi=1.0
    )


# Floor on sigma2 and prior variances. An exactly fitted target (e.g. all
# zeros) under the flat sigma2 prior drives the scales toward underflow.
SCALE_FLOOR = 1e-150


def _finite(step: str, value) -> None:
    if not np.all(np.isfinite(value)):
        raise SweepError(step)


def hs_gibbs_sweep(state: HsState, X, y, config: HsChainConfig, rng: np.random.Generator) -> HsState:
    """One full Gibbs sweep: beta, sigma2, local scales, global scale.

    The sigma2 rate carries the prior quadratic form sum(beta_j^2 / (tau2 lambda2_j)),
    i.e. beta' D^-1 beta with the sigma2 factor of D taken out, which is the
    exact full conditional under the sigma2-scaled prior.
    """
    n, k = X.shape
    s2, t2, l2 = state.sigma2, state.tau2, state.lambda2

    D = np.maximum(s2 * t2 * l2, SCALE_FLOOR)
    try:
        beta = fast_beta_draw(X, y, s2, D, rng)
    except ValueError as exc:
        raise SweepError("beta", str(exc)) from exc
    _finite("beta", beta)

    resid = y - X @ beta
    b2 = beta * beta
    quad = float(np.sum(b2 / l2)) / t2
    s2 = sample_inverse_gamma(
        (n + k) / 2.0 + config.a_sigma, (resid @ resid + quad) / 2.0 + config.b_sigma, rng
    )
    _finite("sigma2", s2)
    s2 = max(s2, SCALE_FLOOR)

    l2 = sample_inverse_gamma(1.0, 1.0 / state.nu + b2 / (2.0 * s2 * t2), rng)
    _finite("lambda2", l2)
    nu = sample_inverse_gamma(1.0, 1.0 + 1.0 / l2, rng)
    _finite("nu", nu)

    t2 = sample_inverse_gamma((k + 1) / 2.0, 1.0 / state.xi + float(np.sum(b2 / l2)) / (2.0 * s2), rng)
    _finite("tau2", t2)
    xi = sample_inverse_gamma(1.0, 1.0 + 1.0 / t2, rng)
    _finite("xi", xi)

    return HsState(beta=beta, sigma2=s2, tau2=t2, lambda2=np.atleast_1d(l2), nu=np.atleast_1d(nu), xi=xi)


def run_hs_chain(X, y, config: HsChainConfig, rng: np.random.Generator, init: HsState | None = None) -> HsDraws:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    if y.shape != (n,):
        raise ValueError("y must be an n-vector matching X")
    state = init or initial_state(k)
    S = config.n_keep
    beta_d = np.empty((S, k))
    sig_d = np.empty(S)
    tau_d = np.empty(S)
    lam_d = np.empty((S, k))
    j = 0
    for it in range(1, config.n_iter + 1):
        state = hs_gibbs_sweep(state, X, y, config, rng)
        if it > config.burn_in and (it - config.burn_in) % config.thin == 0 and j < S:
            beta_d[j] = state.beta
            sig_d[j] = state.sigma2
            tau_d[j] = state.tau2
            lam_d[j] = state.lambda2
            j += 1
    return HsDraws(beta_d, sig_d, tau_d, lam_d)


# --------------------------------------------------------------------------
# diagnostics


def autocorrelation(x: np.ndarray, max_lag: int | None = None) -> np.ndarray:
    """Sample autocorrelations rho_0..rho_max_lag (biased autocovariance, FFT)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    max_lag = n - 1 if max_lag is None else min(max_lag, n - 1)
    xc = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[: max_lag + 1] / n
    return acov / acov[0]


def _integrated_time(x: np.ndarray) -> float:
    # Initial positive sequence: add adjacent-lag pairs until a pair turns negative.
    rho = autocorrelation(x)
    total = 0.0
    for m in range(1, (rho.size - 1) // 2 + 1):
        pair = rho[2 * m - 1] + rho[2 * m]
        if pair < 0:
            break
        total += pair
    return 1.0 + 2.0 * total


def _mean_variance(x: np.ndarray) -> float:
    """Long-run variance of the sample mean, var(x) * tau_int / n."""
    return float(np.var(x, ddof=1)) * _integrated_time(x) / x.size


def convergence_diagnostics(chain) -> ConvergenceResult:
    """Geweke z (first 10% vs last 50%) and effective sample size."""
    x = np.asarray(chain, dtype=float)
    if x.size < 100:
        raise ValueError("chain must have at least 100 draws")
    if np.ptp(x) == 0.0:
        return ConvergenceResult(geweke_z=0.0, ess=float("inf"), degenerate=True)
    ess = x.size / _integrated_time(x)
    a = x[: int(0.1 * x.size)]
    b = x[x.size - int(0.5 * x.size):]
    va, vb = _mean_variance(a), _mean_variance(b)
    denom = np.sqrt(va + vb)
    z = 0.0 if denom == 0 else float((a.mean() - b.mean()) / denom)
    return ConvergenceResult(geweke_z=z, ess=float(ess))
