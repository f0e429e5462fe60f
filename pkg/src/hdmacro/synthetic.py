"""Synthetic factor panels for desk-scale experiments."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import ConfigError
from .panel import Panel, SeriesMeta

TARGET_ID = "TARGET"


@dataclass(frozen=True)
class TargetSpec:
    """How the target loads on the latent factors and on a few predictors.

    The target is ``sum_i factor_weight * f_i[t - factor_lag]`` plus ``direct_coef`` times
    each of ``n_direct`` stationary predictors dated ``t - direct_lead``,
    plus Gaussian noise with sd ``noise_sd``. Factors reach the target with
    a delay, so under a one-month publication lag the latest factor readings
    still carry information that the target's own lags do not. With a delay
    longer than the publication lag, the factor value that drives next month's
    target is already two readings old, so a model that carries factor dynamics
    sees it more sharply than a regression on the latest readings alone.
    """

    factor_weight: float = 2.0
    factor_lag: int = 3
    n_direct: int = 5
    direct_coef: float = 1.0
    direct_lead: int = 13
    noise_sd: float = 1.0
    mean: float = 0.0


@dataclass(frozen=True)
class PanelSpec:
    factor_ar: tuple[float, ...] = (0.8, 0.7, 0.6)
    loading_scale: float = 0.5
    noise_scale: float = 1.0
    mixed_codes: bool = True
    start: str = "2000-01"


def generate_synthetic_panel(
    seed: int,
    T: int,
    p: int,
    r_true: int,
    target_spec: TargetSpec | None = None,
    panel_spec: PanelSpec | None = None,
) -> Panel:
    """Simulate ``p`` predictors driven by ``r_true`` AR(1) factors and a target.

    Predictors are stored raw: with ``mixed_codes`` a third are levels
    (code 1), a third random walks to be first-differenced (code 2) and a
    third log-level indexes to be log-differenced (code 5). The stationary
    component of each is ``loading' f_t + noise``. The target is code 1.
    """
    target_spec = target_spec or TargetSpec()
    panel_spec = panel_spec or PanelSpec()
    if T < 60:
        raise ConfigError("T must be >= 60")
    if p < 1:
        raise ConfigError("p must be >= 1")
    if not 0 <= r_true <= min(T, p):
        raise ConfigError("r_true must lie in [0, min(T, p)]")
    if target_spec.factor_lag < 0 or target_spec.direct_lead < 0:
        raise ConfigError("factor_lag and direct_lead must be >= 0")
    if target_spec.n_direct > p:
        raise ConfigError("n_direct cannot exceed p")

    rng = np.random.default_rng(seed)
    burn = 100 + target_spec.factor_lag
    rho = np.resize(np.asarray(panel_spec.factor_ar, dtype=float), r_true) if r_true else np.empty(0)
    f = np.zeros((T + burn, r_true))
    if r_true:
        innov = rng.standard_normal((T + burn, r_true)) * np.sqrt(1.0 - rho**2)
        for t in range(1, T + burn):
            f[t] = rho * f[t - 1] + innov[t]
    f_lagged = f[burn - target_spec.factor_lag: burn - target_spec.factor_lag + T]
    f = f[burn:]

    loadings = rng.standard_normal((p, r_true)) * panel_spec.loading_scale
    noise = rng.standard_normal((T, p)) * panel_spec.noise_scale
    stationary = f @ loadings.T + noise

    lead = target_spec.direct_lead
    direct_idx = rng.choice(p, size=target_spec.n_direct, replace=False) if target_spec.n_direct else []
    y = target_spec.mean + target_spec.factor_weight * f_lagged.sum(axis=1)
    for j in direct_idx:
        shifted = np.zeros(T)
        shifted[lead:] = stationary[: T - lead, j]
        y = y + target_spec.direct_coef * shifted
    y = y + target_spec.noise_sd * rng.standard_normal(T)

    codes = np.ones(p, dtype=int)
    if panel_spec.mixed_codes:
        codes = np.array([(1, 2, 5)[j % 3] for j in range(p)])
    raw = np.empty_like(stationary)
    for j in range(p):
        s = stationary[:, j]
        if codes[j] == 1:
            raw[:, j] = s
        elif codes[j] == 2:
            raw[:, j] = 50.0 + np.cumsum(s)
        else:
            raw[:, j] = 100.0 * np.exp(np.cumsum(s) / 100.0)

    ids = [f"X{j:03d}" for j in range(p)]
    dates = pd.date_range(pd.Timestamp(panel_spec.start + "-01"), periods=T, freq="MS")
    data = pd.DataFrame(raw, index=dates, columns=ids)
    data[TARGET_ID] = y
    metas = {
        sid: SeriesMeta(sid, f"synthetic predictor {j}", int(codes[j]),
                        "direct" if j in set(int(d) for d in direct_idx) else "synthetic")
        for j, sid in enumerate(ids)
    }
    metas[TARGET_ID] = SeriesMeta(TARGET_ID, "synthetic target", 1, "synthetic")
    return Panel(data, metas, TARGET_ID)
