import numpy as np
import pandas as pd
import pytest

from hdmacro.panel import Panel, SeriesMeta


def make_panel(values: dict, codes: dict | None = None, target="Y", start="2000-01"):
    """Panel from a column -> values mapping; codes default to 1 (levels)."""
    n = len(next(iter(values.values())))
    dates = pd.date_range(pd.Timestamp(start + "-01"), periods=n, freq="MS")
    data = pd.DataFrame({k: np.asarray(v, dtype=float) for k, v in values.items()}, index=dates)
    codes = codes or {}
    metas = {c: SeriesMeta(c, c, codes.get(c, 1), "test") for c in data.columns}
    return Panel(data, metas, target)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_panel():
    g = np.random.default_rng(3)
    T = 60
    f = np.cumsum(g.standard_normal(T)) * 0.1
    cols = {f"X{j}": f * (j + 1) + g.standard_normal(T) for j in range(4)}
    cols["Y"] = 0.5 * f + g.standard_normal(T)
    return make_panel(cols)
