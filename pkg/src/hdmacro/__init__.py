"""Horseshoe, factor and AR forecasts for high-dimensional macro panels,
evaluated on an expanding window with proper scoring rules."""

from .errors import (
    ConfigError,
    CorruptStoreError,
    DataError,
    HdMacroError,
    NumericalError,
    StoreError,
)
from .harness import (
    ExperimentConfig,
    ForecastRecordStore,
    enumerate_origins,
    evaluate,
    load_store,
    persist_store,
    run_rolling,
)
from .mcmc import HsChainConfig, RngStream, fast_beta_draw, run_hs_chain
from .panel import Panel, SeriesMeta, build_design, load_catalog_csv, load_panel_csv
from .synthetic import generate_synthetic_panel

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "CorruptStoreError",
    "DataError",
    "HdMacroError",
    "NumericalError",
    "StoreError",
    "ExperimentConfig",
    "ForecastRecordStore",
    "enumerate_origins",
    "evaluate",
    "load_store",
    "persist_store",
    "run_rolling",
    "HsChainConfig",
    "RngStream",
    "fast_beta_draw",
    "run_hs_chain",
    "Panel",
    "SeriesMeta",
    "build_design",
    "load_catalog_csv",
    "load_panel_csv",
    "generate_synthetic_panel",
    "__version__",
]
