import logging

import numpy as np
import pandas as pd
import pytest

from hdmacro.errors import ConfigError, CorruptStoreError, StoreError
from hdmacro.harness import (
    ExperimentConfig,
    ForecastRecord,
    ForecastRecordStore,
    enumerate_origins,
    evaluate,
    load_store,
    persist_store,
    run_cell,
    run_rolling,
    subsample_masks,
    with_levels,
    DEFAULT_SUBSAMPLES,
)
from hdmacro.mcmc import HsChainConfig
from hdmacro.panel import Panel
from hdmacro.synthetic import TargetSpec, generate_synthetic_panel

from conftest import make_panel

FAST = HsChainConfig(120, 60)


def small_config(panel, **kw):
    base = dict(
        first_eval_date=panel.dates[-6].strftime("%Y-%m"),
        horizons=(1, 3),
        min_window=36,
        mcmc=FAST,
        r_max=3,
        p_f_max=1,
        top_k=5,
    )
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.fixture(scope="module")
def synth():
    return generate_synthetic_panel(11, 70, 12, 2, TargetSpec(n_direct=2))


# origins


def test_origin_count_example():
    g = np.random.default_rng(0)
    p = make_panel({"A": g.standard_normal(60), "Y": g.standard_normal(60)})
    cfg = ExperimentConfig(first_eval_date=p.dates[36].strftime("%Y-%m"), horizons=(1,))
    origins = enumerate_origins(p, 1, cfg)
    assert len(origins) == 24
    assert p.dates[origins[0] + 1] == p.dates[36] and origins[-1] + 1 == 59


def test_h12_drops_eleven_origins():
    g = np.random.default_rng(1)
    p = make_panel({"A": g.standard_normal(90), "Y": g.standard_normal(90)})
    cfg = ExperimentConfig(first_eval_date=p.dates[0].strftime("%Y-%m"), horizons=(1, 12))
    o1, o12 = enumerate_origins(p, 1, cfg), enumerate_origins(p, 12, cfg)
    assert o1[0] == o12[0] and len(o1) - len(o12) == 11


def test_first_eval_beyond_panel():
    g = np.random.default_rng(2)
    p = make_panel({"A": g.standard_normal(50), "Y": g.standard_normal(50)})
    with pytest.raises(ConfigError):
        enumerate_origins(p, 1, ExperimentConfig(first_eval_date="2030-01"))


# config


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(first_eval_date="2010-01", models=("ar2", "bart"))
    with pytest.raises(ConfigError):
        ExperimentConfig(first_eval_date="2010-01", models=("hs",))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"first_eval_date": "2010-01", "colour": 1})
    cfg = ExperimentConfig(first_eval_date="2010-01", horizons=(3, 1, 3))
    assert cfg.horizons == (1, 3)
    again = ExperimentConfig.from_dict(cfg.to_dict())
    assert again == cfg and again.config_hash() == cfg.config_hash()


# rolling run


@pytest.fixture(scope="module")
def store(synth):
    return run_rolling(synth, small_config(synth))


def test_every_model_shares_evaluation_dates(store, synth):
    cfg = small_config(synth)
    for h in cfg.horizons:
        dates = {m: {r.target_date for r in store.records.values() if r.model == m and r.horizon == h} for m in cfg.models}
        assert len({frozenset(v) for v in dates.values()}) == 1
    assert not store.failures()
    sizes = {r.draws.size for r in store.records.values()}
    assert sizes == {FAST.n_keep}


def test_realized_is_transformed_target(store, synth):
    from hdmacro.panel import apply_transform

    y = apply_transform(synth.data[synth.target_id].to_numpy(), synth.metas[synth.target_id].transform_code)
    for r in store.records.values():
        assert r.realized == y[r.origin_index + r.horizon]


def test_no_look_ahead(store, synth):
    cfg = small_config(synth)
    rng = np.random.default_rng(3)
    for h in cfg.horizons:
        for t in enumerate_origins(synth, h, cfg)[::2]:
            data = synth.data.copy()
            noise = rng.standard_normal(data.iloc[t + 1:].shape)
            data.iloc[t + 1:] = np.abs(data.iloc[t + 1:].to_numpy()) * 3 + 1 + noise**2
            cell = run_cell(Panel(data, synth.metas, synth.target_id), cfg, h, t)
            for m in cfg.models:
                assert cell[m]["draws"].tobytes() == store.records[(m, h, t)].draws.tobytes()


def test_thread_count_does_not_change_store(store, synth):
    other = run_rolling(synth, small_config(synth), threads=2)
    assert other.content_hash() == store.content_hash()


def test_store_round_trip(store, synth, tmp_path):
    cfg = small_config(synth)
    a = persist_store(store, tmp_path / "a.zip")
    b = persist_store(store, tmp_path / "b.zip")
    assert a.read_bytes() == b.read_bytes()
    back = load_store(a, cfg)
    assert not back.hash_mismatch
    assert back.content_hash() == store.content_hash()
    for key, r in store.records.items():
        assert back.records[key].draws.tobytes() == r.draws.tobytes()
    pd.testing.assert_frame_equal(evaluate(back, cfg), evaluate(store, cfg))


def test_store_corrupt_and_mismatch(store, synth, tmp_path, caplog):
    path = persist_store(store, tmp_path / "s.zip")
    blob = path.read_bytes()
    (tmp_path / "t.zip").write_bytes(blob[: len(blob) // 2])
    with pytest.raises(CorruptStoreError):
        load_store(tmp_path / "t.zip")
    with caplog.at_level(logging.WARNING):
        back = load_store(path, small_config(synth, seed=1))
    assert back.hash_mismatch and "different config" in caplog.text


def test_evaluate_is_pure(store, synth):
    before = store.content_hash()
    evaluate(store, small_config(synth))
    assert store.content_hash() == before


# evaluation on hand-built stores


def hand_store(errors_by_model, realized=None, start="2018-06", h=1, S=4):
    n = len(next(iter(errors_by_model.values())))
    dates = pd.date_range(start + "-01", periods=n + h, freq="MS")
    realized = np.zeros(n) if realized is None else np.asarray(realized, dtype=float)
    recs = {}
    for m, errs in errors_by_model.items():
        for i, e in enumerate(errs):
            spread = np.linspace(-0.5, 0.5, S) * (1 + i % 3)
            recs[(m, h, i)] = ForecastRecord(m, h, i, dates[i], dates[i + h], realized[i], realized[i] - e + spread)
    return ForecastRecordStore(recs, {"config": {}})


def test_hand_rmse_cell():
    s = hand_store({"ar2": [1.0, 1.0], "hs": [3.0, -4.0]})
    tab = evaluate(s).set_index(["model", "subsample", "metric"])
    assert tab.loc[("hs", "full", "RMSE"), "level"] == pytest.approx(3.5355, abs=1e-4)
    assert tab.loc[("hs", "full", "MAE"), "level"] == 3.5


def test_identical_models_zero_skill_and_flag():
    errs = list(np.random.default_rng(4).standard_normal(12))
    tab = evaluate(hand_store({"ar2": errs, "hs": errs}))
    hs = tab[(tab.model == "hs") & (tab.subsample == "full")]
    assert np.allclose(hs.relative_skill, 0.0)
    assert (hs.flag == "dm_ZeroVarianceError").all()


def test_subsample_partition():
    dates = pd.date_range("2015-01-01", "2024-12-01", freq="MS")
    masks = subsample_masks(dates, DEFAULT_SUBSAMPLES)
    parts = np.vstack([masks[n] for n, *_ in DEFAULT_SUBSAMPLES])
    assert (parts.sum(0) == 1).all()


def test_empty_subsample_flagged():
    s = hand_store({"ar2": [1.0, -1.0, 0.5], "hs": [0.5, 0.2, -0.1]}, start="2010-01")
    tab = evaluate(s)
    cov = tab[tab.subsample == "2020_2021"]
    assert (cov.flag == "empty").all() and cov.level.isna().all()


def test_missing_baseline():
    with pytest.raises(StoreError):
        evaluate(hand_store({"hs": [1.0, 2.0]}))


def test_with_levels_rebuilds_skill():
    lv = pd.DataFrame(
        {"model": ["ar2", "favar"], "horizon": [1, 1], "subsample": ["full"] * 2, "metric": ["RMSE"] * 2,
         "level": [2.030, 0.709]}
    )
    assert with_levels(lv).relative_skill.iloc[1] == pytest.approx(0.651, abs=5e-4)


@pytest.mark.slow
def test_favar_beats_ar_on_factor_panel():
    wins = 0
    for seed in range(10):
        p = generate_synthetic_panel(seed, 200, 60, 3)
        cfg = ExperimentConfig(
            first_eval_date=p.dates[-60].strftime("%Y-%m"), horizons=(1,), models=("ar2", "favar"), mcmc=FAST
        )
        tab = evaluate(run_rolling(p, cfg), cfg).set_index(["model", "subsample", "metric"])
        wins += tab.loc[("favar", "full", "RMSE"), "relative_skill"] > 0
    assert wins > 5
