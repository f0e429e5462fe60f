import hashlib
import json

import numpy as np
import pandas as pd
import pytest
import yaml

from hdmacro.cli import EXIT_CONFIG, EXIT_DATA, EXIT_IO, main
from hdmacro.harness import load_store


def write_config(path, **sections):
    path.write_text(yaml.safe_dump(sections, sort_keys=False))
    return path


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def smoke(tmp_path_factory):
    d = tmp_path_factory.mktemp("smoke")
    cfg = write_config(
        d / "config.yaml",
        version=1,
        paths={"panel": "data/panel.csv", "catalog": "data/catalog.csv", "out": "out"},
        target_id="TARGET",
        threads=1,
        verbosity="warning",
        synth={"seed": 5, "T": 120, "p": 40, "r_true": 3, "target": {"n_direct": 3}},
        experiment={
            "first_eval_date": "2008-01",
            "horizons": [1, 3],
            "mcmc": {"n_iter": 500, "burn_in": 250},
            "r_max": 4,
            "top_k": 10,
        },
    )
    assert main(["synth", "--config", str(cfg)]) == 0
    assert main(["run", "--config", str(cfg)]) == 0
    return d, cfg


def test_smoke_store_loadable(smoke):
    d, _ = smoke
    store = load_store(d / "out" / "store.zip")
    assert store.horizons() == [1, 3]
    assert set(store.models()) == {"ar2", "hs", "faar", "favar", "dfm"}
    man = json.loads((d / "out" / "run_manifest.json").read_text())
    assert man["inputs"]["panel"]["sha256"] == sha(d / "data" / "panel.csv")
    assert man["store"]["sha256"] == sha(d / "out" / "store.zip")
    assert man["experiment"]["mcmc"]["n_iter"] == 500


def test_rerun_identical_store(smoke, tmp_path):
    d, cfg = smoke
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path), "--threads", "2"]) == 0
    assert sha(tmp_path / "store.zip") == sha(d / "out" / "store.zip")


def test_report_and_diagnose(smoke, capsys):
    d, cfg = smoke
    assert main(["report", "--config", str(cfg)]) == 0
    scores = pd.read_csv(d / "out" / "scores.csv")
    full = scores[(scores.subsample == "full")]
    for (h, metric), grp in full.groupby(["horizon", "metric"]):
        if metric == "LOGSCORE":
            continue
        base = grp.loc[grp.model == "ar2", "level"].iloc[0]
        np.testing.assert_allclose(grp.relative_skill, 1 - grp.level / base, atol=1e-12)
    ranked = pd.read_csv(d / "out" / "report_RMSE.csv")
    assert "rank" in ranked.columns
    assert main(["diagnose", "--config", str(cfg)]) == 0
    for h in (1, 3):
        bars = pd.read_csv(d / "out" / f"drivers_h{h}_bars.csv")
        assert bars["count"].max() <= len(load_store(d / "out" / "store.zip").origins(h, "hs"))


def test_report_from_levels(tmp_path):
    lv = tmp_path / "levels.csv"
    pd.DataFrame(
        {"model": ["ar2", "favar"], "horizon": [1, 1], "subsample": ["full", "full"], "metric": ["RMSE", "RMSE"],
         "level": [2.030, 0.709]}
    ).to_csv(lv, index=False)
    assert main(["report", "--levels", str(lv), "--out", str(tmp_path / "o")]) == 0
    out = pd.read_csv(tmp_path / "o" / "scores.csv").set_index("model")
    assert out.loc["favar", "relative_skill"] == pytest.approx(0.651, abs=5e-4)


def test_unknown_model_tag_is_config_error(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.yaml", experiment={"first_eval_date": "2010-01", "models": ["ar2", "bart"]})
    assert main(["run", "--config", str(cfg)]) == EXIT_CONFIG
    assert "bart" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def _three_series(tmp_path, values, codes):
    cat = tmp_path / "catalog.csv"
    pd.DataFrame({"id": list(codes), "name": list(codes), "transform_code": list(codes.values()),
                  "source_tag": "t"}).to_csv(cat, index=False)
    panel = tmp_path / "panel.csv"
    df = pd.DataFrame(values, index=pd.date_range("2000-01-01", periods=len(next(iter(values.values()))), freq="MS"))
    df.index = df.index.strftime("%Y-%m")
    df.index.name = "date"
    df.to_csv(panel)
    return write_config(tmp_path / "c.yaml", paths={"panel": "panel.csv", "catalog": "catalog.csv", "out": "out"},
                        target_id="Y")


def test_transform_outputs(tmp_path):
    n = 24
    g = np.random.default_rng(0)
    cfg = _three_series(tmp_path, {"A": 100 + g.random(n), "B": 50 + np.cumsum(g.random(n)), "Y": g.random(n)},
                        {"A": 5, "B": 6, "Y": 1})
    assert main(["transform", "--config", str(cfg)]) == 0
    out = pd.read_csv(tmp_path / "out" / "transformed.csv", index_col=0)
    assert list(out.columns) == ["A", "B", "Y"]
    assert out["A"].isna().sum() == 1 and out["B"].isna().sum() == 2 and out["Y"].isna().sum() == 0
    rep = pd.read_csv(tmp_path / "out" / "transform_report.csv")
    assert list(rep.rows_lost) == [1, 2, 0]


def test_transform_log_of_zero_is_data_error(tmp_path, capsys):
    cfg = _three_series(tmp_path, {"A": [1.0, 0.0, 2.0, 3.0], "Y": [1.0, 2.0, 3.0, 4.0]}, {"A": 5, "Y": 1})
    assert main(["transform", "--config", str(cfg)]) == EXIT_DATA
    assert "A" in capsys.readouterr().err


def test_transform_idempotent_on_code1(tmp_path):
    g = np.random.default_rng(1)
    cfg = _three_series(tmp_path, {"A": g.standard_normal(12), "Y": g.standard_normal(12)}, {"A": 1, "Y": 1})
    assert main(["transform", "--config", str(cfg)]) == 0
    a = pd.read_csv(tmp_path / "panel.csv", index_col=0)
    b = pd.read_csv(tmp_path / "out" / "transformed.csv", index_col=0)
    pd.testing.assert_frame_equal(a, b)


def test_diagnose_without_horseshoe(tmp_path, capsys, monkeypatch):
    cfg = write_config(
        tmp_path / "c.yaml",
        paths={"out": "out"},
        synth={"seed": 1, "T": 80, "p": 10, "r_true": 2, "target": {"n_direct": 2}},
        experiment={"first_eval_date": "2006-01", "horizons": [1], "models": ["ar2", "favar"]},
    )
    monkeypatch.setenv("HDMACRO_CONFIG", str(cfg))
    assert main(["synth"]) == 0
    cfg2 = write_config(
        tmp_path / "c2.yaml",
        paths={"panel": "out/panel.csv", "catalog": "out/catalog.csv", "out": "out"},
        experiment={"first_eval_date": "2006-01", "horizons": [1], "models": ["ar2", "favar"]},
    )
    monkeypatch.setenv("HDMACRO_CONFIG", str(cfg2))
    assert main(["run"]) == 0
    assert main(["diagnose"]) == EXIT_IO
    assert "horseshoe" in capsys.readouterr().err


def test_missing_config_is_config_error(monkeypatch):
    monkeypatch.delenv("HDMACRO_CONFIG", raising=False)
    assert main(["run"]) == EXIT_CONFIG
