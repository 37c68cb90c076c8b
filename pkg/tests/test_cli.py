import csv
import json

import numpy as np
import pytest

from retrofit_ml.cli import format_tree, main
from retrofit_ml.config import check_columns, load_config, parse_config
from retrofit_ml.dataset import FeatureMatrix, SplitIndices
from retrofit_ml.errors import ConfigError
from retrofit_ml.evaluation import metrics
from retrofit_ml.models import TreeParams, fit_tree, load_model, save_model


@pytest.fixture
def small_config(tmp_path, synthetic_config, synthetic_csv):
    cfg = json.loads(synthetic_config.read_text())
    cfg.update(
        input=str(synthetic_csv),
        targets=["Estimated Annual MMBtu Savings"],
        selectors=["forward"],
        models=["lasso"],
        output_dir=str(tmp_path / "out"),
    )
    cfg["selection"]["forward"]["max_features"] = 3
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def edit(path, **changes):
    cfg = json.loads(path.read_text())
    cfg.update(changes)
    path.write_text(json.dumps(cfg))
    return path


# ---------------------------------------------------------------- config

def test_bundled_configs_parse(synthetic_config):
    cfg = load_config(synthetic_config)
    check_columns(cfg)
    assert cfg.selectors == ["forward", "ga", "pso"] and cfg.models == ["lasso", "tree", "forest"]
    ny = load_config(synthetic_config.parent / "ny.json")
    assert ny.top_k == 10 and ny.split.ratios == (0.6, 0.2, 0.2) and len(ny.targets) == 3


def test_config_errors_carry_field_paths():
    with pytest.raises(ConfigError) as e:
        parse_config({"input": "x.csv", "targets": ["a"], "split": {"ratios": [0.5, 0.5, 0.5]},
                      "selection": {"pso": {"v_max": 0}}, "colour": 1})
    text = str(e.value)
    assert "split.ratios" in text and "selection.pso.v_max" in text and "colour" in text


def test_config_rejects_empty_lists():
    for field in ("targets", "models", "selectors"):
        with pytest.raises(ConfigError, match=field):
            parse_config({"input": "x.csv", "targets": ["a"], field: []})


def test_config_hash_tracks_every_field():
    base = {"input": "x.csv", "targets": ["a"]}
    h = parse_config(base).config_hash()
    assert parse_config(dict(base)).config_hash() == h
    assert parse_config({**base, "seed": 1}).config_hash() != h
    assert parse_config({**base, "tuning": {"ga": {"generations": 3}}}).config_hash() != h


def test_missing_columns_reported_before_work(small_config):
    cfg = load_config(edit(small_config, targets=["Nope"], explore={"grouped": [{"group": "G", "value": "V"}]}))
    with pytest.raises(ConfigError) as e:
        check_columns(cfg)
    assert "targets[0]" in str(e.value) and "explore.grouped[0].group" in str(e.value)


# ------------------------------------------------------------------- CLI

def test_missing_config_exit_code(capsys):
    assert main(["run", "--config", "missing.json"]) == 2
    assert "not found" in capsys.readouterr().err


def test_unknown_subcommand_prints_usage(capsys):
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code != 0 and "usage" in capsys.readouterr().err


def test_missing_column_exit_code(small_config):
    assert main(["prep", "-q", "--config", str(edit(small_config, targets=["Nope"]))]) == 2


def test_data_error_exit_code(tmp_path, small_config):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n3\n")
    cfg = edit(small_config, input=str(bad), targets=["b"], cleaning={}, transform={}, schema={}, explore={})
    assert main(["prep", "-q", "--config", str(cfg)]) == 3


def test_format_tree_two_leaves():
    X = np.array([[1.0], [2.0], [3.0], [4.0]])
    m = fit_tree(X, np.array([0.0, 0.0, 10.0, 10.0]), TreeParams())
    assert format_tree(m).splitlines() == [
        "x < 2.5 (n=4, mean=5)",
        "  yes -> leaf (n=2, mean=0)",
        "  no  -> leaf (n=2, mean=10)",
    ]


def test_inspect_tree_command(tmp_path, capsys):
    X = np.array([[1.0], [2.0], [3.0], [4.0]])
    save_model(fit_tree(X, np.array([0.0, 0.0, 10.0, 10.0]), TreeParams()), tmp_path / "m.json")
    assert main(["inspect-tree", "--model", str(tmp_path / "m.json")]) == 0
    assert capsys.readouterr().out.startswith("x < 2.5 (n=4, mean=5)\n")
    assert main(["inspect-tree", "--model", str(tmp_path / "none.json")]) == 2


def test_synth_command(tmp_path):
    assert main(["synth", "--out", str(tmp_path / "s.csv"), "--rows", "20", "--seed", "3"]) == 0
    assert len((tmp_path / "s.csv").read_text().splitlines()) == 21


def test_explore_command_artifacts(small_config, tmp_path):
    out = tmp_path / "ex"
    assert main(["explore", "-q", "--config", str(small_config), "--out", str(out)]) == 0
    names = {p.name for p in (out / "explore").iterdir()}
    assert {"summary.csv", "corr_matrix.csv"} <= names
    assert any(n.startswith("grouped_") for n in names) and any(n.startswith("scatter_") for n in names)
    with (out / "explore" / "grouped_customer_type_total_incentives.csv").open() as fh:
        groups = {r["Customer Type"]: float(r["mean Total Incentives"]) for r in csv.DictReader(fh)}
    assert set(groups) == {"Assisted", "Market"}


# -------------------------------------------------------------- pipeline

def test_single_cell_run_and_audit(small_config, tmp_path):
    out = tmp_path / "run"
    assert main(["run", "-q", "--config", str(small_config), "--out", str(out)]) == 0
    tdir = out / "estimated_annual_mmbtu_savings"
    with (tdir / "comparison.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1 and rows[0]["winner"] == "1"

    # the reported (rmse, k) follow from the saved model, prepared matrix and split
    model = load_model(tdir / "forward_lasso" / "model.json")
    fm = FeatureMatrix.from_csv(out / "prepared.csv", load_config(small_config).targets)
    s = SplitIndices.from_dict(json.loads((out / "split.json").read_text()))
    cols = [fm.feature_names.index(n) for n in model.feature_names]
    X = fm.X[np.ix_(s.validation, cols)]
    rmse = metrics(fm.target("Estimated Annual MMBtu Savings")[s.validation], model.predict(X)).rmse
    assert float(rows[0]["rmse"]) == rmse
    assert int(rows[0]["n_features"]) == len(model.feature_names)

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["complete"] and manifest["config_hash"] == load_config(small_config).config_hash()
    metrics_doc = json.loads((tdir / "forward_lasso" / "metrics.json").read_text())
    assert set(metrics_doc["reports"]) == {"train", "validation", "test"}
    assert len(metrics_doc["cv"]["folds"]) == 5


def test_stages_one_at_a_time_match_run(small_config, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "-q", "--config", str(small_config), "--out", str(a)]) == 0
    for stage in ("prep", "select", "tune", "train", "compare"):
        assert main([stage, "-q", "--config", str(small_config), "--out", str(b)]) == 0
    rel = "estimated_annual_mmbtu_savings/comparison.csv"
    assert (a / rel).read_bytes() == (b / rel).read_bytes()


def test_later_stage_needs_earlier_artifacts(small_config, tmp_path):
    assert main(["train", "-q", "--config", str(small_config), "--out", str(tmp_path / "empty")]) == 4


def test_failure_leaves_partial_manifest(small_config, tmp_path):
    out = tmp_path / "partial"
    cfg = edit(small_config, threshold=0.999)
    assert main(["run", "-q", "--config", str(cfg), "--out", str(out)]) == 3
    m = json.loads((out / "manifest.json").read_text())
    assert m["stages"]["prep"]["status"] == "done"
    assert m["stages"]["select"]["status"] == "failed"
    assert not m["complete"]


def test_seed_override_changes_results(small_config, tmp_path):
    cfg = edit(small_config, models=["forest"], selectors=["ga"],
               tuning={"grids": {"forest": {"n_trees": [5], "max_features_fraction": [0.5]}}})
    outs = []
    for seed in ("1", "2"):
        out = tmp_path / seed
        assert main(["run", "-q", "--config", str(cfg), "--out", str(out), "--seed", seed]) == 0
        outs.append(json.loads((out / "manifest.json").read_text()))
    assert outs[0]["seed"] == 1 and outs[0]["config_hash"] != outs[1]["config_hash"]
