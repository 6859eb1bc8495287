"""End-to-end runs of every subcommand, in-process, against tiny seasons."""

import json

import numpy as np
import pytest

from shadecount.cli import main


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """synth + ingest once; the CLI tests below all read these artifacts."""
    root = tmp_path_factory.mktemp("cli")
    raw = root / "raw.csv"
    assert main(["synth", "--out", str(raw), "--days", "10", "--seed", "5"]) == 0
    feat_dir = root / "ingested"
    assert main(["ingest", str(raw), "--out-dir", str(feat_dir)]) == 0
    return {
        "root": root,
        "raw": raw,
        "features": feat_dir / "features.csv",
        "exclusions": feat_dir / "exclusions.json",
    }


# ------------------------------------------------------------------ synth


def test_synth_writes_expected_rows(tmp_path, capsys):
    out = tmp_path / "raw.csv"
    assert main(["synth", "--out", str(out), "--days", "2", "--seed", "1"]) == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0].startswith("# meta ")
    meta = json.loads(lines[0][len("# meta "):])
    assert meta["seed"] == 1 and "config_hash" in meta and "tool_version" in meta
    assert lines[1] == "timestamp,temperature_c,relative_humidity_pct,cow_count"
    assert len(lines) == 2 + 2 * 24 * 8
    assert "wrote" in capsys.readouterr().out


def test_synth_reruns_are_byte_identical(tmp_path):
    a, b, c = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
    main(["synth", "--out", str(a), "--days", "2", "--seed", "3"])
    main(["synth", "--out", str(b), "--days", "2", "--seed", "3"])
    main(["synth", "--out", str(c), "--days", "2", "--seed", "4"])
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()


# ----------------------------------------------------------------- ingest


def test_ingest_artifacts(workspace):
    lines = workspace["features"].read_text().strip().split("\n")
    assert lines[0].startswith("# meta ")
    assert lines[1] == "date,time_hours,thi_current,thi_night_prev,thi_accum,cow_count"
    assert len(lines) == 2 + 10 * 112  # synthetic rows are never rejected

    report = json.loads(workspace["exclusions"].read_text())
    assert report["rejected_rows"] == []
    assert report["dropped_days"] == []
    assert report["n_accepted_rows"] == report["n_rows"]


def test_ingest_missing_file_exits_2(tmp_path, capsys):
    assert main(["ingest", str(tmp_path / "nope.csv"), "--out-dir", str(tmp_path)]) == 2
    assert "data error" in capsys.readouterr().err


def test_ingest_garbage_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text(
        "timestamp,temperature_c,relative_humidity_pct,cow_count\n"
        + "\n".join("junk,x,y,z" for _ in range(20))
        + "\n",
        encoding="utf-8",
    )
    assert main(["ingest", str(bad), "--out-dir", str(tmp_path / "out")]) == 2
    assert "data error" in capsys.readouterr().err


# --------------------------------------------------------------------- cv


def _run_cv(workspace, out_name, *flags):
    out_dir = workspace["root"] / out_name
    code = main(
        ["cv", str(workspace["features"]), "--out-dir", str(out_dir), "--jobs", "1"]
        + list(flags)
    )
    return code, out_dir


def test_cv_tree_report(workspace, capsys):
    code, out_dir = _run_cv(workspace, "cv_tree", "--model", "tree", "--seed", "5")
    assert code == 0
    doc = json.loads((out_dir / "report.json").read_text())
    assert doc["model"] == "tree"
    assert len(doc["per_fold"]) == 5
    assert doc["overall"] == pytest.approx(float(np.mean(doc["per_fold"])))
    assert set(doc["quartiles"]) == {"q1", "median", "q3"}
    assert len(doc["per_day"]) == 10
    assert doc["meta"]["seed"] == 5

    per_day = (out_dir / "per_day.csv").read_text().strip().split("\n")
    assert per_day[1] == "date,rmse"
    assert len(per_day) == 12  # meta + header + 10 days
    assert "overall RMSE" in capsys.readouterr().out


def test_cv_rerun_is_byte_identical(workspace):
    _, d1 = _run_cv(workspace, "cv_rep1", "--model", "tree", "--seed", "9")
    _, d2 = _run_cv(workspace, "cv_rep2", "--model", "tree", "--seed", "9")
    assert (d1 / "report.json").read_bytes() == (d2 / "report.json").read_bytes()
    assert (d1 / "per_day.csv").read_bytes() == (d2 / "per_day.csv").read_bytes()


def test_cv_degenerate_forest_equals_tree(workspace):
    _, tree_dir = _run_cv(workspace, "cv_eq_tree", "--model", "tree", "--depth", "5")
    _, forest_dir = _run_cv(
        workspace,
        "cv_eq_forest",
        "--model", "forest",
        "--trees", "1",
        "--no-bootstrap",
        "--features-per-tree", "4",
        "--depth", "5",
    )
    t = json.loads((tree_dir / "report.json").read_text())
    f = json.loads((forest_dir / "report.json").read_text())
    assert f["per_fold"] == t["per_fold"]
    assert f["overall"] == t["overall"]
    assert f["per_day"] == t["per_day"]


def test_cv_nn_runs(workspace):
    code, out_dir = _run_cv(
        workspace, "cv_nn", "--model", "nn", "--epochs", "2", "--width", "8"
    )
    assert code == 0
    doc = json.loads((out_dir / "report.json").read_text())
    assert doc["model"] == "nn"
    assert doc["config"]["epochs"] == 2


def test_cv_divergence_exits_4(workspace, capsys):
    code, _ = _run_cv(
        workspace,
        "cv_diverge",
        "--model", "nn",
        "--optimizer", "sgd",
        "--lr", "1000",
        "--epochs", "10",
    )
    assert code == 4
    assert "divergence" in capsys.readouterr().err


def test_cv_config_file_and_flag_precedence(workspace):
    cfg_path = workspace["root"] / "cfg.json"
    cfg_path.write_text(json.dumps({"depth": 2}), encoding="utf-8")
    _, d1 = _run_cv(workspace, "cv_cfg1", "--model", "tree", "--config", str(cfg_path))
    assert json.loads((d1 / "report.json").read_text())["config"]["max_depth"] == 2
    _, d2 = _run_cv(
        workspace, "cv_cfg2",
        "--model", "tree", "--config", str(cfg_path), "--depth", "3",
    )
    assert json.loads((d2 / "report.json").read_text())["config"]["max_depth"] == 3


# ------------------------------------------------------------------ sweep


def test_sweep_tree_table(workspace):
    out = workspace["root"] / "sweep_tree.csv"
    code = main([
        "sweep", str(workspace["features"]), "--model", "tree",
        "--depths", "1,2", "--out", str(out), "--jobs", "1",
    ])
    assert code == 0
    lines = out.read_text().strip().split("\n")
    assert lines[1] == "depth,rmse_mean,rmse_std"
    assert len(lines) == 4
    assert lines[2].startswith("1,") and lines[3].startswith("2,")


def test_sweep_forest_table_records_operating_point(workspace):
    out = workspace["root"] / "sweep_forest.csv"
    code = main([
        "sweep", str(workspace["features"]), "--model", "forest",
        "--depths", "3,5", "--tree-counts", "1,10",
        "--out", str(out), "--jobs", "1",
    ])
    assert code == 0
    lines = out.read_text().strip().split("\n")
    meta = json.loads(lines[0][len("# meta "):])
    assert meta["operating_point"] == {"depth": 5, "n_trees": 10}
    assert meta["operating_point_in_grid"] is True
    assert lines[1] == "depth,n_trees,rmse_mean,rmse_std"
    assert len(lines) == 6


def test_sweep_nn_table_has_param_count(workspace):
    out = workspace["root"] / "sweep_nn.csv"
    code = main([
        "sweep", str(workspace["features"]), "--model", "nn",
        "--lrs", "0.001", "--widths", "8", "--hidden-layer-counts", "1",
        "--epochs", "1", "--out", str(out), "--jobs", "1",
    ])
    assert code == 0
    lines = out.read_text().strip().split("\n")
    assert lines[1] == "learning_rate,width,hidden_layers,param_count,rmse_mean,rmse_std"
    fields = lines[2].split(",")
    assert fields[:4] == ["0.001", "8", "1", "49"]  # (4+1)*8 + (8+1)


def test_sweep_empty_grid_exits_64(workspace, capsys):
    out = workspace["root"] / "sweep_bad.csv"
    code = main([
        "sweep", str(workspace["features"]), "--model", "tree", "--out", str(out),
    ])
    assert code == 64
    assert "error" in capsys.readouterr().err
    assert not out.exists()


# ------------------------------------------------------------ train + trace


def test_train_tree_then_trace(workspace, capsys):
    model = workspace["root"] / "tree.json"
    assert main([
        "train", str(workspace["features"]), "--model", "tree",
        "--out", str(model), "--depth", "4",
    ]) == 0
    doc = json.loads(model.read_text())
    assert doc["format"] == "tree"
    assert doc["config"]["max_depth"] == 4
    assert doc["feature_names"] == [
        "time_hours", "thi_current", "thi_night_prev", "thi_accum",
    ]
    assert "threshold" in doc["root"]

    trace_out = workspace["root"] / "trace.csv"
    assert main([
        "trace", str(workspace["features"]), "--model-file", str(model),
        "--date", "2024-06-03", "--out", str(trace_out),
    ]) == 0
    lines = trace_out.read_text().strip().split("\n")
    assert lines[1] == "time_hours,actual,predicted,thi_current,thi_accum,thi_night_prev"
    assert len(lines) == 2 + 112
    assert "112 trace rows" in capsys.readouterr().out


def test_trace_unknown_date_exits_3(workspace, capsys):
    model = workspace["root"] / "tree.json"  # written by the previous test
    if not model.exists():
        main(["train", str(workspace["features"]), "--model", "tree",
              "--out", str(model)])
    code = main([
        "trace", str(workspace["features"]), "--model-file", str(model),
        "--date", "1999-01-01", "--out", str(workspace["root"] / "t.csv"),
    ])
    assert code == 3
    assert "lookup error" in capsys.readouterr().err


def test_train_forest_then_trace(workspace):
    model = workspace["root"] / "forest.json"
    assert main([
        "train", str(workspace["features"]), "--model", "forest",
        "--out", str(model), "--trees", "3",
    ]) == 0
    doc = json.loads(model.read_text())
    assert doc["format"] == "forest"
    assert len(doc["trees"]) == 3
    assert all(len(t["feature_subset"]) == 3 for t in doc["trees"])

    out = workspace["root"] / "forest_trace.csv"
    assert main([
        "trace", str(workspace["features"]), "--model-file", str(model),
        "--date", "2024-06-05", "--out", str(out),
    ]) == 0
    assert len(out.read_text().strip().split("\n")) == 114


def test_train_nn_with_trace_out(workspace):
    model = workspace["root"] / "nn.json"
    trace = workspace["root"] / "nn_trace.csv"
    assert main([
        "train", str(workspace["features"]), "--model", "nn",
        "--epochs", "2", "--out", str(model), "--trace-out", str(trace),
    ]) == 0
    doc = json.loads(model.read_text())
    assert doc["format"] == "nn"
    lines = trace.read_text().strip().split("\n")
    assert lines[1] == "epoch,train_rmse,val_rmse"
    assert len(lines) == 2 + 3  # meta + header + epochs 0..2

    out = workspace["root"] / "nn_day.csv"
    assert main([
        "trace", str(workspace["features"]), "--model-file", str(model),
        "--date", "2024-06-05", "--out", str(out),
    ]) == 0


def test_model_predictions_survive_save_load(workspace):
    # the saved tree must route exactly like the in-memory one
    from shadecount.cli import _load_model_predictor
    from shadecount.features import read_feature_csv, to_matrix
    from shadecount.tree import TreeConfig, fit_tree, predict_matrix

    examples = read_feature_csv(workspace["features"])
    X, y, _ = to_matrix(examples)
    model = workspace["root"] / "roundtrip.json"
    main([
        "train", str(workspace["features"]), "--model", "tree",
        "--out", str(model), "--depth", "5",
    ])
    loaded = _load_model_predictor(str(model))
    direct = predict_matrix(fit_tree(X, y, TreeConfig(max_depth=5)), X)
    assert np.array_equal(loaded(X), direct)


def test_unrecognized_model_file_exits_2(workspace, capsys):
    bogus = workspace["root"] / "bogus.json"
    bogus.write_text('{"format": "linear"}', encoding="utf-8")
    code = main([
        "trace", str(workspace["features"]), "--model-file", str(bogus),
        "--date", "2024-06-03", "--out", str(workspace["root"] / "x.csv"),
    ])
    assert code == 2
    assert "data error" in capsys.readouterr().err


# ---------------------------------------------------------------- compare


def test_compare_writes_three_row_table(workspace, capsys):
    out_dir = workspace["root"] / "cmp"
    code = main([
        "compare", str(workspace["features"]), "--out-dir", str(out_dir),
        "--epochs", "1", "--jobs", "1",
    ])
    assert code == 0
    lines = (out_dir / "comparison.csv").read_text().strip().split("\n")
    assert lines[1] == "model,rmse,interpretability,explainability"
    body = lines[2:]
    assert [r.split(",")[0] for r in body] == [
        "decision_tree", "random_forest", "neural_network",
    ]
    assert body[0].endswith("Very High,High")
    assert body[1].endswith("Medium/High,Medium")
    assert body[2].endswith("Low,Low")
    text = (out_dir / "comparison.txt").read_text()
    assert "decision_tree" in text
    assert "decision_tree" in capsys.readouterr().out


# ------------------------------------------------------------------- usage


def test_bad_flags_exit_64_via_argparse():
    with pytest.raises(SystemExit) as exc:
        main(["cv", "features.csv", "--model", "linear", "--out-dir", "x"])
    assert exc.value.code == 64
    with pytest.raises(SystemExit) as exc:
        main(["not-a-command"])
    assert exc.value.code == 64
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 64
