"""Experiment harness: config files, prediction files, reports, and the CLI."""

from __future__ import annotations

import json

import numpy as np
import pytest

from crowdgroups import (
    ConfigError,
    CrowdGroupsError,
    Model,
    Partition,
    RunConfig,
    SynthSpec,
    evaluate_predictions,
    load_dataset,
    load_run_config,
    run_experiment,
    synth_generate,
    write_dataset,
)
from crowdgroups.cli import main
from crowdgroups.harness import (
    format_config_text,
    parse_config_text,
    predict_windows,
    prediction_entry,
    read_config_file,
    read_predictions,
    write_config_file,
    write_predictions,
)


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    """Small labeled dataset shared by the harness and CLI tests."""
    spec = SynthSpec(
        n_groups=2, group_size_min=2, group_size_max=2, n_singletons=2,
        extent=24.0, duration=48.0, fps=2.5,
    )
    path = tmp_path_factory.mktemp("data") / "scene"
    trajs, labels = synth_generate(spec, seed=9)
    write_dataset(path, trajs, labels, fps=spec.fps, seed=9)
    return path


FAST = dict(window_len=8.0, stride=8.0, training_span=24.0, runs=2,
            max_iterations=60, seed=0)


# ---------------------------------------------------------------------------
# Flat TOML subset


def test_config_text_round_trip():
    values = {
        "window_len": 12.5,
        "runs": 3,
        "early_stop": True,
        "loss": "gmitre",
        "proxemic_sigmas": [0.5, 1.2, 3.7, 7.6],
    }
    back = parse_config_text(format_config_text(values))
    assert back == values


def test_config_file_round_trip(tmp_path):
    path = tmp_path / "config.toml"
    values = {"stride": 5.0, "mode": "batch", "early_stop": False}
    write_config_file(path, values)
    assert read_config_file(path) == values


def test_parse_config_scalars_and_comments():
    text = """
# full-line comment
window_len = 10.0   # trailing comment
loss = "gmitre # not a comment"
runs = 4
early_stop = true
sigmas = [1.0, 2.5]
label = 'single'
"""
    values = parse_config_text(text)
    assert values["window_len"] == 10.0
    assert values["loss"] == "gmitre # not a comment"
    assert values["runs"] == 4
    assert values["early_stop"] is True
    assert values["sigmas"] == [1.0, 2.5]
    assert values["label"] == "single"


def test_parse_config_escapes():
    values = parse_config_text('s = "a\\"b\\n\\t\\\\c"')
    assert values["s"] == 'a"b\n\t\\c'


@pytest.mark.parametrize(
    "text",
    [
        "[section]\nkey = 1",
        "key = 1\nkey = 2",
        "just some words",
        "bad key! = 1",
        's = "unterminated',
        "a = [1, [2]]",
        "x = ",
    ],
)
def test_parse_config_rejects(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_format_scalar_types():
    text = format_config_text({"a": True, "b": 2, "c": 0.5, "d": "s", "e": [1, 2]})
    lines = dict(line.split(" = ", 1) for line in text.strip().splitlines())
    assert lines["a"] == "true"
    assert lines["b"] == "2"
    assert lines["c"] == "0.5"
    assert lines["d"] == '"s"'
    assert lines["e"] == "[1, 2]"


# ---------------------------------------------------------------------------
# RunConfig


def test_run_config_validation():
    with pytest.raises(ConfigError):
        RunConfig(window_len=0.0)
    with pytest.raises(ConfigError):
        RunConfig(runs=0)
    with pytest.raises(ConfigError):
        RunConfig(mode="offline")
    with pytest.raises(ConfigError):
        RunConfig(loss="accuracy")
    with pytest.raises(ConfigError):
        RunConfig(granger_lag=0)
    with pytest.raises(ConfigError):
        RunConfig(heat_accumulate="sum")


def test_run_config_from_dict_unknown_key():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"window_length": 10.0})


def test_run_config_flat_dict_lists_tuples():
    flat = RunConfig().to_flat_dict()
    assert flat["proxemic_sigmas"] == [0.5, 1.2, 3.7, 7.6]
    assert RunConfig.from_dict(flat) == RunConfig()


def test_load_run_config_precedence(tmp_path):
    path = tmp_path / "config.toml"
    write_config_file(path, {"window_len": 4.0, "runs": 7})
    config = load_run_config(path, {"runs": 2, "stride": None})
    assert config.window_len == 4.0  # from file
    assert config.runs == 2  # override wins
    assert config.stride == 10.0  # None override ignored, default kept


# ---------------------------------------------------------------------------
# Prediction files and scoring


def test_predictions_round_trip(tmp_path):
    path = tmp_path / "predictions.json"
    p = Partition([[1, 2], [3]])
    entries = [prediction_entry(0, 0.0, 10.0, p)]
    write_predictions(path, 5, entries)
    seed, windows = read_predictions(path)
    assert seed == 5
    assert len(windows) == 1
    assert Partition.from_json_obj(windows[0]) == p
    assert windows[0]["start_t"] == 0.0
    assert windows[0]["end_t"] == 10.0


def test_read_predictions_rejects_garbage(tmp_path):
    path = tmp_path / "predictions.json"
    path.write_text("[1, 2]")
    with pytest.raises(CrowdGroupsError):
        read_predictions(path)
    path.write_text("{}")
    with pytest.raises(CrowdGroupsError):
        read_predictions(path)


def test_evaluate_predictions_perfect(tmp_path):
    truth_path = tmp_path / "groups.txt"
    truth_path.write_text("1 2\n")
    pred_path = tmp_path / "predictions.json"
    p = Partition([[1, 2], [3]])
    write_predictions(pred_path, 0, [prediction_entry(0, 0.0, 10.0, p)])
    text = evaluate_predictions(truth_path, pred_path)
    lines = text.strip().splitlines()
    assert lines[0] == "window,metric,precision,recall,f1"
    body = [line.split(",") for line in lines[1:]]
    window_rows = [r for r in body if r[0] == "0"]
    mean_rows = [r for r in body if r[0] == "mean"]
    assert {r[1] for r in window_rows} == {"gmitre", "pairwise_positive"}
    assert {r[1] for r in mean_rows} == {"gmitre", "pairwise_positive"}
    for r in window_rows + mean_rows:
        assert float(r[2]) == 1.0 and float(r[3]) == 1.0 and float(r[4]) == 1.0


def test_evaluate_predictions_writes_out(tmp_path):
    truth_path = tmp_path / "groups.txt"
    truth_path.write_text("1 2\n")
    pred_path = tmp_path / "predictions.json"
    write_predictions(
        pred_path, 0, [prediction_entry(0, 0.0, 5.0, Partition([[1], [2]]))]
    )
    out_path = tmp_path / "scores.csv"
    text = evaluate_predictions(truth_path, pred_path, out_path)
    assert out_path.read_text() == text
    # missed pair: recall 0 for the truth edge
    gmitre_row = [r for r in text.splitlines() if r.startswith("0,gmitre")][0]
    assert float(gmitre_row.split(",")[3]) < 1.0


# ---------------------------------------------------------------------------
# Experiment runner


def test_run_experiment_outputs(dataset_dir, tmp_path):
    out = tmp_path / "report"
    config = RunConfig(**FAST)
    result = run_experiment(config, dataset_dir, out)

    assert (out / "data_quality.csv").is_file()
    assert (out / "scene_stats.csv").is_file()
    assert (out / "summary.csv").is_file()
    assert (out / "meta.json").is_file()
    for seed in (0, 1):
        rundir = out / f"run-{seed}"
        for name in (
            "config.resolved.toml",
            "train_log.csv",
            "model.json",
            "predictions.json",
            "per_window.csv",
            "metrics.csv",
            "weights.csv",
        ):
            assert (rundir / name).is_file(), name

    # summary dict matches the CSV
    summary_lines = (out / "summary.csv").read_text().strip().splitlines()
    assert summary_lines[0] == "metric,field,mean,std"
    assert len(summary_lines) == 1 + 2 * 3
    assert set(result["summary"]) == {"gmitre", "pairwise_positive"}
    for fields in result["summary"].values():
        for stats in fields.values():
            assert 0.0 <= stats["mean"] <= 1.0
            assert stats["std"] >= 0.0

    # weights report: four feature rows plus the constant row
    wl = (out / "run-0" / "weights.csv").read_text().strip().splitlines()
    assert wl[0] == "term,alpha,beta,coefficient,share"
    assert [row.split(",")[0] for row in wl[1:]] == [
        "d_ph", "d_sh", "d_ca", "d_he", "constant",
    ]
    shares = [float(row.split(",")[4]) for row in wl[1:5]]
    assert sum(shares) == pytest.approx(1.0, abs=1e-9)

    # meta.json carries the config echo and per-run facts
    meta = json.loads((out / "meta.json").read_text())
    assert meta["config"]["window_len"] == FAST["window_len"]
    assert [r["seed"] for r in meta["runs"]] == [0, 1]
    assert "created_utc" in meta

    # resolved config echoes the per-run seed and loads as a RunConfig
    resolved = read_config_file(out / "run-1" / "config.resolved.toml")
    assert resolved["seed"] == 1
    assert RunConfig.from_dict(resolved).window_len == FAST["window_len"]


def test_run_experiment_deterministic(dataset_dir, tmp_path):
    config = RunConfig(**FAST)
    run_experiment(config, dataset_dir, tmp_path / "a")
    run_experiment(config, dataset_dir, tmp_path / "b")
    for name in ("summary.csv", "data_quality.csv", "scene_stats.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    for seed in (0, 1):
        for name in ("model.json", "predictions.json", "per_window.csv",
                     "metrics.csv", "weights.csv", "train_log.csv"):
            a = (tmp_path / "a" / f"run-{seed}" / name).read_bytes()
            b = (tmp_path / "b" / f"run-{seed}" / name).read_bytes()
            assert a == b, name


def test_run_experiment_predictions_replayable(dataset_dir, tmp_path):
    out = tmp_path / "report"
    config = RunConfig(**FAST)
    run_experiment(config, dataset_dir, out)
    model = Model.load(out / "run-0" / "model.json")
    dataset = load_dataset(dataset_dir)
    replayed = predict_windows(dataset, model)
    _, recorded = read_predictions(out / "run-0" / "predictions.json")
    # the run predicts only the windows beyond the training span
    tail = replayed[-len(recorded):]
    assert [Partition.from_json_obj(e) for e in tail] == [
        Partition.from_json_obj(e) for e in recorded
    ]


@pytest.mark.parametrize("mode", ["sequential", "online"])
def test_run_experiment_other_modes(dataset_dir, tmp_path, mode):
    config = RunConfig(**{**FAST, "runs": 1, "mode": mode,
                          "max_iterations": 30, "sequential_budget": 15,
                          "online_budget": 5})
    result = run_experiment(config, dataset_dir, tmp_path / mode)
    model = Model.load(tmp_path / mode / "run-0" / "model.json")
    assert model.mode == mode
    assert result["runs"][0]["iterations"] == model.iterations


def test_run_experiment_error_paths(dataset_dir, tmp_path):
    unlabeled = tmp_path / "unlabeled"
    ds = load_dataset(dataset_dir)
    write_dataset(unlabeled, ds.trajectories, None, fps=ds.fps)
    with pytest.raises(ConfigError):
        run_experiment(RunConfig(**FAST), unlabeled, tmp_path / "x")
    # training span swallowing the whole recording leaves nothing to predict
    with pytest.raises(ConfigError):
        run_experiment(
            RunConfig(**{**FAST, "training_span": 1000.0}), dataset_dir, tmp_path / "y"
        )
    # span shorter than one window leaves nothing to train on
    with pytest.raises(ConfigError):
        run_experiment(
            RunConfig(**{**FAST, "training_span": 1.0}), dataset_dir, tmp_path / "z"
        )


# ---------------------------------------------------------------------------
# Command-line interface


def test_cli_synth_and_stats(tmp_path, capsys):
    out = tmp_path / "ds"
    assert main(["synth", "--seed", "3", "--out", str(out)]) == 0
    captured = capsys.readouterr()
    assert "trajectories" in captured.out
    ds = load_dataset(out)
    assert ds.labels is not None

    assert main(["stats", "--data", str(out)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "stat,value"
    assert [l.split(",")[0] for l in lines[1:]] == ["d_in", "d_out", "d_io"]


def test_cli_synth_spec_file(tmp_path, capsys):
    spec_path = tmp_path / "spec.toml"
    write_config_file(spec_path, {"n_groups": 1, "n_singletons": 1, "duration": 20.0})
    out = tmp_path / "ds"
    assert main(["synth", "--spec", str(spec_path), "--out", str(out)]) == 0
    capsys.readouterr()
    ds = load_dataset(out)
    assert len(ds.trajectories) >= 3

    write_config_file(spec_path, {"n_grups": 1})
    assert main(["synth", "--spec", str(spec_path), "--out", str(out)]) == 1
    assert "unknown synth spec keys" in capsys.readouterr().err


def test_cli_features(dataset_dir, capsys):
    assert main(["features", "--data", str(dataset_dir), "--window-len", "8",
                 "--stride", "8"]) == 0
    out = capsys.readouterr().out
    lines = out.strip().splitlines()
    assert lines[0] == "window,a,b,d_ph,d_sh,d_ca,d_he"
    assert len(lines) > 1
    for line in lines[1:]:
        values = [float(v) for v in line.split(",")[3:]]
        assert all(0.0 <= v <= 1.0 for v in values)


def test_cli_train_predict_eval(dataset_dir, tmp_path, capsys):
    model_path = tmp_path / "model.json"
    log_path = tmp_path / "log.csv"
    code = main([
        "train", "--data", str(dataset_dir), "--out", str(model_path),
        "--log", str(log_path), "--window-len", "8", "--stride", "8",
        "--max-iterations", "40",
    ])
    assert code == 0
    assert "trained on" in capsys.readouterr().out
    assert model_path.is_file()
    assert log_path.read_text().splitlines()[0] == "iter,block,hinge,gamma,objective"

    pred_path = tmp_path / "predictions.json"
    assert main(["predict", "--model", str(model_path), "--data", str(dataset_dir),
                 "--out", str(pred_path)]) == 0
    capsys.readouterr()
    _, entries = read_predictions(pred_path)
    assert entries

    scores_path = tmp_path / "scores.csv"
    assert main(["eval", "--truth", str(dataset_dir / "groups.txt"),
                 "--pred", str(pred_path), "--out", str(scores_path)]) == 0
    capsys.readouterr()
    assert scores_path.read_text().startswith("window,metric,precision,recall,f1")


def test_cli_train_span_only_when_requested(dataset_dir, tmp_path, capsys):
    # default: all windows train; with --training-span: only the early ones
    full = tmp_path / "full.json"
    short = tmp_path / "short.json"
    main(["train", "--data", str(dataset_dir), "--out", str(full),
          "--window-len", "8", "--stride", "8", "--max-iterations", "10"])
    main(["train", "--data", str(dataset_dir), "--out", str(short),
          "--window-len", "8", "--stride", "8", "--max-iterations", "10",
          "--training-span", "16"])
    capsys.readouterr()
    full_model = Model.load(full)
    short_model = Model.load(short)
    assert full_model.block_w.shape[0] > short_model.block_w.shape[0]


def test_cli_train_online_rejected(dataset_dir, tmp_path, capsys):
    code = main(["train", "--data", str(dataset_dir), "--out",
                 str(tmp_path / "m.json"), "--mode", "online"])
    assert code == 1
    assert "run command" in capsys.readouterr().err


def test_cli_run(dataset_dir, tmp_path, capsys):
    out = tmp_path / "report"
    code = main([
        "run", "--data", str(dataset_dir), "--out", str(out),
        "--window-len", "8", "--stride", "8", "--training-span", "24",
        "--runs", "1", "--max-iterations", "40",
    ])
    assert code == 0
    printed = capsys.readouterr().out
    assert "gmitre:" in printed
    assert "reports in" in printed
    assert (out / "summary.csv").is_file()


def test_cli_run_config_file(dataset_dir, tmp_path, capsys):
    config_path = tmp_path / "config.toml"
    write_config_file(config_path, {
        "window_len": 8.0, "stride": 8.0, "training_span": 24.0,
        "runs": 1, "max_iterations": 30,
    })
    out = tmp_path / "report"
    assert main(["run", "--data", str(dataset_dir), "--out", str(out),
                 "--config", str(config_path)]) == 0
    capsys.readouterr()
    resolved = read_config_file(out / "run-0" / "config.resolved.toml")
    assert resolved["max_iterations"] == 30


def test_cli_exit_codes(tmp_path, capsys):
    assert main([]) == 2  # missing subcommand
    capsys.readouterr()
    assert main(["run", "--bogus"]) == 2  # unknown flag
    capsys.readouterr()
    assert main(["stats", "--data", str(tmp_path / "nowhere")]) == 1
    assert "error:" in capsys.readouterr().err
    bad_config = tmp_path / "bad.toml"
    bad_config.write_text("[section]\n")
    assert main(["run", "--data", str(tmp_path), "--out", str(tmp_path / "o"),
                 "--config", str(bad_config)]) == 1
    capsys.readouterr()
