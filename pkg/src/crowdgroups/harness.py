"""Experiment orchestration: config files, seeded runs, and report emission.

A run loads a dataset directory, tiles it into windows, trains on the windows
that end inside the training span, predicts the remaining windows, and scores
them per window; the protocol repeats over several seeds and the reports carry
mean and standard deviation per metric. Config files are flat TOML-style
key = value text; command-line flags override file values.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ConfigError, CrowdGroupsError
from .features import FeatureConfigs, GrangerConfig, HeatmapConfig, ProxemicsConfig, build_scene
from .learning import (
    Model,
    TrainConfig,
    TrainingExample,
    bcfw_train,
    online_predict_train,
    predict,
    sequential_train,
)
from .losses import ForestScore, gmitre_score, positive_pairwise_metric
from .partitioning import Partition
from .trajectories import (
    Dataset,
    load_dataset,
    load_ground_truth,
    scene_stats,
    slice_windows,
    window_ground_truth,
)

logger = logging.getLogger(__name__)

_SPAN_EPS = 1e-9
METRIC_NAMES = ("gmitre", "pairwise_positive")


# ---------------------------------------------------------------------------
# Flat TOML-style config files


def _parse_scalar(text: str, where: str) -> object:
    if text.startswith("'"):
        if len(text) < 2 or not text.endswith("'") or "'" in text[1:-1]:
            raise ConfigError(f"{where}: malformed literal string {text!r}")
        return text[1:-1]
    if text.startswith('"'):
        if len(text) < 2 or not text.endswith('"'):
            raise ConfigError(f"{where}: unterminated string {text!r}")
        body = text[1:-1]
        out = []
        i = 0
        while i < len(body):
            ch = body[i]
            if ch == "\\":
                if i + 1 >= len(body):
                    raise ConfigError(f"{where}: dangling escape in {text!r}")
                esc = body[i + 1]
                mapped = {"\\": "\\", '"': '"', "n": "\n", "t": "\t"}.get(esc)
                if mapped is None:
                    raise ConfigError(f"{where}: unsupported escape \\{esc}")
                out.append(mapped)
                i += 2
            elif ch == '"':
                raise ConfigError(f"{where}: stray quote inside {text!r}")
            else:
                out.append(ch)
                i += 1
        return "".join(out)
    if text == "true":
        return True
    if text == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{where}: cannot parse value {text!r}") from None


def _strip_comment(line: str) -> str:
    out = []
    quote = ""
    i = 0
    while i < len(line):
        ch = line[i]
        if quote == '"' and ch == "\\" and i + 1 < len(line):
            out.append(ch)
            out.append(line[i + 1])
            i += 2
            continue
        if quote:
            if ch == quote:
                quote = ""
        elif ch in ('"', "'"):
            quote = ch
        elif ch == "#":
            break
        out.append(ch)
        i += 1
    return "".join(out)


def _split_array_items(body: str, where: str) -> list[str]:
    items = []
    current = []
    in_string = False
    i = 0
    while i < len(body):
        ch = body[i]
        if in_string and ch == "\\" and i + 1 < len(body):
            current.append(ch)
            current.append(body[i + 1])
            i += 2
            continue
        if ch == '"':
            in_string = not in_string
            current.append(ch)
        elif ch == "[" and not in_string:
            raise ConfigError(f"{where}: nested arrays are not supported")
        elif ch == "," and not in_string:
            items.append("".join(current))
            current = []
        else:
            current.append(ch)
        i += 1
    if in_string:
        raise ConfigError(f"{where}: unterminated string in array")
    tail = "".join(current)
    if tail.strip():
        items.append(tail)
    return items


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse flat `key = value` lines: strings, booleans, numbers, flat arrays,
    # comments. Section headers and nesting are rejected."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        where = f"{source}:{lineno}"
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if line.startswith("["):
            raise ConfigError(f"{where}: section headers are not supported in this flat format")
        if "=" not in line:
            raise ConfigError(f"{where}: expected key = value, got {raw.strip()!r}")
        key, _, value_text = line.partition("=")
        key = key.strip()
        value_text = value_text.strip()
        if not key or any(c not in "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-" for c in key):
            raise ConfigError(f"{where}: invalid key {key!r}")
        if key in values:
            raise ConfigError(f"{where}: duplicate key {key!r}")
        if not value_text:
            raise ConfigError(f"{where}: missing value for {key!r}")
        if value_text.startswith("["):
            if not value_text.endswith("]"):
                raise ConfigError(f"{where}: unterminated array for {key!r}")
            items = _split_array_items(value_text[1:-1], where)
            values[key] = [_parse_scalar(item.strip(), where) for item in items]
        else:
            values[key] = _parse_scalar(value_text, where)
    return values


def read_config_file(path) -> dict:
    path = Path(path)
    return parse_config_text(path.read_text(encoding="utf-8"), source=str(path))


def _format_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        escaped = escaped.replace("\n", "\\n").replace("\t", "\\t")
        return f'"{escaped}"'
    raise ConfigError(f"cannot serialize config value of type {type(value).__name__}")


def format_config_text(values: dict) -> str:
    lines = []
    for key, value in values.items():
        if isinstance(value, (list, tuple)):
            inner = ", ".join(_format_scalar(v) for v in value)
            lines.append(f"{key} = [{inner}]")
        else:
            lines.append(f"{key} = {_format_scalar(value)}")
    return "\n".join(lines) + "\n"


def write_config_file(path, values: dict) -> None:
    Path(path).write_text(format_config_text(values), encoding="utf-8")


# ---------------------------------------------------------------------------
# Run configuration


@dataclass(frozen=True)
class RunConfig:
    """Resolved experiment settings; every output artifact echoes these."""

    window_len: float = 10.0
    stride: float = 10.0
    training_span: float = 100.0
    C: float = 10.0
    loss: str = "gmitre"
    mode: str = "batch"
    seed: int = 0
    runs: int = 5
    max_iterations: int = 1000
    sequential_budget: int = 100
    online_budget: int = 10
    objective_every: int = 0
    early_stop: bool = False
    early_stop_patience: int = 50
    early_stop_tol: float = 1e-6
    granger_lag: int = 2
    proxemic_sigmas: tuple[float, ...] = (0.5, 1.2, 3.7, 7.6)
    heat_cell_edge: float = 0.3
    heat_k_s: float = 1e-5
    heat_k_r: float = 0.5
    heat_accumulate: str = "binary"

    def __post_init__(self):
        if self.window_len <= 0 or self.stride <= 0 or self.training_span <= 0:
            raise ConfigError("window_len, stride, and training_span must be positive")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.mode not in ("batch", "sequential", "online"):
            raise ConfigError(f"mode must be batch, sequential, or online, got {self.mode!r}")
        # Build the derived configs once so their validation runs eagerly.
        self.feature_configs()
        self.train_config(self.seed)

    def feature_configs(self) -> FeatureConfigs:
        return FeatureConfigs(
            proxemics=ProxemicsConfig(sigmas=tuple(float(s) for s in self.proxemic_sigmas)),
            granger=GrangerConfig(lag=int(self.granger_lag)),
            heatmap=HeatmapConfig(
                cell_edge=float(self.heat_cell_edge),
                k_s=float(self.heat_k_s),
                k_r=float(self.heat_k_r),
                accumulate=str(self.heat_accumulate),
            ),
        )

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            C=self.C,
            max_iterations=self.max_iterations,
            seed=int(seed),
            loss=self.loss,
            early_stop=self.early_stop,
            early_stop_patience=self.early_stop_patience,
            early_stop_tol=self.early_stop_tol,
            objective_every=self.objective_every,
            sequential_budget=self.sequential_budget,
            online_budget=self.online_budget,
        )

    def to_flat_dict(self) -> dict:
        out = {}
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            out[field.name] = list(value) if isinstance(value, tuple) else value
        return out

    @classmethod
    def from_dict(cls, values: dict) -> "RunConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, value in values.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            if key == "proxemic_sigmas":
                if not isinstance(value, (list, tuple)):
                    raise ConfigError("proxemic_sigmas must be an array")
                value = tuple(float(v) for v in value)
            kwargs[key] = value
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(f"bad config: {exc}") from None


def load_run_config(path=None, overrides: dict | None = None) -> RunConfig:
    """File values (when given) overlaid with overrides, on top of defaults."""
    values: dict = {}
    if path is not None:
        values.update(read_config_file(path))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    return RunConfig.from_dict(values)


# ---------------------------------------------------------------------------
# Prediction files and scoring


def prediction_entry(window_index: int, start_t: float, end_t: float, p: Partition) -> dict:
    entry = p.to_json_obj(window_index)
    entry["start_t"] = float(start_t)
    entry["end_t"] = float(end_t)
    return entry


def write_predictions(path_or_file, seed: int, entries: list[dict]) -> None:
    payload = json.dumps({"seed": int(seed), "windows": entries}, indent=2) + "\n"
    if hasattr(path_or_file, "write"):
        path_or_file.write(payload)
    else:
        Path(path_or_file).write_text(payload, encoding="utf-8")


def read_predictions(path) -> tuple[int, list[dict]]:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(obj, dict):
            raise TypeError("top level must be an object")
        seed = int(obj.get("seed", 0))
        windows = obj["windows"]
        if not isinstance(windows, list):
            raise TypeError("windows must be a list")
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CrowdGroupsError(f"{path}: not a prediction file: {exc}") from None
    return seed, windows


def _score_rows(window_index, truth: Partition, pred: Partition) -> list[list]:
    g = gmitre_score(truth, pred)
    pp = positive_pairwise_metric(truth, pred)
    return [
        [window_index, "gmitre", g.precision, g.recall, g.f1],
        [window_index, "pairwise_positive", pp.precision, pp.recall, pp.f1],
    ]


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


def _write_csv(path_or_file, header: list[str], rows: Iterable[Iterable]) -> None:
    own = not hasattr(path_or_file, "write")
    fh = open(path_or_file, "w", encoding="utf-8", newline="") if own else path_or_file
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    finally:
        if own:
            fh.close()


def evaluate_predictions(truth_path, pred_path, out=None) -> str:
    """Score a prediction file against a ground-truth group file; returns the
    per-window CSV (plus mean rows) and optionally writes it to `out`."""
    labels = load_ground_truth(truth_path)
    _, entries = read_predictions(pred_path)
    rows: list[list] = []
    collected: dict[str, list[ForestScore]] = {name: [] for name in METRIC_NAMES}
    for entry in entries:
        pred = Partition.from_json_obj(entry)
        if not pred.members:
            continue
        truth = _restricted_truth(pred.members, labels)
        window_index = entry.get("window", len(rows) // 2)
        rows.extend(_score_rows(window_index, truth, pred))
        collected["gmitre"].append(gmitre_score(truth, pred))
        collected["pairwise_positive"].append(positive_pairwise_metric(truth, pred))
    for name in METRIC_NAMES:
        scores = collected[name]
        if scores:
            rows.append(
                [
                    "mean",
                    name,
                    float(np.mean([s.precision for s in scores])),
                    float(np.mean([s.recall for s in scores])),
                    float(np.mean([s.f1 for s in scores])),
                ]
            )
    buffer = io.StringIO()
    _write_csv(buffer, ["window", "metric", "precision", "recall", "f1"], rows)
    text = buffer.getvalue()
    if out is not None:
        if hasattr(out, "write"):
            out.write(text)
        else:
            Path(out).write_text(text, encoding="utf-8")
    return text


def _restricted_truth(members, labels) -> Partition:
    from .trajectories import restrict_labels

    return restrict_labels(members, labels)


# ---------------------------------------------------------------------------
# Experiment runner


def _mean_scores(scores: list[ForestScore]) -> ForestScore:
    if not scores:
        return ForestScore(recall=1.0, precision=1.0, f1=1.0)
    return ForestScore(
        recall=float(np.mean([s.recall for s in scores])),
        precision=float(np.mean([s.precision for s in scores])),
        f1=float(np.mean([s.f1 for s in scores])),
    )


def _weights_rows(model: Model) -> list[list]:
    from .features import FEATURE_NAMES

    alpha, beta = model.alpha, model.beta
    coeff = alpha + beta
    total = float(np.sum(np.abs(coeff)))
    rows = []
    for k, name in enumerate(FEATURE_NAMES):
        share = abs(float(coeff[k])) / total if total > 0 else 0.0
        rows.append([name, float(alpha[k]), float(beta[k]), float(coeff[k]), share])
    rows.append(["constant", "", "", float(np.sum(alpha)), ""])
    return rows


def _train_one(
    config: RunConfig,
    examples: list[TrainingExample],
    test_scenes: list,
    run_seed: int,
    log_path,
    snapshot: dict,
) -> tuple[Model, list[Partition]]:
    tc = config.train_config(run_seed)
    if config.mode == "batch":
        model = bcfw_train(examples, tc, log=log_path, config_snapshot=snapshot)
        preds = [predict(scene, model) for scene in test_scenes]
    elif config.mode == "sequential":
        model = None
        for model in sequential_train(iter(examples), tc, log=log_path, config_snapshot=snapshot):
            pass
        preds = [predict(scene, model) for scene in test_scenes]
    else:
        model = bcfw_train(examples, tc, log=log_path, config_snapshot=snapshot)
        preds = []
        for pred, model in online_predict_train(test_scenes, model, tc):
            preds.append(pred)
    return model, preds


def run_experiment(config: RunConfig, data_dir, out_dir) -> dict:
    """Train/predict/score over config.runs seeded repetitions; emits per-run
    reports under <out>/run-<seed>/ and cross-run summaries at the top level."""
    dataset = load_dataset(data_dir)
    if dataset.labels is None:
        raise ConfigError(f"{data_dir}: ground truth is required to train")
    windows = slice_windows(dataset.trajectories, config.window_len, config.stride)
    if not windows:
        raise ConfigError("the dataset is shorter than one window")
    t0 = min(tr.start_t for tr in dataset.trajectories)
    split = t0 + config.training_span + _SPAN_EPS
    train_windows = [w for w in windows if w.end_t <= split]
    test_windows = [w for w in windows if w.end_t > split]
    if not any(w.members for w in train_windows):
        raise ConfigError("no training windows with members inside the training span")
    if not test_windows:
        raise ConfigError("no windows left to predict beyond the training span")

    configs = config.feature_configs()
    train_scenes = [build_scene(w, configs) for w in train_windows if w.members]
    test_scenes = [build_scene(w, configs) for w in test_windows]
    examples = [
        TrainingExample(scene, window_ground_truth(scene.window, dataset.labels))
        for scene in train_scenes
    ]

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    all_scenes = train_scenes + test_scenes
    quality_rows = [
        ["windows_total", len(windows)],
        ["windows_train", len(train_windows)],
        ["windows_test", len(test_windows)],
        ["windows_empty", sum(1 for w in windows if not w.members)],
        ["dropped_member_instances", sum(len(w.dropped) for w in windows)],
        ["granger_fallback_pairs", sum(s.granger_fallback_count for s in all_scenes)],
        ["no_overlap_pairs", sum(s.no_overlap_count for s in all_scenes)],
    ]
    _write_csv(out / "data_quality.csv", ["quantity", "value"], quality_rows)

    stats = scene_stats(windows, dataset.labels)
    _write_csv(
        out / "scene_stats.csv",
        ["stat", "value"],
        [
            ["d_in", "" if stats.d_in is None else stats.d_in],
            ["d_out", "" if stats.d_out is None else stats.d_out],
            ["d_io", "" if stats.d_io is None else stats.d_io],
        ],
    )

    per_run_means: dict[str, list[ForestScore]] = {name: [] for name in METRIC_NAMES}
    meta_runs = []
    for r in range(config.runs):
        run_seed = config.seed + r
        rundir = out / f"run-{run_seed}"
        rundir.mkdir(parents=True, exist_ok=True)
        resolved = config.to_flat_dict()
        resolved["seed"] = run_seed
        write_config_file(rundir / "config.resolved.toml", resolved)

        model, preds = _train_one(
            config, examples, test_scenes, run_seed, rundir / "train_log.csv", resolved
        )
        model.save(rundir / "model.json")

        entries = []
        per_window_rows: list[list] = []
        run_scores: dict[str, list[ForestScore]] = {name: [] for name in METRIC_NAMES}
        for scene, pred in zip(test_scenes, preds):
            window = scene.window
            entries.append(prediction_entry(window.index, window.start_t, window.end_t, pred))
            if not scene.members:
                continue
            truth = window_ground_truth(window, dataset.labels)
            per_window_rows.extend(_score_rows(window.index, truth, pred))
            run_scores["gmitre"].append(gmitre_score(truth, pred))
            run_scores["pairwise_positive"].append(positive_pairwise_metric(truth, pred))
        write_predictions(rundir / "predictions.json", run_seed, entries)
        _write_csv(
            rundir / "per_window.csv",
            ["window", "metric", "precision", "recall", "f1"],
            per_window_rows,
        )
        metric_rows = []
        for name in METRIC_NAMES:
            mean = _mean_scores(run_scores[name])
            per_run_means[name].append(mean)
            metric_rows.append([name, mean.precision, mean.recall, mean.f1])
        _write_csv(rundir / "metrics.csv", ["metric", "precision", "recall", "f1"], metric_rows)
        _write_csv(
            rundir / "weights.csv",
            ["term", "alpha", "beta", "coefficient", "share"],
            _weights_rows(model),
        )
        meta_runs.append(
            {
                "seed": run_seed,
                "nonnegative_weights": model.nonnegative_weights,
                "iterations": model.iterations,
                "gmitre_f1": per_run_means["gmitre"][-1].f1,
            }
        )
        logger.info(
            "run %d/%d (seed %d): gmitre f1 %.4f",
            r + 1, config.runs, run_seed, per_run_means["gmitre"][-1].f1,
        )

    summary_rows = []
    summary: dict[str, dict[str, dict[str, float]]] = {}
    for name in METRIC_NAMES:
        summary[name] = {}
        for field in ("precision", "recall", "f1"):
            values = np.array([getattr(s, field) for s in per_run_means[name]])
            mean = float(values.mean())
            std = float(values.std(ddof=1)) if len(values) > 1 else 0.0
            summary_rows.append([name, field, mean, std])
            summary[name][field] = {"mean": mean, "std": std}
    _write_csv(out / "summary.csv", ["metric", "field", "mean", "std"], summary_rows)

    meta = {
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "config": config.to_flat_dict(),
        "runs": meta_runs,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return {"out_dir": str(out), "summary": summary, "runs": meta_runs}


# ---------------------------------------------------------------------------
# Building blocks shared with the CLI


def windows_and_scenes(dataset: Dataset, window_len: float, stride: float, configs: FeatureConfigs):
    windows = slice_windows(dataset.trajectories, window_len, stride)
    scenes = [build_scene(w, configs) for w in windows]
    return windows, scenes


def predict_windows(dataset: Dataset, model: Model, window_len=None, stride=None) -> list[dict]:
    """Tile the dataset with the model's recorded window settings (unless
    overridden) and predict every window."""
    snapshot = model.config_snapshot
    if window_len is None:
        window_len = snapshot.get("window_len")
    if stride is None:
        stride = snapshot.get("stride", window_len)
    if window_len is None:
        raise ConfigError("window length not given and not recorded in the model")
    configs = _snapshot_feature_configs(snapshot)
    windows = slice_windows(dataset.trajectories, float(window_len), float(stride))
    entries = []
    for window in windows:
        scene = build_scene(window, configs)
        part = predict(scene, model)
        entries.append(prediction_entry(window.index, window.start_t, window.end_t, part))
    return entries


def _snapshot_feature_configs(snapshot: dict) -> FeatureConfigs:
    keys = (
        "granger_lag", "proxemic_sigmas", "heat_cell_edge",
        "heat_k_s", "heat_k_r", "heat_accumulate",
    )
    subset = {k: snapshot[k] for k in keys if k in snapshot}
    if not subset:
        return FeatureConfigs()
    base = RunConfig.from_dict(subset)
    return base.feature_configs()
