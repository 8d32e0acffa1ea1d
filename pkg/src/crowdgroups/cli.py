"""Command-line interface.

Subcommands: synth (generate a dataset), features (pair-feature CSV), train,
predict, eval (score a prediction file), run (full seeded experiment), stats
(scene statistics). All accept --config plus flag overrides; exit codes are
0 on success, 1 on data/config errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .errors import ConfigError, CrowdGroupsError
from .features import build_scene, write_features_csv
from .harness import (
    RunConfig,
    evaluate_predictions,
    load_run_config,
    predict_windows,
    read_config_file,
    run_experiment,
    write_predictions,
)
from .learning import Model, TrainingExample, bcfw_train, sequential_train
from .synth import SynthSpec, synth_generate, write_dataset
from .trajectories import load_dataset, scene_stats, slice_windows, window_ground_truth

_SPAN_EPS = 1e-9

_CONFIG_FLAGS = (
    ("--window-len", "window_len", float, "window length in seconds"),
    ("--stride", "stride", float, "window stride in seconds"),
    ("--training-span", "training_span", float, "seconds of data used for training"),
    ("--seed", "seed", int, "base random seed"),
    ("--C", "C", float, "regularization trade-off"),
    ("--loss", "loss", str, "training loss: gmitre, mitre, or pairwise"),
    ("--mode", "mode", str, "training mode: batch, sequential, or online"),
    ("--runs", "runs", int, "number of seeded repetitions"),
    ("--max-iterations", "max_iterations", int, "training iteration budget"),
)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="flat TOML-style config file")
    for flag, dest, typ, help_text in _CONFIG_FLAGS:
        parser.add_argument(flag, dest=dest, type=typ, default=None, help=help_text)


def _overrides(args: argparse.Namespace) -> dict:
    out = {}
    for _, dest, _, _ in _CONFIG_FLAGS:
        value = getattr(args, dest, None)
        if value is not None:
            out[dest] = value
    return out


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    return load_run_config(getattr(args, "config", None), _overrides(args))


def _open_out(path: str | None):
    if path is None or path == "-":
        return sys.stdout, False
    return open(Path(path), "w", encoding="utf-8", newline=""), True


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crowdgroups",
        description="Detect social groups in pedestrian trajectory data.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset directory")
    p.add_argument("--spec", default=None, help="TOML file of generator settings")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output dataset directory")

    p = sub.add_parser("features", help="emit the pair-feature CSV for every window")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", default="-", help="output CSV path (default: stdout)")
    _add_config_flags(p)

    p = sub.add_parser("train", help="train a model on the windows of a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--log", default=None, help="per-iteration training log CSV")
    _add_config_flags(p)

    p = sub.add_parser("predict", help="predict groups for every window of a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default="-", help="prediction JSON path (default: stdout)")
    p.add_argument("--window", type=float, default=None,
                   help="window length (default: recorded in the model)")
    p.add_argument("--stride", type=float, default=None)

    p = sub.add_parser("eval", help="score a prediction file against ground truth")
    p.add_argument("--truth", required=True, help="ground-truth group file")
    p.add_argument("--pred", required=True, help="prediction JSON file")
    p.add_argument("--out", default="-", help="output CSV path (default: stdout)")

    p = sub.add_parser("run", help="full experiment: train, predict, score, report")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="report output directory")
    _add_config_flags(p)

    p = sub.add_parser("stats", help="scene statistics (d_in, d_out, d_io)")
    p.add_argument("--data", required=True)
    _add_config_flags(p)

    return parser


def _cmd_synth(args) -> int:
    values = read_config_file(args.spec) if args.spec else {}
    known = {f.name for f in dataclasses.fields(SynthSpec)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown synth spec keys: {sorted(unknown)}")
    spec = SynthSpec(**values)
    trajectories, labels = synth_generate(spec, seed=args.seed)
    write_dataset(args.out, trajectories, labels, fps=spec.fps, seed=args.seed)
    print(f"wrote {len(trajectories)} trajectories, {len(labels.groups)} groups to {args.out}")
    return 0


def _cmd_features(args) -> int:
    config = _resolve_config(args)
    dataset = load_dataset(args.data)
    windows = slice_windows(dataset.trajectories, config.window_len, config.stride)
    configs = config.feature_configs()
    scenes = [build_scene(w, configs) for w in windows]
    fh, own = _open_out(args.out)
    try:
        write_features_csv(scenes, fh)
    finally:
        if own:
            fh.close()
    return 0


def _span_requested(args, config_path) -> bool:
    if getattr(args, "training_span", None) is not None:
        return True
    if config_path is not None and "training_span" in read_config_file(config_path):
        return True
    return False


def _cmd_train(args) -> int:
    config = _resolve_config(args)
    if config.mode == "online":
        raise ConfigError("online mode trains during prediction; use the run command")
    dataset = load_dataset(args.data)
    if dataset.labels is None:
        raise ConfigError(f"{args.data}: ground truth is required to train")
    windows = slice_windows(dataset.trajectories, config.window_len, config.stride)
    if _span_requested(args, args.config):
        t0 = min(tr.start_t for tr in dataset.trajectories)
        windows = [w for w in windows if w.end_t <= t0 + config.training_span + _SPAN_EPS]
    configs = config.feature_configs()
    scenes = [build_scene(w, configs) for w in windows if w.members]
    examples = [
        TrainingExample(scene, window_ground_truth(scene.window, dataset.labels))
        for scene in scenes
    ]
    if not examples:
        raise ConfigError("no windows with members to train on")
    tc = config.train_config(config.seed)
    snapshot = config.to_flat_dict()
    if config.mode == "sequential":
        model = None
        for model in sequential_train(iter(examples), tc, log=args.log, config_snapshot=snapshot):
            pass
    else:
        model = bcfw_train(examples, tc, log=args.log, config_snapshot=snapshot)
    model.save(args.out)
    print(f"trained on {len(examples)} windows ({model.iterations} iterations) -> {args.out}")
    return 0


def _cmd_predict(args) -> int:
    model = Model.load(args.model)
    dataset = load_dataset(args.data)
    entries = predict_windows(dataset, model, window_len=args.window, stride=args.stride)
    fh, own = _open_out(args.out)
    try:
        write_predictions(fh, model.seed, entries)
    finally:
        if own:
            fh.close()
    return 0


def _cmd_eval(args) -> int:
    text = evaluate_predictions(args.truth, args.pred)
    fh, own = _open_out(args.out)
    try:
        fh.write(text)
    finally:
        if own:
            fh.close()
    return 0


def _cmd_run(args) -> int:
    config = _resolve_config(args)
    result = run_experiment(config, args.data, args.out)
    for metric, fields in result["summary"].items():
        parts = ", ".join(
            f"{field} {stats['mean']:.4f} +/- {stats['std']:.4f}"
            for field, stats in fields.items()
        )
        print(f"{metric}: {parts}")
    print(f"reports in {result['out_dir']}")
    return 0


def _cmd_stats(args) -> int:
    config = _resolve_config(args)
    dataset = load_dataset(args.data)
    if dataset.labels is None:
        raise ConfigError(f"{args.data}: ground truth is required for scene stats")
    windows = slice_windows(dataset.trajectories, config.window_len, config.stride)
    if not windows:
        raise ConfigError("the dataset is shorter than one window")
    stats = scene_stats(windows, dataset.labels)
    print("stat,value")
    for name, value in (("d_in", stats.d_in), ("d_out", stats.d_out), ("d_io", stats.d_io)):
        print(f"{name},{'' if value is None else format(value, '.9g')}")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "features": _cmd_features,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "eval": _cmd_eval,
    "run": _cmd_run,
    "stats": _cmd_stats,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return _COMMANDS[args.command](args)
    except CrowdGroupsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
