"""Structured max-margin training of the affinity weights.

The 8-vector w = [alpha; beta] is learned by Block-Coordinate Frank-Wolfe over
one block per training window, with a greedy loss-augmented merge oracle.
Batch, sequential (examples arrive over time), and online (self-supervised
from own predictions) modes share the same per-block update.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator, NamedTuple

import numpy as np

from .errors import ConfigError
from .features import FeatureConfigs, WindowedScene
from .losses import _f1, gmitre_loss, mitre_loss, pairwise_loss
from .partitioning import AffinityMatrix, Partition, affinity, greedy_cc

logger = logging.getLogger(__name__)

WEIGHT_DIM = 8
LOSSES: dict[str, Callable[[Partition, Partition], float]] = {
    "gmitre": gmitre_loss,
    "mitre": mitre_loss,
    "pairwise": pairwise_loss,
}


@dataclass(frozen=True, eq=False)
class TrainingExample:
    """One window's features with its ground-truth grouping."""

    scene: WindowedScene
    truth: Partition

    def __post_init__(self):
        if self.truth.members != set(self.scene.members):
            raise ValueError("truth partition does not cover the scene members")


@dataclass(frozen=True)
class TrainConfig:
    """Knobs of the Frank-Wolfe trainer and its derived modes."""

    C: float = 10.0
    max_iterations: int = 1000
    seed: int = 0
    loss: str = "gmitre"
    early_stop: bool = False
    early_stop_patience: int = 50
    early_stop_tol: float = 1e-6
    objective_every: int = 0
    sequential_budget: int = 100
    online_budget: int = 10

    def __post_init__(self):
        if self.C <= 0:
            raise ConfigError(f"C must be positive, got {self.C}")
        if self.max_iterations < 0:
            raise ConfigError("max_iterations must be non-negative")
        if self.loss not in LOSSES:
            raise ConfigError(f"loss must be one of {sorted(LOSSES)}, got {self.loss!r}")
        if self.early_stop_patience < 1 or self.early_stop_tol <= 0:
            raise ConfigError("early-stop parameters out of range")
        if self.objective_every < 0:
            raise ConfigError("objective_every must be non-negative")
        if self.sequential_budget < 1 or self.online_budget < 1:
            raise ConfigError("iteration budgets must be >= 1")


class Model:
    """Learned weights plus the per-block Frank-Wolfe state and training metadata.

    w decomposes as [alpha; beta]: the affinity of a pair with distances d is
    alpha.(1 - d) - beta.d. The block states allow exact training resumption
    and replay; config_snapshot carries whatever windowing/feature settings
    are needed to reproduce a prediction.
    """

    FORMAT_VERSION = 1

    def __init__(
        self,
        w=None,
        block_w=None,
        block_l=None,
        l: float = 0.0,
        C: float = 10.0,
        seed: int = 0,
        loss: str = "gmitre",
        mode: str = "batch",
        iterations: int = 0,
        config_snapshot: dict | None = None,
    ):
        self.w = np.zeros(WEIGHT_DIM) if w is None else np.array(w, dtype=float).reshape(WEIGHT_DIM)
        self.block_w = (
            np.zeros((0, WEIGHT_DIM))
            if block_w is None
            else np.array(block_w, dtype=float).reshape(-1, WEIGHT_DIM)
        )
        self.block_l = (
            np.zeros(0) if block_l is None else np.array(block_l, dtype=float).reshape(-1)
        )
        if self.block_w.shape[0] != self.block_l.shape[0]:
            raise ValueError("block_w and block_l disagree on the number of blocks")
        self.l = float(l)
        self.C = float(C)
        self.seed = int(seed)
        self.loss = str(loss)
        self.mode = str(mode)
        self.iterations = int(iterations)
        self.config_snapshot = dict(config_snapshot or {})

    @property
    def alpha(self) -> np.ndarray:
        return self.w[:4]

    @property
    def beta(self) -> np.ndarray:
        return self.w[4:]

    @property
    def nonnegative_weights(self) -> bool:
        """Whether alpha, beta >= 0 (the positivity the scale theorem assumes;
        monitored, never enforced)."""
        return bool(np.all(self.w >= 0.0))

    def copy(self) -> "Model":
        return Model(
            w=self.w.copy(),
            block_w=self.block_w.copy(),
            block_l=self.block_l.copy(),
            l=self.l,
            C=self.C,
            seed=self.seed,
            loss=self.loss,
            mode=self.mode,
            iterations=self.iterations,
            config_snapshot=dict(self.config_snapshot),
        )

    def to_dict(self) -> dict:
        return {
            "format_version": self.FORMAT_VERSION,
            "w": self.w.tolist(),
            "block_w": self.block_w.tolist(),
            "block_l": self.block_l.tolist(),
            "l": self.l,
            "C": self.C,
            "seed": self.seed,
            "loss": self.loss,
            "mode": self.mode,
            "iterations": self.iterations,
            "config": self.config_snapshot,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Model":
        try:
            version = int(obj["format_version"])
            if version > cls.FORMAT_VERSION:
                raise ConfigError(f"model format {version} is newer than supported")
            return cls(
                w=obj["w"],
                block_w=obj.get("block_w") or None,
                block_l=obj.get("block_l") or None,
                l=obj.get("l", 0.0),
                C=obj.get("C", 10.0),
                seed=obj.get("seed", 0),
                loss=obj.get("loss", "gmitre"),
                mode=obj.get("mode", "batch"),
                iterations=obj.get("iterations", 0),
                config_snapshot=obj.get("config", {}),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"not a valid model file: {exc}") from None

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Model":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not a valid model file: {exc}") from None
        return cls.from_dict(obj)


def joint_feature_map(scene: WindowedScene, p: Partition) -> np.ndarray:
    """Sum of pair affinity terms over intra-cluster pairs.

    Built so that w @ joint_feature_map(scene, p) equals the partition's total
    affinity score under affinity(scene, w), exactly.
    """
    if p.members != set(scene.members):
        raise ValueError("partition does not cover the scene members")
    if not scene.pairs:
        return np.zeros(WEIGHT_DIM)
    labels = p.labels()
    mask = np.fromiter(
        (labels[a] == labels[b] for a, b in scene.pair_ids),
        dtype=bool,
        count=len(scene.pairs),
    )
    if not mask.any():
        return np.zeros(WEIGHT_DIM)
    return scene.affinity_terms[mask].sum(axis=0)


def compatibility(scene: WindowedScene, p: Partition, w) -> float:
    """w @ Psi(scene, p): how well the weighted affinities support the partition."""
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.shape != (WEIGHT_DIM,):
        raise ValueError(f"weight vector must have {WEIGHT_DIM} components")
    return float(w @ joint_feature_map(scene, p))


class _LossTracker:
    """Loss of candidate cluster merges against a fixed truth partition.

    Keeps, for every working cluster, the contingency counts against the truth
    clusters; a candidate merge's loss then needs only the two clusters' key
    sets. Each candidate is evaluated independently from these counts (nothing
    is cached across candidates).
    """

    __slots__ = (
        "kind", "n", "t_sizes", "t_single", "sizes", "cnt",
        "s_p", "s_q", "m_p", "m_r", "c_r", "c_q", "cm_r", "cm_q",
        "disagree", "pair_total",
    )

    def __init__(self, truth: Partition, members: list[int], kind: str):
        if kind not in LOSSES:
            raise ValueError(f"unknown loss {kind!r}")
        self.kind = kind
        n = len(members)
        self.n = n
        index = {m: i for i, m in enumerate(members)}
        t_label = [0] * n
        t_sizes: list[int] = []
        for k, cluster in enumerate(truth.clusters):
            t_sizes.append(len(cluster))
            for m in cluster:
                t_label[index[m]] = k
        self.t_sizes = t_sizes
        self.t_single = [sz == 1 for sz in t_sizes]
        self.sizes = [1] * n
        self.cnt: list[dict[int, int]] = [{t_label[i]: 1} for i in range(n)]
        self.s_p = 0
        self.s_q = sum(sz - 1 for sz in t_sizes if sz >= 2)
        self.m_p = sum(1 for i in range(n) if not self.t_single[t_label[i]])
        self.m_r = 0
        self.c_r = n
        self.c_q = sum(sz - 1 for sz in t_sizes if sz >= 2) + sum(
            1 for single in self.t_single if single
        )
        self.cm_r = 0
        self.cm_q = n - len(t_sizes)
        self.disagree = sum(sz * (sz - 1) // 2 for sz in t_sizes)
        self.pair_total = n * (n - 1) // 2

    def _intersection(self, i: int, j: int) -> list[int]:
        ci, cj = self.cnt[i], self.cnt[j]
        small, large = (ci, cj) if len(ci) <= len(cj) else (cj, ci)
        return [k for k in small if k in large]

    def _loss_from(self, s_p: int, s_q: int, m_p: int, m_r: int, c_r: int, cm_r: int) -> float:
        if self.kind == "mitre":
            precision = 1.0 - s_p / cm_r if cm_r else 1.0
            recall = 1.0 - s_q / self.cm_q if self.cm_q else 1.0
        else:
            precision = 1.0 - (s_p + m_p) / c_r if c_r else 1.0
            recall = 1.0 - (s_q + m_r) / self.c_q if self.c_q else 1.0
        return 1.0 - _f1(precision, recall)

    def current_loss(self) -> float:
        if self.kind == "pairwise":
            return self.disagree / self.pair_total if self.pair_total else 0.0
        return self._loss_from(self.s_p, self.s_q, self.m_p, self.m_r, self.c_r, self.cm_r)

    def candidate_loss(self, i: int, j: int) -> float:
        ci, cj = self.cnt[i], self.cnt[j]
        inter = self._intersection(i, j)
        if self.kind == "pairwise":
            same = sum(ci[k] * cj[k] for k in inter)
            disagree = self.disagree + self.sizes[i] * self.sizes[j] - 2 * same
            return disagree / self.pair_total if self.pair_total else 0.0
        union = len(ci) + len(cj) - len(inter)
        s_p = self.s_p + (union - 1) - (len(ci) - 1) - (len(cj) - 1)
        s_q = self.s_q - sum(1 for k in inter if self.t_sizes[k] >= 2)
        m_p, m_r = self.m_p, self.m_r
        c_r = self.c_r + 1
        for cluster, counts in ((i, ci), (j, cj)):
            if self.sizes[cluster] == 1:
                c_r -= 1
                if self.t_single[next(iter(counts))]:
                    m_r += 1
                else:
                    m_p -= 1
        return self._loss_from(s_p, s_q, m_p, m_r, c_r, self.cm_r + 1)

    def apply(self, i: int, j: int) -> None:
        ci, cj = self.cnt[i], self.cnt[j]
        inter = self._intersection(i, j)
        union = len(ci) + len(cj) - len(inter)
        self.s_p += (union - 1) - (len(ci) - 1) - (len(cj) - 1)
        self.s_q -= sum(1 for k in inter if self.t_sizes[k] >= 2)
        self.disagree += self.sizes[i] * self.sizes[j] - 2 * sum(
            ci[k] * cj[k] for k in inter
        )
        self.cm_r += 1
        self.c_r += 1
        for cluster, counts in ((i, ci), (j, cj)):
            if self.sizes[cluster] == 1:
                self.c_r -= 1
                if self.t_single[next(iter(counts))]:
                    self.m_r += 1
                else:
                    self.m_p -= 1
        target, other = (ci, cj) if len(ci) >= len(cj) else (cj, ci)
        for k, v in other.items():
            target[k] = target.get(k, 0) + v
        self.cnt[i] = target
        self.cnt[j] = {}
        self.sizes[i] += self.sizes[j]
        self.sizes[j] = 0


def loss_augmented_oracle(
    example: TrainingExample, w, loss: str = "gmitre"
) -> tuple[Partition, float]:
    """Greedy maximizer of H(y) = loss(truth, y) + w.Psi(x, y) - w.Psi(x, truth).

    Starts from all singletons and applies the best strictly-improving cluster
    merge until none exists (ties to the smallest min-id pair); the candidate
    loss is re-evaluated for every candidate merge. Returns the local maximizer
    and its H value, the structured hinge estimate. The truth itself always
    attains H = 0, so when the greedy end point scores below that the truth is
    returned instead; the hinge is never negative.
    """
    if loss not in LOSSES:
        raise ValueError(f"loss must be one of {sorted(LOSSES)}, got {loss!r}")
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.shape != (WEIGHT_DIM,):
        raise ValueError(f"weight vector must have {WEIGHT_DIM} components")
    scene, truth = example.scene, example.truth
    members = list(scene.members)
    n = len(members)
    psi_truth = joint_feature_map(scene, truth)
    if n == 0:
        return Partition([]), 0.0
    cross = affinity(scene, w).matrix.copy()
    tracker = _LossTracker(truth, members, loss)
    groups: dict[int, list[int]] = {i: [i] for i in range(n)}
    low: dict[int, int] = {i: members[i] for i in range(n)}
    cur_loss = tracker.current_loss()
    while len(groups) >= 2:
        active = sorted(groups)
        best: tuple[int, int] | None = None
        best_gain = 0.0
        best_key = (0, 0)
        best_loss = 0.0
        for x in range(len(active)):
            i = active[x]
            row = cross[i]
            for y in range(x + 1, len(active)):
                j = active[y]
                cand_loss = tracker.candidate_loss(i, j)
                gain = (cand_loss - cur_loss) + row[j]
                if gain <= 0.0:
                    continue
                key = (low[i], low[j]) if low[i] < low[j] else (low[j], low[i])
                if best is None or gain > best_gain or (gain == best_gain and key < best_key):
                    best, best_gain, best_key, best_loss = (i, j), float(gain), key, cand_loss
        if best is None:
            break
        i, j = best
        tracker.apply(i, j)
        cur_loss = best_loss
        groups[i].extend(groups[j])
        del groups[j]
        low[i] = min(low[i], low[j])
        cross[i, :] += cross[j, :]
        cross[:, i] += cross[:, j]
        cross[i, i] = 0.0
    y_star = Partition([members[k] for k in g] for g in groups.values())
    hinge = LOSSES[loss](truth, y_star) + float(w @ (joint_feature_map(scene, y_star) - psi_truth))
    if hinge < 0.0:
        return truth, 0.0
    return y_star, hinge


class _StepInfo(NamedTuple):
    iteration: int
    block: int
    hinge: float
    gamma: float


class _BcfwState:
    __slots__ = ("w", "block_w", "block_l", "l", "iterations")

    def __init__(self):
        self.w = np.zeros(WEIGHT_DIM)
        self.block_w: list[np.ndarray] = []
        self.block_l: list[float] = []
        self.l = 0.0
        self.iterations = 0

    def add_block(self, w=None, l: float = 0.0) -> None:
        block = np.zeros(WEIGHT_DIM) if w is None else np.array(w, dtype=float)
        self.block_w.append(block)
        self.block_l.append(float(l))

    def to_model(self, config: TrainConfig, mode: str, snapshot: dict | None) -> Model:
        return Model(
            w=self.w.copy(),
            block_w=np.vstack(self.block_w) if self.block_w else None,
            block_l=list(self.block_l),
            l=self.l,
            C=config.C,
            seed=config.seed,
            loss=config.loss,
            mode=mode,
            iterations=self.iterations,
            config_snapshot=snapshot,
        )


def _bcfw_step(
    state: _BcfwState,
    examples: list[TrainingExample],
    base_psi: list[np.ndarray],
    i: int,
    config: TrainConfig,
) -> _StepInfo:
    """One Frank-Wolfe block update on example i; returns the logged quantities."""
    n = len(examples)
    example = examples[i]
    y_star, hinge = loss_augmented_oracle(example, state.w, loss=config.loss)
    scale = config.C / n
    ws = scale * (base_psi[i] - joint_feature_map(example.scene, y_star))
    ls = scale * LOSSES[config.loss](example.truth, y_star)
    diff = state.block_w[i] - ws
    denom = float(diff @ diff)
    if denom == 0.0:
        gamma = 0.0
    else:
        gamma = (float(diff @ state.w) + scale * (ls - state.block_l[i])) / denom
        gamma = min(1.0, max(0.0, gamma))
    new_wi = (1.0 - gamma) * state.block_w[i] + gamma * ws
    new_li = (1.0 - gamma) * state.block_l[i] + gamma * ls
    state.w = state.w + (new_wi - state.block_w[i])
    state.l += new_li - state.block_l[i]
    state.block_w[i] = new_wi
    state.block_l[i] = new_li
    state.iterations += 1
    return _StepInfo(state.iterations, i, float(hinge), float(gamma))


class _TrainLog:
    """CSV writer for per-iteration rows `iter,block,hinge,gamma,objective`."""

    def __init__(self, target):
        self._own = False
        self._fh = None
        self._writer = None
        if target is None:
            return
        if hasattr(target, "write"):
            self._fh = target
        else:
            self._fh = open(Path(target), "w", encoding="utf-8", newline="")
            self._own = True
        self._writer = csv.writer(self._fh, lineterminator="\n")
        self._writer.writerow(["iter", "block", "hinge", "gamma", "objective"])

    def row(self, info: _StepInfo, objective: float | None) -> None:
        if self._writer is None:
            return
        self._writer.writerow(
            [
                info.iteration,
                info.block,
                f"{info.hinge:.9g}",
                f"{info.gamma:.9g}",
                "" if objective is None else f"{objective:.9g}",
            ]
        )

    def close(self) -> None:
        if self._own and self._fh is not None:
            self._fh.close()


def _primal(examples: list[TrainingExample], w: np.ndarray, C: float, loss: str) -> float:
    hinge_sum = 0.0
    for example in examples:
        _, hinge = loss_augmented_oracle(example, w, loss=loss)
        hinge_sum += hinge
    return 0.5 * float(w @ w) + (C / len(examples)) * hinge_sum


def primal_objective(examples: Iterable[TrainingExample], model: Model) -> float:
    """0.5 ||w||^2 + (C/n) sum of oracle hinge values."""
    examples = list(examples)
    if not examples:
        raise ConfigError("primal objective needs at least one example")
    return _primal(examples, model.w, model.C, model.loss)


def bcfw_train(
    examples: Iterable[TrainingExample],
    config: TrainConfig | None = None,
    *,
    log=None,
    iteration_hook=None,
    config_snapshot: dict | None = None,
) -> Model:
    """Batch Block-Coordinate Frank-Wolfe over the given examples.

    Picks a uniformly random block per iteration from a generator seeded with
    config.seed, runs config.max_iterations updates (optionally stopping early
    when the primal objective stalls), and returns the trained model.
    iteration_hook(state, info), when given, observes every update in place.
    """
    config = config or TrainConfig()
    examples = list(examples)
    if not examples:
        raise ConfigError("training requires at least one example")
    n = len(examples)
    rng = np.random.default_rng(config.seed)
    state = _BcfwState()
    for _ in range(n):
        state.add_block()
    base_psi = [joint_feature_map(ex.scene, ex.truth) for ex in examples]
    train_log = _TrainLog(log)
    best_objective = np.inf
    stall = 0
    try:
        for _ in range(config.max_iterations):
            i = int(rng.integers(n))
            info = _bcfw_step(state, examples, base_psi, i, config)
            objective = None
            want_objective = config.early_stop or (
                config.objective_every and info.iteration % config.objective_every == 0
            )
            if want_objective:
                objective = _primal(examples, state.w, config.C, config.loss)
            train_log.row(info, objective)
            if iteration_hook is not None:
                iteration_hook(state, info)
            if config.early_stop and objective is not None:
                if objective < best_objective - config.early_stop_tol:
                    best_objective = objective
                    stall = 0
                else:
                    stall += 1
                    if stall >= config.early_stop_patience:
                        logger.info(
                            "early stop after %d iterations (objective stalled at %.6g)",
                            info.iteration, objective,
                        )
                        break
    finally:
        train_log.close()
    return state.to_model(config, "batch", config_snapshot)


def sequential_train(
    stream: Iterable[TrainingExample],
    config: TrainConfig | None = None,
    *,
    log=None,
    config_snapshot: dict | None = None,
) -> Iterator[Model]:
    """Feed examples in arrival order, spending config.sequential_budget BCFW
    iterations over all blocks seen so far per arrival; yields a model snapshot
    after each example."""
    config = config or TrainConfig()
    rng = np.random.default_rng(config.seed)
    state = _BcfwState()
    examples: list[TrainingExample] = []
    base_psi: list[np.ndarray] = []
    train_log = _TrainLog(log)
    try:
        for example in stream:
            examples.append(example)
            base_psi.append(joint_feature_map(example.scene, example.truth))
            state.add_block()
            for _ in range(config.sequential_budget):
                i = int(rng.integers(len(examples)))
                info = _bcfw_step(state, examples, base_psi, i, config)
                train_log.row(info, None)
            yield state.to_model(config, "sequential", config_snapshot)
    finally:
        train_log.close()


def predict(scene: WindowedScene, model) -> Partition:
    """Greedy correlation clustering under the model's (or raw vector's) weights."""
    w = model.w if isinstance(model, Model) else np.asarray(model, dtype=float)
    part, _ = greedy_cc(affinity(scene, w))
    return part


def online_predict_train(
    scenes: Iterable[WindowedScene],
    init: Model,
    config: TrainConfig | None = None,
) -> Iterator[tuple[Partition, Model]]:
    """Predict each scene, then learn from the prediction as a pseudo-label.

    Each scene gets a fresh single-block state initialized at the current w and
    config.online_budget BCFW iterations; the small budget keeps per-scene
    drift bounded. Yields (prediction, updated model) per scene.
    """
    if config is None:
        config = TrainConfig(C=init.C, seed=init.seed, loss=init.loss)
    rng = np.random.default_rng(config.seed)
    w = init.w.copy()
    iterations = init.iterations
    for scene in scenes:
        prediction = predict(scene, w)
        example = TrainingExample(scene, prediction)
        state = _BcfwState()
        state.w = w.copy()
        state.add_block(w=w.copy(), l=0.0)
        state.l = 0.0
        base_psi = [joint_feature_map(scene, prediction)]
        for _ in range(config.online_budget):
            i = int(rng.integers(1))
            _bcfw_step(state, [example], base_psi, i, config)
        w = state.w.copy()
        iterations += config.online_budget
        model = state.to_model(config, "online", dict(init.config_snapshot))
        model.iterations = iterations
        yield prediction, model


def make_training_examples(
    windows,
    labels,
    configs: FeatureConfigs | None = None,
    scenes: Iterable[WindowedScene] | None = None,
) -> list[TrainingExample]:
    """Pair windows (or prebuilt scenes) with their restricted ground truth,
    skipping empty windows."""
    from .features import build_scene
    from .trajectories import window_ground_truth

    if scenes is None:
        scenes = [build_scene(w, configs) for w in windows if w.members]
    out = []
    for scene in scenes:
        truth = window_ground_truth(scene.window, labels)
        out.append(TrainingExample(scene, truth))
    return out
