"""Synthetic crowd scenes with known group structure.

Each group follows one leader on a smooth goal-seeking walk; members replay
the leader's displacements with a configurable time lag from fixed formation
offsets, so grouped trajectories carry a planted directional dependence on
top of spatial closeness and shape similarity. Singletons walk independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .trajectories import (
    DESCRIPTOR_FILE,
    GROUNDTRUTH_FILE,
    TRAJECTORY_FILE,
    GroundTruthLabels,
    Trajectory,
)

_FORMATION_UNIT = ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0))
_BEHAVIORS = ("parallel", "converging")


@dataclass(frozen=True)
class SynthSpec:
    """Shape of a generated scene. Distances in meters, durations in seconds."""

    n_groups: int = 4
    group_size_min: int = 2
    group_size_max: int = 4
    n_singletons: int = 6
    spacing: float = 0.6
    extent: float = 30.0
    duration: float = 200.0
    fps: float = 2.5
    lag: int = 1
    noise_std: float = 0.05
    behavior: str = "parallel"
    speed: float = 1.2
    wander_std: float = 0.25

    def __post_init__(self):
        if self.n_groups < 0 or self.n_singletons < 0:
            raise ConfigError("counts must be non-negative")
        if not 2 <= self.group_size_min <= self.group_size_max <= len(_FORMATION_UNIT):
            raise ConfigError(
                f"group sizes must satisfy 2 <= min <= max <= {len(_FORMATION_UNIT)}"
            )
        if self.spacing <= 0 or self.extent <= 0 or self.duration <= 0:
            raise ConfigError("spacing, extent, and duration must be positive")
        if self.fps <= 0 or self.speed <= 0:
            raise ConfigError("fps and speed must be positive")
        if self.lag < 0:
            raise ConfigError("lag must be >= 0")
        if self.noise_std < 0 or self.wander_std < 0:
            raise ConfigError("noise levels must be non-negative")
        if self.behavior not in _BEHAVIORS:
            raise ConfigError(f"behavior must be one of {_BEHAVIORS}")


def _leader_walk(
    rng: np.random.Generator, spec: SynthSpec, start: np.ndarray, n_steps: int, dt: float
) -> np.ndarray:
    """Goal-seeking walk: constant-speed heading with small seeded innovations,
    softly reflected off the area bounds."""
    heading = rng.uniform(0.0, 2.0 * math.pi)
    pos = start.astype(float).copy()
    out = np.empty((n_steps, 2))
    margin = 2.0
    step_std = spec.wander_std * math.sqrt(dt)
    for k in range(n_steps):
        out[k] = pos
        heading += rng.normal(0.0, step_std)
        step = spec.speed * dt * np.array([math.cos(heading), math.sin(heading)])
        nxt = pos + step
        for axis in range(2):
            if nxt[axis] < margin:
                nxt[axis] = margin + (margin - nxt[axis])
                heading = math.pi - heading if axis == 0 else -heading
            hi = spec.extent - margin
            if nxt[axis] > hi:
                nxt[axis] = hi - (nxt[axis] - hi)
                heading = math.pi - heading if axis == 0 else -heading
        pos = nxt
    return out


def _sample_starts(
    rng: np.random.Generator, spec: SynthSpec, count: int, min_gap: float
) -> np.ndarray:
    """Rejection-sample `count` points inside the walkable area, pairwise at
    least min_gap apart; the gap halves when the area is too crowded for it."""
    margin = 2.0
    lo, hi = margin, spec.extent - margin
    if hi <= lo:
        raise ConfigError("extent too small for the walk margin")
    gap = min_gap
    while True:
        starts: list[np.ndarray] = []
        ok = True
        for _ in range(count):
            for _attempt in range(2_000):
                p = rng.uniform(lo, hi, size=2)
                if all(float(np.hypot(*(p - q))) >= gap for q in starts):
                    starts.append(p)
                    break
            else:
                ok = False
                break
        if ok:
            return np.asarray(starts)
        gap *= 0.5
        if gap < 0.25:
            raise ConfigError(
                f"could not place {count} starts in extent {spec.extent}"
            )


def synth_generate(
    spec: SynthSpec | None = None, seed: int = 0
) -> tuple[list[Trajectory], GroundTruthLabels]:
    """Generate one scene: trajectories for every pedestrian plus the labels.

    Group members follow the leader's displacement sequence delayed by
    spec.lag samples (the leader itself at lag 0), offset on a spacing-scaled
    formation lattice, with per-sample Gaussian jitter. "converging" starts
    members dispersed around their slot and decays the extra offset toward the
    formation over the first quarter of the sequence.
    """
    spec = spec or SynthSpec()
    rng = np.random.default_rng(seed)
    n_steps = int(round(spec.duration * spec.fps))
    if n_steps < spec.lag + 2:
        raise ConfigError("duration too short for the configured lag")
    dt = 1.0 / spec.fps
    times = np.arange(n_steps) * dt

    sizes = [
        int(rng.integers(spec.group_size_min, spec.group_size_max + 1))
        for _ in range(spec.n_groups)
    ]
    starts = _sample_starts(rng, spec, spec.n_groups + spec.n_singletons, min_gap=6.0)

    trajectories: list[Trajectory] = []
    groups: list[frozenset[int]] = []
    next_id = 1
    for g in range(spec.n_groups):
        leader_path = _leader_walk(rng, spec, starts[g], n_steps, dt)
        displacements = np.diff(leader_path, axis=0)
        member_ids = []
        for slot in range(sizes[g]):
            offset = spec.spacing * np.asarray(_FORMATION_UNIT[slot])
            # Replay the leader's moves delayed by `lag` samples: position k
            # accumulates displacements up to k - lag.
            shifted = np.zeros_like(leader_path)
            shifted[0] = leader_path[0]
            for k in range(1, n_steps):
                src = k - (spec.lag if slot > 0 else 0)
                shifted[k] = shifted[k - 1] + (displacements[src - 1] if src >= 1 else 0.0)
            path = shifted + offset
            if spec.behavior == "converging" and slot > 0:
                scatter = rng.uniform(2.0, 4.0, size=2) * rng.choice((-1.0, 1.0), size=2)
                decay = np.exp(-times / (spec.duration / 4.0))[:, None]
                path = path + scatter * decay
            path = path + rng.normal(0.0, spec.noise_std, size=path.shape)
            np.clip(path, 0.0, spec.extent, out=path)
            trajectories.append(Trajectory(next_id, times.copy(), path))
            member_ids.append(next_id)
            next_id += 1
        groups.append(frozenset(member_ids))
    for s in range(spec.n_singletons):
        path = _leader_walk(rng, spec, starts[spec.n_groups + s], n_steps, dt)
        path = path + rng.normal(0.0, spec.noise_std, size=path.shape)
        np.clip(path, 0.0, spec.extent, out=path)
        trajectories.append(Trajectory(next_id, times.copy(), path))
        next_id += 1

    return trajectories, GroundTruthLabels(groups)


def write_dataset(
    directory,
    trajectories: list[Trajectory],
    labels: GroundTruthLabels | None,
    fps: float,
    seed: int | None = None,
) -> None:
    """Write a loadable dataset directory: trajectory rows `frame ped x y`
    (frame = round(t * fps)), one group per line, and a descriptor."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = []
    for traj in trajectories:
        for t, (x, y) in zip(traj.times, traj.points):
            frame = int(round(float(t) * fps))
            lines.append(f"{frame} {traj.pedestrian_id} {x:.6f} {y:.6f}")
    (directory / TRAJECTORY_FILE).write_text("\n".join(lines) + "\n", encoding="utf-8")
    if labels is not None:
        group_lines = [" ".join(str(m) for m in sorted(g)) for g in labels.groups]
        (directory / GROUNDTRUTH_FILE).write_text(
            "\n".join(group_lines) + ("\n" if group_lines else ""), encoding="utf-8"
        )
    descriptor = [f"fps = {fps:g}", "units = meters"]
    if seed is not None:
        descriptor.append(f"seed = {seed}")
    (directory / DESCRIPTOR_FILE).write_text("\n".join(descriptor) + "\n", encoding="utf-8")
