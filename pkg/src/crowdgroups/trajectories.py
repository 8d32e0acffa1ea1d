"""Trajectory ingestion, ground-plane projection, time windowing, scene statistics.

Positions are carried in meters on the ground plane; time is carried in
seconds. Frame-indexed files are converted with the dataset frame rate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    DegenerateProjectionError,
    TrajectoryParseError,
)
from .partitioning import Partition

logger = logging.getLogger(__name__)

TRAJECTORY_FILE = "trajectories.txt"
GROUNDTRUTH_FILE = "groups.txt"
DESCRIPTOR_FILE = "descriptor.txt"

# A sample is treated as occupying one frame period when tiling windows, so
# the usable span ends one median inter-sample gap after the last timestamp.
_SPAN_EPS = 1e-9
_HOMOGRAPHY_DET_EPS = 1e-12
_PROJECTION_W_EPS = 1e-9


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.ascontiguousarray(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-stamped ground-plane path of one pedestrian.

    times: (n,) seconds, strictly increasing. points: (n, 2) meters.
    """

    pedestrian_id: int
    times: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        times = _frozen_array(self.times)
        points = _frozen_array(self.points)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "points", points)
        if times.ndim != 1 or times.size < 1:
            raise ValueError("a trajectory needs at least one (t, p) sample")
        if points.shape != (times.size, 2):
            raise ValueError(
                f"points shape {points.shape} does not match {times.size} timestamps"
            )
        if not np.all(np.isfinite(times)) or not np.all(np.isfinite(points)):
            raise DataError(
                f"pedestrian {self.pedestrian_id}: non-finite sample values"
            )
        if np.any(np.diff(times) <= 0):
            raise DataError(
                f"pedestrian {self.pedestrian_id}: timestamps must be strictly increasing"
            )

    def __len__(self) -> int:
        return int(self.times.size)

    @property
    def start_t(self) -> float:
        return float(self.times[0])

    @property
    def end_t(self) -> float:
        return float(self.times[-1])

    def between(self, start_t: float, end_t: float) -> "Trajectory":
        """Samples with t in [start_t, end_t); raises ValueError when none fall inside."""
        i0 = int(np.searchsorted(self.times, start_t, side="left"))
        i1 = int(np.searchsorted(self.times, end_t, side="left"))
        if i1 <= i0:
            raise ValueError(
                f"pedestrian {self.pedestrian_id} has no samples in [{start_t}, {end_t})"
            )
        return Trajectory(self.pedestrian_id, self.times[i0:i1], self.points[i0:i1])


@dataclass(frozen=True, eq=False)
class Homography:
    """3x3 invertible plane projection, row-major."""

    h: np.ndarray

    def __post_init__(self):
        h = _frozen_array(self.h)
        object.__setattr__(self, "h", h)
        if h.shape != (3, 3):
            raise ValueError(f"homography must be 3x3, got {h.shape}")
        if abs(float(np.linalg.det(h))) < _HOMOGRAPHY_DET_EPS:
            raise DataError("homography matrix is singular")

    @classmethod
    def identity(cls) -> "Homography":
        return cls(np.eye(3))


@dataclass(frozen=True, eq=False)
class TimeWindow:
    """One time slice: members with >= 2 in-window samples and their segments."""

    index: int
    start_t: float
    end_t: float
    members: frozenset[int]
    segments: Mapping[int, Trajectory]
    dropped: frozenset[int] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "members", frozenset(self.members))
        object.__setattr__(self, "dropped", frozenset(self.dropped))
        object.__setattr__(self, "segments", MappingProxyType(dict(self.segments)))
        if set(self.segments) != set(self.members):
            raise ValueError("segments must cover exactly the window members")


@dataclass(frozen=True, eq=False)
class GroundTruthLabels:
    """Sequence-global social groups; every unlisted pedestrian is a singleton."""

    groups: tuple[frozenset[int], ...]

    def __post_init__(self):
        groups = tuple(frozenset(g) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        seen: set[int] = set()
        for g in groups:
            if len(g) < 2:
                raise ValueError("ground-truth groups must have at least 2 members")
            if seen & g:
                raise ValueError("ground-truth groups must be disjoint")
            seen |= g

    @property
    def members(self) -> frozenset[int]:
        out: set[int] = set()
        for g in self.groups:
            out |= g
        return frozenset(out)

    def group_index(self, pedestrian_id: int) -> int | None:
        for k, g in enumerate(self.groups):
            if pedestrian_id in g:
                return k
        return None


@dataclass(frozen=True)
class SceneStats:
    """Crowd sociality statistics; a field is None when its defining set is empty."""

    d_in: float | None
    d_out: float | None
    d_io: float | None


def apply_homography(homography: Homography, point) -> np.ndarray:
    """Project one 2-D point through the homography with perspective divide."""
    x, y = float(point[0]), float(point[1])
    xp, yp, wp = homography.h @ (x, y, 1.0)
    if abs(wp) < _PROJECTION_W_EPS:
        raise DegenerateProjectionError(
            f"homogeneous coordinate vanished while projecting ({x}, {y})"
        )
    return np.array([xp / wp, yp / wp])


def _project_points(homography: Homography, points: np.ndarray) -> np.ndarray:
    ones = np.ones((points.shape[0], 1))
    hom = np.hstack([points, ones]) @ homography.h.T
    w = hom[:, 2]
    if np.any(np.abs(w) < _PROJECTION_W_EPS):
        bad = points[np.abs(w) < _PROJECTION_W_EPS][0]
        raise DegenerateProjectionError(
            f"homogeneous coordinate vanished while projecting ({bad[0]}, {bad[1]})"
        )
    return hom[:, :2] / w[:, None]


def load_trajectories(path, homography: Homography | None = None, fps: float = 1.0) -> list[Trajectory]:
    """Parse a trajectory file: `<frame> <ped_id> <x> <y>` per line, `#` comments.

    Timestamps become frame/fps seconds; positions are projected through the
    homography when one is given (pixel-unit files require one).
    """
    if fps <= 0:
        raise ConfigError(f"fps must be positive, got {fps}")
    path = Path(path)
    samples: dict[int, dict[float, tuple[float, float]]] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split()
            if len(parts) != 4:
                raise TrajectoryParseError(
                    f"{path}:{lineno}: expected 4 fields `frame id x y`, got {len(parts)}"
                )
            try:
                frame = float(parts[0])
                ped = int(float(parts[1]))
                x = float(parts[2])
                y = float(parts[3])
            except ValueError as exc:
                raise TrajectoryParseError(f"{path}:{lineno}: {exc}") from None
            t = frame / fps
            per_ped = samples.setdefault(ped, {})
            if t in per_ped:
                raise DataError(
                    f"{path}:{lineno}: duplicate sample for pedestrian {ped} at frame {parts[0]}"
                )
            per_ped[t] = (x, y)
    trajectories = []
    for ped in sorted(samples):
        times = np.array(sorted(samples[ped]))
        points = np.array([samples[ped][t] for t in times])
        if homography is not None:
            points = _project_points(homography, points)
        trajectories.append(Trajectory(ped, times, points))
    return trajectories


def load_homography(path) -> Homography:
    """Read 9 whitespace-separated floats as a row-major 3x3 matrix."""
    path = Path(path)
    tokens = path.read_text(encoding="utf-8").split()
    if len(tokens) != 9:
        raise TrajectoryParseError(f"{path}: expected 9 floats, got {len(tokens)}")
    try:
        values = [float(tok) for tok in tokens]
    except ValueError as exc:
        raise TrajectoryParseError(f"{path}: {exc}") from None
    return Homography(np.array(values).reshape(3, 3))


def load_ground_truth(path) -> GroundTruthLabels:
    """Read one group per line (whitespace-separated ids); size-1 lines are ignored."""
    path = Path(path)
    groups: list[frozenset[int]] = []
    seen: set[int] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            try:
                ids = [int(float(tok)) for tok in text.split()]
            except ValueError as exc:
                raise TrajectoryParseError(f"{path}:{lineno}: {exc}") from None
            if len(set(ids)) != len(ids):
                raise DataError(f"{path}:{lineno}: repeated id within a group")
            if set(ids) & seen:
                raise DataError(f"{path}:{lineno}: id already assigned to another group")
            seen |= set(ids)
            if len(ids) < 2:
                logger.info("%s:%d: single-id group line ignored (singleton)", path, lineno)
                continue
            groups.append(frozenset(ids))
    return GroundTruthLabels(tuple(groups))


def parse_descriptor(path) -> dict[str, str]:
    """Read `key = value` (or `key value`) lines describing a dataset."""
    path = Path(path)
    out: dict[str, str] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            if "=" in text:
                key, _, value = text.partition("=")
            else:
                key, _, value = text.partition(" ")
            key = key.strip()
            value = value.strip().strip('"')
            if not key or not value:
                raise TrajectoryParseError(f"{path}:{lineno}: expected `key = value`")
            if key in out:
                raise TrajectoryParseError(f"{path}:{lineno}: duplicate key {key!r}")
            out[key] = value
    return out


@dataclass(frozen=True, eq=False)
class Dataset:
    trajectories: list[Trajectory]
    labels: GroundTruthLabels | None
    fps: float
    units: str
    descriptor: Mapping[str, str]


def load_dataset(directory) -> Dataset:
    """Load a dataset directory: trajectories.txt, optional groups.txt + descriptor.txt.

    The descriptor supplies `fps` (default 1), `units` (meters|pixels, default
    meters) and, for pixel units, the `homography` file path.
    """
    directory = Path(directory)
    traj_path = directory / TRAJECTORY_FILE
    if not traj_path.is_file():
        raise DataError(f"{directory}: missing {TRAJECTORY_FILE}")
    descriptor: dict[str, str] = {}
    desc_path = directory / DESCRIPTOR_FILE
    if desc_path.is_file():
        descriptor = parse_descriptor(desc_path)
    try:
        fps = float(descriptor.get("fps", "1"))
    except ValueError:
        raise TrajectoryParseError(f"{desc_path}: fps is not a number") from None
    units = descriptor.get("units", "meters")
    if units not in ("meters", "pixels"):
        raise ConfigError(f"{desc_path}: units must be meters or pixels, got {units!r}")
    homography = None
    if units == "pixels":
        if "homography" not in descriptor:
            raise ConfigError(f"{desc_path}: pixel units require a homography path")
        homography = load_homography(directory / descriptor["homography"])
    trajectories = load_trajectories(traj_path, homography=homography, fps=fps)
    labels = None
    gt_path = directory / GROUNDTRUTH_FILE
    if gt_path.is_file():
        labels = load_ground_truth(gt_path)
    return Dataset(trajectories, labels, fps, units, MappingProxyType(descriptor))


def slice_windows(trajectories: Iterable[Trajectory], window_len: float, stride: float) -> list[TimeWindow]:
    """Tile the covered time span into [start, start+window_len) windows.

    A window is emitted only when fully inside the span (each sample counts as
    occupying one median frame period). Members with fewer than 2 in-window
    samples are excluded and recorded in `dropped`.
    """
    if window_len <= 0:
        raise ConfigError(f"window_len must be positive, got {window_len}")
    if stride <= 0:
        raise ConfigError(f"stride must be positive, got {stride}")
    trajectories = list(trajectories)
    if not trajectories:
        return []
    t_min = min(tr.start_t for tr in trajectories)
    t_max = max(tr.end_t for tr in trajectories)
    gaps = np.concatenate(
        [np.diff(tr.times) for tr in trajectories if len(tr) >= 2] or [np.array([0.0])]
    )
    frame_period = float(np.median(gaps)) if gaps.size else 0.0
    span_end = t_max + frame_period
    windows: list[TimeWindow] = []
    index = 0
    while t_min + index * stride + window_len <= span_end + _SPAN_EPS:
        start = t_min + index * stride
        end = start + window_len
        segments: dict[int, Trajectory] = {}
        dropped: set[int] = set()
        for tr in trajectories:
            i0 = int(np.searchsorted(tr.times, start, side="left"))
            i1 = int(np.searchsorted(tr.times, end, side="left"))
            count = i1 - i0
            if count >= 2:
                segments[tr.pedestrian_id] = Trajectory(
                    tr.pedestrian_id, tr.times[i0:i1], tr.points[i0:i1]
                )
            elif count == 1:
                dropped.add(tr.pedestrian_id)
        if dropped:
            logger.info(
                "window %d [%g, %g): dropped %d single-sample member(s): %s",
                index, start, end, len(dropped), sorted(dropped),
            )
        windows.append(
            TimeWindow(
                index=index,
                start_t=start,
                end_t=end,
                members=frozenset(segments),
                segments=segments,
                dropped=frozenset(dropped),
            )
        )
        index += 1
    return windows


def restrict_labels(members: Iterable[int], labels: GroundTruthLabels) -> Partition:
    """Ground-truth partition over `members`: group intersections of size >= 2
    stay groups, everything else becomes a singleton."""
    members = set(members)
    clusters: list[set[int]] = []
    assigned: set[int] = set()
    for group in labels.groups:
        inter = group & members
        if len(inter) >= 2:
            clusters.append(set(inter))
            assigned |= inter
    clusters.extend({m} for m in members - assigned)
    return Partition(clusters)


def window_ground_truth(window: TimeWindow, labels: GroundTruthLabels) -> Partition:
    """Restrict sequence-global groups to the window's member set."""
    return restrict_labels(window.members, labels)


def scene_stats(windows: Iterable[TimeWindow], labels: GroundTruthLabels) -> SceneStats:
    """Group compactness d_in, isolation d_out, and their ratio d_io.

    d_in averages distances between co-present group mates per frame; d_out
    averages, per member and frame, the distance to the nearest pedestrian
    from outside the member's group.
    """
    windows = list(windows)
    if not windows:
        raise ValueError("scene_stats requires at least one window")
    intra: list[float] = []
    nearest: list[float] = []
    for window in windows:
        frames: dict[float, dict[int, np.ndarray]] = {}
        for ped, seg in window.segments.items():
            for t, p in zip(seg.times, seg.points):
                frames.setdefault(float(t), {})[ped] = p
        for present in frames.values():
            ids = sorted(present)
            for i, a in enumerate(ids):
                ga = labels.group_index(a)
                best = None
                for b in ids:
                    if b == a:
                        continue
                    dist = float(np.hypot(*(present[a] - present[b])))
                    if ga is not None and ga == labels.group_index(b):
                        if a < b:
                            intra.append(dist)
                    elif best is None or dist < best:
                        best = dist
                if best is not None:
                    nearest.append(best)
    d_in = float(np.mean(intra)) if intra else None
    d_out = float(np.mean(nearest)) if nearest else None
    d_io = d_in / d_out if d_in is not None and d_out else None
    return SceneStats(d_in=d_in, d_out=d_out, d_io=d_io)
