"""Trajectory containers, dataset parsing, windowing, and scene statistics."""

from __future__ import annotations

import math

import numpy as np
import pytest

from crowdgroups import (
    ConfigError,
    DataError,
    DegenerateProjectionError,
    GroundTruthLabels,
    Homography,
    Partition,
    Trajectory,
    TrajectoryParseError,
    apply_homography,
    load_dataset,
    load_ground_truth,
    load_homography,
    load_trajectories,
    parse_descriptor,
    restrict_labels,
    scene_stats,
    slice_windows,
    window_ground_truth,
)


def make_traj(ped, times, xy=None):
    times = np.asarray(times, dtype=float)
    if xy is None:
        xy = np.column_stack([times, np.zeros_like(times)])
    return Trajectory(ped, times, np.asarray(xy, dtype=float))


# ---------------------------------------------------------------------------
# Trajectory


def test_trajectory_requires_increasing_times():
    with pytest.raises(DataError):
        make_traj(1, [0.0, 1.0, 1.0])
    with pytest.raises(DataError):
        make_traj(1, [2.0, 1.0])


def test_trajectory_rejects_non_finite():
    with pytest.raises(DataError):
        Trajectory(1, np.array([0.0, 1.0]), np.array([[0.0, 0.0], [np.nan, 1.0]]))
    with pytest.raises(DataError):
        Trajectory(1, np.array([0.0, np.inf]), np.zeros((2, 2)))


def test_trajectory_arrays_read_only():
    tr = make_traj(1, [0.0, 1.0, 2.0])
    with pytest.raises(ValueError):
        tr.times[0] = 5.0
    with pytest.raises(ValueError):
        tr.points[0, 0] = 5.0


def test_between_half_open():
    tr = make_traj(1, [0.0, 1.0, 2.0, 3.0])
    seg = tr.between(1.0, 3.0)
    assert seg.times.tolist() == [1.0, 2.0]
    assert seg.pedestrian_id == 1
    with pytest.raises(ValueError):
        tr.between(10.0, 20.0)


def test_trajectory_span_properties():
    tr = make_traj(4, [0.5, 1.5, 2.5])
    assert tr.start_t == 0.5
    assert tr.end_t == 2.5


# ---------------------------------------------------------------------------
# Homography


def test_apply_homography_identity_and_scale():
    ident = Homography.identity()
    assert np.allclose(apply_homography(ident, (1.0, 2.0)), [1.0, 2.0])
    scale = Homography(np.diag([2.0, 3.0, 1.0]))
    assert np.allclose(apply_homography(scale, (1.0, 2.0)), [2.0, 6.0])


def test_apply_homography_perspective_divide():
    h = Homography(np.array([[1.0, 0, 0], [0, 1.0, 0], [0, 0, 2.0]]))
    assert np.allclose(apply_homography(h, (4.0, 8.0)), [2.0, 4.0])


def test_apply_homography_degenerate_point():
    # invertible but sends x = -1 to homogeneous w = 0
    h = Homography(np.array([[1.0, 0, 0], [0, 1.0, 0], [1.0, 0, 1.0]]))
    assert np.allclose(apply_homography(h, (1.0, 3.0)), [0.5, 1.5])
    with pytest.raises(DegenerateProjectionError):
        apply_homography(h, (-1.0, 3.0))


def test_singular_homography_rejected():
    with pytest.raises(DataError):
        Homography(np.ones((3, 3)))
    with pytest.raises(ValueError):
        Homography(np.eye(4))


# ---------------------------------------------------------------------------
# File parsing


def test_load_trajectories_basic(tmp_path):
    f = tmp_path / "trajectories.txt"
    f.write_text(
        "# frame id x y\n"
        "0 1 0.0 0.0\n"
        "1 1 1.0 0.5\n"
        "0 2 5.0 5.0\n"
        "\n"
        "2 1 2.0 1.0\n"
    )
    trajs = load_trajectories(f, fps=2.0)
    assert [t.pedestrian_id for t in trajs] == [1, 2]
    assert trajs[0].times.tolist() == [0.0, 0.5, 1.0]
    assert trajs[0].points[1].tolist() == [1.0, 0.5]


def test_load_trajectories_field_count_error(tmp_path):
    f = tmp_path / "trajectories.txt"
    f.write_text("0 1 0.0\n")
    with pytest.raises(TrajectoryParseError) as err:
        load_trajectories(f)
    assert ":1" in str(err.value)


def test_load_trajectories_duplicate_sample(tmp_path):
    f = tmp_path / "trajectories.txt"
    f.write_text("0 1 0.0 0.0\n0 1 1.0 1.0\n")
    with pytest.raises(DataError):
        load_trajectories(f)


def test_load_trajectories_bad_number(tmp_path):
    f = tmp_path / "trajectories.txt"
    f.write_text("0 1 zero 0.0\n")
    with pytest.raises(TrajectoryParseError):
        load_trajectories(f)


def test_load_homography(tmp_path):
    f = tmp_path / "H.txt"
    f.write_text("2 0 0\n0 2 0\n0 0 1\n")
    h = load_homography(f)
    assert np.allclose(h.h, np.diag([2.0, 2.0, 1.0]))
    f.write_text("1 2 3 4\n")
    with pytest.raises(TrajectoryParseError):
        load_homography(f)


def test_load_ground_truth(tmp_path):
    f = tmp_path / "groups.txt"
    f.write_text("# groups\n1 2 3\n4 5\n")
    labels = load_ground_truth(f)
    assert labels.groups == (frozenset({1, 2, 3}), frozenset({4, 5}))
    assert labels.group_index(4) == labels.group_index(5)
    assert labels.group_index(9) is None


def test_load_ground_truth_ignores_singleton_lines(tmp_path):
    f = tmp_path / "groups.txt"
    f.write_text("7\n1 2\n")
    labels = load_ground_truth(f)
    assert labels.groups == (frozenset({1, 2}),)


def test_load_ground_truth_duplicate_member(tmp_path):
    f = tmp_path / "groups.txt"
    f.write_text("1 2\n2 3\n")
    with pytest.raises(DataError):
        load_ground_truth(f)
    f.write_text("1 1 2\n")
    with pytest.raises(DataError):
        load_ground_truth(f)


def test_parse_descriptor(tmp_path):
    f = tmp_path / "descriptor.txt"
    f.write_text("# meta\nfps = 2.5\nunits meters\n")
    d = parse_descriptor(f)
    assert d["fps"] == "2.5"
    assert d["units"] == "meters"
    f.write_text("fps = 1\nfps = 2\n")
    with pytest.raises(TrajectoryParseError):
        parse_descriptor(f)


def test_load_dataset_defaults(tmp_path):
    (tmp_path / "trajectories.txt").write_text("0 1 0.0 0.0\n1 1 1.0 0.0\n")
    ds = load_dataset(tmp_path)
    assert ds.fps == 1.0
    assert ds.units == "meters"
    assert ds.labels is None
    assert len(ds.trajectories) == 1


def test_load_dataset_missing_trajectories(tmp_path):
    with pytest.raises(DataError):
        load_dataset(tmp_path)


def test_load_dataset_pixels_requires_homography(tmp_path):
    (tmp_path / "trajectories.txt").write_text("0 1 10 10\n1 1 20 10\n")
    (tmp_path / "descriptor.txt").write_text("units = pixels\n")
    with pytest.raises(ConfigError):
        load_dataset(tmp_path)
    (tmp_path / "descriptor.txt").write_text("units = pixels\nhomography = H.txt\n")
    (tmp_path / "H.txt").write_text("0.5 0 0\n0 0.5 0\n0 0 1\n")
    ds = load_dataset(tmp_path)
    assert np.allclose(ds.trajectories[0].points, [[5.0, 5.0], [10.0, 5.0]])


# ---------------------------------------------------------------------------
# Windowing


def test_slice_windows_exact_tiling():
    # spans [0, 30) at 10 Hz: windows of 10 s at stride 10 tile it three times
    times = np.arange(0.0, 30.0, 0.1)
    trajs = [make_traj(1, times)]
    windows = slice_windows(trajs, 10.0, 10.0)
    assert len(windows) == 3
    assert [w.start_t for w in windows] == [0.0, 10.0, 20.0]
    assert all(w.members == frozenset({1}) for w in windows)


def test_slice_windows_overlapping_stride():
    times = np.arange(0.0, 20.0, 0.1)
    trajs = [make_traj(2, times)]
    windows = slice_windows(trajs, 10.0, 5.0)
    assert [w.start_t for w in windows] == [0.0, 5.0, 10.0]


def test_slice_windows_validation():
    trajs = [make_traj(1, [0.0, 1.0])]
    with pytest.raises(ConfigError):
        slice_windows(trajs, 0.0, 1.0)
    with pytest.raises(ConfigError):
        slice_windows(trajs, 1.0, -1.0)


def test_slice_windows_drops_single_sample_members():
    a = make_traj(1, np.arange(0.0, 10.0))
    b = make_traj(2, [4.0])  # one sample only
    windows = slice_windows([a, b], 10.0, 10.0)
    assert len(windows) == 1
    assert windows[0].members == frozenset({1})
    assert windows[0].dropped == frozenset({2})


def test_slice_windows_segments_match_members():
    a = make_traj(1, np.arange(0.0, 20.0))
    b = make_traj(2, np.arange(12.0, 20.0))
    windows = slice_windows([a, b], 10.0, 10.0)
    assert windows[0].members == frozenset({1})
    assert windows[1].members == frozenset({1, 2})
    seg = windows[1].segments[2]
    assert seg.start_t >= 10.0
    assert seg.end_t < 20.0 + 1e-9


def test_window_ground_truth_restriction():
    a = make_traj(1, np.arange(0.0, 10.0))
    b = make_traj(2, np.arange(0.0, 10.0))
    c = make_traj(4, np.arange(0.0, 10.0))
    labels = GroundTruthLabels([{1, 2, 3}, {5, 6}])
    window = slice_windows([a, b, c], 10.0, 10.0)[0]
    truth = window_ground_truth(window, labels)
    assert truth == Partition([[1, 2], [4]])


def test_restrict_labels_all_singletons():
    labels = GroundTruthLabels([{1, 2}])
    assert restrict_labels({3, 4}, labels) == Partition([[3], [4]])


# ---------------------------------------------------------------------------
# Scene statistics


def test_scene_stats_hand_case():
    # two mates 1 m apart, one singleton exactly 2 m from each, two frames
    y = math.sqrt(4.0 - 0.25)
    times = [0.0, 1.0]
    a = make_traj(1, times, [[0.0, 0.0], [0.0, 0.0]])
    b = make_traj(2, times, [[1.0, 0.0], [1.0, 0.0]])
    c = make_traj(3, times, [[0.5, y], [0.5, y]])
    labels = GroundTruthLabels([{1, 2}])
    windows = slice_windows([a, b, c], 2.0, 2.0)
    stats = scene_stats(windows, labels)
    assert stats.d_in == pytest.approx(1.0)
    assert stats.d_out == pytest.approx(2.0)
    assert stats.d_io == pytest.approx(0.5)


def test_scene_stats_no_groups():
    a = make_traj(1, [0.0, 1.0], [[0.0, 0.0], [0.0, 0.0]])
    b = make_traj(2, [0.0, 1.0], [[3.0, 0.0], [3.0, 0.0]])
    labels = GroundTruthLabels([])
    stats = scene_stats(slice_windows([a, b], 2.0, 2.0), labels)
    assert stats.d_in is None
    assert stats.d_io is None
    assert stats.d_out == pytest.approx(3.0)


def test_scene_stats_no_unrelated():
    a = make_traj(1, [0.0, 1.0], [[0.0, 0.0], [0.0, 0.0]])
    b = make_traj(2, [0.0, 1.0], [[2.0, 0.0], [2.0, 0.0]])
    labels = GroundTruthLabels([{1, 2}])
    stats = scene_stats(slice_windows([a, b], 2.0, 2.0), labels)
    assert stats.d_in == pytest.approx(2.0)
    assert stats.d_out is None
    assert stats.d_io is None


def test_scene_stats_requires_windows():
    with pytest.raises(ValueError):
        scene_stats([], GroundTruthLabels([]))
