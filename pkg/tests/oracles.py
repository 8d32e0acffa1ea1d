"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written on a different algorithmic route from
the library: component discovery by breadth-first search instead of union-find,
set-partition enumeration by block insertion instead of restricted growth
strings, warping cost by explicit path enumeration instead of dynamic
programming, and the F distribution by direct quadrature of its density.
"""

from __future__ import annotations

import itertools
import math
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy import integrate

from crowdgroups import PairFeatures, Partition, TimeWindow, Trajectory, WindowedScene


# ---------------------------------------------------------------------------
# Spanning-component scorer (reference for gmitre_score / mitre_score)


def _bfs_components(nodes: list, edges: list[tuple]) -> list[set]:
    adj: dict = {n: set() for n in nodes}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    seen: set = set()
    components = []
    for start in nodes:
        if start in seen:
            continue
        queue = [start]
        seen.add(start)
        comp = {start}
        while queue:
            cur = queue.pop()
            for nxt in adj[cur]:
                if nxt not in seen:
                    seen.add(nxt)
                    comp.add(nxt)
                    queue.append(nxt)
        components.append(comp)
    return components


def _partition_edges(clusters: Iterable[Iterable], augmented: bool) -> tuple[list, list[tuple]]:
    nodes: list = []
    edges: list[tuple] = []
    for cluster in clusters:
        cluster = list(cluster)
        nodes.extend(cluster)
        edges.extend(zip(cluster, cluster[1:]))
        if augmented:
            for m in cluster:
                nodes.append(("fake", m))
            if len(cluster) == 1:
                edges.append((cluster[0], ("fake", cluster[0])))
    return nodes, edges


def _spanning_recall(q_clusters, r_clusters, augmented: bool) -> float:
    q_nodes, q_edges = _partition_edges(q_clusters, augmented)
    r_nodes, r_edges = _partition_edges(r_clusters, augmented)
    assert sorted(map(repr, q_nodes)) == sorted(map(repr, r_nodes))
    r_comp_of = {}
    for idx, comp in enumerate(_bfs_components(r_nodes, r_edges)):
        for n in comp:
            r_comp_of[n] = idx
    needed = 0
    missing = 0
    for comp in _bfs_components(q_nodes, q_edges):
        needed += len(comp) - 1
        missing += len({r_comp_of[n] for n in comp}) - 1
    if needed == 0:
        return 1.0
    return 1.0 - missing / needed


def spanning_score(truth_clusters, pred_clusters, augmented: bool = True):
    """(recall, precision, f1) by explicit BFS over spanning-forest graphs."""
    recall = _spanning_recall(truth_clusters, pred_clusters, augmented)
    precision = _spanning_recall(pred_clusters, truth_clusters, augmented)
    if precision + recall == 0.0:
        f1 = 0.0
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return recall, precision, f1


# ---------------------------------------------------------------------------
# Set-partition enumeration by block insertion


def iter_set_partitions(items: Sequence) -> Iterator[list[list]]:
    """All partitions of `items`, built by inserting each element into every
    existing block or a new one."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for sub in iter_set_partitions(rest):
        for k in range(len(sub)):
            yield sub[:k] + [[first] + sub[k]] + sub[k + 1 :]
        yield [[first]] + sub


def random_partition(members: Sequence[int], rng: np.random.Generator) -> Partition:
    labels = rng.integers(0, len(members), size=len(members))
    return Partition.from_labels(list(members), [int(x) for x in labels])


# ---------------------------------------------------------------------------
# DTW by monotone-path enumeration


def dtw_path_minimum(pa: np.ndarray, pb: np.ndarray) -> float:
    """Minimum cumulative squared-Euclidean cost over all monotone warping
    paths from (0,0) to (A-1,B-1), normalized by max(A, B)."""
    pa = np.asarray(pa, dtype=float)
    pb = np.asarray(pb, dtype=float)
    a, b = len(pa), len(pb)

    def cell(i: int, j: int) -> float:
        d = pa[i] - pb[j]
        return float(d @ d)

    def best_from(i: int, j: int) -> float:
        here = cell(i, j)
        if i == a - 1 and j == b - 1:
            return here
        candidates = []
        if i + 1 < a:
            candidates.append(best_from(i + 1, j))
        if j + 1 < b:
            candidates.append(best_from(i, j + 1))
        if i + 1 < a and j + 1 < b:
            candidates.append(best_from(i + 1, j + 1))
        return here + min(candidates)

    return best_from(0, 0) / max(a, b)


# ---------------------------------------------------------------------------
# F distribution by quadrature


def f_density(x: float, d1: float, d2: float) -> float:
    if x <= 0.0:
        return 0.0
    log_num = 0.5 * (d1 * math.log(d1 * x) + d2 * math.log(d2)
                     - (d1 + d2) * math.log(d1 * x + d2))
    log_beta = math.lgamma(d1 / 2) + math.lgamma(d2 / 2) - math.lgamma((d1 + d2) / 2)
    return math.exp(log_num - log_beta) / x


def f_cdf_quadrature(s: float, d1: float, d2: float) -> float:
    if s <= 0.0:
        return 0.0
    value, _err = integrate.quad(f_density, 0.0, s, args=(d1, d2), limit=200)
    return value


# ---------------------------------------------------------------------------
# Scene construction helpers


def make_scene(members: Sequence[int], d_by_pair: dict[tuple[int, int], np.ndarray]) -> WindowedScene:
    """A WindowedScene from explicit per-pair distance vectors; trajectory
    content is a placeholder (features are supplied, not computed)."""
    members = sorted(members)
    times = np.arange(2.0)
    segments = {
        m: Trajectory(m, times, np.zeros((2, 2)) + float(m)) for m in members
    }
    window = TimeWindow(0, 0.0, 2.0, frozenset(members), segments, frozenset())
    pairs = []
    for a, b in itertools.combinations(members, 2):
        pairs.append(PairFeatures((a, b), np.asarray(d_by_pair[(a, b)], dtype=float)))
    return WindowedScene(window, tuple(pairs))


def random_scene(n: int, rng: np.random.Generator, first_id: int = 1) -> WindowedScene:
    members = list(range(first_id, first_id + n))
    d = {
        (a, b): rng.uniform(0.0, 1.0, size=4)
        for a, b in itertools.combinations(members, 2)
    }
    return make_scene(members, d)


def brute_force_best_partition(members: Sequence[int], value) -> tuple[float, Partition]:
    """Maximize `value(Partition)` by full enumeration; ties keep the first
    canonical form encountered in block-insertion order."""
    best: tuple[float, Partition] | None = None
    for blocks in iter_set_partitions(list(members)):
        p = Partition(blocks)
        v = value(p)
        if best is None or v > best[0]:
            best = (v, p)
    assert best is not None
    return best
