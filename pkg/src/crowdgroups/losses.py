"""Partition-comparison scores and losses.

The group-aware scorer augments every pedestrian with a fake counterpart that
is linked to its owner only when the owner is a singleton, so wrongly grouped
or wrongly isolated singletons cost recall/precision. The plain variant skips
the augmentation; the pairwise variant counts disagreeing co-membership pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

from .partitioning import Partition


class DisjointSetForest:
    """Union-find over 0..n-1 with path compression and union by size."""

    __slots__ = ("parent", "size")

    def __init__(self, n: int):
        if n < 0:
            raise ValueError("universe size must be non-negative")
        self.parent = list(range(n))
        self.size = [1] * n

    def __len__(self) -> int:
        return len(self.parent)

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return ra

    def components(self) -> list[list[int]]:
        comps: dict[int, list[int]] = {}
        for x in range(len(self.parent)):
            comps.setdefault(self.find(x), []).append(x)
        return list(comps.values())


@dataclass(frozen=True)
class ForestScore:
    """Spanning-forest recall/precision and their F1."""

    recall: float
    precision: float
    f1: float


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _check_members(truth: Partition, pred: Partition) -> list[int]:
    if truth.members != pred.members:
        raise ValueError("partitions cover different member sets")
    return sorted(truth.members)


def _augmented_forest(p: Partition, index: dict[int, int]) -> DisjointSetForest:
    """Union clusters over a doubled universe; member i's fake counterpart is
    n + i and is linked to i only when i is a singleton in p."""
    n = len(index)
    forest = DisjointSetForest(2 * n)
    for cluster in p.clusters:
        first = index[cluster[0]]
        for m in cluster[1:]:
            forest.union(first, index[m])
        if len(cluster) == 1:
            forest.union(first, n + first)
    return forest


def _plain_forest(p: Partition, index: dict[int, int]) -> DisjointSetForest:
    forest = DisjointSetForest(len(index))
    for cluster in p.clusters:
        first = index[cluster[0]]
        for m in cluster[1:]:
            forest.union(first, index[m])
    return forest


def _forest_recall(q: DisjointSetForest, r: DisjointSetForest) -> float:
    """1 - (links missing in r to span q's components) / (links needed to span them)."""
    needed = 0
    missing = 0
    for comp in q.components():
        needed += len(comp) - 1
        missing += len({r.find(x) for x in comp}) - 1
    if needed == 0:
        return 1.0
    return 1.0 - missing / needed


def gmitre_score(truth: Partition, pred: Partition) -> ForestScore:
    """Group-aware spanning-forest score with fake singleton counterparts."""
    members = _check_members(truth, pred)
    index = {m: k for k, m in enumerate(members)}
    qf = _augmented_forest(truth, index)
    rf = _augmented_forest(pred, index)
    recall = _forest_recall(qf, rf)
    precision = _forest_recall(rf, qf)
    return ForestScore(recall=recall, precision=precision, f1=_f1(precision, recall))


def gmitre_loss(truth: Partition, pred: Partition) -> float:
    return 1.0 - gmitre_score(truth, pred).f1


def mitre_score(truth: Partition, pred: Partition) -> ForestScore:
    """Spanning-forest score over the raw members; blind to singleton errors."""
    members = _check_members(truth, pred)
    index = {m: k for k, m in enumerate(members)}
    qf = _plain_forest(truth, index)
    rf = _plain_forest(pred, index)
    recall = _forest_recall(qf, rf)
    precision = _forest_recall(rf, qf)
    return ForestScore(recall=recall, precision=precision, f1=_f1(precision, recall))


def mitre_loss(truth: Partition, pred: Partition) -> float:
    return 1.0 - mitre_score(truth, pred).f1


def pairwise_loss(truth: Partition, pred: Partition) -> float:
    """Fraction of unordered member pairs whose co-membership disagrees."""
    members = _check_members(truth, pred)
    n = len(members)
    if n < 2:
        return 0.0
    t = truth.labels()
    p = pred.labels()
    disagree = 0
    for i in range(n):
        a = members[i]
        for j in range(i + 1, n):
            b = members[j]
            if (t[a] == t[b]) != (p[a] == p[b]):
                disagree += 1
    return disagree / (n * (n - 1) / 2)


def _positive_pairs(p: Partition) -> set[tuple[int, int]]:
    pairs: set[tuple[int, int]] = set()
    for cluster in p.clusters:
        for i in range(len(cluster)):
            for j in range(i + 1, len(cluster)):
                pairs.add((cluster[i], cluster[j]))
    return pairs


def positive_pairwise_metric(truth: Partition, pred: Partition) -> ForestScore:
    """Precision/recall over intra-group pairs only; empty denominators count
    as vacuously perfect."""
    _check_members(truth, pred)
    true_pairs = _positive_pairs(truth)
    pred_pairs = _positive_pairs(pred)
    hits = len(true_pairs & pred_pairs)
    precision = hits / len(pred_pairs) if pred_pairs else 1.0
    recall = hits / len(true_pairs) if true_pairs else 1.0
    return ForestScore(recall=recall, precision=precision, f1=_f1(precision, recall))
