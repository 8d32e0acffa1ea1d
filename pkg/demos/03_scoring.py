"""
Scoring group predictions when most people walk alone
=====================================================

Three scorers, same interface: precision / recall / f1 over a predicted
partition against a labeled one. Pairwise counting rewards predictions
pair-by-pair; the spanning-forest scorer counts the minimum link edits
between partitions; the group-aware variant extends it so that singletons
carry weight too, which matters in crowds where most pedestrians are alone.
"""

from crowdgroups import (
    Partition,
    gmitre_loss,
    gmitre_score,
    mitre_score,
    positive_pairwise_metric,
)

ann, bea, cal, dee = "ann", "bea", "cal", "dee"


def report(tag, truth, pred):
    rows = [
        ("pairwise", positive_pairwise_metric(truth, pred)),
        ("link-based", mitre_score(truth, pred)),
        ("group-aware", gmitre_score(truth, pred)),
    ]
    print(tag)
    for name, s in rows:
        print(f"  {name:<12} P {s.precision:.3f}  R {s.recall:.3f}  f1 {s.f1:.3f}")


# ---------------------------------------------------------------------------
# the degenerate crowd: nobody is in a group, and the prediction invents one
# pair. with no true links to span, link counting turns all-or-nothing:
# recall is vacuously perfect, precision crashes to zero, f1 says total
# failure. the group-aware scorer grades the same miss smoothly.

report(
    "truth: all singletons / predicted: one invented pair",
    Partition([[ann], [bea], [cal]]),
    Partition([[ann, bea], [cal]]),
)
print("  group-aware loss:", gmitre_loss(
    Partition([[ann], [bea], [cal]]), Partition([[ann, bea], [cal]])
))

# ---------------------------------------------------------------------------
# over-merging: the pair exists but the prediction swallows the bystander.

report(
    "truth: one pair + bystander / predicted: everyone together",
    Partition([[ann, bea], [cal]]),
    Partition([[ann, bea, cal]]),
)

# ---------------------------------------------------------------------------
# the one-edit illusion: link-based counting treats {ann,bea,cal,dee} as one
# link short of {ann,bea} + {cal,dee}, so the mistake looks tiny. the
# group-aware scorer sees two broken groups, not one missing link.

report(
    "truth: two pairs / predicted: one quartet",
    Partition([[ann, bea], [cal, dee]]),
    Partition([[ann, bea, cal, dee]]),
)

# ---------------------------------------------------------------------------
# a spurious pair on top of a correctly found one. link counting only dings
# precision; the group-aware scorer also docks recall, because the truth
# says ann and bea are loners and the prediction erased that.

report(
    "truth: {ann}{bea}{cal,dee} / predicted: {ann,bea}{cal,dee}",
    Partition([[ann], [bea], [cal, dee]]),
    Partition([[ann, bea], [cal, dee]]),
)
