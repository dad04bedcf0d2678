"""Built-in litmus execution graphs with known opacity verdicts.

Three small executions exercising each opacity axiom:

* ``a`` -- a pending/aborted writer read by another transaction: fails
  ``vis-rf``.
* ``b`` -- two aborted/pending transactions with crossing reads-before
  edges between two committed writers: opaque (the rb cycle never enters a
  visible transaction).
* ``c`` -- a reader observing half of a commit-pending transaction that is
  visible through its other write: fails ``ext``.

Each entry also carries variant graphs for the outcome-irrelevant choices
(writer pending vs aborted, reader pending/aborted/commit-pending/committed).
"""

from __future__ import annotations

from typing import NamedTuple

from .histories import Ev
from .opacity import Graph, graph_from_events


class Litmus(NamedTuple):
    name: str
    graph: Graph
    expect_opaque: bool
    expect_axiom: str | None
    variants: tuple


def _ev(seq):
    return tuple(Ev(i, *e) for i, e in enumerate(seq))


def _fig_a(writer_tail, reader_tail):
    # txn 1 writes x=1 and maybe aborts; txn 2 reads it.
    seq = [(1, 1, "B"), (1, 1, "W", 0, 1)]
    if writer_tail == "abort":
        seq.append((1, 1, "A"))
    seq += [(2, 2, "B"), (2, 2, "R", 0, 1)]
    if reader_tail == "abort":
        seq.append((2, 2, "A"))
    elif reader_tail == "commit":
        seq.append((2, 2, "C"))
    elif reader_tail == "success":
        seq += [(2, 2, "C"), (2, 2, "S")]
    events = _ev(seq)
    wx = next(e.eid for e in events if e.kind == "W")
    rx = next(e.eid for e in events if e.kind == "R")
    return graph_from_events(events, rf={rx: wx}, mo={0: [wx]},
                             clo=frozenset())


def _fig_b(t3_tail, t4_tail):
    # txn 1 commits x=1, txn 2 commits y=1; txns 3 and 4 each read one and
    # write the other, ending aborted/pending.  Uses locs x=0, y=1.
    seq = [
        (1, 1, "B"), (1, 1, "W", 0, 1), (1, 1, "C"), (1, 1, "S"),
        (2, 2, "B"), (2, 2, "W", 1, 1), (2, 2, "C"), (2, 2, "S"),
        (3, 3, "B"), (3, 3, "R", 1, 1), (3, 3, "W", 0, 2),
        (4, 4, "B"), (4, 4, "R", 0, 1), (4, 4, "W", 1, 2),
    ]
    if t3_tail == "abort":
        seq.append((3, 3, "A"))
    if t4_tail == "abort":
        seq.append((4, 4, "A"))
    events = _ev(seq)

    def find(txid, kind):
        return next(e.eid for e in events if e.txid == txid and e.kind == kind)

    wx1, wy1 = find(1, "W"), find(2, "W")
    ry1, wx2 = find(3, "R"), find(3, "W")
    rx1, wy2 = find(4, "R"), find(4, "W")
    return graph_from_events(
        events, rf={rx1: wx1, ry1: wy1},
        mo={0: [wx1, wx2], 1: [wy1, wy2]}, clo=frozenset())


def _fig_c():
    # txn 1 is commit-pending having written x=1 and y=1; the reader sees
    # txn 2's earlier x=0 but txn 1's y=1 -- a partial snapshot of a
    # visible transaction.
    seq = [
        (2, 2, "B"), (2, 2, "W", 0, 0), (2, 2, "C"), (2, 2, "S"),
        (1, 1, "B"), (1, 1, "W", 0, 1), (1, 1, "W", 1, 1), (1, 1, "C"),
        (3, 3, "B"), (3, 3, "R", 0, 0), (3, 3, "R", 1, 1), (3, 3, "A"),
    ]
    events = _ev(seq)

    def find(txid, kind, loc):
        return next(e.eid for e in events
                    if e.txid == txid and e.kind == kind and e.loc == loc)

    wx0 = find(2, "W", 0)
    wx1, wy1 = find(1, "W", 0), find(1, "W", 1)
    rx0, ry1 = find(3, "R", 0), find(3, "R", 1)
    return graph_from_events(
        events, rf={rx0: wx0, ry1: wy1},
        mo={0: [wx0, wx1], 1: [wy1]}, clo=frozenset())


def fig4_suite():
    a_variants = tuple(_fig_a(w, r)
                       for w in ("pending", "abort")
                       for r in ("pending", "abort", "commit", "success"))
    b_variants = tuple(_fig_b(t3, t4)
                       for t3 in ("pending", "abort")
                       for t4 in ("pending", "abort"))
    return (
        Litmus("a", _fig_a("abort", "success"), False, "vis-rf", a_variants),
        Litmus("b", _fig_b("abort", "abort"), True, None, b_variants),
        Litmus("c", _fig_c(), False, "ext", (_fig_c(),)),
    )
