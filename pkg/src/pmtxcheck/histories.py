"""Transactional events, histories and well-formedness checks.

An event is ``Ev(eid, tid, txid, kind, loc, val)`` with kind one of:

* ``B`` begin, ``A`` abort, ``M`` alloc (yields loc, initialised to 0),
  ``R`` read, ``W`` write, ``C`` commit (start of the commit phase),
  ``S`` success (committed), ``X`` crash marker (tid/txid are None).

A history is a tuple of events in total (temporal) order.  Histories are
extracted from explorer runs as inv/res/crash records; ``events_of_records``
performs that mapping (responses plus commit invocations become events,
threads and transactions are conflated).
"""

from __future__ import annotations

from typing import NamedTuple, Optional


class Ev(NamedTuple):
    eid: int
    tid: Optional[int]
    txid: Optional[int]
    kind: str
    loc: Optional[int] = None
    val: Optional[int] = None


EVENT_KINDS = ("B", "A", "M", "R", "W", "C", "S")
CRASH = "X"


def crash_marker(eid):
    return Ev(eid, None, None, CRASH)


def events_of_records(records):
    """Map explorer inv/res/crash records to the ordered event history.

    Keeps responses, commit invocations and crash markers; fault notes and
    all other invocations are dropped.
    """
    out = []
    for rec in records:
        kind = rec[0]
        if kind == "crash":
            out.append(crash_marker(len(out)))
            continue
        if kind == "fault":
            continue
        _k, txid, op = rec[0], rec[1], rec[2]
        loc = rec[3]
        val = rec[4]
        if kind == "inv":
            if op == "commit":
                out.append(Ev(len(out), txid, txid, "C"))
            continue
        if op == "begin":
            out.append(Ev(len(out), txid, txid, "B"))
        elif op == "alloc":
            out.append(Ev(len(out), txid, txid, "M", loc, 0))
        elif op == "read":
            out.append(Ev(len(out), txid, txid, "R", loc, val))
        elif op == "write":
            out.append(Ev(len(out), txid, txid, "W", loc, val))
        elif op == "commit":
            out.append(Ev(len(out), txid, txid, "S"))
        elif op == "abort":
            out.append(Ev(len(out), txid, txid, "A"))
        else:
            raise ValueError("unknown op in record: %r" % (rec,))
    return tuple(out)


def strip_crash_markers(events):
    return tuple(e._replace(eid=i)
                 for i, e in enumerate(e for e in events if e.kind != CRASH))


def txn_ids(events):
    seen = []
    for e in events:
        if e.txid is not None and e.txid not in seen:
            seen.append(e.txid)
    return seen


def txn_events(events):
    by_tx = {}
    for e in events:
        if e.txid is not None:
            by_tx.setdefault(e.txid, []).append(e)
    return by_tx


def txn_statuses(events):
    """txid -> 'pending' | 'commit-pending' | 'aborted' | 'success'."""
    st = {}
    for tx, evs in txn_events(events).items():
        kinds = {e.kind for e in evs}
        if "S" in kinds:
            st[tx] = "success"
        elif "A" in kinds:
            st[tx] = "aborted"
        elif "C" in kinds:
            st[tx] = "commit-pending"
        else:
            st[tx] = "pending"
    return st


def client_order(events):
    """Real-time precedence between transactions: tx1 -> tx2 when tx1's
    terminal (abort/success) event comes before tx2's begin event."""
    clo = set()
    terminals = [e for e in events if e.kind in ("A", "S")]
    begins = [e for e in events if e.kind == "B"]
    for t in terminals:
        for b in begins:
            if t.eid < b.eid and t.txid != b.txid:
                clo.add((t.txid, b.txid))
    return frozenset(clo)


# ---------------------------------------------------------------------------
# Well-formedness
# ---------------------------------------------------------------------------

def wf_violations(events):
    """Check history well-formedness; returns the violated clause names.

    Clauses: same-transaction events share a thread and form a contiguous
    block; exactly one begin per transaction, first in its transaction; at
    most one abort/commit/success, with abort and success last; after a
    commit only abort or success, and success immediately after its commit;
    per thread at most one pending or commit-pending transaction, which is
    the thread's last; each location allocated at most once across
    successful transactions; thread ids are not reused across crash markers.
    """
    bad = []
    real = [e for e in events if e.kind != CRASH]
    ids = [e.eid for e in events]
    if len(set(ids)) != len(ids):
        bad.append("wf:event-ids")

    by_tx = txn_events(events)
    by_tid = {}
    for e in real:
        by_tid.setdefault(e.tid, []).append(e)

    # clause 1: one thread per transaction, transactions contiguous in po
    for tx, evs in by_tx.items():
        if len({e.tid for e in evs}) != 1:
            bad.append("wf:same-thread")
            break
    for tid, evs in by_tid.items():
        seen_done = set()
        last_tx = None
        for e in evs:
            if e.txid != last_tx:
                if e.txid in seen_done:
                    if "wf:contiguous" not in bad:
                        bad.append("wf:contiguous")
                if last_tx is not None:
                    seen_done.add(last_tx)
                last_tx = e.txid

    # clause 2: exactly one begin, po-minimal in its transaction
    for tx, evs in by_tx.items():
        begins = [e for e in evs if e.kind == "B"]
        if len(begins) != 1 or evs[0].kind != "B":
            bad.append("wf:begin")
            break

    # clause 3: at most one abort/commit/success; abort and success maximal
    for tx, evs in by_tx.items():
        for k in ("A", "C", "S"):
            if sum(1 for e in evs if e.kind == k) > 1:
                bad.append("wf:terminal-unique")
                break
        else:
            for e in evs[:-1]:
                if e.kind in ("A", "S"):
                    bad.append("wf:terminal-unique")
                    break
            else:
                continue
        break

    # clause 4: after commit only abort/success; success immediately after
    for tid, evs in by_tid.items():
        for i, e in enumerate(evs):
            if e.kind == "C":
                rest = [x for x in evs[i + 1:] if x.txid == e.txid]
                if any(x.kind not in ("A", "S") for x in rest):
                    bad.append("wf:commit-tail")
                    break
                succ = [x for x in evs[i + 1:] if x.kind == "S"
                        and x.txid == e.txid]
                if succ and evs[i + 1] is not succ[0]:
                    bad.append("wf:commit-tail")
                    break
        else:
            continue
        break

    # clause 5: at most one live (pending/commit-pending) txn per thread,
    # and it is the thread's last transaction
    statuses = txn_statuses(events)
    for tid, evs in by_tid.items():
        txs = []
        for e in evs:
            if e.txid not in txs:
                txs.append(e.txid)
        live = [tx for tx in txs if statuses[tx] in ("pending",
                                                     "commit-pending")]
        if len(live) > 1 or (live and txs[-1] != live[0]):
            bad.append("wf:live-last")
            break

    # clause 6: each location allocated at most once among successful txns
    alloc_locs = {}
    for e in real:
        if e.kind == "M" and statuses[e.txid] == "success":
            alloc_locs.setdefault(e.loc, 0)
            alloc_locs[e.loc] += 1
    if any(n > 1 for n in alloc_locs.values()):
        bad.append("wf:alloc-once")

    # era discipline: no thread id on both sides of a crash marker
    era = 0
    tid_era = {}
    for e in events:
        if e.kind == CRASH:
            era += 1
            continue
        if e.tid in tid_era and tid_era[e.tid] != era:
            bad.append("wf:era-threads")
            break
        tid_era[e.tid] = era

    return bad


def check_wellformed(events):
    """True plus [] when well-formed, else False plus violation names."""
    bad = wf_violations(events)
    return (not bad, bad)
