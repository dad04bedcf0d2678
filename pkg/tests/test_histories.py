"""Event histories: record mapping, well-formedness, client order."""

from pmtxcheck.histories import (Ev, check_wellformed, client_order,
                                 crash_marker, events_of_records,
                                 strip_crash_markers, txn_statuses,
                                 wf_violations)


def ev(seq):
    return tuple(Ev(i, *e) for i, e in enumerate(seq))


GOOD = ev([
    (1, 1, "B"), (1, 1, "M", 0, 0), (1, 1, "W", 0, 1), (1, 1, "C"),
    (1, 1, "S"),
    (2, 2, "B"), (2, 2, "R", 0, 1), (2, 2, "C"), (2, 2, "S"),
])


def test_records_to_events_mapping():
    records = (
        ("inv", 0, "begin", None, None), ("res", 0, "begin", None, None),
        ("inv", 0, "alloc", None, None), ("res", 0, "alloc", 1, None),
        ("inv", 0, "write", 1, 4), ("res", 0, "write", 1, 4),
        ("inv", 0, "commit", None, None), ("crash",),
        ("inv", 1, "begin", None, None), ("res", 1, "begin", None, None),
        ("inv", 1, "read", 1, None), ("res", 1, "read", 1, 0),
        ("inv", 1, "commit", None, None), ("res", 1, "abort", None, None),
    )
    events = events_of_records(records)
    kinds = [e.kind for e in events]
    # responses, commit invocations and crashes survive; op invocations drop
    assert kinds == ["B", "M", "W", "C", "X", "B", "R", "C", "A"]
    assert events[1].loc == 1 and events[1].val == 0
    assert events[2].val == 4
    assert events[4].tid is None


def test_wellformed_accepts_good_history():
    ok, bad = check_wellformed(GOOD)
    assert ok and bad == []


def test_statuses():
    st = txn_statuses(ev([
        (1, 1, "B"),
        (2, 2, "B"), (2, 2, "C"),
        (3, 3, "B"), (3, 3, "C"), (3, 3, "S"),
        (4, 4, "B"), (4, 4, "A"),
    ]))
    assert st == {1: "pending", 2: "commit-pending", 3: "success",
                  4: "aborted"}


# one negative fixture per well-formedness clause ---------------------------

def test_wf_two_begins():
    h = ev([(1, 1, "B"), (1, 1, "B")])
    assert "wf:begin" in wf_violations(h)


def test_wf_begin_not_first():
    h = ev([(1, 1, "W", 0, 1), (1, 1, "B")])
    assert "wf:begin" in wf_violations(h)


def test_wf_same_transaction_two_threads():
    h = ev([(1, 1, "B"), (2, 1, "W", 0, 1)])
    assert "wf:same-thread" in wf_violations(h)


def test_wf_interleaved_transactions_on_one_thread():
    h = ev([(1, 1, "B"), (1, 1, "C"), (1, 1, "S"),
            (1, 2, "B"), (1, 1, "W", 0, 1)])
    assert "wf:contiguous" in wf_violations(h)


def test_wf_double_success():
    h = ev([(1, 1, "B"), (1, 1, "C"), (1, 1, "S"), (1, 1, "S")])
    assert "wf:terminal-unique" in wf_violations(h)


def test_wf_event_after_abort():
    h = ev([(1, 1, "B"), (1, 1, "A"), (1, 1, "W", 0, 1)])
    assert "wf:terminal-unique" in wf_violations(h)


def test_wf_read_after_commit():
    h = ev([(1, 1, "B"), (1, 1, "C"), (1, 1, "R", 0, 0)])
    assert "wf:commit-tail" in wf_violations(h)


def test_wf_success_not_immediately_after_commit():
    h = ev([(1, 1, "B"), (1, 1, "C"),
            (2, 2, "B"),
            (1, 1, "S")])
    # same-thread immediacy: put an event of the same thread in between
    h2 = ev([(1, 1, "B"), (1, 1, "C"), (1, 1, "A"), (1, 1, "S")])
    assert "wf:commit-tail" in wf_violations(h2) \
        or "wf:terminal-unique" in wf_violations(h2)
    ok, _ = check_wellformed(h)
    assert ok  # other-thread events between commit and success are fine


def test_wf_two_live_transactions_one_thread():
    h = ev([(1, 1, "B"), (1, 2, "B"), (1, 2, "C"), (1, 2, "S"),
            ])
    assert "wf:live-last" in wf_violations(h)


def test_wf_double_alloc_in_successful_txns():
    h = ev([
        (1, 1, "B"), (1, 1, "M", 0, 0), (1, 1, "C"), (1, 1, "S"),
        (2, 2, "B"), (2, 2, "M", 0, 0), (2, 2, "C"), (2, 2, "S"),
    ])
    assert "wf:alloc-once" in wf_violations(h)


def test_wf_double_alloc_fine_when_one_aborted():
    h = ev([
        (1, 1, "B"), (1, 1, "M", 0, 0), (1, 1, "A"),
        (2, 2, "B"), (2, 2, "M", 0, 0), (2, 2, "C"), (2, 2, "S"),
    ])
    ok, _ = check_wellformed(h)
    assert ok


def test_wf_thread_reuse_across_crash():
    h = (Ev(0, 1, 1, "B"), Ev(1, 1, 1, "C"), Ev(2, 1, 1, "S"),
         crash_marker(3), Ev(4, 1, 2, "B"))
    assert "wf:era-threads" in wf_violations(h)


def test_wf_duplicate_event_ids():
    h = (Ev(0, 1, 1, "B"), Ev(0, 1, 1, "C"))
    assert "wf:event-ids" in wf_violations(h)


# client order ---------------------------------------------------------------

def test_client_order_sequential():
    clo = client_order(GOOD)
    assert (1, 2) in clo
    assert (2, 1) not in clo


def test_client_order_overlapping_none():
    h = ev([(1, 1, "B"), (2, 2, "B"), (1, 1, "C"), (1, 1, "S"),
            (2, 2, "C"), (2, 2, "S")])
    clo = client_order(h)
    assert (1, 2) not in clo and (2, 1) not in clo


def test_client_order_pending_excluded():
    h = ev([(1, 1, "B"), (1, 1, "W", 0, 1),
            (2, 2, "B"), (2, 2, "C"), (2, 2, "S")])
    assert client_order(h) == frozenset()


def test_strip_crash_markers_renumbers():
    h = (Ev(0, 1, 1, "B"), crash_marker(1), Ev(2, 2, 2, "B"))
    out = strip_crash_markers(h)
    assert [e.eid for e in out] == [0, 1]
    assert [e.kind for e in out] == ["B", "B"]
