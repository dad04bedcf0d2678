"""Operational reference spec: transitions, membership, sequential bound."""

from pmtxcheck.refspec import (ACCEPT_ALL, BOT, RDY, accepts_history,
                               advance_frontier, crash_step, eps_successors,
                               initial_frontier, initial_state, match_record,
                               sequential_histories, valid_idx)


def drive(records, txns=2, locs=2):
    return accepts_history(records, txns, locs)


def test_read_own_write_value():
    st = initial_state(1, 2)
    st = match_record(st, ("inv", 0, "begin", None, None))[0]
    st = match_record(st, ("res", 0, "begin", None, None))[0]
    st = match_record(st, ("inv", 0, "alloc", None, None))[0]
    st = match_record(st, ("res", 0, "alloc", 0, None))[0]
    st = match_record(st, ("inv", 0, "write", 0, 4))[0]
    st = match_record(st, ("res", 0, "write", 0, 4))[0]
    st = match_record(st, ("inv", 0, "read", 0, None))[0]
    assert match_record(st, ("res", 0, "read", 0, 4))
    assert not match_record(st, ("res", 0, "read", 0, 3))


def test_read_own_alloc_returns_zero():
    st = initial_state(1, 2)
    for rec in (("inv", 0, "begin", None, None),
                ("res", 0, "begin", None, None),
                ("inv", 0, "alloc", None, None),
                ("res", 0, "alloc", 1, None),
                ("inv", 0, "read", 1, None)):
        st = match_record(st, rec)[0]
    assert match_record(st, ("res", 0, "read", 1, 0))
    assert not match_record(st, ("res", 0, "read", 1, 1))


def test_crash_resets_memories_and_aborts_live():
    st = initial_state(2, 1)
    for rec in (("inv", 0, "begin", None, None),
                ("res", 0, "begin", None, None),
                ("inv", 0, "alloc", None, None),
                ("res", 0, "alloc", 0, None),
                ("inv", 0, "commit", None, None)):
        st = match_record(st, rec)[0]
    st = eps_successors(st)[0]      # the commit lands a new memory
    mems, txs = st
    assert len(mems) == 2
    st2 = crash_step(st)
    mems2, txs2 = st2
    assert mems2 == (mems[-1],)
    assert txs2[0][0] == ("ab",)    # live transaction dies silently
    assert txs2[1][0] == ("ns",)    # unstarted one survives


def test_valid_idx_checks_reads_and_allocs():
    mems = ((BOT, BOT), (0, BOT))
    tx_ok = (RDY, 0, (0, -1), (-1, -1), 0)
    assert valid_idx(1, tx_ok, mems)
    assert not valid_idx(0, tx_ok, mems)       # read set inconsistent
    tx_alloc = (RDY, 0, (-1, -1), (-1, -1), 1)  # allocated loc 0
    assert valid_idx(0, tx_alloc, mems)
    assert not valid_idx(1, tx_alloc, mems)     # loc 0 taken at index 1


def test_accepts_empty_history():
    assert drive(())


def test_accepts_commit_crash_read():
    records = (
        ("inv", 0, "begin", None, None), ("res", 0, "begin", None, None),
        ("inv", 0, "alloc", None, None), ("res", 0, "alloc", 0, None),
        ("inv", 0, "write", 0, 1), ("res", 0, "write", 0, 1),
        ("inv", 0, "commit", None, None), ("res", 0, "commit", None, None),
        ("crash",),
        ("inv", 1, "begin", None, None), ("res", 1, "begin", None, None),
        ("inv", 1, "read", 0, None), ("res", 1, "read", 0, 1),
    )
    ok, chain = accepts_history(records, 2, 2, witness=True)
    assert ok and chain is not None and len(chain) == len(records)


def test_rejects_write_to_unallocated_without_fault():
    records = (
        ("inv", 0, "begin", None, None), ("res", 0, "begin", None, None),
        ("inv", 0, "write", 0, 1), ("res", 0, "write", 0, 1),
    )
    assert not drive(records)


def test_fault_matches_only_at_invalid_access():
    prefix = (
        ("inv", 0, "begin", None, None), ("res", 0, "begin", None, None),
        ("inv", 0, "read", 0, None),
    )
    assert drive(prefix + (("fault", 0, "read", 0),))
    # after a committed allocation the location is valid everywhere, so the
    # spec cannot fault on it
    records = (
        ("inv", 0, "begin", None, None), ("res", 0, "begin", None, None),
        ("inv", 0, "alloc", None, None), ("res", 0, "alloc", 0, None),
        ("inv", 0, "commit", None, None), ("res", 0, "commit", None, None),
        ("crash",),
        ("inv", 1, "begin", None, None), ("res", 1, "begin", None, None),
        ("inv", 1, "read", 0, None), ("fault", 1, "read", 0),
    )
    assert not drive(records)


def test_fault_frontier_accepts_everything_after():
    f = initial_frontier(1, 1)
    for rec in (("inv", 0, "begin", None, None),
                ("res", 0, "begin", None, None),
                ("inv", 0, "read", 0, None),
                ("fault", 0, "read", 0)):
        f = advance_frontier(f, rec)
    assert f == ACCEPT_ALL
    assert advance_frontier(f, ("res", 0, "read", 0, 1)) == ACCEPT_ALL


def test_no_abort_after_commit_applied():
    # a writing commit that internally landed its memory cannot abort:
    # its only response is success
    records_abort = (
        ("inv", 0, "begin", None, None), ("res", 0, "begin", None, None),
        ("inv", 0, "alloc", None, None), ("res", 0, "alloc", 0, None),
        ("inv", 0, "commit", None, None), ("res", 0, "abort", None, None),
        ("inv", 1, "begin", None, None), ("res", 1, "begin", None, None),
        ("inv", 1, "read", 0, None), ("res", 1, "read", 0, 0),
    )
    # aborting the commit is fine, but then the reader must fault/fail
    assert not drive(records_abort)
    records_commit = records_abort[:5] + (
        ("res", 0, "commit", None, None),) + records_abort[6:]
    assert drive(records_commit)


def test_reader_abort_always_available_in_flight():
    records = (
        ("inv", 0, "begin", None, None), ("res", 0, "begin", None, None),
        ("inv", 0, "read", 0, None), ("res", 0, "abort", None, None),
    )
    assert drive(records)


def test_pending_operations_accepted():
    records = (
        ("inv", 0, "begin", None, None), ("res", 0, "begin", None, None),
        ("inv", 0, "alloc", None, None),
    )
    assert drive(records)


# ---------------------------------------------------------------------------
# sequential lower-bound generator
# ---------------------------------------------------------------------------

def test_sequential_histories_smallest_bound():
    hs = sequential_histories(1, 1, 1, 1)
    assert (
        ("inv", 0, "begin", None, None), ("res", 0, "begin", None, None),
        ("inv", 0, "alloc", None, None), ("res", 0, "alloc", 0, None),
        ("inv", 0, "commit", None, None), ("res", 0, "commit", None, None),
    ) in hs
    # reads/writes of unallocated memory and aborts never appear
    for h in hs:
        assert all(rec[2] != "abort" for rec in h)


def test_sequential_histories_are_serial():
    for h in sequential_histories(2, 2, 2, 1):
        active = None
        done = set()
        for rec in h:
            t = rec[1]
            assert t not in done
            if active is None:
                active = t
            assert t == active
            if rec[:3] == ("res", t, "commit"):
                done.add(t)
                active = None


def test_sequential_histories_all_accepted():
    for h in sorted(sequential_histories(2, 2, 2, 1)):
        assert accepts_history(h, 2, 2)


def test_sequential_count_matches_independent_enumeration():
    # oracle: enumerate serial candidate histories syntactically and filter
    # by spec membership; the generator must produce exactly that set
    txns, locs, vals, ops = 2, 2, 2, 1
    ops_pool = ([("read", l, None) for l in range(locs)]
                + [("write", l, v) for l in range(locs)
                   for v in range(vals)]
                + [("alloc", None, None)])

    def histories_for(t, mems_unused, prefix, out):
        if t == txns:
            out.add(tuple(prefix))
            return
        base = prefix + [("inv", t, "begin", None, None),
                         ("res", t, "begin", None, None)]

        def with_ops(seq, k):
            tails = [seq + [("inv", t, "commit", None, None),
                            ("res", t, "commit", None, None)]]
            if k < ops:
                for op, loc, val in ops_pool:
                    if op == "read":
                        for v in range(vals + 1):  # include alloc-zero
                            tails += with_ops(
                                seq + [("inv", t, "read", loc, None),
                                       ("res", t, "read", loc, v)], k + 1)
                    elif op == "write":
                        tails += with_ops(
                            seq + [("inv", t, "write", loc, val),
                                   ("res", t, "write", loc, val)], k + 1)
                    else:
                        for l in range(locs):
                            tails += with_ops(
                                seq + [("inv", t, "alloc", None, None),
                                       ("res", t, "alloc", l, None)], k + 1)
            return tails

        for tail in with_ops(base, 0):
            histories_for(t + 1, None, tail, out)

    candidates = set()
    histories_for(0, None, [], candidates)
    oracle = {h for h in candidates if accepts_history(h, txns, locs)}
    assert oracle == sequential_histories(txns, locs, vals, ops)
