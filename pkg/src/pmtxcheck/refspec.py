"""Operational reference specification for crash-consistent transactions.

A transition system over states ``(mems, txs)``:

* ``mems`` -- a nonempty sequence of memories (loc -> val, -1 meaning
  unallocated); each committing writer/allocator appends a new memory; a
  crash resets the sequence to its last element.
* per transaction: a program counter, begin index (position in ``mems`` at
  begin), read set, write set and allocation set.

External actions are operation invocations and responses plus crashes;
commits take an internal step between invocation and response.  A read or
write of a location that is unallocated in some consistent memory may fault;
implementation fault events are matched against these fault transitions.

``accepts_history`` decides whether a record sequence is a trace of the
system; ``sequential_histories`` enumerates the serial, crash-free,
abort-free restriction used as a lower bound on implementations.
"""

from __future__ import annotations

BOT = -1  # unallocated

# pc encodings
NS = ("ns",)
RDY = ("rdy",)
BPEND = ("bp",)
PI = ("pi",)          # commit applied, response pending
ABORTED = ("ab",)
COMMITTED = ("co",)


def initial_state(txns, locs, prealloc=0):
    mem0 = tuple(0 if x < prealloc else BOT for x in range(locs))
    tx0 = (NS, 0, (BOT,) * locs, (BOT,) * locs, 0)  # pc, bidx, rset, wset, am
    return ((mem0,), (tx0,) * txns)


def _repl(tup, i, v):
    return tup[:i] + (v,) + tup[i + 1:]


def valid_idx(n, tx, mems):
    """bidx <= n < |mems|, read set consistent with mems[n], allocation set
    unallocated at mems[n]."""
    _pc, bidx, rset, _wset, am = tx
    if not (bidx <= n < len(mems)):
        return False
    mem = mems[n]
    for l, v in enumerate(rset):
        if v != BOT and mem[l] != v:
            return False
    m = am
    while m:
        low = m & -m
        if mem[low.bit_length() - 1] != BOT:
            return False
        m ^= low
    return True


def _valid_ns(tx, mems):
    return [n for n in range(tx[1], len(mems)) if valid_idx(n, tx, mems)]


def crash_step(st):
    """Crash-and-recover: live transactions abort silently, the memory
    sequence collapses to its last element."""
    mems, txs = st
    new_txs = tuple(
        (ABORTED, t[1], t[2], t[3], t[4])
        if t[0] not in (NS, COMMITTED) and t[0] != ABORTED else t
        for t in txs)
    return ((mems[-1],), new_txs)


def eps_successors(st):
    """Internal commit steps (read-only and writer variants)."""
    mems, txs = st
    out = []
    for i, tx in enumerate(txs):
        pc, bidx, rset, wset, am = tx
        if pc != ("d", "commit"):
            continue
        if am == 0 and all(v == BOT for v in wset):
            out.append((mems, _repl(txs, i, (PI, bidx, rset, wset, am))))
            continue
        if valid_idx(len(mems) - 1, tx, mems):
            mem = list(mems[-1])
            m = am
            while m:
                low = m & -m
                mem[low.bit_length() - 1] = 0
                m ^= low
            for l, v in enumerate(wset):
                if v != BOT:
                    mem[l] = v
            out.append((mems + (tuple(mem),),
                        _repl(txs, i, (PI, bidx, rset, wset, am))))
    return out


def closure(states):
    """All states reachable through internal commit steps."""
    seen = set(states)
    work = list(states)
    while work:
        st = work.pop()
        for st2 in eps_successors(st):
            if st2 not in seen:
                seen.add(st2)
                work.append(st2)
    return seen


def match_record(st, rec):
    """States reachable by taking the external action `rec` from `st`."""
    kind = rec[0]
    if kind == "crash":
        return [crash_step(st)]
    mems, txs = st
    txid, op = rec[1], rec[2]
    loc, val = rec[3], rec[4]
    tx = txs[txid]
    pc, bidx, rset, wset, am = tx
    out = []
    if kind == "inv":
        if op == "begin":
            if pc == NS:
                out.append((mems, _repl(txs, txid,
                                        (BPEND, len(mems) - 1, rset, wset,
                                         am))))
        elif pc == RDY:
            if op == "read":
                npc = ("d", "read", loc)
            elif op == "write":
                npc = ("d", "write", loc, val)
            elif op == "alloc":
                npc = ("d", "alloc")
            elif op == "commit":
                npc = ("d", "commit")
            else:
                return []
            out.append((mems, _repl(txs, txid, (npc, bidx, rset, wset, am))))
        return out

    # responses
    if op == "abort":
        if pc not in (NS, RDY, COMMITTED, ABORTED, PI):
            out.append((mems, _repl(txs, txid,
                                    (ABORTED, bidx, rset, wset, am))))
        return out
    if op == "begin":
        if pc == BPEND:
            out.append((mems, _repl(txs, txid, (RDY, bidx, rset, wset, am))))
        return out
    if op == "commit":
        if pc == PI:
            out.append((mems, _repl(txs, txid,
                                    (COMMITTED, bidx, rset, wset, am))))
        return out
    if op == "alloc":
        if pc == ("d", "alloc") and not (am >> loc) & 1:
            out.append((mems, _repl(txs, txid,
                                    (RDY, bidx, rset, wset, am | (1 << loc)))))
        return out
    if op == "read":
        if pc != ("d", "read", loc):
            return out
        if wset[loc] != BOT:
            if wset[loc] == val:
                out.append((mems, _repl(txs, txid,
                                        (RDY, bidx, rset, wset, am))))
        elif (am >> loc) & 1:
            if val == 0:
                out.append((mems, _repl(txs, txid,
                                        (RDY, bidx, rset, wset, am))))
        else:
            for n in _valid_ns(tx, mems):
                if mems[n][loc] == val and val != BOT:
                    out.append((mems, _repl(txs, txid,
                                            (RDY, bidx,
                                             _repl(rset, loc, val), wset,
                                             am))))
                    break
        return out
    if op == "write":
        if pc == ("d", "write", loc, val):
            if (am >> loc) & 1 or mems[-1][loc] != BOT:
                out.append((mems, _repl(txs, txid,
                                        (RDY, bidx, rset,
                                         _repl(wset, loc, val), am))))
        return out
    return out


def fault_possible(st, txid, op, loc):
    """Whether a fault transition is enabled for txid's in-flight op."""
    mems, txs = st
    tx = txs[txid]
    pc = tx[0]
    am = tx[4]
    if op == "read":
        if pc != ("d", "read", loc):
            return False
        if (am >> loc) & 1 or tx[3][loc] != BOT:
            return False
        return any(mems[n][loc] == BOT for n in _valid_ns(tx, mems))
    if op == "write":
        if not (isinstance(pc, tuple) and len(pc) == 4
                and pc[0] == "d" and pc[1] == "write" and pc[2] == loc):
            return False
        return not (am >> loc) & 1 and mems[-1][loc] == BOT
    return False


# ---------------------------------------------------------------------------
# Frontier-based membership
# ---------------------------------------------------------------------------

ACCEPT_ALL = "accept-all"  # frontier sentinel once a fault was matched


def initial_frontier(txns, locs, prealloc=0):
    return frozenset(closure({initial_state(txns, locs, prealloc)}))


def advance_frontier(frontier, rec):
    """Step the set of spec states by one external record; empty result
    means the history is not a trace of the specification."""
    if frontier == ACCEPT_ALL:
        return ACCEPT_ALL
    if rec[0] == "fault":
        txid, op, loc = rec[1], rec[2], rec[3]
        if any(fault_possible(st, txid, op, loc) for st in frontier):
            return ACCEPT_ALL
        return frozenset()
    nxt = set()
    for st in frontier:
        nxt.update(match_record(st, rec))
    return frozenset(closure(nxt))


def accepts_history(records, txns, locs, witness=False, prealloc=0):
    """Membership of an inv/res/crash/fault record sequence.

    With witness=True also returns, on acceptance, one spec-state sequence
    (the state after each consumed record; a trailing ACCEPT_ALL marks a
    matched fault), else None.
    """
    records = tuple(records)
    if not witness:
        frontier = initial_frontier(txns, locs, prealloc)
        for rec in records:
            frontier = advance_frontier(frontier, rec)
            if frontier != ACCEPT_ALL and not frontier:
                return False
        return True

    dead = set()

    def dfs(pos, st, path):
        if (pos, st) in dead:
            return None
        if pos == len(records):
            return path
        rec = records[pos]
        if rec[0] == "fault":
            if fault_possible(st, rec[1], rec[2], rec[3]):
                return path + [ACCEPT_ALL]
        else:
            for st2 in match_record(st, rec):
                r = dfs(pos + 1, st2, path + [st2])
                if r is not None:
                    return r
        for st2 in eps_successors(st):
            r = dfs(pos, st2, path)
            if r is not None:
                return r
        dead.add((pos, st))
        return None

    chain = dfs(0, initial_state(txns, locs, prealloc), [])
    if chain is None:
        return False, None
    return True, chain


# ---------------------------------------------------------------------------
# Sequential lower bound
# ---------------------------------------------------------------------------

def sequential_histories(txns, locs, vals, ops):
    """All serial, crash-free, fault-free, abort-free histories at the given
    bounds: transactions run one at a time in ascending id order, each doing
    at most `ops` reads/writes/allocs then committing, with every response
    immediate.  Reads therefore always hit the last memory version."""
    out = set()

    def tx_round(txid, mems, prefix):
        if txid == txns:
            out.add(tuple(prefix))
            return
        begin = (("inv", txid, "begin", None, None),
                 ("res", txid, "begin", None, None))
        run_ops(txid, mems, prefix + list(begin), 0, 0,
                (BOT,) * locs)

    def run_ops(txid, mems, prefix, used, am, wset):
        # commit now
        mem = list(mems[-1])
        writer = am != 0 or any(v != BOT for v in wset)
        new_mems = mems
        if writer:
            m = am
            while m:
                low = m & -m
                mem[low.bit_length() - 1] = 0
                m ^= low
            for l, v in enumerate(wset):
                if v != BOT:
                    mem[l] = v
            new_mems = mems + (tuple(mem),)
        done = prefix + [("inv", txid, "commit", None, None),
                         ("res", txid, "commit", None, None)]
        tx_round(txid + 1, new_mems, done)
        if used >= ops:
            return
        last = mems[-1]
        for l in range(locs):
            allocated = (am >> l) & 1
            # read
            if wset[l] != BOT:
                v = wset[l]
            elif allocated:
                v = 0
            elif last[l] != BOT:
                v = last[l]
            else:
                v = None
            if v is not None:
                run_ops(txid, mems,
                        prefix + [("inv", txid, "read", l, None),
                                  ("res", txid, "read", l, v)],
                        used + 1, am, wset)
            # write
            if allocated or last[l] != BOT:
                for v in range(vals):
                    run_ops(txid, mems,
                            prefix + [("inv", txid, "write", l, v),
                                      ("res", txid, "write", l, v)],
                            used + 1, am, wset[:l] + (v,) + wset[l + 1:])
            # alloc
            if not allocated and last[l] == BOT:
                run_ops(txid, mems,
                        prefix + [("inv", txid, "alloc", None, None),
                                  ("res", txid, "alloc", l, None)],
                        used + 1, am | (1 << l), wset)

    tx_round(0, ((BOT,) * locs,), [])
    return out
