"""Step-machine engine: machine state layout and successor generation.

A machine is one flat tuple, cheap to hash and copy:

    (mem, glb, free, txns, rec, crashes, era, hist, faulted)

* ``mem``  -- (nvm, pbufs, sbufs) from the pmem simulator
* ``glb``  -- the volatile SC lock/counter used by the concurrency layers
* ``free`` -- volatile free-location bitmask
* ``txns`` -- one slot per transaction:
  (status, op, ip, regs, tredo_uv, tredo_ck, tredo_allocs, rdset, wrset,
   ops_used, retries, loc_snapshot)
* ``rec``  -- None, or the recovery automaton state (txid, phase, mask)
* ``hist`` -- interned history id (maintained by the explorer)

Transactions are driven by client *decision* steps (which emit invocation
records and install an op program) and per-line program steps from the
compiled step table.  System steps are store-buffer propagation, per-cell
persists, and crashes (followed by the recovery program before anything
else runs).
"""

from __future__ import annotations

# machine tuple layout
M_MEM, M_GLB, M_FREE, M_TXNS, M_REC, M_CRASH, M_ERA, M_HIST, M_FLT = range(9)

# transaction slot layout
(S_ST, S_OP, S_IP, S_REGS, S_UV, S_CK, S_AM, S_RD, S_WR,
 S_USED, S_RETR, S_LOC) = range(12)

# slot statuses
NS, RUN, RDY, COMM, ABRT, DEAD, FLT = range(7)
TERMINAL = (COMM, ABRT, DEAD, FLT)

CUT = "cut"

OPS = ("read", "write", "alloc", "commit")


def initial_machine(cfg):
    slot = (NS, None, 0, (), 1, -1, 0,
            (-1,) * cfg.locs, (-1,) * cfg.locs, 0, 0, 0)
    free = ((1 << cfg.locs) - 1) & ~((1 << cfg.prealloc) - 1)
    return (cfg.pmem.initial(), 0, free, (slot,) * cfg.txns,
            None, 0, 0, 0, 0)


def set_slot(m, ti, slot):
    txns = m[M_TXNS]
    return m[:M_TXNS] + (txns[:ti] + (slot,) + txns[ti + 1:],) \
        + m[M_TXNS + 1:]


def set_mem(m, mem):
    return (mem,) + m[1:]


def set_mem_slot(m, mem, ti, slot):
    txns = m[M_TXNS]
    return (mem,) + m[1:M_TXNS] \
        + (txns[:ti] + (slot,) + txns[ti + 1:],) + m[M_TXNS + 1:]


def slot_upd(slot, *pairs):
    s = list(slot)
    for i, v in pairs:
        s[i] = v
    return tuple(s)


def lowbit(mask):
    return (mask & -mask).bit_length() - 1


def bits(mask):
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def all_terminal(m):
    return all(s[S_ST] in TERMINAL for s in m[M_TXNS])


# ---------------------------------------------------------------------------
# successors
# ---------------------------------------------------------------------------

def crash_machine(cfg, m, nvm=None):
    """Buffers discarded, volatile state lost, live transactions die, the
    recovery automaton takes over in a fresh era.  `nvm` overrides the
    surviving memory (crash-prefix branching under --por)."""
    mem = cfg.pmem.crash(m[M_MEM])
    if nvm is not None:
        mem = (nvm,) + mem[1:]
    txns = tuple(
        slot_upd(s, (S_ST, DEAD), (S_OP, None)) if s[S_ST] in (RUN, RDY)
        else s
        for s in m[M_TXNS])
    return (mem, 0, 0, txns, (0, 0, 0), m[M_CRASH] + 1, m[M_ERA] + 1,
            m[M_HIST], m[M_FLT])


def _decision_steps(cfg, m, ti, out):
    slot = m[M_TXNS][ti]
    if slot[S_ST] == NS:
        if not _may_begin(cfg, m, ti):
            return
        script = cfg.scripts[ti] if cfg.scripts else None
        if script is not None and m[M_ERA] < script[1]:
            return
        slot2 = slot_upd(slot, (S_ST, RUN), (S_OP, "begin"),
                         (S_IP, cfg.entry["begin"]), (S_REGS, ()))
        out.append((set_slot(m, ti, slot2),
                    ("inv", ti, "begin", None, None), None))
        return
    if slot[S_ST] != RDY:
        return
    if cfg.scripts:
        ops, _era_min = cfg.scripts[ti]
        k = slot[S_USED]
        choice = ops[k] if k < len(ops) else ("commit",)
        choices = [choice]
    else:
        choices = [("commit",)]
        if slot[S_USED] < cfg.ops:
            choices += [("alloc",)]
            choices += [("read", l) for l in range(cfg.locs)]
            choices += [("write", l, v) for l in range(cfg.locs)
                        for v in range(cfg.vals)]
    for ch in choices:
        op = ch[0]
        regs = ()
        loc = val = None
        if op == "read":
            loc = ch[1]
            regs = (loc,)
        elif op == "write":
            loc, val = ch[1], ch[2]
            regs = (loc, val)
        used = slot[S_USED] + (0 if op == "commit" else 1)
        slot2 = slot_upd(slot, (S_ST, RUN), (S_OP, op),
                         (S_IP, cfg.entry[op]), (S_REGS, regs),
                         (S_USED, used), (S_RETR, 0))
        out.append((set_slot(m, ti, slot2), ("inv", ti, op, loc, val), None))


def _may_begin(cfg, m, ti):
    txns = m[M_TXNS]
    for j in range(ti):
        if txns[j][S_ST] == NS:
            return False  # canonical ascending begin order
    if cfg.serial:
        for j, s in enumerate(txns):
            if j != ti and s[S_ST] in (RUN, RDY):
                return False
    return True


def successors(cfg, m):
    """All scheduler steps from `m` as (machine', record|None, tag) where
    tag is None or "cut"."""
    out = []
    pm = cfg.pmem
    rec = m[M_REC]
    reduced = cfg.reduced(m)
    if m[M_FLT]:
        return out

    if rec is not None:
        r = cfg.recovery_step(m)
        if reduced:
            # sole actor, crash budget spent: run it as a forced chain,
            # propagating its own store buffer when a flush awaits it
            if r is not None:
                return [(m2, emit, None) for m2, emit in r]
            return [(set_mem(m, pm.propagate_direct(m[M_MEM], cfg.txns)),
                     None, None)]
        if r is not None:
            for m2, emit in r:
                out.append((m2, emit, None))
    else:
        if reduced:
            # steps over per-transaction private cells are invisible to
            # every other component and there is no crash left to observe
            # them: schedule the first enabled one deterministically
            for ti in range(cfg.txns):
                slot = m[M_TXNS][ti]
                if slot[S_ST] == RUN and slot[S_IP] in cfg.private_ips:
                    r = cfg.step_table[slot[S_IP]](m, ti)
                    if r is not None:
                        return [(m2, emit, None) for m2, emit in r]
        for ti in range(cfg.txns):
            slot = m[M_TXNS][ti]
            if slot[S_ST] == RUN:
                r = cfg.step_table[slot[S_IP]](m, ti)
                if r is None:
                    continue
                if r == CUT:
                    out.append((None, None, CUT))
                    continue
                for m2, emit in r:
                    out.append((m2, emit, None))
            elif slot[S_ST] in (NS, RDY):
                _decision_steps(cfg, m, ti, out)

    # store-buffer propagation (always branches: TSO visibility)
    if pm.model == "ptso":
        for tid in range(cfg.txns + 1):
            if not m[M_MEM][2][tid]:
                continue
            if cfg.reduced(m):
                out.append((set_mem(m, pm.propagate_direct(m[M_MEM], tid)),
                            None, None))
            elif cfg.por:
                out.append((set_mem(m, pm.propagate_forced(m[M_MEM], tid)),
                            None, None))
            else:
                mem2 = pm.propagate(m[M_MEM], tid)
                if mem2 is not None:
                    out.append((set_mem(m, mem2), None, None))

    # free persist steps only in the unreduced mode; under --por crash
    # outcomes are enumerated at the crash step and flushes drain on demand
    if not cfg.por:
        for c in pm.persistable(m[M_MEM]):
            out.append((set_mem(m, pm.persist(m[M_MEM], c)), None, None))

    # crash (disabled once every transaction is terminal: a trailing crash
    # marker is accepted whenever the history without it is)
    if m[M_CRASH] < cfg.max_crashes and not all_terminal(m):
        if cfg.por:
            for nvm in _crash_nvms(cfg, m):
                out.append((crash_machine(cfg, m, nvm), ("crash",), None))
        else:
            out.append((crash_machine(cfg, m), ("crash",), None))

    return out


def _crash_nvms(cfg, m):
    """Distinct reachable post-crash memories (per-cell prefix choices)."""
    cands = cfg.pmem.crash_nvm_candidates(m[M_MEM])
    dirty = [(c, vals) for c, vals in enumerate(cands) if len(vals) > 1]
    base = list(m[M_MEM][0])
    if not dirty:
        return [tuple(base)]
    out = []

    def rec(i):
        if i == len(dirty):
            out.append(tuple(base))
            return
        c, vals = dirty[i]
        for v in vals:
            base[c] = v
            rec(i + 1)
        base[c] = m[M_MEM][0][c]

    rec(0)
    return out
