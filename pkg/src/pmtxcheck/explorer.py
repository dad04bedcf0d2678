"""Bounded exhaustive exploration with crash injection and online checks.

The explorer enumerates every interleaving of client decisions, algorithm
line-steps, buffer propagation/persist steps and crash points, deduplicating
on a fingerprint of the full machine state plus the emitted history.
Histories are interned in a trie so shared prefixes are checked once: an
incrementally maintained frontier of reference-spec states accompanies
every history prefix, and an empty frontier at an emit is a refinement
violation (the violating record prefix is the counterexample).

``check_upper`` is trace inclusion implementation <= spec; ``check_lower``
replays every sequential-spec history against the implementation (with
allocation branching, since the spec may allocate any free location);
``run_intro_cases`` reproduces the three crash-placement outcomes for the
allocate-write-commit/read scenario; the mutation registry wires the
checker-sensitivity experiments.
"""

from __future__ import annotations

import pickle
import time
from hashlib import blake2b

from . import refspec
from .engine import (CUT, M_CRASH, M_FLT, M_HIST, M_REC, M_TXNS,
                     all_terminal, initial_machine, successors)
from .pmdk import MUTATIONS, Layout
from .pmem import MODELS, PMem
from .stm import IMPLS, build_programs

DEFAULT_MAX_STATES = 20_000_000


class BudgetExceeded(Exception):
    pass


class Config:
    """One explorer configuration; compiles the step programs eagerly."""

    def __init__(self, impl, model, txns=2, locs=2, vals=2, buf=2,
                 max_crashes=0, ops=2, retry_bound=1, branch_alloc=False,
                 por=False, mutations=(), scripts=None, prealloc=0,
                 max_states=DEFAULT_MAX_STATES):
        if impl not in IMPLS:
            raise ValueError("unknown implementation %r" % (impl,))
        if model not in MODELS:
            raise ValueError("unknown memory model %r" % (model,))
        for mut in mutations:
            if mut not in MUTATIONS:
                raise ValueError("unknown mutation %r" % (mut,))
        self.impl = impl
        self.model = model
        self.txns = txns
        self.locs = locs
        self.vals = vals
        self.buf = buf
        self.max_crashes = max_crashes
        self.ops = ops
        self.retry_bound = retry_bound
        self.branch_alloc = branch_alloc
        self.por = por
        self.mutations = frozenset(mutations)
        self.scripts = scripts
        self.prealloc = prealloc
        self.max_states = max_states
        self.serial = impl == "pmdk-seq"
        self.layout = Layout(locs, txns, prealloc)
        self.pmem = PMem(self.layout.ncells, txns + 1, buf, model,
                         self.layout.initial_nvm())
        build_programs(self)

    def reduced(self, m):
        """Persist timing no longer observable: suppress free persist
        steps and drain on demand (only under --por)."""
        return self.por and m[M_CRASH] >= self.max_crashes


class ExploreResult:
    def __init__(self):
        self.states = 0
        self.transitions = 0
        self.complete = set()      # hist ids of maximal traces
        self.cut = set()           # hist ids pruned at the retry bound
        self.violations = []       # record tuples (first failing prefix)
        self.seconds = 0.0
        self._entries = None       # intern table for reconstruction

    def history_records(self, hid):
        out = []
        while hid:
            parent, rec = self._entries[hid]
            out.append(rec)
            hid = parent
        out.reverse()
        return tuple(out)

    def histories(self):
        return sorted(self.history_records(h)
                      for h in self.complete | self.cut)

    @property
    def ok(self):
        return not self.violations


def explore(cfg, check=True, stop_on_violation=False, dedup="history",
            state_hook=None):
    """Exhaustive DFS; returns an ExploreResult.  With check=True the
    reference-spec frontier runs online and refinement violations prune
    their branch.

    dedup="history" keys states on the full machine plus the emitted
    history (needed when the history *set* is the product, e.g. for the
    cross-checks); dedup="frontier" keys on the machine plus the spec
    frontier instead -- two states with equal machine and frontier have
    identical acceptance futures, so this is complete for violation
    finding and collapses the search the way a product automaton does.
    """
    if dedup not in ("history", "frontier"):
        raise ValueError("dedup must be 'history' or 'frontier'")
    if dedup == "frontier" and not check:
        raise ValueError("frontier dedup requires checking")
    t0 = time.monotonic()
    res = ExploreResult()
    entries = [(0, None)]                 # hist id -> (parent, record)
    intern = {}                           # (parent, record) -> hist id
    res._entries = entries
    frontiers = {0: refspec.initial_frontier(cfg.txns, cfg.locs,
                                             cfg.prealloc)
                 if check else None}
    fids = {frontiers[0]: 0}              # frontier -> dedup id

    by_frontier = dedup == "frontier"
    m0 = initial_machine(cfg)
    seen = {blake2b(pickle.dumps(m0, -1), digest_size=16).digest()}
    stack = [m0]
    dumps = pickle.dumps
    push = stack.append

    while stack:
        m = stack.pop()
        res.states += 1
        if res.states > cfg.max_states:
            raise BudgetExceeded("state budget exceeded (%d)"
                                 % cfg.max_states)
        if state_hook is not None:
            state_hook(cfg, m)
        if m[M_FLT] or (m[M_REC] is None and all_terminal(m)):
            res.complete.add(m[M_HIST])
            continue
        succs = successors(cfg, m)
        if not succs:
            # maximal but not all-terminal: e.g. an allocation blocked on an
            # empty free list (a disabled step) stalls its transaction and
            # anything awaiting the lock behind it
            res.complete.add(m[M_HIST])
            continue
        for m2, rec, tag in succs:
            res.transitions += 1
            if tag == CUT:
                res.cut.add(m[M_HIST])
                continue
            hid = m[M_HIST]
            if rec is not None:
                key = (hid, rec)
                h2 = intern.get(key)
                if h2 is None:
                    h2 = len(entries)
                    entries.append(key)
                    intern[key] = h2
                    if check:
                        f2 = refspec.advance_frontier(frontiers[hid], rec)
                        frontiers[h2] = f2
                        if f2 not in fids:
                            fids[f2] = len(fids)
                        if f2 != refspec.ACCEPT_ALL and not f2:
                            res.violations.append(res.history_records(h2))
                            if stop_on_violation:
                                res.seconds = time.monotonic() - t0
                                return res
                if check:
                    f2 = frontiers[h2]
                    if f2 != refspec.ACCEPT_ALL and not f2:
                        continue  # prune: already-reported violation
                hid = h2
            if m2[M_HIST] != hid:
                m2 = m2[:M_HIST] + (hid,) + m2[M_HIST + 1:]
            if by_frontier:
                key_m = m2[:M_HIST] + (fids[frontiers[hid]],) \
                    + m2[M_HIST + 1:]
            else:
                key_m = m2
            fp = blake2b(dumps(key_m, -1), digest_size=16).digest()
            if fp not in seen:
                seen.add(fp)
                push(m2)
    res.seconds = time.monotonic() - t0
    return res


# ---------------------------------------------------------------------------
# upper bound: implementation histories are spec traces
# ---------------------------------------------------------------------------

def check_upper(cfg, stop_on_violation=False, dedup="frontier"):
    return explore(cfg, check=True, stop_on_violation=stop_on_violation,
                   dedup=dedup)


# ---------------------------------------------------------------------------
# lower bound: every sequential-spec history is producible
# ---------------------------------------------------------------------------

def _scripts_from_history(records, txns):
    ops = {t: [] for t in range(txns)}
    for rec in records:
        if rec[0] != "inv":
            continue
        _k, t, op, loc, val = rec
        if op == "read":
            ops[t].append(("read", loc))
        elif op == "write":
            ops[t].append(("write", loc, val))
        elif op == "alloc":
            ops[t].append(("alloc",))
    return tuple((tuple(ops[t]), 0) for t in range(txns))


def reproduce(cfg_base, target):
    """Directed search: can the implementation emit exactly `target`?"""
    cfg = Config(cfg_base.impl, cfg_base.model, txns=cfg_base.txns,
                 locs=cfg_base.locs, vals=cfg_base.vals, buf=cfg_base.buf,
                 max_crashes=0, ops=cfg_base.ops,
                 retry_bound=cfg_base.retry_bound, branch_alloc=True,
                 por=True, mutations=cfg_base.mutations,
                 scripts=_scripts_from_history(target, cfg_base.txns),
                 prealloc=cfg_base.prealloc,
                 max_states=cfg_base.max_states)
    m0 = initial_machine(cfg)
    seen = {blake2b(pickle.dumps(m0, -1), digest_size=16).digest()}
    stack = [m0]
    n = len(target)
    while stack:
        m = stack.pop()
        k = m[M_HIST]  # reused as the matched-record count
        if m[M_FLT]:
            continue
        if m[M_REC] is None and all_terminal(m):
            if k == n:
                return True
            continue
        for m2, rec, tag in successors(cfg, m):
            if tag == CUT:
                continue
            k2 = k
            if rec is not None:
                if k == n or rec != target[k]:
                    continue
                k2 = k + 1
            if m2[M_HIST] != k2:
                m2 = m2[:M_HIST] + (k2,) + m2[M_HIST + 1:]
            fp = blake2b(pickle.dumps(m2, -1), digest_size=16).digest()
            if fp not in seen:
                seen.add(fp)
                stack.append(m2)
    return False


class LowerResult:
    def __init__(self, total, unproducible, seconds):
        self.total = total
        self.unproducible = unproducible
        self.seconds = seconds

    @property
    def ok(self):
        return not self.unproducible


def check_lower(impl, model="psc", txns=2, locs=2, vals=2, buf=2, ops=2,
                retry_bound=1, mutations=(), max_states=DEFAULT_MAX_STATES):
    """Every sequential-spec history must be producible by `impl`."""
    t0 = time.monotonic()
    base = Config(impl, model, txns=txns, locs=locs, vals=vals, buf=buf,
                  ops=ops, retry_bound=retry_bound, mutations=mutations,
                  max_states=max_states)
    targets = sorted(refspec.sequential_histories(txns, locs, vals, ops))
    missing = [h for h in targets if not reproduce(base, h)]
    return LowerResult(len(targets), missing, time.monotonic() - t0)


# ---------------------------------------------------------------------------
# scenario and mutation drivers
# ---------------------------------------------------------------------------

def run_intro_cases(model="psc", impl="pmdk-seq", por=True):
    """Crash-placement outcomes for: T1 allocates x and writes 42, then
    commits; after the crash T2 reads x.  Classifies every crashed trace by
    where the crash fell relative to T1's commit and collects T2's outcome
    ("fault" or the value read)."""
    cfg = Config(impl, model, txns=2, locs=1, vals=43, buf=2, max_crashes=1,
                 ops=2, por=por,
                 scripts=(((("alloc",), ("write", 0, 42)), 0),
                          (((("read", 0)),), 1)))
    res = explore(cfg, check=True)
    buckets = {"before-commit": set(), "during-commit": set(),
               "after-commit": set(), "clean": set()}
    for hid in res.complete | res.cut:
        records = res.history_records(hid)
        crash_at = inv_begin = inv_commit = res_commit = None
        outcome = None
        for i, rec in enumerate(records):
            if rec == ("crash",):
                crash_at = i
            elif rec[:3] == ("inv", 0, "begin"):
                inv_begin = i
            elif rec[:3] == ("inv", 0, "commit"):
                inv_commit = i
            elif rec[:3] == ("res", 0, "commit"):
                res_commit = i
            elif rec[:3] == ("res", 1, "read"):
                outcome = rec[4]
            elif rec[:3] == ("fault", 1, "read"):
                outcome = "fault"
        if crash_at is None or outcome is None:
            continue
        if inv_begin is None or crash_at < inv_begin:
            buckets["clean"].add(outcome)
        elif inv_commit is None or crash_at < inv_commit:
            buckets["before-commit"].add(outcome)
        elif res_commit is not None and crash_at > res_commit:
            buckets["after-commit"].add(outcome)
        else:
            buckets["during-commit"].add(outcome)
    return buckets, res


def skip_validate_config(mutate=True, por=True):
    """Two transactions over a preallocated heap exposing the commit-loop
    validation: one snapshots location 0 then commits a write to location
    1, the other commits a write to location 0 in between."""
    muts = ("skip-validate",) if mutate else ()
    return Config("pmdk-norec", "psc", txns=2, locs=2, vals=2, buf=2,
                  max_crashes=0, ops=2, retry_bound=2, por=por,
                  mutations=muts, prealloc=2,
                  scripts=(((("read", 0), ("write", 1, 1)), 0),
                           ((("write", 0, 1),), 0)))


def mutation_check_config(name, impl="pmdk-seq", model="psc", por=True):
    """The criterion-1 style configuration on which `name` must produce a
    counterexample (skip-validate needs the scripted 3-txn scenario)."""
    if name == "skip-validate":
        return skip_validate_config(mutate=True, por=por)
    return Config(impl, model, txns=2, locs=2, vals=2, buf=2, max_crashes=1,
                  ops=2, por=por, mutations=(name,))
