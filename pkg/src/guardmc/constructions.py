"""Run transformations: flooding, evacuation, fair extension, shrink, grow.

Every transformation builds, for each process of the target instance, a local
plan aligned to the *moments* of the source run (stem positions, then loop
positions repeating).  A plan is a sequence of (state, input, moved) entries;
the assembler merges plans into a global lasso run by firing simultaneous
movers one at a time in ascending process order and cutting a periodic tail
at source-loop boundaries.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import ConstructionError, SemanticError, UnsupportedTaskError
from .model import (A, CONJUNCTIVE, DISJUNCTIVE, Configuration, GuardedSystem,
                    LassoRun, LocalTrace, enabled_moves, guard_holds,
                    is_enabled, is_one_conjunctive, project, stutter_equiv,
                    validate_run)


# ---------------------------------------------------------------------------
# Source unrolling


class _Source:
    """Moment-indexed view of a lasso (or finite) run."""

    def __init__(self, sys, x: LassoRun):
        self.sys = sys
        self.x = x
        self.seq = list(x.stem) + list(x.loop)
        self.S = len(x.stem)
        self.L = len(x.loop)
        self.n = x.n
        self.finite = not x.loop

    def at(self, m):
        if m < self.S:
            return self.seq[m]
        if self.finite:
            return (self.seq[-1][0], None)
        return self.seq[self.S + (m - self.S) % self.L]

    def config(self, m) -> Configuration:
        return self.at(m)[0]

    def mover(self, m):
        return self.at(m)[1]

    def state_of(self, p, m):
        return self.config(m).state_of(p)

    def input_of(self, p, m):
        return self.config(m).input_of(p)

    def moves(self, p, m) -> bool:
        """True if p takes the step from moment m to m+1."""
        return self.mover(m) == p

    def loop_states(self, ps):
        """States occupied by ps on the loop (for a finite run: at the end),
        i.e. visited infinitely often."""
        if self.finite:
            c = self.seq[-1][0]
            return {c.state_of(p) for p in ps}
        out = set()
        for c, _ in self.x.loop:
            out.update(c.state_of(p) for p in ps)
        return out

    def all_states(self, ps):
        out = set()
        for c, _ in self.seq:
            out.update(c.state_of(p) for p in ps)
        return out

    def first_visit(self, q, ps):
        """(moment, process) of the first visit of q by ps, or None."""
        for m in range(self.S + self.L):
            for p in ps:
                if self.state_of(p, m) == q:
                    return m, p
        return None

    def deadlocked(self):
        """Processes disabled and unmoving on the tail (all, if finite)."""
        if self.finite:
            return set(range(self.n + 1))
        out = set()
        movers = {mv for _, mv in self.x.loop}
        for p in range(self.n + 1):
            if p in movers:
                continue
            if all(not any(is_enabled(self.sys, c, p, tr)
                           for tr in self.sys.template_of(p).transitions)
                   for c, _ in self.x.loop):
                out.add(p)
        return out


# ---------------------------------------------------------------------------
# Visit sets and deadlock anatomy


@dataclass(frozen=True)
class VisitSets:
    visited: frozenset
    vis_inf: frozenset
    vis_fin: frozenset


def visit_sets(x, F) -> VisitSets:
    """States visited by B-processes F; infinitely often = on the loop."""
    src = x if isinstance(x, _Source) else _Source(None, x)
    F = sorted(F)
    inf = frozenset(src.loop_states(F))
    allv = frozenset(src.all_states(F))
    return VisitSets(allv, inf, allv - inf)


@dataclass(frozen=True)
class DeadlockAnatomy:
    dead_states: frozenset
    dead1: frozenset
    dead2: frozenset
    dead_guards: frozenset
    deadlocked_processes: frozenset


def _blocked_transitions(sys, src, p, m):
    t = sys.template_of(p)
    st, inp = src.state_of(p, m), src.input_of(p, m)
    return [tr for tr in t.transitions if tr.source == st and tr.letter == inp]


def deadlock_anatomy(sys: GuardedSystem, x: LassoRun) -> DeadlockAnatomy:
    src = _Source(sys, x)
    dead_procs = src.deadlocked()
    d = src.S if not src.finite else len(src.seq) - 1
    dead_states, dead1, dead2, guards = set(), set(), set(), set()
    for p in sorted(dead_procs):
        q = src.state_of(p, d)
        dead_states.add(q)
        again = False
        for tr in _blocked_transitions(sys, src, p, d):
            if sys.semantics == DISJUNCTIVE:
                # one more process in q would provide its own witness
                if q in tr.guard.members:
                    again = True
            else:
                excluded = frozenset(sys.all_states) - tr.guard.members
                guards.update(excluded)
                if excluded == {q}:
                    again = True
        if sys.semantics == DISJUNCTIVE:
            if again:
                dead1.add(q)
        elif again:
            dead2.add(q)
    if sys.semantics == DISJUNCTIVE:
        dead2 = dead_states - dead1
    else:
        dead1 = dead_states - dead2
    return DeadlockAnatomy(frozenset(dead_states), frozenset(dead1),
                           frozenset(dead2), frozenset(guards),
                           frozenset(dead_procs))


# ---------------------------------------------------------------------------
# Plans and assembly


class _Plan:
    """One target process's trajectory over source moments."""

    __slots__ = ("states", "inputs", "moved")

    def __init__(self, H):
        self.states = [None] * H
        self.inputs = [None] * H
        self.moved = [False] * H   # moved[m]: takes the step from m-1 to m

    def park(self, lo, hi, state, inp):
        for m in range(lo, hi):
            self.states[m] = state
            self.inputs[m] = inp
            self.moved[m] = False

    def val(self, m):
        return self.states[m], self.inputs[m]


def _mirror(pl: _Plan, src: _Source, sp: int, lo: int, hi: int):
    """Copy sp's trajectory (and moves) onto moments [lo, hi]."""
    for m in range(lo, min(hi + 1, len(pl.states))):
        pl.states[m] = src.state_of(sp, m)
        pl.inputs[m] = src.input_of(sp, m)
        if m > lo:
            pl.moved[m] = src.moves(sp, m - 1)


def _pin(pl: _Plan, settle: int, upto: int, inp):
    """Retroactively fix the input read on the move that parked the plan
    (a mover's fresh input is free; it then stays frozen)."""
    for m in range(settle, min(upto + 1, len(pl.states))):
        pl.inputs[m] = inp


class _Builder:
    """Accumulates plans over a fixed horizon and assembles the target run."""

    def __init__(self, sys: GuardedSystem, src: _Source, passes: int = 96):
        self.sys = sys
        self.src = src
        self.H = len(src.seq) if src.finite else src.S + passes * src.L
        self.plans = []   # index 0 is the A-process

    def new_plan(self) -> _Plan:
        p = _Plan(self.H)
        self.plans.append(p)
        return p

    def add_copy(self, sp: int) -> _Plan:
        pl = self.new_plan()
        _mirror(pl, self.src, sp, 0, self.H - 1)
        return pl

    def add_copy_park(self, sp: int, stop: int, park_input=None) -> _Plan:
        """Copy sp until moment stop, then stay put forever."""
        pl = self.new_plan()
        _mirror(pl, self.src, sp, 0, min(stop, self.H - 1))
        if stop + 1 <= self.H - 1:
            st = self.src.state_of(sp, stop)
            inp = park_input if park_input is not None \
                else self.src.input_of(sp, stop)
            pl.park(stop + 1, self.H, st, inp)
            if park_input is not None:
                settle = stop
                while settle > 0 and not pl.moved[settle]:
                    settle -= 1
                _pin(pl, settle, stop, inp)
        return pl

    def add_flood(self, q: str, F):
        """Mimic the first F-visitor of q until it reaches q, then park.
        Returns (plan, settle moment)."""
        hit = self.src.first_visit(q, F)
        if hit is None:
            raise ConstructionError(f"state {q} never visited")
        m_q, sp = hit
        return self.add_copy_park(sp, m_q), m_q

    def add_stay(self, state, inp) -> _Plan:
        pl = self.new_plan()
        pl.park(0, self.H, state, inp)
        return pl

    def add_alias(self, other: _Plan) -> _Plan:
        """A second process with the same trajectory (moves in lockstep)."""
        pl = self.new_plan()
        pl.states = list(other.states)
        pl.inputs = list(other.inputs)
        pl.moved = list(other.moved)
        return pl

    # -- assembly ----------------------------------------------------------

    def _flatten(self, lo, hi):
        """Sub-steps for moments (lo, hi]: (config, mover) pairs with
        simultaneous movers sequentialized in ascending process order."""
        out = []
        cur = [list(pl.val(lo)) for pl in self.plans]

        def snapshot():
            return Configuration(cur[0][0], tuple(v[0] for v in cur[1:]),
                                 cur[0][1], tuple(v[1] for v in cur[1:]))

        for m in range(lo + 1, hi + 1):
            for p, pl in enumerate(self.plans):
                if pl.moved[m]:
                    out.append((snapshot(), p))
                    cur[p] = list(pl.val(m))
        return out, snapshot()

    def assemble(self, finite: bool = False) -> LassoRun:
        if finite:
            steps, final = self._flatten(0, self.H - 1)
            return LassoRun(tuple(steps) + ((final, None),), ())
        S, L, H = self.src.S, self.src.L, self.H
        rows = [tuple((pl.states[m], pl.inputs[m], pl.moved[m])
                      for pl in self.plans) for m in range(H)]
        # two consecutive equal windows close a valid lasso: the repeated
        # window steps through identical configurations and movers
        for mult in range(1, (H - S) // (2 * L) + 1):
            P = mult * L
            for b1 in range(S, H - 2 * P + 1, L):
                if rows[b1:b1 + P] != rows[b1 + P:b1 + 2 * P]:
                    continue
                if not any(any(r[2] for r in rows[m])
                           for m in range(b1 + 1, b1 + P + 1)):
                    continue   # move-free window: keep searching
                stem, _ = self._flatten(0, b1)
                loop, _ = self._flatten(b1, b1 + P)
                return LassoRun(tuple(stem), tuple(loop))
        raise ConstructionError("no periodic tail found within horizon")


# ---------------------------------------------------------------------------
# Flooding and evacuation (stand-alone, trace-valued)


def flood(x: LassoRun, q: str) -> LocalTrace:
    """The flooding trace for q: the first visitor's prefix, then q forever."""
    src = _Source(None, x)
    hit = src.first_visit(q, range(1, src.n + 1))
    if hit is None:
        raise ConstructionError(f"state {q} never visited by a B-process")
    m_q, sp = hit
    steps = tuple((src.state_of(sp, m), src.input_of(sp, m))
                  for m in range(m_q))
    return LocalTrace(steps, ((q, src.input_of(sp, m_q)),))


def _evac_points(src: _Source, F, q):
    vs = visit_sets(src, F)
    if q in vs.vis_inf:
        raise ConstructionError(f"state {q} is visited infinitely often by F")
    if q not in vs.visited:
        raise ConstructionError(f"state {q} never visited by F")
    if not vs.vis_inf:
        raise ConstructionError("no evacuation target: vis_inf(F) is empty")
    f_q, first_p = src.first_visit(q, F)
    l_q = last_p = None
    for m in range(src.S + src.L - 1, -1, -1):
        for p in sorted(F):
            if src.state_of(p, m) == q:
                l_q, last_p = m, p
                break
        if l_q is not None:
            break
    m_ev = l_q
    while src.state_of(last_p, m_ev) not in vs.vis_inf:
        m_ev += 1
    return f_q, first_p, l_q, last_p, m_ev


def flood_evacuate(x: LassoRun, F, q: str) -> LocalTrace:
    """Flood q (finitely visited by F), then evacuate into vis_inf(F)."""
    src = _Source(None, x)
    f_q, first_p, l_q, last_p, m_ev = _evac_points(src, sorted(F), q)
    steps = [(src.state_of(first_p, m), src.input_of(first_p, m))
             for m in range(f_q)]
    steps += [(q, src.input_of(last_p, l_q))] * (l_q - f_q + 1)
    steps += [(src.state_of(last_p, m), src.input_of(last_p, m))
              for m in range(l_q + 1, m_ev + 1)]
    return LocalTrace(tuple(steps),
                      ((src.state_of(last_p, m_ev),
                        src.input_of(last_p, m_ev)),))


def _add_evacuee(b: _Builder, F, q: str):
    """Builder form of flood_evacuate.  Returns (plan, settle, target)."""
    src = b.src
    f_q, first_p, l_q, last_p, m_ev = _evac_points(src, sorted(F), q)
    pl = b.new_plan()
    _mirror(pl, src, first_p, 0, min(f_q, b.H - 1))
    pl.park(f_q + 1, min(l_q + 1, b.H), q, src.input_of(last_p, l_q))
    settle = min(f_q, b.H - 1)
    while settle > 0 and not pl.moved[settle]:
        settle -= 1
    _pin(pl, settle, l_q, src.input_of(last_p, l_q))
    for m in range(l_q + 1, min(m_ev + 1, b.H)):
        pl.states[m] = src.state_of(last_p, m)
        pl.inputs[m] = src.input_of(last_p, m)
        pl.moved[m] = src.moves(last_p, m - 1)
    tgt = src.state_of(last_p, m_ev)
    if m_ev + 1 < b.H:
        pl.park(m_ev + 1, b.H, tgt, src.input_of(last_p, m_ev))
    return pl, m_ev, tgt


def _attach(pl: _Plan, settle: int, hosts):
    """After settling, mimic (in lockstep) the first host plan found at the
    settled state, so the process keeps moving."""
    tgt = pl.states[settle]
    pick = None
    for host in hosts:
        for m in range(settle, len(pl.states)):
            if host.states[m] == tgt:
                if pick is None or m < pick[1]:
                    pick = (host, m)
                break
    if pick is None:
        raise ConstructionError(f"no moving process revisits {tgt}")
    host, mw = pick
    _pin(pl, settle, mw, host.inputs[mw])
    for m in range(mw + 1, len(pl.states)):
        pl.states[m] = host.states[m]
        pl.inputs[m] = host.inputs[m]
        pl.moved[m] = host.moved[m]


# ---------------------------------------------------------------------------
# Shadow scheduling (turn-taking, carrying)


def _arrivals(src: _Source, sp: int, q: str, lo: int, hi: int):
    """Moments in [lo, hi) at which sp is at q, not having been just before."""
    out = []
    for m in range(lo, hi):
        if src.state_of(sp, m) == q and (m == lo
                                         or src.state_of(sp, m - 1) != q):
            out.append(m)
    return out


def _turn_take(b: _Builder, q: str, sp: int, start: int, members):
    """members: [(plan, settle)] already parked at q from settle onward.
    They take turns mimicking sp, keeping q occupied at all times."""
    src = b.src
    start = max([start] + [s for _, s in members])
    arr = _arrivals(src, sp, q, start, b.H)
    if not arr:
        raise ConstructionError(f"mimicked process never at {q} after {start}")
    if len(arr) == 1:
        # sp stays at q (possibly self-looping); everyone mirrors it outright
        for pl, settle in members:
            _pin(pl, settle, arr[0], src.input_of(sp, arr[0]))
            _mirror(pl, src, sp, arr[0], b.H - 1)
        return
    k = len(members)
    windows = list(zip(arr, arr[1:]))
    for j, (w0, w1) in enumerate(windows):
        pl, settle = members[j % k]
        if j < k:
            _pin(pl, settle, w0, src.input_of(sp, w0))
        _mirror(pl, src, sp, w0, w1)
        nxt = j + k
        pin = src.input_of(sp, arr[nxt] if nxt < len(arr) else w1)
        pl.park(w1, b.H, q, pin)
        pl.moved[w1] = src.moves(sp, w1 - 1)
        pl.inputs[w1] = pin


def _carry_rotation(b: _Builder, carrier: int, slots, start: int):
    """slots: [(state, plan, settle)] parked over the intersection states.
    Whenever the carrier enters the state of the pending carry, the process
    parked there mimics the carrier until it reaches the next state of the
    cycle, so every slot keeps rotating and moving."""
    src = b.src
    order = []
    for q, _, _ in slots:
        if q not in order:
            order.append(q)
    order.sort()
    start = max([start] + [s for _, _, s in slots])
    loc = [[q, pl, -i] for i, (q, pl, _) in enumerate(slots)]
    settles = {id(pl): s for _, pl, s in slots}
    sched = []
    cur = order[0]
    m = start
    while m < b.H - 1:
        cands = [e for e in loc if e[0] == cur]
        if not cands:
            break
        entry = min(cands, key=lambda e: e[2])
        tgt = order[(order.index(cur) + 1) % len(order)]
        ent = _arrivals(src, carrier, cur, m, b.H)
        if not ent:
            break
        lo = ent[0]
        hi = lo + 1
        while hi < b.H and not (src.state_of(carrier, hi) == tgt
                                and any(src.moves(carrier, t)
                                        for t in range(lo, hi))):
            hi += 1
        if hi >= b.H:
            break
        sched.append((entry[1], lo, hi))
        entry[0], entry[2] = tgt, hi
        cur, m = tgt, hi
    for j, (pl, lo, hi) in enumerate(sched):
        if not any(p2 is pl for p2, _, _ in sched[:j]):
            _pin(pl, settles[id(pl)], lo, src.input_of(carrier, lo))
        _mirror(pl, src, carrier, lo, hi)
        nxt = next((lo2 for p2, lo2, _ in sched[j + 1:] if p2 is pl), None)
        pin = src.input_of(carrier, nxt if nxt is not None else hi)
        pl.park(hi, b.H, src.state_of(carrier, hi), pin)
        pl.moved[hi] = src.moves(carrier, hi - 1)
        pl.inputs[hi] = pin


# ---------------------------------------------------------------------------
# Fair extension (public operation)


def fair_extension(sys: GuardedSystem, x_suffix: LassoRun,
                   seed: Configuration) -> LassoRun:
    """Extend a seed assignment of the cutoff instance into an unconditionally
    fair path that copies (A, B_1) from the suffix run.  The result is a path
    from the seed, not an initialized run."""
    src = _Source(sys, x_suffix)
    if src.finite:
        raise ConstructionError("fair extension needs an infinite suffix")
    vsB = visit_sets(x_suffix, range(1, src.n + 1))
    if vsB.vis_fin:
        raise ConstructionError(
            f"suffix still visits transient states {sorted(vsB.vis_fin)}")
    vi1 = src.loop_states([1])
    vio = src.loop_states(range(2, src.n + 1))
    excl = sorted(vio - vi1)
    inter = sorted(vio & vi1)
    counts = {}
    for s in seed.statesB:
        counts[s] = counts.get(s, 0) + 1

    def own(q):
        return 1 if src.state_of(1, 0) == q else 0

    if seed.stateA != src.state_of(A, 0) \
            or seed.statesB[0] != src.state_of(1, 0):
        raise ConstructionError("seed must place A and B_1 as in the suffix")
    for q in excl:
        if counts.get(q, 0) - own(q) < 2:
            raise ConstructionError(f"seed needs two processes in {q}")
    footnote = len(vi1) == 1 and len(vio) == len(sys.templateB.states)
    if inter:
        qstar = inter[0]
        if counts.get(qstar, 0) - own(qstar) < (1 if footnote else 2):
            raise ConstructionError(f"seed is missing a process in {qstar}")
        for q in inter[1:]:
            if counts.get(q, 0) - own(q) < 1:
                raise ConstructionError(f"seed needs a process in {q}")
    b = _Builder(sys, src)
    b.add_copy(A)
    b.add_copy(1)
    plan_of = {}
    filler = sys.templateB.letters[0]
    for q in excl:
        sp = next(p for p in range(2, src.n + 1) if q in src.loop_states([p]))
        m1, m2 = b.add_stay(q, filler), b.add_stay(q, filler)
        _turn_take(b, q, sp, 0, [(m1, 0), (m2, 0)])
        plan_of[q] = m1
    if inter:
        slots = ([] if footnote else
                 [(inter[0], b.add_stay(inter[0], filler), 0)])
        slots += [(q, b.add_stay(q, filler), 0) for q in inter]
        _carry_rotation(b, 1, slots, 0)
        for q, pl, _ in slots:
            plan_of.setdefault(q, pl)
    while len(b.plans) - 1 < seed.n:
        # leftover seed processes mimic a designated process of some state
        b.add_alias(plan_of[min(plan_of)] if plan_of else b.plans[1])
    return b.assemble()


# ---------------------------------------------------------------------------
# Class checks and fairness replay


def _fairness_ok(sys, y: LassoRun, fairness: str, initializing=False):
    """Replay a fairness predicate on the loop of y.  Finite maximal runs
    belong to every fairness class."""
    if fairness == "none":
        return True
    if not y.loop:
        return y.deadlocked
    movers = {mv for _, mv in y.loop}
    n = y.n
    if fairness == "uncond":
        ok = movers >= set(range(n + 1))
    else:
        ok = True
        for p in range(n + 1):
            if p in movers:
                continue
            if any(any(is_enabled(sys, c, p, tr)
                       for tr in sys.template_of(p).transitions)
                   for c, _ in y.loop):
                ok = False
    if ok and initializing:
        for p in movers:
            init = sys.template_of(p).init
            if all(c.state_of(p) != init for c, _ in y.loop):
                ok = False
    return ok


def _deadlocked_somehow(sys, y: LassoRun) -> bool:
    if y.deadlocked:
        return True
    if not y.loop:
        return False
    return bool(_Source(sys, y).deadlocked())


def _check_class(sys, x, task, fairness, initializing):
    src = _Source(sys, x)
    if task == "props":
        if src.finite:
            raise SemanticError("class-mismatch: property runs are infinite")
        if not _fairness_ok(sys, x, fairness, initializing):
            raise SemanticError(f"class-mismatch: run is not {fairness}-fair")
    else:
        if not src.finite and not src.deadlocked():
            raise SemanticError("class-mismatch: run has no deadlock")
        if not src.finite and fairness == "strong" \
                and not _fairness_ok(sys, x, "strong", initializing):
            raise SemanticError("class-mismatch: run is not strong-fair")
    return src


# ---------------------------------------------------------------------------
# shrink_run


def _task_cutoff(sys, task, fairness, tracked):
    from .cutoffs import CutoffQuery, cutoff
    key = {("props", "none"): "props-nofair",
           ("props", "uncond"): "props-uncond",
           ("deadlock", "none"): "deadlock-nofair",
           ("deadlock", "strong"): "deadlock-strongfair"}.get((task, fairness))
    if key is None:
        raise UnsupportedTaskError(f"no cutoff for {task} under {fairness}")
    from .cutoffs import _effective_size_b
    sizeB = _effective_size_b(sys)
    return cutoff(CutoffQuery(sys.semantics, key, sizeB, max(1, tracked))).value


def _budget(b, c):
    if len(b.plans) - 1 > c:
        raise ConstructionError(
            f"budget exceeded: {len(b.plans) - 1} B-processes for cutoff {c}")


def _with_extra(c: Configuration, state: str, inp: str) -> Configuration:
    """c with one more B-process appended."""
    return Configuration(c.stateA, c.statesB + (state,),
                         c.inputA, c.inputsB + (inp,))


def _drop_b(y: LassoRun, j: int):
    """Remove B-process j from y; an emptied loop becomes a finite tail."""
    def strip(c):
        return Configuration(c.stateA, c.statesB[:j - 1] + c.statesB[j:],
                             c.inputA, c.inputsB[:j - 1] + c.inputsB[j:])

    def conv(steps):
        return tuple((strip(c), mv if mv is None or mv < j else mv - 1)
                     for c, mv in steps if mv != j)

    stem, loop = conv(y.stem), conv(y.loop)
    if y.loop and not loop:
        # j was the only loop mover; without it the run ends (if maximal)
        stem = stem + ((strip(y.loop[0][0]), None),)
    return LassoRun(stem, loop)


def _run_ok(sys, y: LassoRun, task, fairness, initializing):
    if validate_run(sys, y.n, y) is not None:
        return False
    if not _fairness_ok(sys, y, fairness, initializing):
        return False
    return task != "deadlock" or _deadlocked_somehow(sys, y)


def _truncate_dead(sys, y: LassoRun):
    """The shortest prefix of y ending in a globally dead configuration, as a
    finite maximal run; None if no prefix configuration is dead."""
    seq = tuple(y.stem) + tuple(y.loop)
    for i, (cfg, _) in enumerate(seq):
        if any(True for _ in enabled_moves(sys, cfg)):
            continue
        cand = LassoRun(seq[:i] + ((cfg, None),), ())
        if validate_run(sys, cand.n, cand) is None:
            return cand
        return None
    return None


def _prune(sys, y: LassoRun, c, task, fairness, initializing, keep):
    """Drop redundant B-processes (index > keep) until the budget c holds and
    the run sits in its class.  A drop that strands a deadlock run's loop may
    instead cut it to a finite globally-dead prefix."""
    while y.n > c or not _run_ok(sys, y, task, fairness, initializing):
        for j in range(y.n, keep, -1):
            y2 = _drop_b(y, j)
            if _run_ok(sys, y2, task, fairness, initializing):
                y = y2
                break
            if task == "deadlock":
                y3 = _truncate_dead(sys, y2)
                if y3 is not None and _run_ok(sys, y3, task, fairness,
                                              initializing):
                    y = y3
                    break
        else:
            raise ConstructionError(
                f"budget exceeded: {y.n} B-processes for cutoff {c}")
    return y


def _pad_copies(b: _Builder, c: int):
    """Fill the instance up to c B-processes with extra aligned copies."""
    extra = b.src.n
    while len(b.plans) - 1 < c:
        b.add_copy(extra)
        extra = extra - 1 if extra > 1 else b.src.n
    _budget(b, c)


def _shrink_disj_props(sys, src, fairness, tracked, c):
    b = _Builder(sys, src)
    b.add_copy(A)
    for p in range(1, tracked + 1):
        b.add_copy(p)
    if fairness == "none":
        for q in sorted(src.all_states(range(1, src.n + 1))):
            b.add_flood(q, range(1, src.n + 1))
        movers = {mv for _, mv in src.x.loop}
        if not movers & set(range(A, tracked + 1)):
            b.add_copy(min(p for p in movers if p != A))
        _pad_copies(b, c)
        return b.assemble()
    # unconditional fairness: flood/evacuate, then keep everything moving by
    # turn-taking pairs and the carrier rotation over shared states
    others = [p for p in range(1, src.n + 1) if p > tracked]
    vi1 = src.loop_states([1])
    vio = src.loop_states(others)
    footnote = len(vi1) == 1 and len(vio) == len(sys.templateB.states)
    allB = range(1, src.n + 1)
    for q in sorted(vio - vi1):
        sp = next(p for p in others if q in src.loop_states([p]))
        _turn_take(b, q, sp, src.S, [b.add_flood(q, allB), b.add_flood(q, allB)])
    inter = sorted(vio & vi1)
    if inter:
        slots = ([] if footnote else [(inter[0],) + b.add_flood(inter[0], allB)])
        slots += [(q,) + b.add_flood(q, allB) for q in inter]
        _carry_rotation(b, 1, slots, src.S)
    hosts = list(b.plans)
    for q in sorted(visit_sets(src, others).vis_fin):
        pl, settle, _ = _add_evacuee(b, others, q)
        _attach(pl, settle, hosts)   # rejoin the activity at the target state
    while len(b.plans) - 1 < c:   # remaining processes mimic B_1
        b.add_alias(b.plans[1])
    return b.assemble()


def _shrink_disj_deadlock(sys, src, fairness, c):
    b = _Builder(sys, src)
    if src.finite:
        # global: copy uniquely-deadlocked processes, flood/evacuate the rest
        final = src.seq[-1][0]
        occ = {}
        for p in range(1, src.n + 1):
            occ.setdefault(final.statesB[p - 1], []).append(p)
        D1 = {ps[0] for ps in occ.values() if len(ps) == 1}
        b.add_copy(A)
        for p in sorted(D1):
            b.add_copy(p)
        F = [p for p in range(1, src.n + 1) if p not in D1]
        vs = visit_sets(src, F)
        for q in sorted(vs.vis_inf):
            b.add_flood(q, F)
        for q in sorted(vs.vis_fin):
            _add_evacuee(b, F, q)
        return b.assemble(finite=True)
    dead = src.deadlocked()
    movers = sorted({mv for _, mv in src.x.loop})
    if fairness == "none":
        b.add_copy(A)
        C = []
        bd = sorted(p for p in dead if p != A)
        if bd:
            C.append(bd[0])
        if A not in movers:
            C.append(min(p for p in movers if p != A))
        for p in C:
            b.add_copy(p)
        F = [p for p in range(1, src.n + 1) if p not in C]
        vs = visit_sets(src, F)
        for q in sorted(vs.vis_inf):
            b.add_flood(q, F)
        for q in sorted(vs.vis_fin):
            _add_evacuee(b, F, q)
        return b.assemble()
    # strong fairness: a copy per dead state keeps it blocked; turn-taking
    # pairs keep the surviving states occupied while moving; evacuees of
    # transient states double as pair members when the budget is tight
    anat = deadlock_anatomy(sys, src.x)
    b.add_copy(A)
    reps = {}
    for p in sorted(dead):
        q = src.state_of(p, src.S)
        if p != A and q not in reps:
            reps[q] = p
            b.add_copy(p)
    F = [p for p in range(1, src.n + 1)
         if p not in dead and p not in reps.values()]
    vs = visit_sets(src, F)
    live = sorted(vs.vis_inf - anat.dead_states)
    evacs = {}
    for q in sorted(vs.vis_fin - anat.dead_states):
        pl, settle, tgt = _add_evacuee(b, F, q)
        evacs.setdefault(tgt, []).append((pl, settle))
    for i, q in enumerate(live):
        sp = next(p for p in F if q in src.loop_states([p]))
        members = [b.add_flood(q, F)]
        room = c - (len(b.plans) - 1)
        need_after = (len(live) - i - 1) * 2
        if room > need_after or q not in evacs:
            members.append(b.add_flood(q, F))
        else:
            members.append(evacs[q].pop(0))
            if not evacs[q]:
                del evacs[q]
        _turn_take(b, q, sp, src.S, members)
    return b.assemble()


def _shrink_conj_props(sys, src, fairness, tracked, c):
    b = _Builder(sys, src)
    b.add_copy(A)
    for p in range(1, tracked + 1):
        b.add_copy(p)
    movers = {mv for _, mv in src.x.loop}
    if not movers & set(range(A, tracked + 1)):
        b.add_copy(min(p for p in movers if p != A))
    _pad_copies(b, c)
    return b.assemble()


def _shrink_conj_deadlock(sys, src, fairness, c):
    if not is_one_conjunctive(sys):
        raise UnsupportedTaskError(
            "conjunctive deadlock constructions need 1-conjunctive guards")
    b = _Builder(sys, src)
    init_b = sys.templateB.init
    if src.finite:
        # global: copy up to two occupants of every non-init final state
        final = src.seq[-1][0]
        occ = {}
        for p in range(1, src.n + 1):
            occ.setdefault(final.statesB[p - 1], []).append(p)
        b.add_copy(A)
        for q in sorted(occ):
            if q != init_b:
                for p in occ[q][:2]:
                    b.add_copy(p)
        if len(b.plans) == 1:
            b.add_copy(1)
        return b.assemble(finite=True)
    dead = src.deadlocked()
    anat = deadlock_anatomy(sys, src.x)
    d = src.S
    movers = sorted({mv for _, mv in src.x.loop})
    if fairness == "none":
        b.add_copy(A)
        bd = sorted(p for p in dead if p != A)
        if bd:
            b.add_copy(bd[0])
        pinned = set()
        for q in sorted(anat.dead_guards):
            if q in sys.templateA.states or q in pinned:
                continue
            holder = next((p for p in range(1, src.n + 1)
                           if src.state_of(p, d) == q
                           and not (bd and p == bd[0])), None)
            if holder is not None:
                b.add_copy_park(holder, d)
                pinned.add(q)
        if A not in movers:
            b.add_copy(min(p for p in movers if p != A))
        return b.assemble()
    # strong fairness on initializing runs: copy the deadlocked cores, trap
    # an infinite visitor per singly-occupied dead2 state, and keep the
    # remaining guard states occupied by rotating processes through init
    b.add_copy(A)
    occupants = {}
    for p in sorted(dead):
        if p != A:
            occupants.setdefault(src.state_of(p, d), []).append(p)
    for q in sorted(anat.dead_states):
        if q in sys.templateA.states:
            continue
        ps = occupants.get(q, [])
        if q in anat.dead2:
            if len(ps) >= 2:
                b.add_copy(ps[0])
                b.add_copy(ps[1])
            elif ps:
                b.add_copy(ps[0])
                vis = next((p for p in range(1, src.n + 1) if p not in dead
                            and q in src.loop_states([p])), None)
                if vis is None:
                    raise ConstructionError(
                        f"dead state {q} lacks a second occupant or visitor")
                arr = _arrivals(src, vis, q, d, b.H)
                b.add_copy_park(vis, arr[0], src.input_of(ps[0], d))
        elif ps:
            b.add_copy(ps[0])
    walk_states = sorted(q for q in anat.dead_guards - anat.dead_states
                         if q not in sys.templateA.states and q != init_b)
    walkers = {}
    for q in walk_states:
        vis = next((p for p in range(1, src.n + 1)
                    if p not in dead and q in src.loop_states([p])), None)
        if vis is None:
            raise ConstructionError(f"guard state {q} has no infinite visitor")
        arr = _arrivals(src, vis, q, d, b.H)
        walkers[q] = (vis, b.add_copy_park(vis, arr[0]), arr[0])
    if walk_states or A in dead:
        init_pl = b.add_stay(init_b, sys.templateB.letters[0])
        _conj_looping(b, walk_states, walkers, init_pl, d)
    return b.assemble()


def _conj_looping(b: _Builder, walk_states, walkers, init_pl, d):
    """Rotate one process through init and the guard states by shadowing the
    source's infinite movers, keeping every guard state occupied throughout."""
    src = b.src
    init_b = b.sys.templateB.init
    start = max([d, src.S] + [s for _, _, s in walkers.values()])
    if not walk_states:
        # only the init process must keep moving: shadow an infinite mover
        # (it revisits init infinitely often, runs being initializing)
        vis = min(mv for _, mv in src.x.loop if mv != A)
        _turn_take(b, init_b, vis, start, [(init_pl, 0)])
        return
    at = {q: (walkers[q][1], walkers[q][2]) for q in walk_states}
    dweller = (init_pl, 0)
    sched = []   # (plan, settle, sp, lo, hi)
    m = start
    i = 0
    while m < b.H - 1:
        q = walk_states[i % len(walk_states)]
        sp = walkers[q][0]
        outs = _arrivals(src, sp, init_b, m, b.H)
        if not outs:
            break
        lo = outs[0]
        hi = lo + 1
        while hi < b.H and src.state_of(sp, hi) != q:
            hi += 1
        back = hi + 1
        while back < b.H and src.state_of(sp, back) != init_b:
            back += 1
        if back >= b.H:
            break
        sched.append(dweller + (sp, lo, hi))
        sched.append(at[q] + (sp, hi, back))
        dweller, at[q] = at[q], dweller
        m = back
        i += 1
    for j, (pl, settle, sp, lo, hi) in enumerate(sched):
        if not any(p2 is pl for p2, _, _, _, _ in sched[:j]):
            _pin(pl, settle, lo, src.input_of(sp, lo))
        _mirror(pl, src, sp, lo, hi)
        nxt = next(((s2, l2) for p2, _, s2, l2, _ in sched[j + 1:]
                    if p2 is pl), None)
        pin = src.input_of(*nxt) if nxt else src.input_of(sp, hi)
        pl.park(hi, b.H, src.state_of(sp, hi), pin)
        pl.moved[hi] = src.moves(sp, hi - 1)
        pl.inputs[hi] = pin


def shrink_run(sys: GuardedSystem, x: LassoRun, task: str, fairness: str,
               tracked: int = 1) -> LassoRun:
    """Reproduce x's class on the cutoff instance for (task, fairness)."""
    tracked = max(1, tracked)
    c = _task_cutoff(sys, task, fairness, tracked)
    initializing = sys.semantics == CONJUNCTIVE and fairness != "none"
    src = _check_class(sys, x, task, fairness, initializing)
    if src.n <= c:
        raise SemanticError(f"instance size {src.n} not above cutoff {c}")
    if task == "props":
        if sys.semantics == DISJUNCTIVE:
            y = _shrink_disj_props(sys, src, fairness, tracked, c)
        else:
            y = _shrink_conj_props(sys, src, fairness, tracked, c)
        keep = tracked
    else:
        if sys.semantics == DISJUNCTIVE:
            y = _shrink_disj_deadlock(sys, src, fairness, c)
        else:
            y = _shrink_conj_deadlock(sys, src, fairness, c)
        keep = 0
    return _prune(sys, y, c, task, fairness, initializing, keep)


# ---------------------------------------------------------------------------
# grow_run


def _grow_wander(sys, src, b):
    """Finite source: everyone copies x; the new process waits in init and is
    then scheduled greedily (it may wander forever or deadlock again)."""
    for p in range(src.n + 1):
        b.add_copy(p)
    b.add_stay(sys.templateB.init, sys.templateB.letters[0])
    steps, final = b._flatten(0, b.H - 1)
    p_new = len(b.plans) - 1
    t = sys.template_of(p_new)
    seen = {}
    tail = []
    cur = final
    while True:
        key = (cur.statesB[p_new - 1], cur.inputsB[p_new - 1])
        trs = [tr for tr in t.transitions
               if tr.source == key[0] and tr.letter == key[1]
               and guard_holds(sys, cur, p_new, tr.guard)]
        if not trs:
            return LassoRun(tuple(steps) + tuple(tail) + ((cur, None),), ())
        if key in seen:
            i = seen[key]
            return LassoRun(tuple(steps) + tuple(tail[:i]), tuple(tail[i:]))
        seen[key] = len(tail)
        tr = trs[0]
        tail.append((cur, p_new))
        sb, ib = list(cur.statesB), list(cur.inputsB)
        sb[p_new - 1], ib[p_new - 1] = tr.target, tr.letter
        cur = Configuration(cur.stateA, tuple(sb), cur.inputA, tuple(ib))


def _wander_lasso(sys, y0, p_new, initializing):
    """Let process p_new of y0 (parked so far) fire greedily whenever enabled,
    cutting a new lasso once its behaviour repeats at a loop boundary."""
    t = sys.template_of(p_new)
    letters = t.letters or (f"⊥@{t.role}",)
    seq = list(y0.stem) + list(y0.loop)
    S, L = len(y0.stem), len(y0.loop)
    cur_s = seq[0][0].state_of(p_new)
    cur_i = seq[0][0].input_of(p_new)

    def ext(c, s, i):
        sb, ib = list(c.statesB), list(c.inputsB)
        sb[p_new - 1], ib[p_new - 1] = s, i
        return Configuration(c.stateA, tuple(sb), c.inputA, tuple(ib))

    def quiet_input(s):
        # an input under which s stays disabled on the loop, if any
        for lt in letters:
            if all(not is_enabled(sys, ext(c, s, lt), p_new, tr)
                   for c, _ in y0.loop for tr in t.transitions):
                return lt
        return letters[0]

    out, seen = [], {}
    for pos in range(S + 64 * max(1, L)):
        k = pos if pos < S else S + (pos - S) % max(1, L)
        c, mv = seq[k]
        if pos >= S and (pos - S) % max(1, L) == 0:
            key = (cur_s, cur_i)
            if key in seen:
                j = seen[key]
                y = LassoRun(tuple(out[:j]), tuple(out[j:]))
                if initializing and any(m == p_new for _, m in y.loop) \
                        and all(cf.state_of(p_new) != t.init
                                for cf, _ in y.loop):
                    raise ConstructionError(
                        "wandering process never revisits init on the loop")
                if validate_run(sys, y.n, y) is not None:
                    raise ConstructionError(
                        "wandering process blocks the copied run")
                return y
            seen[key] = len(out)
        trs = [tr for tr in t.transitions
               if is_enabled(sys, ext(c, cur_s, cur_i), p_new, tr)]
        if trs:
            out.append((ext(c, cur_s, cur_i), p_new))
            cur_s = trs[0].target
            cur_i = quiet_input(cur_s)
        out.append((ext(c, cur_s, cur_i), mv))
    raise ConstructionError("wandering process found no periodic behaviour")


def _grow_role_share(sys, src, b, tracked):
    """The new process shares a local run with a non-tracked B-process that
    revisits init infinitely often, swapping roles at init."""
    init_b = sys.templateB.init
    partner = None
    for p in range(tracked + 1, src.n + 1):
        if init_b in src.loop_states([p]) and \
                any(mv == p for _, mv in src.x.loop):
            partner = p
            break
    if partner is None:
        raise ConstructionError(
            "no-partner: no non-tracked process revisits init infinitely often")
    partner_pl = None
    for p in range(src.n + 1):
        if p == partner:
            partner_pl = b.new_plan()
        else:
            b.add_copy(p)
    newcomer = b.add_stay(init_b, sys.templateB.letters[0])
    arr = _arrivals(src, partner, init_b, 0, b.H)
    _mirror(partner_pl, src, partner, 0, arr[0])
    partner_pl.park(arr[0] + 1, b.H, init_b, src.input_of(partner, arr[0]))
    _turn_take(b, init_b, partner, arr[0],
               [(partner_pl, arr[0]), (newcomer, 0)])
    return b.assemble()


def grow_run(sys: GuardedSystem, x: LassoRun, task: str, fairness: str,
             tracked: int = 1) -> LassoRun:
    """Extend x with one more B-process, preserving its class (a global
    deadlock may weaken to a local one)."""
    initializing = sys.semantics == CONJUNCTIVE and fairness != "none"
    src = _check_class(sys, x, task, fairness, initializing)
    sizeB = len(sys.templateB.states)
    b = _Builder(sys, src)
    if task == "deadlock" and sys.semantics == DISJUNCTIVE and src.finite \
            and src.n < sizeB + 1:
        raise SemanticError(f"monotonicity floor |B|+1={sizeB + 1} violated")
    if fairness != "none" and sys.semantics == CONJUNCTIVE \
            and not src.finite and src.n < 2:
        raise SemanticError("role sharing needs at least two B-processes")
    if src.finite:
        if sys.semantics == DISJUNCTIVE:
            # pigeonhole: mimic one of two processes deadlocked together
            final = src.seq[-1][0]
            occ = {}
            for p in range(1, src.n + 1):
                occ.setdefault(final.statesB[p - 1], []).append(p)
            pair = next((ps for ps in occ.values() if len(ps) >= 2), None)
            if pair is None:
                raise ConstructionError("no co-deadlocked pair to mimic")
            for p in range(src.n + 1):
                b.add_copy(p)
            b.add_alias(b.plans[pair[0]])
            return b.assemble(finite=True)
        return _grow_wander(sys, src, b)
    if sys.semantics == DISJUNCTIVE:
        if task == "props" and fairness == "none":
            for p in range(src.n + 1):
                b.add_copy(p)
            b.add_stay(sys.templateB.init, sys.templateB.letters[0])
            return b.assemble()
        # fair runs and local deadlocks: mimic an existing process.
        # co-locating never changes the occupied state set, but the
        # companion's own-state guards may flip, so try candidates until
        # the result still sits in the class
        movers = sorted({mv for _, mv in src.x.loop})
        bm = [p for p in movers if p != A]
        for cand in bm + [p for p in range(1, src.n + 1) if p not in bm]:
            b2 = _Builder(sys, src)
            plans = [b2.add_copy(p) for p in range(src.n + 1)]
            b2.add_alias(plans[cand])
            y = b2.assemble()
            if _run_ok(sys, y, task, fairness, False):
                return y
        raise ConstructionError("no alias candidate preserves the class")
    if fairness == "none":
        for p in range(src.n + 1):
            b.add_copy(p)
        b.add_stay(sys.templateB.init, sys.templateB.letters[0])
        return b.assemble()
    if task == "deadlock" and not {mv for _, mv in src.x.loop} - {A}:
        for p in range(src.n + 1):
            b.add_copy(p)
        init_b = sys.templateB.init
        p_new = src.n + 1
        letters = sys.templateB.letters or (f"⊥@{sys.templateB.role}",)
        for letter in letters:
            # pick an input under which waiting at init stays disabled
            if all(not is_enabled(sys, _with_extra(c, init_b, letter),
                                  p_new, tr)
                   for c, _ in src.x.loop
                   for tr in sys.templateB.transitions):
                b.add_stay(init_b, letter)
                return b.assemble()
        # the new process cannot help being enabled: let it walk greedily
        # (extra occupancy never enables anything under conjunctive guards)
        b.add_stay(init_b, letters[0])
        return _wander_lasso(sys, b.assemble(), p_new, initializing)
    return _grow_role_share(sys, src, b, tracked if task == "props" else 0)


# ---------------------------------------------------------------------------
# verify_transform


@dataclass(frozen=True)
class TransformContract:
    tracked: tuple                  # processes whose projections must match
    required_fairness: str          # none | uncond | strong
    preserve: frozenset             # clause names
    target_n: int
    initializing: bool = False


@dataclass(frozen=True)
class TransformReport:
    clauses: tuple                  # (name, passed, detail)

    @property
    def ok(self) -> bool:
        return all(p for _, p, _ in self.clauses)


def verify_transform(sys: GuardedSystem, x: LassoRun, y: LassoRun,
                     contract: TransformContract) -> TransformReport:
    out = []
    v = validate_run(sys, contract.target_n, y)
    out.append(("validate-run", v is None, "" if v is None else v.reason))
    fair = _fairness_ok(sys, y, contract.required_fairness,
                        contract.initializing)
    out.append(("fairness", fair, contract.required_fairness))
    for p in contract.tracked:
        same = stutter_equiv(project(x, p), project(y, p))
        out.append((f"tracked-{p}", same,
                    "" if same else "projection not stutter-equivalent"))
    for clause in sorted(contract.preserve):
        if clause == "stutter-equivalent-projection":
            continue   # covered by the tracked clauses above
        if clause in ("global-deadlock", "local-deadlock"):
            # growing a global deadlock may leave only a local one
            ok = _deadlocked_somehow(sys, y)
            out.append((clause, ok, "" if ok else "target not deadlocked"))
        else:
            out.append((clause, False, "unknown preserve clause"))
    return TransformReport(tuple(out))
