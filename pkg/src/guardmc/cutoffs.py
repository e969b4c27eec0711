"""Cutoff table, baselines, the parameterized verification driver, empirical
cutoff validation, and enumeration-based template synthesis.

A cutoff c for a (semantics, task) cell means: the verdict of the instance
(A,B)^(1,c) decides the verdict for every n >= c.  The engine uses the new
table by default; the older |B|+2 / 2|B| / 2|B|+1 baselines are exposed
separately for comparison since they target a slightly different setting
(closed systems, global deadlocks only).
"""
from __future__ import annotations

import itertools
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from . import checker, model
from .checker import Verdict, check, global_deadlock, local_deadlock
from .errors import SemanticError, UnsupportedTaskError
from .model import Guard, GuardedSystem, LocalTransition, ProcessTemplate, is_one_conjunctive
from .speclang import ParamSpec, instantiate

TASKS = ("props-nofair", "deadlock-nofair", "props-uncond", "deadlock-strongfair")


@dataclass(frozen=True)
class CutoffQuery:
    semantics: str
    task: str
    sizeB: int
    k: int = 1  # tracked-process count, props tasks only


@dataclass(frozen=True)
class CutoffResult:
    value: int
    caveats: frozenset = frozenset()


def cutoff(q: CutoffQuery) -> CutoffResult:
    """The cutoff table; values clamped to >= 1 (an instance needs a process)."""
    if q.task not in TASKS:
        raise SemanticError(f"unknown task {q.task!r}")
    if q.sizeB < 1 or (q.task.startswith("props") and q.k < 1):
        raise SemanticError("sizeB and k must be positive")
    b, k = q.sizeB, q.k
    if q.semantics == model.DISJUNCTIVE:
        table = {
            "props-nofair": (b + k + 1, ()),
            "deadlock-nofair": (2 * b - 1, ("asymptotically-tight-only",)),
            "props-uncond": (2 * b + k - 1, ()),
            "deadlock-strongfair": (2 * b - 1, ()),
        }
    elif q.semantics == model.CONJUNCTIVE:
        table = {
            "props-nofair": (k + 1, ()),
            "deadlock-nofair": (2 * b - 2, ("requires-1-conjunctive",)),
            "props-uncond": (k + 1, ("requires-initializing-runs",)),
            "deadlock-strongfair": (2 * b - 2, ("requires-1-conjunctive",
                                                "requires-initializing-runs")),
        }
    else:
        raise SemanticError(f"unknown semantics {q.semantics!r}")
    value, caveats = table[q.task]
    return CutoffResult(max(1, value), frozenset(caveats))


def cutoff_ek(semantics: str, target: str, sizeB: int) -> int:
    """Baseline cutoffs for closed systems and global deadlocks: disjunctive
    |B|+2 (any target); conjunctive 2|B| for A-only, 2|B|+1 otherwise."""
    if target not in ("A-and-one-B", "A-only", "one-B"):
        raise SemanticError(f"unknown target {target!r}")
    if semantics == model.DISJUNCTIVE:
        return sizeB + 2
    if semantics == model.CONJUNCTIVE:
        return 2 * sizeB if target == "A-only" else 2 * sizeB + 1
    raise SemanticError(f"unknown semantics {semantics!r}")


# ---------------------------------------------------------------------------
# Parameterized drivers


def _effective_size_b(sys: GuardedSystem) -> int:
    """|Q_B| of the (implicitly) closed template: open inputs multiply states."""
    t = sys.templateB
    return len(t.states) * max(1, len(t.inputs))


def _props_task(sys: GuardedSystem, spec: ParamSpec) -> str:
    if spec.fairness == "none":
        return "props-nofair"
    if spec.fairness == "uncond":
        if sys.semantics == model.CONJUNCTIVE and not spec.initializing:
            raise UnsupportedTaskError(
                "conjunctive properties under unconditional fairness require "
                "initializing runs (caveat requires-initializing-runs)")
        return "props-uncond"
    raise UnsupportedTaskError(
        "no cutoff is available for properties under strong fairness")


def pmcp(sys: GuardedSystem, spec: ParamSpec,
         limit_nodes: int = checker.DEFAULT_NODE_LIMIT) -> Verdict:
    """Parameterized model checking: decide the spec for every n >= cutoff by
    checking the single cutoff instance."""
    task = _props_task(sys, spec)
    k0 = max(1, spec.indices)
    c = cutoff(CutoffQuery(sys.semantics, task, _effective_size_b(sys), k0)).value
    v = check(sys, c, instantiate(spec, c), spec.fairness, spec.initializing,
              limit_nodes)
    v.stats["cutoff"] = c
    v.stats["task"] = task
    return v


def _deadlock_cutoff(sys: GuardedSystem, task: str) -> int:
    """The instance size the deadlock drivers check.  For disjunctive systems
    the published 2|B|-1 dominates the local-deadlock bounding cases (|B|+2)
    only for |B| >= 3, so take the maximum of the case budgets."""
    b = _effective_size_b(sys)
    c = cutoff(CutoffQuery(sys.semantics, task, b)).value
    if sys.semantics == model.DISJUNCTIVE:
        c = max(c, b + 2)
    return c


def param_deadlock(sys: GuardedSystem, fairness: str = "none",
                   limit_nodes: int = checker.DEFAULT_NODE_LIMIT) -> Verdict:
    """Parameterized deadlock detection: holds means no global or local
    deadlock for any n >= the cutoff."""
    if fairness not in ("none", "strong"):
        raise SemanticError("deadlock detection supports fairness none or strong")
    task = "deadlock-nofair" if fairness == "none" else "deadlock-strongfair"
    if sys.semantics == model.CONJUNCTIVE and not is_one_conjunctive(sys):
        raise UnsupportedTaskError(
            "conjunctive deadlock detection requires a 1-conjunctive system "
            "(caveat requires-1-conjunctive)")
    c = _deadlock_cutoff(sys, task)
    t0 = time.monotonic()
    initializing = (fairness == "strong" and sys.semantics == model.CONJUNCTIVE)
    w = global_deadlock(sys, c, limit_nodes)
    if w is None:
        w = local_deadlock(sys, c, fairness, initializing, limit_nodes)
    stats = {"cutoff": c, "task": task,
             "millis": int((time.monotonic() - t0) * 1000)}
    return Verdict(w is None, w, stats)


# ---------------------------------------------------------------------------
# Empirical validation


@dataclass
class ConsistencyReport:
    cutoff_value: int
    rows: list = field(default_factory=list)   # (n, verdict, nodes, millis)
    alarms: list = field(default_factory=list)  # n >= cutoff with deviating verdict
    empirical_n0: Optional[int] = None
    notes: list = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["n,verdict,nodes,millis"]
        for n, verdict, nodes, millis in self.rows:
            lines.append(f"{n},{'holds' if verdict else 'fails'},{nodes},{millis}")
        return "\n".join(lines) + "\n"


def _probe(sys, job, n):
    """Brute-force verdict of a spec-or-deadlock job at instance size n."""
    t0 = time.monotonic()
    if isinstance(job, ParamSpec):
        v = check(sys, n, instantiate(job, n), job.fairness, job.initializing)
        verdict, nodes = v.holds, v.stats["nodes"]
    else:
        fairness = "none" if job == "deadlock-nofair" else "strong"
        initializing = (fairness == "strong" and sys.semantics == model.CONJUNCTIVE)
        w = global_deadlock(sys, n)
        if w is None:
            w = local_deadlock(sys, n, fairness, initializing)
        verdict = w is None
        nodes = len(checker.build_graph(sys, n).nodes)
    return n, verdict, nodes, int((time.monotonic() - t0) * 1000)


def validate_cutoff(sys: GuardedSystem, job, n_max: int,
                    jobs: int = 1) -> ConsistencyReport:
    """Brute-force every instance up to n_max and compare against the cutoff
    instance; any disagreement at n >= cutoff is a soundness alarm."""
    if isinstance(job, ParamSpec):
        task = _props_task(sys, job)
        k0 = max(1, job.indices)
        n_lo = max(1, job.indices)
    elif job in ("deadlock-nofair", "deadlock-strongfair"):
        task, k0, n_lo = job, 1, 1
        if sys.semantics == model.CONJUNCTIVE and not is_one_conjunctive(sys):
            raise UnsupportedTaskError("caveat requires-1-conjunctive violated")
    else:
        raise SemanticError(f"unknown job {job!r}")
    if isinstance(job, ParamSpec):
        c = cutoff(CutoffQuery(sys.semantics, task, _effective_size_b(sys),
                               k0)).value
    else:
        c = _deadlock_cutoff(sys, task)
    if n_max < c:
        raise SemanticError(f"n_max {n_max} below cutoff {c}")
    ns = list(range(n_lo, n_max + 1))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(lambda n: _probe(sys, job, n), ns))
    else:
        rows = [_probe(sys, job, n) for n in ns]
    report = ConsistencyReport(cutoff_value=c, rows=rows)
    at_c = next(v for n, v, _, _ in rows if n == c)
    report.alarms = [n for n, v, _, _ in rows if n >= c and v != at_c]
    last = rows[-1][1]
    n0 = rows[-1][0]
    for n, v, _, _ in reversed(rows):
        if v != last:
            break
        n0 = n
    report.empirical_n0 = n0
    if sys.semantics == model.CONJUNCTIVE and task == "props-uncond":
        report.notes.append(
            "conjunctive props-uncond: the k+1 value is exposed as published, "
            "but its tightness derivation is inconsistent in the source; "
            "treat flagged disagreements here as evidence, not as tool bugs")
    return report


# ---------------------------------------------------------------------------
# Enumeration-based synthesis


@dataclass
class SynthesisResult:
    system: Optional[GuardedSystem]
    examined: int
    exhausted: bool        # True: whole bounded space tried (unrealizable at bound)
    budget_spent: bool     # True: stopped early on the candidate budget


def _guard_pool(all_states, semantics, inits):
    full = frozenset(all_states)
    pool = [Guard(full)]
    if semantics == model.DISJUNCTIVE:
        pool += [Guard(frozenset({q})) for q in all_states]
    else:
        pool += [Guard(full - {q}) for q in all_states if q not in inits]
    return pool


def _templates(role, size, all_states, semantics, inits, max_trans):
    """All canonical closed templates of the given size, deduplicated by
    renaming non-initial states."""
    states = tuple(f"{role.lower()}{i}@{role}" for i in range(size))
    init = states[0]
    letter = model.closed_letter(role)
    pool = _guard_pool(all_states, semantics, inits)
    cands = [LocalTransition(s, letter, g, t)
             for s in states for t in states for g in pool]
    seen = set()
    for count in range(0, max_trans + 1):
        for combo in itertools.combinations(cands, count):
            key = _canon_key(states, combo)
            if key in seen:
                continue
            seen.add(key)
            yield ProcessTemplate(role, role, states, init, (), combo)


def _canon_key(states, transitions):
    """Least key over permutations of the non-initial states."""
    rest = states[1:]
    best = None
    for perm in itertools.permutations(rest):
        ren = {states[0]: states[0]}
        ren.update(dict(zip(rest, perm)))

        def r(q):
            return ren.get(q, q)

        key = tuple(sorted(
            (r(t.source), r(t.target), tuple(sorted(r(q) for q in t.guard.members)))
            for t in transitions))
        if best is None or key < best:
            best = key
    return best


def synthesize(spec: ParamSpec, boundA: int, boundB: int, semantics: str,
               budget: int = 20000, max_trans: int = 3,
               jobs: int = 1) -> SynthesisResult:
    """Semi-decision search for a template pair realizing the spec with no
    global deadlocks: enumerate canonical candidates in growing size order,
    filter by the parameterized checks, return the first hit."""
    def passes(cand):
        try:
            model.validate_system(cand)
        except SemanticError:
            return False
        return pmcp(cand, spec).holds and param_deadlock(cand, "none").holds

    examined = 0
    sizes = sorted(((a, b) for a in range(1, boundA + 1)
                    for b in range(1, boundB + 1)), key=lambda ab: (sum(ab), ab))
    pool = ThreadPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        for sa, sb in sizes:
            statesA = tuple(f"a{i}@A" for i in range(sa))
            statesB = tuple(f"b{i}@B" for i in range(sb))
            all_states = statesA + statesB
            inits = {statesA[0], statesB[0]}
            tas = list(_templates("A", sa, all_states, semantics, inits, max_trans))
            tbs = list(_templates("B", sb, all_states, semantics, inits, max_trans))
            cands = (GuardedSystem(semantics, ta, tb)
                     for ta, tb in itertools.product(tas, tbs))
            while True:
                batch = list(itertools.islice(cands, max(1, jobs) * 8))
                if not batch:
                    break
                if examined + len(batch) > budget:
                    batch = batch[:budget - examined]
                results = (list(pool.map(passes, batch)) if pool
                           else [passes(c) for c in batch])
                examined += len(batch)
                for cand, ok in zip(batch, results):
                    if ok:
                        return SynthesisResult(cand, examined, False, False)
                if examined >= budget:
                    return SynthesisResult(None, examined, False, True)
        return SynthesisResult(None, examined, True, False)
    finally:
        if pool:
            pool.shutdown(wait=False)
