"""Counterexample families with known cutoff-flip points, plus random systems.

Each family is a template pair whose verification verdict changes at a
specific instance size (the "flip"); check_family re-derives the flip by
brute force and reports any mismatch as a reconstruction defect rather than
patching the claim.
"""
from __future__ import annotations

import random
import time
from dataclasses import dataclass
from typing import Optional

from .checker import check, global_deadlock, local_deadlock
from .errors import SemanticError
from .model import (CONJUNCTIVE, DISJUNCTIVE, Guard, GuardedSystem,
                    LocalTransition, ProcessTemplate, validate_system)
from .speclang import ParamSpec, instantiate, parse_spec

FAMILY_NAMES = ("disj-props", "disj-props-fair", "disj-deadlock-asymptotic",
                "conj-props", "conj-props-fair", "conj-deadlock")


@dataclass(frozen=True)
class FamilySpec:
    name: str
    k: int


@dataclass(frozen=True)
class FamilyReport:
    family: FamilySpec
    flip: int
    direction: str        # "rises": fails below flip; "falls": holds below
    rows: tuple           # (n, verdict, millis)
    defects: tuple        # human-readable mismatch descriptions

    @property
    def ok(self) -> bool:
        return not self.defects


def _template(name, role, states, init, trans, all_states):
    """trans: (src, tgt, guard) triples over bare state names; guard is None
    for ALL or a set of namespaced states."""
    qs = tuple(f"{q}@{role}" for q in states)
    out = []
    for src, tgt, g in trans:
        members = frozenset(all_states) if g is None else frozenset(g)
        out.append(LocalTransition(f"{src}@{role}", f"⊥@{role}",
                                   Guard(members), f"{tgt}@{role}"))
    return ProcessTemplate(name, role, qs, f"{init}@{role}", (), tuple(out))


def _disj_props(k):
    # B_1 must detour through b3 and park in the dead-end b2 while A, having
    # seen every B-state occupied, parks in "end"; keeping the run infinite
    # then needs two processes self-looping in bk.  First possible at k+2.
    bs = [f"b{i}" for i in range(1, k + 1)]
    a_states = [f"a{i}" for i in range(1, k + 1)] + ["all", "end"]
    allq = {f"{q}@A" for q in a_states} | {f"{b}@B" for b in bs}
    a_trans = [(f"a{i}", f"a{i + 1}" if i < k else "all", {f"b{i}@B"})
               for i in range(1, k + 1)]
    a_trans.append(("all", "end", {"b3@B"}))
    b_trans = [("b1", "b2", {"b1@B"}), ("b1", "b3", {"b1@B"})]
    b_trans += [(f"b{i}", f"b{i + 1}", {f"b{i}@B"}) for i in range(3, k)]
    b_trans += [(f"b{k}", f"b{k}", {f"b{k}@B"}), ("b3", "b1", {"all@A"})]
    sysm = GuardedSystem(
        DISJUNCTIVE,
        _template("watch", "A", a_states, "a1", a_trans, allq),
        _template("chain", "B", bs, "b1", b_trans, allq))
    spec = parse_spec("forall i. E (F b3[i] & F G (b2[i] & end@A))")
    return sysm, spec


def _disj_props_fair(k):
    # every move of a process sitting in bi needs a companion in bi, so a
    # run where all processes move forever must keep two per B-state: 2k.
    bs = [f"b{i}" for i in range(1, k + 1)]
    a_states = [f"a{i}" for i in range(1, k + 1)] + ["all"]
    allq = {f"{q}@A" for q in a_states} | {f"{b}@B" for b in bs}
    a_trans = [(f"a{i}", f"a{i + 1}" if i < k else "all", {f"b{i}@B"})
               for i in range(1, k + 1)]
    a_trans.append(("all", "a1", None))
    b_trans = [(f"b{i}", f"b{i + 1}", {f"b{i}@B"}) for i in range(1, k)]
    b_trans += [(f"b{i}", f"b{i}", {f"b{i}@B"}) for i in range(1, k + 1)]
    sysm = GuardedSystem(
        DISJUNCTIVE,
        _template("round", "A", a_states, "a1", a_trans, allq),
        _template("buddy", "B", bs, "b1", b_trans, allq))
    return sysm, parse_spec("E true", fairness="uncond")


def _disj_deadlock(k):
    # climbing to the guard-free sink bk takes a ladder of k processes; the
    # climber is then disabled forever while everyone else keeps looping.
    bs = [f"b{i}" for i in range(1, k + 1)]
    allq = {"a0@A"} | {f"{b}@B" for b in bs}
    b_trans = [(f"b{i}", f"b{i + 1}", {f"b{i}@B"}) for i in range(1, k)]
    b_trans += [(f"b{i}", f"b{i}", None) for i in range(1, k)]
    sysm = GuardedSystem(
        DISJUNCTIVE,
        _template("idle", "A", ["a0"], "a0", [("a0", "a0", None)], allq),
        _template("climb", "B", bs, "b1", b_trans, allq))
    return sysm, None


def _conj_props(k):
    # b is a dead end that freezes A, so an infinite run visiting b needs a
    # second B-process to keep looping in the initial state.
    bs = ["n0", "b"] + [f"c{i}" for i in range(1, k - 1)]
    allq = {"a0@A"} | {f"{q}@B" for q in bs}
    a_trans = [("a0", "a0", allq - {"b@B"})]
    b_trans = [("n0", "n0", None), ("n0", "b", None)]
    prev = "n0"
    for i in range(1, k - 1):   # dead-end padding up to |B| = k
        b_trans.append((prev, f"c{i}", None))
        prev = f"c{i}"
    sysm = GuardedSystem(
        CONJUNCTIVE,
        _template("gate", "A", ["a0"], "a0", a_trans, allq),
        _template("step", "B", bs, "n0", b_trans, allq))
    return sysm, parse_spec("forall i. E F b[i]")


def _conj_props_fair(k):
    # with a single B the scheduler can keep its visits to n0 aligned with A
    # sitting in a1; a second fair B-process makes the alignment impossible.
    bs = ["n0", "b1", "b2"] + [f"c{i}" for i in range(1, k - 2)]
    a_states = ["a0", "a1"]
    allq = {f"{q}@A" for q in a_states} | {f"{q}@B" for q in bs}
    a_trans = [("a0", "a1", None), ("a1", "a0", None)]
    b_trans = [("n0", "b1", allq - {"b1@B"}),
               ("b1", "b2", allq - {"a1@A"}),
               ("b2", "n0", allq - {"b2@B"})]
    prev = "b2"
    for i in range(1, k - 2):   # dead-end padding up to |B| = k
        b_trans.append((prev, f"c{i}", None))
        prev = f"c{i}"
    sysm = GuardedSystem(
        CONJUNCTIVE,
        _template("pong", "A", a_states, "a0", a_trans, allq),
        _template("sync", "B", bs, "n0", b_trans, allq))
    spec = parse_spec("forall i. E F G (n0[i] -> a1@A)",
                      fairness="uncond", initializing=True)
    return sysm, spec


def _conj_deadlock(k):
    # leaving bi needs some bj free of other processes, and A's loops need
    # some bj free too; jamming every bj takes two processes each: 2k-2.
    bs = ["n0"] + [f"b{i}" for i in range(1, k)]
    allq = {"a0@A"} | {f"{q}@B" for q in bs}
    a_trans = [("a0", "a0", allq - {f"b{i}@B"}) for i in range(1, k)]
    b_trans = []
    for i in range(1, k):
        b_trans.append(("n0", f"b{i}", None))
        b_trans += [(f"b{i}", "n0", allq - {f"b{j}@B"}) for j in range(1, k)]
    sysm = GuardedSystem(
        CONJUNCTIVE,
        _template("poll", "A", ["a0"], "a0", a_trans, allq),
        _template("jam", "B", bs, "n0", b_trans, allq))
    return sysm, None


#: name -> (builder, minimum k, flip as fn of k, direction)
_FAMILIES = {
    "disj-props": (_disj_props, 3, lambda k: k + 2, "rises"),
    "disj-props-fair": (_disj_props_fair, 1, lambda k: 2 * k, "rises"),
    "disj-deadlock-asymptotic": (_disj_deadlock, 2, lambda k: k, "rises"),
    "conj-props": (_conj_props, 2, lambda k: 2, "rises"),
    "conj-props-fair": (_conj_props_fair, 3, lambda k: 2, "falls"),
    "conj-deadlock": (_conj_deadlock, 3, lambda k: 2 * k - 2, "rises"),
}


def _lookup(f: FamilySpec):
    if f.name not in _FAMILIES:
        raise SemanticError(f"unknown family {f.name!r}")
    builder, kmin, flip, direction = _FAMILIES[f.name]
    if f.k < kmin:
        raise SemanticError(f"family {f.name} needs k >= {kmin}, got {f.k}")
    return builder, flip(f.k), direction


def family(f: FamilySpec):
    """The family's system and its property (None for deadlock families)."""
    builder, _, _ = _lookup(f)
    sysm, spec = builder(f.k)
    validate_system(sysm)
    return sysm, spec


def claimed_flip(f: FamilySpec) -> int:
    """The instance size at which the family's verdict changes."""
    _, flip, _ = _lookup(f)
    return flip


def check_family(f: FamilySpec, margin: int = 0) -> FamilyReport:
    """Brute-force the family for n = 1..flip+margin and compare each verdict
    against the claimed flip point."""
    if f.k > 4 or margin > 2:
        raise SemanticError("brute force bounded to k <= 4, margin <= 2")
    builder, flip, direction = _lookup(f)
    sysm, spec = builder(f.k)
    rows, defects = [], []
    lo = max(1, spec.indices) if spec is not None else 1
    for n in range(lo, flip + margin + 1):
        t0 = time.monotonic()
        if spec is None:
            got = (global_deadlock(sysm, n) is not None
                   or local_deadlock(sysm, n) is not None)
        else:
            got = check(sysm, n, instantiate(spec, n),
                        fairness=spec.fairness,
                        initializing=spec.initializing).holds
        rows.append((n, got, int((time.monotonic() - t0) * 1000)))
        want = (n >= flip) if direction == "rises" else (n < flip)
        if got != want:
            defects.append(f"n={n}: expected {want}, checker found {got}")
    return FamilyReport(f, flip, direction, tuple(rows), tuple(defects))


# ---------------------------------------------------------------------------
# Random systems


def _prune_unreachable(states, init, edges):
    """Keep only states reachable from init in the local transition skeleton."""
    succ = {}
    for src, tgt in edges:
        succ.setdefault(src, set()).add(tgt)
    seen, todo = {init}, [init]
    while todo:
        q = todo.pop()
        for w in succ.get(q, ()):
            if w not in seen:
                seen.add(w)
                todo.append(w)
    kept = [q for q in states if q in seen]
    return kept, [(s, t) for s, t in edges if s in seen and t in seen]


def random_system(seed: int, max_states: int, max_letters: int,
                  semantics: str, one_conj: bool = False) -> GuardedSystem:
    """A deterministic pseudo-random system within the given bounds."""
    if max_states < 1 or max_letters < 1:
        raise SemanticError("bounds must be >= 1")
    if semantics not in (DISJUNCTIVE, CONJUNCTIVE):
        raise SemanticError(f"unknown semantics {semantics!r}")
    rng = random.Random(seed)

    def skeleton(prefix, role):
        n = rng.randint(1, max_states)
        states = [f"{prefix}{i}" for i in range(n)]
        edges = []
        for _ in range(rng.randint(0, 2 * n)):
            edges.append((rng.choice(states), rng.choice(states)))
        states, edges = _prune_unreachable(states, f"{prefix}0", edges)
        n_letters = rng.randint(0, max_letters)
        letters = tuple(f"{prefix}x{i}@{role}" for i in range(n_letters))
        return states, edges, letters

    sa, ea, la = skeleton("a", "A")
    sb, eb, lb = skeleton("b", "B")
    allq = [f"{q}@A" for q in sa] + [f"{q}@B" for q in sb]
    inits = {"a0@A", "b0@B"}

    def guard():
        if rng.random() < 0.4:
            return frozenset(allq)
        if semantics == DISJUNCTIVE:
            pool = [q for q in allq if rng.random() < 0.5]
            return frozenset(pool or [rng.choice(allq)])
        blockable = [q for q in allq if q not in inits]
        if not blockable:
            return frozenset(allq)
        if one_conj:
            drop = {rng.choice(blockable)}
        else:
            drop = {q for q in blockable if rng.random() < 0.4}
        return frozenset(q for q in allq if q not in drop)

    def build(name, role, states, edges, letters):
        use = letters if letters else (f"⊥@{role}",)
        trans = []
        for src, tgt in edges:
            for lt in (use if rng.random() < 0.5 else (rng.choice(use),)):
                trans.append(LocalTransition(f"{src}@{role}", lt,
                                             Guard(guard()), f"{tgt}@{role}"))
        return ProcessTemplate(name, role,
                               tuple(f"{q}@{role}" for q in states),
                               f"{states[0]}@{role}", letters, tuple(trans))

    sysm = GuardedSystem(semantics,
                         build("rand_a", "A", sa, ea, la),
                         build("rand_b", "B", sb, eb, lb))
    validate_system(sysm)
    return sysm
