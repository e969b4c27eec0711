"""LTL\\X to generalized Büchi automata (tableau construction) and a
lasso-membership oracle.

Transition labels are partial valuations: a set of atoms that must hold and a
set that must not; all other atoms are unconstrained.  Acceptance sets are
state sets, one per until-subformula of the translated formula.
"""
from __future__ import annotations

from dataclasses import dataclass

from .speclang import Atom, And, FalseF, Formula, Not, Or, Release, TrueF, Until


@dataclass(frozen=True)
class GBA:
    states: tuple        # state ids (ints); states[0] is the pre-initial state
    initial: frozenset
    transitions: tuple   # (src, pos: frozenset[Atom], neg: frozenset[Atom], dst)
    acceptance: tuple    # of frozenset[state]


def _key(f):
    return repr(f)


class _Node:
    __slots__ = ("nid", "incoming", "new", "old", "nxt")

    def __init__(self, nid, incoming, new, old, nxt):
        self.nid = nid
        self.incoming = set(incoming)
        self.new = set(new)
        self.old = set(old)
        self.nxt = set(nxt)


_INIT = -1


def ltl_to_gba(f: Formula) -> GBA:
    """Tableau translation; f must be in negation normal form (no X)."""
    done = []          # finished nodes, in creation order
    counter = [0]

    def fresh(incoming, new, old, nxt):
        counter[0] += 1
        return _Node(counter[0], incoming, new, old, nxt)

    def expand(node):
        if not node.new:
            for r in done:
                if r.old == node.old and r.nxt == node.nxt:
                    r.incoming |= node.incoming
                    return
            done.append(node)
            expand(fresh({node.nid}, node.nxt, set(), set()))
            return
        eta = min(node.new, key=_key)
        node.new.discard(eta)
        if isinstance(eta, TrueF):
            node.old.add(eta)
            expand(node)
        elif eta in node.old:
            expand(node)
        elif isinstance(eta, FalseF):
            return
        elif isinstance(eta, Atom) or (isinstance(eta, Not) and isinstance(eta.sub, Atom)):
            contra = eta.sub if isinstance(eta, Not) else Not(eta)
            if contra in node.old:
                return
            node.old.add(eta)
            expand(node)
        elif isinstance(eta, And):
            node.old.add(eta)
            node.new |= {eta.left, eta.right} - node.old
            expand(node)
        elif isinstance(eta, Or):
            n2 = fresh(node.incoming, node.new | ({eta.right} - node.old),
                       node.old | {eta}, node.nxt)
            node.old.add(eta)
            node.new |= {eta.left} - node.old
            expand(node)
            expand(n2)
        elif isinstance(eta, Until):
            n2 = fresh(node.incoming, node.new | ({eta.right} - node.old),
                       node.old | {eta}, node.nxt)
            node.old.add(eta)
            node.new |= {eta.left} - node.old
            node.nxt.add(eta)
            expand(node)
            expand(n2)
        elif isinstance(eta, Release):
            n2 = fresh(node.incoming,
                       node.new | ({eta.left, eta.right} - node.old),
                       node.old | {eta}, node.nxt)
            node.old.add(eta)
            node.new |= {eta.right} - node.old
            node.nxt.add(eta)
            expand(node)
            expand(n2)
        else:
            raise TypeError(f"formula not in NNF: {eta!r}")

    expand(fresh({_INIT}, {f}, set(), set()))

    def label(node):
        pos = frozenset(a for a in node.old if isinstance(a, Atom))
        neg = frozenset(a.sub for a in node.old
                        if isinstance(a, Not) and isinstance(a.sub, Atom))
        return pos, neg

    states = (_INIT,) + tuple(nd.nid for nd in done)
    transitions = []
    initial = set()
    for nd in done:
        pos, neg = label(nd)
        if _INIT in nd.incoming:
            initial.add(nd.nid)
        for src in sorted(nd.incoming):
            transitions.append((src, pos, neg, nd.nid))

    untils = []
    seen = set()

    def collect(g):
        if g in seen:
            return
        seen.add(g)
        if isinstance(g, Until):
            untils.append(g)
        if isinstance(g, (And, Or, Until, Release)):
            collect(g.left)
            collect(g.right)
        elif isinstance(g, Not):
            collect(g.sub)

    collect(f)
    acceptance = tuple(
        frozenset(nd.nid for nd in done if u not in nd.old or u.right in nd.old)
        for u in untils)
    return GBA(states, frozenset({_INIT}), tuple(transitions), acceptance)


def degeneralize(g: GBA) -> GBA:
    """Counting construction; the result has exactly one acceptance set."""
    if len(g.acceptance) == 1:
        return g
    if not g.acceptance:
        return GBA(g.states, g.initial, g.transitions,
                   (frozenset(g.states),))
    k = len(g.acceptance)

    def bump(i, src):
        return (i + 1) % k if src in g.acceptance[i] else i

    transitions = []
    reached = set((q, 0) for q in g.initial)
    frontier = list(reached)
    while frontier:
        nxt = []
        for q, i in frontier:
            for src, pos, neg, dst in g.transitions:
                if src != q:
                    continue
                tgt = (dst, bump(i, q))
                transitions.append(((q, i), pos, neg, tgt))
                if tgt not in reached:
                    reached.add(tgt)
                    nxt.append(tgt)
        frontier = nxt
    accept = frozenset((q, k - 1) for q in g.acceptance[k - 1]
                       if (q, k - 1) in reached)
    states = tuple(sorted(reached, key=repr))
    return GBA(states, frozenset((q, 0) for q in g.initial),
               tuple(transitions), (accept,))


def _sccs(nodes, edges):
    """Iterative Tarjan; returns list of SCCs (each a set) in a fixed order."""
    index = {}
    low = {}
    on_stack = set()
    stack = []
    out = []
    counter = [0]
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(edges.get(root, ())))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter[0]
                    counter[0] += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(edges.get(w, ()))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = set()
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.add(w)
                    if w == v:
                        break
                out.append(comp)
    return out


def accepts_lasso(a: GBA, stem, loop) -> bool:
    """True iff some run of a over stem·loop^ω meets every acceptance set
    infinitely often.  Letters are sets of atoms."""
    if not loop:
        raise ValueError("loop must be nonempty")
    word = list(stem) + list(loop)
    n = len(word)
    s = len(stem)

    def succ(i):
        return i + 1 if i + 1 < n else s

    by_src = {}
    for src, pos, neg, dst in a.transitions:
        by_src.setdefault(src, []).append((pos, neg, dst))

    start = [(q, 0) for q in a.initial]
    adj = {}
    reached = set(start)
    frontier = list(start)
    while frontier:
        nxt = []
        for q, i in frontier:
            outs = []
            for pos, neg, dst in by_src.get(q, ()):
                if pos <= word[i] and not (neg & word[i]):
                    tgt = (dst, succ(i))
                    outs.append(tgt)
                    if tgt not in reached:
                        reached.add(tgt)
                        nxt.append(tgt)
            adj[(q, i)] = outs
        frontier = nxt

    accs = a.acceptance if a.acceptance else (frozenset(a.states),)
    for comp in _sccs(sorted(reached, key=repr), adj):
        has_edge = any(w in comp for v in comp for w in adj.get(v, ()))
        if not has_edge:
            continue
        if all(any(q in acc for q, _ in comp) for acc in accs):
            return True
    return False


def dump(a: GBA) -> str:
    """Line-oriented debug dump: states, arcs, acceptance sets."""
    lines = ["states " + " ".join(map(repr, a.states)),
             "initial " + " ".join(map(repr, sorted(a.initial, key=repr)))]
    for src, pos, neg, dst in a.transitions:
        ps = ",".join(sorted(x.symbol for x in pos))
        ns = ",".join(sorted(x.symbol for x in neg))
        lines.append(f"arc {src!r} -> {dst!r} pos[{ps}] neg[{ns}]")
    for i, acc in enumerate(a.acceptance):
        lines.append(f"accept {i} " + " ".join(map(repr, sorted(acc, key=repr))))
    return "\n".join(lines) + "\n"
