"""Explicit-state model checking of a fixed instance (A,B)^(1,n).

The configuration graph is built by BFS in a fixed order, so node numbering,
verdicts and witnesses are deterministic.  Fairness is never encoded into
formulas; it is compiled to an acceptance condition (Büchi sets for
unconditional fairness, Streett pairs for strong fairness and initializing
runs) and solved by one Streett-emptiness engine, with property automata
handled by product construction.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

from . import model
from .automata import ltl_to_gba
from .errors import ResourceLimitError, SemanticError
from .model import Configuration, GuardedSystem, LassoRun, enabled_moves
from .speclang import Atom, ConcreteCheck, TrueF, nnf

DEFAULT_NODE_LIMIT = 5_000_000


@dataclass
class ConfigGraph:
    sys: GuardedSystem
    n: int
    nodes: list                 # Configuration, index = node id
    initials: list              # node ids
    edges: list                 # (src, mover, transition, tgt), index = edge id
    adj: list                   # per node: list of edge ids
    enabled: list               # per node: frozenset of enabled process ids


@dataclass(frozen=True)
class Pred:
    """A predicate over one graph: a node set and an edge set."""

    nodes: frozenset = frozenset()
    edges: frozenset = frozenset()


@dataclass(frozen=True)
class AcceptanceCondition:
    buchi_sets: tuple = ()      # of Pred, each must recur
    streett_pairs: tuple = ()   # of (trigger: Pred, response: Pred)


@dataclass
class Verdict:
    holds: bool
    witness: Optional[LassoRun] = None
    stats: dict = field(default_factory=dict)


def build_graph(sys: GuardedSystem, n: int,
                limit_nodes: int = DEFAULT_NODE_LIMIT) -> ConfigGraph:
    """Exact reachable configuration graph, deterministic BFS numbering."""
    t0 = time.monotonic()
    nodes, index, adj, edges, enabled = [], {}, [], [], []

    def intern(c):
        if c not in index:
            if len(nodes) >= limit_nodes:
                raise ResourceLimitError(f"configuration graph exceeds {limit_nodes} nodes")
            index[c] = len(nodes)
            nodes.append(c)
            adj.append([])
            enabled.append(None)
            frontier.append(index[c])
        return index[c]

    frontier = []
    initials = []
    for c in model.initial_configurations(sys, n):
        initials.append(intern(c))
    qi = 0
    while qi < len(frontier):
        nid = frontier[qi]
        qi += 1
        c = nodes[nid]
        moves = enabled_moves(sys, c)
        enabled[nid] = frozenset(p for p, _ in moves)
        for p, tr in moves:
            for fresh in sys.template_of(p).letters:
                tgt = intern(model.step(sys, c, p, tr, fresh))
                adj[nid].append(len(edges))
                edges.append((nid, p, tr, tgt))
    g = ConfigGraph(sys, n, nodes, initials, edges, adj, enabled)
    g.build_millis = int((time.monotonic() - t0) * 1000)
    return g


# ---------------------------------------------------------------------------
# Streett / generalized-Büchi emptiness engine


def _sccs(nodes, succ):
    """Iterative Tarjan over an arbitrary successor map; deterministic order."""
    index, low, on_stack, stack, out = {}, {}, set(), [], []
    counter = [0]
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(succ(root)))]
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
                    work.append((w, iter(succ(w))))
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


class _Engine:
    """Fair-lasso search over an explicit graph with Büchi sets and Streett
    pairs.  Büchi sets are treated as Streett pairs with an always-true
    trigger; violated pairs trigger SCC refinement by trigger deletion."""

    def __init__(self, n_nodes, edge_list, adj, initials, acc):
        self.n_nodes = n_nodes
        self.edges = edge_list          # (src, tgt) per edge id
        self.adj = adj                  # node -> list of edge ids
        self.initials = initials
        self.pairs = [(None, b) for b in acc.buchi_sets]
        self.pairs += list(acc.streett_pairs)

    def _reachable(self):
        seen = set(self.initials)
        todo = list(self.initials)
        while todo:
            v = todo.pop()
            for e in self.adj[v]:
                w = self.edges[e][1]
                if w not in seen:
                    seen.add(w)
                    todo.append(w)
        return seen

    def search(self):
        """Returns (loop_node, stem_edge_ids, loop_edge_ids) or None."""
        reach = self._reachable()
        all_edges = {e for v in reach for e in self.adj[v]
                     if self.edges[e][1] in reach}
        queue = [(reach, all_edges)]
        while queue:
            nodes, edges = queue.pop(0)
            by_src = {}
            for e in edges:
                by_src.setdefault(self.edges[e][0], []).append(e)

            def succ(v):
                return [self.edges[e][1] for e in by_src.get(v, ())]

            comps = _sccs(sorted(nodes), succ)
            for comp in sorted(comps, key=min):
                internal = {e for v in comp for e in by_src.get(v, ())
                            if self.edges[e][1] in comp}
                if not internal:
                    continue
                violated = []
                for trig, resp in self.pairs:
                    t_occ = trig is None or (trig.nodes & comp) or (trig.edges & internal)
                    r_occ = (resp.nodes & comp) or (resp.edges & internal)
                    if t_occ and not r_occ:
                        violated.append((trig, resp))
                if not violated:
                    return self._witness(comp, internal, by_src)
                sub_nodes, sub_edges = set(comp), set(internal)
                for trig, _ in violated:
                    if trig is None:
                        sub_nodes.clear()
                        break
                    sub_nodes -= trig.nodes
                    sub_edges -= trig.edges
                sub_edges = {e for e in sub_edges
                             if self.edges[e][0] in sub_nodes
                             and self.edges[e][1] in sub_nodes}
                if sub_nodes:
                    queue.append((sub_nodes, sub_edges))
        return None

    def _path(self, src, targets, by_src, allowed):
        """Shortest path (edge ids) within allowed edges from src to targets."""
        prev = {src: None}
        frontier = [src]
        while frontier:
            hits = sorted(v for v in frontier if v in targets)
            if hits:
                v = hits[0]
                path = []
                while prev[v] is not None:
                    e, u = prev[v]
                    path.append(e)
                    v = u
                return list(reversed(path))
            nxt = []
            for v in frontier:
                for e in sorted(by_src.get(v, ())):
                    if e not in allowed:
                        continue
                    w = self.edges[e][1]
                    if w not in prev:
                        prev[w] = (e, v)
                        nxt.append(w)
            frontier = sorted(nxt)
        return None

    def _witness(self, comp, internal, by_src):
        start = min(comp)
        # required visits: one response occurrence per pair whose trigger occurs
        requirements = []
        for trig, resp in self.pairs:
            t_occ = trig is None or (trig.nodes & comp) or (trig.edges & internal)
            if not t_occ:
                continue
            rn = sorted(resp.nodes & comp)
            re = sorted(resp.edges & internal)
            requirements.append(("node", rn[0]) if rn else ("edge", re[0]))
        loop = []
        cur = start
        for kind, target in requirements:
            if kind == "node":
                seg = self._path(cur, {target}, by_src, internal)
                loop += seg
                cur = target
            else:
                esrc, etgt = self.edges[target]
                seg = self._path(cur, {esrc}, by_src, internal)
                loop += seg + [target]
                cur = etgt
        loop += self._path(cur, {start}, by_src, internal)
        if not loop:
            # close a nonempty cycle through start
            outs = [e for e in sorted(by_src.get(start, ())) if e in internal]
            e0 = outs[0]
            loop = [e0] + self._path(self.edges[e0][1], {start}, by_src, internal)
        # stem: anywhere in the full graph from an initial node to start
        full_by_src = {}
        for e, (s, _) in enumerate(self.edges):
            full_by_src.setdefault(s, []).append(e)
        stem = self._multi_path(self.initials, {start}, full_by_src)
        return start, stem, loop

    def _multi_path(self, sources, targets, by_src):
        prev = {}
        for s in sorted(sources):
            prev.setdefault(s, None)
        frontier = sorted(set(sources))
        while frontier:
            hits = sorted(v for v in frontier if v in targets)
            if hits:
                v = hits[0]
                path = []
                while prev[v] is not None:
                    e, u = prev[v]
                    path.append(e)
                    v = u
                return list(reversed(path))
            nxt = []
            for v in frontier:
                for e in sorted(by_src.get(v, ())):
                    w = self.edges[e][1]
                    if w not in prev:
                        prev[w] = (e, v)
                        nxt.append(w)
            frontier = sorted(nxt)
        return None


# ---------------------------------------------------------------------------
# Fairness compilation


def move_pred(g: ConfigGraph, p: int) -> Pred:
    return Pred(edges=frozenset(e for e, (_, mover, _, _) in enumerate(g.edges)
                                if mover == p))


def enabled_pred(g: ConfigGraph, p: int) -> Pred:
    return Pred(nodes=frozenset(v for v in range(len(g.nodes))
                                if p in g.enabled[v]))


def at_init_pred(g: ConfigGraph, p: int) -> Pred:
    init = g.sys.template_of(p).init
    return Pred(nodes=frozenset(v for v, c in enumerate(g.nodes)
                                if c.state_of(p) == init))


def fairness_condition(g: ConfigGraph, fairness: str,
                       initializing: bool = False) -> AcceptanceCondition:
    """Compile a fairness kind into Büchi sets / Streett pairs over g."""
    buchi, streett = [], []
    procs = range(g.n + 1)
    if fairness == "uncond":
        buchi += [move_pred(g, p) for p in procs]
    elif fairness == "strong":
        streett += [(enabled_pred(g, p), move_pred(g, p)) for p in procs]
    elif fairness != "none":
        raise SemanticError(f"unknown fairness kind {fairness!r}")
    if initializing:
        streett += [(move_pred(g, p), at_init_pred(g, p)) for p in procs]
    return AcceptanceCondition(tuple(buchi), tuple(streett))


# ---------------------------------------------------------------------------
# Lasso assembly


def _assemble(g: ConfigGraph, start, stem_edges, loop_edges) -> LassoRun:
    stem, cur = [], start
    for e in stem_edges:
        src, mover, _, tgt = g.edges[e]
        stem.append((g.nodes[src], mover))
        cur = tgt
    assert cur == start
    loop = []
    for e in loop_edges:
        src, mover, _, tgt = g.edges[e]
        loop.append((g.nodes[src], mover))
        cur = tgt
    assert cur == start
    return LassoRun(tuple(stem), tuple(loop))


def fair_lasso_search(g: ConfigGraph, acc: AcceptanceCondition) -> Optional[LassoRun]:
    """A lasso of g whose loop satisfies acc, or None."""
    edge_pairs = [(src, tgt) for src, _, _, tgt in g.edges]
    eng = _Engine(len(g.nodes), edge_pairs, g.adj, g.initials, acc)
    hit = eng.search()
    if hit is None:
        return None
    start, stem, loop = hit
    return _assemble(g, start, stem, loop)


# ---------------------------------------------------------------------------
# Property checking


def _valuation(c: Configuration, atoms) -> frozenset:
    out = set()
    for a in atoms:
        if a.role == "A":
            val = c.stateA if a.kind == "state" else c.inputA
            if val == f"{a.symbol}@A":
                out.add(a)
        else:
            j = a.index
            if j is None or j > c.n:
                continue
            val = c.statesB[j - 1] if a.kind == "state" else c.inputsB[j - 1]
            if val == f"{a.symbol}@B":
                out.add(a)
    return frozenset(out)


def _exists_search(g: ConfigGraph, formula, acc: AcceptanceCondition):
    """Fair lasso of g whose word satisfies formula (exists semantics)."""
    from .speclang import atoms_of

    f = nnf(formula)
    if isinstance(f, TrueF):
        # no automaton needed: any fair lasso is a witness
        return fair_lasso_search(g, acc)
    aut = ltl_to_gba(f)
    atoms = sorted(set(atoms_of(f)), key=repr)
    vals = [_valuation(c, atoms) for c in g.nodes]

    by_src = {}
    for src, pos, neg, dst in aut.transitions:
        by_src.setdefault(src, []).append((pos, neg, dst))

    def aut_succ(a, vid):
        return [dst for pos, neg, dst in by_src.get(a, ())
                if pos <= vals[vid] and not (neg & vals[vid])]

    # product nodes
    pindex, pnodes = {}, []
    pedges, padj = [], []
    pinit = []

    def intern(gid, aid):
        key = (gid, aid)
        if key not in pindex:
            pindex[key] = len(pnodes)
            pnodes.append(key)
            padj.append([])
            todo.append(key)
        return pindex[key]

    todo = []
    for gid in g.initials:
        for a0 in sorted(aut.initial, key=repr):
            for a1 in aut_succ(a0, gid):
                pinit.append(intern(gid, a1))
    qi = 0
    while qi < len(todo):
        gid, aid = todo[qi]
        src_pid = pindex[(gid, aid)]
        qi += 1
        for e in g.adj[gid]:
            tgt = g.edges[e][3]
            for a2 in aut_succ(aid, tgt):
                pid = intern(tgt, a2)
                padj[src_pid].append(len(pedges))
                pedges.append((src_pid, pid, e))

    def lift(pred: Pred) -> Pred:
        return Pred(
            nodes=frozenset(i for i, (gid, _) in enumerate(pnodes)
                            if gid in pred.nodes),
            edges=frozenset(i for i, (_, _, ge) in enumerate(pedges)
                            if ge in pred.edges))

    buchi = [lift(b) for b in acc.buchi_sets]
    for accset in (aut.acceptance or ()):
        buchi.append(Pred(nodes=frozenset(
            i for i, (_, aid) in enumerate(pnodes) if aid in accset)))
    streett = tuple((lift(t), lift(r)) for t, r in acc.streett_pairs)

    eng = _Engine(len(pnodes), [(s, t) for s, t, _ in pedges], padj,
                  sorted(set(pinit)), AcceptanceCondition(tuple(buchi), streett))
    hit = eng.search()
    if hit is None:
        return None
    start, stem, loop = hit
    g_stem = [pedges[e][2] for e in stem]
    g_loop = [pedges[e][2] for e in loop]
    g_start = pnodes[start][0]
    return _assemble(g, g_start, g_stem, g_loop)


def check(sys: GuardedSystem, n: int, cc: ConcreteCheck, fairness: str = "none",
          initializing: bool = False,
          limit_nodes: int = DEFAULT_NODE_LIMIT) -> Verdict:
    """Model-check a concrete formula on (A,B)^(1,n) under a fairness kind.

    Only infinite runs carry properties; forall-path verdicts are decided via
    the negated formula's exists-check and return the counterexample lasso."""
    if n < cc.k:
        raise SemanticError(f"instance size {n} below tracked count {cc.k}")
    t0 = time.monotonic()
    g = build_graph(sys, n, limit_nodes)
    acc = fairness_condition(g, fairness, initializing)
    from .speclang import Not
    if cc.path == "exists":
        w = _exists_search(g, cc.formula, acc)
        holds = w is not None
    else:
        w = _exists_search(g, Not(cc.formula), acc)
        holds = w is None
    stats = {"nodes": len(g.nodes), "edges": len(g.edges),
             "millis": int((time.monotonic() - t0) * 1000)}
    return Verdict(holds, w, stats)


# ---------------------------------------------------------------------------
# Deadlocks


def global_deadlock(sys: GuardedSystem, n: int,
                    limit_nodes: int = DEFAULT_NODE_LIMIT) -> Optional[LassoRun]:
    """A finite maximal run, or None if no reachable all-disabled configuration."""
    g = build_graph(sys, n, limit_nodes)
    dead = {v for v in range(len(g.nodes)) if not g.enabled[v]}
    if not dead:
        return None
    edge_pairs = [(src, tgt) for src, _, _, tgt in g.edges]
    eng = _Engine(len(g.nodes), edge_pairs, g.adj, g.initials, AcceptanceCondition())
    by_src = {}
    for e, (s, _) in enumerate(edge_pairs):
        by_src.setdefault(s, []).append(e)
    path = eng._multi_path(g.initials, dead, by_src)
    if path is None:
        return None
    stem = []
    cur = g.edges[path[0]][0] if path else min(set(g.initials) & dead)
    for e in path:
        src, mover, _, tgt = g.edges[e]
        stem.append((g.nodes[src], mover))
        cur = tgt
    stem.append((g.nodes[cur], None))
    return LassoRun(tuple(stem), ())


def local_deadlock(sys: GuardedSystem, n: int, fairness: str = "none",
                   initializing: bool = False,
                   limit_nodes: int = DEFAULT_NODE_LIMIT) -> Optional[LassoRun]:
    """An infinite run (in the requested fairness class) whose loop keeps some
    process disabled throughout, or None."""
    if fairness not in ("none", "strong"):
        raise SemanticError("local deadlock search supports fairness none or strong")
    g = build_graph(sys, n, limit_nodes)
    acc = fairness_condition(g, fairness, initializing)
    edge_pairs = [(src, tgt) for src, _, _, tgt in g.edges]
    for p in range(n + 1):
        disabled = frozenset(v for v in range(len(g.nodes))
                             if p not in g.enabled[v])
        if not disabled:
            continue
        # confine the loop to the region where p stays disabled (a disabled
        # process cannot move, so its input is pinned for free)
        trap = Pred(nodes=frozenset(range(len(g.nodes))) - disabled)
        pairs = acc.streett_pairs + ((trap, Pred()),)
        hit = _Engine(len(g.nodes), edge_pairs, g.adj, g.initials,
                      AcceptanceCondition(acc.buchi_sets, pairs)).search()
        if hit is not None:
            start, stem, loop = hit
            return _assemble(g, start, stem, loop)
    return None


# ---------------------------------------------------------------------------
# Witness formatting


def format_witness(sys: GuardedSystem, r: LassoRun) -> str:
    """Stem and loop as `state-vector | input-vector | mover` lines."""

    def bare(x):
        return x.split("@")[0]

    def mover_name(m):
        if m is None:
            return "⊥"
        return "A" if m == 0 else f"B{m}"

    def line(c, m):
        states = " ".join([bare(c.stateA)] + [bare(s) for s in c.statesB])
        inputs = " ".join([bare(c.inputA)] + [bare(i) for i in c.inputsB])
        return f"{states} | {inputs} | {mover_name(m)}"

    out = ["stem:"]
    out += [line(c, m) for c, m in r.stem]
    if r.loop:
        out.append("loop:")
        out += [line(c, m) for c, m in r.loop]
    return "\n".join(out) + "\n"
