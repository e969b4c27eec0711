"""Guarded protocols (A,B)^(1,n): templates, systems, configurations, runs.

State and letter identifiers are namespaced by role ("N@B", "r@A") so that
Q_A and Q_B (and the input alphabets) are mechanically disjoint.  Process ids
are integers: 0 is the A-process, 1..n are the B-processes.  The mover ``None``
stands for the bottom marker on a final, all-disabled configuration.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional

from .errors import DisabledMoveError, ParseError, SemanticError

DISJUNCTIVE = "disjunctive"
CONJUNCTIVE = "conjunctive"

#: Process id of the A-process.
A = 0


def closed_letter(role: str) -> str:
    """The designated input letter carried internally by closed templates."""
    return f"⊥@{role}"


@dataclass(frozen=True)
class Guard:
    """A guard: a set of local states over Q_A ∪ Q_B."""

    members: frozenset


@dataclass(frozen=True)
class LocalTransition:
    source: str
    letter: str
    guard: Guard
    target: str


@dataclass(frozen=True)
class ProcessTemplate:
    name: str            # declared name, for display
    role: str            # "A" or "B"; used for namespacing
    states: tuple        # namespaced state ids, in declaration order
    init: str
    inputs: tuple        # namespaced letters; empty for closed templates
    transitions: tuple   # LocalTransition, in declaration order

    @property
    def is_closed(self) -> bool:
        return not self.inputs

    @property
    def letters(self) -> tuple:
        """The effective alphabet: declared inputs, or the closed letter."""
        return self.inputs if self.inputs else (closed_letter(self.role),)


@dataclass(frozen=True)
class GuardedSystem:
    semantics: str
    templateA: ProcessTemplate
    templateB: ProcessTemplate

    @property
    def all_states(self) -> tuple:
        return self.templateA.states + self.templateB.states

    def template_of(self, p: int) -> ProcessTemplate:
        return self.templateA if p == A else self.templateB

    @property
    def is_closed(self) -> bool:
        return self.templateA.is_closed and self.templateB.is_closed


@dataclass(frozen=True)
class Configuration:
    stateA: str
    statesB: tuple
    inputA: str
    inputsB: tuple

    @property
    def n(self) -> int:
        return len(self.statesB)

    def state_of(self, p: int) -> str:
        return self.stateA if p == A else self.statesB[p - 1]

    def input_of(self, p: int) -> str:
        return self.inputA if p == A else self.inputsB[p - 1]


@dataclass(frozen=True)
class LassoRun:
    """An ultimately periodic run: stem · loop^ω, or a finite run (empty loop).

    Each element pairs a configuration with the mover taking the step to the
    next element; the last loop element steps back to the first loop element.
    A finite (globally deadlocked) run ends with mover None.
    """

    stem: tuple   # of (Configuration, mover)
    loop: tuple   # of (Configuration, mover); empty only for finite runs

    @property
    def deadlocked(self) -> bool:
        return not self.loop and bool(self.stem) and self.stem[-1][1] is None

    @property
    def n(self) -> int:
        return (self.stem or self.loop)[0][0].n


@dataclass(frozen=True)
class LocalTrace:
    """Projection of a run onto one process: (state, input) pairs, lasso-shaped."""

    steps: tuple
    loop: tuple = ()


@dataclass(frozen=True)
class Violation:
    index: int
    reason: str


# ---------------------------------------------------------------------------
# Parsing

_KEYWORDS = {"system", "semantics", "template", "inputs", "states", "init",
             "trans", "on", "guard", "ALL"}


class _Tokens:
    def __init__(self, text: str):
        self.toks = []
        for ln, line in enumerate(text.splitlines(), start=1):
            body = line.split("#", 1)[0]
            col = 0
            i = 0
            while i < len(body):
                ch = body[i]
                if ch.isspace():
                    i += 1
                    continue
                if ch in "{}=*":
                    self.toks.append((ch, ln, i + 1))
                    i += 1
                elif body.startswith("->", i):
                    self.toks.append(("->", ln, i + 1))
                    i += 2
                elif ch.isalnum() or ch in "_@":
                    j = i
                    while j < len(body) and (body[j].isalnum() or body[j] in "_@"):
                        j += 1
                    self.toks.append((body[i:j], ln, i + 1))
                    i = j
                else:
                    raise ParseError(f"unexpected character {ch!r}", ln, i + 1)
        self.pos = 0

    def peek(self):
        return self.toks[self.pos][0] if self.pos < len(self.toks) else None

    def next(self, expect=None):
        if self.pos >= len(self.toks):
            raise ParseError(f"unexpected end of input, expected {expect!r}")
        tok, ln, col = self.toks[self.pos]
        if expect is not None and tok != expect:
            raise ParseError(f"expected {expect!r}, found {tok!r}", ln, col)
        self.pos += 1
        return tok

    def name(self, what="name"):
        tok, ln, col = self.toks[self.pos] if self.pos < len(self.toks) else (None, 0, 0)
        if tok is None or not (tok[0].isalpha() or tok[0] == "_") or "@" in tok:
            raise ParseError(f"expected {what}, found {tok!r}", ln, col)
        self.pos += 1
        return tok


def _parse_template(tk: _Tokens, role: str):
    tk.next("template")
    name = tk.name("template name")
    tk.next("{")
    tk.next("inputs")
    tk.next("=")
    tk.next("{")
    inputs = []
    while tk.peek() != "}":
        inputs.append(f"{tk.name('input letter')}@{role}")
    tk.next("}")
    tk.next("states")
    tk.next("=")
    tk.next("{")
    states = []
    while tk.peek() != "}":
        states.append(f"{tk.name('state')}@{role}")
    tk.next("}")
    tk.next("init")
    tk.next("=")
    init = f"{tk.name('init state')}@{role}"
    raw_trans = []
    while tk.peek() == "trans":
        tk.next("trans")
        src = tk.name("source state")
        tk.next("->")
        tgt = tk.name("target state")
        tk.next("on")
        if tk.peek() == "*":
            tk.next("*")
            letter = None
        else:
            letter = tk.name("letter")
        tk.next("guard")
        if tk.peek() == "ALL":
            tk.next("ALL")
            guard = None
        else:
            tk.next("{")
            guard = []
            while tk.peek() != "}":
                q = tk.next()
                if "@" not in q or q.count("@") != 1:
                    raise ParseError(f"expected state@template, found {q!r}")
                guard.append(q)
            tk.next("}")
        raw_trans.append((src, tgt, letter, guard))
    tk.next("}")
    return name, tuple(states), init, tuple(inputs), raw_trans


def parse_system(text: str) -> GuardedSystem:
    """Parse a system-description document into a validated GuardedSystem."""
    tk = _Tokens(text)
    tk.next("system")
    tk.next("{")
    tk.next("semantics")
    tk.next("=")
    semantics = tk.next()
    if semantics not in (DISJUNCTIVE, CONJUNCTIVE):
        raise ParseError(f"unknown semantics {semantics!r}")
    rawA = _parse_template(tk, "A")
    rawB = _parse_template(tk, "B")
    tk.next("}")
    if tk.peek() is not None:
        raise ParseError(f"trailing input {tk.peek()!r}")

    name_to_role = {rawA[0]: "A", rawB[0]: "B"}
    if rawA[0] == rawB[0]:
        raise SemanticError(f"duplicate template name {rawA[0]!r}")
    all_states = set(rawA[1]) | set(rawB[1])

    def build(raw, role):
        name, states, init, inputs, raw_trans = raw
        if len(set(states)) != len(states):
            raise SemanticError(f"duplicate state in template {name}")
        if init not in states:
            raise SemanticError(f"init state {init} not declared in template {name}")
        letters = inputs if inputs else (closed_letter(role),)
        trans = []
        for src, tgt, letter, guard in raw_trans:
            src_q, tgt_q = f"{src}@{role}", f"{tgt}@{role}"
            for q in (src_q, tgt_q):
                if q not in states:
                    raise SemanticError(f"undeclared state {q} in template {name}")
            if guard is None:
                members = frozenset(all_states)
            else:
                members = set()
                for item in guard:
                    st, tname = item.split("@")
                    if tname not in name_to_role:
                        raise SemanticError(f"unknown template {tname!r} in guard")
                    q = f"{st}@{name_to_role[tname]}"
                    if q not in all_states:
                        raise SemanticError(f"undeclared guard state {item}")
                    members.add(q)
                members = frozenset(members)
            if letter is None:
                use = letters
            else:
                lt = f"{letter}@{role}"
                if lt not in inputs:
                    raise SemanticError(f"undeclared input letter {letter} in template {name}")
                use = (lt,)
            for lt in use:
                trans.append(LocalTransition(src_q, lt, Guard(members), tgt_q))
        return ProcessTemplate(name, role, states, init, inputs, tuple(trans))

    tA = build(rawA, "A")
    tB = build(rawB, "B")
    sys = GuardedSystem(semantics, tA, tB)
    validate_system(sys)
    return sys


def validate_system(sys: GuardedSystem) -> None:
    if sys.semantics == CONJUNCTIVE:
        inits = {sys.templateA.init, sys.templateB.init}
        for t in (sys.templateA, sys.templateB):
            for tr in t.transitions:
                if not inits <= tr.guard.members:
                    raise SemanticError(
                        f"conjunctive guard on {tr.source}->{tr.target} must contain init states")


def format_system(sys: GuardedSystem) -> str:
    """Render a system back into the system-description format."""
    lines = ["system {", f"  semantics = {sys.semantics}"]
    roles = {"A": sys.templateA, "B": sys.templateB}
    names = {"A": sys.templateA.name, "B": sys.templateB.name}

    def bare(q):
        return q.split("@")[0]

    for role in ("A", "B"):
        t = roles[role]
        lines.append(f"  template {t.name} {{")
        lines.append("    inputs = {" + " ".join(bare(i) for i in t.inputs) + "}")
        lines.append("    states = {" + " ".join(bare(q) for q in t.states) + "}")
        lines.append(f"    init = {bare(t.init)}")
        full = frozenset(sys.all_states)
        for tr in t.transitions:
            letter = "*" if t.is_closed else bare(tr.letter)
            if tr.guard.members == full:
                g = "ALL"
            else:
                parts = sorted(f"{bare(q)}@{names[q.split('@')[1]]}" for q in tr.guard.members)
                g = "{" + " ".join(parts) + "}"
            lines.append(f"    trans {bare(tr.source)} -> {bare(tr.target)} "
                         f"on {letter} guard {g}")
        lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Semantics

def guard_holds(sys: GuardedSystem, c: Configuration, p: int, g: Guard) -> bool:
    """Disjunctive: some process other than p is in g; conjunctive: all are."""
    others = (c.state_of(q) for q in range(c.n + 1) if q != p)
    if sys.semantics == DISJUNCTIVE:
        return any(s in g.members for s in others)
    return all(s in g.members for s in others)


def enabled_moves(sys: GuardedSystem, c: Configuration):
    """All enabled (process id, transition) pairs, in fixed order."""
    out = []
    for p in range(c.n + 1):
        t = sys.template_of(p)
        st, inp = c.state_of(p), c.input_of(p)
        for tr in t.transitions:
            if tr.source == st and tr.letter == inp and guard_holds(sys, c, p, tr.guard):
                out.append((p, tr))
    return out


def is_enabled(sys: GuardedSystem, c: Configuration, p: int, tr: LocalTransition) -> bool:
    return (tr.source == c.state_of(p) and tr.letter == c.input_of(p)
            and guard_holds(sys, c, p, tr.guard))


def step(sys: GuardedSystem, c: Configuration, p: int, tr: LocalTransition,
         fresh: str) -> Configuration:
    """Fire an enabled transition of p; the mover also reads a fresh input letter."""
    if not is_enabled(sys, c, p, tr):
        raise DisabledMoveError(f"process {p}: {tr.source} -> {tr.target} not enabled")
    if fresh not in sys.template_of(p).letters:
        raise DisabledMoveError(f"letter {fresh!r} not in alphabet of process {p}")
    if p == A:
        return Configuration(tr.target, c.statesB, fresh, c.inputsB)
    sb = list(c.statesB)
    ib = list(c.inputsB)
    sb[p - 1] = tr.target
    ib[p - 1] = fresh
    return Configuration(c.stateA, tuple(sb), c.inputA, tuple(ib))


def initial_configurations(sys: GuardedSystem, n: int):
    """All-init configurations with every combination of initial inputs."""
    for la in sys.templateA.letters:
        for lb in itertools.product(sys.templateB.letters, repeat=n):
            yield Configuration(sys.templateA.init, (sys.templateB.init,) * n, la, lb)


def is_initial(sys: GuardedSystem, c: Configuration) -> bool:
    return (c.stateA == sys.templateA.init
            and all(s == sys.templateB.init for s in c.statesB)
            and c.inputA in sys.templateA.letters
            and all(i in sys.templateB.letters for i in c.inputsB))


def _matching_transition(sys, c, p, nxt):
    """An enabled transition of p consistent with configurations c -> nxt."""
    t = sys.template_of(p)
    for tr in t.transitions:
        if (tr.source == c.state_of(p) and tr.letter == c.input_of(p)
                and tr.target == nxt.state_of(p)
                and guard_holds(sys, c, p, tr.guard)):
            return tr
    return None


def validate_run(sys: GuardedSystem, n: int, r: LassoRun) -> Optional[Violation]:
    """None if r is a legal (maximal, input-stable) run of (A,B)^(1,n)."""
    seq = list(r.stem) + list(r.loop)
    if not seq:
        return Violation(0, "empty run")
    first = seq[0][0]
    if first.n != n:
        return Violation(0, f"instance size {first.n} != {n}")
    if not is_initial(sys, first):
        return Violation(0, "run does not start at the initial configuration")
    for i, (c, mover) in enumerate(seq):
        last = i == len(seq) - 1
        if mover is None:
            if r.loop or not last:
                return Violation(i, "bottom mover before the end of a finite run")
            if enabled_moves(sys, c):
                return Violation(i, "not-maximal: final configuration has enabled moves")
            return None
        nxt = seq[i + 1][0] if not last else (r.loop[0][0] if r.loop else None)
        if nxt is None:
            return Violation(i, "finite run must end with the bottom mover")
        for p in range(n + 1):
            if p != mover:
                if c.state_of(p) != nxt.state_of(p):
                    return Violation(i, f"non-mover {p} changed state")
                if c.input_of(p) != nxt.input_of(p):
                    return Violation(i, f"input-stability: non-mover {p} input changed")
        if nxt.input_of(mover) not in sys.template_of(mover).letters:
            return Violation(i, f"mover {mover} read a foreign letter")
        if _matching_transition(sys, c, mover, nxt) is None:
            return Violation(i, f"no enabled transition of {mover} matches the step")
    return None


# ---------------------------------------------------------------------------
# Traces and stuttering

def project(r: LassoRun, p: int) -> LocalTrace:
    """The local trace of process p along r."""
    steps = tuple((c.state_of(p), c.input_of(p)) for c, _ in r.stem)
    loop = tuple((c.state_of(p), c.input_of(p)) for c, _ in r.loop)
    return LocalTrace(steps, loop)


def _collapse(xs):
    out = []
    for x in xs:
        if not out or out[-1] != x:
            out.append(x)
    return out


def _primitive(xs):
    m = len(xs)
    for d in range(1, m + 1):
        if m % d == 0 and xs == xs[:d] * (m // d):
            return xs[:d]
    return xs


def _min_rotation(xs):
    return min(tuple(xs[i:] + xs[:i]) for i in range(len(xs)))


def destutter(t: LocalTrace) -> LocalTrace:
    """Collapse stuttering; lasso traces are put into a canonical normal form
    (primitive loop, lexicographically minimal rotation, shortest stem)."""
    if not t.loop:
        return LocalTrace(tuple(_collapse(t.steps)), ())
    loop = list(t.loop)
    if all(x == loop[0] for x in loop):
        s = _collapse(list(t.steps) + [loop[0]])
        return LocalTrace(tuple(s[:-1]), (loop[0],))
    w = _collapse(list(t.steps) + loop * 3)
    d = _collapse(loop)
    if len(d) > 1 and d[-1] == d[0]:
        d = d[:-1]
    r_star = _min_rotation(_primitive(d))
    m = len(r_star)
    while len(w) >= 2 * m and w[-m:] == w[-2 * m:-m]:
        del w[-m:]
    pre, tail = w[:-m], w[-m:]
    for _ in range(m):
        if tuple(tail) == r_star:
            break
        pre.append(tail[0])
        tail = tail[1:] + [tail[0]]
    while len(pre) >= m and tuple(pre[-m:]) == r_star:
        del pre[-m:]
    return LocalTrace(tuple(pre), r_star)


def stutter_equiv(t1: LocalTrace, t2: LocalTrace) -> bool:
    return destutter(t1) == destutter(t2)


# ---------------------------------------------------------------------------
# Open/closed translation

def _annot(state: str, letter: str) -> str:
    sb, role = state.split("@")
    lb = letter.split("@")[0]
    return f"{sb}·{lb}@{role}"


def close_template(t: ProcessTemplate,
                   companion: Optional[ProcessTemplate] = None) -> ProcessTemplate:
    """The input-preserving closed template: states T × Σ with the last read
    letter stored in the state.  Guards over the companion template are lifted
    through the companion's own annotation (identity if it is closed)."""
    if t.is_closed:
        raise SemanticError(f"template {t.name} is already closed")

    def lift(q):
        if q in t.states:
            return [_annot(q, lt) for lt in t.letters]
        if companion is not None and q in companion.states and not companion.is_closed:
            return [_annot(q, lt) for lt in companion.letters]
        return [q]

    states = tuple(_annot(q, lt) for q in t.states for lt in t.letters)
    init = _annot(t.init, t.letters[0])
    trans = []
    for tr in t.transitions:
        members = frozenset(x for q in tr.guard.members for x in lift(q))
        g = Guard(members)
        for stored in t.letters:
            trans.append(LocalTransition(_annot(tr.source, stored),
                                         closed_letter(t.role), g,
                                         _annot(tr.target, tr.letter)))
    return ProcessTemplate(t.name, t.role, states, init, (), tuple(trans))


def close_system(sys: GuardedSystem) -> GuardedSystem:
    """Close both templates of an open system, lifting guards consistently."""
    tA, tB = sys.templateA, sys.templateB
    cA = close_template(tA, tB) if not tA.is_closed else tA
    cB = close_template(tB, tA) if not tB.is_closed else tB
    return GuardedSystem(sys.semantics, cA, cB)


def is_one_conjunctive(sys: GuardedSystem) -> bool:
    """Every guard is the full state set or the full set minus one state."""
    if sys.semantics != CONJUNCTIVE:
        raise SemanticError("is_one_conjunctive applies to conjunctive systems only")
    full = frozenset(sys.all_states)
    for t in (sys.templateA, sys.templateB):
        for tr in t.transitions:
            if len(full - tr.guard.members) > 1:
                return False
    return True
