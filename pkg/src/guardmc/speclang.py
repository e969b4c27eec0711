"""LTL\\X formulas over indexed atoms and parameterized specifications.

Atoms refer to the A-process ("C@A", "in:r@A") or to a quantified B-index
("C[i]", "in:r[i]").  A parameterized specification carries a universal
index prefix, a path quantifier, a fairness kind, and the body.  There is
deliberately no way to write the fairness propositions move_p / en_p in a
formula; fairness is compiled to acceptance conditions by the checker.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ParseError, SemanticError

# ---------------------------------------------------------------------------
# Abstract syntax


@dataclass(frozen=True)
class Formula:
    pass


@dataclass(frozen=True)
class TrueF(Formula):
    pass


@dataclass(frozen=True)
class FalseF(Formula):
    pass


@dataclass(frozen=True)
class Atom(Formula):
    kind: str            # "state" or "input"
    role: str            # "A" or "B"
    symbol: str          # bare state/letter name, not namespaced
    index: object = None  # 1-based tracked-process index for role "B"


@dataclass(frozen=True)
class Not(Formula):
    sub: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Release(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Eventually(Formula):
    sub: Formula


@dataclass(frozen=True)
class Always(Formula):
    sub: Formula


@dataclass(frozen=True)
class ParamSpec:
    indices: int                 # k: number of universally quantified B-indices
    path: str                    # "forall" | "exists"
    body: Formula
    fairness: str = "none"       # "none" | "uncond" | "strong"
    initializing: bool = False


@dataclass(frozen=True)
class ConcreteCheck:
    formula: Formula
    path: str
    k: int


def atoms_of(f: Formula):
    """All Atom leaves of f, in syntactic order."""
    if isinstance(f, Atom):
        yield f
    elif isinstance(f, (Not, Eventually, Always)):
        yield from atoms_of(f.sub)
    elif isinstance(f, (And, Or, Implies, Until, Release)):
        yield from atoms_of(f.left)
        yield from atoms_of(f.right)


# ---------------------------------------------------------------------------
# Parsing

_TOKEN = re.compile(r"\s*(->|in:|[A-Za-z_][A-Za-z0-9_]*|[0-9]+|[!&|()\[\]@.])")


def _tokenize(text: str):
    toks, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            if text[pos:].strip():
                raise ParseError(f"unexpected character {text[pos:].lstrip()[0]!r} in spec")
            break
        toks.append(m.group(1))
        pos = m.end()
    return toks


class _P:
    def __init__(self, toks, indices):
        self.toks = toks
        self.i = 0
        self.indices = indices  # variable name -> 1-based position

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self, expect=None):
        tok = self.peek()
        if tok is None or (expect is not None and tok != expect):
            raise ParseError(f"expected {expect!r}, found {tok!r} in spec")
        self.i += 1
        return tok

    def formula(self):
        return self.implies()

    def implies(self):
        left = self.disj()
        if self.peek() == "->":
            self.next()
            return Implies(left, self.implies())
        return left

    def disj(self):
        left = self.conj()
        while self.peek() == "|":
            self.next()
            left = Or(left, self.conj())
        return left

    def conj(self):
        left = self.until()
        while self.peek() == "&":
            self.next()
            left = And(left, self.until())
        return left

    def until(self):
        left = self.unary()
        if self.peek() in ("U", "R"):
            op = self.next()
            right = self.until()
            return Until(left, right) if op == "U" else Release(left, right)
        return left

    def unary(self):
        tok = self.peek()
        if tok == "!":
            self.next()
            return Not(self.unary())
        if tok == "F":
            self.next()
            return Eventually(self.unary())
        if tok == "G":
            self.next()
            return Always(self.unary())
        if tok == "X":
            raise ParseError("the next-time operator X is not supported")
        return self.primary()

    def primary(self):
        tok = self.peek()
        if tok == "(":
            self.next()
            f = self.formula()
            self.next(")")
            return f
        if tok == "true":
            self.next()
            return TrueF()
        if tok == "false":
            self.next()
            return FalseF()
        return self.atom()

    def atom(self):
        kind = "state"
        if self.peek() == "in:":
            self.next()
            kind = "input"
        name = self.next()
        if name is None or not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*|[0-9]+", name):
            raise ParseError(f"expected atom, found {name!r} in spec")
        tok = self.peek()
        if tok == "@":
            self.next()
            self.next("A")
            return Atom(kind, "A", name)
        if tok == "[":
            self.next()
            var = self.next()
            self.next("]")
            if var not in self.indices:
                raise ParseError(f"index variable {var!r} not bound by the prefix")
            return Atom(kind, "B", name, self.indices[var])
        raise ParseError(f"atom {name!r} needs '@A' or '[index]'")


def parse_spec(text: str, fairness: str = "none", initializing: bool = False) -> ParamSpec:
    """Parse `("forall" IDENT+ ".")? ("A"|"E") ltl` into a ParamSpec."""
    if fairness not in ("none", "uncond", "strong"):
        raise SemanticError(f"unknown fairness kind {fairness!r}")
    toks = _tokenize(text)
    indices = {}
    i = 0
    if toks and toks[0] == "exists":
        raise ParseError("existential index prefixes are not supported")
    if toks and toks[0] == "forall":
        i = 1
        while i < len(toks) and toks[i] != ".":
            var = toks[i]
            if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", var):
                raise ParseError(f"bad index variable {var!r}")
            if var in indices:
                raise ParseError(f"duplicate index variable {var!r}")
            indices[var] = len(indices) + 1
            i += 1
        if i == len(toks) or not indices:
            raise ParseError("malformed quantifier prefix")
        i += 1  # the dot
    if i == len(toks) or toks[i] not in ("A", "E"):
        raise ParseError("expected path quantifier A or E")
    path = "forall" if toks[i] == "A" else "exists"
    p = _P(toks[i + 1:], indices)
    body = p.formula()
    if p.peek() is not None:
        raise ParseError(f"trailing tokens after formula: {p.peek()!r}")
    return ParamSpec(len(indices), path, body, fairness, initializing)


def instantiate(spec: ParamSpec, n: int) -> ConcreteCheck:
    """Pick the concrete processes B_1..B_k for the index prefix (sound by
    symmetry of guarded protocols); requires n >= k."""
    if n < spec.indices:
        raise SemanticError(f"instance size {n} smaller than index count {spec.indices}")
    return ConcreteCheck(spec.body, spec.path, spec.indices)


# ---------------------------------------------------------------------------
# Negation normal form

def nnf(f: Formula, negate: bool = False) -> Formula:
    """Equivalent formula (or its negation) over atoms, ¬atom, ∧, ∨, U, R."""
    if isinstance(f, TrueF):
        return FalseF() if negate else TrueF()
    if isinstance(f, FalseF):
        return TrueF() if negate else FalseF()
    if isinstance(f, Atom):
        return Not(f) if negate else f
    if isinstance(f, Not):
        return nnf(f.sub, not negate)
    if isinstance(f, And):
        cls = Or if negate else And
        return cls(nnf(f.left, negate), nnf(f.right, negate))
    if isinstance(f, Or):
        cls = And if negate else Or
        return cls(nnf(f.left, negate), nnf(f.right, negate))
    if isinstance(f, Implies):
        if negate:
            return And(nnf(f.left), nnf(f.right, True))
        return Or(nnf(f.left, True), nnf(f.right))
    if isinstance(f, Until):
        cls = Release if negate else Until
        return cls(nnf(f.left, negate), nnf(f.right, negate))
    if isinstance(f, Release):
        cls = Until if negate else Release
        return cls(nnf(f.left, negate), nnf(f.right, negate))
    if isinstance(f, Eventually):
        return nnf(Until(TrueF(), f.sub), negate)
    if isinstance(f, Always):
        return nnf(Release(FalseF(), f.sub), negate)
    raise TypeError(f"unknown formula node {f!r}")


# ---------------------------------------------------------------------------
# Direct lasso evaluation (reference semantics)

def eval_lasso(f: Formula, stem, loop) -> bool:
    """Evaluate f on the word stem·loop^ω; each letter is the set of atoms
    holding at that position.  Fixpoint computation over lasso positions."""
    if not loop:
        raise SemanticError("lasso loop must be nonempty")
    word = list(stem) + list(loop)
    return _vec(f, word, len(stem))[0]


def _vec(f, word, s):
    n = len(word)

    def succ(i):
        return i + 1 if i + 1 < n else s

    if isinstance(f, TrueF):
        return [True] * n
    if isinstance(f, FalseF):
        return [False] * n
    if isinstance(f, Atom):
        return [f in word[i] for i in range(n)]
    if isinstance(f, Not):
        return [not v for v in _vec(f.sub, word, s)]
    if isinstance(f, And):
        a, b = _vec(f.left, word, s), _vec(f.right, word, s)
        return [x and y for x, y in zip(a, b)]
    if isinstance(f, Or):
        a, b = _vec(f.left, word, s), _vec(f.right, word, s)
        return [x or y for x, y in zip(a, b)]
    if isinstance(f, Implies):
        a, b = _vec(f.left, word, s), _vec(f.right, word, s)
        return [(not x) or y for x, y in zip(a, b)]
    if isinstance(f, Eventually):
        return _vec(Until(TrueF(), f.sub), word, s)
    if isinstance(f, Always):
        return _vec(Release(FalseF(), f.sub), word, s)
    if isinstance(f, Until):
        a, b = _vec(f.left, word, s), _vec(f.right, word, s)
        v = [False] * n
    elif isinstance(f, Release):
        a, b = _vec(f.left, word, s), _vec(f.right, word, s)
        v = [True] * n
    else:
        raise TypeError(f"unknown formula node {f!r}")
    changed = True
    while changed:
        changed = False
        for i in reversed(range(n)):
            if isinstance(f, Until):
                new = b[i] or (a[i] and v[succ(i)])
            else:
                new = b[i] and (a[i] or v[succ(i)])
            if new != v[i]:
                v[i] = new
                changed = True
    return v
