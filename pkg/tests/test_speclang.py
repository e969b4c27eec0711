import random

import pytest
from hypothesis import given, strategies as st

from guardmc.errors import ParseError, SemanticError
from guardmc.speclang import (
    Always,
    And,
    Atom,
    Eventually,
    FalseF,
    Implies,
    Not,
    Or,
    Release,
    TrueF,
    Until,
    atoms_of,
    eval_lasso,
    instantiate,
    nnf,
    parse_spec,
)

P = Atom("state", "B", "p", 1)
Q = Atom("state", "B", "q", 1)


class TestParse:
    def test_mutual_exclusion(self):
        s = parse_spec("forall i j. A G !(C[i] & C[j])")
        assert s.indices == 2 and s.path == "forall"
        assert s.body == Always(Not(And(Atom("state", "B", "C", 1),
                                        Atom("state", "B", "C", 2))))

    def test_starvation_freedom(self):
        s = parse_spec("forall i. A G (T[i] -> F C[i])")
        assert s.indices == 1
        assert s.body == Always(Implies(Atom("state", "B", "T", 1),
                                        Eventually(Atom("state", "B", "C", 1))))

    def test_x_rejected(self):
        with pytest.raises(ParseError, match="X"):
            parse_spec("A X (p@A)")

    def test_a_atoms_and_inputs(self):
        s = parse_spec("E F (a1@A & in:r@A & in:lo[i] & 1[i])".replace("[i]", "[j]")
                       .replace("E F", "forall j. E F"))
        kinds = [(a.kind, a.role, a.symbol) for a in atoms_of(s.body)]
        assert ("input", "A", "r") in kinds and ("input", "B", "lo") in kinds
        assert ("state", "B", "1") in kinds

    def test_unbound_index(self):
        with pytest.raises(ParseError, match="not bound"):
            parse_spec("forall i. A G C[z]")

    def test_exists_prefix_rejected(self):
        with pytest.raises(ParseError, match="existential"):
            parse_spec("exists i. A F C[i]")

    def test_constants(self):
        assert parse_spec("E G F true").body == Always(Eventually(TrueF()))
        assert parse_spec("A G false").body == Always(FalseF())

    def test_precedence(self):
        s = parse_spec("forall i. A p[i] & q[i] -> p[i] | q[i] U q[i]")
        p = Atom("state", "B", "p", 1)
        q = Atom("state", "B", "q", 1)
        assert s.body == Implies(And(p, q), Or(p, Until(q, q)))

    def test_until_right_assoc(self):
        s = parse_spec("forall i. E p[i] U q[i] U p[i]")
        p = Atom("state", "B", "p", 1)
        q = Atom("state", "B", "q", 1)
        assert s.body == Until(p, Until(q, p))


class TestInstantiate:
    def test_mentions_only_tracked(self):
        s = parse_spec("forall i j. A G !(C[i] & C[j])")
        cc = instantiate(s, 3)
        assert {a.index for a in atoms_of(cc.formula)} == {1, 2}
        assert cc.k == 2

    def test_k0_unchanged(self):
        s = parse_spec("A G (a1@A)")
        cc = instantiate(s, 1)
        assert cc.formula == s.body and cc.k == 0

    def test_n_below_k(self):
        s = parse_spec("forall i j. A G !(C[i] & C[j])")
        assert instantiate(s, 2).k == 2
        with pytest.raises(SemanticError):
            instantiate(s, 1)


class TestNnf:
    def test_dualities(self):
        assert nnf(Not(Always(P))) == Until(TrueF(), Not(P))
        assert nnf(Not(Until(P, Q))) == Release(Not(P), Not(Q))
        assert nnf(Not(Eventually(P))) == Release(FalseF(), Not(P))

    def test_idempotent(self):
        for f in _random_formulas(50, seed=7):
            assert nnf(nnf(f)) == nnf(f)

    def test_only_nnf_nodes(self):
        def ok(f):
            if isinstance(f, (TrueF, FalseF, Atom)):
                return True
            if isinstance(f, Not):
                return isinstance(f.sub, Atom)
            if isinstance(f, (And, Or, Until, Release)):
                return ok(f.left) and ok(f.right)
            return False

        for f in _random_formulas(50, seed=8):
            assert ok(nnf(f)) and ok(nnf(f, True))


def _random_formulas(count, seed, atoms=(P, Q), max_depth=4):
    rng = random.Random(seed)

    def gen(d):
        if d == 0 or rng.random() < 0.3:
            return rng.choice(atoms + (TrueF(), FalseF()))
        op = rng.choice("N A O I U R F G".split())
        if op in "NFG":
            sub = gen(d - 1)
            return {"N": Not, "F": Eventually, "G": Always}[op](sub)
        cls = {"A": And, "O": Or, "I": Implies, "U": Until, "R": Release}[op]
        return cls(gen(d - 1), gen(d - 1))

    return [gen(max_depth) for _ in range(count)]


letters = st.sets(st.sampled_from([P, Q]))


class TestEval:
    def test_basic(self):
        assert eval_lasso(Always(P), [], [{P}])
        assert not eval_lasso(Always(P), [{P}], [set()])
        assert eval_lasso(Eventually(P), [set(), set()], [{P}, set()])
        assert eval_lasso(Until(P, Q), [{P}, {P}], [{Q}])
        assert not eval_lasso(Until(P, Q), [], [{P}])
        assert eval_lasso(Release(Q, P), [], [{P}])

    def test_gf_on_loop(self):
        assert eval_lasso(Always(Eventually(P)), [{P}], [set(), {P}])
        assert not eval_lasso(Always(Eventually(P)), [{P}, {P}], [set()])

    @given(st.lists(letters, max_size=3), st.lists(letters, min_size=1, max_size=3),
           st.integers(0, 49))
    def test_nnf_preserves_semantics(self, stem, loop, idx):
        f = _random_formulas(50, seed=11)[idx]
        assert eval_lasso(nnf(f), stem, loop) == eval_lasso(f, stem, loop)
        assert eval_lasso(nnf(f, True), stem, loop) != eval_lasso(f, stem, loop)

    @given(st.lists(letters, max_size=3), st.lists(letters, min_size=1, max_size=3),
           st.integers(0, 49), st.data())
    def test_stutter_insensitive(self, stem, loop, idx, data):
        # duplicating any letter never changes LTL\X truth
        f = _random_formulas(50, seed=12)[idx]
        word = stem + loop
        pos = data.draw(st.integers(0, len(word) - 1))
        if pos < len(stem):
            stem2, loop2 = stem[:pos] + [stem[pos]] + stem[pos:], loop
        else:
            j = pos - len(stem)
            loop2 = loop[:j] + [loop[j]] + loop[j:]
            stem2 = stem
        assert eval_lasso(f, stem, loop) == eval_lasso(f, stem2, loop2)

    def test_loop_unroll_invariance(self):
        for f in _random_formulas(60, seed=13):
            stem = [{P}, set()]
            loop = [{Q}, {P}]
            a = eval_lasso(f, stem, loop)
            assert a == eval_lasso(f, stem + loop, loop)
            assert a == eval_lasso(f, stem, loop + loop)
