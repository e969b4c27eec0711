import pytest

from guardmc import model
from guardmc.cutoffs import (
    ConsistencyReport,
    CutoffQuery,
    cutoff,
    cutoff_ek,
    param_deadlock,
    pmcp,
    synthesize,
    validate_cutoff,
)
from guardmc.errors import SemanticError, UnsupportedTaskError
from guardmc.model import parse_system
from guardmc.speclang import parse_spec

MUTEX = """
system {
  semantics = conjunctive
  template ctrl {
    inputs = {}
    states = {a0}
    init = a0
    trans a0 -> a0 on * guard ALL
  }
  template proc {
    inputs = {}
    states = {N T C}
    init = N
    trans N -> T on * guard ALL
    trans T -> C on * guard {a0@ctrl N@proc T@proc}
    trans C -> N on * guard ALL
  }
}
"""


@pytest.fixture(scope="module")
def mutex():
    return parse_system(MUTEX)


class TestTable:
    def test_disjunctive(self):
        for b in range(1, 11):
            for k in range(1, 5):
                assert cutoff(CutoffQuery("disjunctive", "props-nofair", b, k)).value \
                    == b + k + 1
                assert cutoff(CutoffQuery("disjunctive", "props-uncond", b, k)).value \
                    == 2 * b + k - 1
            assert cutoff(CutoffQuery("disjunctive", "deadlock-nofair", b)).value \
                == max(1, 2 * b - 1)
            assert cutoff(CutoffQuery("disjunctive", "deadlock-strongfair", b)).value \
                == max(1, 2 * b - 1)

    def test_conjunctive(self):
        for b in range(1, 11):
            for k in range(1, 5):
                assert cutoff(CutoffQuery("conjunctive", "props-nofair", b, k)).value \
                    == k + 1
                assert cutoff(CutoffQuery("conjunctive", "props-uncond", b, k)).value \
                    == k + 1
            assert cutoff(CutoffQuery("conjunctive", "deadlock-nofair", b)).value \
                == max(1, 2 * b - 2)

    def test_caveats(self):
        assert cutoff(CutoffQuery("disjunctive", "deadlock-nofair", 3)).caveats \
            == {"asymptotically-tight-only"}
        assert cutoff(CutoffQuery("conjunctive", "deadlock-strongfair", 3)).caveats \
            == {"requires-1-conjunctive", "requires-initializing-runs"}
        assert cutoff(CutoffQuery("conjunctive", "props-uncond", 3, 1)).caveats \
            == {"requires-initializing-runs"}
        assert cutoff(CutoffQuery("disjunctive", "props-nofair", 3, 1)).caveats \
            == frozenset()

    def test_experiment_cited_values(self):
        assert cutoff(CutoffQuery("disjunctive", "deadlock-strongfair", 3)).value == 5
        assert cutoff(CutoffQuery("disjunctive", "props-uncond", 3, 1)).value == 6
        assert cutoff(CutoffQuery("conjunctive", "deadlock-strongfair", 3)).value == 4
        for k in (1, 2):
            assert cutoff(CutoffQuery("conjunctive", "props-nofair", 3, k)).value <= 3

    def test_baselines(self):
        assert cutoff_ek("disjunctive", "A-and-one-B", 3) == 5
        assert cutoff_ek("conjunctive", "A-only", 3) == 6
        assert cutoff_ek("conjunctive", "one-B", 3) == 7

    def test_bad_query(self):
        with pytest.raises(SemanticError):
            cutoff(CutoffQuery("disjunctive", "nonsense", 3))
        with pytest.raises(SemanticError):
            cutoff(CutoffQuery("disjunctive", "props-nofair", 0))


class TestPmcp:
    def test_mutex_mutual_exclusion(self, mutex):
        v = pmcp(mutex, parse_spec("forall i j. A G !(C[i] & C[j])"))
        assert v.holds and v.stats["cutoff"] == 3

    def test_starvation_fails_at_cutoff(self, mutex):
        v = pmcp(mutex, parse_spec("forall i. A G (T[i] -> F C[i])"))
        assert not v.holds
        assert v.witness is not None

    def test_strong_fairness_props_unsupported(self, mutex):
        spec = parse_spec("forall i. A G (T[i] -> F C[i])", fairness="strong")
        with pytest.raises(UnsupportedTaskError):
            pmcp(mutex, spec)

    def test_conj_uncond_needs_initializing(self, mutex):
        spec = parse_spec("forall i. A G (T[i] -> F C[i])", fairness="uncond")
        with pytest.raises(UnsupportedTaskError):
            pmcp(mutex, spec)
        spec2 = parse_spec("forall i. A G (T[i] -> F C[i])",
                           fairness="uncond", initializing=True)
        assert pmcp(mutex, spec2).stats["task"] == "props-uncond"


class TestParamDeadlock:
    def test_mutex_strong(self, mutex):
        v = param_deadlock(mutex, "strong")
        assert v.stats["cutoff"] == 4
        assert v.holds

    def test_no_transition_system(self):
        sys = parse_system("""
system {
  semantics = disjunctive
  template a { inputs = {} states = {a0} init = a0 }
  template b { inputs = {} states = {b0} init = b0 }
}
""")
        v = param_deadlock(sys, "none")
        assert not v.holds and v.witness.deadlocked

    def test_non_one_conjunctive_rejected(self, mutex):
        bad = parse_system(MUTEX.replace("{a0@ctrl N@proc T@proc}", "{a0@ctrl N@proc}"))
        with pytest.raises(UnsupportedTaskError):
            param_deadlock(bad, "strong")


class TestValidateCutoff:
    def test_mutex_all_agree(self, mutex):
        rep = validate_cutoff(mutex, parse_spec("forall i j. A G !(C[i] & C[j])"), 5)
        assert rep.cutoff_value == 3
        assert rep.alarms == []
        assert all(v for _, v, _, _ in rep.rows)

    def test_csv_shape(self, mutex):
        rep = validate_cutoff(mutex, "deadlock-strongfair", 4)
        lines = rep.to_csv().strip().splitlines()
        assert lines[0] == "n,verdict,nodes,millis"
        assert len(lines) == 5

    def test_parallel_matches_serial(self, mutex):
        spec = parse_spec("forall i. A G (T[i] -> F C[i])")
        a = validate_cutoff(mutex, spec, 4, jobs=1)
        b = validate_cutoff(mutex, spec, 4, jobs=4)
        assert [r[:2] for r in a.rows] == [r[:2] for r in b.rows]

    def test_n_max_below_cutoff(self, mutex):
        with pytest.raises(SemanticError):
            validate_cutoff(mutex, "deadlock-strongfair", 2)


class TestSynthesize:
    def test_trivial_liveness(self):
        res = synthesize(parse_spec("E G F true"), 1, 1, "disjunctive")
        assert res.system is not None
        assert pmcp(res.system, parse_spec("E G F true")).holds
        assert param_deadlock(res.system, "none").holds

    def test_unrealizable(self):
        res = synthesize(parse_spec("A G false"), 1, 1, "disjunctive")
        assert res.system is None and res.exhausted and not res.budget_spent

    def test_budget(self):
        res = synthesize(parse_spec("A G false"), 1, 2, "disjunctive", budget=5)
        assert res.system is None and res.budget_spent and res.examined == 5
