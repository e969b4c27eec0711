import pytest

from guardmc.errors import SemanticError
from guardmc.lab import (FamilySpec, FAMILY_NAMES, check_family, claimed_flip,
                         family, random_system)
from guardmc.model import (format_system, is_one_conjunctive, parse_system,
                           validate_system)


class TestFamily:
    def test_all_families_build_and_roundtrip(self):
        mins = {"disj-props": 3, "disj-props-fair": 1,
                "disj-deadlock-asymptotic": 2, "conj-props": 2,
                "conj-props-fair": 3, "conj-deadlock": 3}
        for name in FAMILY_NAMES:
            sysm, spec = family(FamilySpec(name, max(3, mins[name])))
            validate_system(sysm)
            assert parse_system(format_system(sysm)) == sysm
            if "deadlock" in name:
                assert spec is None
            else:
                assert spec is not None

    def test_flips(self):
        assert claimed_flip(FamilySpec("disj-props", 3)) == 5
        assert claimed_flip(FamilySpec("disj-props-fair", 2)) == 4
        assert claimed_flip(FamilySpec("disj-deadlock-asymptotic", 4)) == 4
        assert claimed_flip(FamilySpec("conj-props", 4)) == 2
        assert claimed_flip(FamilySpec("conj-props-fair", 3)) == 2
        assert claimed_flip(FamilySpec("conj-deadlock", 3)) == 4

    def test_below_minimum(self):
        for name, kmin in (("disj-props", 3), ("conj-deadlock", 3),
                           ("conj-props-fair", 3), ("conj-props", 2),
                           ("disj-deadlock-asymptotic", 2)):
            with pytest.raises(SemanticError):
                family(FamilySpec(name, kmin - 1))

    def test_unknown_family(self):
        with pytest.raises(SemanticError):
            family(FamilySpec("nope", 3))

    def test_conjunctive_families_one_conjunctive(self):
        for name in ("conj-props", "conj-props-fair", "conj-deadlock"):
            sysm, _ = family(FamilySpec(name, 3))
            assert is_one_conjunctive(sysm)


class TestCheckFamily:
    def test_conj_deadlock_k3(self):
        rep = check_family(FamilySpec("conj-deadlock", 3), margin=1)
        assert rep.ok and rep.flip == 4
        assert [v for _, v, _ in rep.rows] == [False] * 3 + [True] * 2

    def test_disj_deadlock_k3(self):
        rep = check_family(FamilySpec("disj-deadlock-asymptotic", 3), margin=1)
        assert rep.ok and rep.flip == 3
        assert [v for _, v, _ in rep.rows] == [False, False, True, True]

    def test_conj_props_direction(self):
        rep = check_family(FamilySpec("conj-props", 2), margin=1)
        assert rep.ok and rep.direction == "rises"
        assert [v for _, v, _ in rep.rows] == [False, True, True]

    def test_conj_props_fair_inverted(self):
        rep = check_family(FamilySpec("conj-props-fair", 3), margin=1)
        assert rep.ok and rep.direction == "falls"
        assert [v for _, v, _ in rep.rows] == [True, False, False]

    def test_brute_force_bounds(self):
        with pytest.raises(SemanticError):
            check_family(FamilySpec("conj-props", 5))
        with pytest.raises(SemanticError):
            check_family(FamilySpec("conj-props", 2), margin=3)


class TestRandomSystem:
    def test_deterministic(self):
        a = random_system(7, 3, 2, "disjunctive")
        b = random_system(7, 3, 2, "disjunctive")
        assert a == b

    def test_one_conj_flag(self):
        for seed in range(30):
            sysm = random_system(seed, 3, 2, "conjunctive", one_conj=True)
            assert is_one_conjunctive(sysm)

    def test_fuzz_roundtrip(self):
        for seed in range(300):
            sem = "disjunctive" if seed % 2 else "conjunctive"
            sysm = random_system(seed, 3, 2, sem)
            validate_system(sysm)
            assert parse_system(format_system(sysm)) == sysm

    def test_bad_bounds(self):
        with pytest.raises(SemanticError):
            random_system(0, 0, 1, "disjunctive")
        with pytest.raises(SemanticError):
            random_system(0, 2, 2, "middle-out")
