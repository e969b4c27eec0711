import pytest

from guardmc.checker import check, global_deadlock, local_deadlock
from guardmc.constructions import (
    TransformContract,
    deadlock_anatomy,
    fair_extension,
    flood,
    flood_evacuate,
    grow_run,
    shrink_run,
    verify_transform,
    visit_sets,
)
from guardmc.cutoffs import CutoffQuery, _effective_size_b, cutoff
from guardmc.errors import (ConstructionError, SemanticError,
                            UnsupportedTaskError)
from guardmc.lab import FamilySpec, family, random_system
from guardmc.model import (Configuration, is_one_conjunctive, project,
                           validate_run)
from guardmc.speclang import instantiate, parse_spec

E_TRUE = parse_spec("E true")

CELLS = (("disjunctive", "props", "none"),
         ("disjunctive", "props", "uncond"),
         ("disjunctive", "deadlock", "none"),
         ("disjunctive", "deadlock", "strong"),
         ("conjunctive", "props", "none"),
         ("conjunctive", "props", "uncond"),
         ("conjunctive", "deadlock", "none"),
         ("conjunctive", "deadlock", "strong"))

TASK_KEY = {("props", "none"): "props-nofair",
            ("props", "uncond"): "props-uncond",
            ("deadlock", "none"): "deadlock-nofair",
            ("deadlock", "strong"): "deadlock-strongfair"}


def source_run(sysm, n, task, fairness, initializing, limit=150_000):
    """A witness run in the task's class, or None."""
    if task == "props":
        v = check(sysm, n, instantiate(E_TRUE, n), fairness, initializing,
                  limit_nodes=limit)
        return v.witness if v.holds else None
    w = global_deadlock(sysm, n, limit_nodes=limit)
    if w is None:
        w = local_deadlock(sysm, n, fairness, initializing, limit_nodes=limit)
    return w


def cell_runs(sem, task, fairness, seeds, want, above_cutoff=True):
    """Up to `want` (system, run, cutoff) triples for one table cell."""
    one_conj = sem == "conjunctive" and task == "deadlock"
    initz = sem == "conjunctive" and fairness != "none"
    out = []
    for seed in seeds:
        sysm = random_system(seed, 3, 2, sem, one_conj=one_conj)
        if _effective_size_b(sysm) > 3:
            continue
        c = cutoff(CutoffQuery(sem, TASK_KEY[(task, fairness)],
                               _effective_size_b(sysm), 1)).value
        n = c + 1 if above_cutoff else max(2, min(c, 4))
        try:
            x = source_run(sysm, n, task, fairness, initz)
        except Exception:
            continue
        if x is not None:
            out.append((sysm, x, c))
        if len(out) >= want:
            break
    assert out, f"no class-conforming runs found for {sem}/{task}/{fairness}"
    return out


def any_witness(seed, sem="disjunctive", n=3):
    sysm = random_system(seed, 3, 2, sem)
    v = check(sysm, n, instantiate(E_TRUE, n))
    return (sysm, v.witness) if v.holds else (sysm, None)


class TestVisitSets:
    def test_partition(self):
        hits = 0
        for seed in range(25):
            sysm, x = any_witness(seed)
            if x is None:
                continue
            hits += 1
            vs = visit_sets(x, range(1, x.n + 1))
            assert vs.vis_inf | vs.vis_fin == vs.visited
            assert not vs.vis_inf & vs.vis_fin
            loop_states = {c.state_of(p) for c, _ in x.loop
                           for p in range(1, x.n + 1)}
            assert vs.vis_inf == loop_states
        assert hits >= 5

    def test_subset_of_processes(self):
        sysm, x = next((s, w) for s, w in map(any_witness, range(25))
                       if w is not None)
        whole = visit_sets(x, range(1, x.n + 1))
        part = visit_sets(x, [1])
        assert part.visited <= whole.visited


class TestFlood:
    def test_init_gives_constant_trace(self):
        sysm, x = next((s, w) for s, w in map(any_witness, range(25))
                       if w is not None)
        tr = flood(x, sysm.templateB.init)
        assert tr.steps == () and tr.loop[0][0] == sysm.templateB.init

    def test_prefix_length_is_first_visit(self):
        for seed in range(25):
            sysm, x = any_witness(seed)
            if x is None:
                continue
            seq = list(x.stem) + list(x.loop)
            for q in visit_sets(x, range(1, x.n + 1)).visited:
                m_q = next(m for m, (c, _) in enumerate(seq)
                           if q in {c.state_of(p) for p in range(1, x.n + 1)})
                tr = flood(x, q)
                assert len(tr.steps) == m_q
                assert tr.loop == ((q, tr.loop[0][1]),)

    def test_never_visited(self):
        sysm, x = next((s, w) for s, w in map(any_witness, range(25))
                       if w is not None)
        with pytest.raises(ConstructionError):
            flood(x, "no-such-state@B")


class TestFloodEvacuate:
    def _with_transient(self):
        for seed in range(60):
            sysm = random_system(seed, 3, 2, "disjunctive")
            for x in (source_run(sysm, 3, "props", "none", False),
                      source_run(sysm, 3, "deadlock", "none", False)):
                if x is None or not x.loop:
                    continue
                vs = visit_sets(x, range(1, x.n + 1))
                if vs.vis_fin and vs.vis_inf:
                    return sysm, x, vs
        pytest.skip("no run with transient states found")

    def test_trace_shape(self):
        sysm, x, vs = self._with_transient()
        F = range(1, x.n + 1)
        for q in vs.vis_fin:
            tr = flood_evacuate(x, F, q)
            assert tr.loop[0][0] in vs.vis_inf
            assert q in {s for s, _ in tr.steps}

    def test_infinitely_visited_rejected(self):
        sysm, x, vs = self._with_transient()
        q = sorted(vs.vis_inf)[0]
        with pytest.raises(ConstructionError):
            flood_evacuate(x, range(1, x.n + 1), q)

    def test_no_target_reported_distinctly(self):
        # a globally deadlocked run has an empty vis_inf
        runs = cell_runs("disjunctive", "deadlock", "none", range(40), 1)
        for sysm, x, _ in runs:
            if x.loop:
                continue
            vs = visit_sets(x, range(1, x.n + 1))
            if not vs.vis_fin:
                continue
            with pytest.raises(ConstructionError, match="no evacuation target"):
                flood_evacuate(x, range(1, x.n + 1), sorted(vs.vis_fin)[0])
            return


class TestDeadlockAnatomy:
    def test_split_partitions_dead_states(self):
        for sem in ("disjunctive", "conjunctive"):
            runs = cell_runs(sem, "deadlock", "none", range(30), 3)
            for sysm, x, _ in runs:
                anat = deadlock_anatomy(sysm, x)
                assert anat.dead1 | anat.dead2 == anat.dead_states
                assert not anat.dead1 & anat.dead2
                assert anat.deadlocked_processes

    def test_dead_guards_only_conjunctive(self):
        runs = cell_runs("disjunctive", "deadlock", "none", range(30), 1)
        for sysm, x, _ in runs:
            assert deadlock_anatomy(sysm, x).dead_guards == frozenset()


def _contract(task, fairness, initz, y, tracked=1):
    tr = tuple(range(tracked + 1)) if task == "props" else ()
    preserve = frozenset({"global-deadlock"} if task == "deadlock" else set())
    return TransformContract(tr, fairness, preserve, y.n, initz)


class TestShrink:
    @pytest.mark.parametrize("sem,task,fairness", CELLS)
    def test_certified_on_fuzzed_runs(self, sem, task, fairness):
        initz = sem == "conjunctive" and fairness != "none"
        for sysm, x, c in cell_runs(sem, task, fairness, range(40), 3):
            y = shrink_run(sysm, x, task, fairness)
            assert y.n <= c
            rep = verify_transform(sysm, x, y,
                                   _contract(task, fairness, initz, y))
            assert rep.ok, rep.clauses

    def test_not_above_cutoff(self):
        for sysm, x, c in cell_runs("conjunctive", "props", "none",
                                    range(30), 1, above_cutoff=False):
            if x.n <= c:
                with pytest.raises(SemanticError):
                    shrink_run(sysm, x, "props", "none")
                return
        pytest.skip("all sampled instances above cutoff")

    def test_class_mismatch(self):
        # a run where everyone keeps moving is not in the deadlock class
        for sysm, x, _ in cell_runs("disjunctive", "props", "uncond",
                                    range(40), 1):
            with pytest.raises(SemanticError, match="class-mismatch"):
                shrink_run(sysm, x, "deadlock", "none")
            return

    def test_unsupported_fairness_combinations(self):
        sysm, x = next((s, w) for s, w in map(any_witness, range(25))
                       if w is not None)
        with pytest.raises(UnsupportedTaskError):
            shrink_run(sysm, x, "props", "strong")
        with pytest.raises(UnsupportedTaskError):
            shrink_run(sysm, x, "deadlock", "uncond")

    def test_general_conjunctive_deadlock_rejected(self):
        for seed in range(80):
            sysm = random_system(seed, 3, 2, "conjunctive")
            if is_one_conjunctive(sysm):
                continue
            x = source_run(sysm, 5, "deadlock", "none", False)
            if x is None:
                continue
            with pytest.raises(UnsupportedTaskError):
                shrink_run(sysm, x, "deadlock", "none")
            return
        pytest.skip("no general-guard deadlock witness found")


class TestGrow:
    @pytest.mark.parametrize("sem,task,fairness", CELLS)
    def test_certified_on_fuzzed_runs(self, sem, task, fairness):
        initz = sem == "conjunctive" and fairness != "none"
        floor = (len(random_system(0, 3, 2, sem).templateB.states) + 1
                 if sem == "disjunctive" and task == "deadlock" else 0)
        for sysm, x, c in cell_runs(sem, task, fairness, range(40), 3):
            if x.n < max(2, floor):
                continue
            y = grow_run(sysm, x, task, fairness)
            assert y.n == x.n + 1
            rep = verify_transform(sysm, x, y,
                                   _contract(task, fairness, initz, y))
            assert rep.ok, rep.clauses

    def test_projection_is_stutter_equivalent(self):
        for sysm, x, _ in cell_runs("conjunctive", "props", "none",
                                    range(30), 2):
            y = grow_run(sysm, x, "props", "none")
            rep = verify_transform(sysm, x, y, TransformContract(
                (0, 1), "none", frozenset({"stutter-equivalent-projection"}),
                y.n))
            assert rep.ok, rep.clauses

    def test_disjunctive_deadlock_floor(self):
        for seed in range(80):
            sysm = random_system(seed, 3, 2, "disjunctive")
            floor = len(sysm.templateB.states) + 1
            if floor <= 2:
                continue
            x = global_deadlock(sysm, floor - 1)
            if x is None:
                continue
            with pytest.raises(SemanticError):
                grow_run(sysm, x, "deadlock", "none")
            return
        pytest.skip("no small global deadlock found")

    def test_no_partner_when_everyone_is_tracked(self):
        for sysm, x, _ in cell_runs("conjunctive", "props", "uncond",
                                    range(60), 1):
            with pytest.raises(ConstructionError, match="no-partner"):
                grow_run(sysm, x, "props", "uncond", tracked=x.n)
            return


class TestFairExtension:
    def _suffix(self):
        """An unconditionally fair run with no transient states."""
        for seed in range(80):
            sysm = random_system(seed, 3, 2, "disjunctive")
            for n in (3, 4):
                try:
                    x = source_run(sysm, n, "props", "uncond", False)
                except Exception:
                    continue
                if x is None:
                    continue
                if visit_sets(x, range(1, x.n + 1)).vis_fin:
                    continue
                return sysm, x
        pytest.skip("no transient-free fair run found")

    def _seed_config(self, sysm, x, pad=0):
        from guardmc.constructions import _Source
        src = _Source(sysm, x)
        vi1 = src.loop_states([1])
        vio = src.loop_states(range(2, x.n + 1))
        excl, inter = sorted(vio - vi1), sorted(vio & vi1)
        footnote = (len(vi1) == 1
                    and len(vio) == len(sysm.templateB.states))
        states = [src.state_of(1, 0)]
        for q in excl:
            states += [q, q]
        if inter:
            states += [inter[0]] * (1 if footnote else 2)
            states += inter[1:]
        states += [src.state_of(1, 0)] * pad
        letter = sysm.templateB.letters[0]
        return Configuration(src.state_of(0, 0), tuple(states),
                             x.stem[0][0].inputA if x.stem else
                             x.loop[0][0].inputA,
                             tuple(letter for _ in states))

    def test_extension_is_unconditionally_fair(self):
        from guardmc.constructions import _fairness_ok
        sysm, x = self._suffix()
        seed = self._seed_config(sysm, x, pad=1)
        y = fair_extension(sysm, x, seed)
        assert y.n == seed.n
        assert _fairness_ok(sysm, y, "uncond")

    def test_missing_seed_process_rejected(self):
        sysm, x = self._suffix()
        seed = self._seed_config(sysm, x)
        if seed.n < 2:
            pytest.skip("degenerate seed")
        smaller = Configuration(seed.stateA, seed.statesB[:-1],
                                seed.inputA, seed.inputsB[:-1])
        with pytest.raises(ConstructionError):
            fair_extension(sysm, x, smaller)


class TestVerifyTransform:
    def test_broken_run_fails_validate_clause(self):
        sysm, x = next((s, w) for s, w in map(any_witness, range(25))
                       if w is not None)
        broken = type(x)(x.stem, tuple((c, None) for c, _ in x.loop))
        rep = verify_transform(sysm, x, broken, TransformContract(
            (0,), "none", frozenset(), broken.n))
        assert not rep.ok
        assert any(name == "validate-run" and not passed
                   for name, passed, _ in rep.clauses)

    def test_fairness_hierarchy(self):
        # an unconditionally fair run satisfies a strong-fairness contract
        for sysm, x, _ in cell_runs("disjunctive", "props", "uncond",
                                    range(40), 1):
            rep = verify_transform(sysm, x, x, TransformContract(
                (0, 1), "strong", frozenset(), x.n))
            assert rep.ok, rep.clauses

    def test_unknown_preserve_clause_fails(self):
        sysm, x = next((s, w) for s, w in map(any_witness, range(25))
                       if w is not None)
        rep = verify_transform(sysm, x, x, TransformContract(
            (0,), "none", frozenset({"mystery-clause"}), x.n))
        assert not rep.ok
