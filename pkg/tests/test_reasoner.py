import itertools
import math
import random
from collections import defaultdict

import pytest

from kgalign.model import (
    Alignment,
    DisjointWith,
    EquivalentClass,
    Mapping,
    SubClassOf,
    aligned_axioms,
    translate,
)
from kgalign.reasoner import (
    Entailment,
    Hierarchy,
    add_minimal,
    bottom_counts,
    closure,
    consist,
    deductive_diff,
    involved,
    softconsist,
    unsat_count,
)
from kgalign.utils import ContractViolation

from conftest import FMA, NCI


def naive_reach(axioms, classes):
    parents = defaultdict(set)
    for axiom in axioms:
        if isinstance(axiom, SubClassOf):
            parents[axiom.sub].add(axiom.sup)
        elif isinstance(axiom, EquivalentClass):
            parents[axiom.a].add(axiom.b)
            parents[axiom.b].add(axiom.a)

    reach = {c: {c} for c in classes}
    changed = True
    while changed:
        changed = False
        for c in classes:
            new = set().union(*(parents[x] for x in reach[c])) - reach[c]
            if new:
                reach[c] |= new
                changed = True
    return reach


def naive_unsat(axioms, classes):
    reach = naive_reach(axioms, classes)
    disjoint = [
        (a.a, a.b) for a in axioms if isinstance(a, DisjointWith)
    ]
    return {
        c
        for c in classes
        if any(x in reach[c] and y in reach[c] for x, y in disjoint)
    }


def subset_axioms(kg1, kg2, subset):
    axioms = list(kg1.axioms + kg2.axioms)
    for mapping in subset:
        axioms.extend(translate(mapping))
    return axioms


def test_lymphokine_closure(fma, nci, m1, m2):
    cr = closure(fma, nci, Alignment((m1, m2)))
    assert cr.unsatisfiable == [
        FMA + "Lymphokine",
        NCI + "Therapeutic_Lymphokine",
    ]
    for report in cr.unsat:
        assert report.justifications == {frozenset([m1.key, m2.key])}
        assert report.involved_mappings == {m1.key, m2.key}
    assert not cr.truncated

    assert involved(m1.key, cr) and involved(m2.key, cr)
    alignment = Alignment((m1, m2))
    for iri in (m1.source, m1.target, m2.source, m2.target):
        assert consist(iri, alignment, cr) == 0
        assert unsat_count(iri, alignment, cr) == 2
    assert bottom_counts(alignment, cr) == {
        m1.source: 2,
        m1.target: 2,
        m2.source: 2,
        m2.target: 2,
    }


def test_closure_lookups(fma, nci, m1, m2):
    cr = closure(fma, nci, Alignment((m1, m2)))
    lymphokine = FMA + "Lymphokine"
    substance = NCI + "Pharmacologic_Substance"
    assert cr.entails(lymphokine, substance)
    assert cr.supports(lymphokine, substance) == {frozenset([m2.key])}
    assert cr.supports(lymphokine, FMA + "Protein") == {frozenset()}
    assert cr.entails(lymphokine, lymphokine)
    assert not cr.entails(FMA + "Protein", lymphokine)
    assert cr.supports(FMA + "Protein", lymphokine) == frozenset()


def test_single_mapping_is_consistent(fma, nci, m1, m2):
    for mapping in (m1, m2):
        alignment = Alignment((mapping,))
        cr = closure(fma, nci, alignment)
        assert cr.unsat == ()
        assert not involved(mapping.key, cr)
        assert consist(mapping.source, alignment, cr) == 1


def test_empty_alignment(fma, nci):
    cr = closure(fma, nci, Alignment())
    assert cr.unsat == ()
    for iri in list(fma.entities) + list(nci.entities):
        assert consist(iri, Alignment(), cr) == 1
        assert unsat_count(iri, Alignment(), cr) == 0


def test_closure_within(fma, nci, m1, m2):
    alignment = Alignment((m1, m2))
    cr = closure(fma, nci, alignment, within=[FMA + "Lymphokine"])
    assert cr.unsatisfiable == [FMA + "Lymphokine"]
    assert all(sub == FMA + "Lymphokine" for sub, _ in cr.subsumptions)


def test_contract_violations(fma, nci, m1, m2):
    with pytest.raises(ContractViolation):
        closure(fma, nci, Alignment(), j_cap=0)

    cr = closure(fma, nci, Alignment((m1,)))
    with pytest.raises(ContractViolation):
        involved(m2.key, cr)
    with pytest.raises(ContractViolation):
        softconsist(-1)


def test_truncation(make_kg):
    kg1 = make_kg("s", ["A"])
    kg2 = make_kg(
        "t", ["B1", "B2", "B3", "T"], [(f"B{i}", "T") for i in (1, 2, 3)]
    )
    alignment = Alignment(
        tuple(
            Mapping("http://example.org/s#A", f"http://example.org/t#B{i}")
            for i in (1, 2, 3)
        )
    )
    assert not closure(kg1, kg2, alignment, j_cap=3).truncated

    cr = closure(kg1, kg2, alignment, j_cap=2)
    assert cr.truncated
    supports = cr.supports("http://example.org/s#A", "http://example.org/t#T")
    assert len(supports) == 2


def test_add_minimal():
    antichain = []
    assert add_minimal(antichain, frozenset("ab"), 4) == (True, False)
    assert add_minimal(antichain, frozenset("abc"), 4) == (False, False)
    assert add_minimal(antichain, frozenset("a"), 4) == (True, False)
    assert antichain == [frozenset("a")]
    assert add_minimal(antichain, frozenset("b"), 1) == (False, True)


def test_softconsist_values():
    assert softconsist(0) == 1.0
    assert softconsist(1) == pytest.approx(0.537883, abs=1e-6)
    assert softconsist(5) == pytest.approx(0.0133857, abs=1e-6)
    values = [softconsist(b) for b in range(21)]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert all(softconsist(b) < 0.01 for b in range(6, 50))

    # no overflow for large counts
    assert 0 <= softconsist(10000) < 1e-300
    assert not math.isnan(softconsist(10**6))


def test_deductive_diff(fma, nci, m1, m2):
    sigma = set(fma.classes) | set(nci.classes)
    assert deductive_diff(fma.axioms, fma.axioms, sigma) == set()

    base = fma.axioms + nci.axioms
    aligned = aligned_axioms(fma, nci, Alignment((m1, m2)))
    diff = deductive_diff(base, aligned, sigma)
    assert Entailment(FMA + "Lymphokine") in diff
    assert Entailment(NCI + "Therapeutic_Lymphokine") in diff
    assert Entailment(FMA + "Protein", NCI + "Protein") in diff
    assert deductive_diff(aligned, base, sigma) == set()

    # restricting the signature hides statements about other names
    narrow = deductive_diff(base, aligned, {FMA + "Protein"})
    assert narrow == set()
    assert str(Entailment("a", "b")) == "a ⊑ b"
    assert str(Entailment("a")) == "a ⊑ ⊥"


def test_hierarchy(fma, nci, m1, m2):
    hierarchy = Hierarchy(fma.axioms + nci.axioms)
    classes = set(fma.classes) | set(nci.classes)
    assert hierarchy.unsatisfiable(classes) == set()

    hierarchy.add(translate(m1))
    hierarchy.add(translate(m2))
    assert hierarchy.unsatisfiable(classes) == {
        FMA + "Lymphokine",
        NCI + "Therapeutic_Lymphokine",
    }
    assert FMA + "Lymphokine" in hierarchy.descendants([NCI + "Protein"])

    hierarchy.remove(translate(m2))
    assert hierarchy.unsatisfiable(classes) == set()
    assert hierarchy.ancestors(FMA + "Lymphokine") == {
        FMA + "Lymphokine",
        FMA + "Protein",
        NCI + "Protein",
    }


def test_involvement_matches_subset_enumeration(make_instance):
    checked = 0
    for seed in range(200):
        kg1, kg2, alignment = make_instance(seed)
        cr = closure(kg1, kg2, alignment)
        if cr.truncated:
            continue
        checked += 1

        classes = set(kg1.classes) | set(kg2.classes)
        mappings = list(alignment)
        unsat_by_subset = {}
        for r in range(len(mappings) + 1):
            for subset in itertools.combinations(mappings, r):
                keys = frozenset(m.key for m in subset)
                axioms = subset_axioms(kg1, kg2, subset)
                unsat_by_subset[keys] = naive_unsat(axioms, classes)

        expected = {}
        for concept in unsat_by_subset[frozenset(alignment.keys())]:
            causes = [s for s, u in unsat_by_subset.items() if concept in u]
            expected[concept] = {
                s for s in causes if not any(o < s for o in causes)
            }
        found = {r.concept: set(r.justifications) for r in cr.unsat}
        assert found == expected, seed

        oracle = {
            key
            for supports in expected.values()
            for support in supports
            for key in support
        }
        assert {k for k in alignment.keys() if involved(k, cr)} == oracle
    assert checked >= 180


def test_closure_matches_naive_fixpoint(make_instance):
    rng = random.Random(0)
    checked = 0
    for seed in range(100):
        n_classes = rng.randint(5, 50)
        kg1, kg2, alignment = make_instance(
            seed,
            n_classes=n_classes,
            n_edges=int(1.5 * n_classes),
            n_mappings=rng.randint(0, 6),
        )
        cr = closure(kg1, kg2, alignment)
        if cr.truncated:
            continue
        checked += 1

        classes = set(kg1.classes) | set(kg2.classes)
        mappings = list(alignment)
        for _ in range(5):
            subset = [m for m in mappings if rng.random() < 0.5]
            keys = {m.key for m in subset}
            reach = naive_reach(subset_axioms(kg1, kg2, subset), classes)
            expected = {(a, b) for a in classes for b in reach[a]}
            projected = {
                pair
                for pair, derived in cr.subsumptions.items()
                if any(s <= keys for s in derived.supports)
            }
            assert projected == expected, seed
    assert checked >= 90


def test_adding_mappings_is_monotone(make_instance):
    for seed in range(50):
        kg1, kg2, alignment = make_instance(seed, n_mappings=8)
        mappings = list(alignment)
        random.Random(seed).shuffle(mappings)

        previous, entities = None, {}
        for i in range(len(mappings) + 1):
            current = Alignment(tuple(mappings[:i]))
            cr = closure(kg1, kg2, current)
            counts = {
                iri: unsat_count(iri, current, cr)
                for m in mappings
                for iri in (m.source, m.target)
            }
            if previous is not None:
                assert set(previous.subsumptions) <= set(cr.subsumptions)
                assert set(previous.unsatisfiable) <= set(cr.unsatisfiable)
                if not (previous.truncated or cr.truncated):
                    for iri, count in entities.items():
                        assert counts[iri] >= count, (seed, iri)
            previous, entities = cr, counts
