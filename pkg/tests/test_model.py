import math

import pytest

from kgalign.model import (
    Alignment,
    DisjointWith,
    DuplicateMappingError,
    EndpointNotInSignature,
    Entity,
    EntityKind,
    Iri,
    InvalidIri,
    KindMismatch,
    KnowledgeGraph,
    Label,
    Mapping,
    MappingKey,
    Relation,
    SubClassOf,
    aligned_axioms,
    bind_alignment,
    signature,
    translate,
)

from conftest import FMA, NCI


@pytest.mark.parametrize(
    "value",
    [
        "",
        "http://example.org/a b",
        "http://x\n",
        "a\x7fb",
        "relative",
        "../up",
        "#frag",
        "1http://x",
    ],
)
def test_iri_rejects_invalid(value):
    with pytest.raises(InvalidIri):
        Iri(value)


def test_iri_compares_by_text():
    assert Iri("http://example.org/a") == "http://example.org/a"
    assert Iri("http://example.org/a") != Iri("http://example.org/A")


def test_entity_labels():
    entity = Entity("http://e/x", EntityKind.CLASS, [("x", "en"), ("y",)])
    assert entity.labels == (Label("x", "en"), Label("y", None))
    assert entity.primary_label == Label("x", "en")
    assert Entity("http://e/y", EntityKind.CLASS).primary_label is None

    with pytest.raises(ValueError):
        Entity("http://e/x", EntityKind.CLASS, [("x",), ("x",)])
    with pytest.raises(ValueError):
        Entity("http://e/x", EntityKind.CLASS, [("",)])


def test_knowledge_graph_validation(make_kg):
    kg = make_kg("g", ["A", "B"], [("A", "B")], [("B", "A")])
    assert kg.classes == ["http://example.org/g#A", "http://example.org/g#B"]
    assert "http://example.org/g#A" in kg

    # disjointness is stored in canonical order
    disjoint = kg.axioms[-1]
    assert disjoint.operands == (
        "http://example.org/g#A",
        "http://example.org/g#B",
    )
    assert DisjointWith("b", "a") == DisjointWith("a", "b")

    with pytest.raises(ValueError) as exc:
        make_kg("g", ["A"], [("A", "B")])
    assert "not a declared class" in str(exc.value)

    with pytest.raises(ValueError) as exc:
        make_kg("g", ["A", "B"], [("A", "B"), ("A", "B")])
    assert "duplicate axiom" in str(exc.value)

    individual = Entity("http://example.org/g#i", EntityKind.INDIVIDUAL)
    with pytest.raises(ValueError):
        KnowledgeGraph(
            "g",
            {individual.iri: individual},
            (SubClassOf(individual.iri, individual.iri),),
        )


def test_knowledge_graph_axiom_order(make_kg):
    kg = make_kg("g", ["A", "B", "C"], [("B", "C"), ("A", "B")], [("A", "C")])
    flipped = KnowledgeGraph("g", dict(kg.entities), kg.axioms[::-1])
    assert flipped == kg
    assert list(kg.axioms) == sorted(kg.axioms, key=lambda a: a.sort_key)


def test_signature_partitions_entities(fma):
    sig = signature(fma)
    assert sig.classes == {FMA + "Protein", FMA + "Lymphokine"}
    assert not sig.object_properties
    assert not sig.individuals
    assert sig.all == sig.classes


@pytest.mark.parametrize("confidence", [-0.1, 1.01, math.nan])
def test_mapping_confidence_range(confidence):
    with pytest.raises(ValueError):
        Mapping("http://a/x", "http://b/y", Relation.EQUIVALENT, confidence)


def test_mapping_key_rendering(m1):
    expected = MappingKey(FMA + "Protein", NCI + "Protein", Relation("="))
    assert m1.key == expected
    assert str(m1.key) == f"{FMA}Protein = {NCI}Protein"
    assert m1.touches(FMA + "Protein")
    assert not m1.touches(FMA + "Lymphokine")


def test_alignment_set_semantics(m1, m2):
    alignment = Alignment((m1, m2))
    assert len(alignment) == 2
    assert alignment.keys() == sorted([m1.key, m2.key])
    assert m1 in alignment and m1.key in alignment
    assert alignment.get(m2.key) is m2
    assert alignment.touching(NCI + "Protein") == [m1]
    assert list(alignment.without([m1])) == [m2]
    assert list(alignment.filter(0.6)) == [m1]
    assert Alignment((m2, m1)) == alignment

    with pytest.raises(DuplicateMappingError):
        Alignment((m1, Mapping(m1.source, m1.target, confidence=0.3)))

    # same endpoints under another relation are a different mapping
    other = Mapping(m1.source, m1.target, Relation.SUBSUMED, 0.3)
    assert len(alignment.with_mapping(other)) == 3


def test_bind_alignment(fma, nci, m1, make_kg):
    bind_alignment(fma, nci, Alignment((m1,)))

    with pytest.raises(EndpointNotInSignature) as exc:
        bind_alignment(fma, nci, Alignment((Mapping(m1.target, m1.source),)))
    assert exc.value.iri == m1.target

    prop = Entity(NCI + "hasPart", EntityKind.OBJECT_PROPERTY)
    kg2 = KnowledgeGraph("nci", dict(nci.entities, **{prop.iri: prop}))
    with pytest.raises(KindMismatch):
        bind_alignment(fma, kg2, Alignment((Mapping(m1.source, prop.iri),)))


@pytest.mark.parametrize(
    "relation,expected",
    [
        ("=", [("s", "t"), ("t", "s")]),
        ("<", [("s", "t")]),
        (">", [("t", "s")]),
    ],
)
def test_translate(relation, expected):
    mapping = Mapping("http://x/s", "http://x/t", relation)
    names = {"http://x/s": "s", "http://x/t": "t"}
    assert [
        (names[a.sub], names[a.sup]) for a in translate(mapping)
    ] == expected


def test_aligned_axioms(fma, nci, m1, m2):
    axioms = aligned_axioms(fma, nci, Alignment((m1, m2)))
    base = [a for a in axioms if a.origin is None]
    assert [a.axiom for a in base] == list(fma.axioms + nci.axioms)

    translated = [a for a in axioms if a.origin is not None]
    assert len(translated) == 4
    assert {a.origin for a in translated} == {m1.key, m2.key}


def test_aligned_axioms_skip_non_class_mappings():
    prop1 = Entity("http://a/p", EntityKind.OBJECT_PROPERTY)
    prop2 = Entity("http://b/p", EntityKind.OBJECT_PROPERTY)
    kg1 = KnowledgeGraph("a", {prop1.iri: prop1})
    kg2 = KnowledgeGraph("b", {prop2.iri: prop2})
    alignment = Alignment((Mapping(prop1.iri, prop2.iri),))
    assert aligned_axioms(kg1, kg2, alignment) == []
