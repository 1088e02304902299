"""
Core types shared by every stage of the alignment pipeline:
entities and their signature, the class-axiom fragment,
mappings between two graphs and alignments built from them
"""

import math
import re
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import (
    Dict,
    FrozenSet,
    Iterable,
    Iterator,
    List,
    NamedTuple,
    Optional,
    Tuple,
    Union,
)

from kgalign.logging import logger


ABSOLUTE_IRI = re.compile(r"^[A-Za-z][A-Za-z0-9+.\-]*:\S*$")


class InvalidIri(ValueError):
    pass


class EndpointNotInSignature(ValueError):
    def __init__(self, iri: str, graph_id: str):
        super().__init__(
            f"Mapping endpoint {iri} is not in the signature of '{graph_id}'"
        )
        self.iri = iri
        self.graph_id = graph_id


class KindMismatch(ValueError):
    pass


class DuplicateMappingError(ValueError):
    pass


class Iri(str):
    """Absolute IRI text, compared by exact equality"""

    __slots__ = ()

    def __new__(cls, value: str) -> "Iri":
        if isinstance(value, Iri):
            return value
        if not value:
            raise InvalidIri("IRI must be non-empty")
        for char in value:
            if char.isspace() or ord(char) < 0x20 or ord(char) == 0x7F:
                raise InvalidIri(
                    f"IRI {value!r} contains whitespace or control characters"
                )
        if not ABSOLUTE_IRI.match(value):
            raise InvalidIri(f"IRI {value!r} is not absolute")
        return super().__new__(cls, value)


class EntityKind(str, Enum):
    CLASS = "Class"
    OBJECT_PROPERTY = "ObjectProperty"
    DATA_PROPERTY = "DataProperty"
    INDIVIDUAL = "Individual"


class Label(NamedTuple):
    text: str
    lang: Optional[str] = None


@dataclass(frozen=True)
class Entity:
    iri: Iri
    kind: EntityKind
    labels: Tuple[Label, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "iri", Iri(self.iri))
        labels = tuple(Label(*label) for label in self.labels)
        seen = set()
        for label in labels:
            if not label.text:
                raise ValueError(f"Entity {self.iri} has an empty label")
            if label in seen:
                raise ValueError(
                    f"Entity {self.iri} has duplicate label {label}"
                )
            seen.add(label)
        object.__setattr__(self, "labels", labels)

    @property
    def primary_label(self) -> Optional[Label]:
        return self.labels[0] if self.labels else None


class Axiom:
    """Base of the class-axiom fragment; subclasses are frozen"""

    rank = 0

    @property
    def operands(self) -> Tuple[Iri, ...]:
        raise NotImplementedError

    @property
    def sort_key(self) -> Tuple:
        return (self.rank,) + self.operands


@dataclass(frozen=True)
class SubClassOf(Axiom):
    sub: Iri
    sup: Iri
    rank = 0

    @property
    def operands(self) -> Tuple[Iri, Iri]:
        return (self.sub, self.sup)


@dataclass(frozen=True)
class EquivalentClass(Axiom):
    a: Iri
    b: Iri
    rank = 1

    @property
    def operands(self) -> Tuple[Iri, Iri]:
        return (self.a, self.b)


@dataclass(frozen=True)
class DisjointWith(Axiom):
    a: Iri
    b: Iri
    rank = 2

    def __post_init__(self):
        # disjointness is symmetric, so store it in canonical order
        if self.b < self.a:
            a, b = self.b, self.a
            object.__setattr__(self, "a", a)
            object.__setattr__(self, "b", b)

    @property
    def operands(self) -> Tuple[Iri, Iri]:
        return (self.a, self.b)


@dataclass(frozen=True)
class KnowledgeGraph:
    id: str
    entities: Dict[Iri, Entity] = field(default_factory=dict)
    axioms: Tuple[Axiom, ...] = ()

    def __post_init__(self):
        entities = {}
        for iri, entity in sorted(self.entities.items()):
            if iri != entity.iri:
                raise ValueError(
                    f"Entity {entity.iri} registered under key {iri}"
                )
            entities[Iri(iri)] = entity
        object.__setattr__(self, "entities", MappingProxyType(entities))

        axioms, seen = [], set()
        for axiom in self.axioms:
            if axiom in seen:
                raise ValueError(
                    f"Graph '{self.id}' contains duplicate axiom {axiom}"
                )
            for iri in axiom.operands:
                entity = entities.get(iri)
                if entity is None or entity.kind is not EntityKind.CLASS:
                    raise ValueError(
                        "Axiom {} in graph '{}' references {} which "
                        "is not a declared class".format(axiom, self.id, iri)
                    )
            seen.add(axiom)
            axioms.append(axiom)
        # canonical order, independent of statement order in the input
        axioms.sort(key=lambda a: a.sort_key)
        object.__setattr__(self, "axioms", tuple(axioms))

    def __contains__(self, iri: str) -> bool:
        return iri in self.entities

    @property
    def classes(self) -> List[Iri]:
        return [
            iri
            for iri, entity in self.entities.items()
            if entity.kind is EntityKind.CLASS
        ]


class Signature(NamedTuple):
    classes: FrozenSet[Iri]
    object_properties: FrozenSet[Iri]
    data_properties: FrozenSet[Iri]
    individuals: FrozenSet[Iri]

    @property
    def all(self) -> FrozenSet[Iri]:
        return frozenset().union(*self)


def signature(kg: KnowledgeGraph) -> Signature:
    partition = {kind: set() for kind in EntityKind}
    for iri, entity in kg.entities.items():
        partition[entity.kind].add(iri)
    return Signature(*[frozenset(partition[kind]) for kind in EntityKind])


class Relation(str, Enum):
    EQUIVALENT = "="
    SUBSUMED = "<"
    SUBSUMES = ">"

    @property
    def symbol(self) -> str:
        return self.value


class MappingKey(NamedTuple):
    source: Iri
    target: Iri
    relation: Relation

    def __str__(self) -> str:
        return f"{self.source} {self.relation.value} {self.target}"


@dataclass(frozen=True)
class Mapping:
    source: Iri
    target: Iri
    relation: Relation = Relation.EQUIVALENT
    confidence: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "source", Iri(self.source))
        object.__setattr__(self, "target", Iri(self.target))
        object.__setattr__(self, "relation", Relation(self.relation))
        confidence = float(self.confidence)
        if math.isnan(confidence) or not 0 <= confidence <= 1:
            raise ValueError(
                f"Mapping confidence {confidence} out of range [0, 1]"
            )
        object.__setattr__(self, "confidence", confidence)

    @property
    def key(self) -> MappingKey:
        return MappingKey(self.source, self.target, self.relation)

    def touches(self, iri: str) -> bool:
        return iri == self.source or iri == self.target


KeyLike = Union[MappingKey, Mapping]


def _as_key(item: KeyLike) -> MappingKey:
    if isinstance(item, Mapping):
        return item.key
    return MappingKey(*item)


@dataclass(frozen=True)
class Alignment:
    """
    A set of mappings unique on (source, target, relation),
    always iterated in sorted key order
    """

    mappings: Tuple[Mapping, ...] = ()
    _index: Dict[MappingKey, Mapping] = field(
        init=False, repr=False, compare=False
    )

    def __post_init__(self):
        index = {}
        for mapping in self.mappings:
            if mapping.key in index:
                raise DuplicateMappingError(
                    f"Alignment contains mapping {mapping.key} twice"
                )
            index[mapping.key] = mapping
        mappings = tuple(index[key] for key in sorted(index))
        object.__setattr__(self, "mappings", mappings)
        object.__setattr__(self, "_index", index)

    def __iter__(self) -> Iterator[Mapping]:
        return iter(self.mappings)

    def __len__(self) -> int:
        return len(self.mappings)

    def __contains__(self, item: KeyLike) -> bool:
        return _as_key(item) in self._index

    def get(self, item: KeyLike) -> Optional[Mapping]:
        return self._index.get(_as_key(item))

    def keys(self) -> List[MappingKey]:
        return [m.key for m in self.mappings]

    def touching(self, iri: str) -> List[Mapping]:
        return [m for m in self.mappings if m.touches(iri)]

    def with_mapping(self, mapping: Mapping) -> "Alignment":
        return Alignment(self.mappings + (mapping,))

    def without(self, items: Iterable[KeyLike]) -> "Alignment":
        drop = {_as_key(i) for i in items}
        return Alignment(tuple(m for m in self if m.key not in drop))

    def filter(self, threshold: float) -> "Alignment":
        return Alignment(tuple(m for m in self if m.confidence >= threshold))


class AlignedAxiom(NamedTuple):
    """An axiom of KG_M, tagged with the mapping it was translated from"""

    axiom: Axiom
    origin: Optional[MappingKey] = None


def bind_alignment(
    kg1: KnowledgeGraph, kg2: KnowledgeGraph, m: Alignment
) -> None:
    """
    Check that every mapping lands in the graph pair's
    signatures and relates entities of the same kind
    """

    for mapping in m:
        source = kg1.entities.get(mapping.source)
        if source is None:
            raise EndpointNotInSignature(mapping.source, kg1.id)
        target = kg2.entities.get(mapping.target)
        if target is None:
            raise EndpointNotInSignature(mapping.target, kg2.id)
        if source.kind is not target.kind:
            raise KindMismatch(
                "Mapping {} relates a {} to a {}".format(
                    mapping.key, source.kind.value, target.kind.value
                )
            )


def translate(mapping: Mapping) -> Tuple[SubClassOf, ...]:
    if mapping.relation is Relation.EQUIVALENT:
        return (
            SubClassOf(mapping.source, mapping.target),
            SubClassOf(mapping.target, mapping.source),
        )
    elif mapping.relation is Relation.SUBSUMED:
        return (SubClassOf(mapping.source, mapping.target),)
    return (SubClassOf(mapping.target, mapping.source),)


def aligned_axioms(
    kg1: KnowledgeGraph, kg2: KnowledgeGraph, m: Alignment
) -> List[AlignedAxiom]:
    """
    Materialize the axioms of the aligned graph KG_M: the
    axioms of both graphs followed by the translation of
    every class mapping, each tagged with its mapping key
    """

    bind_alignment(kg1, kg2, m)
    axioms = [AlignedAxiom(a) for a in kg1.axioms + kg2.axioms]
    for mapping in m:
        if kg1.entities[mapping.source].kind is not EntityKind.CLASS:
            # only class mappings have a counterpart in the
            # class-axiom fragment, the rest stay declarations
            logger.debug(f"Mapping {mapping.key} contributes no axioms")
            continue
        for axiom in translate(mapping):
            axioms.append(AlignedAxiom(axiom, mapping.key))

    return list(dict.fromkeys(axioms))
