"""
Subsumption reasoning over the aligned graph KG_M.

Every derived subsumption A ⊑* B carries the minimal sets of
mappings it depends on. Axioms of the input graphs cost
nothing, so a derivation that needs no mapping is recorded
with the empty support. Unsatisfiable concepts, mapping
involvement and the consistency scores used during
selection are all read off these supports.
"""

import heapq
import itertools
import math
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import (
    Dict,
    FrozenSet,
    Iterable,
    List,
    NamedTuple,
    Optional,
    Set,
    Tuple,
    Union,
)

from kgalign.logging import logger
from kgalign.model import (
    AlignedAxiom,
    Alignment,
    Axiom,
    DisjointWith,
    EquivalentClass,
    Iri,
    KnowledgeGraph,
    MappingKey,
    SubClassOf,
    aligned_axioms,
)
from kgalign.utils import ContractViolation

DEFAULT_J_CAP = 16

Support = FrozenSet[MappingKey]
EMPTY: Support = frozenset()


@dataclass(frozen=True)
class DerivedSubsumption:
    sub: Iri
    sup: Iri
    supports: FrozenSet[Support]


@dataclass(frozen=True)
class UnsatReport:
    concept: Iri
    justifications: FrozenSet[Support]
    involved_mappings: FrozenSet[MappingKey] = field(init=False)

    def __post_init__(self):
        involved = frozenset().union(*self.justifications)
        object.__setattr__(self, "involved_mappings", involved)


@dataclass(frozen=True)
class ClosureResult:
    subsumptions: Dict[Tuple[Iri, Iri], DerivedSubsumption]
    unsat: Tuple[UnsatReport, ...]
    truncated: bool = False
    mapping_keys: FrozenSet[MappingKey] = frozenset()

    def supports(self, sub: str, sup: str) -> FrozenSet[Support]:
        derived = self.subsumptions.get((sub, sup))
        if derived is None:
            return frozenset()
        return derived.supports

    def entails(self, sub: str, sup: str) -> bool:
        return (sub, sup) in self.subsumptions

    @property
    def unsatisfiable(self) -> List[Iri]:
        return [report.concept for report in self.unsat]


def add_minimal(antichain: List[Support], candidate: Support, cap: int):
    """
    Insert `candidate` into a list of mutually minimal sets,
    dropping the sets it makes redundant. Returns a pair of
    flags: whether it was inserted, and whether `cap` stopped it.
    """

    for existing in antichain:
        if existing <= candidate:
            return False, False
    antichain[:] = [s for s in antichain if not candidate <= s]
    if len(antichain) >= cap:
        return False, True
    antichain.append(candidate)
    return True, False


AxiomLike = Union[Axiom, AlignedAxiom]


class _SupportGraph:
    def __init__(self, items: Iterable[Tuple[Axiom, Support]]):
        self.edges: Dict[Iri, List[Tuple[Iri, Support]]] = defaultdict(list)
        self.disjoint: Dict[Iri, Set[Iri]] = defaultdict(set)
        for axiom, support in items:
            if isinstance(axiom, SubClassOf):
                self.edges[axiom.sub].append((axiom.sup, support))
            elif isinstance(axiom, EquivalentClass):
                self.edges[axiom.a].append((axiom.b, support))
                self.edges[axiom.b].append((axiom.a, support))
            elif isinstance(axiom, DisjointWith):
                self.disjoint[axiom.a].add(axiom.b)
                self.disjoint[axiom.b].add(axiom.a)

    def ancestors(self, source: Iri, cap: int):
        supports = {source: [EMPTY]}
        truncated = False

        # expand smaller supports first so that fewer
        # supersets get derived and thrown away later
        counter = itertools.count()
        heap = [(0, next(counter), source, EMPTY)]
        while heap:
            _, _, node, support = heapq.heappop(heap)
            if support not in supports[node]:
                continue
            for sup, edge_support in self.edges.get(node, ()):
                candidate = support | edge_support
                antichain = supports.setdefault(sup, [])
                added, hit = add_minimal(antichain, candidate, cap)
                truncated |= hit
                if added:
                    item = (len(candidate), next(counter), sup, candidate)
                    heapq.heappush(heap, item)
        return supports, truncated

    def justifications(self, supports, cap: int):
        justifications: List[Support] = []
        truncated = False
        for x, x_supports in supports.items():
            for y in self.disjoint.get(x, ()):
                if y < x or y not in supports:
                    continue
                for s1 in x_supports:
                    for s2 in supports[y]:
                        _, hit = add_minimal(justifications, s1 | s2, cap)
                        truncated |= hit
        return justifications, truncated


def _closure(
    items: Iterable[Tuple[Axiom, Support]],
    sources: Iterable[Iri],
    cap: int,
    mapping_keys: FrozenSet[MappingKey] = frozenset(),
) -> ClosureResult:
    graph = _SupportGraph(items)
    subsumptions, unsat, truncated = {}, [], False
    for source in sorted(set(sources)):
        supports, hit = graph.ancestors(source, cap)
        truncated |= hit
        for sup, sup_supports in supports.items():
            subsumptions[(source, sup)] = DerivedSubsumption(
                source, sup, frozenset(sup_supports)
            )

        justifications, hit = graph.justifications(supports, cap)
        truncated |= hit
        if justifications:
            unsat.append(UnsatReport(source, frozenset(justifications)))

    if truncated:
        logger.warning(
            f"Support cap of {cap} reached, closure may be incomplete"
        )
    return ClosureResult(subsumptions, tuple(unsat), truncated, mapping_keys)


def closure(
    kg1: KnowledgeGraph,
    kg2: KnowledgeGraph,
    m: Alignment,
    j_cap: int = DEFAULT_J_CAP,
    within: Optional[Iterable[str]] = None,
) -> ClosureResult:
    """
    Compute the reflexive-transitive subsumption closure of
    KG_M = kg1 ∪ kg2 ∪ m together with the minimal mapping
    supports of every derived pair and the unsatisfiable
    concepts they give rise to.

    Args:
        kg1:
            Source graph
        kg2:
            Target graph
        m:
            Alignment between them
        j_cap:
            Maximum number of supports stored per pair and
            of justifications per unsatisfiable concept.
            Hitting it sets `truncated` on the result.
        within:
            If given, only derive subsumptions whose
            subclass is one of these concepts
    Returns:
        The closure, with unsatisfiable concepts sorted by IRI
    """

    if j_cap < 1:
        raise ContractViolation(f"Support cap must be positive, got {j_cap}")

    items = []
    for aligned in aligned_axioms(kg1, kg2, m):
        if aligned.origin is None:
            items.append((aligned.axiom, EMPTY))
        else:
            items.append((aligned.axiom, frozenset([aligned.origin])))

    classes = set(kg1.classes) | set(kg2.classes)
    if within is not None:
        classes &= set(within)

    result = _closure(items, classes, j_cap, frozenset(m.keys()))
    logger.debug(
        "Closure over {} mappings derived {} subsumptions, {} "
        "unsatisfiable concepts".format(
            len(m), len(result.subsumptions), len(result.unsat)
        )
    )
    return result


def involved(m_key: MappingKey, cr: ClosureResult) -> bool:
    if m_key not in cr.mapping_keys:
        raise ContractViolation(
            f"Mapping {m_key} is not part of the closure's alignment"
        )
    return any(
        m_key in justification
        for report in cr.unsat
        for justification in report.justifications
    )


def consist(e: str, m: Alignment, cr: ClosureResult) -> int:
    for mapping in m.touching(e):
        if mapping.key in cr.mapping_keys and involved(mapping.key, cr):
            return 0
    return 1


def unsat_count(e: str, m: Alignment, cr: ClosureResult) -> int:
    touching = {mapping.key for mapping in m.touching(e)}
    return sum(
        1 for report in cr.unsat if report.involved_mappings & touching
    )


def bottom_counts(m: Alignment, cr: ClosureResult) -> Dict[Iri, int]:
    """Value of `unsat_count` for every entity touched by `m`"""

    counts = {}
    for mapping in m:
        counts[mapping.source] = 0
        counts[mapping.target] = 0

    for report in cr.unsat:
        endpoints = set()
        for key in report.involved_mappings:
            if key in m:
                endpoints.update((key.source, key.target))
        for iri in endpoints:
            counts[iri] += 1
    return counts


def softconsist(bot: int) -> float:
    """
    Logistic penalty 2 / (1 + e^bot): 1 when no unsatisfiability
    involves an entity and decaying to 0 as the count grows
    """

    if bot < 0:
        raise ContractViolation(f"Unsatisfiability count {bot} is negative")

    # same value as 2 / (1 + exp(bot)), without overflowing
    decay = math.exp(-bot)
    return 2 * decay / (1 + decay)


class Entailment(NamedTuple):
    """An atomic statement `sub ⊑ sup`, with `sup=None` standing for ⊥"""

    sub: Iri
    sup: Optional[Iri] = None

    def __str__(self) -> str:
        sup = "⊥" if self.sup is None else self.sup
        return f"{self.sub} ⊑ {sup}"


def _unwrap(axioms: Iterable[AxiomLike]) -> List[Axiom]:
    return [a.axiom if isinstance(a, AlignedAxiom) else a for a in axioms]


def _entailments(
    axioms: List[Axiom], sigma: Set[Iri]
) -> Set[Entailment]:
    items = [(axiom, EMPTY) for axiom in axioms]
    cr = _closure(items, sigma, cap=1)

    statements = set()
    for sub, sup in cr.subsumptions:
        if sub != sup and sup in sigma:
            statements.add(Entailment(sub, sup))
    for report in cr.unsat:
        statements.add(Entailment(report.concept))
    return statements


def deductive_diff(
    kg_a: Iterable[AxiomLike],
    kg_b: Iterable[AxiomLike],
    sigma: Iterable[str],
) -> Set[Entailment]:
    """
    Atomic statements over `sigma` entailed by the axioms of
    `kg_b` but not by those of `kg_a`: named subsumptions
    between distinct concepts, and unsatisfiable concepts
    """

    sigma = {Iri(iri) for iri in sigma}
    entailed_a = _entailments(_unwrap(kg_a), sigma)
    entailed_b = _entailments(_unwrap(kg_b), sigma)
    return entailed_b - entailed_a


class Hierarchy:
    """
    Mutable, provenance-free view of a class hierarchy used
    to check whether adding axioms makes new concepts
    unsatisfiable without recomputing the whole closure
    """

    def __init__(self, axioms: Iterable[Axiom] = ()):
        self.parents: Dict[Iri, List[Iri]] = defaultdict(list)
        self.children: Dict[Iri, List[Iri]] = defaultdict(list)
        self.disjoint: Dict[Iri, Set[Iri]] = defaultdict(set)
        self.add(axioms)

    def _edges(self, axioms: Iterable[Axiom]):
        for axiom in axioms:
            if isinstance(axiom, SubClassOf):
                yield axiom.sub, axiom.sup
            elif isinstance(axiom, EquivalentClass):
                yield axiom.a, axiom.b
                yield axiom.b, axiom.a

    def add(self, axioms: Iterable[Axiom]) -> None:
        axioms = list(axioms)
        for sub, sup in self._edges(axioms):
            self.parents[sub].append(sup)
            self.children[sup].append(sub)
        for axiom in axioms:
            if isinstance(axiom, DisjointWith):
                self.disjoint[axiom.a].add(axiom.b)
                self.disjoint[axiom.b].add(axiom.a)

    def remove(self, axioms: Iterable[Axiom]) -> None:
        for sub, sup in self._edges(axioms):
            self.parents[sub].remove(sup)
            self.children[sup].remove(sub)

    def _reach(self, nodes: Iterable[Iri], edges) -> Set[Iri]:
        seen = set(nodes)
        queue = deque(seen)
        while queue:
            node = queue.popleft()
            for neighbor in edges.get(node, ()):
                if neighbor not in seen:
                    seen.add(neighbor)
                    queue.append(neighbor)
        return seen

    def ancestors(self, node: Iri) -> Set[Iri]:
        return self._reach([node], self.parents)

    def descendants(self, nodes: Iterable[Iri]) -> Set[Iri]:
        return self._reach(nodes, self.children)

    def is_unsatisfiable(self, node: Iri) -> bool:
        ancestors = self.ancestors(node)
        return any(
            self.disjoint[x] & ancestors
            for x in ancestors
            if x in self.disjoint
        )

    def unsatisfiable(self, nodes: Iterable[Iri]) -> Set[Iri]:
        return {node for node in nodes if self.is_unsatisfiable(node)}
