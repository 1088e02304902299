"""
Selection of a final alignment from a set of candidates.

Candidates are visited greedily by decreasing confidence,
ties broken by source then target IRI. Each mode decides
differently what to do with a candidate that introduces
unsatisfiable concepts into the aligned graph:

* hard: reject it
* threshold: reject it only when its confidence is below theta
* soft: keep it, but penalize its score by how many
  unsatisfiable concepts involve its endpoints
* none: ignore consistency altogether

Every mode enforces the per-entity cardinality cap on both sides.
Hard and soft modes turn away zero-confidence candidates up front.
"""

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from kgalign.logging import logger
from kgalign.model import (
    Alignment,
    EntityKind,
    Iri,
    KnowledgeGraph,
    Mapping,
    MappingKey,
    bind_alignment,
    translate,
)
from kgalign.reasoner import (
    DEFAULT_J_CAP,
    ClosureResult,
    Hierarchy,
    Support,
    bottom_counts,
    closure,
    consist,
    softconsist,
)
from kgalign.utils import ContractViolation

MAX_EXACT_CANDIDATES = 20


class Mode(str, Enum):
    HARD = "hard"
    THRESHOLD = "threshold"
    SOFT = "soft"
    NONE = "none"


class Status(str, Enum):
    ACCEPTED = "Accepted"
    REJECTED_CARDINALITY = "RejectedCardinality"
    REJECTED_INCONSISTENT = "RejectedInconsistent"
    REJECTED_FLOOR = "RejectedFloor"


@dataclass(frozen=True)
class SelectorConfig:
    mode: Mode = Mode.HARD
    theta: float = 0.7
    cardinality_t: int = 1
    gamma: float = 0.0
    max_soft_iterations: int = 10
    j_cap: int = DEFAULT_J_CAP

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        # theta may sit above 1, which exempts no candidate at all
        if math.isnan(self.theta) or self.theta < 0:
            raise ValueError(f"Theta must be non-negative, got {self.theta}")
        if not 0 <= self.gamma <= 1:
            raise ValueError(f"Gamma {self.gamma} out of range [0, 1]")
        for name in ("cardinality_t", "max_soft_iterations", "j_cap"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")


@dataclass(frozen=True)
class ScoredMapping:
    mapping: Mapping
    objective_score: float
    status: Status
    justifications: Tuple[Support, ...] = ()

    @property
    def accepted(self) -> bool:
        return self.status is Status.ACCEPTED


@dataclass(frozen=True)
class Selection:
    """
    Outcome of a selection run: the accepted alignment, one
    scored record per candidate in visiting order, and the
    closure of the final aligned graph
    """

    alignment: Alignment
    scored: List[ScoredMapping]
    closure: ClosureResult
    iterations: int = 0
    exhausted: bool = False

    def __iter__(self):
        # unpacks as (alignment, scored)
        return iter((self.alignment, self.scored))

    @property
    def flagged(self) -> bool:
        return self.exhausted or self.closure.truncated

    def status_of(self, key: MappingKey) -> Optional[ScoredMapping]:
        for scored in self.scored:
            if scored.mapping.key == key:
                return scored
        return None


def greedy_order(candidates: Iterable[Mapping]) -> List[Mapping]:
    return sorted(
        candidates,
        key=lambda m: (-m.confidence, m.source, m.target, m.relation),
    )


class _Cardinality:
    def __init__(self, t: int):
        self.t = t
        self.sources: Counter = Counter()
        self.targets: Counter = Counter()

    def admits(self, mapping: Mapping) -> bool:
        return (
            self.sources[mapping.source] < self.t
            and self.targets[mapping.target] < self.t
        )

    def add(self, mapping: Mapping) -> None:
        self.sources[mapping.source] += 1
        self.targets[mapping.target] += 1

    def remove(self, mapping: Mapping) -> None:
        self.sources[mapping.source] -= 1
        self.targets[mapping.target] -= 1


class _ConsistencyCheck:
    """
    Tracks the unsatisfiable concepts of the aligned graph as
    mappings get accepted, and tells whether a candidate
    would add new ones
    """

    def __init__(self, kg1: KnowledgeGraph, kg2: KnowledgeGraph):
        self.kg1, self.kg2 = kg1, kg2
        self.hierarchy = Hierarchy(kg1.axioms + kg2.axioms)
        classes = set(kg1.classes) | set(kg2.classes)
        self.unsat: Set[Iri] = self.hierarchy.unsatisfiable(classes)

    def _axioms(self, mapping: Mapping):
        if self.kg1.entities[mapping.source].kind is not EntityKind.CLASS:
            return ()
        return translate(mapping)

    def add(self, mapping: Mapping) -> Set[Iri]:
        """Add `mapping` and return the concepts it made unsatisfiable"""

        axioms = self._axioms(mapping)
        if not axioms:
            return set()
        self.hierarchy.add(axioms)

        # only concepts below either endpoint can gain ancestors
        affected = self.hierarchy.descendants([mapping.source, mapping.target])
        new = {
            node
            for node in affected - self.unsat
            if self.hierarchy.is_unsatisfiable(node)
        }
        self.unsat |= new
        return new

    def remove(self, mapping: Mapping, new: Set[Iri]) -> None:
        self.hierarchy.remove(self._axioms(mapping))
        self.unsat -= new


def _justify(
    kg1, kg2, accepted: List[Mapping], mapping: Mapping, concepts, cfg
) -> Tuple[Support, ...]:
    """
    Justifications of the conflicts `mapping` would
    have introduced on top of the accepted mappings
    """

    prospective = Alignment(tuple(accepted) + (mapping,))
    cr = closure(kg1, kg2, prospective, cfg.j_cap, within=concepts)
    justifications = set()
    for report in cr.unsat:
        justifications |= {
            j for j in report.justifications if mapping.key in j
        }
    return tuple(sorted(justifications, key=lambda j: sorted(j)))


def _greedy(
    kg1: KnowledgeGraph,
    kg2: KnowledgeGraph,
    candidates: Alignment,
    cfg: SelectorConfig,
    exempt,
) -> Tuple[List[Mapping], Dict[MappingKey, ScoredMapping]]:
    """
    Shared greedy pass. `exempt(mapping)` says whether a
    mapping skips the consistency check; cardinality
    always applies.
    """

    cardinality = _Cardinality(cfg.cardinality_t)
    check = _ConsistencyCheck(kg1, kg2)
    accepted, rejected = [], {}
    for mapping in greedy_order(candidates):
        if not cardinality.admits(mapping):
            logger.debug(f"Rejecting {mapping.key}: cardinality")
            rejected[mapping.key] = ScoredMapping(
                mapping, 0.0, Status.REJECTED_CARDINALITY
            )
            continue

        new = check.add(mapping)
        if new and not exempt(mapping):
            check.remove(mapping, new)
            justifications = _justify(kg1, kg2, accepted, mapping, new, cfg)
            logger.debug(
                "Rejecting {}: makes {} unsatisfiable".format(
                    mapping.key, ", ".join(sorted(new))
                )
            )
            rejected[mapping.key] = ScoredMapping(
                mapping, 0.0, Status.REJECTED_INCONSISTENT, justifications
            )
            continue

        cardinality.add(mapping)
        accepted.append(mapping)
    return accepted, rejected


def _split_zero(
    candidates: Alignment,
) -> Tuple[Alignment, Dict[MappingKey, ScoredMapping]]:
    """
    Set aside candidates with zero confidence, which could
    only ever be accepted with a zero score
    """

    rejected = {}
    for mapping in candidates:
        if mapping.confidence == 0:
            logger.debug(f"Rejecting {mapping.key}: zero confidence")
            rejected[mapping.key] = ScoredMapping(
                mapping, 0.0, Status.REJECTED_FLOOR
            )
    return candidates.without(rejected), rejected


def _assemble(
    candidates: Alignment,
    scores: Dict[MappingKey, float],
    rejected: Dict[MappingKey, ScoredMapping],
) -> List[ScoredMapping]:
    scored = []
    for mapping in greedy_order(candidates):
        if mapping.key in rejected:
            scored.append(rejected[mapping.key])
        else:
            scored.append(
                ScoredMapping(mapping, scores[mapping.key], Status.ACCEPTED)
            )
    return scored


def _consist_scores(
    alignment: Alignment, cr: ClosureResult
) -> Dict[MappingKey, float]:
    return {
        m.key: consist(m.source, alignment, cr)
        * consist(m.target, alignment, cr)
        * m.confidence
        for m in alignment
    }


def _finish(kg1, kg2, accepted, rejected, candidates, cfg, score):
    alignment = Alignment(tuple(accepted))
    cr = closure(kg1, kg2, alignment, cfg.j_cap)
    scores = score(alignment, cr)
    scored = _assemble(candidates, scores, rejected)
    selection = Selection(alignment, scored, cr)
    logger.info(
        "Selected {} of {} candidates in {} mode, {} unsatisfiable "
        "concepts remain".format(
            len(alignment), len(candidates), cfg.mode.value, len(cr.unsat)
        )
    )
    return selection


def select_hard(
    kg1: KnowledgeGraph,
    kg2: KnowledgeGraph,
    candidates: Alignment,
    cfg: SelectorConfig,
) -> Selection:
    bind_alignment(kg1, kg2, candidates)
    positive, zero = _split_zero(candidates)
    accepted, rejected = _greedy(
        kg1, kg2, positive, cfg, exempt=lambda m: False
    )
    rejected.update(zero)
    return _finish(
        kg1, kg2, accepted, rejected, candidates, cfg, _consist_scores
    )


def select_threshold(
    kg1: KnowledgeGraph,
    kg2: KnowledgeGraph,
    candidates: Alignment,
    cfg: SelectorConfig,
) -> Selection:
    bind_alignment(kg1, kg2, candidates)

    def exempt(mapping: Mapping) -> bool:
        return mapping.confidence >= cfg.theta

    positive, zero = candidates, {}
    if cfg.theta > 0:
        # at theta 0 every candidate is exempt, zero confidence included
        positive, zero = _split_zero(candidates)
    accepted, rejected = _greedy(kg1, kg2, positive, cfg, exempt)
    rejected.update(zero)

    def score(alignment, cr):
        scores = _consist_scores(alignment, cr)
        for m in alignment:
            if m.confidence >= cfg.theta:
                scores[m.key] = m.confidence
        return scores

    return _finish(kg1, kg2, accepted, rejected, candidates, cfg, score)


def select_none(
    kg1: KnowledgeGraph,
    kg2: KnowledgeGraph,
    candidates: Alignment,
    cfg: SelectorConfig,
) -> Selection:
    bind_alignment(kg1, kg2, candidates)
    accepted, rejected = _cardinality_pass(candidates, cfg)

    def score(alignment, cr):
        return {m.key: m.confidence for m in alignment}

    return _finish(kg1, kg2, accepted, rejected, candidates, cfg, score)


def _cardinality_pass(candidates: Alignment, cfg: SelectorConfig):
    cardinality = _Cardinality(cfg.cardinality_t)
    accepted, rejected = [], {}
    for mapping in greedy_order(candidates):
        if cardinality.admits(mapping):
            cardinality.add(mapping)
            accepted.append(mapping)
        else:
            rejected[mapping.key] = ScoredMapping(
                mapping, 0.0, Status.REJECTED_CARDINALITY
            )
    return accepted, rejected


def soft_scores(
    alignment: Alignment, cr: ClosureResult
) -> Dict[MappingKey, float]:
    counts = bottom_counts(alignment, cr)
    return {
        m.key: softconsist(counts[m.source])
        * softconsist(counts[m.target])
        * m.confidence
        for m in alignment
    }


def select_soft(
    kg1: KnowledgeGraph,
    kg2: KnowledgeGraph,
    candidates: Alignment,
    cfg: SelectorConfig,
) -> Selection:
    """
    Accept candidates on cardinality alone, then repeatedly
    drop the lowest-scoring mapping whose penalized score
    falls below `cfg.gamma`, recomputing the closure after
    each removal, for at most `cfg.max_soft_iterations` rounds
    """

    bind_alignment(kg1, kg2, candidates)
    positive, zero = _split_zero(candidates)
    accepted, rejected = _cardinality_pass(positive, cfg)
    rejected.update(zero)
    alignment = Alignment(tuple(accepted))

    iterations, exhausted = 0, False
    while True:
        cr = closure(kg1, kg2, alignment, cfg.j_cap)
        scores = soft_scores(alignment, cr)
        below = [key for key, score in scores.items() if score < cfg.gamma]
        if not below:
            break
        if iterations >= cfg.max_soft_iterations:
            logger.warning(
                "Soft selection stopped after {} iterations with {} "
                "mappings still below gamma".format(iterations, len(below))
            )
            exhausted = True
            break

        victim = min(below, key=lambda key: (scores[key], key))
        logger.debug(
            f"Removing {victim} with score {scores[victim]:.6f} < gamma"
        )
        rejected[victim] = ScoredMapping(
            alignment.get(victim), scores[victim], Status.REJECTED_FLOOR
        )
        alignment = alignment.without([victim])
        iterations += 1

    scored = _assemble(candidates, scores, rejected)
    logger.info(
        "Selected {} of {} candidates in soft mode after {} removals".format(
            len(alignment), len(candidates), iterations
        )
    )
    return Selection(alignment, scored, cr, iterations, exhausted)


def select_exact(
    kg1: KnowledgeGraph,
    kg2: KnowledgeGraph,
    candidates: Alignment,
    cfg: SelectorConfig,
) -> Selection:
    """
    Brute-force the correctness-assumption objective: the
    consistent, cardinality-feasible subset of candidates
    with the largest total confidence. Branch and bound
    keeps this usable up to `MAX_EXACT_CANDIDATES`.
    """

    if len(candidates) > MAX_EXACT_CANDIDATES:
        raise ContractViolation(
            "Exact selection supports at most {} candidates, got {}".format(
                MAX_EXACT_CANDIDATES, len(candidates)
            )
        )
    bind_alignment(kg1, kg2, candidates)

    positive, zero = _split_zero(candidates)
    order = greedy_order(positive)
    remaining = [0.0] * (len(order) + 1)
    for i in range(len(order) - 1, -1, -1):
        remaining[i] = remaining[i + 1] + order[i].confidence

    cardinality = _Cardinality(cfg.cardinality_t)
    check = _ConsistencyCheck(kg1, kg2)
    best: Dict[str, object] = {"value": -1.0, "chosen": ()}
    chosen: List[Mapping] = []

    def visit(i: int, value: float):
        if value + remaining[i] <= best["value"]:
            return
        if i == len(order):
            best["value"], best["chosen"] = value, tuple(chosen)
            return

        mapping = order[i]
        if cardinality.admits(mapping):
            new = check.add(mapping)
            if not new:
                cardinality.add(mapping)
                chosen.append(mapping)
                visit(i + 1, value + mapping.confidence)
                chosen.pop()
                cardinality.remove(mapping)
            check.remove(mapping, new)
        visit(i + 1, value)

    visit(0, 0.0)

    accepted = list(best["chosen"])
    keys = {m.key for m in accepted}
    cardinality = _Cardinality(cfg.cardinality_t)
    for mapping in accepted:
        cardinality.add(mapping)

    rejected = {}
    for mapping in order:
        if mapping.key in keys:
            continue
        if cardinality.admits(mapping):
            status = Status.REJECTED_INCONSISTENT
        else:
            status = Status.REJECTED_CARDINALITY
        rejected[mapping.key] = ScoredMapping(mapping, 0.0, status)
    rejected.update(zero)
    return _finish(
        kg1, kg2, accepted, rejected, candidates, cfg, _consist_scores
    )


_selectors = {
    Mode.HARD: select_hard,
    Mode.THRESHOLD: select_threshold,
    Mode.SOFT: select_soft,
    Mode.NONE: select_none,
}


def select(
    kg1: KnowledgeGraph,
    kg2: KnowledgeGraph,
    candidates: Alignment,
    cfg: SelectorConfig,
    exact: bool = False,
) -> Selection:
    if exact:
        if cfg.mode is not Mode.HARD:
            raise ContractViolation("Exact selection only supports hard mode")
        return select_exact(kg1, kg2, candidates, cfg)
    return _selectors[cfg.mode](kg1, kg2, candidates, cfg)


def objective_value(mode: Mode, selection: Iterable[ScoredMapping]) -> float:
    """Value of the mode's objective summed over the accepted mappings"""

    Mode(mode)
    if isinstance(selection, Selection):
        selection = selection.scored
    return sum(s.objective_score for s in selection if s.accepted)


def accepted_keys(
    selection: Iterable[ScoredMapping],
) -> FrozenSet[MappingKey]:
    return frozenset(s.mapping.key for s in selection if s.accepted)
