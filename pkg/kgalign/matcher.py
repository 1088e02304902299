"""
Lexical candidate generation: label normalization, string
similarity metrics and the pairwise candidate generator
"""

import re
import unicodedata
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Set, Tuple

from rapidfuzz.distance import JaroWinkler, Levenshtein

from kgalign.logging import logger
from kgalign.model import (
    Alignment,
    Entity,
    EntityKind,
    Iri,
    KnowledgeGraph,
    Mapping,
    Relation,
)
from kgalign.utils import ContractViolation


class Metric(str, Enum):
    LEVENSHTEIN = "levenshtein"
    JARO_WINKLER = "jaro-winkler"
    JACCARD = "jaccard"
    COMBINED = "combined"


class Blocking(str, Enum):
    NONE = "none"
    SHARED_TOKEN = "shared-token"


@dataclass(frozen=True)
class MatcherConfig:
    metric: Metric = Metric.COMBINED
    candidate_threshold: float = 0.6
    blocking: Blocking = Blocking.SHARED_TOKEN

    def __post_init__(self):
        object.__setattr__(self, "metric", Metric(self.metric))
        object.__setattr__(self, "blocking", Blocking(self.blocking))
        if not 0 <= self.candidate_threshold <= 1:
            raise ValueError(
                "Candidate threshold {} out of range [0, 1]".format(
                    self.candidate_threshold
                )
            )


@dataclass(frozen=True)
class NormalizedName:
    original: str
    tokens: Tuple[str, ...]

    @property
    def joined(self) -> str:
        return " ".join(self.tokens)


_separators = re.compile(r"[_\-/]")


def _split_camel_case(name: str) -> str:
    chars = []
    for i, char in enumerate(name):
        if i > 0 and char.isupper():
            prev = name[i - 1]
            following = name[i + 1] if i + 1 < len(name) else ""
            # "fooBar" splits before B, "HTTPServer" before S
            if prev.islower() or (prev.isupper() and following.islower()):
                chars.append(" ")
        chars.append(char)
    return "".join(chars)


def normalize(name: str) -> NormalizedName:
    # composed form, so accents survive the punctuation filter
    text = _split_camel_case(unicodedata.normalize("NFC", name))
    text = _separators.sub(" ", text)
    text = "".join(c for c in text if c.isalnum() or c.isspace())
    tokens = tuple(t for t in text.casefold().split() if t)
    return NormalizedName(name, tokens)


def levenshtein_sim(a: str, b: str) -> float:
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1 - Levenshtein.distance(a, b) / longest


def jaro_winkler_sim(a: str, b: str) -> float:
    if a == b:
        return 1.0
    score = JaroWinkler.similarity(a, b, prefix_weight=0.1)
    return min(max(score, 0.0), 1.0)


def jaccard_sim(a: NormalizedName, b: NormalizedName) -> float:
    left, right = set(a.tokens), set(b.tokens)
    union = left | right
    if not union:
        return 1.0
    return len(left & right) / len(union)


def name_similarity(
    a: NormalizedName, b: NormalizedName, metric: Metric
) -> float:
    if metric is Metric.LEVENSHTEIN:
        return levenshtein_sim(a.joined, b.joined)
    elif metric is Metric.JARO_WINKLER:
        return jaro_winkler_sim(a.joined, b.joined)
    elif metric is Metric.JACCARD:
        return jaccard_sim(a, b)
    return max(
        levenshtein_sim(a.joined, b.joined),
        jaro_winkler_sim(a.joined, b.joined),
        jaccard_sim(a, b),
    )


def _names(entity: Entity) -> List[NormalizedName]:
    return [normalize(label.text) for label in entity.labels]


def _best(
    left: Iterable[NormalizedName],
    right: List[NormalizedName],
    metric: Metric,
) -> float:
    return max(
        (name_similarity(a, b, metric) for a in left for b in right),
        default=0.0,
    )


def entity_similarity(e1: Entity, e2: Entity, cfg: MatcherConfig) -> float:
    """
    Score two entities by the best-matching pair among
    all of their labels under the configured metric
    """

    if e1.kind is not e2.kind:
        raise ContractViolation(
            "Can't compare {} {} with {} {}".format(
                e1.kind.value, e1.iri, e2.kind.value, e2.iri
            )
        )
    return _best(_names(e1), _names(e2), cfg.metric)


def _token_index(
    names: Dict[Iri, List[NormalizedName]]
) -> Dict[str, Set[Iri]]:
    index = defaultdict(set)
    for iri, entity_names in names.items():
        for name in entity_names:
            for token in name.tokens:
                index[token].add(iri)
    return index


def generate_candidates(
    kg1: KnowledgeGraph, kg2: KnowledgeGraph, cfg: MatcherConfig
) -> Alignment:
    """
    Compare every source entity against the target entities
    of the same kind and keep each pair whose similarity
    reaches the candidate threshold as an equivalence
    """

    mappings = []
    for kind in EntityKind:
        sources = {
            iri: _names(e)
            for iri, e in kg1.entities.items()
            if e.kind is kind
        }
        targets = {
            iri: _names(e)
            for iri, e in kg2.entities.items()
            if e.kind is kind
        }
        if not sources or not targets:
            continue

        index = _token_index(targets)
        for source, source_names in sources.items():
            if cfg.blocking is Blocking.SHARED_TOKEN:
                block = set()
                for name in source_names:
                    for token in name.tokens:
                        block |= index.get(token, set())
            else:
                block = targets.keys()

            for target in sorted(block):
                score = _best(source_names, targets[target], cfg.metric)
                if score >= cfg.candidate_threshold:
                    mappings.append(
                        Mapping(source, target, Relation.EQUIVALENT, score)
                    )

    candidates = Alignment(tuple(mappings))
    logger.info(
        "Generated {} candidate mappings between '{}' and '{}'".format(
            len(candidates), kg1.id, kg2.id
        )
    )
    return candidates
