"""
Seeded generator of synthetic graph pairs with a known
reference alignment and planted disjointness conflicts.

The source graph is a random tree taxonomy labelled from a
word list. The target graph is a copy with fresh IRIs,
noisy labels and some deleted subclass edges. Each planted
conflict is a four-class pattern: `c ⊑ p` in the source,
`c' ⊑ q'` and `p' disjoint q'` in the target, so that the
correct mappings `c ≡ c'` and `p ≡ p'` can't be kept together
without making `c` and `c'` unsatisfiable.
"""

from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, FrozenSet, List, NamedTuple, Tuple, Union

import toml

from kgalign import __version__
from kgalign.ingest import serialize_ontology, write_alignment
from kgalign.logging import logger
from kgalign.matcher import normalize
from kgalign.model import (
    Alignment,
    DisjointWith,
    Entity,
    EntityKind,
    Iri,
    KnowledgeGraph,
    Label,
    Mapping,
    MappingKey,
    Relation,
    SubClassOf,
)
from kgalign.utils import ContractViolation

DATA_DIR = Path(__file__).resolve().parent / "data"
SOURCE_NAMESPACE = "http://kgalign.example.org/bench/source#"
TARGET_NAMESPACE = "http://kgalign.example.org/bench/target#"

_MASK = (1 << 64) - 1


class SplitMix64:
    """
    64-bit SplitMix generator. All randomness of a benchmark
    is drawn from a single instance, in a fixed order.
    """

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Integer in [0, n)"""
        if n < 1:
            raise ValueError(f"Can't draw below {n}")
        return (self.next() * n) >> 64

    def random(self) -> float:
        """Float in [0, 1) with 53 random bits"""
        return (self.next() >> 11) / (1 << 53)

    def shuffle(self, items: List) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


def _read_table(name: str) -> List[str]:
    with open(DATA_DIR / name, "r", encoding="utf-8") as f:
        lines = [line.rstrip("\n") for line in f]
    return [line for line in lines if line and not line.startswith("#")]


def load_words() -> List[str]:
    return _read_table("words.txt")


def load_synonyms() -> Dict[str, str]:
    return dict(line.split("\t") for line in _read_table("synonyms.tsv"))


@dataclass(frozen=True)
class BenchConfig:
    seed: int = 42
    n_classes: int = 100
    branching: int = 4
    label_noise: float = 0.1
    edge_delete_rate: float = 0.05
    n_conflicts: int = 0

    def __post_init__(self):
        if not 0 <= self.seed <= _MASK:
            raise ValueError(f"Seed {self.seed} is not a 64-bit unsigned int")
        if self.n_classes < 1:
            raise ValueError("Benchmark needs at least one class")
        if self.branching < 1:
            raise ValueError("Branching factor must be positive")
        for name in ("label_noise", "edge_delete_rate"):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise ValueError(f"{name} {value} out of range [0, 1]")
        if self.n_conflicts < 0 or 4 * self.n_conflicts > self.n_classes:
            raise ValueError(
                "Can't plant {} conflicts among {} classes, at most "
                "a quarter of the classes may be conflicts".format(
                    self.n_conflicts, self.n_classes
                )
            )

        # every conflict hangs two classes off the regular tree
        n_regular = self.n_regular
        capacity = n_regular * (self.branching - 1) + 1
        if capacity < 2 * self.n_conflicts:
            raise ValueError(
                "A tree of {} classes with branching {} can't hold "
                "{} conflicts".format(
                    n_regular, self.branching, self.n_conflicts
                )
            )

    @property
    def n_regular(self) -> int:
        return self.n_classes - 3 * self.n_conflicts


class Benchmark(NamedTuple):
    source: KnowledgeGraph
    target: KnowledgeGraph
    reference: Alignment
    conflicts: Tuple[MappingKey, ...]


class _Gadget(NamedTuple):
    parent: int
    child: int
    other: int


def _tokens(text: str) -> FrozenSet[str]:
    return frozenset(normalize(text).tokens)


def _grow_tree(cfg: BenchConfig, rng: SplitMix64):
    """Random tree over the regular classes, 0 being the root"""

    parents = {}
    children = [0] * cfg.n_classes
    open_ = [0]
    for node in range(1, cfg.n_regular):
        idx = rng.below(len(open_))
        parent = open_[idx]
        parents[node] = parent
        children[parent] += 1
        if children[parent] == cfg.branching:
            open_.pop(idx)
        open_.append(node)

    def attach(node):
        idx = rng.below(len(open_))
        parent = open_[idx]
        parents[node] = parent
        children[parent] += 1
        if children[parent] == cfg.branching:
            open_.pop(idx)

    gadgets = []
    for k in range(cfg.n_conflicts):
        p, c, q = [cfg.n_regular + 3 * k + i for i in range(3)]
        attach(p)
        parents[c] = p
        attach(q)
        gadgets.append(_Gadget(p, c, q))
    return parents, gadgets


def _draw_labels(n: int, words: List[str], rng: SplitMix64) -> List[str]:
    if 2 * n > len(words) * (len(words) - 1) // 2:
        raise ContractViolation(
            f"Word list of {len(words)} words is too small for {n} classes"
        )

    labels, used = [], set()
    while len(labels) < n:
        first = words[rng.below(len(words))]
        second = words[rng.below(len(words))]
        tokens = frozenset((first, second))
        if first == second or tokens in used:
            continue
        used.add(tokens)
        labels.append(f"{first} {second}")
    return labels


def _perturb(label: str, rng: SplitMix64, synonyms: Dict[str, str]) -> str:
    tokens = label.split()
    swaps = [
        (i, j)
        for i, token in enumerate(tokens)
        for j in range(len(token) - 1)
        if token[j] != token[j + 1]
    ]
    replaceable = [i for i, token in enumerate(tokens) if token in synonyms]

    options = []
    if swaps:
        options.append("swap")
    if replaceable:
        options.append("synonym")
    if len(set(tokens)) > 1:
        options.append("reorder")
    if not options:
        return label

    choice = options[rng.below(len(options))]
    if choice == "swap":
        i, j = swaps[rng.below(len(swaps))]
        token = tokens[i]
        tokens[i] = token[:j] + token[j + 1] + token[j] + token[j + 2 :]
    elif choice == "synonym":
        i = replaceable[rng.below(len(replaceable))]
        tokens[i] = synonyms[tokens[i]]
    else:
        tokens.reverse()
    return " ".join(tokens)


def _entity(iri: str, label: str) -> Entity:
    return Entity(Iri(iri), EntityKind.CLASS, (Label(label, "en"),))


def generate(cfg: BenchConfig) -> Benchmark:
    """
    Build a benchmark from `cfg`. Equal configurations
    always produce equal benchmarks.

    Returns:
        The source and target graphs, the reference
        alignment mapping every class to its counterpart,
        and the keys of the reference mappings that take
        part in planted conflicts
    """

    rng = SplitMix64(cfg.seed)
    parents, gadgets = _grow_tree(cfg, rng)
    labels = _draw_labels(cfg.n_classes, load_words(), rng)

    permutation = list(range(cfg.n_classes))
    rng.shuffle(permutation)
    source_iris = [
        Iri(f"{SOURCE_NAMESPACE}C{i:05d}") for i in range(cfg.n_classes)
    ]
    target_iris = [
        Iri(f"{TARGET_NAMESPACE}T{permutation[i]:05d}")
        for i in range(cfg.n_classes)
    ]

    # conflict classes keep their labels so that
    # their counterpart mappings are always found
    planted = {node for gadget in gadgets for node in gadget}
    # token sets already taken by any label on either side
    owners = {_tokens(label): i for i, label in enumerate(labels)}
    synonyms = load_synonyms()
    target_labels = list(labels)
    perturbed = 0
    for i in range(cfg.n_classes):
        if i in planted or rng.random() >= cfg.label_noise:
            continue
        label = _perturb(labels[i], rng, synonyms)
        owner = owners.get(_tokens(label), i)
        if owner != i:
            logger.debug(f"Perturbed label '{label}' collides, keeping")
            continue
        owners[_tokens(label)] = i
        target_labels[i] = label
        perturbed += 1

    moved = {gadget.child: gadget.other for gadget in gadgets}
    source_axioms, target_axioms, deleted = [], [], 0
    for node in sorted(parents):
        parent = parents[node]
        source_axioms.append(
            SubClassOf(source_iris[node], source_iris[parent])
        )
        if node in moved:
            parent = moved[node]
        elif rng.random() < cfg.edge_delete_rate:
            deleted += 1
            continue
        target_axioms.append(
            SubClassOf(target_iris[node], target_iris[parent])
        )
    for gadget in gadgets:
        target_axioms.append(
            DisjointWith(target_iris[gadget.parent], target_iris[gadget.other])
        )

    source = KnowledgeGraph(
        "source",
        {iri: _entity(iri, label) for iri, label in zip(source_iris, labels)},
        tuple(source_axioms),
    )
    target = KnowledgeGraph(
        "target",
        {
            iri: _entity(iri, label)
            for iri, label in zip(target_iris, target_labels)
        },
        tuple(target_axioms),
    )

    reference = Alignment(
        tuple(
            Mapping(s, t, Relation.EQUIVALENT, 1.0)
            for s, t in zip(source_iris, target_iris)
        )
    )
    conflicts = []
    for gadget in gadgets:
        for node in (gadget.child, gadget.parent):
            conflicts.append(
                MappingKey(
                    source_iris[node], target_iris[node], Relation.EQUIVALENT
                )
            )

    logger.info(
        "Generated benchmark with {} classes, {} conflicts, {} perturbed "
        "labels and {} deleted edges".format(
            cfg.n_classes, cfg.n_conflicts, perturbed, deleted
        )
    )
    return Benchmark(source, target, reference, tuple(conflicts))


def write_manifest(conflicts: Tuple[MappingKey, ...]) -> str:
    lines = ["# source\ttarget\trelation"]
    for key in conflicts:
        lines.append(f"{key.source}\t{key.target}\t{key.relation.symbol}")
    return "\n".join(lines) + "\n"


def read_manifest(path: Union[str, Path]) -> List[MappingKey]:
    keys = []
    with open(path, "r", encoding="utf-8") as f:
        for number, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ValueError(
                    "Manifest {} line {} has {} columns, expected 3".format(
                        path, number, len(fields)
                    )
                )
            source, target, symbol = fields
            keys.append(MappingKey(Iri(source), Iri(target), Relation(symbol)))
    return keys


def write_benchmark(cfg: BenchConfig, out_dir: Union[str, Path]) -> Benchmark:
    """
    Generate a benchmark and write `source.ttl`, `target.ttl`,
    `reference.tsv`, `manifest.tsv` and `benchmark.toml`
    into `out_dir`, creating it if needed
    """

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    benchmark = generate(cfg)

    files = {
        "source.ttl": serialize_ontology(benchmark.source),
        "target.ttl": serialize_ontology(benchmark.target),
        "reference.tsv": write_alignment(benchmark.reference),
        "manifest.tsv": write_manifest(benchmark.conflicts),
        "benchmark.toml": toml.dumps(
            {"generator": {"version": __version__}, "config": asdict(cfg)}
        ),
    }
    for name, text in files.items():
        with open(out_dir / name, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    logger.info(f"Wrote benchmark to {out_dir}")
    return benchmark
