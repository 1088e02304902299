import random
from pathlib import Path

import pytest
import toml

from kgalign.ingest import load_alignment, load_ontology
from kgalign.model import (
    Alignment,
    DisjointWith,
    Entity,
    EntityKind,
    KnowledgeGraph,
    Label,
    Mapping,
    Relation,
    SubClassOf,
)

FIXTURES = Path(__file__).resolve().parent / "fixtures"
PINS = FIXTURES / "pins.toml"
FMA = "http://example.org/fma#"
NCI = "http://example.org/nci#"


@pytest.fixture
def lymphokine_dir():
    return FIXTURES / "lymphokine"


@pytest.fixture
def fma(lymphokine_dir):
    return load_ontology(lymphokine_dir / "fma.ttl", "fma")


@pytest.fixture
def nci(lymphokine_dir):
    return load_ontology(lymphokine_dir / "nci.ttl", "nci")


@pytest.fixture
def reference(lymphokine_dir):
    return load_alignment(lymphokine_dir / "reference.tsv")


@pytest.fixture
def m1():
    return Mapping(FMA + "Protein", NCI + "Protein", Relation.EQUIVALENT, 1.0)


@pytest.fixture
def m2():
    return Mapping(
        FMA + "Lymphokine",
        NCI + "Therapeutic_Lymphokine",
        Relation.EQUIVALENT,
        0.5,
    )


@pytest.fixture
def candidates(m1, m2):
    return Alignment((m1, m2))


@pytest.fixture
def make_kg():
    """
    Build a graph of classes named `<id>#<name>` from
    bare names, subclass pairs and disjoint pairs
    """

    def f(id, names, subclasses=(), disjoint=(), labels=None):
        namespace = f"http://example.org/{id}#"
        labels = labels or {}
        entities = {}
        for name in names:
            iri = namespace + name
            label = labels.get(name, name)
            entities[iri] = Entity(
                iri, EntityKind.CLASS, (Label(label),) if label else ()
            )

        axioms = [
            SubClassOf(namespace + a, namespace + b) for a, b in subclasses
        ]
        axioms += [
            DisjointWith(namespace + a, namespace + b) for a, b in disjoint
        ]
        return KnowledgeGraph(id, entities, tuple(axioms))

    return f


@pytest.fixture
def make_instance(make_kg):
    """
    Random graph pair over a shared pool of class names,
    with a random DAG on each side, a few disjointness
    axioms in the target and random candidate mappings
    """

    def f(seed, n_classes=8, n_edges=10, n_disjoint=2, n_mappings=6):
        rng = random.Random(seed)
        names = [f"C{i}" for i in range(n_classes)]

        def dag(n):
            edges = set()
            for _ in range(n):
                a, b = rng.sample(range(n_classes), 2)
                # edges always point to a lower index, so no cycles
                edges.add((names[max(a, b)], names[min(a, b)]))
            return sorted(edges)

        kg1 = make_kg("s", names, dag(n_edges))
        disjoint = set()
        while len(disjoint) < n_disjoint:
            a, b = sorted(rng.sample(names, 2))
            disjoint.add((a, b))
        kg2 = make_kg("t", names, dag(n_edges), sorted(disjoint))

        pairs = set()
        while len(pairs) < n_mappings:
            pairs.add((rng.choice(names), rng.choice(names)))
        mappings = [
            Mapping(
                "http://example.org/s#" + a,
                "http://example.org/t#" + b,
                rng.choice(list(Relation)),
                round(rng.random(), 2),
            )
            for a, b in sorted(pairs)
        ]
        return kg1, kg2, Alignment(tuple(mappings))

    return f


@pytest.fixture(params=[None, ".env", ".other-env"], scope="function")
def dotenv(request):
    return request.param


@pytest.fixture
def write_dotenv(dotenv):
    def f(project_dir):
        if dotenv is not None:
            with open(project_dir / dotenv, "w") as f:
                f.write(
                    "KGA_ENVARG1=fever\nKGA_ENVARG2=${KGA_ENVARG1}-pyrexia\n"
                )

    return f


def pytest_addoption(parser):
    parser.addoption(
        "--pin",
        action="store_true",
        default=False,
        help="Record observed values of pinned regressions to pins.toml",
    )


@pytest.fixture
def pinned(request):
    """
    Compare a value against the one recorded in `fixtures/pins.toml`,
    or record it there when running with `--pin`
    """

    record = request.config.getoption("--pin")

    def f(section, name, value, tolerance=1e-3):
        pins = toml.load(PINS) if PINS.exists() else {}
        table = pins.setdefault(section, {})
        if record:
            table[name] = value
            with open(PINS, "w") as stream:
                toml.dump(pins, stream)
            return

        if name not in table:
            pytest.skip(f"No value pinned for {section}.{name}, run --pin")
        assert value == pytest.approx(table[name], abs=tolerance)

    return f
