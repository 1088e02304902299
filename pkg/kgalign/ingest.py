"""
Readers and writers for the two on-disk formats: ontologies
in a constrained subset of Turtle and alignments as TSV
"""

import io
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import (
    TYPE_CHECKING,
    Dict,
    Iterable,
    List,
    NamedTuple,
    Optional,
    TextIO,
    Tuple,
    Union,
)

from rdflib.namespace import OWL, RDF, RDFS, SKOS

from kgalign.logging import logger
from kgalign.model import (
    ABSOLUTE_IRI,
    Alignment,
    Axiom,
    DisjointWith,
    Entity,
    EntityKind,
    EquivalentClass,
    Iri,
    KnowledgeGraph,
    Label,
    Mapping,
    MappingKey,
    Relation,
    SubClassOf,
)

if TYPE_CHECKING:
    from kgalign.selector import ScoredMapping


class Severity(str, Enum):
    ERROR = "Error"
    WARNING = "Warning"


@dataclass(frozen=True)
class ParseDiagnostic:
    path: str
    line: int
    column: int
    message: str
    severity: Severity = Severity.ERROR

    def __str__(self) -> str:
        return "{}:{}:{}: {}: {}".format(
            self.path,
            self.line,
            self.column,
            self.severity.value.lower(),
            self.message,
        )


class ParseError(ValueError):
    def __init__(self, diagnostics: Iterable[ParseDiagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__(
            "\n".join(
                str(d)
                for d in self.diagnostics
                if d.severity is Severity.ERROR
            )
        )


Source = Union[str, TextIO]


def _read(source: Source) -> str:
    if isinstance(source, str):
        return source
    return source.read()


# vocabulary of the Turtle subset
_kinds = {
    str(OWL.Class): EntityKind.CLASS,
    str(OWL.ObjectProperty): EntityKind.OBJECT_PROPERTY,
    str(OWL.DatatypeProperty): EntityKind.DATA_PROPERTY,
    str(OWL.NamedIndividual): EntityKind.INDIVIDUAL,
}
_kind_names = {
    EntityKind.CLASS: "owl:Class",
    EntityKind.OBJECT_PROPERTY: "owl:ObjectProperty",
    EntityKind.DATA_PROPERTY: "owl:DatatypeProperty",
    EntityKind.INDIVIDUAL: "owl:NamedIndividual",
}
_axioms = {
    str(RDFS.subClassOf): SubClassOf,
    str(OWL.equivalentClass): EquivalentClass,
    str(OWL.disjointWith): DisjointWith,
}
_axiom_names = {
    SubClassOf: "rdfs:subClassOf",
    EquivalentClass: "owl:equivalentClass",
    DisjointWith: "owl:disjointWith",
}
_TYPE = str(RDF.type)
_LABEL = str(RDFS.label)
_ALT_LABEL = str(SKOS.altLabel)
_prefixes = {"owl": str(OWL), "rdfs": str(RDFS), "skos": str(SKOS)}

_token_pattern = re.compile(
    r"""
      (?P<ws>[ \t\r]+)
    | (?P<newline>\n)
    | (?P<comment>\#[^\n]*)
    | (?P<iri><[^<>"{}|^`\\\x00-\x20]*>)
    | (?P<literal>"(?:[^"\\\n]|\\.)*"(?:@[A-Za-z]+(?:-[A-Za-z0-9]+)*)?)
    | (?P<directive>@prefix\b)
    | (?P<pname>(?:[A-Za-z][\w-]*)?:(?:[\w-]+(?:\.[\w-]+)*)?)
    | (?P<a>a(?=[\s<"\#]|$))
    | (?P<dot>\.)
    | (?P<other>[^\s.]+)
    """,
    re.VERBOSE,
)
_escapes = {'"': '"', "\\": "\\", "n": "\n", "t": "\t", "r": "\r"}


class Token(NamedTuple):
    kind: str
    text: str
    line: int
    column: int


class Term(NamedTuple):
    kind: str
    value: str
    lang: Optional[str]
    line: int
    column: int


class Statement(NamedTuple):
    subject: Token
    predicate: Token
    object: Token


def _tokenize(text: str):
    line, line_start = 1, 0
    for match in _token_pattern.finditer(text):
        kind = match.lastgroup
        column = match.start() - line_start + 1
        if kind == "newline":
            line += 1
            line_start = match.end()
        elif kind not in ("ws", "comment"):
            yield Token(kind, match.group(), line, column)


def _unescape(body: str) -> str:
    chars, i = [], 0
    while i < len(body):
        char = body[i]
        if char == "\\":
            try:
                chars.append(_escapes[body[i + 1]])
            except (KeyError, IndexError):
                raise ValueError(f"unsupported escape in literal {body!r}")
            i += 2
        else:
            chars.append(char)
            i += 1
    return "".join(chars)


class OntologyParser:
    """
    Two-pass parser for the Turtle subset. The first pass
    splits the token stream into prefix declarations and
    triple statements, the second resolves names and builds
    the graph, so declarations may follow their use.
    """

    def __init__(self, path: str = "<ontology>"):
        self.path = path
        self.diagnostics: List[ParseDiagnostic] = []

    @property
    def errors(self) -> List[ParseDiagnostic]:
        return [
            d for d in self.diagnostics if d.severity is Severity.ERROR
        ]

    def _report(self, where, message: str, severity=Severity.ERROR):
        diagnostic = ParseDiagnostic(
            self.path, where.line, where.column, message, severity
        )
        if severity is Severity.WARNING:
            logger.warning(str(diagnostic))
        self.diagnostics.append(diagnostic)

    def _split(self, tokens: List[Token]):
        prefixes: Dict[str, Tuple[str, Token]] = {}
        statements: List[Statement] = []

        i = 0
        while i < len(tokens):
            # every statement runs up to the next terminating dot
            j = i
            while j < len(tokens) and tokens[j].kind != "dot":
                j += 1
            chunk = tokens[i:j]
            if j == len(tokens):
                self._report(chunk[-1], "statement is missing its final '.'")
                break

            first = chunk[0] if chunk else tokens[j]
            if not chunk:
                self._report(first, "empty statement")
            elif first.kind == "directive":
                self._split_prefix(chunk, prefixes)
            elif len(chunk) != 3:
                bad = next(
                    (t for t in chunk if t.kind == "other"),
                    chunk[min(3, len(chunk) - 1)],
                )
                self._report(
                    bad,
                    "expected 'subject predicate object .', found "
                    f"{len(chunk)} terms; abbreviations, blank nodes and "
                    "collections are not supported",
                )
            else:
                bad = [t for t in chunk if t.kind in ("other", "directive")]
                if bad:
                    self._report(bad[0], f"unexpected token '{bad[0].text}'")
                else:
                    statements.append(Statement(*chunk))
            i = j + 1
        return prefixes, statements

    def _split_prefix(self, chunk: List[Token], prefixes):
        if (
            len(chunk) != 3
            or chunk[1].kind != "pname"
            or not chunk[1].text.endswith(":")
            or chunk[2].kind != "iri"
        ):
            self._report(chunk[0], "malformed @prefix declaration")
            return

        name, namespace = chunk[1].text[:-1], chunk[2].text[1:-1]
        if name in prefixes and prefixes[name][0] != namespace:
            self._report(
                chunk[1], f"prefix '{name}:' declared with two namespaces"
            )
            return
        prefixes[name] = (namespace, chunk[1])

    def _resolve(self, token: Token, prefixes) -> Optional[Term]:
        if token.kind == "literal":
            body, _, lang = token.text[1:].rpartition('"')
            try:
                value = _unescape(body)
            except ValueError as e:
                self._report(token, str(e))
                return None
            lang = lang[1:] if lang else None
            return Term("literal", value, lang, token.line, token.column)
        elif token.kind == "a":
            return Term("iri", _TYPE, None, token.line, token.column)
        elif token.kind == "iri":
            iri = token.text[1:-1]
        elif token.kind == "pname":
            name, _, local = token.text.partition(":")
            try:
                namespace = prefixes[name][0]
            except KeyError:
                self._report(token, f"undeclared prefix '{name}:'")
                return None
            iri = namespace + local
        else:
            self._report(token, f"unexpected token '{token.text}'")
            return None

        if not ABSOLUTE_IRI.match(iri):
            self._report(token, f"IRI '{iri}' is not absolute")
            return None
        return Term("iri", iri, None, token.line, token.column)

    def parse(self, source: Source, id: str) -> KnowledgeGraph:
        text = _read(source)
        prefixes, statements = self._split(list(_tokenize(text)))

        triples = []
        for statement in statements:
            terms = [self._resolve(t, prefixes) for t in statement]
            if None in terms:
                continue
            subject, predicate, obj = terms
            if subject.kind != "iri":
                self._report(subject, "subject must be an IRI")
            elif predicate.kind != "iri":
                self._report(predicate, "predicate must be an IRI")
            else:
                triples.append((subject, predicate, obj))

        kinds = self._collect_kinds(triples)
        entities = self._collect_labels(triples, kinds)
        axioms = self._collect_axioms(triples, kinds)
        if self.errors:
            raise ParseError(self.diagnostics)

        kg = KnowledgeGraph(id, entities, tuple(axioms))
        logger.info(
            "Parsed ontology '{}' from {} with {} entities "
            "and {} axioms".format(
                id, self.path, len(kg.entities), len(kg.axioms)
            )
        )
        return kg

    def _collect_kinds(self, triples) -> Dict[str, EntityKind]:
        kinds = {}
        for subject, predicate, obj in triples:
            if predicate.value != _TYPE:
                continue
            kind = _kinds.get(obj.value) if obj.kind == "iri" else None
            if kind is None:
                self._report(
                    obj,
                    f"ignoring unsupported type '{obj.value}'",
                    Severity.WARNING,
                )
                continue

            existing = kinds.setdefault(subject.value, kind)
            if existing is not kind:
                self._report(
                    subject,
                    "entity {} declared as both {} and {}".format(
                        subject.value, existing.value, kind.value
                    ),
                )
        return kinds

    def _collect_labels(self, triples, kinds) -> Dict[Iri, Entity]:
        labels = {iri: [] for iri in kinds}
        alternates = {iri: [] for iri in kinds}
        for subject, predicate, obj in triples:
            if predicate.value == _LABEL:
                target = labels
            elif predicate.value == _ALT_LABEL:
                target = alternates
            else:
                continue

            if obj.kind != "literal":
                self._report(obj, "label object must be a literal")
            elif not obj.value:
                self._report(obj, "label text must be non-empty")
            elif subject.value not in kinds:
                self._report(
                    subject,
                    f"ignoring label of undeclared entity {subject.value}",
                    Severity.WARNING,
                )
            else:
                target[subject.value].append(Label(obj.value, obj.lang))

        entities = {}
        for iri, kind in kinds.items():
            merged = list(dict.fromkeys(labels[iri] + alternates[iri]))
            entities[Iri(iri)] = Entity(Iri(iri), kind, tuple(merged))
        return entities

    def _collect_axioms(self, triples, kinds) -> List[Axiom]:
        axioms = {}
        for subject, predicate, obj in triples:
            if predicate.value in (_TYPE, _LABEL, _ALT_LABEL):
                continue

            axiom_type = _axioms.get(predicate.value)
            if axiom_type is None:
                self._report(
                    predicate,
                    f"ignoring unrecognized predicate '{predicate.value}'",
                    Severity.WARNING,
                )
                continue

            if obj.kind != "iri":
                self._report(obj, "axiom object must be an IRI")
                continue
            for term in (subject, obj):
                if kinds.get(term.value) is not EntityKind.CLASS:
                    self._report(
                        term, f"{term.value} is not declared as a class"
                    )
                    break
            else:
                axiom = axiom_type(Iri(subject.value), Iri(obj.value))
                axioms.setdefault(axiom, None)
        return list(axioms)


def parse_ontology(
    source: Source, id: str, path: str = "<ontology>"
) -> KnowledgeGraph:
    """Parse a Turtle-subset ontology, raising `ParseError` on errors"""
    return OntologyParser(path).parse(source, id)


def load_ontology(
    path: Union[str, Path], id: Optional[str] = None
) -> KnowledgeGraph:
    path = Path(path)
    text = _decode(path)
    return parse_ontology(text, id or path.stem, str(path))


def _decode(path: Path) -> str:
    data = path.read_bytes()
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as e:
        prefix = data[: e.start]
        line = prefix.count(b"\n") + 1
        column = e.start - (prefix.rfind(b"\n") + 1) + 1
        raise ParseError(
            [ParseDiagnostic(str(path), line, column, "input is not UTF-8")]
        )


def _escape(text: str) -> str:
    return (
        text.replace("\\", "\\\\")
        .replace('"', '\\"')
        .replace("\n", "\\n")
        .replace("\t", "\\t")
        .replace("\r", "\\r")
    )


def _literal(label: Label) -> str:
    literal = f'"{_escape(label.text)}"'
    if label.lang:
        literal += f"@{label.lang}"
    return literal


def serialize_ontology(kg: KnowledgeGraph) -> str:
    """
    Emit `kg` in the Turtle subset with prefixes, entities
    and axioms each in sorted order, so that equal graphs
    always serialize to identical text
    """

    lines = [
        f"@prefix {name}: <{namespace}> ."
        for name, namespace in sorted(_prefixes.items())
    ]

    if kg.entities:
        lines.append("")
    for iri in sorted(kg.entities):
        entity = kg.entities[iri]
        lines.append(f"<{iri}> a {_kind_names[entity.kind]} .")
        for i, label in enumerate(entity.labels):
            predicate = "rdfs:label" if i == 0 else "skos:altLabel"
            lines.append(f"<{iri}> {predicate} {_literal(label)} .")

    if kg.axioms:
        lines.append("")
    for axiom in kg.axioms:
        left, right = axiom.operands
        name = _axiom_names[type(axiom)]
        lines.append(f"<{left}> {name} <{right}> .")
    return "\n".join(lines) + "\n"


_relations = {r.symbol: r for r in Relation}
_confidence_pattern = re.compile(r"^[0-9]+(?:\.[0-9]{1,6})?$")
_score_pattern = re.compile(r"^[0-9]+(?:\.[0-9]+)?(?:[eE][-+]?[0-9]+)?$")


def read_alignment(
    source: Source, path: str = "<alignment>"
) -> Alignment:
    """
    Read an alignment TSV with rows of the form
    `source<TAB>target<TAB>relation<TAB>confidence`,
    optionally followed by `status<TAB>score` annotations
    """

    from kgalign.selector import Status

    statuses = {s.value for s in Status}
    diagnostics, mappings = [], {}

    def error(line, column, message):
        diagnostics.append(ParseDiagnostic(path, line, column, message))

    text = _read(source)
    for number, row in enumerate(text.split("\n"), 1):
        row = row.rstrip("\r")
        if not row.strip() or row.startswith("#"):
            continue

        fields = row.split("\t")
        if len(fields) not in (4, 6):
            error(number, 1, f"expected 4 or 6 columns, found {len(fields)}")
            continue

        columns = [1]
        for value in fields[:-1]:
            columns.append(columns[-1] + len(value) + 1)

        source_iri, target_iri, symbol, confidence = fields[:4]
        try:
            source_iri, target_iri = Iri(source_iri), Iri(target_iri)
        except ValueError as e:
            error(number, 1, str(e))
            continue

        relation = _relations.get(symbol)
        if relation is None:
            error(number, columns[2], f"unknown relation symbol '{symbol}'")
            continue
        if not _confidence_pattern.match(confidence):
            error(number, columns[3], f"unparsable confidence '{confidence}'")
            continue
        value = float(confidence)
        if not 0 <= value <= 1:
            error(number, columns[3], "confidence out of range")
            continue

        if len(fields) == 6:
            status, score = fields[4:]
            if status not in statuses:
                error(number, columns[4], f"unknown status '{status}'")
                continue
            if not _score_pattern.match(score):
                error(number, columns[5], f"unparsable score '{score}'")
                continue

        key = MappingKey(source_iri, target_iri, relation)
        if key in mappings:
            error(number, 1, f"duplicate mapping {key}")
            continue
        mappings[key] = Mapping(source_iri, target_iri, relation, value)

    if diagnostics:
        raise ParseError(diagnostics)
    return Alignment(tuple(mappings.values()))


def load_alignment(path: Union[str, Path]) -> Alignment:
    path = Path(path)
    return read_alignment(_decode(path), str(path))


def write_alignment(
    a: Alignment, with_scores: Optional[Iterable["ScoredMapping"]] = None
) -> str:
    scores = {}
    if with_scores is not None:
        scores = {s.mapping.key: s for s in with_scores}

    header = "# source\ttarget\trelation\tconfidence"
    if scores:
        header += "\tstatus\tscore"

    stream = io.StringIO()
    stream.write(header + "\n")
    for mapping in a:
        fields = [
            mapping.source,
            mapping.target,
            mapping.relation.symbol,
            f"{mapping.confidence:.6f}",
        ]
        scored = scores.get(mapping.key)
        if scored is not None:
            fields += [scored.status.value, f"{scored.objective_score:.6f}"]
        stream.write("\t".join(fields) + "\n")
    return stream.getvalue()
