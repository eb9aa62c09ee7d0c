"""Ontology model, canonical on-disk format, Turtle export, taxonomy queries.

Ontologies are immutable values: every operation returns a new instance and
instances are safely shareable across threads. The canonical document is a
JSON object ``{id, concepts, relations}`` with concepts sorted by id and
relations sorted by (source, type, target); ``load`` after ``save`` is the
structural identity.

Turtle export emits an RDF subset with a fixed mapping (is_a to
rdfs:subClassOf, part_of to ex:partOf, synonym_of to ex:synonymOf,
homonym_of to ex:homonymOf, equivalent_to to owl:equivalentClass,
related_to to rdfs:seeAlso, labels to rdfs:label, concept kinds via
``a ex:<Kind>``). Which OWL constructs carry synonym/homonym information is
a convention of this tool, not an OWL standard; relation provenance and
confidence are not carried by Turtle, so re-import is isomorphic up to
those two attributes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional
from urllib.parse import quote


class ConceptKind(str, Enum):
    ACTION = "Action"
    DEONTIC = "DeonticOperator"
    ENTITY = "Entity"
    PREDICATE = "Predicate"
    POLICY = "Policy"
    GENERIC = "Generic"


class RelType(str, Enum):
    IS_A = "is_a"
    PART_OF = "part_of"
    SYNONYM_OF = "synonym_of"
    HOMONYM_OF = "homonym_of"
    EQUIVALENT_TO = "equivalent_to"
    RELATED_TO = "related_to"


SYMMETRIC_TYPES = frozenset({
    RelType.SYNONYM_OF, RelType.HOMONYM_OF, RelType.EQUIVALENT_TO, RelType.RELATED_TO,
})

#: Semantic relation types eligible for alignment/enrichment derivation.
SEMANTIC_TYPES = SYMMETRIC_TYPES

HIERARCHY_TYPES = frozenset({RelType.IS_A, RelType.PART_OF})


class Provenance(str, Enum):
    AUTHORED = "Authored"
    CASE1 = "Case1"
    CASE2 = "Case2"
    CASE3 = "Case3"
    SYNTACTIC_MATCH = "SyntacticMatch"
    EXPERT_DECISION = "ExpertDecision"


class OntologyError(Exception):
    pass


@dataclass(frozen=True)
class Concept:
    id: str
    labels: tuple[str, ...]
    kind: ConceptKind = ConceptKind.GENERIC

    def __post_init__(self):
        if not self.id or "#" not in self.id:
            raise OntologyError(f"concept id must be '<ontology>#<local>': {self.id!r}")
        if not self.labels:
            raise OntologyError(f"concept {self.id} must carry at least one label")
        for lab in self.labels:
            if not lab or lab != lab.strip():
                raise OntologyError(f"concept {self.id} has an empty or untrimmed label")
        if len(set(self.labels)) != len(self.labels):
            raise OntologyError(f"concept {self.id} has duplicate labels")

    @property
    def preferred_label(self) -> str:
        return self.labels[0]


@dataclass(frozen=True)
class Relation:
    source: str
    target: str
    rel_type: RelType
    provenance: Provenance = Provenance.AUTHORED
    confidence: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise OntologyError(f"confidence out of [0,1]: {self.confidence}")
        if self.provenance is Provenance.AUTHORED and self.confidence != 1.0:
            raise OntologyError(
                f"authored relation {self.triple()} must have confidence 1.0")
        if self.rel_type in SYMMETRIC_TYPES and self.source == self.target:
            raise OntologyError(
                f"symmetric relation may not be reflexive: {self.triple()}")

    def triple(self) -> tuple[str, str, str]:
        return (self.source, self.rel_type.value, self.target)

    def canonical(self) -> "Relation":
        """Symmetric relations are stored once, endpoints in lexicographic order."""
        if self.rel_type in SYMMETRIC_TYPES and self.source > self.target:
            return Relation(self.target, self.source, self.rel_type,
                            self.provenance, self.confidence)
        return self


def _find_cycle(edges: dict[str, list[str]]) -> Optional[list[str]]:
    state: dict[str, int] = {}
    stack: list[str] = []

    def visit(node: str) -> Optional[list[str]]:
        state[node] = 1
        stack.append(node)
        for nxt in edges.get(node, ()):
            if state.get(nxt, 0) == 1:
                return stack[stack.index(nxt):] + [nxt]
            if state.get(nxt, 0) == 0:
                found = visit(nxt)
                if found:
                    return found
        stack.pop()
        state[node] = 2
        return None

    for start in sorted(edges):
        if state.get(start, 0) == 0:
            found = visit(start)
            if found:
                return found
    return None


class Ontology:
    """Immutable set of concepts plus typed, provenance-carrying relations."""

    def __init__(self, id: str, concepts: Iterable[Concept] = (),
                 relations: Iterable[Relation] = ()):
        if not id:
            raise OntologyError("ontology id must be non-empty")
        self.id = id
        by_id: dict[str, Concept] = {}
        for c in concepts:
            if c.id in by_id:
                raise OntologyError(f"duplicate concept id {c.id}")
            by_id[c.id] = c
        self._concepts = dict(sorted(by_id.items()))
        rels: dict[tuple[str, str, str], Relation] = {}
        for r in relations:
            r = r.canonical()
            if r.triple() in rels:
                raise OntologyError(f"duplicate relation triple {r.triple()}")
            for end in (r.source, r.target):
                if end not in self._concepts:
                    raise OntologyError(
                        f"relation {r.triple()} references missing concept {end!r}")
            rels[r.triple()] = r
        self._relations = {
            k: rels[k] for k in sorted(rels, key=lambda t: (t[0], t[1], t[2]))}
        for rel_type in (RelType.IS_A, RelType.PART_OF):
            cycle = _find_cycle(self._edges(rel_type))
            if cycle:
                raise OntologyError(
                    f"{rel_type.value} cycle: {' -> '.join(cycle)}")

    def _edges(self, rel_type: RelType) -> dict[str, list[str]]:
        edges: dict[str, list[str]] = {}
        for r in self._relations.values():
            if r.rel_type is rel_type:
                edges.setdefault(r.source, []).append(r.target)
        for targets in edges.values():
            targets.sort()
        return edges

    @property
    def concepts(self) -> tuple[Concept, ...]:
        return tuple(self._concepts.values())

    @property
    def relations(self) -> tuple[Relation, ...]:
        return tuple(self._relations.values())

    def __contains__(self, concept_id: str) -> bool:
        return concept_id in self._concepts

    def get(self, concept_id: str) -> Concept:
        try:
            return self._concepts[concept_id]
        except KeyError:
            raise OntologyError(f"unknown concept id {concept_id!r}") from None

    def find(self, concept_id: str) -> Optional[Concept]:
        return self._concepts.get(concept_id)

    def has_relation(self, source: str, target: str, rel_type: RelType) -> bool:
        probe = (source, rel_type.value, target)
        if probe in self._relations:
            return True
        if rel_type in SYMMETRIC_TYPES:
            return (target, rel_type.value, source) in self._relations
        return False

    def relation_between(self, a: str, b: str) -> tuple[Relation, ...]:
        out = []
        for r in self._relations.values():
            if {r.source, r.target} == {a, b}:
                out.append(r)
        return tuple(out)

    def relations_of(self, rel_type: RelType) -> tuple[Relation, ...]:
        return tuple(r for r in self._relations.values() if r.rel_type is rel_type)

    def with_concepts(self, extra: Iterable[Concept]) -> "Ontology":
        merged = dict(self._concepts)
        for c in extra:
            merged[c.id] = c
        return Ontology(self.id, merged.values(), self._relations.values())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Ontology):
            return NotImplemented
        return (self.id == other.id and self._concepts == other._concepts
                and self._relations == other._relations)

    def __hash__(self):
        return hash((self.id, tuple(self._concepts), tuple(self._relations)))

    def __repr__(self):
        return (f"Ontology({self.id!r}, {len(self._concepts)} concepts, "
                f"{len(self._relations)} relations)")


def add_relation(o: Ontology, r: Relation) -> Ontology:
    """Return the ontology with ``r`` added (canonicalized, deduplicated).

    Adding an existing triple is a no-op that keeps the higher confidence.
    Hierarchy edges are re-checked for acyclicity; a cycle is an error.
    """
    r = r.canonical()
    for end in (r.source, r.target):
        if end not in o:
            raise OntologyError(f"relation {r.triple()} references missing concept {end!r}")
    existing = {rel.triple(): rel for rel in o.relations}
    prior = existing.get(r.triple())
    if prior is not None:
        if r.confidence <= prior.confidence:
            return o
        existing[r.triple()] = r
        return Ontology(o.id, o.concepts, existing.values())
    existing[r.triple()] = r
    return Ontology(o.id, o.concepts, existing.values())


# ---------------------------------------------------------------------------
# Canonical document format
# ---------------------------------------------------------------------------

def canonical_json_bytes(doc: object) -> bytes:
    return (json.dumps(doc, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def ontology_to_doc(o: Ontology) -> dict:
    return {
        "id": o.id,
        "concepts": [
            {"id": c.id, "labels": list(c.labels), "kind": c.kind.value}
            for c in o.concepts],
        "relations": [
            {"source": r.source, "target": r.target, "type": r.rel_type.value,
             "provenance": r.provenance.value, "confidence": r.confidence}
            for r in o.relations],
    }


def save_ontology(o: Ontology) -> bytes:
    return canonical_json_bytes(ontology_to_doc(o))


def _enum_value(enum_cls, raw, what: str):
    try:
        return enum_cls(raw)
    except ValueError:
        valid = ", ".join(e.value for e in enum_cls)
        raise OntologyError(f"invalid {what} {raw!r} (expected one of: {valid})") from None


def ontology_from_doc(doc: object) -> Ontology:
    if not isinstance(doc, dict):
        raise OntologyError("ontology document must be an object")
    for key in ("id", "concepts", "relations"):
        if key not in doc:
            raise OntologyError(f"ontology document missing field '{key}'")
    if not isinstance(doc["id"], str):
        raise OntologyError("ontology id must be a string")
    concepts = []
    if not isinstance(doc["concepts"], list):
        raise OntologyError("'concepts' must be an array")
    for entry in doc["concepts"]:
        if not isinstance(entry, dict):
            raise OntologyError("concept entry must be an object")
        labels = entry.get("labels")
        if not isinstance(labels, list) or any(not isinstance(x, str) for x in labels):
            raise OntologyError(
                f"concept {entry.get('id')!r}: 'labels' must be an array of strings")
        concepts.append(Concept(
            id=entry.get("id", ""),
            labels=tuple(labels),
            kind=_enum_value(ConceptKind, entry.get("kind", "Generic"), "concept kind"),
        ))
    relations = []
    if not isinstance(doc["relations"], list):
        raise OntologyError("'relations' must be an array")
    for entry in doc["relations"]:
        if not isinstance(entry, dict):
            raise OntologyError("relation entry must be an object")
        rel_type = _enum_value(RelType, entry.get("type"), "relation type")
        source, target = entry.get("source"), entry.get("target")
        if not isinstance(source, str) or not isinstance(target, str):
            raise OntologyError("relation 'source'/'target' must be strings")
        if rel_type in SYMMETRIC_TYPES and source > target:
            raise OntologyError(
                f"symmetric relation ({source}, {rel_type.value}, {target}) must be "
                f"stored with source < target")
        confidence = entry.get("confidence", 1.0)
        if not isinstance(confidence, (int, float)):
            raise OntologyError("relation 'confidence' must be a number")
        relations.append(Relation(
            source=source, target=target, rel_type=rel_type,
            provenance=_enum_value(Provenance, entry.get("provenance", "Authored"),
                                   "relation provenance"),
            confidence=float(confidence),
        ))
    return Ontology(doc["id"], concepts, relations)


def load_ontology(data: bytes | str) -> Ontology:
    """Load the canonical ontology document; invariant violations are rejected."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise OntologyError(f"malformed ontology document: {exc}") from exc
    return ontology_from_doc(doc)


# ---------------------------------------------------------------------------
# Turtle export / subset import
# ---------------------------------------------------------------------------

_PREFIX_BLOCK = (
    "@prefix ex: <http://smsp.example/schema#> .\n"
    "@prefix owl: <http://www.w3.org/2002/07/owl#> .\n"
    "@prefix rdfs: <http://www.w3.org/2000/01/rdf-schema#> .\n"
)

_TURTLE_PREDICATE = {
    RelType.IS_A: "rdfs:subClassOf",
    RelType.PART_OF: "ex:partOf",
    RelType.SYNONYM_OF: "ex:synonymOf",
    RelType.HOMONYM_OF: "ex:homonymOf",
    RelType.EQUIVALENT_TO: "owl:equivalentClass",
    RelType.RELATED_TO: "rdfs:seeAlso",
}

_PREDICATE_RELTYPE = {v: k for k, v in _TURTLE_PREDICATE.items()}

_IRI_BASE = "http://smsp.example/ontology/"


def _concept_iri(concept_id: str) -> str:
    doc_part, local = concept_id.split("#", 1)
    return f"<{_IRI_BASE}{quote(doc_part, safe='')}#{quote(local, safe='')}>"


def _iri_to_concept_id(iri: str) -> str:
    body = iri[1:-1]
    if not body.startswith(_IRI_BASE) or "#" not in body:
        raise OntologyError(f"unsupported IRI {iri!r}")
    from urllib.parse import unquote
    doc_part, local = body[len(_IRI_BASE):].split("#", 1)
    return f"{unquote(doc_part)}#{unquote(local)}"


def _escape_literal(text: str) -> str:
    return (text.replace("\\", "\\\\").replace('"', '\\"')
            .replace("\n", "\\n").replace("\r", "\\r").replace("\t", "\\t"))


def _unescape_literal(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\" and i + 1 < len(text):
            nxt = text[i + 1]
            out.append({"n": "\n", "r": "\r", "t": "\t", '"': '"', "\\": "\\"}.get(nxt, nxt))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def export_turtle(o: Ontology) -> bytes:
    """Deterministic Turtle: one prefix block, subjects sorted by concept id."""
    out = [_PREFIX_BLOCK]
    by_source: dict[str, list[Relation]] = {}
    for r in o.relations:
        by_source.setdefault(r.source, []).append(r)
    for c in o.concepts:
        lines = [f"{_concept_iri(c.id)} a ex:{c.kind.value}"]
        for label in c.labels:
            lines.append(f'    rdfs:label "{_escape_literal(label)}"')
        for r in sorted(by_source.get(c.id, ()),
                        key=lambda r: (_TURTLE_PREDICATE[r.rel_type], r.target)):
            lines.append(f"    {_TURTLE_PREDICATE[r.rel_type]} {_concept_iri(r.target)}")
        out.append("\n" + " ;\n".join(lines) + " .\n")
    return "".join(out).encode("utf-8")


def import_turtle(data: bytes | str, ontology_id: str) -> Ontology:
    """Read Turtle produced by :func:`export_turtle` (this subset only).

    Relations come back with Authored provenance and confidence 1.0; Turtle
    does not carry those attributes.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    concepts: list[Concept] = []
    relations: list[Relation] = []
    subject: str | None = None
    kind: ConceptKind | None = None
    labels: list[str] = []
    pending: list[tuple[str, str, RelType]] = []

    def flush():
        nonlocal subject, kind, labels
        if subject is not None:
            concepts.append(Concept(subject, tuple(labels), kind or ConceptKind.GENERIC))
        subject, kind, labels = None, None, []

    for raw in data.splitlines():
        line = raw.strip()
        if not line or line.startswith("@prefix"):
            continue
        terminal = line[-1]
        if terminal not in ";.":
            raise OntologyError(f"unsupported turtle line: {raw!r}")
        stmt = line[:-1].strip()
        if stmt.startswith("<"):
            flush()
            iri, rest = stmt.split(">", 1)
            subject = _iri_to_concept_id(iri + ">")
            stmt = rest.strip()
        if subject is None:
            raise OntologyError(f"statement outside a subject block: {raw!r}")
        if stmt.startswith("a "):
            kind = _enum_value(ConceptKind, stmt[2:].strip().removeprefix("ex:"),
                               "concept kind")
        elif stmt.startswith("rdfs:label "):
            literal = stmt[len("rdfs:label "):].strip()
            if not (literal.startswith('"') and literal.endswith('"')):
                raise OntologyError(f"unsupported label literal: {stmt!r}")
            labels.append(_unescape_literal(literal[1:-1]))
        else:
            pred, _, obj = stmt.partition(" ")
            if pred not in _PREDICATE_RELTYPE:
                raise OntologyError(f"unsupported predicate {pred!r}")
            pending.append((subject, _iri_to_concept_id(obj.strip()),
                            _PREDICATE_RELTYPE[pred]))
        if terminal == ".":
            flush()
    flush()
    relations = [Relation(s, t, rt) for s, t, rt in pending]
    return Ontology(ontology_id, concepts, relations)


# ---------------------------------------------------------------------------
# Taxonomy queries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TaxonomyInfo:
    lca: Optional[str]
    depth1: int
    depth2: int
    depth_lca: int


def _is_a_parents(o: Ontology) -> dict[str, tuple[str, ...]]:
    parents: dict[str, list[str]] = {c.id: [] for c in o.concepts}
    for r in o.relations:
        if r.rel_type is RelType.IS_A:
            parents[r.source].append(r.target)
    return {k: tuple(sorted(v)) for k, v in parents.items()}


def _depths(o: Ontology) -> dict[str, int]:
    parents = _is_a_parents(o)
    memo: dict[str, int] = {}

    def depth(node: str) -> int:
        if node not in memo:
            ps = parents[node]
            memo[node] = 0 if not ps else 1 + max(depth(p) for p in ps)
        return memo[node]

    return {cid: depth(cid) for cid in parents}


def _ancestors(o: Ontology, node: str) -> set[str]:
    parents = _is_a_parents(o)
    seen: set[str] = set()
    stack = [node]
    while stack:
        cur = stack.pop()
        if cur in seen:
            continue
        seen.add(cur)
        stack.extend(parents[cur])
    return seen


def taxonomy_query(o: Ontology, c1: str, c2: str) -> TaxonomyInfo:
    """Longest-path depths and the deepest common is_a ancestor.

    Depth is the length of the longest is_a path to a root (a node with no
    outgoing is_a edge); the conservative choice under multiple inheritance.
    LCA ties are broken by smallest concept id for determinism.
    """
    o.get(c1), o.get(c2)
    depths = _depths(o)
    common = _ancestors(o, c1) & _ancestors(o, c2)
    if not common:
        return TaxonomyInfo(None, depths[c1], depths[c2], 0)
    lca = sorted(common, key=lambda n: (-depths[n], n))[0]
    return TaxonomyInfo(lca, depths[c1], depths[c2], depths[lca])
