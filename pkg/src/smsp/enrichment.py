"""Derived-relation injection into the support ontology.

Three derivation cases run to a fixed point:

* case 1: a direct cross-SOP correspondence whose endpoints are both
  anchored injects its relation type between the two anchor concepts.
* case 2: concepts with no direct correspondence but equivalent partners
  that are themselves related inherit that relation (neighbour rule).
* case 3: composite concepts whose part_of children fully match through
  synonym/equivalence correspondences become equivalent (sub-concept rule);
  unanchored composites (policy nodes) yield a derived correspondence
  instead of a support-ontology edge.

Each fixed-point pass evaluates all three cases against the pass-start
state and applies the results at the end of the pass, so a case-2 premise
created by case 1 is picked up one pass later. Derived relations only ever
grow the relation set (monotone), which bounds the loop by the finite pair
space. Existing triples are never re-injected and never change confidence
during enrichment.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .alignment import (ConceptRef, Correspondence, CorrespondenceOntology, Derivation)
from .ontology import (Ontology, Provenance, Relation, RelType, SEMANTIC_TYPES,
                       add_relation)
from .similarity import Anchor
from .sop import SopResult, part_of_children

_CASE_PROVENANCE = {1: Provenance.CASE1, 2: Provenance.CASE2, 3: Provenance.CASE3}
_EQUIV_TYPES = (RelType.SYNONYM_OF, RelType.EQUIVALENT_TO)


@dataclass(frozen=True)
class InjectionReport:
    injected: tuple[Relation, ...] = ()
    derived_correspondences: tuple[Correspondence, ...] = ()
    skipped_duplicates: int = 0
    iterations: int = 0

    def merged_with(self, other: "InjectionReport") -> "InjectionReport":
        return InjectionReport(
            self.injected + other.injected,
            self.derived_correspondences + other.derived_correspondences,
            self.skipped_duplicates + other.skipped_duplicates,
            max(self.iterations, other.iterations))


@dataclass(frozen=True)
class EnrichmentResult:
    ontology: Ontology
    correspondences: CorrespondenceOntology
    report: InjectionReport


def _clamp(x: float) -> float:
    return min(1.0, max(0.0, x))


class _Workspace:
    """Read-only view of one fixed-point pass: SO, corr and SOP indexes."""

    def __init__(self, so: Ontology, corr: CorrespondenceOntology,
                 sops: Sequence[SopResult], damping: float = 0.95):
        self.so = so
        self.corr = corr
        self.damping = damping
        self.sops = sorted(sops, key=lambda r: r.sop.id)
        self._sop_by_id = {res.sop.id: res.sop for res in self.sops}
        self.refs: list[tuple[ConceptRef, object]] = []
        for res in self.sops:
            for c in res.sop.concepts:
                self.refs.append((ConceptRef(res.sop.id, c.id), c))
        self.anchors = corr.anchors
        self.corr_adjacent: dict[ConceptRef, list[Correspondence]] = {}
        for e in corr.entries:
            self.corr_adjacent.setdefault(e.left, []).append(e)
            self.corr_adjacent.setdefault(e.right, []).append(e)

    def sop_for(self, sid: str) -> Ontology:
        return self._sop_by_id[sid]

    def anchor_id(self, ref: ConceptRef) -> Optional[str]:
        anchor = self.anchors.get(ref)
        return anchor.support_concept if anchor else None

    def anchor_score(self, ref: ConceptRef) -> float:
        anchor = self.anchors.get(ref)
        return anchor.score if anchor else 1.0

    def has_direct(self, a: ConceptRef, b: ConceptRef) -> bool:
        return any(e.pair() == frozenset((a, b)) for e in self.corr_adjacent.get(a, ()))

    def equivalents(self, ref: ConceptRef) -> list[tuple[ConceptRef, float]]:
        """Concepts equivalent to ``ref`` through corr edges or through the
        support ontology (equal anchors, or anchors joined by an equivalence
        edge)."""
        out: dict[ConceptRef, float] = {}
        for e in self.corr_adjacent.get(ref, ()):
            if e.rel_type in _EQUIV_TYPES:
                other = e.right if e.left == ref else e.left
                out[other] = max(out.get(other, 0.0), e.confidence)
        my_anchor = self.anchor_id(ref)
        if my_anchor is not None:
            for other_ref, _ in self.refs:
                if other_ref == ref:
                    continue
                other_anchor = self.anchor_id(other_ref)
                if other_anchor is None:
                    continue
                if other_anchor == my_anchor:
                    conf = min(self.anchor_score(ref), self.anchor_score(other_ref))
                    out[other_ref] = max(out.get(other_ref, 0.0), conf)
                else:
                    for rel in self.so.relation_between(my_anchor, other_anchor):
                        if rel.rel_type in _EQUIV_TYPES:
                            conf = min(self.anchor_score(ref),
                                       self.anchor_score(other_ref), rel.confidence)
                            out[other_ref] = max(out.get(other_ref, 0.0), conf)
        return sorted(out.items(), key=lambda kv: kv[0].key())

    def relations_between(self, a: ConceptRef, b: ConceptRef
                          ) -> list[tuple[RelType, float]]:
        """Semantic relations between two concepts, from corr or from the
        support ontology between their anchors."""
        found: dict[RelType, float] = {}
        for e in self.corr_adjacent.get(a, ()):
            if e.pair() == frozenset((a, b)) and e.rel_type in SEMANTIC_TYPES:
                found[e.rel_type] = max(found.get(e.rel_type, 0.0), e.confidence)
        anchor_a, anchor_b = self.anchor_id(a), self.anchor_id(b)
        if anchor_a and anchor_b and anchor_a != anchor_b:
            for rel in self.so.relation_between(anchor_a, anchor_b):
                if rel.rel_type in SEMANTIC_TYPES:
                    conf = min(rel.confidence, self.anchor_score(a), self.anchor_score(b))
                    found[rel.rel_type] = max(found.get(rel.rel_type, 0.0), conf)
        return sorted(found.items(), key=lambda kv: kv[0].value)


def _so_has(so: Ontology, source: str, target: str, rel_type: RelType) -> bool:
    return so.has_relation(source, target, rel_type)


def enrich_case1(so: Ontology, corr: CorrespondenceOntology,
                 anchors: Mapping[ConceptRef, Anchor] | None = None) -> InjectionReport:
    """Inject direct correspondences between anchored concepts into the SO.

    A correspondence whose endpoints anchor to the same support concept is
    a no-op; an already-present triple counts as a skipped duplicate.
    """
    anchors = dict(anchors) if anchors is not None else corr.anchors
    injected: dict[tuple[str, str, str], Relation] = {}
    skipped = 0
    for e in corr.entries:
        if e.derivation not in (Derivation.ANCHORED, Derivation.SUPPORT_RELATION):
            continue
        anchor_l, anchor_r = anchors.get(e.left), anchors.get(e.right)
        if anchor_l is None or anchor_r is None:
            continue
        if anchor_l.support_concept == anchor_r.support_concept:
            continue
        rel = Relation(anchor_l.support_concept, anchor_r.support_concept,
                       e.rel_type, Provenance.CASE1, _clamp(e.confidence)).canonical()
        if _so_has(so, rel.source, rel.target, rel.rel_type) or rel.triple() in injected:
            skipped += 1
            continue
        injected[rel.triple()] = rel
    return InjectionReport(tuple(injected.values()), (), skipped)


def _derive_pairwise(ws: _Workspace, case: int) -> tuple[
        dict[tuple[str, str, str], Relation], list[Correspondence], int]:
    injected: dict[tuple[str, str, str], Relation] = {}
    derived: list[Correspondence] = []
    derived_seen: set[tuple] = set()
    skipped = 0

    for idx_a in range(len(ws.refs)):
        for idx_b in range(idx_a + 1, len(ws.refs)):
            ref_a, ca = ws.refs[idx_a]
            ref_b, cb = ws.refs[idx_b]
            if ref_a.sop_id == ref_b.sop_id or ca.kind is not cb.kind:
                continue
            if ws.has_direct(ref_a, ref_b):
                continue
            if case == 2:
                findings = _case2_findings(ws, ref_a, ref_b)
            else:
                findings = _case3_findings(ws, ref_a, ref_b)
            for rel_type, conf in findings:
                anchor_a, anchor_b = ws.anchor_id(ref_a), ws.anchor_id(ref_b)
                if anchor_a and anchor_b:
                    if anchor_a == anchor_b:
                        continue
                    rel = Relation(anchor_a, anchor_b, rel_type,
                                   _CASE_PROVENANCE[case], _clamp(conf)).canonical()
                    if (_so_has(ws.so, rel.source, rel.target, rel.rel_type)
                            or rel.triple() in injected):
                        skipped += 1
                        continue
                    injected[rel.triple()] = rel
                else:
                    key = (*ref_a.key(), *ref_b.key(), rel_type.value)
                    if key in derived_seen:
                        continue
                    derived_seen.add(key)
                    derived.append(Correspondence.make(
                        ref_a, ref_b, rel_type, _clamp(conf),
                        Derivation.R1 if case == 2 else Derivation.R2))
    return injected, derived, skipped


def _case2_findings(ws: _Workspace, ref_a: ConceptRef,
                    ref_b: ConceptRef) -> list[tuple[RelType, float]]:
    findings: dict[RelType, float] = {}
    for c1p, conf1 in ws.equivalents(ref_a):
        if c1p == ref_b:
            continue
        for c2p, conf2 in ws.equivalents(ref_b):
            if c2p == ref_a or c2p == c1p:
                continue
            for rel_type, rel_conf in ws.relations_between(c1p, c2p):
                conf = min(conf1, conf2, rel_conf) * ws.damping
                findings[rel_type] = max(findings.get(rel_type, 0.0), conf)
    return sorted(findings.items(), key=lambda kv: kv[0].value)


def _case3_findings(ws: _Workspace, ref_a: ConceptRef,
                    ref_b: ConceptRef) -> list[tuple[RelType, float]]:
    kids_a = part_of_children(ws.sop_for(ref_a.sop_id), ref_a.concept_id)
    kids_b = part_of_children(ws.sop_for(ref_b.sop_id), ref_b.concept_id)
    if not kids_a or not kids_b:
        return []
    if len(kids_a) > len(kids_b):
        ref_a, ref_b = ref_b, ref_a
        kids_a, kids_b = kids_b, kids_a
    small = [ConceptRef(ref_a.sop_id, k) for k in kids_a]
    large = [ConceptRef(ref_b.sop_id, k) for k in kids_b]

    edges: dict[int, list[tuple[int, RelType, float]]] = {}
    for i, ka in enumerate(small):
        for j, kb in enumerate(large):
            best: tuple[RelType, float] | None = None
            for e in ws.corr_adjacent.get(ka, ()):
                if e.pair() != frozenset((ka, kb)):
                    continue
                if e.rel_type in _EQUIV_TYPES:
                    if best is None or best[0] is RelType.RELATED_TO:
                        best = (e.rel_type, e.confidence)
                elif e.rel_type is RelType.RELATED_TO and best is None:
                    best = (e.rel_type, e.confidence)
            if best is not None:
                edges.setdefault(i, []).append((j, best[0], best[1]))

    # Max bipartite matching; the smaller child set must be fully covered.
    match_of: dict[int, tuple[int, RelType, float]] = {}

    def augment(i: int, visited: set[int]) -> bool:
        for j, rel_type, conf in edges.get(i, ()):
            if j in visited:
                continue
            visited.add(j)
            if j not in match_of or augment(match_of[j][0], visited):
                match_of[j] = (i, rel_type, conf)
                return True
        return False

    for i in range(len(small)):
        if not augment(i, set()):
            return []
    used = list(match_of.values())
    all_equiv = all(rel_type in _EQUIV_TYPES for _, rel_type, _ in used)
    rel = RelType.EQUIVALENT_TO if all_equiv else RelType.RELATED_TO
    conf = min(c for _, _, c in used) * ws.damping
    return [(rel, conf)]


def enrich_case2(so: Ontology, corr: CorrespondenceOntology,
                 sops: Sequence[SopResult], damping: float = 0.95) -> InjectionReport:
    """Neighbour rule: equivalent partners that are related make their
    counterparts related too."""
    ws = _Workspace(so, corr, sops, damping)
    injected, derived, skipped = _derive_pairwise(ws, 2)
    return InjectionReport(tuple(injected.values()), tuple(derived), skipped)


def enrich_case3(so: Ontology, corr: CorrespondenceOntology,
                 sops: Sequence[SopResult], damping: float = 0.95) -> InjectionReport:
    """Sub-concept rule over composite concepts' part_of children."""
    ws = _Workspace(so, corr, sops, damping)
    injected, derived, skipped = _derive_pairwise(ws, 3)
    return InjectionReport(tuple(injected.values()), tuple(derived), skipped)


def enrich_all(so: Ontology, sops: Sequence[SopResult],
               corr: CorrespondenceOntology, damping: float = 0.95,
               max_passes: int = 1000) -> EnrichmentResult:
    """Fixed point of case1, case2, case3 (in that order, batch per pass).

    ``report.iterations`` counts the productive passes. The relation set
    grows strictly on every productive pass and the pair space is finite,
    so the loop halts; ``max_passes`` is a defensive bound only.
    """
    all_injected: list[Relation] = []
    all_derived: list[Correspondence] = []
    skipped = 0
    iterations = 0
    for _ in range(max_passes):
        reports = [enrich_case1(so, corr),
                   enrich_case2(so, corr, sops, damping),
                   enrich_case3(so, corr, sops, damping)]
        new_rels: dict[tuple[str, str, str], Relation] = {}
        new_corr: list[Correspondence] = []
        corr_seen = {(*e.left.key(), *e.right.key(), e.rel_type.value)
                     for e in corr.entries}
        for rep in reports:
            skipped += rep.skipped_duplicates
            for rel in rep.injected:
                if so.has_relation(rel.source, rel.target, rel.rel_type):
                    skipped += 1
                elif rel.triple() in new_rels:
                    skipped += 1
                else:
                    new_rels[rel.triple()] = rel
            for e in rep.derived_correspondences:
                key = (*e.left.key(), *e.right.key(), e.rel_type.value)
                if key in corr_seen:
                    skipped += 1
                else:
                    corr_seen.add(key)
                    new_corr.append(e)
        if not new_rels and not new_corr:
            break
        for rel in new_rels.values():
            so = add_relation(so, rel)
        if new_corr:
            corr = corr.with_entries(new_corr)
        all_injected.extend(new_rels.values())
        all_derived.extend(new_corr)
        iterations += 1
    return EnrichmentResult(so, corr, InjectionReport(
        tuple(all_injected), tuple(all_derived), skipped, iterations))


def report_to_doc(report: InjectionReport) -> dict:
    return {
        "injected": [
            {"source": r.source, "target": r.target, "type": r.rel_type.value,
             "provenance": r.provenance.value, "confidence": r.confidence}
            for r in report.injected],
        "derived_correspondences": [
            {"left": {"sop_id": e.left.sop_id, "concept_id": e.left.concept_id},
             "right": {"sop_id": e.right.sop_id, "concept_id": e.right.concept_id},
             "type": e.rel_type.value, "confidence": e.confidence,
             "derivation": e.derivation.value}
            for e in report.derived_correspondences],
        "skipped_duplicates": report.skipped_duplicates,
        "iterations": report.iterations,
    }
