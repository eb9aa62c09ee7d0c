"""Cross-SOP alignment over a support ontology, plus conflict classification.

For every cross-SOP pair of same-kind concepts:

(a) both anchored to the same support concept: equivalent_to when the
    preferred labels are equal, synonym_of when they differ (Anchored);
(b) both anchored, to distinct support concepts, with equal labels and
    semantic similarity at or below the homonym ceiling: homonym_of
    (SupportRelation);
(c) otherwise, when at least one side is unanchored and the syntactic
    similarity reaches the threshold: equivalent_to for equal labels, else
    a synonym_of candidate flagged needs-confirmation (SyntacticCandidate).

Candidates are never promoted to conflicts without expert confirmation;
conflict classification therefore skips SyntacticCandidate entries.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

from .ontology import (Concept, ConceptKind, Ontology, Provenance, RelType)
from .policy import Modality, PolicySet, PolicyRule, RefKind
from .similarity import Anchor, SimilarityConfig, anchor_concept, semantic_similarity, \
    syntactic_similarity
from .sop import SopResult, concept_id, sop_id


class Derivation(str, Enum):
    ANCHORED = "Anchored"
    SUPPORT_RELATION = "SupportRelation"
    R1 = "R1"
    R2 = "R2"
    SYNTACTIC_CANDIDATE = "SyntacticCandidate"


class AlignmentError(Exception):
    pass


@dataclass(frozen=True, order=True)
class ConceptRef:
    sop_id: str
    concept_id: str

    def key(self) -> tuple[str, str]:
        return (self.sop_id, self.concept_id)


@dataclass(frozen=True)
class Correspondence:
    left: ConceptRef
    right: ConceptRef
    rel_type: RelType
    confidence: float
    derivation: Derivation
    needs_confirmation: bool = False

    def __post_init__(self):
        if self.left.sop_id == self.right.sop_id:
            raise AlignmentError(
                f"correspondence endpoints must come from distinct SOPs: "
                f"{self.left} / {self.right}")
        if self.left.key() > self.right.key():
            raise AlignmentError("correspondence endpoints must be canonically ordered")
        if not 0.0 <= self.confidence <= 1.0:
            raise AlignmentError(f"confidence out of [0,1]: {self.confidence}")

    @staticmethod
    def make(a: ConceptRef, b: ConceptRef, rel_type: RelType, confidence: float,
             derivation: Derivation, needs_confirmation: bool = False) -> "Correspondence":
        left, right = sorted((a, b), key=ConceptRef.key)
        return Correspondence(left, right, rel_type, confidence, derivation,
                              needs_confirmation)

    def pair(self) -> frozenset[ConceptRef]:
        return frozenset((self.left, self.right))

    def sort_key(self):
        return (*self.left.key(), *self.right.key(), self.rel_type.value)


@dataclass(frozen=True)
class ConceptInfo:
    kind: ConceptKind
    label: str


class CorrespondenceOntology:
    """Typed cross-SOP concept relations plus the anchors that produced them."""

    def __init__(self, sop_ids: Iterable[str], support_id: str,
                 entries: Iterable[Correspondence] = (),
                 anchors: Mapping[ConceptRef, Anchor] | None = None,
                 concept_info: Mapping[ConceptRef, ConceptInfo] | None = None,
                 support_labels: Mapping[str, str] | None = None):
        self.sop_ids = tuple(sorted(sop_ids))
        self.support_id = support_id
        uniq: dict[tuple, Correspondence] = {}
        for e in entries:
            key = (*e.left.key(), *e.right.key(), e.rel_type.value)
            if key not in uniq:
                uniq[key] = e
        self.entries = tuple(sorted(uniq.values(), key=Correspondence.sort_key))
        self.anchors = dict(anchors or {})
        self.concept_info = dict(concept_info or {})
        self.support_labels = dict(support_labels or {})

    def anchor_for(self, ref: ConceptRef) -> Optional[Anchor]:
        return self.anchors.get(ref)

    def info_for(self, ref: ConceptRef) -> Optional[ConceptInfo]:
        return self.concept_info.get(ref)

    def between(self, a: ConceptRef, b: ConceptRef) -> tuple[Correspondence, ...]:
        pair = frozenset((a, b))
        return tuple(e for e in self.entries if e.pair() == pair)

    def touching(self, ref: ConceptRef) -> tuple[Correspondence, ...]:
        return tuple(e for e in self.entries if ref in (e.left, e.right))

    def with_entries(self, extra: Iterable[Correspondence]) -> "CorrespondenceOntology":
        return CorrespondenceOntology(self.sop_ids, self.support_id,
                                      self.entries + tuple(extra),
                                      self.anchors, self.concept_info,
                                      self.support_labels)

    def __eq__(self, other):
        if not isinstance(other, CorrespondenceOntology):
            return NotImplemented
        return (self.sop_ids == other.sop_ids and self.support_id == other.support_id
                and self.entries == other.entries and self.anchors == other.anchors)

    def __repr__(self):
        return (f"CorrespondenceOntology({len(self.entries)} entries over "
                f"{len(self.sop_ids)} SOPs)")


def align(sops: Sequence[SopResult], support: Ontology, cfg: SimilarityConfig,
          anchor_overrides: Mapping[ConceptRef, str] | None = None
          ) -> CorrespondenceOntology:
    """Produce the correspondence ontology for two or more SOPs.

    ``anchor_overrides`` maps a concept ref to a support concept id and
    represents expert-confirmed anchors (score 1.0); label-based anchoring
    alone cannot tell two same-label concepts apart, so homonym detection
    across domains relies on such confirmed anchors.
    """
    if len(sops) < 2:
        raise AlignmentError("alignment needs at least 2 SOPs")
    overrides = dict(anchor_overrides or {})

    anchors: dict[ConceptRef, Anchor] = {}
    info: dict[ConceptRef, ConceptInfo] = {}
    for res in sops:
        for c in res.sop.concepts:
            ref = ConceptRef(res.sop.id, c.id)
            info[ref] = ConceptInfo(c.kind, c.preferred_label)
            if ref in overrides:
                anchors[ref] = Anchor(c.id, overrides[ref], 1.0)
            else:
                found = anchor_concept(support, c, cfg)
                if found is not None:
                    anchors[ref] = found

    entries: list[Correspondence] = []
    ordered = sorted(sops, key=lambda r: r.sop.id)
    for i in range(len(ordered)):
        for j in range(i + 1, len(ordered)):
            left_sop, right_sop = ordered[i].sop, ordered[j].sop
            for ca in left_sop.concepts:
                for cb in right_sop.concepts:
                    if ca.kind is not cb.kind:
                        continue
                    entry = _pair_rule(
                        ConceptRef(left_sop.id, ca.id), ca,
                        ConceptRef(right_sop.id, cb.id), cb,
                        anchors, support, cfg)
                    if entry is not None:
                        entries.append(entry)

    return CorrespondenceOntology(
        [r.sop.id for r in sops], support.id, entries, anchors, info,
        {c.id: c.preferred_label for c in support.concepts})


def _pair_rule(ref_a: ConceptRef, ca: Concept, ref_b: ConceptRef, cb: Concept,
               anchors: Mapping[ConceptRef, Anchor], support: Ontology,
               cfg: SimilarityConfig) -> Optional[Correspondence]:
    anchor_a, anchor_b = anchors.get(ref_a), anchors.get(ref_b)
    labels_equal = ca.preferred_label == cb.preferred_label
    if anchor_a and anchor_b:
        if anchor_a.support_concept == anchor_b.support_concept:
            rel = RelType.EQUIVALENT_TO if labels_equal else RelType.SYNONYM_OF
            return Correspondence.make(ref_a, ref_b, rel,
                                       min(anchor_a.score, anchor_b.score),
                                       Derivation.ANCHORED)
        if labels_equal:
            sem = semantic_similarity(support, anchor_a.support_concept,
                                      anchor_b.support_concept)
            if sem <= cfg.homonym_semantic_ceiling:
                return Correspondence.make(ref_a, ref_b, RelType.HOMONYM_OF,
                                           min(anchor_a.score, anchor_b.score),
                                           Derivation.SUPPORT_RELATION)
        return None
    score = syntactic_similarity(ca.preferred_label, cb.preferred_label)
    if score >= cfg.syn_threshold:
        rel = RelType.EQUIVALENT_TO if labels_equal else RelType.SYNONYM_OF
        return Correspondence.make(ref_a, ref_b, rel, score,
                                   Derivation.SYNTACTIC_CANDIDATE,
                                   needs_confirmation=not labels_equal)
    return None


# ---------------------------------------------------------------------------
# Conflict classification
# ---------------------------------------------------------------------------

class ConflictKind(str, Enum):
    NAMING_SYNONYM = "NamingSynonym"
    NAMING_HOMONYM = "NamingHomonym"
    MODALITY_OPPOSITION = "ModalityOpposition"


class ConflictForm(str, Enum):
    VERTICAL = "Vertical"
    HORIZONTAL = "Horizontal"


class ConflictStatus(str, Enum):
    OPEN = "Open"
    RESOLVED = "Resolved"


@dataclass(frozen=True)
class ConflictRecord:
    id: str
    kind: ConflictKind
    form: ConflictForm
    correspondences: tuple[Correspondence, ...]
    policies: tuple[str, ...]  # "domain:rule_id", sorted
    status: ConflictStatus = ConflictStatus.OPEN
    payload: dict = field(default_factory=dict, compare=False)

    def resolved(self) -> "ConflictRecord":
        return replace(self, status=ConflictStatus.RESOLVED)


def _conflict_id(kind: ConflictKind, *parts: str) -> str:
    digest = hashlib.sha1("|".join((kind.value,) + parts).encode("utf-8")).hexdigest()
    return f"cf-{digest[:10]}"


def _domain_of_sop(sid: str) -> str:
    return sid.removeprefix("sop-")


def _lang_by_domain(policy_sets: Sequence[PolicySet]) -> dict[str, str]:
    langs: dict[str, str] = {}
    for ps in policy_sets:
        if ps.rules:
            langs[ps.domain_id] = ps.rules[0].source_lang.value
    return langs


def _form_for(ref_a: ConceptRef, ref_b: ConceptRef,
              langs: Mapping[str, str]) -> ConflictForm:
    la = langs.get(_domain_of_sop(ref_a.sop_id))
    lb = langs.get(_domain_of_sop(ref_b.sop_id))
    return ConflictForm.VERTICAL if la == lb else ConflictForm.HORIZONTAL


def _policies_bound_to(ps: PolicySet, cid: str) -> list[str]:
    from .sop import rule_components  # local to avoid import cycle at module load
    out = []
    for rule in ps.rules:
        ids = {concept_id(ps.domain_id, kind, label)
               for _, kind, label in rule_components(rule)}
        ids.add(concept_id(ps.domain_id, ConceptKind.POLICY, rule.id))
        if cid in ids:
            out.append(f"{ps.domain_id}:{rule.id}")
    return out


def _involved_policies(policy_sets: Sequence[PolicySet],
                       refs: Iterable[ConceptRef]) -> tuple[str, ...]:
    by_domain = {ps.domain_id: ps for ps in policy_sets}
    involved: set[str] = set()
    for ref in refs:
        ps = by_domain.get(_domain_of_sop(ref.sop_id))
        if ps is not None:
            involved.update(_policies_bound_to(ps, ref.concept_id))
    return tuple(sorted(involved))


def classify_conflicts(corr: CorrespondenceOntology,
                       policy_sets: Sequence[PolicySet]) -> list[ConflictRecord]:
    """Naming conflicts: one record per confirmed synonym pair with differing
    labels, one per homonym pair. Candidate entries are left to the expert.
    """
    langs = _lang_by_domain(policy_sets)
    records: list[ConflictRecord] = []
    for e in corr.entries:
        info_l, info_r = corr.info_for(e.left), corr.info_for(e.right)
        label_l = info_l.label if info_l else e.left.concept_id
        label_r = info_r.label if info_r else e.right.concept_id
        if (e.rel_type is RelType.SYNONYM_OF
                and e.derivation is not Derivation.SYNTACTIC_CANDIDATE
                and label_l != label_r):
            anchor = corr.anchor_for(e.left)
            payload = {
                "left": {"sop_id": e.left.sop_id, "concept_id": e.left.concept_id,
                         "label": label_l},
                "right": {"sop_id": e.right.sop_id, "concept_id": e.right.concept_id,
                          "label": label_r},
            }
            if anchor is not None:
                payload["shared_anchor"] = {
                    "concept_id": anchor.support_concept,
                    "label": corr.support_labels.get(anchor.support_concept),
                }
            records.append(ConflictRecord(
                id=_conflict_id(ConflictKind.NAMING_SYNONYM,
                                *e.left.key(), *e.right.key()),
                kind=ConflictKind.NAMING_SYNONYM,
                form=_form_for(e.left, e.right, langs),
                correspondences=(e,),
                policies=_involved_policies(policy_sets, (e.left, e.right)),
                payload=payload,
            ))
        elif e.rel_type is RelType.HOMONYM_OF:
            anchor_l, anchor_r = corr.anchor_for(e.left), corr.anchor_for(e.right)
            payload = {
                "label": label_l,
                "left": {"sop_id": e.left.sop_id, "concept_id": e.left.concept_id,
                         "label": label_l,
                         "anchor": anchor_l.support_concept if anchor_l else None},
                "right": {"sop_id": e.right.sop_id, "concept_id": e.right.concept_id,
                          "label": label_r,
                          "anchor": anchor_r.support_concept if anchor_r else None},
            }
            records.append(ConflictRecord(
                id=_conflict_id(ConflictKind.NAMING_HOMONYM,
                                *e.left.key(), *e.right.key()),
                kind=ConflictKind.NAMING_HOMONYM,
                form=_form_for(e.left, e.right, langs),
                correspondences=(e,),
                policies=_involved_policies(policy_sets, (e.left, e.right)),
                payload=payload,
            ))
    records.sort(key=lambda r: (r.kind.value, r.id))
    return records


_OPPOSED = {
    (Modality.AUTH_POS, Modality.AUTH_NEG),
    (Modality.AUTH_NEG, Modality.AUTH_POS),
    (Modality.OBL_POS, Modality.OBL_NEG),
    (Modality.OBL_NEG, Modality.OBL_POS),
}


def _named_target(rule: PolicyRule):
    if rule.target is not None and rule.target.kind is not RefKind.VARIABLE:
        return rule.target
    return None


def _concepts_related(corr: CorrespondenceOntology, ref_a: ConceptRef,
                      ref_b: ConceptRef, label_a: str, label_b: str) -> bool:
    # Identity of names counts as related even without a stored entry;
    # unconfirmed candidates do not.
    if label_a == label_b:
        return True
    for e in corr.between(ref_a, ref_b):
        if (e.rel_type in (RelType.SYNONYM_OF, RelType.EQUIVALENT_TO)
                and e.derivation is not Derivation.SYNTACTIC_CANDIDATE):
            return True
    return False


def _condition_sets_match(corr: CorrespondenceOntology, ra: PolicyRule,
                          rb: PolicyRule, dom_a: str, dom_b: str) -> bool:
    preds_a = sorted({c.predicate for c in ra.conditions})
    preds_b = sorted({c.predicate for c in rb.conditions})
    if len(preds_a) != len(preds_b):
        return False
    # Small sets: greedy bipartite matching with backtracking.
    def match(i: int, used: set[int]) -> bool:
        if i == len(preds_a):
            return True
        ref_a = ConceptRef(sop_id(dom_a), concept_id(dom_a, ConceptKind.PREDICATE, preds_a[i]))
        for j, pb in enumerate(preds_b):
            if j in used:
                continue
            ref_b = ConceptRef(sop_id(dom_b), concept_id(dom_b, ConceptKind.PREDICATE, pb))
            if _concepts_related(corr, ref_a, ref_b, preds_a[i], pb):
                if match(i + 1, used | {j}):
                    return True
        return False

    return match(0, set())


def detect_modality_conflicts(policy_sets: Sequence[PolicySet],
                              corr: CorrespondenceOntology) -> list[ConflictRecord]:
    """Opposite-sign policies over equivalent actions, targets and conditions.

    A pair across domains conflicts when the action concepts are identical
    or related by synonym_of/equivalent_to, the named targets (when present
    on both sides; a pair with a target on only one side does not match)
    likewise, the condition predicate sets are equal up to correspondence
    equivalence, and the modalities are opposed (A+/A- or O+/O-).
    """
    langs = _lang_by_domain(policy_sets)
    records: list[ConflictRecord] = []
    ordered = sorted(policy_sets, key=lambda ps: ps.domain_id)
    for i in range(len(ordered)):
        for j in range(i + 1, len(ordered)):
            ps_a, ps_b = ordered[i], ordered[j]
            for ra in ps_a.rules:
                for rb in ps_b.rules:
                    if (ra.modality, rb.modality) not in _OPPOSED:
                        continue
                    ref_a = ConceptRef(sop_id(ps_a.domain_id),
                                       concept_id(ps_a.domain_id, ConceptKind.ACTION, ra.action))
                    ref_b = ConceptRef(sop_id(ps_b.domain_id),
                                       concept_id(ps_b.domain_id, ConceptKind.ACTION, rb.action))
                    if not _concepts_related(corr, ref_a, ref_b, ra.action, rb.action):
                        continue
                    ta, tb = _named_target(ra), _named_target(rb)
                    if (ta is None) != (tb is None):
                        continue
                    if ta is not None and tb is not None:
                        tref_a = ConceptRef(sop_id(ps_a.domain_id),
                                            concept_id(ps_a.domain_id, ConceptKind.ENTITY, ta.name))
                        tref_b = ConceptRef(sop_id(ps_b.domain_id),
                                            concept_id(ps_b.domain_id, ConceptKind.ENTITY, tb.name))
                        if not _concepts_related(corr, tref_a, tref_b, ta.name, tb.name):
                            continue
                    if not _condition_sets_match(corr, ra, rb,
                                                 ps_a.domain_id, ps_b.domain_id):
                        continue
                    action_corr = tuple(
                        e for e in corr.between(ref_a, ref_b)
                        if e.rel_type in (RelType.SYNONYM_OF, RelType.EQUIVALENT_TO))
                    records.append(ConflictRecord(
                        id=_conflict_id(ConflictKind.MODALITY_OPPOSITION,
                                        ps_a.domain_id, ra.id, ps_b.domain_id, rb.id),
                        kind=ConflictKind.MODALITY_OPPOSITION,
                        form=_form_for(ref_a, ref_b, langs),
                        correspondences=action_corr,
                        policies=(f"{ps_a.domain_id}:{ra.id}", f"{ps_b.domain_id}:{rb.id}"),
                        payload={
                            "left": {"policy": f"{ps_a.domain_id}:{ra.id}",
                                     "modality": ra.modality.value,
                                     "deontic_label": ra.deontic_label,
                                     "action": ra.action},
                            "right": {"policy": f"{ps_b.domain_id}:{rb.id}",
                                      "modality": rb.modality.value,
                                      "deontic_label": rb.deontic_label,
                                      "action": rb.action},
                            "advisory": "no catalogue rule automates modality "
                                        "deconfliction; an expert must adjust one "
                                        "of the policies",
                        },
                    ))
    records.sort(key=lambda r: (r.kind.value, r.id))
    return records


# ---------------------------------------------------------------------------
# Serialization of the correspondence ontology (ontology document dialect
# with an extra "derivation" field per relation, plus the anchor table).
# ---------------------------------------------------------------------------

_DERIVATION_PROVENANCE = {
    Derivation.ANCHORED: Provenance.SYNTACTIC_MATCH,
    Derivation.SUPPORT_RELATION: Provenance.SYNTACTIC_MATCH,
    Derivation.SYNTACTIC_CANDIDATE: Provenance.SYNTACTIC_MATCH,
    Derivation.R1: Provenance.CASE2,
    Derivation.R2: Provenance.CASE3,
}


def correspondences_to_doc(corr: CorrespondenceOntology, doc_id: str) -> dict:
    refs = sorted({r for e in corr.entries for r in (e.left, e.right)}
                  | set(corr.anchors) | set(corr.concept_info),
                  key=ConceptRef.key)
    concepts = []
    for ref in refs:
        info = corr.info_for(ref)
        concepts.append({
            "id": ref.concept_id,
            "labels": [info.label if info else ref.concept_id],
            "kind": (info.kind.value if info else ConceptKind.GENERIC.value),
        })
    relations = []
    for e in corr.entries:
        relations.append({
            "source": e.left.concept_id,
            "target": e.right.concept_id,
            "type": e.rel_type.value,
            "provenance": _DERIVATION_PROVENANCE[e.derivation].value,
            "confidence": e.confidence,
            "derivation": e.derivation.value,
            "needs_confirmation": e.needs_confirmation,
        })
    anchors = [
        {"sop_concept": ref.concept_id, "sop_id": ref.sop_id,
         "support_concept": a.support_concept, "score": a.score}
        for ref, a in sorted(corr.anchors.items(), key=lambda kv: kv[0].key())]
    return {
        "id": doc_id,
        "sop_ids": list(corr.sop_ids),
        "support_id": corr.support_id,
        "concepts": concepts,
        "relations": relations,
        "anchors": anchors,
        "support_labels": dict(sorted(corr.support_labels.items())),
    }


def correspondences_from_doc(doc: dict) -> CorrespondenceOntology:
    sop_by_concept: dict[str, str] = {}
    for a in doc.get("anchors", ()):
        sop_by_concept[a["sop_concept"]] = a["sop_id"]

    def ref_for(cid: str) -> ConceptRef:
        sid = sop_by_concept.get(cid) or cid.split("#", 1)[0]
        return ConceptRef(sid, cid)

    info: dict[ConceptRef, ConceptInfo] = {}
    for c in doc.get("concepts", ()):
        ref = ref_for(c["id"])
        info[ref] = ConceptInfo(ConceptKind(c.get("kind", "Generic")),
                                c["labels"][0] if c.get("labels") else c["id"])
    entries = []
    for r in doc.get("relations", ()):
        entries.append(Correspondence.make(
            ref_for(r["source"]), ref_for(r["target"]), RelType(r["type"]),
            float(r.get("confidence", 1.0)), Derivation(r.get("derivation", "Anchored")),
            bool(r.get("needs_confirmation", False))))
    anchors = {
        ConceptRef(a["sop_id"], a["sop_concept"]): Anchor(
            a["sop_concept"], a["support_concept"], float(a["score"]))
        for a in doc.get("anchors", ())}
    return CorrespondenceOntology(doc.get("sop_ids", ()), doc.get("support_id", ""),
                                  entries, anchors, info,
                                  doc.get("support_labels", {}))
