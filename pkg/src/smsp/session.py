"""Session state: the full pipeline run plus expert decisions over it.

``create_state`` runs parse -> build SOPs -> align -> enrich -> classify.
``apply_action`` executes an expert decision (rename/merge/delete),
propagates renames into both the SOP and the bound policy text, re-runs
alignment and conflict detection, and appends to the decision log. Replaying
a log over a freshly created state reproduces the final state byte for byte
(log timestamps are carried by the log itself, never re-read from the
clock). Exports are timestamp-free and deterministic, so the CLI and the
HTTP service produce identical bytes for identical inputs and decisions.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .alignment import (ConceptRef, ConflictKind, ConflictRecord, ConflictStatus,
                        ConflictForm, Correspondence, CorrespondenceOntology,
                        Derivation, align, classify_conflicts,
                        correspondences_from_doc, correspondences_to_doc,
                        detect_modality_conflicts)
from .enrichment import EnrichmentResult, InjectionReport, enrich_all, report_to_doc
from .ontology import (Concept, ConceptKind, Ontology, OntologyError, Relation,
                       RelType, Provenance, canonical_json_bytes, export_turtle,
                       load_ontology, ontology_from_doc, ontology_to_doc,
                       save_ontology)
from .policy import (Condition, DEFAULT_DEONTIC_TABLE, EntityRef, Modality,
                     ParseError, PolicyRule, PolicySet, RefKind, SourceLang,
                     map_deontic, normalize_policy_set, parse_policy,
                     print_policy_set)
from .resolution import (Catalogue, DEFAULT_CATALOGUE, DeleteAction, MergeAction,
                         RenameAction, ResolutionAction, ResolutionError,
                         action_from_doc, action_to_doc, catalogue_from_doc,
                         propose_actions)
from .similarity import SimilarityConfig
from .sop import SopBinding, SopResult, build_sop, concept_id, sop_id
from .sop import rule_components


class SessionError(Exception):
    """Invalid session input or decision; carries an error code for the API."""

    def __init__(self, message: str, code: str = "invalid_input",
                 location: dict | None = None):
        super().__init__(message)
        self.code = code
        self.location = location or {}


@dataclass(frozen=True)
class PolicyInput:
    lang: SourceLang
    domain_id: str
    text: str

    def to_doc(self) -> dict:
        return {"lang": self.lang.value, "domain_id": self.domain_id, "text": self.text}


@dataclass
class DecisionEntry:
    action: ResolutionAction
    ts: str
    resulting_status: ConflictStatus
    effects: dict = field(default_factory=dict)

    def to_doc(self) -> dict:
        return {"action": action_to_doc(self.action), "ts": self.ts,
                "resulting_status": self.resulting_status.value,
                "effects": self.effects}


@dataclass
class SessionState:
    session_id: str
    cfg: SimilarityConfig
    deontic_table: dict[str, Modality]
    catalogue: Catalogue
    support: Ontology
    inputs: tuple[PolicyInput, ...]
    policy_sets: dict[str, PolicySet]
    sops: dict[str, SopResult]
    correspondences: CorrespondenceOntology
    conflicts: list[ConflictRecord]
    decision_log: list[DecisionEntry]
    enriched_support: Ontology
    enrichment_report: InjectionReport
    needs_review: set[str] = field(default_factory=set)

    def conflict_by_id(self, conflict_id: str) -> Optional[ConflictRecord]:
        for c in self.conflicts:
            if c.id == conflict_id:
                return c
        return None

    def open_conflicts(self) -> list[ConflictRecord]:
        return [c for c in self.conflicts if c.status is ConflictStatus.OPEN]

    def summary(self) -> dict:
        out = {kind.value: 0 for kind in ConflictKind}
        resolved = 0
        for c in self.conflicts:
            if c.status is ConflictStatus.OPEN:
                out[c.kind.value] += 1
            else:
                resolved += 1
        out["open"] = sum(out[kind.value] for kind in ConflictKind)
        out["resolved"] = resolved
        return out


def remaining_conflicts(state: SessionState) -> list[ConflictRecord]:
    """Open conflicts after the latest re-evaluation, deterministic order."""
    return sorted(state.open_conflicts(), key=lambda c: (c.kind.value, c.id))


# ---------------------------------------------------------------------------
# Creation
# ---------------------------------------------------------------------------

def _deontic_table_from_doc(doc: Mapping[str, str] | None) -> dict[str, Modality]:
    table = dict(DEFAULT_DEONTIC_TABLE)
    for label, code in (doc or {}).items():
        try:
            table[label.lower()] = Modality(code)
        except ValueError:
            raise SessionError(f"deontic table maps {label!r} to unknown modality "
                               f"{code!r}") from None
    return table


def _session_digest(support_doc: dict, inputs: Sequence[PolicyInput],
                    cfg: SimilarityConfig, catalogue: Catalogue,
                    deontic_doc: Mapping[str, str] | None) -> str:
    payload = json.dumps({
        "support": support_doc,
        "policies": [p.to_doc() for p in inputs],
        "cfg": cfg.to_doc(),
        "catalogue": catalogue.to_doc(),
        "deontic_table": dict(sorted((deontic_doc or {}).items())),
    }, sort_keys=True, separators=(",", ":"))
    return "s-" + hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]


def create_state(support: bytes | str | dict, policies: Sequence[Mapping | PolicyInput],
                 cfg: SimilarityConfig | None = None,
                 catalogue: Catalogue | None = None,
                 deontic_table: Mapping[str, str] | None = None) -> SessionState:
    """Run the full matching pipeline and return a fresh session state."""
    cfg = cfg or SimilarityConfig()
    catalogue = catalogue or DEFAULT_CATALOGUE

    inputs: list[PolicyInput] = []
    for p in policies:
        if isinstance(p, PolicyInput):
            inputs.append(p)
        else:
            try:
                inputs.append(PolicyInput(SourceLang(p["lang"]), p["domain_id"],
                                          p["text"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise SessionError(f"malformed policy input: {exc}") from exc
    if len(inputs) < 2:
        raise SessionError("need at least 2 policy inputs to align")
    domains = [p.domain_id for p in inputs]
    if len(set(domains)) != len(domains):
        raise SessionError(f"duplicate domain ids: "
                           f"{sorted({d for d in domains if domains.count(d) > 1})}")

    try:
        if isinstance(support, dict):
            support_ont = ontology_from_doc(support)
        else:
            support_ont = load_ontology(support)
    except OntologyError as exc:
        raise SessionError(f"invalid support ontology: {exc}",
                           code="invalid_ontology") from exc
    support_doc = ontology_to_doc(support_ont)

    table = _deontic_table_from_doc(deontic_table)
    policy_sets: dict[str, PolicySet] = {}
    for p in inputs:
        try:
            ps = parse_policy(p.lang, p.text, p.domain_id, table)
        except ParseError as exc:
            raise SessionError(f"{p.domain_id}: {exc}", code="parse_error",
                               location={"domain_id": p.domain_id, **exc.location()},
                               ) from exc
        policy_sets[p.domain_id] = normalize_policy_set(ps)

    sops = {domain: build_sop(ps) for domain, ps in policy_sets.items()}
    ordered_sops = [sops[d] for d in sorted(sops)]
    corr = align(ordered_sops, support_ont, cfg)
    enriched = enrich_all(support_ont, ordered_sops, corr, cfg.derivation_damping)
    corr = enriched.correspondences

    sets = [policy_sets[d] for d in sorted(policy_sets)]
    conflicts = classify_conflicts(corr, sets) + detect_modality_conflicts(sets, corr)
    conflicts.sort(key=lambda c: (c.kind.value, c.id))

    return SessionState(
        session_id=_session_digest(support_doc, inputs, cfg, catalogue, deontic_table),
        cfg=cfg,
        deontic_table=table,
        catalogue=catalogue,
        support=support_ont,
        inputs=tuple(inputs),
        policy_sets=policy_sets,
        sops=sops,
        correspondences=corr,
        conflicts=conflicts,
        decision_log=[],
        enriched_support=enriched.ontology,
        enrichment_report=enriched.report,
    )


# ---------------------------------------------------------------------------
# Re-evaluation after a decision
# ---------------------------------------------------------------------------

def reevaluate(state: SessionState) -> None:
    """Re-run alignment and conflict detection over the current state.

    Fresh records are Open; previously known records that are no longer
    derived flip to Resolved. Enrichment is not re-run here: it happens at
    create time and on explicit request.
    """
    ordered_sops = [state.sops[d] for d in sorted(state.sops)]
    corr = align(ordered_sops, state.support, state.cfg)
    sets = [state.policy_sets[d] for d in sorted(state.policy_sets)]
    fresh = classify_conflicts(corr, sets) + detect_modality_conflicts(sets, corr)
    fresh_by_id = {c.id: c for c in fresh}
    merged: dict[str, ConflictRecord] = dict(fresh_by_id)
    for old in state.conflicts:
        if old.id not in merged:
            merged[old.id] = old.resolved()
    state.correspondences = corr
    state.conflicts = sorted(merged.values(), key=lambda c: (c.kind.value, c.id))


def rerun_enrichment(state: SessionState) -> InjectionReport:
    ordered_sops = [state.sops[d] for d in sorted(state.sops)]
    result = enrich_all(state.enriched_support, ordered_sops, state.correspondences,
                        state.cfg.derivation_damping)
    state.enriched_support = result.ontology
    state.correspondences = result.correspondences
    state.enrichment_report = state.enrichment_report.merged_with(result.report)
    return result.report

# ---------------------------------------------------------------------------
# Action application
# ---------------------------------------------------------------------------

class ActionError(SessionError):
    def __init__(self, message: str):
        super().__init__(message, code="invalid_action")


_REI_IDENT = re.compile(r"[a-z][A-Za-z0-9_]*")
_WORD = re.compile(r"[A-Za-z][A-Za-z0-9_]*")


def _check_label_fits_language(state: SessionState, domain: str, role: str,
                               label: str) -> None:
    """Renames must stay expressible in the bound rules' source language."""
    ps = state.policy_sets[domain]
    if not ps.rules:
        return
    lang = ps.rules[0].source_lang
    if lang is SourceLang.REI:
        pattern = _WORD if role in ("target", "argument") else _REI_IDENT
        if not pattern.fullmatch(label):
            raise ActionError(
                f"label {label!r} is not a valid REI {role} identifier")
    elif lang is SourceLang.PONDER:
        if role == "deontic":
            # closed keyword set: the printer falls back to the modality
            # keyword, so the renamed label must still map to one
            if map_deontic(label, state.deontic_table) not in (
                    Modality.AUTH_POS, Modality.AUTH_NEG, Modality.OBL_POS):
                raise ActionError(
                    f"label {label!r} maps to no Ponder operator keyword")
        elif not _WORD.fullmatch(label):
            raise ActionError(f"label {label!r} is not a valid Ponder identifier")
    elif lang is SourceLang.KAOS and role == "deontic":
        if map_deontic(label, state.deontic_table) is Modality.UNKNOWN:
            raise ActionError(f"label {label!r} maps to no KAOS modality code")


def _domain_of(ref: ConceptRef) -> str:
    return ref.sop_id.removeprefix("sop-")


def _sop_result(state: SessionState, ref: ConceptRef) -> SopResult:
    domain = _domain_of(ref)
    res = state.sops.get(domain)
    if res is None or res.sop.id != ref.sop_id:
        raise ActionError(f"unknown SOP {ref.sop_id!r}")
    return res


def _concept_roles(binding: SopBinding, cid: str) -> list[str]:
    roles = []
    if binding.policy_concept == cid:
        roles.append("policy")
    if binding.deontic_concept == cid:
        roles.append("deontic")
    if binding.action_concept == cid:
        roles.append("action")
    if binding.target_concept == cid:
        roles.append("target")
    if cid in binding.predicate_concepts:
        roles.append("predicate")
    if cid in binding.argument_concepts:
        roles.append("argument")
    return roles


def _rewrite_rule(state: SessionState, domain: str, rule: PolicyRule,
                  roles: Iterable[str], old_cid: str, new_label: str) -> PolicyRule:
    updated = rule
    for role in roles:
        if role == "deontic":
            updated = replace(updated, deontic_label=new_label,
                              modality=map_deontic(new_label, state.deontic_table))
        elif role == "action":
            updated = replace(updated, action=new_label)
        elif role == "target" and updated.target is not None:
            updated = replace(updated, target=EntityRef.named(new_label))
        elif role == "predicate":
            conds = tuple(
                replace(c, predicate=new_label)
                if concept_id(domain, ConceptKind.PREDICATE, c.predicate) == old_cid
                else c
                for c in updated.conditions)
            updated = replace(updated, conditions=conds)
        elif role == "argument":
            conds = []
            for c in updated.conditions:
                args = tuple(
                    EntityRef.named(new_label)
                    if (a.kind is RefKind.NAMED
                        and concept_id(domain, ConceptKind.ENTITY, a.name) == old_cid)
                    else a
                    for a in c.args)
                conds.append(replace(c, args=args))
            updated = replace(updated, conditions=tuple(conds))
    return updated


def _propagate_label(state: SessionState, ref: ConceptRef, new_label: str,
                     effects: list[dict]) -> None:
    domain = _domain_of(ref)
    res = _sop_result(state, ref)
    concept = res.sop.find(ref.concept_id)
    if concept is None:
        raise ActionError(f"unknown concept {ref.concept_id!r}")
    old_label = concept.preferred_label
    if old_label == new_label:
        return

    for binding in res.bindings:
        roles = _concept_roles(binding, ref.concept_id)
        for role in roles:
            if role != "policy":
                _check_label_fits_language(state, domain, role, new_label)

    # Renaming onto an existing same-kind label either merges (same stored
    # anchor, or unknown) or is a new homonym (distinct anchors): rejected.
    twin = None
    for other in res.sop.concepts:
        if (other.id != concept.id and other.kind is concept.kind
                and other.preferred_label == new_label):
            twin = other
            break
    if twin is not None:
        anchors = state.correspondences.anchors
        mine = anchors.get(ref)
        theirs = anchors.get(ConceptRef(ref.sop_id, twin.id))
        if mine is not None and theirs is not None \
                and mine.support_concept != theirs.support_concept:
            raise ActionError(
                f"rename of {ref.concept_id!r} to {new_label!r} would create a "
                f"homonym inside {ref.sop_id!r}: {twin.id!r} already carries that "
                f"label with a different support anchor")

    # Update rule text through the bindings.
    ps = state.policy_sets[domain]
    new_rules = []
    for rule in ps.rules:
        binding = next((b for b in res.bindings if b.policy_id == rule.id), None)
        roles = _concept_roles(binding, ref.concept_id) if binding else []
        roles = [r for r in roles if r != "policy"]
        new_rules.append(_rewrite_rule(state, domain, rule, roles,
                                       ref.concept_id, new_label))
    state.policy_sets[domain] = normalize_policy_set(
        PolicySet(domain, tuple(new_rules)))

    if twin is not None:
        _merge_concepts(state, ConceptRef(ref.sop_id, twin.id), ref)
        effects.append({"kind": "rename", "concept": ref.concept_id,
                        "from": old_label, "to": new_label,
                        "merged_into": twin.id})
        return

    renamed = Concept(concept.id, (new_label,), concept.kind)
    concepts = [renamed if c.id == concept.id else c for c in res.sop.concepts]
    state.sops[domain] = SopResult(
        Ontology(res.sop.id, concepts, res.sop.relations), res.bindings)
    effects.append({"kind": "rename", "concept": ref.concept_id,
                    "from": old_label, "to": new_label})


def _merge_concepts(state: SessionState, survivor: ConceptRef,
                    absorbed: ConceptRef) -> None:
    """Same-SOP merge: redirect relations and bindings, drop the absorbed."""
    res = _sop_result(state, survivor)
    if _domain_of(survivor) != _domain_of(absorbed):
        raise ActionError("structural merge requires concepts of the same SOP")
    res.sop.get(survivor.concept_id), res.sop.get(absorbed.concept_id)

    rels: dict[tuple[str, str, str], Relation] = {}
    for r in res.sop.relations:
        source = survivor.concept_id if r.source == absorbed.concept_id else r.source
        target = survivor.concept_id if r.target == absorbed.concept_id else r.target
        if source == target:
            continue
        moved = Relation(source, target, r.rel_type, r.provenance,
                         r.confidence).canonical()
        prior = rels.get(moved.triple())
        if prior is None or moved.confidence > prior.confidence:
            rels[moved.triple()] = moved
    concepts = [c for c in res.sop.concepts if c.id != absorbed.concept_id]

    def redirect(cid: Optional[str]) -> Optional[str]:
        return survivor.concept_id if cid == absorbed.concept_id else cid

    bindings = tuple(
        SopBinding(
            policy_id=b.policy_id,
            policy_concept=redirect(b.policy_concept),
            deontic_concept=redirect(b.deontic_concept),
            action_concept=redirect(b.action_concept),
            target_concept=redirect(b.target_concept),
            predicate_concepts=tuple(dict.fromkeys(
                redirect(p) for p in b.predicate_concepts)),
            argument_concepts=tuple(dict.fromkeys(
                redirect(a) for a in b.argument_concepts)),
        ) for b in res.bindings)
    domain = _domain_of(survivor)
    state.sops[domain] = SopResult(
        Ontology(res.sop.id, concepts, rels.values()), bindings)


def _apply_rename(state: SessionState, action: RenameAction,
                  effects: list[dict]) -> None:
    for ref in action.targets:
        _propagate_label(state, ref, action.new_label, effects)


def _apply_merge(state: SessionState, action: MergeAction,
                 effects: list[dict]) -> None:
    survivor_res = _sop_result(state, action.survivor)
    survivor = survivor_res.sop.get(action.survivor.concept_id)
    _sop_result(state, action.absorbed).sop.get(action.absorbed.concept_id)
    if action.survivor.sop_id == action.absorbed.sop_id:
        label = survivor.preferred_label
        absorbed = state.sops[_domain_of(action.absorbed)].sop.get(
            action.absorbed.concept_id)
        _merge_concepts(state, action.survivor, action.absorbed)
        # Bound rules now speak the survivor's vocabulary.
        domain = _domain_of(action.absorbed)
        ps = state.policy_sets[domain]
        res = state.sops[domain]
        new_rules = []
        for rule in ps.rules:
            binding = next((b for b in res.bindings if b.policy_id == rule.id), None)
            roles = [r for r in (_concept_roles(binding, action.survivor.concept_id)
                                 if binding else []) if r != "policy"]
            new_rules.append(_rewrite_rule(state, domain, rule, roles,
                                           absorbed.id, label))
        state.policy_sets[domain] = normalize_policy_set(
            PolicySet(domain, tuple(new_rules)))
        effects.append({"kind": "merge", "survivor": action.survivor.concept_id,
                        "absorbed": action.absorbed.concept_id})
    else:
        # Cross-SOP merge unifies vocabulary: absorbed adopts the survivor's
        # preferred label (collapsing duplicates within its own SOP).
        _propagate_label(state, action.absorbed, survivor.preferred_label, effects)
        effects.append({"kind": "merge", "survivor": action.survivor.concept_id,
                        "absorbed": action.absorbed.concept_id,
                        "note": "cross-SOP merge renames the absorbed concept"})


def _apply_delete(state: SessionState, action: DeleteAction,
                  effects: list[dict]) -> None:
    ref = action.concept
    res = _sop_result(state, ref)
    res.sop.get(ref.concept_id)
    domain = _domain_of(ref)
    concepts = [c for c in res.sop.concepts if c.id != ref.concept_id]
    rels = [r for r in res.sop.relations
            if ref.concept_id not in (r.source, r.target)]

    def scrub(cid: Optional[str]) -> Optional[str]:
        return None if cid == ref.concept_id else cid

    bindings = []
    touched = []
    for b in res.bindings:
        if ref.concept_id in b.bound_concepts():
            touched.append(b.policy_id)
        if b.policy_concept == ref.concept_id:
            continue  # the composite itself is gone
        bindings.append(SopBinding(
            policy_id=b.policy_id,
            policy_concept=b.policy_concept,
            deontic_concept=scrub(b.deontic_concept),
            action_concept=scrub(b.action_concept),
            target_concept=scrub(b.target_concept),
            predicate_concepts=tuple(p for p in b.predicate_concepts
                                     if p != ref.concept_id),
            argument_concepts=tuple(a for a in b.argument_concepts
                                    if a != ref.concept_id),
        ))
    state.sops[domain] = SopResult(
        Ontology(res.sop.id, concepts, rels), tuple(bindings))
    for policy_id in touched:
        state.needs_review.add(f"{domain}:{policy_id}")
    effects.append({"kind": "delete", "concept": ref.concept_id,
                    "needs_review": sorted(f"{domain}:{p}" for p in touched)})


def apply_action(state: SessionState, action: ResolutionAction,
                 ts: str | None = None) -> SessionState:
    """Apply one expert decision, re-evaluate conflicts, append to the log.

    ``ts`` is only supplied when replaying a recorded log; fresh decisions
    stamp the current UTC time.
    """
    conflict = state.conflict_by_id(action.conflict_id)
    if conflict is None:
        raise SessionError(f"unknown conflict {action.conflict_id!r}",
                           code="not_found")
    if conflict.status is not ConflictStatus.OPEN:
        raise SessionError(f"conflict {action.conflict_id} is already resolved",
                           code="already_resolved")

    effects: list[dict] = []
    if isinstance(action, RenameAction):
        _apply_rename(state, action, effects)
    elif isinstance(action, MergeAction):
        _apply_merge(state, action, effects)
    elif isinstance(action, DeleteAction):
        _apply_delete(state, action, effects)
    else:
        raise ActionError(f"unsupported action type {type(action).__name__}")

    reevaluate(state)
    after = state.conflict_by_id(action.conflict_id)
    resulting = after.status if after is not None else ConflictStatus.RESOLVED
    state.decision_log.append(DecisionEntry(
        action=action,
        ts=ts or datetime.now(timezone.utc).isoformat(timespec="seconds"),
        resulting_status=resulting,
        effects={"changes": effects},
    ))
    return state


def replay_decisions(state: SessionState, entries: Sequence[DecisionEntry]
                     ) -> SessionState:
    for entry in entries:
        apply_action(state, entry.action, ts=entry.ts)
    return state


# ---------------------------------------------------------------------------
# Snapshot (persistence) serialization
# ---------------------------------------------------------------------------

def _ref_doc(ref: EntityRef) -> dict:
    return {"kind": ref.kind.value, "name": ref.name}


def _ref_from_doc(doc: dict) -> EntityRef:
    return EntityRef(RefKind(doc["kind"]), doc["name"])


def _rule_to_doc(rule: PolicyRule) -> dict:
    return {
        "id": rule.id,
        "domain_id": rule.domain_id,
        "source_lang": rule.source_lang.value,
        "modality": rule.modality.value,
        "deontic_label": rule.deontic_label,
        "subject": _ref_doc(rule.subject),
        "action": rule.action,
        "target": _ref_doc(rule.target) if rule.target else None,
        "conditions": [
            {"predicate": c.predicate, "args": [_ref_doc(a) for a in c.args]}
            for c in rule.conditions],
    }


def _rule_from_doc(doc: dict) -> PolicyRule:
    return PolicyRule(
        id=doc["id"],
        domain_id=doc["domain_id"],
        source_lang=SourceLang(doc["source_lang"]),
        modality=Modality(doc["modality"]),
        deontic_label=doc["deontic_label"],
        subject=_ref_from_doc(doc["subject"]),
        action=doc["action"],
        target=_ref_from_doc(doc["target"]) if doc.get("target") else None,
        conditions=tuple(
            Condition(c["predicate"], tuple(_ref_from_doc(a) for a in c["args"]))
            for c in doc["conditions"]),
    )


def _policy_set_to_doc(ps: PolicySet) -> dict:
    return {"domain_id": ps.domain_id, "rules": [_rule_to_doc(r) for r in ps.rules]}


def _policy_set_from_doc(doc: dict) -> PolicySet:
    return PolicySet(doc["domain_id"], tuple(_rule_from_doc(r) for r in doc["rules"]))


def _binding_to_doc(b: SopBinding) -> dict:
    return {
        "policy_id": b.policy_id,
        "policy_concept": b.policy_concept,
        "deontic_concept": b.deontic_concept,
        "action_concept": b.action_concept,
        "target_concept": b.target_concept,
        "predicate_concepts": list(b.predicate_concepts),
        "argument_concepts": list(b.argument_concepts),
    }


def _binding_from_doc(doc: dict) -> SopBinding:
    return SopBinding(
        policy_id=doc["policy_id"],
        policy_concept=doc["policy_concept"],
        deontic_concept=doc["deontic_concept"],
        action_concept=doc["action_concept"],
        target_concept=doc.get("target_concept"),
        predicate_concepts=tuple(doc.get("predicate_concepts", ())),
        argument_concepts=tuple(doc.get("argument_concepts", ())),
    )


def _corr_entry_to_doc(e: Correspondence) -> dict:
    return {
        "left": {"sop_id": e.left.sop_id, "concept_id": e.left.concept_id},
        "right": {"sop_id": e.right.sop_id, "concept_id": e.right.concept_id},
        "type": e.rel_type.value,
        "confidence": e.confidence,
        "derivation": e.derivation.value,
        "needs_confirmation": e.needs_confirmation,
    }


def _corr_entry_from_doc(doc: dict) -> Correspondence:
    return Correspondence(
        ConceptRef(doc["left"]["sop_id"], doc["left"]["concept_id"]),
        ConceptRef(doc["right"]["sop_id"], doc["right"]["concept_id"]),
        RelType(doc["type"]), float(doc["confidence"]),
        Derivation(doc["derivation"]), bool(doc.get("needs_confirmation", False)))


def _conflict_to_doc(c: ConflictRecord) -> dict:
    return {
        "id": c.id,
        "kind": c.kind.value,
        "form": c.form.value,
        "status": c.status.value,
        "policies": list(c.policies),
        "correspondences": [_corr_entry_to_doc(e) for e in c.correspondences],
        "payload": c.payload,
    }


def _conflict_from_doc(doc: dict) -> ConflictRecord:
    return ConflictRecord(
        id=doc["id"],
        kind=ConflictKind(doc["kind"]),
        form=ConflictForm(doc["form"]),
        correspondences=tuple(_corr_entry_from_doc(e)
                              for e in doc.get("correspondences", ())),
        policies=tuple(doc.get("policies", ())),
        status=ConflictStatus(doc["status"]),
        payload=doc.get("payload", {}),
    )


def _report_from_doc(doc: dict) -> InjectionReport:
    injected = tuple(
        Relation(r["source"], r["target"], RelType(r["type"]),
                 Provenance(r["provenance"]), float(r["confidence"]))
        for r in doc.get("injected", ()))
    derived = tuple(
        Correspondence(
            ConceptRef(d["left"]["sop_id"], d["left"]["concept_id"]),
            ConceptRef(d["right"]["sop_id"], d["right"]["concept_id"]),
            RelType(d["type"]), float(d["confidence"]), Derivation(d["derivation"]))
        for d in doc.get("derived_correspondences", ()))
    return InjectionReport(injected, derived, int(doc.get("skipped_duplicates", 0)),
                           int(doc.get("iterations", 0)))


def state_to_snapshot(state: SessionState) -> bytes:
    doc = {
        "session_id": state.session_id,
        "cfg": state.cfg.to_doc(),
        "deontic_table": {k: v.value for k, v in sorted(state.deontic_table.items())},
        "catalogue": state.catalogue.to_doc(),
        "support": ontology_to_doc(state.support),
        "inputs": [p.to_doc() for p in state.inputs],
        "policy_sets": [_policy_set_to_doc(state.policy_sets[d])
                        for d in sorted(state.policy_sets)],
        "sops": [{"domain_id": d,
                  "ontology": ontology_to_doc(state.sops[d].sop),
                  "bindings": [_binding_to_doc(b) for b in state.sops[d].bindings]}
                 for d in sorted(state.sops)],
        "correspondences": correspondences_to_doc(
            state.correspondences, f"corr-{state.session_id}"),
        "conflicts": [_conflict_to_doc(c) for c in state.conflicts],
        "decision_log": [e.to_doc() for e in state.decision_log],
        "enriched_support": ontology_to_doc(state.enriched_support),
        "enrichment_report": report_to_doc(state.enrichment_report),
        "needs_review": sorted(state.needs_review),
    }
    return canonical_json_bytes(doc)


def state_from_snapshot(data: bytes | str) -> SessionState:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    doc = json.loads(data)
    policy_sets = {ps["domain_id"]: _policy_set_from_doc(ps)
                   for ps in doc["policy_sets"]}
    sops = {
        entry["domain_id"]: SopResult(
            ontology_from_doc(entry["ontology"]),
            tuple(_binding_from_doc(b) for b in entry["bindings"]))
        for entry in doc["sops"]}
    return SessionState(
        session_id=doc["session_id"],
        cfg=SimilarityConfig.from_doc(doc["cfg"]),
        deontic_table={k: Modality(v) for k, v in doc["deontic_table"].items()},
        catalogue=catalogue_from_doc(doc["catalogue"]),
        support=ontology_from_doc(doc["support"]),
        inputs=tuple(PolicyInput(SourceLang(p["lang"]), p["domain_id"], p["text"])
                     for p in doc["inputs"]),
        policy_sets=policy_sets,
        sops=sops,
        correspondences=correspondences_from_doc(doc["correspondences"]),
        conflicts=[_conflict_from_doc(c) for c in doc["conflicts"]],
        decision_log=[
            DecisionEntry(action_from_doc(e["action"]), e["ts"],
                          ConflictStatus(e["resulting_status"]),
                          e.get("effects", {}))
            for e in doc["decision_log"]],
        enriched_support=ontology_from_doc(doc["enriched_support"]),
        enrichment_report=_report_from_doc(doc["enrichment_report"]),
        needs_review=set(doc.get("needs_review", ())),
    )


# ---------------------------------------------------------------------------
# Exports
# ---------------------------------------------------------------------------

EXPORT_KINDS = ("enriched_ontology", "correspondences", "harmonized_policies",
                "report")


def export_bytes(state: SessionState, what: str, fmt: str = "canonical") -> bytes:
    """Deterministic artifact bytes; identical for CLI and service."""
    if what not in EXPORT_KINDS:
        raise SessionError(f"unknown export {what!r}; expected one of "
                           f"{', '.join(EXPORT_KINDS)}", code="invalid_export")
    if fmt not in ("canonical", "turtle"):
        raise SessionError(f"unknown format {fmt!r}", code="invalid_export")
    if fmt == "turtle" and what != "enriched_ontology":
        raise SessionError("turtle format is only valid for ontology exports",
                           code="invalid_export")
    if what == "enriched_ontology":
        if fmt == "turtle":
            return export_turtle(state.enriched_support)
        return save_ontology(state.enriched_support)
    if what == "correspondences":
        return canonical_json_bytes(correspondences_to_doc(
            state.correspondences, f"corr-{state.session_id}"))
    if what == "harmonized_policies":
        return canonical_json_bytes(harmonized_policies_doc(state))
    return canonical_json_bytes(report_doc(state))


def harmonized_policies_doc(state: SessionState) -> dict:
    domains = []
    for p in state.inputs:
        ps = state.policy_sets[p.domain_id]
        domains.append({
            "domain_id": p.domain_id,
            "lang": p.lang.value,
            "text": print_policy_set(ps, p.lang),
        })
    domains.sort(key=lambda d: d["domain_id"])
    return {"session_id": state.session_id, "domains": domains}


def report_doc(state: SessionState) -> dict:
    # Log timestamps stay out of exports so identical inputs and decisions
    # produce identical bytes on any machine at any time.
    return {
        "session_id": state.session_id,
        "summary": state.summary(),
        "conflicts": [_conflict_to_doc(c) for c in state.conflicts],
        "decisions": [
            {"action": action_to_doc(e.action),
             "resulting_status": e.resulting_status.value,
             "effects": e.effects}
            for e in state.decision_log],
        "enrichment": report_to_doc(state.enrichment_report),
        "needs_review": sorted(state.needs_review),
    }


# ---------------------------------------------------------------------------
# File-backed store
# ---------------------------------------------------------------------------

DATA_DIR_ENV = "SMSP_DATA_DIR"


class SessionStore:
    """One snapshot document per session under a data directory.

    Decisions within a session are serialized by a per-session lock;
    sessions are fully independent of each other.
    """

    def __init__(self, data_dir: str | Path | None = None):
        root = data_dir or os.environ.get(DATA_DIR_ENV) or "smsp-data"
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def lock_for(self, session_id: str) -> threading.Lock:
        with self._guard:
            if session_id not in self._locks:
                self._locks[session_id] = threading.Lock()
            return self._locks[session_id]

    def path_for(self, session_id: str) -> Path:
        return self.root / f"{session_id}.json"

    def save(self, state: SessionState) -> None:
        self.path_for(state.session_id).write_bytes(state_to_snapshot(state))

    def load(self, session_id: str) -> SessionState:
        path = self.path_for(session_id)
        if not path.exists():
            raise SessionError(f"unknown session {session_id!r}", code="not_found")
        return state_from_snapshot(path.read_bytes())

    def exists(self, session_id: str) -> bool:
        return self.path_for(session_id).exists()

    def list_ids(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.json"))

def conflict_fragments(state: SessionState, record: ConflictRecord) -> dict:
    """Per-side SOP fragments (policy node plus part_of children) for the
    review UI; derived from the bindings of the involved policies."""
    sides: dict = {}
    for side in ("left", "right"):
        part = record.payload.get(side)
        if not isinstance(part, dict):
            continue
        if "sop_id" in part:
            domain = part["sop_id"].removeprefix("sop-")
        elif "policy" in part:
            domain = part["policy"].split(":", 1)[0]
        else:
            continue
        res = state.sops.get(domain)
        if res is None:
            continue
        involved = {p.split(":", 1)[1] for p in record.policies
                    if p.startswith(f"{domain}:")}
        fragments = []
        for binding in res.bindings:
            if binding.policy_id not in involved:
                continue
            children = []
            for cid in binding.bound_concepts():
                if cid == binding.policy_concept:
                    continue
                concept = res.sop.find(cid)
                if concept is not None:
                    children.append({"concept_id": cid,
                                     "label": concept.preferred_label,
                                     "kind": concept.kind.value})
            fragments.append({"policy_id": binding.policy_id,
                              "policy_concept": binding.policy_concept,
                              "children": children})
        sides[side] = {
            "sop_id": sop_id(domain),
            "concept_id": part.get("concept_id"),
            "label": part.get("label"),
            "anchor": part.get("anchor"),
            "fragments": fragments,
        }
    shared = record.payload.get("shared_anchor")
    if shared:
        sides["shared_anchor"] = shared
    return sides
