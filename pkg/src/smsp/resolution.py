"""Resolution actions, the rule catalogue, and proposal generation.

The catalogue maps a conflict kind to an ordered list of action templates;
the first instantiated proposal is the auto-resolution default. Naming
synonyms get the rename/merge family (rule 1), naming homonyms get
rename-apart with a domain suffix (rule 2). Modality oppositions carry an
advisory only: automating their deconfliction (priorities, meta-policies)
is out of scope, an expert has to adjust one of the policies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Union

from .alignment import ConceptRef, ConflictKind, ConflictRecord


class Decider(str, Enum):
    EXPERT = "Expert"
    AUTO_DEFAULT = "AutoDefault"


class ResolutionError(Exception):
    pass


@dataclass(frozen=True)
class RenameAction:
    """Rename one or more concepts to a common label."""
    targets: tuple[ConceptRef, ...]
    new_label: str
    conflict_id: str
    decided_by: Decider = Decider.EXPERT

    def __post_init__(self):
        if not self.targets:
            raise ResolutionError("rename needs at least one target")
        if not self.new_label:
            raise ResolutionError("rename needs a non-empty label")


@dataclass(frozen=True)
class MergeAction:
    survivor: ConceptRef
    absorbed: ConceptRef
    conflict_id: str
    decided_by: Decider = Decider.EXPERT

    def __post_init__(self):
        if self.survivor == self.absorbed:
            raise ResolutionError("merge endpoints must differ")


@dataclass(frozen=True)
class DeleteAction:
    concept: ConceptRef
    conflict_id: str
    decided_by: Decider = Decider.EXPERT


ResolutionAction = Union[RenameAction, MergeAction, DeleteAction]


def _ref_doc(ref: ConceptRef) -> dict:
    return {"sop_id": ref.sop_id, "concept_id": ref.concept_id}


def _ref_from(doc: dict) -> ConceptRef:
    return ConceptRef(doc["sop_id"], doc["concept_id"])


def action_to_doc(action: ResolutionAction) -> dict:
    if isinstance(action, RenameAction):
        return {"kind": "rename", "targets": [_ref_doc(t) for t in action.targets],
                "new_label": action.new_label, "conflict_id": action.conflict_id,
                "decided_by": action.decided_by.value}
    if isinstance(action, MergeAction):
        return {"kind": "merge", "survivor": _ref_doc(action.survivor),
                "absorbed": _ref_doc(action.absorbed), "conflict_id": action.conflict_id,
                "decided_by": action.decided_by.value}
    return {"kind": "delete", "concept": _ref_doc(action.concept),
            "conflict_id": action.conflict_id, "decided_by": action.decided_by.value}


def action_from_doc(doc: dict) -> ResolutionAction:
    try:
        kind = doc["kind"]
        decided = Decider(doc.get("decided_by", "Expert"))
        conflict_id = doc["conflict_id"]
        if kind == "rename":
            return RenameAction(tuple(_ref_from(t) for t in doc["targets"]),
                                doc["new_label"], conflict_id, decided)
        if kind == "merge":
            return MergeAction(_ref_from(doc["survivor"]), _ref_from(doc["absorbed"]),
                               conflict_id, decided)
        if kind == "delete":
            return DeleteAction(_ref_from(doc["concept"]), conflict_id, decided)
    except (KeyError, TypeError, ValueError) as exc:
        raise ResolutionError(f"malformed action document: {exc}") from exc
    raise ResolutionError(f"unknown action kind {kind!r}")


# ---------------------------------------------------------------------------
# Catalogue
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResolutionRule:
    id: str
    trigger: ConflictKind
    templates: tuple[str, ...]


@dataclass(frozen=True)
class Catalogue:
    rules: tuple[ResolutionRule, ...]

    def __post_init__(self):
        ids = [r.id for r in self.rules]
        if len(set(ids)) != len(ids):
            raise ResolutionError("catalogue rule ids must be unique")
        triggers = {r.trigger for r in self.rules}
        for required in (ConflictKind.NAMING_SYNONYM, ConflictKind.NAMING_HOMONYM):
            if required not in triggers:
                raise ResolutionError(
                    f"catalogue must contain a rule for {required.value}")
        for rule in self.rules:
            for tpl in rule.templates:
                if tpl not in _TEMPLATES:
                    raise ResolutionError(
                        f"rule {rule.id}: unknown action template {tpl!r}")

    def rule_for(self, kind: ConflictKind) -> Optional[ResolutionRule]:
        for rule in self.rules:
            if rule.trigger is kind:
                return rule
        return None

    def to_doc(self) -> dict:
        return {"rules": [
            {"id": r.id, "trigger": r.trigger.value, "templates": list(r.templates)}
            for r in self.rules]}


def catalogue_from_doc(doc: dict) -> Catalogue:
    try:
        rules = tuple(
            ResolutionRule(r["id"], ConflictKind(r["trigger"]), tuple(r["templates"]))
            for r in doc["rules"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ResolutionError(f"malformed catalogue document: {exc}") from exc
    return Catalogue(rules)


def load_catalogue(data: bytes | str) -> Catalogue:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ResolutionError(f"malformed catalogue document: {exc}") from exc
    return catalogue_from_doc(doc)


# ---------------------------------------------------------------------------
# Proposal templates
# ---------------------------------------------------------------------------

def _payload_ref(conflict: ConflictRecord, side: str) -> ConceptRef:
    part = conflict.payload[side]
    return ConceptRef(part["sop_id"], part["concept_id"])


def _payload_label(conflict: ConflictRecord, side: str) -> str:
    return conflict.payload[side]["label"]


def _domain_suffix(ref: ConceptRef) -> str:
    return ref.sop_id.removeprefix("sop-")


def _tpl_rename_right_to_left(c: ConflictRecord) -> Optional[ResolutionAction]:
    return RenameAction((_payload_ref(c, "right"),), _payload_label(c, "left"), c.id)


def _tpl_rename_left_to_right(c: ConflictRecord) -> Optional[ResolutionAction]:
    return RenameAction((_payload_ref(c, "left"),), _payload_label(c, "right"), c.id)


def _tpl_rename_both_to_anchor(c: ConflictRecord) -> Optional[ResolutionAction]:
    anchor = c.payload.get("shared_anchor")
    if not anchor or not anchor.get("label"):
        return None
    return RenameAction((_payload_ref(c, "left"), _payload_ref(c, "right")),
                        anchor["label"], c.id)


def _tpl_merge(c: ConflictRecord) -> Optional[ResolutionAction]:
    return MergeAction(_payload_ref(c, "left"), _payload_ref(c, "right"), c.id)


def _tpl_rename_left_suffix(c: ConflictRecord) -> Optional[ResolutionAction]:
    ref = _payload_ref(c, "left")
    return RenameAction((ref,), f"{_payload_label(c, 'left')}_{_domain_suffix(ref)}", c.id)


def _tpl_rename_right_suffix(c: ConflictRecord) -> Optional[ResolutionAction]:
    ref = _payload_ref(c, "right")
    return RenameAction((ref,), f"{_payload_label(c, 'right')}_{_domain_suffix(ref)}", c.id)


_TEMPLATES: dict[str, Callable[[ConflictRecord], Optional[ResolutionAction]]] = {
    "rename-right-to-left": _tpl_rename_right_to_left,
    "rename-left-to-right": _tpl_rename_left_to_right,
    "rename-both-to-anchor": _tpl_rename_both_to_anchor,
    "merge-left-survives": _tpl_merge,
    "rename-left-domain-suffix": _tpl_rename_left_suffix,
    "rename-right-domain-suffix": _tpl_rename_right_suffix,
}

DEFAULT_CATALOGUE = Catalogue((
    ResolutionRule("rule-1", ConflictKind.NAMING_SYNONYM, (
        "rename-right-to-left",
        "rename-left-to-right",
        "rename-both-to-anchor",
        "merge-left-survives",
    )),
    ResolutionRule("rule-2", ConflictKind.NAMING_HOMONYM, (
        "rename-left-domain-suffix",
        "rename-right-domain-suffix",
    )),
))

_MODALITY_ADVISORY = (
    "no catalogue rule automates modality deconfliction; an expert must "
    "adjust one of the opposed policies")


@dataclass(frozen=True)
class ProposalSet:
    actions: tuple[ResolutionAction, ...]
    advisory: Optional[str] = None

    @property
    def auto_default(self) -> Optional[ResolutionAction]:
        return self.actions[0] if self.actions else None

    def to_doc(self) -> dict:
        return {
            "actions": [
                {**action_to_doc(a), "auto_default": i == 0}
                for i, a in enumerate(self.actions)],
            "advisory": self.advisory,
        }


def propose_actions(conflict: ConflictRecord,
                    catalogue: Catalogue = DEFAULT_CATALOGUE) -> ProposalSet:
    """Instantiate the catalogue's templates for an open conflict.

    The first action is the auto-resolution default. A conflict kind without
    a catalogue rule is an error, except modality oppositions, which return
    no actions plus an advisory.
    """
    rule = catalogue.rule_for(conflict.kind)
    if rule is None:
        if conflict.kind is ConflictKind.MODALITY_OPPOSITION:
            return ProposalSet((), conflict.payload.get("advisory", _MODALITY_ADVISORY))
        raise ResolutionError(
            f"no catalogue rule for conflict kind {conflict.kind.value}")
    actions = []
    for tpl in rule.templates:
        action = _TEMPLATES[tpl](conflict)
        if action is not None:
            actions.append(action)
    return ProposalSet(tuple(actions))
