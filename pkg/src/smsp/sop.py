"""Transform a policy set into its policy ontology (SOP).

Each rule becomes a composite Policy concept whose deontic operator,
action, optional named target, condition predicates and named condition
arguments are child concepts linked by part_of. The composite shape is what
lets sub-concept matching derive relations between whole policies later.

Variables never become concepts: the bound subject and any condition
argument repeating the subject's name are quantified placeholders, not
domain vocabulary. Concepts are deduplicated by (kind, preferred label)
within a SOP, so two rules sharing an action share the action concept.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .ontology import Concept, ConceptKind, Ontology, Provenance, Relation, RelType
from .policy import PolicyRule, PolicySet, RefKind, normalize_policy_set
from .similarity import tokenize

KIND_SLUG = {
    ConceptKind.POLICY: "policy",
    ConceptKind.DEONTIC: "deontic",
    ConceptKind.ACTION: "action",
    ConceptKind.ENTITY: "entity",
    ConceptKind.PREDICATE: "predicate",
    ConceptKind.GENERIC: "generic",
}


def label_slug(label: str) -> str:
    return "-".join(tokenize(label)) or "x"


def sop_id(domain_id: str) -> str:
    return f"sop-{domain_id}"


def concept_id(domain_id: str, kind: ConceptKind, label: str) -> str:
    return f"{sop_id(domain_id)}#{KIND_SLUG[kind]}-{label_slug(label)}"


@dataclass(frozen=True)
class SopBinding:
    """Concept ids a rule is bound to, by role; drives rename propagation."""
    policy_id: str
    policy_concept: str
    deontic_concept: str
    action_concept: str
    target_concept: Optional[str] = None
    predicate_concepts: tuple[str, ...] = ()
    argument_concepts: tuple[str, ...] = ()

    def bound_concepts(self) -> tuple[str, ...]:
        out = [self.policy_concept, self.deontic_concept, self.action_concept]
        if self.target_concept:
            out.append(self.target_concept)
        out.extend(self.predicate_concepts)
        out.extend(self.argument_concepts)
        return tuple(out)


@dataclass(frozen=True)
class SopResult:
    sop: Ontology
    bindings: tuple[SopBinding, ...]


def rule_components(rule: PolicyRule) -> list[tuple[str, ConceptKind, str]]:
    """(role, kind, label) children of a rule's composite policy concept.

    Roles are ``deontic``, ``action``, ``target``, ``predicate``,
    ``argument``. Variables and subject mentions yield nothing.
    """
    out = [("deontic", ConceptKind.DEONTIC, rule.deontic_label),
           ("action", ConceptKind.ACTION, rule.action)]
    if rule.target is not None and rule.target.kind is not RefKind.VARIABLE:
        out.append(("target", ConceptKind.ENTITY, rule.target.name))
    for cond in rule.conditions:
        out.append(("predicate", ConceptKind.PREDICATE, cond.predicate))
        for arg in cond.args:
            if arg.kind is RefKind.VARIABLE or arg.name == rule.subject.name:
                continue
            out.append(("argument", ConceptKind.ENTITY, arg.name))
    return out


def build_sop(ps: PolicySet) -> SopResult:
    """Build the SOP for a policy set. Pure and order-insensitive.

    The output is identical across rule orderings: rules are normalized and
    sorted by id, and concept/relation sets are canonical.
    """
    ps = normalize_policy_set(ps)
    sid = sop_id(ps.domain_id)
    concepts: dict[str, Concept] = {}
    relations: dict[tuple[str, str, str], Relation] = {}
    bindings: list[SopBinding] = []

    def ensure(kind: ConceptKind, label: str) -> str:
        cid = concept_id(ps.domain_id, kind, label)
        if cid not in concepts:
            concepts[cid] = Concept(cid, (label,), kind)
        return cid

    for rule in ps.rules:
        policy_cid = ensure(ConceptKind.POLICY, rule.id)
        roles: dict[str, str] = {}
        predicates: list[str] = []
        arguments: list[str] = []
        for role, kind, label in rule_components(rule):
            child = ensure(kind, label)
            rel = Relation(child, policy_cid, RelType.PART_OF, Provenance.AUTHORED, 1.0)
            relations[rel.triple()] = rel
            if role == "predicate":
                if child not in predicates:
                    predicates.append(child)
            elif role == "argument":
                if child not in arguments:
                    arguments.append(child)
            else:
                roles[role] = child
        bindings.append(SopBinding(
            policy_id=rule.id,
            policy_concept=policy_cid,
            deontic_concept=roles["deontic"],
            action_concept=roles["action"],
            target_concept=roles.get("target"),
            predicate_concepts=tuple(predicates),
            argument_concepts=tuple(arguments),
        ))

    sop = Ontology(sid, concepts.values(), relations.values())
    return SopResult(sop, tuple(bindings))


def part_of_children(o: Ontology, concept_id: str) -> tuple[str, ...]:
    """Concept ids linked into ``concept_id`` by part_of, sorted."""
    return tuple(sorted(r.source for r in o.relations
                        if r.rel_type is RelType.PART_OF and r.target == concept_id))
