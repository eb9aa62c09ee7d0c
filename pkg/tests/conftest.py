import random
from pathlib import Path

import pytest

from smsp.ontology import Concept, ConceptKind, Ontology, Provenance, Relation, RelType
from smsp.policy import (Condition, DEFAULT_DEONTIC_TABLE, EntityRef, Modality,
                         PolicyRule, PolicySet, SourceLang, map_deontic)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

# Pairwise-dissimilar name pool: no two words reach the 0.85 syntactic
# threshold, so generated sets never collide with each other or with the
# security-core vocabulary by accident.
NAME_POOL = [
    "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel",
    "india", "juliett", "kilo", "lima", "mike", "november", "oscar", "papa",
    "quebec", "romeo", "sierra", "tango", "uniform", "victor", "whiskey",
    "xray", "yankee", "zulu",
]


@pytest.fixture(scope="session")
def security_core() -> Ontology:
    from smsp.ontology import load_ontology
    return load_ontology((FIXTURES / "security-core.json").read_bytes())


@pytest.fixture(scope="session")
def cloud_texts() -> dict:
    return {
        "a_rei": (FIXTURES / "cloud" / "domain-a.rei").read_text(),
        "b_rei": (FIXTURES / "cloud" / "domain-b.rei").read_text(),
        "b_ponder": (FIXTURES / "cloud" / "domain-b.ponder").read_text(),
        "b_prohibit": (FIXTURES / "modality" / "domain-b-prohibit.rei").read_text(),
    }


def make_rule(domain: str, idx: int, rng: random.Random,
              modality_labels: dict[Modality, str]) -> PolicyRule:
    """One generated rule; actions are unique per index so cross-rule pairs
    in self-alignment never look similar."""
    modality = rng.choice([Modality.AUTH_POS, Modality.AUTH_NEG,
                           Modality.OBL_POS, Modality.OBL_NEG])
    deontic = modality_labels[modality]
    action = f"{rng.choice(NAME_POOL)}Act{idx}"
    subject = EntityRef.variable("S")
    conditions = []
    for c in range(rng.randint(0, 2)):
        pred = f"{rng.choice(NAME_POOL)}Pred"
        args = [EntityRef.variable("S"),
                EntityRef.named(rng.choice(NAME_POOL).capitalize() + "Org")]
        conditions.append(Condition(pred, tuple(args[:rng.randint(1, 2)])))
    target = None
    if rng.random() < 0.4:
        target = EntityRef.named(rng.choice(NAME_POOL).capitalize() + "Res")
    return PolicyRule(
        id=f"r{idx}",
        domain_id=domain,
        source_lang=SourceLang.REI,
        modality=map_deontic(deontic),
        deontic_label=deontic,
        subject=subject,
        action=action,
        target=target,
        conditions=tuple(conditions),
    )


def make_policy_set(domain: str, rng: random.Random, max_rules: int = 4) -> PolicySet:
    """Internally consistent generated set: one deontic label per modality
    (so a set never mixes synonyms of the same operator) and per-rule
    distinct actions (so it carries no internal modality opposition)."""
    labels_by_modality = {}
    for modality in (Modality.AUTH_POS, Modality.AUTH_NEG,
                     Modality.OBL_POS, Modality.OBL_NEG):
        options = [lab for lab, m in DEFAULT_DEONTIC_TABLE.items() if m is modality]
        labels_by_modality[modality] = rng.choice(options)
    n = rng.randint(1, max_rules)
    rules = tuple(make_rule(domain, i, rng, labels_by_modality) for i in range(n))
    return PolicySet(domain, rules)


def copy_set_as_domain(ps: PolicySet, domain: str) -> PolicySet:
    from dataclasses import replace
    return PolicySet(domain, tuple(replace(r, domain_id=domain) for r in ps.rules))


def make_taxonomy(rng: random.Random, n_concepts: int,
                  ontology_id: str = "gen") -> Ontology:
    """Random DAG taxonomy: is_a edges only point to lower indexes, plus a
    few symmetric semantic edges. Always satisfies the model invariants."""
    concepts = [
        Concept(f"{ontology_id}#c{i}", (f"{rng.choice(NAME_POOL)} {i}",),
                rng.choice(list(ConceptKind)))
        for i in range(n_concepts)]
    relations: dict[tuple, Relation] = {}
    for i in range(1, n_concepts):
        for _ in range(rng.randint(0, 2)):
            parent = rng.randrange(0, i)
            rel = Relation(f"{ontology_id}#c{i}", f"{ontology_id}#c{parent}",
                           RelType.IS_A)
            relations[rel.triple()] = rel
    sym_types = [RelType.SYNONYM_OF, RelType.EQUIVALENT_TO, RelType.RELATED_TO]
    for _ in range(rng.randint(0, max(1, n_concepts // 3))):
        i, j = rng.sample(range(n_concepts), 2)
        rel = Relation(f"{ontology_id}#c{i}", f"{ontology_id}#c{j}",
                       rng.choice(sym_types)).canonical()
        relations[rel.triple()] = rel
    return Ontology(ontology_id, concepts, relations.values())


def two_stage_enrichment_fixture():
    """Enrichment fixture whose case-2 premise is itself a case-1 injection.

    The pair (c1@A, c2@B) becomes derivable only after case 1 has injected
    synonym_of(Sc1, S1) and synonym_of(Sc2, S2): the equivalence premises
    run through the support ontology, so a single pass misses them.
    """
    from smsp.alignment import (ConceptRef, Correspondence,
                                CorrespondenceOntology, Derivation)
    from smsp.ontology import RelType
    from smsp.similarity import Anchor

    def ref(sop, local):
        return ConceptRef(f"sop-{sop}", f"sop-{sop}#{local}")

    def entity(sop, local, label):
        return Concept(f"sop-{sop}#{local}", (label,), ConceptKind.ENTITY)

    from smsp.sop import SopResult
    so = Ontology("so", [Concept("so#S1", ("s1",)), Concept("so#S2", ("s2",)),
                         Concept("so#Sc1", ("sc1",)), Concept("so#Sc2", ("sc2",))])
    sop_a = SopResult(Ontology("sop-a", [entity("a", "c1", "c1a"),
                                         entity("a", "x", "xa"),
                                         entity("a", "p", "pa"),
                                         entity("a", "u", "ua")]), ())
    sop_b = SopResult(Ontology("sop-b", [entity("b", "c2", "c2b"),
                                         entity("b", "y", "yb"),
                                         entity("b", "q", "qb"),
                                         entity("b", "w", "wb")]), ())
    anchors = {
        ref("a", "c1"): Anchor("sop-a#c1", "so#Sc1", 1.0),
        ref("a", "x"): Anchor("sop-a#x", "so#Sc1", 1.0),
        ref("a", "p"): Anchor("sop-a#p", "so#Sc2", 1.0),
        ref("a", "u"): Anchor("sop-a#u", "so#S2", 1.0),
        ref("b", "c2"): Anchor("sop-b#c2", "so#Sc2", 1.0),
        ref("b", "y"): Anchor("sop-b#y", "so#S1", 1.0),
        ref("b", "q"): Anchor("sop-b#q", "so#S2", 1.0),
        ref("b", "w"): Anchor("sop-b#w", "so#S1", 1.0),
    }
    entries = [
        Correspondence.make(ref("a", "x"), ref("b", "y"),
                            RelType.SYNONYM_OF, 1.0, Derivation.ANCHORED),
        Correspondence.make(ref("a", "p"), ref("b", "q"),
                            RelType.SYNONYM_OF, 1.0, Derivation.ANCHORED),
        Correspondence.make(ref("a", "u"), ref("b", "w"),
                            RelType.SYNONYM_OF, 1.0, Derivation.ANCHORED),
    ]
    corr = CorrespondenceOntology(("sop-a", "sop-b"), "so", entries, anchors)
    return so, [sop_a, sop_b], corr
