import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import FIXTURES, make_taxonomy
from smsp.ontology import (Concept, ConceptKind, Ontology, OntologyError,
                           Provenance, Relation, RelType, add_relation,
                           export_turtle, import_turtle, load_ontology,
                           ontology_to_doc, save_ontology, taxonomy_query)


def mini(concepts=1):
    cs = [Concept(f"so#c{i}", (f"label {i}",)) for i in range(concepts)]
    return Ontology("so", cs)


class TestLoadSave:
    def test_minimal_document(self):
        doc = {"id": "so", "concepts": [{"id": "so#a", "labels": ["a"],
                                         "kind": "Generic"}], "relations": []}
        ont = load_ontology(json.dumps(doc))
        assert len(ont.concepts) == 1

    def test_dangling_endpoint_names_concept(self):
        doc = {"id": "so",
               "concepts": [{"id": "so#a", "labels": ["a"], "kind": "Generic"}],
               "relations": [{"source": "so#a", "target": "so#ghost",
                              "type": "is_a", "provenance": "Authored",
                              "confidence": 1.0}]}
        with pytest.raises(OntologyError) as err:
            load_ontology(json.dumps(doc))
        assert "so#ghost" in str(err.value)

    def test_cycle_rejected_and_named(self):
        doc = {"id": "so",
               "concepts": [{"id": "so#a", "labels": ["a"], "kind": "Generic"},
                            {"id": "so#b", "labels": ["b"], "kind": "Generic"}],
               "relations": [
                   {"source": "so#a", "target": "so#b", "type": "is_a",
                    "provenance": "Authored", "confidence": 1.0},
                   {"source": "so#b", "target": "so#a", "type": "is_a",
                    "provenance": "Authored", "confidence": 1.0}]}
        with pytest.raises(OntologyError) as err:
            load_ontology(json.dumps(doc))
        assert "cycle" in str(err.value)
        assert "so#a" in str(err.value)

    def test_non_canonical_symmetric_order_rejected(self):
        doc = {"id": "so",
               "concepts": [{"id": "so#a", "labels": ["a"], "kind": "Generic"},
                            {"id": "so#b", "labels": ["b"], "kind": "Generic"}],
               "relations": [{"source": "so#b", "target": "so#a",
                              "type": "synonym_of", "provenance": "Authored",
                              "confidence": 1.0}]}
        with pytest.raises(OntologyError) as err:
            load_ontology(json.dumps(doc))
        assert "source < target" in str(err.value)

    def test_authored_confidence_must_be_one(self):
        with pytest.raises(OntologyError):
            Relation("so#a", "so#b", RelType.IS_A, Provenance.AUTHORED, 0.5)

    def test_malformed_document(self):
        with pytest.raises(OntologyError):
            load_ontology(b"{not json")
        with pytest.raises(OntologyError):
            load_ontology(json.dumps({"id": "so"}))

    def test_fixture_loads_clean(self, security_core):
        assert security_core.id == "security-core"
        permit = security_core.get("security-core#Permit")
        assert permit.labels[0] == "permit"

    def test_save_load_identity_on_fixture(self, security_core):
        data = save_ontology(security_core)
        assert load_ontology(data) == security_core
        assert save_ontology(load_ontology(data)) == data

    def test_golden_fixture_bytes(self, security_core):
        # The committed fixture is canonical: re-saving is byte-identical.
        assert save_ontology(security_core) == (FIXTURES / "security-core.json").read_bytes()

    def test_insertion_order_invariance(self):
        cs = [Concept("so#a", ("a",)), Concept("so#b", ("b",)), Concept("so#c", ("c",))]
        rels = [Relation("so#a", "so#b", RelType.IS_A),
                Relation("so#b", "so#c", RelType.IS_A)]
        one = Ontology("so", cs, rels)
        two = Ontology("so", reversed(cs), reversed(rels))
        assert save_ontology(one) == save_ontology(two)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.integers(2, 10))
    def test_save_load_identity_generated(self, seed, size):
        ont = make_taxonomy(random.Random(seed), size)
        data = save_ontology(ont)
        assert load_ontology(data) == ont
        assert save_ontology(load_ontology(data)) == data


class TestAddRelation:
    def test_symmetric_canonicalization(self):
        ont = mini(2)
        one = add_relation(ont, Relation("so#c1", "so#c0", RelType.SYNONYM_OF,
                                         Provenance.CASE1, 0.9))
        two = add_relation(one, Relation("so#c0", "so#c1", RelType.SYNONYM_OF,
                                         Provenance.CASE1, 0.9))
        assert len(two.relations) == 1
        assert two.relations[0].source == "so#c0"

    def test_existing_triple_keeps_higher_confidence(self):
        ont = mini(2)
        low = add_relation(ont, Relation("so#c0", "so#c1", RelType.RELATED_TO,
                                         Provenance.CASE2, 0.5))
        high = add_relation(low, Relation("so#c0", "so#c1", RelType.RELATED_TO,
                                          Provenance.CASE2, 0.8))
        assert high.relations[0].confidence == 0.8
        again = add_relation(high, Relation("so#c0", "so#c1", RelType.RELATED_TO,
                                            Provenance.CASE2, 0.3))
        assert again.relations[0].confidence == 0.8

    def test_cycle_introduction_is_error(self):
        ont = mini(2)
        one = add_relation(ont, Relation("so#c0", "so#c1", RelType.IS_A))
        with pytest.raises(OntologyError) as err:
            add_relation(one, Relation("so#c1", "so#c0", RelType.IS_A))
        assert "cycle" in str(err.value)

    def test_missing_endpoint_is_error(self):
        with pytest.raises(OntologyError):
            add_relation(mini(1), Relation("so#c0", "so#ghost", RelType.IS_A))

    def test_equivalence_injection_grows_by_one(self, security_core):
        before = len(security_core.relations)
        grown = add_relation(security_core, Relation(
            "security-core#Oblige", "security-core#Permit",
            RelType.EQUIVALENT_TO, Provenance.CASE1, 0.9))
        assert len(grown.relations) == before + 1

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_idempotent_and_commutative_for_symmetric(self, seed):
        rng = random.Random(seed)
        ont = make_taxonomy(rng, 6)
        ids = [c.id for c in ont.concepts]
        a, b = rng.sample(ids, 2)
        rel = Relation(a, b, RelType.RELATED_TO, Provenance.CASE3, 0.7)
        flipped = Relation(b, a, RelType.RELATED_TO, Provenance.CASE3, 0.7)
        once = add_relation(ont, rel)
        assert add_relation(once, rel) == once
        assert add_relation(ont, flipped) == once


class TestTurtle:
    def test_empty_ontology_prefix_block_only(self):
        data = export_turtle(Ontology("so", (), ()))
        text = data.decode()
        assert text.startswith("@prefix ex:")
        assert all(line.startswith("@prefix") for line in text.strip().splitlines())

    def test_single_concept_single_label_statement(self):
        ont = Ontology("so", [Concept("so#Permit", ("permit",), ConceptKind.DEONTIC)])
        text = export_turtle(ont).decode()
        assert text.count('rdfs:label "permit"') == 1
        assert "<http://smsp.example/ontology/so#Permit>" in text

    def test_mapping_table(self, security_core):
        text = export_turtle(security_core).decode()
        assert "rdfs:subClassOf" in text
        ont = Ontology("so", [Concept("so#a", ("a",)), Concept("so#b", ("b",)),
                              Concept("so#c", ("c",)), Concept("so#d", ("d",)),
                              Concept("so#e", ("e",)), Concept("so#f", ("f",)),
                              Concept("so#g", ("g",))],
                       [Relation("so#a", "so#b", RelType.PART_OF),
                        Relation("so#c", "so#d", RelType.SYNONYM_OF),
                        Relation("so#e", "so#f", RelType.EQUIVALENT_TO),
                        Relation("so#f", "so#g", RelType.RELATED_TO),
                        Relation("so#a", "so#g", RelType.HOMONYM_OF)])
        text = export_turtle(ont).decode()
        for predicate in ("ex:partOf", "ex:synonymOf", "owl:equivalentClass",
                          "rdfs:seeAlso", "ex:homonymOf"):
            assert predicate in text

    def test_byte_stable_across_runs_and_orders(self, security_core):
        assert export_turtle(security_core) == export_turtle(security_core)
        reordered = Ontology(security_core.id, reversed(security_core.concepts),
                             reversed(security_core.relations))
        assert export_turtle(reordered) == export_turtle(security_core)

    def test_golden_turtle(self, security_core):
        golden = FIXTURES.parent / "tests" / "golden" / "security-core.ttl"
        assert export_turtle(security_core) == golden.read_bytes()

    def test_reimport_isomorphic(self, security_core):
        back = import_turtle(export_turtle(security_core), security_core.id)
        assert {(c.id, c.labels, c.kind) for c in back.concepts} == \
               {(c.id, c.labels, c.kind) for c in security_core.concepts}
        assert {r.triple() for r in back.relations} == \
               {r.triple() for r in security_core.relations}

    def test_literal_escaping_roundtrip(self):
        ont = Ontology("so", [Concept("so#x", ('say "hi"\n\tback\\',))])
        back = import_turtle(export_turtle(ont), "so")
        assert back.get("so#x").labels == ('say "hi"\n\tback\\',)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.integers(2, 9))
    def test_reimport_isomorphic_generated(self, seed, size):
        ont = make_taxonomy(random.Random(seed), size)
        back = import_turtle(export_turtle(ont), ont.id)
        assert {(c.id, c.labels, c.kind) for c in back.concepts} == \
               {(c.id, c.labels, c.kind) for c in ont.concepts}
        assert {r.triple() for r in back.relations} == \
               {r.triple() for r in ont.relations}


class TestTaxonomyQuery:
    def chain(self):
        cs = [Concept("so#a", ("a",)), Concept("so#b", ("b",)), Concept("so#c", ("c",))]
        rels = [Relation("so#a", "so#b", RelType.IS_A),
                Relation("so#b", "so#c", RelType.IS_A)]
        return Ontology("so", cs, rels)

    def test_root_with_itself(self):
        ont = self.chain()
        info = taxonomy_query(ont, "so#c", "so#c")
        assert (info.lca, info.depth1, info.depth2, info.depth_lca) == ("so#c", 0, 0, 0)

    def test_three_node_chain(self):
        info = taxonomy_query(self.chain(), "so#a", "so#b")
        assert (info.lca, info.depth1, info.depth2, info.depth_lca) == ("so#b", 2, 1, 1)

    def test_disjoint_roots_have_no_lca(self):
        ont = Ontology("so", [Concept("so#a", ("a",)), Concept("so#b", ("b",))])
        assert taxonomy_query(ont, "so#a", "so#b").lca is None

    def test_unknown_id_is_error(self):
        with pytest.raises(OntologyError):
            taxonomy_query(self.chain(), "so#a", "so#ghost")

    def test_lca_tie_breaks_by_smallest_id(self):
        # diamond: d is_a b, d is_a c, b is_a a, c is_a a; query(b, c) -> a
        cs = [Concept(f"so#{x}", (x,)) for x in "abcd"]
        rels = [Relation("so#d", "so#b", RelType.IS_A),
                Relation("so#d", "so#c", RelType.IS_A),
                Relation("so#b", "so#a", RelType.IS_A),
                Relation("so#c", "so#a", RelType.IS_A)]
        ont = Ontology("so", cs, rels)
        assert taxonomy_query(ont, "so#b", "so#c").lca == "so#a"
