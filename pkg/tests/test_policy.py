import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from smsp.policy import (Condition, EntityRef, Modality, ParseError, PolicyRule,
                         PolicySet, RefKind, SourceLang, map_deontic,
                         normalize_policy_set, normalize_rule, parse_kaos_json,
                         parse_ponder, parse_rei, print_kaos_json, print_ponder,
                         print_rei)

CASE1 = "has(P,permit(usePrintingService,[member(P, ITDepartment)]))."
CASE2 = "has(Q, allow(usePrintingService,[member (Q, ITDepartment)]))."


class TestParseRei:
    def test_case1_clause(self):
        ps = parse_rei(CASE1, "a")
        assert len(ps.rules) == 1
        rule = ps.rules[0]
        assert rule.modality is Modality.AUTH_POS
        assert rule.deontic_label == "permit"
        assert rule.subject == EntityRef.variable("P")
        assert rule.action == "usePrintingService"
        assert rule.target is None
        assert rule.conditions == (
            Condition("member", (EntityRef.variable("P"),
                                 EntityRef.named("ITDepartment"))),)

    def test_case2_clause(self):
        rule = parse_rei(CASE2, "b").rules[0]
        assert rule.modality is Modality.AUTH_POS
        assert rule.deontic_label == "allow"
        assert rule.subject == EntityRef.variable("Q")
        assert rule.action == "usePrintingService"

    def test_empty_input_is_empty_set(self):
        assert parse_rei("", "a") == PolicySet("a")
        assert parse_rei("  % only a comment\n", "a") == PolicySet("a")

    def test_missing_argument_list(self):
        with pytest.raises(ParseError) as err:
            parse_rei("has(P, permit).", "a")
        assert "argument list" in str(err.value)
        assert err.value.line == 1
        assert err.value.token == ")"

    def test_error_location_is_1_based(self):
        with pytest.raises(ParseError) as err:
            parse_rei("% comment\nhas(P, permit(a, [b(])).", "a")
        assert err.value.line == 2
        assert err.value.col is not None

    def test_unbalanced_brackets(self):
        with pytest.raises(ParseError):
            parse_rei("has(P, permit(a, [b(P)]).", "a")

    def test_subject_must_be_variable(self):
        with pytest.raises(ParseError):
            parse_rei("has(p, permit(a, [])).", "a")

    def test_comment_and_whitespace_insensitivity(self):
        spaced = "has( P , permit( usePrintingService , [ member( P , ITDepartment ) ] ) ) ."
        dense = "has(P,permit(usePrintingService,[member(P,ITDepartment)]))."
        a = normalize_policy_set(parse_rei(spaced, "a"))
        b = normalize_policy_set(parse_rei(dense, "a"))
        assert a == b

    def test_unbound_uppercase_arg_is_named_entity(self):
        rule = parse_rei(CASE1, "a").rules[0]
        kinds = {a.name: a.kind for a in rule.conditions[0].args}
        assert kinds["P"] is RefKind.VARIABLE
        assert kinds["ITDepartment"] is RefKind.NAMED

    def test_ids_content_derived_and_domain_independent(self):
        one = parse_rei(CASE1, "a").rules[0]
        two = parse_rei(CASE1, "other-domain").rules[0]
        assert one.id == two.id
        assert one.id != parse_rei(CASE2, "a").rules[0].id

    def test_duplicate_clause_gets_suffixed_id(self):
        ps = parse_rei(CASE1 + "\n" + CASE1, "a")
        ids = [r.id for r in ps.rules]
        assert len(set(ids)) == 2
        assert ids[1] == ids[0] + "-2"


class TestParsePonder:
    def test_auth_pos_instance(self):
        text = "inst auth+ p1 { subject S; target Printers; action usePrintingService; }"
        rule = parse_ponder(text, "b").rules[0]
        assert rule.id == "p1"
        assert rule.modality is Modality.AUTH_POS
        assert rule.deontic_label == "auth+"
        assert rule.action == "usePrintingService"
        assert rule.target == EntityRef.named("Printers")

    def test_auth_neg_instance(self):
        text = "inst auth- p2 { subject S; target Printers; action usePrintingService; }"
        assert parse_ponder(text, "b").rules[0].modality is Modality.AUTH_NEG

    def test_oblig_instance(self):
        text = "inst oblig p3 { subject S; action report; }"
        rule = parse_ponder(text, "b").rules[0]
        assert rule.modality is Modality.OBL_POS
        assert rule.deontic_label == "oblig"

    def test_missing_action_clause(self):
        with pytest.raises(ParseError) as err:
            parse_ponder("inst auth+ p3 { subject S; }", "b")
        assert "missing action" in str(err.value)

    def test_missing_subject_clause(self):
        with pytest.raises(ParseError) as err:
            parse_ponder("inst auth+ p3 { action a; }", "b")
        assert "missing subject" in str(err.value)

    def test_duplicate_clause_rejected(self):
        with pytest.raises(ParseError) as err:
            parse_ponder("inst auth+ p { subject S; subject T; action a; }", "b")
        assert "duplicate subject" in str(err.value)
        assert err.value.line == 1

    def test_when_clause_conditions(self):
        text = "inst auth+ p { subject Q; action a; when member(Q, ITDepartment), badged(Q); }"
        rule = parse_ponder(text, "b").rules[0]
        assert [c.predicate for c in rule.conditions] == ["member", "badged"]
        args = rule.conditions[0].args
        assert args[0] == EntityRef.variable("Q")
        assert args[1] == EntityRef.named("ITDepartment")

    def test_duplicate_policy_names_rejected(self):
        text = ("inst auth+ p { subject S; action a; }\n"
                "inst auth+ p { subject S; action b; }")
        with pytest.raises(ParseError) as err:
            parse_ponder(text, "b")
        assert "duplicate policy name" in str(err.value)
        assert err.value.line == 2


class TestParseKaos:
    def test_derived_example(self):
        doc = ('[{"modality":"A+","actor":"P","action":"usePrintingService",'
               '"context":[{"pred":"member","args":["P","ITDepartment"]}]}]')
        rule = parse_kaos_json(doc.encode(), "c").rules[0]
        assert rule.modality is Modality.AUTH_POS
        assert rule.deontic_label == "A+"
        assert rule.subject == EntityRef.named("P")
        assert rule.conditions[0].predicate == "member"

    def test_empty_array(self):
        assert parse_kaos_json(b"[]", "c") == PolicySet("c")

    def test_unknown_modality_is_error(self):
        with pytest.raises(ParseError) as err:
            parse_kaos_json(b'[{"modality":"X","actor":"P","action":"a"}]', "c")
        assert "unknown modality 'X'" in str(err.value)
        assert err.value.path == "entries[0].modality"

    def test_missing_field_named(self):
        with pytest.raises(ParseError) as err:
            parse_kaos_json(b'[{"modality":"A+","actor":"P"}]', "c")
        assert "missing required field 'action'" in str(err.value)

    def test_mistyped_field_named(self):
        with pytest.raises(ParseError) as err:
            parse_kaos_json(b'[{"modality":"A+","actor":"P","action":"a",'
                            b'"context":"nope"}]', "c")
        assert "context" in str(err.value)

    def test_unknown_field_rejected(self):
        with pytest.raises(ParseError) as err:
            parse_kaos_json(b'[{"modality":"A+","actor":"P","action":"a","bogus":1}]',
                            "c")
        assert "unknown field 'bogus'" in str(err.value)

    def test_json_error_carries_location(self):
        with pytest.raises(ParseError) as err:
            parse_kaos_json(b'[{"modality": }]', "c")
        assert err.value.line == 1
        assert err.value.col is not None

    def test_all_four_modalities(self):
        for code, modality in (("A+", Modality.AUTH_POS), ("A-", Modality.AUTH_NEG),
                               ("O+", Modality.OBL_POS), ("O-", Modality.OBL_NEG)):
            doc = json.dumps([{"modality": code, "actor": "x", "action": "a"}])
            assert parse_kaos_json(doc, "c").rules[0].modality is modality


class TestMapDeontic:
    def test_paper_vocabulary(self):
        assert map_deontic("permit") is Modality.AUTH_POS
        assert map_deontic("allow") is Modality.AUTH_POS

    def test_case_insensitive(self):
        assert map_deontic("PERMIT") is Modality.AUTH_POS
        assert map_deontic("Deny") is Modality.AUTH_NEG

    def test_unknown_label_totalized(self):
        assert map_deontic("frobnicate") is Modality.UNKNOWN

    @given(st.text(max_size=30))
    def test_total_over_arbitrary_strings(self, label):
        assert map_deontic(label) in Modality


class TestNormalize:
    def _rule(self, conditions):
        return PolicyRule("r1", "a", SourceLang.REI, Modality.AUTH_POS, "permit",
                          EntityRef.variable("X"), "act", None, tuple(conditions))

    def test_sorts_conditions(self):
        rule = self._rule([Condition("b", (EntityRef.variable("X"),)),
                           Condition("a", (EntityRef.variable("X"),))])
        assert [c.predicate for c in normalize_rule(rule).conditions] == ["a", "b"]

    def test_idempotent(self):
        rule = self._rule([Condition("b"), Condition("a")])
        once = normalize_rule(rule)
        assert normalize_rule(once) == once

    def test_deontic_label_untouched(self):
        rule = self._rule([Condition("z"), Condition("a")])
        assert normalize_rule(rule).deontic_label == "permit"

    @given(st.permutations([
        Condition("m", (EntityRef.named("x"),)),
        Condition("a", (EntityRef.named("y"), EntityRef.named("z"))),
        Condition("a", (EntityRef.named("b"),)),
        Condition("z"),
    ]))
    def test_order_insensitive(self, perm):
        rule = self._rule(perm)
        baseline = normalize_rule(self._rule(sorted(perm, key=Condition.sort_key)))
        assert normalize_rule(rule) == baseline

    def test_worked_example_pair_differs_only_in_subject_and_deontic(self):
        one = normalize_rule(parse_rei(CASE1, "a").rules[0])
        two = normalize_rule(parse_rei(CASE2, "a").rules[0])
        assert one.action == two.action
        assert one.deontic_label != two.deontic_label
        assert one.subject.name != two.subject.name
        # condition shape matches after substituting the subject variable
        preds = lambda r: [(c.predicate, len(c.args)) for c in r.conditions]
        assert preds(one) == preds(two)


PARSERS = {
    SourceLang.REI: (parse_rei, print_rei),
    SourceLang.PONDER: (parse_ponder, print_ponder),
    SourceLang.KAOS: (parse_kaos_json, print_kaos_json),
}


@pytest.mark.parametrize("lang", list(PARSERS))
def test_roundtrip_on_corpus(lang, corpus_files):
    parse, pretty = PARSERS[lang]
    files = corpus_files[lang]
    assert files, f"no corpus files for {lang}"
    for path in files:
        first = parse(path.read_text(), "d")
        second = parse(pretty(first), "d")
        assert normalize_policy_set(second) == normalize_policy_set(first), path


@pytest.fixture(scope="module")
def corpus_files():
    from conftest import FIXTURES
    corpus = FIXTURES / "corpus"
    return {
        SourceLang.REI: sorted(corpus.glob("*.rei")),
        SourceLang.PONDER: sorted(corpus.glob("*.ponder")),
        SourceLang.KAOS: sorted(corpus.glob("*.kaos.json")),
    }


@settings(max_examples=120)
@given(st.text(max_size=80))
def test_rei_total_over_text(text):
    try:
        assert isinstance(parse_rei(text, "f"), PolicySet)
    except ParseError:
        pass


@settings(max_examples=120)
@given(st.text(max_size=80))
def test_ponder_total_over_text(text):
    try:
        assert isinstance(parse_ponder(text, "f"), PolicySet)
    except ParseError:
        pass


@settings(max_examples=120)
@given(st.binary(max_size=80))
def test_kaos_total_over_bytes(data):
    try:
        assert isinstance(parse_kaos_json(data, "f"), PolicySet)
    except ParseError:
        pass
