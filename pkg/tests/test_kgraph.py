from __future__ import annotations

import itertools
from decimal import Decimal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semforge import kgraph
from semforge.errors import (
    DuplicateLabel,
    EmptyLabel,
    GraphError,
    InvalidScope,
    ParseError,
    PredicateNotRelation,
    UnknownEntity,
)
from semforge.kgraph import BUILTIN_RELATIONS, KnowledgeGraph, Literal, Uri

from .strategies import graphs, labels


@pytest.fixture
def small():
    g = KnowledgeGraph("t")
    vs = g.create_item("vector space", description="closed under + and scaling")
    sub = g.create_item("subspace")
    perp = g.create_item("orthocomplement", notation=r"\mathbb{U}^\perp", provenance=5)
    sc = g.builtin("subclass_of")
    s1 = g.assert_statement(sub, sc, vs)
    s2 = g.assert_statement(perp, sc, sub)
    return g, vs, sub, perp, s1, s2


def test_uris_are_sequential_per_kind(small):
    g, vs, sub, perp, s1, s2 = small
    assert [str(u) for u in (vs, sub, perp)] == ["kb://t/I1", "kb://t/I2", "kb://t/I3"]
    assert str(s2) == "kb://t/S2"
    assert [r.label for r in g.relations()] == list(BUILTIN_RELATIONS)
    assert str(g.create_relation("has_property")) == "kb://t/R9"


def test_uri_parse_and_order():
    assert Uri.parse("kb://main/R12") == Uri("main", "relation", 12)
    assert Uri("a", "item", 10) > Uri("a", "item", 9)
    assert Uri("a", "statement", 1) > Uri("a", "relation", 99)
    for bad in ("kb://main/I0", "kb:/main/I1", "kb://main/X1", "kb://ma in/I1"):
        with pytest.raises(ValueError):
            Uri.parse(bad)


def test_label_rules(small):
    g, *_ = small
    with pytest.raises(DuplicateLabel):
        g.create_item("subspace")
    with pytest.raises(EmptyLabel):
        g.create_item("")
    # relation labels live in their own namespace
    g.create_relation("subspace")


def test_statement_checks(small):
    g, vs, sub, perp, s1, s2 = small
    with pytest.raises(UnknownEntity):
        g.assert_statement(Uri("t", "item", 99), g.builtin("is_a"), vs)
    with pytest.raises(PredicateNotRelation):
        g.assert_statement(vs, sub, vs)
    with pytest.raises(InvalidScope):
        g.assert_statement(vs, g.builtin("is_a"), sub, scope=sub)
    with pytest.raises(GraphError):
        g.assert_statement(g.builtin("is_a"), g.builtin("is_a"), vs)


def test_reification_statement_about_statement(small):
    g, vs, sub, perp, s1, s2 = small
    meta = g.create_relation("stated_in")
    s3 = g.assert_statement(s1, meta, Literal.of("chapter 2"))
    assert g.query(s1, None, None)[0].uri == s3
    assert g.query(None, None, s1) == []


def test_scope_items(small):
    g, vs, *_ = small
    thm = g.create_item("projection theorem")
    setup = g.create_scope_item(thm, "setup", provenance=6)
    item = g.get(setup)
    assert item.label == "projection theorem.setup" and item.parent == thm and item.scope_kind == "setup"
    with pytest.raises(GraphError):
        g.create_scope_item(thm, "setup")
    with pytest.raises(GraphError):
        g.create_scope_item(thm, "conclusion")
    st_ = g.assert_statement(vs, g.builtin("is_a"), thm, scope=setup)
    assert g.get(st_).scope == setup
    assert g.scope_items(thm) == [item]


def test_annotate_fills_only_unset(small):
    g, vs, sub, *_ = small
    g.annotate(sub, notation="W")
    assert g.lookup_notation(" W ") == [sub]
    g.annotate(sub, notation="W")  # same value: no-op
    with pytest.raises(GraphError):
        g.annotate(vs, description="something else")


def test_notation_lookup_ignores_whitespace(small):
    g, vs, sub, perp, *_ = small
    assert g.lookup_notation(r"\mathbb{ U }^ \perp") == [perp]
    assert g.lookup_notation(r"\mathbb{U}") == []


def test_literals():
    assert Literal.of(3) == Literal(3, "int")
    assert Literal.of(0.5) == Literal(Decimal("0.5"), "dec")
    with pytest.raises(TypeError):
        Literal.of(True)
    for lit in (Literal("a\tb\n\"q\"", "str"), Literal(-7, "int"), Literal(Decimal("1.250"), "dec")):
        assert Literal.decode(lit.encode()) == lit


def brute_force(g, s, p, o):
    return [st for st in g.statements
            if (s is None or st.subject == s) and (p is None or st.predicate == p) and (o is None or st.object == o)]


@settings(max_examples=40)
@given(graphs(max_statements=200), st.data())
def test_query_matches_brute_force_all_shapes(g, data):
    if not g.statements:
        assert g.query() == []
        return
    probe = data.draw(st.sampled_from(g.statements))
    for mask in itertools.product([False, True], repeat=3):
        s, p, o = (v if bound else None for v, bound in zip((probe.subject, probe.predicate, probe.object), mask))
        assert g.query(s, p, o) == brute_force(g, s, p, o)


@settings(max_examples=60)
@given(graphs(max_statements=300))
def test_serialize_round_trip(g):
    text = kgraph.serialize(g)
    again = kgraph.parse(text)
    assert again == g
    assert kgraph.serialize(again) == text
    assert again.indexes() == again.rebuild_indexes()


@given(graphs(max_statements=50))
def test_copy_restore(g):
    snapshot = g.copy()
    g.create_item("a label nobody else uses \x00")
    g.restore(snapshot)
    assert g == snapshot
    assert kgraph.serialize(g) == kgraph.serialize(snapshot)


@given(labels)
def test_label_escaping(label):
    g = KnowledgeGraph()
    g.create_item(label, description=label)
    text = kgraph.serialize(g)
    assert text.count("\n") == 2  # header, one entity line
    assert kgraph.parse(text) == g


def test_serialized_format_is_stable(small):
    g, *_ = small
    assert kgraph.serialize(g) == (
        "kgt 1\tnamespace=t\n"
        "E\tkb://t/I1\titem\tvector space\tdescription=closed under + and scaling\n"
        "E\tkb://t/I2\titem\tsubspace\n"
        "E\tkb://t/I3\titem\torthocomplement\tnotation=\\\\mathbb{U}^\\\\perp\tprovenance=5\n"
        "S\tkb://t/S1\tkb://t/I2\tkb://t/R2\tkb://t/I1\n"
        "S\tkb://t/S2\tkb://t/I3\tkb://t/R2\tkb://t/I2\n"
    )


@pytest.mark.parametrize("text, fragment", [
    ("", "missing header"),
    ("kgt 2\n", "expected header"),
    ("kgt 1\nE\tkb://main/I1\titem\n", "needs uri"),
    ("kgt 1\nS\tkb://main/S1\tkb://main/I1\tkb://main/R1\tkb://main/I1\n", "undeclared URI kb://main/I1"),
    ("kgt 1\nE\tkb://main/I1\titem\ta\nE\tkb://main/I2\titem\ta\n", "duplicate label"),
    ("kgt 1\nE\tkb://main/I1\titem\ta\tcolour=red\n", "unknown field"),
    ("kgt 1\nE\tkb://other/I1\titem\ta\n", "outside namespace"),
    ("kgt 1\nE\tkb://main/I1\titem\ta\\q\n", "bad escape"),
    ("kgt 1\nE\tkb://main/I1\titem\ta\nS\tkb://main/S1\tkb://main/I1\tkb://main/I1\tkb://main/I1\n",
     "expected a relation URI"),
])
def test_parse_errors_name_the_line(text, fragment):
    with pytest.raises(ParseError) as info:
        kgraph.parse(text)
    assert fragment in str(info.value)
    assert str(info.value).startswith("line ")


def test_builder_script(small):
    g, vs, sub, perp, s1, s2 = small
    thm = g.create_item("t")
    scope = g.create_scope_item(thm, "premise")
    g.assert_statement(sub, g.builtin("is_a"), Literal.of("x y"), scope=scope,
                       qualifiers=[(g.builtin("has_label"), Literal.of(2))])
    script = kgraph.export_builder_script(g)
    lines = script.splitlines()
    assert lines[:2] == ["# semforge builder script v1", "namespace t"]
    assert lines[2].startswith("# builtin relations: R1=is_a")
    assert 'item I3 "orthocomplement" notation="\\\\mathbb{U}^\\\\perp" provenance=5' in lines
    assert 'scope I5 "t.premise" kind=premise parent=I4' in lines
    assert 'assert S3 I2 R1 str:"x y" scope=I5 qualifier=R3:int:2' in lines
    assert script == kgraph.export_builder_script(kgraph.parse(kgraph.serialize(g)))
