from __future__ import annotations

from decimal import Decimal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semforge.errors import FnlError
from semforge.fnl import (
    FnlDocument,
    FnlStatement,
    PredicateVocabulary,
    Term,
    default_vocabulary,
    diff_summary,
    lint,
    loads_fnl,
    parse_fnl,
    serialize_fnl,
    slug,
)
from semforge.kgraph import KnowledgeGraph

from .conftest import CORPUS
from .strategies import fnl_documents

VOCAB = default_vocabulary()

THEOREM = """## snippet 6
- "projection theorem" is_a: theorem
  - setup:
    - "u" is_a: subspace
  - premise:
    - u has_notation: $\\mathbb{U}$
  - assertion:
    - $\\mathbb{U}$ has_label: 2
"""


def test_parse_simple_block():
    doc, diags = parse_fnl('## snippet 5\n- "orthocomplement" is_a: subspace\n'
                           '- orthocomplement has_notation: $\\mathbb{U}^\\perp$\n')
    assert diags == []
    first, second = doc.blocks[5]
    assert first.subject == Term("new", "orthocomplement") and first.object == Term("ref", "subspace")
    assert second.object == Term("math", "\\mathbb{U}^\\perp")
    assert second.source_line == 3


def test_object_kinds_decide_term_meaning():
    doc, diags = parse_fnl('## snippet 1\n- x has_description: "a quoted literal"\n- x has_label: 3\n'
                           '- x has_label: 2.50\n- x is_a: "new term"\n')
    assert diags == []
    objs = [s.object for s in doc.blocks[1]]
    assert objs == [Term("lit", "a quoted literal"), Term("lit", 3), Term("lit", Decimal("2.50")),
                    Term("new", "new term")]


def test_theorem_nesting():
    doc, diags = parse_fnl(THEOREM)
    assert diags == []
    (thm,) = doc.blocks[6]
    assert [c.predicate for c in thm.children] == ["setup", "premise", "assertion"]
    assert all(c.is_scope and c.depth == 1 for c in thm.children)
    assert thm.children[2].children[0].object == Term("lit", 2)
    assert len(doc) == 7


@pytest.mark.parametrize("line, code", [
    ("- x is_a: y extra", "MalformedTerm"),
    ("- x frobnicates: y", "UnknownPredicate"),
    ("- x setup: y", "ScopeKeywordMisuse"),
    ("- setup: y", "ScopeKeywordMisuse"),
    ('- x is_a: "unterminated', "MalformedTerm"),
    ("- x has_notation: $\\frac{a$", "MalformedTerm"),
    ("- x has_notation: y", "MalformedTerm"),
    ("- x has_description: $y$", "MalformedTerm"),
    ("- 3 is_a: y", "MalformedTerm"),
    ("x is_a: y", "MalformedTerm"),
    ("   - x is_a: y", "BadIndent"),
    ("    - x is_a: y", "BadIndent"),
    ('- "" is_a: y', "MalformedTerm"),
])
def test_bad_line_invalidates_only_its_block(line, code):
    text = f"## snippet 1\n- a is_a: b\n{line}\n## snippet 2\n- c is_a: d\n"
    doc, diags = parse_fnl(text)
    assert [d.code for d in diags] == [code]
    assert diags[0].line == 3 and diags[0].severity == "error"
    assert doc.ids() == [2]


def test_parse_never_raises_on_garbage():
    for text in ("", "\x00\x01", "## snippet\n", "## snippet 0\n- a is_a: b", "- a is_a: b", b"\xff\xfe"):
        doc, diags = parse_fnl(text)
        assert isinstance(doc, FnlDocument)


def test_header_errors():
    doc, diags = parse_fnl("## snippet 1\n- a is_a: b\n## snippet 1\n- c is_a: d\n")
    assert [d.code for d in diags] == ["BadHeader"]
    assert doc.ids() == [1] and len(doc) == 1
    doc, diags = parse_fnl("- a is_a: b\n")
    assert [d.code for d in diags] == ["MissingHeader"]


def test_default_snippet_for_llm_output():
    doc, diags = parse_fnl("- a is_a: b\n", default_snippet=4)
    assert diags == [] and doc.ids() == [4]


def test_strict_loader():
    with pytest.raises(FnlError) as info:
        loads_fnl("## snippet 1\n- a nope: b\n")
    assert info.value.diagnostics[0].code == "UnknownPredicate"


def test_canonical_serialization():
    text = '## snippet 2\n-   a    is_a:   "x y"  \n\n# a comment\n## snippet 1\n- b has_label: "q\\"uote"\n'
    doc, diags = parse_fnl(text)
    assert diags == []
    assert serialize_fnl(doc) == ('## snippet 1\n- b has_label: "q\\"uote"\n\n'
                                  '## snippet 2\n- a is_a: "x y"\n')


@settings(max_examples=100)
@given(fnl_documents(VOCAB))
def test_round_trip(doc):
    text = serialize_fnl(doc)
    again, diags = parse_fnl(text)
    assert diags == []
    assert again == doc
    assert serialize_fnl(again) == text


@given(st.text(max_size=200))
def test_fuzz_parse_total(text):
    doc, diags = parse_fnl(text)
    # whatever survived must itself round-trip
    again, more = parse_fnl(serialize_fnl(doc))
    assert more == [] and again == doc


def test_vocabulary_toml():
    vocab = PredicateVocabulary.from_toml('theorem_classes = ["lemma"]\n[predicates]\nowns = "entity"\n'
                                          'weight = { object = "literal", doc = "in kg" }\n')
    assert vocab.object_kind("weight") == "literal" and "owns" in vocab
    assert "- `weight:` object is literal; in kg" in vocab.describe()
    with pytest.raises(ValueError):
        PredicateVocabulary({"setup": "entity"})
    with pytest.raises(ValueError):
        PredicateVocabulary({"x": "thing"})


def test_lint_warnings():
    text = ('## snippet 1\n- "a" is_a: thing\n- "a" is_a: thing\n- b is_a: a\n- a has_part: $Q$\n'
            '- a is_a: subspace\n  - premise:\n    - a is_a: a\n')
    doc, diags = parse_fnl(text)
    assert diags == []
    codes = [(d.line, d.code) for d in lint(doc, VOCAB)]
    assert (3, "DuplicateStatement") in codes
    assert (4, "UnresolvedReference") in codes      # b
    assert (2, "UnresolvedReference") in codes      # thing
    assert (5, "UnresolvedNotation") in codes
    assert (7, "ScopeOutsideTheorem") in codes


def test_lint_knows_graph_labels():
    g = KnowledgeGraph()
    g.create_item("inner product space")
    doc, _ = parse_fnl("## snippet 1\n- inner_product_space is_a: inner_product_space\n")
    assert lint(doc, VOCAB, g) == []


def test_lint_structural_errors():
    doc = FnlDocument({1: [FnlStatement(Term("new", "t"), "is_a", Term("ref", "theorem"), 0, [
        FnlStatement(None, "setup", None, 1, []),
        FnlStatement(None, "premise", None, 1, [FnlStatement(Term("ref", "t"), "is_a", Term("ref", "t"), 2)]),
        FnlStatement(None, "premise", None, 1, [FnlStatement(Term("ref", "t"), "is_a", Term("ref", "t"), 2)]),
    ])]})
    codes = {d.code for d in lint(doc, VOCAB) if d.severity == "error"}
    assert codes == {"EmptyScope", "DuplicateScope"}


def test_slug():
    assert slug("Inner product  space") == "inner_product_space"
    assert slug("finite-dimensional") == "finite_dimensional"


def _ten():
    lines = "".join(f"- item{i} is_a: thing\n" for i in range(10))
    return loads_fnl("## snippet 1\n" + lines)


def test_diff_identical_and_guard():
    doc = _ten()
    assert diff_summary(doc, doc).intervention_rate == 0.0
    empty = FnlDocument()
    summary = diff_summary(empty, doc)
    assert (summary.added, summary.removed, summary.modified) == (10, 0, 0)
    assert summary.intervention_rate == 10.0


def test_diff_ten_statements_two_edits():
    old = _ten()
    new, _ = parse_fnl(serialize_fnl(old).replace("- item3 is_a: thing", "- item3 is_a: other")
                       + "- item10 is_a: thing\n")
    summary = diff_summary(old, new)
    assert (summary.added, summary.removed, summary.modified) == (1, 0, 1)
    assert summary.intervention_rate == 0.2


@settings(max_examples=40)
@given(fnl_documents(VOCAB), fnl_documents(VOCAB))
def test_diff_symmetry(a, b):
    ab, ba = diff_summary(a, b), diff_summary(b, a)
    assert ab.added == ba.removed and ab.removed == ba.added and ab.modified == ba.modified


def test_fixture_raw_and_reviewed_parse(corpus_vocab):
    for name in ("raw.fnl", "reviewed.fnl"):
        doc, diags = parse_fnl((CORPUS / name).read_text(encoding="utf-8"), corpus_vocab)
        assert diags == []
        assert doc.ids() == list(range(1, 11))
