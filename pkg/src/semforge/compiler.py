"""Compile reviewed FNL into the knowledge graph.

Snippet blocks are compiled in id order and statements in document order,
so URI allocation is deterministic. Compilation is all-or-nothing: on any
error the graph is rolled back to its state before the call.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import (
    AmbiguousNotation,
    CompileError,
    DuplicateScope,
    EmptyScope,
    GraphError,
    Recompiled,
    ScopeKeywordMisuse,
    UnresolvedReference,
)
from .fnl import Diagnostic, FnlDocument, FnlStatement, PredicateVocabulary, Term, default_vocabulary, slug
from .kgraph import SCOPE_KINDS, Item, KnowledgeGraph, Literal, ScopeItem, Uri


@dataclass
class CompileReport:
    created: list[Uri] = field(default_factory=list)
    asserted: list[Uri] = field(default_factory=list)
    diagnostics: list[Diagnostic] = field(default_factory=list)

    def summary(self) -> str:
        lines = [f"created entities: {len(self.created)}", f"asserted statements: {len(self.asserted)}"]
        lines += [str(d) for d in self.diagnostics]
        return "\n".join(lines) + "\n"


class Bindings(dict):
    """Identifier (and raw new-term string) -> URI, for one compilation unit."""

    def bind(self, term_text: str, uri: Uri) -> None:
        self[term_text] = uri
        self.setdefault(slug(term_text), uri)


def _label_lookup(ident: str, graph: KnowledgeGraph) -> Uri | None:
    for label in (ident, ident.replace("_", " ")):
        uri = graph.item_by_label(label)
        if uri is not None:
            return uri
    matches = [it.uri for it in graph.items() if not isinstance(it, ScopeItem) and slug(it.label) == ident]
    if len(matches) == 1:
        return matches[0]
    if len(matches) > 1:
        raise CompileError(f"AmbiguousReference: {ident} matches {len(matches)} labels")
    return None


def resolve_term(term: Term, graph: KnowledgeGraph, bindings: Bindings, provenance: int | None = None,
                 line: int | None = None, report: CompileReport | None = None) -> Uri:
    """Map an FNL term to a graph URI.

    Order: local bindings, then item labels, then notations (for math).
    A quoted new term creates an item and binds it for the rest of the unit.
    """
    if term.kind == "new":
        if term.value in bindings:
            return bindings[term.value]
        existing = graph.item_by_label(term.value)
        if existing is not None:
            if report is not None:
                report.diagnostics.append(Diagnostic(
                    "warning", line or 0, 1, "NewTermExists", f'"{term.value}" already exists; reusing it'))
            bindings.bind(term.value, existing)
            return existing
        uri = graph.create_item(term.value, provenance=provenance)
        if report is not None:
            report.created.append(uri)
        bindings.bind(term.value, uri)
        return uri
    if term.kind == "ref":
        if term.value in bindings:
            return bindings[term.value]
        uri = _label_lookup(term.value, graph)
        if uri is None:
            raise UnresolvedReference(term.value, line)
        return uri
    if term.kind == "math":
        candidates = graph.lookup_notation(term.value)
        if len(candidates) > 1:
            raise AmbiguousNotation(term.value, candidates, line)
        if not candidates:
            raise UnresolvedReference(f"${term.value}$", line)
        return candidates[0]
    raise CompileError(f"a literal cannot stand for an entity: {term.canonical()}", line)


class _Unit:
    def __init__(self, graph: KnowledgeGraph, vocab: PredicateVocabulary, report: CompileReport):
        self.graph = graph
        self.vocab = vocab
        self.report = report
        self.bindings = Bindings()
        self.snippet: int | None = None

    @property
    def created(self) -> set:
        return set(self.report.created)

    def relation(self, keyword: str) -> Uri:
        uri = self.graph.relation_by_label(keyword)
        if uri is None:
            uri = self.graph.create_relation(keyword)
            self.report.created.append(uri)
        return uri

    def assert_(self, subject, predicate, obj, scope=None) -> Uri:
        uri = self.graph.assert_statement(subject, predicate, obj, scope=scope)
        self.report.asserted.append(uri)
        return uri

    def resolve(self, term: Term, line: int) -> Uri:
        return resolve_term(term, self.graph, self.bindings, self.snippet, line, self.report)

    def object_of(self, st: FnlStatement):
        kind = self.vocab.object_kind(st.predicate)
        term = st.object
        if term.kind == "lit":
            return Literal.of(term.value)
        if term.kind == "math" and kind != "entity":
            return Literal(term.value, "str")
        return self.resolve(term, st.source_line)

    def statement(self, st: FnlStatement, scope: Uri | None = None) -> Uri:
        if st.is_scope:
            raise ScopeKeywordMisuse(f"'{st.predicate}:' block outside a theorem statement", st.source_line)
        if st.predicate not in self.vocab:
            raise CompileError(f"UnknownPredicate: {st.predicate}", st.source_line)
        subject = self.resolve(st.subject, st.source_line)
        obj = self.object_of(st)
        if st.predicate in ("has_notation", "has_description") and isinstance(obj, Literal):
            field_name = "notation" if st.predicate == "has_notation" else "description"
            current = getattr(self.graph.get(subject), field_name, None)
            if current is None and subject in self.created:
                self.graph.annotate(subject, **{field_name: obj.value})
            elif current != obj.value:
                # pre-existing entities are never modified
                self.report.diagnostics.append(Diagnostic(
                    "warning", st.source_line, 1, "FieldNotUpdated",
                    f"{self.graph.label_of(subject)!r} keeps its {field_name}; statement recorded only"))
        self.assert_(subject, self.relation(st.predicate), obj, scope=scope)
        if st.children:
            compile_theorem_block(st, self.graph, _unit=self, _subject=subject)
        return subject


def compile_theorem_block(block: FnlStatement, graph: KnowledgeGraph, *, vocab=None, _unit=None, _subject=None) -> Uri:
    """Build the setup/premise/assertion compound under a theorem statement.

    Creates one scope item per scope block present, linked from the theorem
    by ``has_scope``; statements inside a block carry that scope's URI.
    """
    unit = _unit or _Unit(graph, vocab or default_vocabulary(), CompileReport())
    theorem = _subject if _subject is not None else unit.statement(
        FnlStatement(block.subject, block.predicate, block.object, block.depth, [], block.source_line))
    if any(not c.is_scope for c in block.children):
        raise ScopeKeywordMisuse("only scope blocks may be nested under a statement", block.source_line)
    seen = set()
    for child in block.children:
        kind = child.predicate
        if kind not in SCOPE_KINDS:
            raise ScopeKeywordMisuse(f"unknown scope '{kind}'", child.source_line)
        if kind in seen:
            raise DuplicateScope(kind, child.source_line)
        seen.add(kind)
        if not child.children:
            raise EmptyScope(kind, child.source_line)
    missing = [k for k in SCOPE_KINDS if k not in seen]
    if missing:
        unit.report.diagnostics.append(Diagnostic(
            "warning", block.source_line, 1, "PartialTheorem",
            f"{graph.label_of(theorem)!r} has no {', '.join(missing)} block"))
    for child in block.children:
        try:
            scope = graph.create_scope_item(theorem, child.predicate, provenance=unit.snippet)
        except GraphError as exc:
            raise CompileError(str(exc), child.source_line) from None
        unit.report.created.append(scope)
        unit.assert_(theorem, graph.builtin("has_scope"), scope)
        for st in child.children:
            unit.statement(st, scope=scope)
    return theorem


def compile_fnl(fnl: FnlDocument, graph: KnowledgeGraph, vocab: PredicateVocabulary | None = None) -> CompileReport:
    """Add the statements of ``fnl`` to ``graph``; the graph is unchanged on error."""
    vocab = vocab or default_vocabulary()
    provenance = {it.provenance for it in graph.items() if it.provenance is not None}
    for sid in fnl.ids():
        if sid in provenance:
            raise Recompiled(sid)
    report = CompileReport()
    unit = _Unit(graph, vocab, report)
    backup = graph.copy()
    try:
        for sid in fnl.ids():
            unit.snippet = sid
            for st in fnl.blocks[sid]:
                unit.statement(st)
    except (CompileError, GraphError) as exc:
        graph.restore(backup)
        if isinstance(exc, GraphError) and not isinstance(exc, CompileError):
            raise CompileError(str(exc)) from exc
        raise
    return report


def items_from_snippet(graph: KnowledgeGraph, snippet_id: int) -> list[Item]:
    return [it for it in graph.items() if it.provenance == snippet_id]
