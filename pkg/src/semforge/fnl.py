"""Formal Natural Language: controlled subject-predicate-object lines.

An FNL file is a sequence of snippet blocks::

    ## snippet 5
    - "orthocomplement" is_a: subspace
    - orthocomplement has_notation: $\\mathbb{U}^\\perp$
    - "projection theorem" is_a: theorem
      - premise:
        - ...

Each bullet is one statement. Indentation (two spaces per level) nests
scope blocks (``setup:``, ``premise:``, ``assertion:``) under the statement
that introduces a theorem. Quoted strings introduce new terms, bare
lowercase identifiers refer to known terms and ``$...$`` carries LaTeX math.
"""

from __future__ import annotations

import re
import sys
from collections import Counter
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Union

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import FnlError
from .texutil import braces_balanced, normalize_math

SCOPE_KEYWORDS = ("setup", "premise", "assertion")
OBJECT_KINDS = ("entity", "literal", "math", "any")
IDENTIFIER = re.compile(r"[a-z][a-z0-9_]*")

_HEADER = re.compile(r"##[ \t]+snippet[ \t]+([0-9]+)[ \t]*")
_NUMBER = re.compile(r"-?[0-9]+(?:\.[0-9]+)?")

DEFAULT_VOCABULARY_PATH = Path(__file__).with_name("data") / "vocabulary.toml"


# -- vocabulary --------------------------------------------------------------

@dataclass(frozen=True)
class PredicateVocabulary:
    entries: dict
    theorem_classes: tuple[str, ...] = ("theorem",)
    descriptions: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for key, kind in self.entries.items():
            if not IDENTIFIER.fullmatch(key):
                raise ValueError(f"predicate {key!r} is not a lowercase identifier")
            if key in SCOPE_KEYWORDS:
                raise ValueError(f"scope keyword {key!r} cannot be a predicate")
            if kind not in OBJECT_KINDS:
                raise ValueError(f"predicate {key!r}: object kind must be one of {OBJECT_KINDS}")

    def __contains__(self, keyword) -> bool:
        return keyword in self.entries

    def object_kind(self, keyword: str) -> str:
        return self.entries[keyword]

    @classmethod
    def from_toml(cls, text: str) -> "PredicateVocabulary":
        data = tomllib.loads(text)
        entries, descriptions = {}, {}
        for key, spec in data.get("predicates", {}).items():
            if isinstance(spec, str):
                entries[key] = spec
            else:
                entries[key] = spec["object"]
                if "doc" in spec:
                    descriptions[key] = spec["doc"]
        return cls(entries, tuple(data.get("theorem_classes", ("theorem",))), descriptions)

    @classmethod
    def load(cls, path=None) -> "PredicateVocabulary":
        return cls.from_toml(Path(path or DEFAULT_VOCABULARY_PATH).read_text(encoding="utf-8"))

    def describe(self) -> str:
        """Markdown listing used to fill the vocabulary slot of the prompt."""
        lines = []
        for key in self.entries:
            doc = self.descriptions.get(key, "")
            lines.append(f"- `{key}:` object is {self.entries[key]}" + (f"; {doc}" if doc else ""))
        lines.append("- scope blocks: " + ", ".join(f"`{k}:`" for k in SCOPE_KEYWORDS))
        return "\n".join(lines)


def default_vocabulary() -> PredicateVocabulary:
    return PredicateVocabulary.load()


# -- syntax tree -------------------------------------------------------------

@dataclass(frozen=True)
class Term:
    kind: str  # "ref", "new", "math" or "lit"
    value: Union[str, int, Decimal]

    def canonical(self) -> str:
        if self.kind == "ref":
            return self.value
        if self.kind == "math":
            return f"${self.value}$"
        if isinstance(self.value, str):
            return '"' + self.value.replace("\\", "\\\\").replace('"', '\\"') + '"'
        return str(self.value)


@dataclass
class FnlStatement:
    subject: Term | None
    predicate: str
    object: Term | None
    depth: int = 0
    children: list = field(default_factory=list)
    source_line: int = field(default=0, compare=False)

    @property
    def is_scope(self) -> bool:
        return self.subject is None

    def line_text(self) -> str:
        if self.is_scope:
            body = f"{self.predicate}:"
        else:
            body = f"{self.subject.canonical()} {self.predicate}: {self.object.canonical()}"
        return "  " * self.depth + "- " + body

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass
class FnlDocument:
    blocks: dict = field(default_factory=dict)  # snippet id -> list[FnlStatement]

    def ids(self) -> list[int]:
        return sorted(self.blocks)

    def statements(self):
        for sid in self.ids():
            for top in self.blocks[sid]:
                yield from top.walk()

    def restricted(self, below: int) -> "FnlDocument":
        return FnlDocument({k: v for k, v in self.blocks.items() if k < below})

    def __len__(self) -> int:
        return sum(1 for _ in self.statements())


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" or "warning"
    line: int
    column: int
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.severity}: {self.code}: {self.message}"


# -- parsing -----------------------------------------------------------------

class _LineError(Exception):
    def __init__(self, column: int, code: str, message: str):
        self.column = column
        self.code = code
        self.message = message


def _read_term(text: str, pos: int) -> tuple[str, object, int]:
    """Read one term starting at ``pos``; returns (surface kind, value, end)."""
    if pos >= len(text):
        raise _LineError(pos + 1, "MalformedTerm", "missing term")
    ch = text[pos]
    if ch == '"':
        out = []
        i = pos + 1
        while i < len(text):
            c = text[i]
            if c == "\\" and i + 1 < len(text) and text[i + 1] in '"\\':
                out.append(text[i + 1])
                i += 2
                continue
            if c == '"':
                value = "".join(out)
                if not value.strip():
                    raise _LineError(pos + 1, "MalformedTerm", "empty quoted term")
                return "quoted", value, i + 1
            out.append(c)
            i += 1
        raise _LineError(pos + 1, "MalformedTerm", "unterminated quoted term")
    if ch == "$":
        i = pos + 1
        while i < len(text):
            if text[i] == "\\" and i + 1 < len(text):
                i += 2
                continue
            if text[i] == "$":
                value = text[pos + 1:i]
                if not value.strip():
                    raise _LineError(pos + 1, "MalformedTerm", "empty math term")
                if not braces_balanced(value):
                    raise _LineError(pos + 1, "MalformedTerm", "unbalanced braces in math term")
                return "math", value, i + 1
            i += 1
        raise _LineError(pos + 1, "MalformedTerm", "unterminated math term")
    m = _NUMBER.match(text, pos)
    if m and (m.end() == len(text) or not text[m.end()].isalnum()):
        s = m.group()
        return "number", (Decimal(s) if "." in s else int(s)), m.end()
    m = IDENTIFIER.match(text, pos)
    if m:
        return "ident", m.group(), m.end()
    raise _LineError(pos + 1, "MalformedTerm", f"cannot read a term at {text[pos:pos + 12]!r}")


def _object_term(surface: str, value, kind: str, column: int) -> Term:
    if surface == "number":
        if kind in ("literal", "any"):
            return Term("lit", value)
        raise _LineError(column, "MalformedTerm", f"number not allowed where {kind} object is expected")
    if surface == "quoted":
        return Term("new", value) if kind == "entity" else Term("lit", value)
    if surface == "math":
        if kind == "literal":
            raise _LineError(column, "MalformedTerm", "math not allowed where a literal is expected")
        return Term("math", value)
    if kind in ("literal", "math"):
        raise _LineError(column, "MalformedTerm", f"reference not allowed where {kind} object is expected")
    return Term("ref", value)


def _parse_bullet(content: str, offset: int, vocab: PredicateVocabulary):
    """Parse the text after ``- ``; ``offset`` is the 0-based column of content."""
    m = re.fullmatch(r"([a-z][a-z0-9_]*):[ \t]*", content)
    if m and m.group(1) in SCOPE_KEYWORDS:
        return None, m.group(1), None
    surface, value, pos = _read_term(content, 0)
    if surface == "ident" and content[pos:pos + 1] == ":":
        if value in SCOPE_KEYWORDS:
            raise _LineError(offset + 1, "ScopeKeywordMisuse", f"scope block '{value}:' takes no object")
        raise _LineError(offset + 1, "MalformedTerm", "statement has no subject")
    if surface == "number":
        raise _LineError(offset + 1, "MalformedTerm", "a literal cannot be a subject")
    subject = Term({"quoted": "new", "math": "math", "ident": "ref"}[surface], value)
    gap = re.compile(r"[ \t]+").match(content, pos)
    if not gap:
        raise _LineError(offset + pos + 1, "MalformedTerm", "expected a space after the subject")
    pos = gap.end()
    pm = re.compile(r"([a-z][a-z0-9_]*):").match(content, pos)
    if not pm:
        raise _LineError(offset + pos + 1, "MalformedTerm", "expected 'predicate:'")
    predicate = pm.group(1)
    if predicate in SCOPE_KEYWORDS:
        raise _LineError(offset + pos + 1, "ScopeKeywordMisuse",
                         f"'{predicate}' is a scope keyword, not a predicate")
    if predicate not in vocab:
        raise _LineError(offset + pos + 1, "UnknownPredicate", f"'{predicate}' is not in the vocabulary")
    pos = pm.end()
    gap = re.compile(r"[ \t]*").match(content, pos)
    pos = gap.end()
    surface, value, end = _read_term(content, pos)
    obj = _object_term(surface, value, vocab.object_kind(predicate), offset + pos + 1)
    if content[end:].strip():
        raise _LineError(offset + end + 1, "MalformedTerm", f"unexpected text {content[end:].strip()[:20]!r}")
    return subject, predicate, obj


def parse_fnl(text, vocab: PredicateVocabulary | None = None, default_snippet: int | None = None):
    """Parse FNL text into ``(document, diagnostics)``.

    A block containing any error is left out of the document entirely;
    other blocks are unaffected. Never raises on malformed input.
    """
    vocab = vocab or default_vocabulary()
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    doc = FnlDocument()
    diags: list[Diagnostic] = []
    current: int | None = default_snippet
    block: list[FnlStatement] = []
    block_ok = True
    stack: list[FnlStatement] = []
    seen_headers: set[int] = set()

    def error(line, column, code, message):
        diags.append(Diagnostic("error", line, column, code, message))

    def close_block():
        if current is None:
            return
        if current == default_snippet and current not in seen_headers and not block:
            return
        if block_ok:
            doc.blocks[current] = list(block)

    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip(" \t\r")
        if not line.strip():
            continue
        hm = _HEADER.fullmatch(line)
        if hm:
            close_block()
            sid = int(hm.group(1))
            block, stack, block_ok = [], [], True
            current = sid
            if sid in seen_headers or sid < 1:
                error(lineno, 1, "BadHeader",
                      f"snippet block {sid} repeated" if sid >= 1 else "snippet id must be positive")
                block_ok = False
            seen_headers.add(sid)
            continue
        if line.lstrip().startswith("#"):
            continue
        if current is None:
            error(lineno, 1, "MissingHeader", "statement before any '## snippet <id>' header")
            continue
        bm = re.match(r"([ \t]*)-[ \t]+", line)
        if not bm:
            error(lineno, 1, "MalformedTerm", "expected a '- ' bullet")
            block_ok = False
            continue
        indent = bm.group(1)
        if "\t" in indent or len(indent) % 2:
            error(lineno, 1, "BadIndent", "indent must be a multiple of two spaces")
            block_ok = False
            continue
        depth = len(indent) // 2
        if depth > len(stack):
            error(lineno, 1, "BadIndent", f"nesting jumps to level {depth} from level {len(stack) - 1}")
            block_ok = False
            continue
        try:
            subject, predicate, obj = _parse_bullet(line[bm.end():], bm.end(), vocab)
        except _LineError as exc:
            error(lineno, exc.column, exc.code, exc.message)
            block_ok = False
            continue
        del stack[depth:]
        st = FnlStatement(subject, predicate, obj, depth, [], lineno)
        if st.is_scope and stack and stack[-1].is_scope:
            error(lineno, 1, "ScopeKeywordMisuse", "scope block nested directly in another scope block")
            block_ok = False
            continue
        (stack[-1].children if stack else block).append(st)
        stack.append(st)
    close_block()
    return doc, diags


def loads_fnl(text, vocab: PredicateVocabulary | None = None) -> FnlDocument:
    """Strict variant of :func:`parse_fnl` raising :class:`FnlError` on any error."""
    doc, diags = parse_fnl(text, vocab)
    errors = [d for d in diags if d.severity == "error"]
    if errors:
        raise FnlError(errors)
    return doc


def serialize_block(statements) -> str:
    return "".join(st.line_text() + "\n" for top in statements for st in top.walk())


def serialize_fnl(doc: FnlDocument) -> str:
    return "\n".join(f"## snippet {sid}\n" + serialize_block(doc.blocks[sid]) for sid in doc.ids())


# -- review support ----------------------------------------------------------

def slug(text: str) -> str:
    """Identifier form of a term: ``"Inner product space"`` -> ``inner_product_space``."""
    return re.sub(r"[^a-z0-9]+", "_", text.lower()).strip("_")


def _theorem_introducing(st: FnlStatement | None, vocab: PredicateVocabulary) -> bool:
    if st is None or st.is_scope or st.predicate != "is_a" or st.object.kind not in ("ref", "new"):
        return False
    return slug(st.object.value) in {slug(c) for c in vocab.theorem_classes}


def _graph_knows(ident: str, graph) -> bool:
    if graph is None:
        return False
    if graph.item_by_label(ident) or graph.item_by_label(ident.replace("_", " ")):
        return True
    return any(slug(item.label) == ident for item in graph.items())


def lint(doc: FnlDocument, vocab: PredicateVocabulary | None = None, graph=None) -> list[Diagnostic]:
    """Review warnings (and structural errors) for a parsed document."""
    vocab = vocab or default_vocabulary()
    diags = []
    introduced: set[str] = set()
    notations: set[str] = set()
    seen: set[tuple] = set()

    def warn(st, code, message, severity="warning"):
        diags.append(Diagnostic(severity, st.source_line, 1, code, message))

    def visit(st: FnlStatement, parent: FnlStatement | None, path: tuple):
        key = path + (st.line_text(),)
        if key in seen:
            warn(st, "DuplicateStatement", f"repeats an earlier statement: {st.line_text().strip()}")
        seen.add(key)
        if st.is_scope:
            if not _theorem_introducing(parent, vocab):
                warn(st, "ScopeOutsideTheorem",
                     f"'{st.predicate}:' block is not under a statement introducing a "
                     + "/".join(vocab.theorem_classes))
            if not st.children:
                warn(st, "EmptyScope", f"'{st.predicate}:' block has no statements", "error")
        else:
            entity_object = vocab.object_kind(st.predicate) == "entity"
            for term, as_entity in ((st.subject, True), (st.object, entity_object)):
                if term.kind == "ref" and term.value not in introduced and not _graph_knows(term.value, graph):
                    warn(st, "UnresolvedReference", f"'{term.value}' is neither in the graph nor introduced earlier")
                elif term.kind == "math" and as_entity:
                    known = normalize_math(term.value) in notations
                    if not known and graph is not None:
                        known = bool(graph.lookup_notation(term.value))
                    if not known:
                        warn(st, "UnresolvedNotation", f"no entity has the notation ${term.value}$")
            if st.predicate == "has_notation" and st.object.kind == "math":
                notations.add(normalize_math(st.object.value))
            if st.subject.kind == "new":
                introduced.add(slug(st.subject.value))
            if st.object.kind == "new":
                introduced.add(slug(st.object.value))
            kinds = {c.is_scope for c in st.children}
            if st.children and kinds != {True}:
                warn(st, "UnexpectedNesting", "only scope blocks may be nested under a statement", "error")
            counts = Counter(c.predicate for c in st.children if c.is_scope)
            for kind, n in counts.items():
                if n > 1:
                    warn(st, "DuplicateScope", f"{n} '{kind}:' blocks under one statement", "error")
        for child in st.children:
            visit(child, st, key)

    for sid in doc.ids():
        for top in doc.blocks[sid]:
            visit(top, None, (sid,))
    return sorted(diags, key=lambda d: (d.line, d.code))


@dataclass(frozen=True)
class DiffSummary:
    added: int
    removed: int
    modified: int
    intervention_rate: float


def _flatten(doc: FnlDocument):
    """(snippet id, ancestor path, statement) for every node, ancestors as canonical text."""
    out = []

    def visit(sid, st, path):
        out.append((sid, path, st))
        for child in st.children:
            visit(sid, child, path + (st.line_text().strip(),))

    for sid in doc.ids():
        for top in doc.blocks[sid]:
            visit(sid, top, ())
    return out


def diff_summary(old: FnlDocument, new: FnlDocument) -> DiffSummary:
    """Count review edits between an LLM draft and its reviewed version.

    Statements match exactly on canonical text within the same snippet and
    ancestor path. Unmatched statements sharing that position and subject
    pair up as modifications; the rest are additions or removals.
    """
    def exact(st):
        return st.line_text().strip()

    def anchor(sid, path, st):
        head = st.predicate if st.is_scope else st.subject.canonical()
        return (sid, path, st.depth, head)

    old_nodes, new_nodes = _flatten(old), _flatten(new)
    old_exact = Counter((sid, path, exact(st)) for sid, path, st in old_nodes)
    new_exact = Counter((sid, path, exact(st)) for sid, path, st in new_nodes)
    common = old_exact & new_exact

    def leftovers(nodes):
        budget = Counter(common)
        rest = Counter()
        for sid, path, st in nodes:
            key = (sid, path, exact(st))
            if budget[key]:
                budget[key] -= 1
            else:
                rest[anchor(sid, path, st)] += 1
        return rest

    old_rest, new_rest = leftovers(old_nodes), leftovers(new_nodes)
    modified = sum((old_rest & new_rest).values())
    removed = sum(old_rest.values()) - modified
    added = sum(new_rest.values()) - modified
    rate = (added + removed + modified) / max(1, len(old_nodes))
    return DiffSummary(added, removed, modified, rate)
