"""Knowledge graph of items, relations and reified statements.

Every node and edge type carries a URI of the form ``kb://<namespace>/<K><n>``
(K is ``I``, ``R`` or ``S``) plus a human-readable label. Statements are
themselves addressable, so a statement may be the subject or object of
another statement.

The graph serializes to a line-oriented, tab-separated text format (``.kgt``)
that produces small, readable diffs under version control, and exports a
plain imperative builder script (``.kgb``).
"""

from __future__ import annotations

import json
import re
from collections import defaultdict
from dataclasses import dataclass, field, replace
from decimal import Decimal, InvalidOperation
from typing import Iterable, Union

from .errors import (
    DuplicateLabel,
    EmptyLabel,
    GraphError,
    InvalidScope,
    ParseError,
    PredicateNotRelation,
    UnknownEntity,
)
from .texutil import braces_balanced, normalize_math

ITEM = "item"
RELATION = "relation"
STATEMENT = "statement"

_LETTER = {ITEM: "I", RELATION: "R", STATEMENT: "S"}
_KIND_OF_LETTER = {v: k for k, v in _LETTER.items()}
_KIND_ORDER = {ITEM: 0, RELATION: 1, STATEMENT: 2}

BUILTIN_RELATIONS = (
    "is_a",
    "subclass_of",
    "has_label",
    "has_description",
    "has_notation",
    "has_scope",
    "has_source_snippet",
    "has_part",
)
SCOPE_KINDS = ("setup", "premise", "assertion")

_NAMESPACE = re.compile(r"[A-Za-z0-9_.-]+")
_URI = re.compile(r"kb://([A-Za-z0-9_.-]+)/([IRS])([1-9][0-9]*)")


@dataclass(frozen=True)
class Uri:
    namespace: str
    kind: str
    sequence: int

    def __post_init__(self):
        if self.kind not in _LETTER:
            raise ValueError(f"bad URI kind {self.kind!r}")
        if not _NAMESPACE.fullmatch(self.namespace):
            raise ValueError(f"bad namespace {self.namespace!r}")
        if self.sequence < 1:
            raise ValueError("URI sequence must be positive")

    def __str__(self) -> str:
        return f"kb://{self.namespace}/{_LETTER[self.kind]}{self.sequence}"

    def __repr__(self) -> str:
        return f"Uri({str(self)!r})"

    @property
    def short(self) -> str:
        return f"{_LETTER[self.kind]}{self.sequence}"

    def sort_key(self):
        return (self.namespace, _KIND_ORDER[self.kind], self.sequence)

    def __lt__(self, other: "Uri") -> bool:
        return self.sort_key() < other.sort_key()

    @classmethod
    def parse(cls, text: str) -> "Uri":
        m = _URI.fullmatch(text)
        if not m:
            raise ValueError(f"not a URI: {text!r}")
        return cls(m.group(1), _KIND_OF_LETTER[m.group(2)], int(m.group(3)))


@dataclass(frozen=True)
class Literal:
    """A string or number; only ever appears in object position."""

    value: Union[str, int, Decimal]
    kind: str

    def __post_init__(self):
        expected = {"str": str, "int": int, "dec": Decimal}.get(self.kind)
        if expected is None:
            raise ValueError(f"bad literal kind {self.kind!r}")
        if type(self.value) is not expected:
            raise TypeError(f"literal kind {self.kind} needs {expected.__name__}")
        if self.kind == "dec" and not self.value.is_finite():
            raise ValueError("decimal literal must be finite")

    @classmethod
    def of(cls, value) -> "Literal":
        if isinstance(value, bool):
            raise TypeError("bool is not a literal type")
        if isinstance(value, str):
            return cls(value, "str")
        if isinstance(value, int):
            return cls(value, "int")
        if isinstance(value, float):
            return cls(Decimal(repr(value)), "dec")
        if isinstance(value, Decimal):
            return cls(value, "dec")
        raise TypeError(f"unsupported literal value {value!r}")

    def encode(self) -> str:
        if self.kind == "str":
            return "lit:str:" + json.dumps(self.value, ensure_ascii=False)
        return f"lit:{self.kind}:{self.value}"

    @classmethod
    def decode(cls, text: str) -> "Literal":
        if text.startswith("lit:str:"):
            value = json.loads(text[8:])
            if not isinstance(value, str):
                raise ValueError("string literal must be a JSON string")
            return cls(value, "str")
        if text.startswith("lit:int:") and re.fullmatch(r"-?[0-9]+", text[8:]):
            return cls(int(text[8:]), "int")
        if text.startswith("lit:dec:"):
            try:
                return cls(Decimal(text[8:]), "dec")
            except InvalidOperation:
                pass
        raise ValueError(f"bad literal {text!r}")

    def __str__(self) -> str:
        return json.dumps(self.value, ensure_ascii=False) if self.kind == "str" else str(self.value)


Term = Union[Uri, Literal]


@dataclass(frozen=True)
class Item:
    uri: Uri
    label: str
    description: str | None = None
    notation: str | None = None
    provenance: int | None = None


@dataclass(frozen=True)
class ScopeItem(Item):
    """The setup, premise or assertion part of a theorem-like item."""

    scope_kind: str = ""
    parent: Uri | None = None


@dataclass(frozen=True)
class Relation:
    uri: Uri
    label: str
    builtin: bool = False


@dataclass(frozen=True)
class Statement:
    uri: Uri
    subject: Uri
    predicate: Uri
    object: Term
    scope: Uri | None = None
    qualifiers: tuple[tuple[Uri, Term], ...] = ()


Entity = Union[Item, Relation]


def _check_notation(notation: str | None) -> None:
    if notation is None:
        return
    if not notation.strip():
        raise GraphError("notation must be nonempty")
    if not braces_balanced(notation):
        raise GraphError(f"notation has unbalanced braces: {notation!r}")


@dataclass
class _Indexes:
    labels: dict = field(default_factory=dict)
    relation_labels: dict = field(default_factory=dict)
    notations: dict = field(default_factory=dict)

    def as_tuple(self):
        return (
            dict(self.labels),
            dict(self.relation_labels),
            {k: list(v) for k, v in self.notations.items()},
        )


class KnowledgeGraph:
    """Single-namespace store of entities and reified statements.

    Mutating methods are not thread safe; readers may share a graph that is
    no longer being modified.
    """

    def __init__(self, namespace: str = "main"):
        if not _NAMESPACE.fullmatch(namespace):
            raise ValueError(f"bad namespace {namespace!r}")
        self.namespace = namespace
        self._entities: dict[Uri, Entity] = {}
        self._statements: dict[Uri, Statement] = {}
        self._next = {ITEM: 1, RELATION: 1, STATEMENT: 1}
        self._idx = _Indexes()
        self._by_subject: dict = defaultdict(list)
        self._by_predicate: dict = defaultdict(list)
        self._by_object: dict = defaultdict(list)
        for label in BUILTIN_RELATIONS:
            uri = self._allocate(RELATION)
            self._entities[uri] = Relation(uri, label, builtin=True)
            self._idx.relation_labels[label] = uri

    # -- allocation and lookup ----------------------------------------------

    def _allocate(self, kind: str) -> Uri:
        uri = Uri(self.namespace, kind, self._next[kind])
        self._next[kind] += 1
        return uri

    def __contains__(self, uri) -> bool:
        return uri in self._entities or uri in self._statements

    def get(self, uri: Uri):
        if uri in self._entities:
            return self._entities[uri]
        if uri in self._statements:
            return self._statements[uri]
        raise UnknownEntity(uri)

    def item_by_label(self, label: str) -> Uri | None:
        return self._idx.labels.get(label)

    def relation_by_label(self, label: str) -> Uri | None:
        return self._idx.relation_labels.get(label)

    def builtin(self, label: str) -> Uri:
        return self._idx.relation_labels[label]

    def lookup_notation(self, notation: str) -> list[Uri]:
        return list(self._idx.notations.get(normalize_math(notation), ()))

    def label_of(self, ref: Term) -> str:
        if isinstance(ref, Literal):
            return str(ref)
        ent = self.get(ref)
        return ent.label if isinstance(ent, (Item, Relation)) else str(ref)

    def items(self) -> list[Item]:
        return [e for u, e in sorted(self._entities.items()) if isinstance(e, Item)]

    def relations(self) -> list[Relation]:
        return [e for u, e in sorted(self._entities.items()) if isinstance(e, Relation)]

    def scope_items(self, parent: Uri | None = None) -> list[ScopeItem]:
        return [
            e for e in self.items()
            if isinstance(e, ScopeItem) and (parent is None or e.parent == parent)
        ]

    @property
    def statements(self) -> list[Statement]:
        return list(self._statements.values())

    def __len__(self) -> int:
        return len(self._statements)

    # -- mutation -----------------------------------------------------------

    def create_item(
        self,
        label: str,
        description: str | None = None,
        notation: str | None = None,
        provenance: int | None = None,
    ) -> Uri:
        self._check_new_label(label)
        _check_notation(notation)
        uri = self._allocate(ITEM)
        self._store_item(Item(uri, label, description, notation, provenance))
        return uri

    def create_scope_item(self, parent: Uri, kind: str, provenance: int | None = None) -> Uri:
        owner = self._entities.get(parent)
        if not isinstance(owner, Item) or isinstance(owner, ScopeItem):
            raise UnknownEntity(parent)
        if kind not in SCOPE_KINDS:
            raise GraphError(f"bad scope kind {kind!r}")
        if any(s.scope_kind == kind for s in self.scope_items(parent)):
            raise GraphError(f"{owner.label!r} already has a {kind} scope")
        label = f"{owner.label}.{kind}"
        self._check_new_label(label)
        uri = self._allocate(ITEM)
        self._store_item(ScopeItem(uri, label, provenance=provenance, scope_kind=kind, parent=parent))
        return uri

    def create_relation(self, label: str) -> Uri:
        if not label:
            raise EmptyLabel()
        if label in self._idx.relation_labels:
            raise DuplicateLabel(label)
        uri = self._allocate(RELATION)
        self._entities[uri] = Relation(uri, label)
        self._idx.relation_labels[label] = uri
        return uri

    def annotate(self, uri: Uri, description: str | None = None, notation: str | None = None) -> None:
        """Fill unset description/notation fields; never overwrites a different value."""
        item = self._entities.get(uri)
        if not isinstance(item, Item):
            raise UnknownEntity(uri)
        _check_notation(notation)
        changes = {}
        for name, value in (("description", description), ("notation", notation)):
            if value is None:
                continue
            current = getattr(item, name)
            if current is None:
                changes[name] = value
            elif current != value:
                raise GraphError(f"{item.label!r} already has a different {name}")
        if changes:
            updated = replace(item, **changes)
            self._entities[uri] = updated
            if "notation" in changes:
                self._idx.notations.setdefault(normalize_math(updated.notation), []).append(uri)

    def assert_statement(
        self,
        subject: Uri,
        predicate: Uri,
        obj: Term,
        scope: Uri | None = None,
        qualifiers: Iterable[tuple[Uri, Term]] = (),
    ) -> Uri:
        self._check_node(subject)
        self._check_predicate(predicate)
        self._check_object(obj)
        if scope is not None and not isinstance(self._entities.get(scope), ScopeItem):
            raise InvalidScope(scope)
        quals = tuple((r, o) for r, o in qualifiers)
        for rel, qobj in quals:
            self._check_predicate(rel)
            self._check_object(qobj)
        uri = self._allocate(STATEMENT)
        self._store_statement(Statement(uri, subject, predicate, obj, scope, quals))
        return uri

    def _check_new_label(self, label: str) -> None:
        if not label:
            raise EmptyLabel()
        if label in self._idx.labels:
            raise DuplicateLabel(label)

    def _check_node(self, ref) -> None:
        if not isinstance(ref, Uri) or ref not in self:
            raise UnknownEntity(ref)
        if ref.kind == RELATION:
            raise GraphError(f"a relation cannot be a statement node: {ref}")

    def _check_predicate(self, ref) -> None:
        if not isinstance(ref, Uri) or ref not in self:
            raise UnknownEntity(ref)
        if not isinstance(self._entities.get(ref), Relation):
            raise PredicateNotRelation(ref)

    def _check_object(self, obj) -> None:
        if isinstance(obj, Literal):
            return
        self._check_node(obj)

    def _store_item(self, item: Item) -> None:
        self._entities[item.uri] = item
        self._idx.labels[item.label] = item.uri
        if item.notation is not None:
            self._idx.notations.setdefault(normalize_math(item.notation), []).append(item.uri)

    def _store_statement(self, st: Statement) -> None:
        self._statements[st.uri] = st
        self._by_subject[st.subject].append(st.uri)
        self._by_predicate[st.predicate].append(st.uri)
        self._by_object[st.object].append(st.uri)

    # -- query --------------------------------------------------------------

    def query(self, subject: Term | None = None, predicate: Term | None = None, obj: Term | None = None) -> list[Statement]:
        """Statements matching every bound position, in assertion order."""
        for term in (subject, predicate, obj):
            if isinstance(term, Uri) and term not in self:
                raise UnknownEntity(term)
        if subject is None and predicate is None and obj is None:
            return self.statements
        candidates = []
        for term, index in ((subject, self._by_subject), (predicate, self._by_predicate), (obj, self._by_object)):
            if term is not None:
                candidates.append(index.get(term, ()))
        smallest = min(candidates, key=len)
        out = []
        for uri in smallest:
            st = self._statements[uri]
            if subject is not None and st.subject != subject:
                continue
            if predicate is not None and st.predicate != predicate:
                continue
            if obj is not None and st.object != obj:
                continue
            out.append(st)
        return out

    # -- integrity ----------------------------------------------------------

    def rebuild_indexes(self):
        """Indexes recomputed from entity contents, in the same shape as ``indexes()``."""
        fresh = _Indexes()
        for uri, ent in sorted(self._entities.items()):
            if isinstance(ent, Relation):
                fresh.relation_labels[ent.label] = uri
            else:
                fresh.labels[ent.label] = uri
                if ent.notation is not None:
                    fresh.notations.setdefault(normalize_math(ent.notation), []).append(uri)
        return fresh.as_tuple()

    def indexes(self):
        return self._idx.as_tuple()

    def copy(self) -> "KnowledgeGraph":
        g = KnowledgeGraph.__new__(KnowledgeGraph)
        g.namespace = self.namespace
        g._entities = dict(self._entities)
        g._statements = dict(self._statements)
        g._next = dict(self._next)
        labels, rlabels, notations = self._idx.as_tuple()
        g._idx = _Indexes(labels, rlabels, notations)
        g._by_subject = defaultdict(list, {k: list(v) for k, v in self._by_subject.items()})
        g._by_predicate = defaultdict(list, {k: list(v) for k, v in self._by_predicate.items()})
        g._by_object = defaultdict(list, {k: list(v) for k, v in self._by_object.items()})
        return g

    def restore(self, other: "KnowledgeGraph") -> None:
        """Replace this graph's state with ``other``'s (used to roll back)."""
        self.__dict__.update(other.copy().__dict__)

    def __eq__(self, other) -> bool:
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return (
            self.namespace == other.namespace
            and self._entities == other._entities
            and list(self._statements.values()) == list(other._statements.values())
        )

    def __repr__(self) -> str:
        n_items = sum(isinstance(e, Item) for e in self._entities.values())
        return f"<KnowledgeGraph {self.namespace}: {n_items} items, {len(self._statements)} statements>"


# -- text serialization ------------------------------------------------------

HEADER = "kgt 1"
_ESCAPES = {"\\": "\\\\", "\t": "\\t", "\n": "\\n", "\r": "\\r"}
_UNESCAPES = {"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}


def _esc(text: str) -> str:
    return "".join(_ESCAPES.get(ch, ch) for ch in text)


def _unesc(text: str, lineno: int) -> str:
    out = []
    it = iter(text)
    for ch in it:
        if ch == "\\":
            nxt = next(it, "")
            if nxt not in _UNESCAPES:
                raise ParseError(lineno, f"bad escape \\{nxt}")
            out.append(_UNESCAPES[nxt])
        else:
            out.append(ch)
    return "".join(out)


def _encode_term(term: Term) -> str:
    return term.encode() if isinstance(term, Literal) else str(term)


def serialize(graph: KnowledgeGraph) -> str:
    """Deterministic ``.kgt`` text; builtin relations are implicit."""
    header = HEADER if graph.namespace == "main" else f"{HEADER}\tnamespace={graph.namespace}"
    lines = [header]
    for uri, ent in sorted(graph._entities.items()):
        if isinstance(ent, Relation):
            if not ent.builtin:
                lines.append(f"E\t{uri}\trelation\t{_esc(ent.label)}")
            continue
        kind = "scope" if isinstance(ent, ScopeItem) else "item"
        fields = ["E", str(uri), kind, _esc(ent.label)]
        if ent.description is not None:
            fields.append("description=" + _esc(ent.description))
        if ent.notation is not None:
            fields.append("notation=" + _esc(ent.notation))
        if ent.provenance is not None:
            fields.append(f"provenance={ent.provenance}")
        if isinstance(ent, ScopeItem):
            fields.append(f"scope_kind={ent.scope_kind}")
            fields.append(f"parent={ent.parent}")
        lines.append("\t".join(fields))
    for st in graph._statements.values():
        fields = ["S", str(st.uri), str(st.subject), str(st.predicate), _encode_term(st.object)]
        if st.scope is not None:
            fields.append(f"scope={st.scope}")
        for rel, qobj in st.qualifiers:
            fields.append(f"q:{rel}={_encode_term(qobj)}")
        lines.append("\t".join(fields))
    return "\n".join(lines) + "\n"


def parse(text: str) -> KnowledgeGraph:
    """Inverse of :func:`serialize`; raises :class:`ParseError` with a line number."""
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError(1, "missing header")
    head = lines[0].split("\t")
    if head[0] != HEADER:
        raise ParseError(1, f"expected header {HEADER!r}")
    namespace = "main"
    for opt in head[1:]:
        if not opt.startswith("namespace="):
            raise ParseError(1, f"unknown header option {opt!r}")
        namespace = opt[len("namespace="):]
    try:
        graph = KnowledgeGraph(namespace)
    except ValueError as exc:
        raise ParseError(1, str(exc)) from None

    def uri_of(token: str, lineno: int, kind: str | None = None) -> Uri:
        try:
            uri = Uri.parse(token)
        except ValueError:
            raise ParseError(lineno, f"bad URI {token!r}") from None
        if uri.namespace != namespace:
            raise ParseError(lineno, f"URI {token} is outside namespace {namespace!r}")
        if kind is not None and uri.kind != kind:
            raise ParseError(lineno, f"expected a {kind} URI, got {token}")
        return uri

    def term_of(token: str, lineno: int) -> Term:
        if token.startswith("lit:"):
            try:
                return Literal.decode(token)
            except (ValueError, TypeError):
                raise ParseError(lineno, f"bad literal {token!r}") from None
        return uri_of(token, lineno)

    pending_scopes = []
    statements = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        tag = fields[0]
        if tag == "E":
            if len(fields) < 4:
                raise ParseError(lineno, "entity line needs uri, kind and label")
            _, uri_text, kind, label = fields[:4]
            label = _unesc(label, lineno)
            if not label:
                raise ParseError(lineno, "empty label")
            expected = RELATION if kind == "relation" else ITEM
            if kind not in ("item", "scope", "relation"):
                raise ParseError(lineno, f"unknown entity kind {kind!r}")
            uri = uri_of(uri_text, lineno, expected)
            if uri in graph._entities:
                raise ParseError(lineno, f"duplicate URI {uri}")
            opts = {}
            for opt in fields[4:]:
                key, sep, value = opt.partition("=")
                if not sep or key in opts:
                    raise ParseError(lineno, f"bad field {opt!r}")
                opts[key] = _unesc(value, lineno)
            if kind == "relation":
                if opts:
                    raise ParseError(lineno, "relations take no fields")
                if label in graph._idx.relation_labels:
                    raise ParseError(lineno, f"duplicate relation label {label!r}")
                graph._entities[uri] = Relation(uri, label)
                graph._idx.relation_labels[label] = uri
            else:
                allowed = {"description", "notation", "provenance"}
                if kind == "scope":
                    allowed |= {"scope_kind", "parent"}
                unknown = set(opts) - allowed
                if unknown:
                    raise ParseError(lineno, f"unknown field {sorted(unknown)[0]!r}")
                if label in graph._idx.labels:
                    raise ParseError(lineno, f"duplicate label {label!r}")
                prov = opts.get("provenance")
                if prov is not None and not re.fullmatch(r"[0-9]+", prov):
                    raise ParseError(lineno, f"bad provenance {prov!r}")
                common = dict(
                    description=opts.get("description"),
                    notation=opts.get("notation"),
                    provenance=int(prov) if prov is not None else None,
                )
                try:
                    _check_notation(common["notation"])
                except GraphError as exc:
                    raise ParseError(lineno, str(exc)) from None
                if kind == "scope":
                    if opts.get("scope_kind") not in SCOPE_KINDS or "parent" not in opts:
                        raise ParseError(lineno, "scope item needs scope_kind and parent")
                    parent = uri_of(opts["parent"], lineno, ITEM)
                    item = ScopeItem(uri, label, scope_kind=opts["scope_kind"], parent=parent, **common)
                    pending_scopes.append((lineno, item))
                else:
                    item = Item(uri, label, **common)
                graph._store_item(item)
            graph._next[uri.kind] = max(graph._next[uri.kind], uri.sequence + 1)
        elif tag == "S":
            statements.append((lineno, fields))
        else:
            raise ParseError(lineno, f"unknown record type {tag!r}")

    seen_kinds = set()
    for lineno, scope in pending_scopes:
        owner = graph._entities.get(scope.parent)
        if not isinstance(owner, Item) or isinstance(owner, ScopeItem):
            raise ParseError(lineno, f"scope parent {scope.parent} is not a declared item")
        if (scope.parent, scope.scope_kind) in seen_kinds:
            raise ParseError(lineno, f"second {scope.scope_kind} scope for {scope.parent}")
        seen_kinds.add((scope.parent, scope.scope_kind))

    last_uri = None
    for lineno, fields in statements:
        if len(fields) < 5:
            raise ParseError(lineno, "statement line needs uri, subject, predicate and object")
        uri = uri_of(fields[1], lineno, STATEMENT)
        if uri in graph._statements:
            raise ParseError(lineno, f"duplicate URI {uri}")
        if last_uri is not None and uri < last_uri:
            raise ParseError(lineno, f"statement {uri} is out of order")
        last_uri = uri
        subject = uri_of(fields[2], lineno)
        predicate = uri_of(fields[3], lineno, RELATION)
        obj = term_of(fields[4], lineno)
        scope = None
        quals = []
        for opt in fields[5:]:
            if opt.startswith("scope=") and scope is None and not quals:
                scope = uri_of(opt[6:], lineno, ITEM)
            elif opt.startswith("q:"):
                rel_text, sep, obj_text = opt[2:].partition("=")
                if not sep:
                    raise ParseError(lineno, f"bad qualifier {opt!r}")
                quals.append((uri_of(rel_text, lineno, RELATION), term_of(obj_text, lineno)))
            else:
                raise ParseError(lineno, f"bad field {opt!r}")
        for ref in [subject, predicate, obj, scope] + [x for q in quals for x in q]:
            if isinstance(ref, Uri) and ref not in graph:
                raise ParseError(lineno, f"undeclared URI {ref}")
        try:
            graph._check_node(subject)
            graph._check_object(obj)
            for rel, qobj in quals:
                graph._check_predicate(rel)
                graph._check_object(qobj)
        except GraphError as exc:
            raise ParseError(lineno, str(exc)) from None
        if scope is not None and not isinstance(graph._entities.get(scope), ScopeItem):
            raise ParseError(lineno, f"{scope} is not a scope item")
        graph._store_statement(Statement(uri, subject, predicate, obj, scope, tuple(quals)))
        graph._next[STATEMENT] = uri.sequence + 1
    return graph


# -- builder script export ---------------------------------------------------

def _script_term(term: Term) -> str:
    if isinstance(term, Literal):
        return term.encode()[4:]
    return term.short


def export_builder_script(graph: KnowledgeGraph) -> str:
    """Imperative builder script: one directive per entity, one per statement."""
    q = lambda s: json.dumps(s, ensure_ascii=False)  # noqa: E731
    lines = [
        "# semforge builder script v1",
        f"namespace {graph.namespace}",
        "# builtin relations: "
        + ", ".join(f"{r.uri.short}={r.label}" for r in graph.relations() if r.builtin),
    ]
    for uri, ent in sorted(graph._entities.items()):
        if isinstance(ent, Relation):
            if not ent.builtin:
                lines.append(f"relation {uri.short} {q(ent.label)}")
            continue
        if isinstance(ent, ScopeItem):
            parts = ["scope", uri.short, q(ent.label), f"kind={ent.scope_kind}", f"parent={ent.parent.short}"]
        else:
            parts = ["item", uri.short, q(ent.label)]
        if ent.description is not None:
            parts.append("description=" + q(ent.description))
        if ent.notation is not None:
            parts.append("notation=" + q(ent.notation))
        if ent.provenance is not None:
            parts.append(f"provenance={ent.provenance}")
        lines.append(" ".join(parts))
    for st in graph._statements.values():
        parts = ["assert", st.uri.short, st.subject.short, st.predicate.short, _script_term(st.object)]
        if st.scope is not None:
            parts.append(f"scope={st.scope.short}")
        for rel, qobj in st.qualifiers:
            parts.append(f"qualifier={rel.short}:{_script_term(qobj)}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"
