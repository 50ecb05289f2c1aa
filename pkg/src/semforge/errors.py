"""Exception hierarchy shared by all semforge modules."""

from __future__ import annotations


class SemforgeError(Exception):
    """Base class; the CLI maps every subclass to exit status 1."""


# -- knowledge graph ---------------------------------------------------------

class GraphError(SemforgeError):
    pass


class DuplicateLabel(GraphError):
    def __init__(self, label: str):
        super().__init__(f"label already bound: {label!r}")
        self.label = label


class EmptyLabel(GraphError):
    def __init__(self):
        super().__init__("label must be nonempty")


class UnknownEntity(GraphError):
    def __init__(self, ref):
        super().__init__(f"unknown entity: {ref}")
        self.ref = ref


class PredicateNotRelation(GraphError):
    def __init__(self, ref):
        super().__init__(f"predicate is not a relation: {ref}")
        self.ref = ref


class InvalidScope(GraphError):
    def __init__(self, ref):
        super().__init__(f"not a scope item: {ref}")
        self.ref = ref


class ParseError(GraphError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


# -- LaTeX ingestion ---------------------------------------------------------

class IngestError(SemforgeError):
    pass


class NoDelimiters(IngestError):
    def __init__(self):
        super().__init__("no '% !snippet <id>' delimiter found")


class DuplicateSnippetId(IngestError):
    def __init__(self, snippet_id: int, line: int):
        super().__init__(f"line {line}: duplicate snippet id {snippet_id}")
        self.snippet_id = snippet_id
        self.line = line


class NonMonotoneIds(IngestError):
    def __init__(self, snippet_id: int, line: int):
        super().__init__(f"line {line}: snippet id {snippet_id} is not greater than its predecessor")
        self.snippet_id = snippet_id
        self.line = line


class InvalidSnippetId(IngestError):
    def __init__(self, text: str, line: int):
        super().__init__(f"line {line}: snippet id must be a positive integer, got {text!r}")
        self.line = line


class EmptySnippet(IngestError):
    def __init__(self, snippet_id: int):
        super().__init__(f"snippet {snippet_id} has an empty body")
        self.snippet_id = snippet_id


class UnknownSnippet(SemforgeError):
    def __init__(self, snippet_id):
        super().__init__(f"unknown snippet id: {snippet_id}")
        self.snippet_id = snippet_id


# -- FNL ---------------------------------------------------------------------

class FnlError(SemforgeError):
    """Raised when FNL text has error diagnostics and a strict caller needs a document."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        first = self.diagnostics[0] if self.diagnostics else None
        super().__init__(str(first) if first else "invalid FNL")


# -- prompting ---------------------------------------------------------------

class PromptError(SemforgeError):
    pass


class TemplateError(PromptError):
    pass


class BudgetTooSmall(PromptError):
    def __init__(self, budget: int, minimum: int):
        super().__init__(f"prompt budget {budget} is below the untruncatable minimum {minimum}")
        self.budget = budget
        self.minimum = minimum


class CacheMiss(PromptError):
    def __init__(self, content_hash: str):
        super().__init__(f"CacheMiss: no recorded response for {content_hash}")
        self.content_hash = content_hash


class TransportError(PromptError):
    def __init__(self, message: str, attempts: int):
        super().__init__(f"{message} (after {attempts} attempts)")
        self.attempts = attempts


class AuthMissing(PromptError):
    def __init__(self, env_var: str):
        super().__init__(f"no API key: set {env_var}")


class ResponseUnparseable(PromptError):
    def __init__(self, raw: str, diagnostics):
        self.raw = raw
        self.diagnostics = list(diagnostics)
        head = str(self.diagnostics[0]) if self.diagnostics else "no statements"
        super().__init__(f"LLM response is not valid FNL: {head}")


# -- compiler ----------------------------------------------------------------

class CompileError(SemforgeError):
    def __init__(self, message: str, line: int | None = None):
        prefix = f"line {line}: " if line else ""
        super().__init__(prefix + message)
        self.line = line


class UnresolvedReference(CompileError):
    def __init__(self, term: str, line: int | None = None):
        super().__init__(f"UnresolvedReference: {term}", line)
        self.term = term


class AmbiguousNotation(CompileError):
    def __init__(self, notation: str, candidates, line: int | None = None):
        super().__init__(f"AmbiguousNotation: ${notation}$ matches {len(candidates)} entities", line)
        self.notation = notation
        self.candidates = list(candidates)


class Recompiled(CompileError):
    def __init__(self, snippet_id: int):
        super().__init__(f"Recompiled: snippet {snippet_id} already present in graph provenance")
        self.snippet_id = snippet_id


class DuplicateScope(CompileError):
    def __init__(self, kind: str, line: int | None = None):
        super().__init__(f"DuplicateScope: {kind}", line)
        self.kind = kind


class EmptyScope(CompileError):
    def __init__(self, kind: str, line: int | None = None):
        super().__init__(f"EmptyScope: {kind}", line)
        self.kind = kind


class ScopeKeywordMisuse(CompileError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"ScopeKeywordMisuse: {message}", line)


# -- rendering ---------------------------------------------------------------

class RenderError(SemforgeError):
    pass


class UnbalancedInput(RenderError):
    def __init__(self, message: str):
        super().__init__(f"UnbalancedInput: {message}")


class DanglingOccurrence(RenderError):
    def __init__(self, occurrence):
        super().__init__(f"DanglingOccurrence: {occurrence}")
        self.occurrence = occurrence


# -- configuration -----------------------------------------------------------

class ConfigError(SemforgeError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))
