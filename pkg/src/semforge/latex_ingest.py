"""Split delimiter-annotated LaTeX into snippets.

A snippet starts at a comment line ``% !snippet <id>`` and runs to the next
such line. Text before the first delimiter is the preamble. Splitting is
lossless: ``doc.reassemble() == text`` byte for byte.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import (
    DuplicateSnippetId,
    EmptySnippet,
    InvalidSnippetId,
    NoDelimiters,
    NonMonotoneIds,
    UnknownSnippet,
)
from .texutil import mask_math, strip_comments

DELIMITER = re.compile(r"[ \t]*%[ \t]*!snippet[ \t]+(\S+)[ \t]*(?:\r?\n)?\Z")
TRUNCATION_MARKER = "[... earlier text omitted ...]\n"
MAX_SENTENCES = 5


@dataclass(frozen=True)
class Snippet:
    id: int
    body: str
    line_range: tuple[int, int]
    sentence_estimate: int
    delimiter: str = field(default="", repr=False)


@dataclass(frozen=True)
class SourceDocument:
    origin: str
    preamble: str
    snippets: tuple[Snippet, ...]

    def reassemble(self) -> str:
        return self.preamble + "".join(s.delimiter + s.body for s in self.snippets)

    def ids(self) -> list[int]:
        return [s.id for s in self.snippets]

    def get(self, snippet_id: int) -> Snippet:
        for s in self.snippets:
            if s.id == snippet_id:
                return s
        raise UnknownSnippet(snippet_id)

    def __contains__(self, snippet_id) -> bool:
        return any(s.id == snippet_id for s in self.snippets)


@dataclass(frozen=True)
class SnippetWarning:
    code: str
    snippet_id: int
    message: str

    def __str__(self) -> str:
        return f"snippet {self.snippet_id}: {self.code}: {self.message}"


def estimate_sentences(body: str) -> int:
    """Count ``.``, ``!`` or ``?`` followed by whitespace (or the end), outside math."""
    text = mask_math(strip_comments(body))
    return len(re.findall(r"[.!?](?=\s|\Z)", text))


def split_document(text: str, origin: str = "<string>") -> SourceDocument:
    # split on "\n" only: splitlines() would also break at \f, \x1c, \u2028 and friends
    lines = [line for line in re.split(r"(?<=\n)", text) if line]
    marks = []  # (line index, id)
    for idx, line in enumerate(lines):
        m = DELIMITER.match(line)
        if not m:
            continue
        token = m.group(1)
        if not re.fullmatch(r"[1-9][0-9]*", token):
            raise InvalidSnippetId(token, idx + 1)
        sid = int(token)
        if marks:
            prev = marks[-1][1]
            if sid == prev or any(sid == s for _, s in marks):
                raise DuplicateSnippetId(sid, idx + 1)
            if sid < prev:
                raise NonMonotoneIds(sid, idx + 1)
        marks.append((idx, sid))
    if not marks:
        raise NoDelimiters()

    preamble = "".join(lines[: marks[0][0]])
    snippets = []
    for n, (idx, sid) in enumerate(marks):
        end = marks[n + 1][0] if n + 1 < len(marks) else len(lines)
        body = "".join(lines[idx + 1:end])
        if not body.strip():
            raise EmptySnippet(sid)
        start_line = idx + 2
        snippets.append(Snippet(
            id=sid,
            body=body,
            line_range=(start_line, max(start_line, end)),
            sentence_estimate=estimate_sentences(body),
            delimiter=lines[idx],
        ))
    return SourceDocument(origin, preamble, tuple(snippets))


def _math_balance_problem(body: str) -> str | None:
    text = strip_comments(body)
    dollars = len(re.findall(r"(?<!\\)\$", text))
    if dollars % 2:
        return "odd number of '$' delimiters"
    for opener, closer in ((r"\[", r"\]"), (r"\(", r"\)")):
        depth = 0
        for tok in re.findall(r"(?<!\\)\\[\[\]()]", text):
            if tok == opener:
                depth += 1
            elif tok == closer:
                depth -= 1
                if depth < 0:
                    return f"'{closer}' without '{opener}'"
        if depth:
            return f"'{opener}' without '{closer}'"
    return None


def _environment_problem(body: str) -> str | None:
    stack = []
    for kind, name in re.findall(r"\\(begin|end)\s*\{([^}]*)\}", strip_comments(body)):
        if name == "document":  # opened in the preamble, closed in the last snippet
            continue
        if kind == "begin":
            stack.append(name)
        elif not stack or stack[-1] != name:
            return f"\\end{{{name}}} does not close an open environment"
        else:
            stack.pop()
    if stack:
        return f"\\begin{{{stack[-1]}}} is never closed"
    return None


def validate_snippets(doc: SourceDocument) -> list[SnippetWarning]:
    warnings = []
    for s in doc.snippets:
        if s.sentence_estimate > MAX_SENTENCES:
            warnings.append(SnippetWarning(
                "TooLong", s.id, f"about {s.sentence_estimate} sentences (more than {MAX_SENTENCES})"))
        elif s.sentence_estimate == 0:
            warnings.append(SnippetWarning("NoSentences", s.id, "no sentence terminator found"))
        problem = _math_balance_problem(s.body)
        if problem:
            warnings.append(SnippetWarning("UnbalancedMath", s.id, problem))
        problem = _environment_problem(s.body)
        if problem:
            warnings.append(SnippetWarning("UnbalancedEnvironment", s.id, problem))
    return warnings


def truncate_front(text: str, budget: int) -> str:
    """Keep the tail of ``text`` within ``budget`` characters, marking the cut."""
    if len(text) <= budget:
        return text
    room = budget - len(TRUNCATION_MARKER)
    if room < 0:
        return ""
    tail = text[len(text) - room:] if room else ""
    nl = tail.find("\n")
    if 0 <= nl < len(tail) - 1:
        tail = tail[nl + 1:]
    return TRUNCATION_MARKER + tail


def snippet_context(doc: SourceDocument, k: int, budget: int) -> tuple[str, str, str | None]:
    """(text already processed, snippet ``k``, following snippet or None)."""
    ids = doc.ids()
    if k not in ids:
        raise UnknownSnippet(k)
    pos = ids.index(k)
    processed = "".join(s.body for s in doc.snippets[:pos])
    following = doc.snippets[pos + 1].body if pos + 1 < len(ids) else None
    return truncate_front(processed, budget), doc.snippets[pos].body, following
