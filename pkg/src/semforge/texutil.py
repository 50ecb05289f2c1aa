"""Small LaTeX lexical helpers shared by ingestion, compilation and rendering."""

from __future__ import annotations

import re

MATH_ENVIRONMENTS = frozenset({
    "equation", "equation*", "align", "align*", "gather", "gather*",
    "multline", "multline*", "eqnarray", "eqnarray*", "displaymath", "math",
})

_MATH_TOKEN = re.compile(r"\\[A-Za-z]+|\\.|\s+|.", re.S)


def math_tokens(source: str) -> list[tuple[str, int, int]]:
    """Tokenize math-mode LaTeX into (token, start, end), dropping whitespace."""
    out = []
    for m in _MATH_TOKEN.finditer(source):
        tok = m.group()
        if not tok.isspace():
            out.append((tok, m.start(), m.end()))
    return out


def normalize_math(source: str) -> str:
    """Whitespace-insensitive canonical form of a math string.

    A single space is kept only where dropping it would glue a control word
    to a following letter (``\\perp x`` must not become ``\\perpx``).
    """
    toks = [t for t, _, _ in math_tokens(source)]
    parts = []
    for i, tok in enumerate(toks):
        parts.append(tok)
        if (
            i + 1 < len(toks)
            and re.fullmatch(r"\\[A-Za-z]+", tok)
            and toks[i + 1][0].isalpha()
        ):
            parts.append(" ")
    return "".join(parts)


def braces_balanced(text: str) -> bool:
    depth = 0
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\":
            i += 2
            continue
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth < 0:
                return False
        i += 1
    return depth == 0


_MATH_REGION = re.compile(
    r"\$\$.*?\$\$"
    r"|(?<!\\)\$(?:\\.|[^$\\])*\$"
    r"|\\\[.*?\\\]"
    r"|\\\(.*?\\\)"
    r"|\\begin\{(" + "|".join(re.escape(e) for e in sorted(MATH_ENVIRONMENTS)) + r")\}.*?\\end\{\1\}",
    re.S,
)
_COMMENT = re.compile(r"(?<!\\)%[^\n]*")


def strip_comments(text: str) -> str:
    return _COMMENT.sub("", text)


def mask_math(text: str, fill: str = " ") -> str:
    """Replace every math region by filler of equal length (offsets preserved)."""
    return _MATH_REGION.sub(lambda m: fill * len(m.group()), text)
