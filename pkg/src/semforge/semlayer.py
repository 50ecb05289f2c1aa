"""HTML rendering with an interactive semantic layer.

Every occurrence of a defined term or notation after its definition gets a
hover tooltip built from the knowledge graph. Tooltips are hidden by default,
so the page reads like the plain rendering until the reader asks for more.

The LaTeX converter handles a small subset and records, for every piece of
output, the source span it came from. Occurrences found in the source can
then be wrapped in anchors without re-parsing the HTML.
"""

from __future__ import annotations

import html
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DanglingOccurrence, SemforgeError, UnbalancedInput, UnknownEntity
from .kgraph import Item, KnowledgeGraph, Literal, ScopeItem, Uri
from .latex_ingest import SourceDocument
from .texutil import MATH_ENVIRONMENTS, math_tokens

log = logging.getLogger(__name__)

DEFAULT_STYLESHEET_PATH = Path(__file__).with_name("data") / "stylesheet.css"
MATHJAX_URL = "https://cdn.jsdelivr.net/npm/mathjax@3/es5/tex-chtml.js"

THEOREM_ENVIRONMENTS = {
    "theorem": "Theorem", "lemma": "Lemma", "proposition": "Proposition",
    "corollary": "Corollary", "definition": "Definition", "remark": "Remark",
    "example": "Example", "proof": "Proof",
}
PLAIN_ENVIRONMENTS = {"abstract", "quote", "quotation", "center"}
LISTS = {"itemize": "ul", "enumerate": "ol", "description": "ul"}
INLINE_STYLES = {"textit": "em", "emph": "em", "textbf": "strong", "texttt": "code", "textsc": "span"}
SECTIONS = {"section": "h2", "subsection": "h3", "subsubsection": "h4", "paragraph": "h5"}
IGNORED = {
    "noindent", "smallskip", "medskip", "bigskip", "maketitle", "centering",
    "hfill", "quad", "qquad", "newpage", "clearpage", "indent",
}
IGNORED_WITH_ARG = {"vspace", "hspace", "label", "index"}
REFS = {"ref": "ref", "eqref": "ref", "autoref": "ref", "cref": "ref", "cite": "cite"}
SYMBOLS = {
    "%": "%", "&": "&amp;", "$": "$", "#": "#", "_": "_", "{": "{", "}": "}",
    ",": "&#8201;", ";": " ", "!": "", " ": " ", "-": "",
}
_SPECIAL = set("\\{}$%~&#^_`'-\n]")
# a notation never matches the argument of a font command: V is not \mathbb{V}
FONT_COMMANDS = {"\\mathbb", "\\mathcal", "\\mathrm", "\\mathbf", "\\mathfrak", "\\mathsf", "\\operatorname"}


@dataclass(frozen=True)
class Segment:
    kind: str  # "text", "math" or "markup"
    start: int
    end: int
    html: str
    inner: tuple[int, int] | None = None  # math content span


@dataclass
class HtmlFragment:
    html: str
    warnings: list[str] = field(default_factory=list)


class _Converter:
    def __init__(self, src: str):
        self.src = src
        self.i = 0
        self.segments: list[Segment] = []
        self.warnings: list[str] = []
        # entries: (kind, name, close_html); containers allow paragraphs
        self.stack: list[list] = [["root", "", ""]]
        self.para = False

    # -- output helpers ---------------------------------------------------

    def line(self, pos: int | None = None) -> int:
        return self.src.count("\n", 0, self.i if pos is None else pos) + 1

    def emit(self, kind, start, end, text, inner=None):
        self.segments.append(Segment(kind, start, end, text, inner))

    def container(self):
        for entry in reversed(self.stack):
            if entry[0] in ("root", "env", "item", "list"):
                return entry
        return self.stack[0]

    def inline(self):
        """Called before inline content: opens a paragraph when needed."""
        top = self.stack[-1]
        if top[0] in ("root", "env") and not self.para:
            self.emit("markup", self.i, self.i, '<div class="para">')
            self.para = True

    def close_para(self):
        if self.para:
            self.emit("markup", self.i, self.i, "</div>\n")
            self.para = False

    def warn(self, message: str, pos: int | None = None):
        self.warnings.append(f"line {self.line(pos)}: {message}")

    # -- scanning helpers -------------------------------------------------

    def skip_spaces(self, pos: int) -> int:
        while pos < len(self.src) and self.src[pos] in " \t":
            pos += 1
        return pos

    def group_end(self, pos: int, open_ch="{", close_ch="}") -> int:
        """Index just past the group starting at ``pos`` (which holds ``open_ch``)."""
        depth = 0
        i = pos
        while i < len(self.src):
            ch = self.src[i]
            if ch == "\\":
                i += 2
                continue
            if ch == open_ch:
                depth += 1
            elif ch == close_ch:
                depth -= 1
                if depth == 0:
                    return i + 1
            i += 1
        raise UnbalancedInput(f"line {self.line(pos)}: '{open_ch}' is never closed")

    def argument(self, pos: int) -> tuple[str, int] | None:
        """Brace argument at ``pos`` (after spaces) as (content, end), or None."""
        p = self.skip_spaces(pos)
        if p < len(self.src) and self.src[p] == "{":
            end = self.group_end(p)
            return self.src[p + 1:end - 1], end
        return None

    def optional(self, pos: int) -> tuple[str | None, int]:
        p = self.skip_spaces(pos)
        if p < len(self.src) and self.src[p] == "[":
            end = self.group_end(p, "[", "]")
            return self.src[p + 1:end - 1], end
        return None, pos

    # -- main loop --------------------------------------------------------

    def run(self) -> list[Segment]:
        src = self.src
        while self.i < len(src):
            ch = src[self.i]
            if ch == "%":
                nl = src.find("\n", self.i)
                self.i = len(src) if nl < 0 else nl + 1
            elif ch == "\\":
                self.backslash()
            elif ch == "$":
                self.dollar()
            elif ch == "{":
                self.inline()
                self.stack.append(["group", "", ""])
                self.i += 1
            elif ch == "}":
                self.close_group()
            elif ch == "]" and self.stack[-1][0] == "title":
                self.emit("markup", self.i, self.i + 1, self.stack.pop()[2])
                self.i += 1
            elif ch == "~":
                self.inline()
                self.emit("markup", self.i, self.i + 1, "&nbsp;")
                self.i += 1
            elif src.startswith("---", self.i):
                self.inline()
                self.emit("markup", self.i, self.i + 3, "&mdash;")
                self.i += 3
            elif src.startswith("--", self.i):
                self.inline()
                self.emit("markup", self.i, self.i + 2, "&ndash;")
                self.i += 2
            elif src.startswith("``", self.i):
                self.inline()
                self.emit("markup", self.i, self.i + 2, "&ldquo;")
                self.i += 2
            elif src.startswith("''", self.i):
                self.inline()
                self.emit("markup", self.i, self.i + 2, "&rdquo;")
                self.i += 2
            elif ch == "`":
                self.inline()
                self.emit("markup", self.i, self.i + 1, "&lsquo;")
                self.i += 1
            elif ch in "&#^_":
                self.inline()
                self.warn(f"unsupported character {ch!r} outside math")
                self.emit("markup", self.i, self.i + 1, f'<span class="latex-unsupported">{html.escape(ch)}</span>')
                self.i += 1
            else:
                self.text()
        self.close_para()
        if len(self.stack) > 1:
            kind, name, _ = self.stack[-1]
            raise UnbalancedInput(f"unclosed {kind} {name}".rstrip())
        return self.segments

    def text(self):
        src = self.src
        start = self.i
        m = re.compile(r"\n[ \t]*\n\s*").match(src, start)
        if m:
            if self.stack[-1][0] in ("root", "env"):
                self.close_para()
            elif self.para or self.stack[-1][0] != "list":
                self.emit("text", start, m.end(), html.escape(src[start:m.end()], quote=False))
            self.i = m.end()
            return
        i = start
        while i < len(src):
            ch = src[i]
            if ch in _SPECIAL:
                if ch == "-" and not src.startswith("--", i):
                    i += 1
                    continue
                if ch == "'" and not src.startswith("''", i):
                    i += 1
                    continue
                if ch == "\n":
                    if re.compile(r"\n[ \t]*\n").match(src, i):
                        break
                    i += 1
                    continue
                break
            i += 1
        if i == start:  # lone special consumed by caller paths
            i = start + 1
        chunk = src[start:i]
        self.i = i
        if chunk.isspace() and (self.stack[-1][0] == "list" or (self.stack[-1][0] in ("root", "env") and not self.para)):
            return
        self.inline()
        self.emit("text", start, i, html.escape(chunk, quote=False))

    def dollar(self):
        src = self.src
        start = self.i
        if src.startswith("$$", start):
            end = src.find("$$", start + 2)
            if end < 0:
                raise UnbalancedInput(f"line {self.line()}: '$$' is never closed")
            self.math(start, end + 2, start + 2, end, display=True)
            return
        j = start + 1
        while j < len(src):
            if src[j] == "\\":
                j += 2
                continue
            if src[j] == "$":
                self.math(start, j + 1, start + 1, j, display=False)
                return
            j += 1
        raise UnbalancedInput(f"line {self.line()}: '$' is never closed")

    def math(self, start, end, a, b, display, env=None):
        self.inline()
        body = html.escape(self.src[a:b], quote=False)
        if env is not None:
            out = f'<span class="math display">\\begin{{{env}}}{body}\\end{{{env}}}</span>'
        elif display:
            out = f'<span class="math display">\\[{body}\\]</span>'
        else:
            out = f'<span class="math">\\({body}\\)</span>'
        self.emit("math", start, end, out, (a, b))
        self.i = end

    def close_group(self):
        top = self.stack[-1]
        if top[0] != "group":
            raise UnbalancedInput(f"line {self.line()}: '}}' closes nothing")
        self.stack.pop()
        if top[2]:
            self.emit("markup", self.i, self.i + 1, top[2])
        self.i += 1

    def backslash(self):
        src = self.src
        start = self.i
        nxt = src[start + 1:start + 2]
        if nxt == "\\":
            self.inline()
            _, end = self.optional(start + 2)
            self.emit("markup", start, end, "<br>")
            self.i = end
            return
        if nxt == "[":
            end = src.find("\\]", start + 2)
            if end < 0:
                raise UnbalancedInput(f"line {self.line()}: '\\[' is never closed")
            self.math(start, end + 2, start + 2, end, display=True)
            return
        if nxt == "(":
            end = src.find("\\)", start + 2)
            if end < 0:
                raise UnbalancedInput(f"line {self.line()}: '\\(' is never closed")
            self.math(start, end + 2, start + 2, end, display=False)
            return
        m = re.compile(r"\\([A-Za-z]+)(\*?)").match(src, start)
        if not m:
            sym = nxt
            self.inline()
            if sym in SYMBOLS:
                self.emit("markup", start, start + 2, SYMBOLS[sym])
            else:
                self.warn(f"unsupported control symbol \\{sym}")
                self.emit("markup", start, start + 2,
                          f'<span class="latex-unsupported">{html.escape(src[start:start + 2])}</span>')
            self.i = start + 2
            return
        name, star = m.group(1), m.group(2)
        self.i = m.end()
        self.command(name, star, start)

    def command(self, name, star, start):
        src = self.src
        if name in ("begin", "end"):
            arg = self.argument(self.i)
            if arg is None:
                return self.unsupported(name, start)
            env, end = arg
            self.i = end
            return self.begin(env, start) if name == "begin" else self.end(env, start)
        if name in INLINE_STYLES and self.argument(self.i) is not None:
            p = self.skip_spaces(self.i)
            self.inline()
            tag = INLINE_STYLES[name]
            attr = ' class="smallcaps"' if name == "textsc" else ""
            self.emit("markup", start, p + 1, f"<{tag}{attr}>")
            self.stack.append(["group", name, f"</{tag}>"])
            self.i = p + 1
            return
        if name in SECTIONS:
            _, p = self.optional(self.i)
            p = self.skip_spaces(p)
            if p >= len(src) or src[p] != "{":
                return self.unsupported(name, start)
            self.close_para()
            tag = SECTIONS[name]
            self.emit("markup", start, p + 1, f"<{tag}>")
            self.stack.append(["group", name, f"</{tag}>\n"])
            self.i = p + 1
            return
        if name == "footnote" and self.argument(self.i) is not None:
            p = self.skip_spaces(self.i)
            self.inline()
            self.emit("markup", start, p + 1, '<span class="footnote">')
            self.stack.append(["group", name, "</span>"])
            self.i = p + 1
            return
        if name == "item":
            label, end = self.optional(self.i)
            if self.stack[-1][0] == "item":
                self.emit("markup", start, start, self.stack.pop()[2])
            if self.stack[-1][0] != "list":
                return self.unsupported(name, start)
            extra = f'<span class="item-label">{html.escape(label)}</span> ' if label is not None else ""
            self.emit("markup", start, end, "<li>" + extra)
            self.stack.append(["item", "", "</li>\n"])
            self.i = end
            return
        if name in REFS:
            arg = self.argument(self.i)
            if arg is None:
                return self.unsupported(name, start)
            key, end = arg
            self.inline()
            text = html.escape(key) if REFS[name] == "ref" else f"[{html.escape(key)}]"
            self.emit("markup", start, end, f'<span class="{REFS[name]}">{text}</span>')
            self.i = end
            return
        if name == "url":
            arg = self.argument(self.i)
            if arg is None:
                return self.unsupported(name, start)
            url, end = arg
            self.inline()
            self.emit("markup", start, end, f'<a href="{html.escape(url)}">{html.escape(url)}</a>')
            self.i = end
            return
        if name in IGNORED_WITH_ARG:
            arg = self.argument(self.i)
            if arg is not None:
                self.i = arg[1]
            self.emit("markup", start, self.i, "")
            return
        if name in IGNORED:
            self.emit("markup", start, self.i, "")
            return
        if name == "par":
            self.close_para()
            return
        if name in ("LaTeX", "TeX"):
            self.inline()
            self.emit("markup", start, self.i, name)
            return
        if name == "newline":
            self.inline()
            self.emit("markup", start, self.i, "<br>")
            return
        self.unsupported(name, start)

    def unsupported(self, name, start):
        """Pass a command and its arguments through verbatim, with a warning."""
        end = self.i
        while True:
            p = self.skip_spaces(end)
            if p < len(self.src) and self.src[p] == "{":
                end = self.group_end(p)
            elif p < len(self.src) and self.src[p] == "[":
                end = self.group_end(p, "[", "]")
            else:
                break
        self.inline()
        self.warn(f"unsupported command \\{name}", start)
        self.emit("markup", start, end,
                  f'<span class="latex-unsupported">{html.escape(self.src[start:end], quote=False)}</span>')
        self.i = end

    def begin(self, env, start):
        if env == "document":
            self.emit("markup", start, self.i, "")
            return
        if env in MATH_ENVIRONMENTS:
            closing = f"\\end{{{env}}}"
            end = self.src.find(closing, self.i)
            if end < 0:
                raise UnbalancedInput(f"line {self.line(start)}: \\begin{{{env}}} is never closed")
            self.math(start, end + len(closing), self.i, end, display=True, env=env)
            return
        self.close_para()
        if env in LISTS:
            tag = LISTS[env]
            self.emit("markup", start, self.i, f"<{tag}>\n")
            self.stack.append(["list", env, f"</{tag}>\n"])
            return
        if env in THEOREM_ENVIRONMENTS or env in PLAIN_ENVIRONMENTS:
            head = ""
            if env in THEOREM_ENVIRONMENTS:
                head = f'<span class="env-name">{THEOREM_ENVIRONMENTS[env]}</span> '
            self.emit("markup", start, self.i, f'<div class="env env-{env}">{head}')
            self.stack.append(["env", env, "</div>\n"])
            p = self.skip_spaces(self.i)
            if env in THEOREM_ENVIRONMENTS and p < len(self.src) and self.src[p] == "[":
                # the title is ordinary text up to the matching ']'
                self.group_end(p, "[", "]")
                self.emit("markup", self.i, p + 1, '<span class="env-title">(')
                self.stack.append(["title", env, ")</span> "])
                self.i = p + 1
            return
        self.warn(f"unsupported environment {env}", start)
        self.emit("markup", start, self.i,
                  f'<div class="env env-unknown"><span class="latex-unsupported">\\begin{{{html.escape(env)}}}</span>')
        self.stack.append(["env", env, f'<span class="latex-unsupported">\\end{{{html.escape(env)}}}</span></div>\n'])

    def end(self, env, start):
        if env == "document":
            self.close_para()
            self.emit("markup", start, len(self.src), "")
            self.i = len(self.src)
            return
        if self.stack[-1][0] == "item" and env in LISTS:
            self.emit("markup", start, start, self.stack.pop()[2])
        top = self.stack[-1]
        if top[0] not in ("list", "env") or top[1] != env:
            raise UnbalancedInput(f"line {self.line(start)}: \\end{{{env}}} does not match the open {top[0]} {top[1]}".rstrip())
        self.close_para()
        self.stack.pop()
        self.emit("markup", start, self.i, top[2])


def convert_segments(body: str) -> tuple[list[Segment], list[str]]:
    conv = _Converter(body)
    segments = conv.run()
    return segments, conv.warnings


def latex_to_html(snippet) -> HtmlFragment:
    """Convert a snippet (or raw LaTeX string) in the supported subset to HTML."""
    body = snippet if isinstance(snippet, str) else snippet.body
    segments, warnings = convert_segments(body)
    return HtmlFragment("".join(s.html for s in segments), warnings)


# -- occurrences -------------------------------------------------------------

@dataclass(frozen=True, order=True)
class Occurrence:
    snippet_id: int
    start: int
    end: int
    entity: Uri = field(compare=False)
    form: str = field(default="label", compare=False)  # "label" or "notation"


def surface_forms(label: str) -> list[str]:
    forms = [label]
    spaced = label.replace("_", " ")
    if spaced != label:
        forms.append(spaced)
    return forms


def _label_pattern(form: str) -> re.Pattern:
    words = form.split()
    sep = r"(?:[ \t]+|[ \t]*\n[ \t]*)"
    return re.compile(r"(?<!\w)" + sep.join(re.escape(w) for w in words) + r"(?!\w)", re.IGNORECASE)


def indexable_items(graph: KnowledgeGraph) -> list[Item]:
    return [it for it in graph.items() if not isinstance(it, ScopeItem)]


def _candidates(sid: int, body: str, segments, items):
    found = []
    for item in items:
        patterns = [_label_pattern(f) for f in surface_forms(item.label) if f.strip()]
        notation = [t for t, _, _ in math_tokens(item.notation)] if item.notation else []
        for seg in segments:
            if seg.kind == "text":
                for pat in patterns:
                    for m in pat.finditer(body, seg.start, seg.end):
                        if m.end() < len(body) and (body[m.end()].isalnum() or body[m.end()] == "_"):
                            continue
                        found.append(Occurrence(sid, m.start(), m.end(), item.uri, "label"))
            elif seg.kind == "math" and notation:
                a, b = seg.inner
                toks = math_tokens(body[a:b])
                n = len(notation)
                for k in range(len(toks) - n + 1):
                    if [t for t, _, _ in toks[k:k + n]] != notation:
                        continue
                    if k >= 2 and toks[k - 1][0] == "{" and toks[k - 2][0] in FONT_COMMANDS:
                        continue
                    found.append(Occurrence(sid, a + toks[k][1], a + toks[k + n - 1][2], item.uri, "notation"))
    return found


def _resolve_overlaps(cands: list[Occurrence]) -> list[Occurrence]:
    ordered = sorted(set(cands), key=lambda o: (-(o.end - o.start), o.start, o.entity.sort_key()))
    taken: list[Occurrence] = []
    for occ in ordered:
        if all(occ.end <= t.start or occ.start >= t.end for t in taken):
            taken.append(occ)
    return sorted(taken)


def index_occurrences(doc: SourceDocument, graph: KnowledgeGraph, warnings: list | None = None) -> list[Occurrence]:
    """Every post-definition occurrence of every item label or notation.

    Labels match case-insensitively on word boundaries in text; notations
    match as whole token sequences inside math. Occurrences in snippets
    before the defining one are reported to ``warnings`` instead.
    """
    warnings = warnings if warnings is not None else []
    items = indexable_items(graph)
    out = []
    for snip in doc.snippets:
        try:
            segments, _ = convert_segments(snip.body)
        except UnbalancedInput as exc:
            warnings.append(f"snippet {snip.id}: not indexed: {exc}")
            continue
        valid = []
        for occ in _candidates(snip.id, snip.body, segments, items):
            defined = graph.get(occ.entity).provenance or 0
            if snip.id < defined:
                text = snip.body[occ.start:occ.end]
                warnings.append(
                    f"snippet {snip.id}: PreDefinitionUse: '{text}' ({graph.label_of(occ.entity)}) "
                    f"appears before its definition in snippet {defined}")
            else:
                valid.append(occ)
        out.extend(_resolve_overlaps(valid))
    return out


# -- tooltip content ---------------------------------------------------------

@dataclass(frozen=True)
class TooltipSpec:
    entity: Uri
    title: str
    kind: str
    body: str
    source: int  # defining snippet; 0 for the base graph
    notation: str | None = None
    refined_body: str | None = None


_FACT_SKIP = {"is_a", "has_description", "has_notation", "has_label", "has_scope", "has_source_snippet"}


def _facts(entity: Uri, graph: KnowledgeGraph, limit: int = 4) -> list[str]:
    facts = []
    for st in graph.query(entity, None, None):
        pred = graph.label_of(st.predicate)
        if pred in _FACT_SKIP or st.scope is not None:
            continue
        obj = st.object.value if isinstance(st.object, Literal) else graph.label_of(st.object)
        facts.append(f"{pred.replace('_', ' ')} {obj}")
        if len(facts) == limit:
            break
    return facts


def tooltip_prompt(spec: TooltipSpec, graph: KnowledgeGraph) -> str:
    lines = [
        f'Explain the term "{spec.title}" in at most two plain sentences for a reader of a mathematics text.',
        "Use only these facts from the knowledge graph:",
        f"- kind: {spec.kind}",
    ]
    if spec.notation:
        lines.append(f"- notation: ${spec.notation}$")
    if spec.body:
        lines.append(f"- description: {spec.body}")
    lines += [f"- {fact}" for fact in _facts(spec.entity, graph)]
    lines.append("Answer with the explanation only.")
    return "\n".join(lines) + "\n"


def generate_tooltip_content(entity: Uri, graph: KnowledgeGraph, client=None, warnings: list | None = None) -> TooltipSpec:
    if entity not in graph:
        raise UnknownEntity(entity)
    item = graph.get(entity)
    if not isinstance(item, Item):
        raise UnknownEntity(entity)
    is_a = graph.builtin("is_a")
    # statements inside a theorem scope hold only there, so they are left out
    kinds = [graph.label_of(st.object) for st in graph.query(entity, is_a, None)
             if isinstance(st.object, Uri) and st.scope is None]
    if not kinds:
        sub = graph.builtin("subclass_of")
        kinds = [f"kind of {graph.label_of(st.object)}" for st in graph.query(entity, sub, None)
                 if isinstance(st.object, Uri) and st.scope is None]
    body = item.description or "; ".join(_facts(entity, graph))
    spec = TooltipSpec(entity, item.label, ", ".join(kinds) or "term", body, item.provenance or 0, item.notation)
    if client is None:
        return spec
    bundle = client.bundle(tooltip_prompt(spec, graph), purpose="tooltip")
    try:
        refined = client.complete(bundle).text.strip()
    except SemforgeError as exc:
        if warnings is not None:
            warnings.append(f"tooltip for {item.label!r}: refinement skipped: {exc}")
        return spec
    return TooltipSpec(spec.entity, spec.title, spec.kind, spec.body, spec.source, spec.notation, refined or None)


# -- rendering ---------------------------------------------------------------

@dataclass
class RenderedDocument:
    html: str
    warnings: list[str]
    tooltip_count: int


def tooltip_html(spec: TooltipSpec) -> str:
    esc = lambda s: html.escape(s, quote=False)  # noqa: E731
    parts = [
        '<div class="tooltip">',
        f'<span class="tt-title">{esc(spec.title)}</span>',
        f'<span class="tt-kind">{esc(spec.kind)}</span>',
    ]
    if spec.notation:
        parts.append(f'<span class="tt-notation">\\({esc(spec.notation)}\\)</span>')
    if spec.body:
        parts.append(f'<span class="tt-body">{esc(spec.body)}</span>')
    if spec.refined_body:
        parts.append(f'<span class="tt-refined">{esc(spec.refined_body)}</span>')
    where = f"snippet {spec.source}" if spec.source else "base knowledge graph"
    parts.append(f'<span class="tt-source">defined in {where} &middot; {esc(str(spec.entity))}</span>')
    parts.append("</div>")
    return "".join(parts)


def _anchor(inner: str, specs) -> str:
    return '<span class="sem-anchor">' + inner + "".join(tooltip_html(s) for s in specs) + "</span>"


def _render_body(body: str, occurrences, tooltips) -> str:
    segments, _ = convert_segments(body)
    pending = sorted(occurrences)
    out = []
    used = 0
    for seg in segments:
        mine = [o for o in pending if seg.start <= o.start and o.end <= seg.end]
        if not mine or seg.kind == "markup":
            out.append(seg.html)
            continue
        used += len(mine)
        if seg.kind == "math":
            out.append(_anchor(seg.html, [tooltips[o.entity] for o in mine]))
            continue
        pos = seg.start
        for occ in mine:
            out.append(html.escape(body[pos:occ.start], quote=False))
            out.append(_anchor(html.escape(body[occ.start:occ.end], quote=False), [tooltips[occ.entity]]))
            pos = occ.end
        out.append(html.escape(body[pos:seg.end], quote=False))
    if used != len(pending):
        placed = {o for seg in segments if seg.kind != "markup" for o in pending
                  if seg.start <= o.start and o.end <= seg.end}
        raise DanglingOccurrence(next(o for o in pending if o not in placed))
    return "".join(out)


def _document_title(preamble: str) -> str | None:
    m = re.search(r"\\title\s*\{", preamble)
    if not m:
        return None
    depth, i = 1, m.end()
    while i < len(preamble) and depth:
        if preamble[i] == "{":
            depth += 1
        elif preamble[i] == "}":
            depth -= 1
        i += 1
    title = preamble[m.end():i - 1]
    return re.sub(r"\s+", " ", re.sub(r"\\[A-Za-z]+|[{}]", "", title)).strip() or None


def _front_matter(preamble: str) -> str:
    """Part of the preamble that belongs to the rendered page."""
    m = re.search(r"\\begin\s*\{document\}", preamble)
    if m:
        return preamble[m.end():]
    return "" if "\\documentclass" in preamble else preamble


def render(
    doc: SourceDocument,
    graph: KnowledgeGraph,
    occurrences,
    tooltips: dict,
    stylesheet: str | None = None,
    math_renderer: str | None = MATHJAX_URL,
) -> RenderedDocument:
    """Assemble one self-contained HTML page with the semantic layer."""
    ids = set(doc.ids())
    by_snippet: dict[int, list[Occurrence]] = {}
    for occ in occurrences:
        if occ.snippet_id not in ids or occ.entity not in graph or occ.entity not in tooltips:
            raise DanglingOccurrence(occ)
        by_snippet.setdefault(occ.snippet_id, []).append(occ)
    css = stylesheet if stylesheet is not None else DEFAULT_STYLESHEET_PATH.read_text(encoding="utf-8")
    warnings: list[str] = []
    title = _document_title(doc.preamble) or "Document"
    out = [
        "<!DOCTYPE html>",
        '<html lang="en">',
        "<head>",
        '<meta charset="utf-8">',
        f"<title>{html.escape(title)}</title>",
        "<style>",
        css.rstrip("\n"),
        "</style>",
    ]
    if math_renderer:
        out.append(f'<script defer src="{html.escape(math_renderer)}"></script>')
    out += ["</head>", "<body>", '<article class="semforge-document">']
    out.append(f"<h1>{html.escape(title)}</h1>")
    front = _front_matter(doc.preamble)
    if front.strip():
        try:
            segments, notes = convert_segments(front)
            out.append('<section class="front-matter">\n' + "".join(s.html for s in segments) + "</section>")
            warnings += [f"preamble: {w}" for w in notes]
        except UnbalancedInput as exc:
            warnings.append(f"preamble: skipped: {exc}")
    for snip in doc.snippets:
        _, notes = convert_segments(snip.body)
        warnings += [f"snippet {snip.id}: {w}" for w in notes]
        inner = _render_body(snip.body, by_snippet.get(snip.id, []), tooltips)
        out.append(f'<section class="snippet" id="snippet-{snip.id}" data-snippet="{snip.id}">\n{inner}</section>')
    out += ["</article>", "</body>", "</html>"]
    return RenderedDocument("\n".join(out) + "\n", warnings, sum(len(v) for v in by_snippet.values()))


_TOOLTIP_DIV = re.compile(r'<div class="tooltip">.*?</div>', re.S)
_ANCHOR = re.compile(r'<span class="sem-anchor">((?:<span class="math[^"]*">.*?</span>)|[^<]*)</span>', re.S)


def strip_semantic_layer(page: str) -> str:
    """Remove tooltip elements and unwrap their anchors."""
    return _ANCHOR.sub(r"\1", _TOOLTIP_DIV.sub("", page))
