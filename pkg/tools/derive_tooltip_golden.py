"""Derive the golden tooltip count for the fixture corpus.

Deliberately shares no code with semforge: it splits the LaTeX itself,
reads the compiled graph line by line and brute-forces every character
position. Rules:

* label matches: case-insensitive, outside math, comments, command names and
  braces, with no letter, digit or underscore directly before or after;
* notation matches: whole token runs inside a math region, but not as the
  argument of a font command (``V`` does not match ``\\mathbb{V}``);
* only snippets with id >= the defining snippet (0 for base entities);
* overlapping candidates: longest first, then earlier start, then lower URI.

    python3 tools/derive_tooltip_golden.py OUT_DIR
        OUT_DIR holds graph.kgt from a replay pipeline run; writes
        tests/fixtures/golden/tooltip_count.json and golden/graph.kgt.
"""

from __future__ import annotations

import json
import re
import shutil
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "tests" / "fixtures" / "corpus"
GOLDEN = ROOT / "tests" / "fixtures" / "golden"
FONTS = {"\\mathbb", "\\mathcal", "\\mathrm", "\\mathbf", "\\mathfrak", "\\mathsf", "\\operatorname"}


def snippets(tex: str) -> dict[int, str]:
    out, current, lines = {}, None, []
    for line in tex.splitlines(keepends=True):
        m = re.fullmatch(r"\s*%\s*!snippet\s+(\d+)\s*", line.rstrip("\n"))
        if m:
            if current is not None:
                out[current] = "".join(lines)
            current, lines = int(m.group(1)), []
        elif current is not None:
            lines.append(line)
    out[current] = "".join(lines)
    return out


def unescape(s: str) -> str:
    return re.sub(r"\\(.)", lambda m: {"t": "\t", "n": "\n", "r": "\r", "\\": "\\"}[m.group(1)], s)


def entities(kgt: str) -> list[dict]:
    out = []
    for line in kgt.splitlines():
        cols = line.split("\t")
        if cols[0] != "E" or cols[2] != "item":
            continue
        ent = {"uri": cols[1], "label": unescape(cols[3]), "notation": None, "defined": 0}
        for col in cols[4:]:
            key, _, value = col.partition("=")
            if key == "notation":
                ent["notation"] = unescape(value)
            elif key == "provenance":
                ent["defined"] = int(value)
        out.append(ent)
    return out


def regions(body: str):
    """(text mask, list of math (start, end) of the inner content)."""
    n = len(body)
    text = [True] * n
    maths = []
    i = 0
    while i < n:
        c = body[i]
        if c == "%":
            j = body.find("\n", i)
            j = n if j < 0 else j
            for k in range(i, j):
                text[k] = False
            i = j
        elif body.startswith("$$", i) or body.startswith("\\[", i) or c == "$" or body.startswith("\\(", i):
            if body.startswith("$$", i):
                close, width = "$$", 2
            elif c == "$":
                close, width = "$", 1
            else:
                close, width = ("\\]" if body[i + 1] == "[" else "\\)"), 2
            j = body.find(close, i + width)
            maths.append((i + width, j))
            for k in range(i, j + len(close)):
                text[k] = False
            i = j + len(close)
        elif c == "\\":
            m = re.compile(r"\\(begin|end)\{[^}]*\}|\\[A-Za-z]+|\\.").match(body, i)
            for k in range(i, m.end()):
                text[k] = False
            i = m.end()
        elif c in "{}[]~":
            text[i] = False
            i += 1
        else:
            i += 1
    return text, maths


def word_char(ch: str) -> bool:
    return ch.isalnum() or ch == "_"


def tokens(s: str) -> list[tuple[str, int, int]]:
    out = []
    i = 0
    while i < len(s):
        if s[i].isspace():
            i += 1
            continue
        if s[i] == "\\":
            j = i + 1
            while j < len(s) and s[j].isalpha():
                j += 1
            j = max(j, i + 2)
        else:
            j = i + 1
        out.append((s[i:j], i, j))
        i = j
    return out


def candidates(sid: int, body: str, ents: list[dict]):
    text, maths = regions(body)
    found = []
    for e in ents:
        if sid < e["defined"]:
            continue
        label = e["label"].lower()
        for p in range(len(body) - len(label) + 1):
            q = p + len(label)
            if body[p:q].lower() != label or not all(text[p:q]):
                continue
            if p > 0 and word_char(body[p - 1]):
                continue
            if q < len(body) and word_char(body[q]):
                continue
            found.append((p, q, e["uri"]))
        if e["notation"]:
            want = [t for t, _, _ in tokens(e["notation"])]
            for a, b in maths:
                toks = tokens(body[a:b])
                for k in range(len(toks) - len(want) + 1):
                    if [t for t, _, _ in toks[k:k + len(want)]] != want:
                        continue
                    if k >= 2 and toks[k - 1][0] == "{" and toks[k - 2][0] in FONTS:
                        continue
                    found.append((a + toks[k][1], a + toks[k + len(want) - 1][2], e["uri"]))
    return found


def uri_key(uri: str):
    m = re.fullmatch(r"kb://([^/]+)/([IRS])(\d+)", uri)
    return (m.group(1), "IRS".index(m.group(2)), int(m.group(3)))


def resolve(found):
    chosen = []
    for p, q, uri in sorted(set(found), key=lambda c: (-(c[1] - c[0]), c[0], uri_key(c[2]))):
        if all(q <= a or p >= b for a, b, _ in chosen):
            chosen.append((p, q, uri))
    return chosen


def derive(tex: str, kgt: str) -> dict:
    ents = entities(kgt)
    labels = {e["uri"]: e["label"] for e in ents}
    per_snippet, per_entity = {}, {}
    for sid, body in sorted(snippets(tex).items()):
        chosen = resolve(candidates(sid, body, ents))
        per_snippet[str(sid)] = len(chosen)
        for _, _, uri in chosen:
            per_entity[labels[uri]] = per_entity.get(labels[uri], 0) + 1
    return {
        "total": sum(per_snippet.values()),
        "per_snippet": per_snippet,
        "per_entity": dict(sorted(per_entity.items())),
        "derivation": "tools/derive_tooltip_golden.py (brute-force scan, no semforge imports)",
    }


def main(argv) -> int:
    if len(argv) != 2:
        print(__doc__, file=sys.stderr)
        return 2
    graph = Path(argv[1]) / "graph.kgt"
    result = derive((CORPUS / "doc.tex").read_text(encoding="utf-8"), graph.read_text(encoding="utf-8"))
    GOLDEN.mkdir(parents=True, exist_ok=True)
    shutil.copyfile(graph, GOLDEN / "graph.kgt")
    (GOLDEN / "tooltip_count.json").write_text(json.dumps(result, indent=2) + "\n", encoding="utf-8")
    print(f"total tooltips: {result['total']}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
