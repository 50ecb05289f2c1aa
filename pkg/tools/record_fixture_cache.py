"""Rebuild the fixture LLM cache from the canned responses.

Runs ``semforge pipeline --mode record`` on tests/fixtures/corpus with a fake
transport: extraction prompts are answered with responses/snippet_<k>.txt
(chosen by locating the snippet body in the prompt), tooltip prompts with
responses/tooltips.json. Also refreshes raw.fnl from the accepted output.

    python3 tools/record_fixture_cache.py
"""

from __future__ import annotations

import json
import os
import re
import shutil
import sys
import tempfile
from pathlib import Path

from semforge.cli import run_command
from semforge.latex_ingest import split_document

CORPUS = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "corpus"


def make_transport(corpus: Path):
    doc = split_document((corpus / "doc.tex").read_text(encoding="utf-8"))
    tooltips = json.loads((corpus / "responses" / "tooltips.json").read_text(encoding="utf-8"))
    missing = []

    def transport(endpoint, payload, api_key, timeout):
        prompt = payload["messages"][0]["content"]
        m = re.match(r'Explain the term "([^"]+)"', prompt)
        if m:
            if m.group(1) not in tooltips:
                missing.append(m.group(1))
                return ""
            return tooltips[m.group(1)]
        # part 5 holds the snippet to formalize; part 6 starts at the next heading
        part5 = re.search(r"^# New LaTeX to formalize\n(.*?)^# ", prompt, re.S | re.M).group(1)
        hits = [s.id for s in doc.snippets if s.body in part5]
        if len(hits) != 1:
            raise RuntimeError(f"cannot identify the snippet in a prompt ({hits})")
        return (corpus / "responses" / f"snippet_{hits[0]}.txt").read_text(encoding="utf-8")

    return transport, missing


def main() -> int:
    cache = CORPUS / "cache"
    if cache.exists():
        shutil.rmtree(cache)
    transport, missing = make_transport(CORPUS)
    os.environ.setdefault("SEMFORGE_LLM_API_KEY", "fixture-recording")
    with tempfile.TemporaryDirectory() as tmp:
        status = run_command(["--config", str(CORPUS / "semforge.toml"), "--mode", "record",
                              "--output-dir", tmp, "pipeline"], transport=transport)
        if status:
            return status
        shutil.copyfile(Path(tmp) / "fnl" / "extracted.fnl", CORPUS / "raw.fnl")
    if missing:
        print("no canned tooltip text for: " + ", ".join(sorted(set(missing))), file=sys.stderr)
        return 1
    print(f"recorded {sum(1 for _ in cache.rglob('*.json'))} cache entries")
    return 0


if __name__ == "__main__":
    sys.exit(main())
