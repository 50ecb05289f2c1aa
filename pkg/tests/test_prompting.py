from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from semforge.errors import (
    AuthMissing,
    BudgetTooSmall,
    CacheMiss,
    ResponseUnparseable,
    TemplateError,
    TransportError,
)
from semforge.fnl import FnlDocument, Term, default_vocabulary, loads_fnl
from semforge.latex_ingest import TRUNCATION_MARKER, split_document
from semforge.prompting import (
    EMPTY_MARKER,
    NONE_MARKER,
    LlmClient,
    PromptBundle,
    PromptTemplate,
    assemble_prompt,
    content_hash,
    extract_snippet_fnl,
    http_transport,
    minimum_budget,
    strip_fences,
)

from .conftest import CORPUS

TEMPLATE = PromptTemplate.load()
DOC = split_document((CORPUS / "doc.tex").read_text(encoding="utf-8"))


def test_bundled_template_has_seven_parts():
    assert len(TEMPLATE.parts) == 7
    assert all(p.startswith("# ") for p in TEMPLATE.parts)


@pytest.mark.parametrize("text", [
    "# only one\n{{processed_latex}}",
    "preamble\n# 1\n# 2\n{{processed_latex}}\n# 3\n# 4\n# 5\n# 6\n# 7\n",
    "# 1\n# 2\n# 3\n{{processed_latex}}{{processed_latex}}\n# 4\n{{extracted_fnl}}\n# 5\n{{current_snippet}}\n"
    "# 6\n{{following_snippet}}\n# 7\n",
    "# 1\n# 2\n{{vocabulary}}\n# 3\n{{processed_latex}}\n# 4\n{{extracted_fnl}}\n# 5\n{{current_snippet}}\n"
    "# 6\n{{following_snippet}}\n# 7\n",
])
def test_template_errors(text):
    with pytest.raises(TemplateError):
        PromptTemplate.parse(text)


def test_minimal_template_parses():
    text = ("# 1\n# 2\n# 3\n{{processed_latex}}\n# 4\n{{extracted_fnl}}\n# 5\n{{current_snippet}}\n"
            "# 6\n{{following_snippet}}\n# 7\n")
    assert PromptTemplate.parse(text).parts[6] == "# 7\n"


def test_assemble_parts_in_order():
    fnl = loads_fnl('## snippet 1\n- "vector space" subclass_of: set\n## snippet 3\n- "x" is_a: set\n')
    bundle = assemble_prompt(TEMPLATE, DOC, fnl, 2, 100_000)
    text = bundle.text
    heads = [line for line in text.splitlines() if line.startswith("# ")]
    assert len(heads) == 7
    assert DOC.get(1).body in text and DOC.get(2).body in text and DOC.get(3).body in text
    # only FNL of earlier snippets is included
    assert '"vector space" subclass_of: set' in text and '"x" is_a: set' not in text
    assert text.index(DOC.get(1).body) < text.index("subclass_of: set") < text.index(DOC.get(2).body)
    assert bundle.snippet_id == 2 and bundle.content_hash == content_hash("", text)


def test_first_and_last_snippet_markers():
    first = assemble_prompt(TEMPLATE, DOC, FnlDocument(), 1, 100_000).text
    assert first.count(EMPTY_MARKER) == 2  # nothing processed, nothing extracted
    last = assemble_prompt(TEMPLATE, DOC, FnlDocument(), 10, 100_000).text
    assert NONE_MARKER in last


def test_budget_truncates_only_processed_part():
    fnl = FnlDocument()
    minimum = minimum_budget(TEMPLATE, DOC, fnl, 9)
    with pytest.raises(BudgetTooSmall) as info:
        assemble_prompt(TEMPLATE, DOC, fnl, 9, minimum - 1)
    assert info.value.minimum == minimum
    for budget in (minimum, minimum + 100, minimum + 700):
        text = assemble_prompt(TEMPLATE, DOC, fnl, 9, budget).text
        assert len(text) <= budget
        assert DOC.get(9).body in text and DOC.get(10).body in text
        assert TRUNCATION_MARKER in text or EMPTY_MARKER in text
    full = assemble_prompt(TEMPLATE, DOC, fnl, 9, 100_000).text
    assert TRUNCATION_MARKER not in full


def test_hash_changes_with_one_character():
    a = assemble_prompt(TEMPLATE, DOC, FnlDocument(), 4, 100_000, model="m")
    text = (CORPUS / "doc.tex").read_text(encoding="utf-8").replace(r"\rangle = 0$", r"\rangle = 1$", 1)
    assert text != (CORPUS / "doc.tex").read_text(encoding="utf-8")
    b = assemble_prompt(TEMPLATE, split_document(text), FnlDocument(), 4, 100_000, model="m")
    assert a.content_hash != b.content_hash
    assert content_hash("m1", "x") != content_hash("m2", "x")


class Recorder:
    def __init__(self, replies):
        self.replies = list(replies)
        self.calls = []

    def __call__(self, endpoint, payload, api_key, timeout):
        self.calls.append((endpoint, payload, api_key))
        reply = self.replies.pop(0)
        if isinstance(reply, Exception):
            raise reply
        return reply


def client(tmp_path, transport, mode="record", **kw):
    kw.setdefault("api_key", "k")
    return LlmClient(tmp_path, mode, "http://llm.invalid/v1", "m", transport=transport, sleep=lambda s: None, **kw)


def test_replay_cold_cache_misses(tmp_path):
    c = client(tmp_path, Recorder([]), mode="replay")
    with pytest.raises(CacheMiss) as info:
        c.complete(c.bundle("hello"))
    assert str(info.value).startswith("CacheMiss:")


def test_record_then_replay(tmp_path):
    rec = Recorder(["- a is_a: b\n"])
    c = client(tmp_path, rec)
    bundle = c.bundle("prompt text", snippet_id=3)
    assert c.complete(bundle).text == "- a is_a: b\n"
    assert c.complete(bundle, mode="replay").text == "- a is_a: b\n"
    assert len(rec.calls) == 1
    entry = json.loads(c.cache_path(bundle.content_hash).read_text())
    assert entry["request"]["messages"][0]["content"] == "prompt text"
    assert entry["snippet_id"] == 3 and entry["model"] == "m"


def test_live_does_not_write_cache(tmp_path):
    c = client(tmp_path, Recorder(["x"]), mode="live")
    c.complete(c.bundle("p"))
    assert list(tmp_path.rglob("*.json")) == []


def test_missing_key(tmp_path):
    c = LlmClient(tmp_path, "live", "http://x", "m", transport=Recorder([]))
    with pytest.raises(AuthMissing):
        c.complete(c.bundle("p"))


def test_retries_with_backoff(tmp_path):
    sleeps = []
    rec = Recorder([TransportError("boom", 1), TransportError("boom", 1), "ok"])
    c = LlmClient(tmp_path, "live", "http://x", "m", api_key="k", transport=rec, sleep=sleeps.append, backoff=0.5)
    assert c.complete(c.bundle("p")).text == "ok"
    assert sleeps == [0.5, 1.0]
    rec = Recorder([TransportError("boom", 1)] * 3)
    c = LlmClient(tmp_path, "live", "http://x", "m", api_key="k", transport=rec, sleep=sleeps.append)
    with pytest.raises(TransportError) as info:
        c.complete(c.bundle("p"))
    assert info.value.attempts == 3 and len(rec.calls) == 3


def test_strip_fences_keeps_line_numbers():
    raw = "```fnl\n- a is_a: b\n```\n"
    assert strip_fences(raw) == "\n- a is_a: b\n\n"


def test_extract_snippet_fnl(tmp_path):
    vocab = default_vocabulary()
    c = client(tmp_path, Recorder(["```\n- \"a\" is_a: b\n```\n", "- a is_a: b c\n", "## snippet 9\n- a is_a: b\n"]))
    statements, diags = extract_snippet_fnl(c.bundle("p1", snippet_id=2), c, vocab)
    assert statements[0].subject == Term("new", "a") and statements[0].source_line == 2
    with pytest.raises(ResponseUnparseable) as info:
        extract_snippet_fnl(c.bundle("p2", snippet_id=2), c, vocab)
    assert info.value.raw == "- a is_a: b c\n"
    with pytest.raises(ResponseUnparseable):
        extract_snippet_fnl(c.bundle("p3", snippet_id=2), c, vocab)


class _Handler(BaseHTTPRequestHandler):
    seen = []

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        type(self).seen.append((self.path, self.headers["Authorization"], body))
        if body["messages"][0]["content"] == "fail":
            self.send_response(503)
            self.end_headers()
            return
        reply = json.dumps({"choices": [{"message": {"content": "- a is_a: b\n"}}]}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(reply)))
        self.end_headers()
        self.wfile.write(reply)

    def log_message(self, *args):
        pass


@pytest.fixture
def server():
    httpd = HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{httpd.server_port}/v1/chat"
    httpd.shutdown()
    httpd.server_close()


def test_http_wire_format(server, tmp_path):
    _Handler.seen.clear()
    c = LlmClient(tmp_path, "record", server, "model-x", api_key="secret", transport=http_transport,
                  sleep=lambda s: None)
    bundle = c.bundle("hello")
    assert c.complete(bundle).text == "- a is_a: b\n"
    path, auth, body = _Handler.seen[0]
    assert path == "/v1/chat" and auth == "Bearer secret"
    assert body == {"model": "model-x", "messages": [{"role": "user", "content": "hello"}], "temperature": 0}
    with pytest.raises(TransportError) as info:
        c.complete(c.bundle("fail"))
    assert "HTTP 503" in str(info.value) and len(_Handler.seen) == 4


def test_bundle_is_deterministic():
    a = PromptBundle.build("t", "m", 1)
    assert a == PromptBundle.build("t", "m", 1)
