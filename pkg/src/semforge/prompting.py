"""Prompt assembly and a record/replay LLM client.

A prompt has seven parts in fixed order. Parts three to six are filled per
snippet: the LaTeX already processed, the FNL accepted so far, the snippet to
formalize and the snippet that follows it. Only part three is ever
shortened, by cutting from the front.

Responses are cached on disk under the SHA-256 of model id and prompt text,
so a recorded run can be replayed offline with identical results.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .errors import (
    AuthMissing,
    BudgetTooSmall,
    CacheMiss,
    ResponseUnparseable,
    TemplateError,
    TransportError,
)
from .fnl import Diagnostic, FnlDocument, PredicateVocabulary, default_vocabulary, parse_fnl, serialize_fnl
from .latex_ingest import TRUNCATION_MARKER, SourceDocument, snippet_context

log = logging.getLogger(__name__)

API_KEY_ENV = "SEMFORGE_LLM_API_KEY"
DEFAULT_TEMPLATE_PATH = Path(__file__).with_name("data") / "prompt_template.md"
MODES = ("live", "record", "replay")

VOCABULARY_SLOT = "{{vocabulary}}"
SLOTS = {
    3: "{{processed_latex}}",
    4: "{{extracted_fnl}}",
    5: "{{current_snippet}}",
    6: "{{following_snippet}}",
}
EMPTY_MARKER = "(none yet)"
NONE_MARKER = "(none: this is the last snippet)"


@dataclass(frozen=True)
class PromptTemplate:
    parts: tuple[str, ...]

    @classmethod
    def parse(cls, text: str) -> "PromptTemplate":
        starts = [m.start() for m in re.finditer(r"^# ", text, re.M)]
        if text[: starts[0] if starts else len(text)].strip():
            raise TemplateError("text before the first '# ' heading")
        if len(starts) != 7:
            raise TemplateError(f"template needs exactly 7 '# ' headings, found {len(starts)}")
        bounds = starts + [len(text)]
        parts = tuple(text[bounds[i]:bounds[i + 1]] for i in range(7))
        for n, part in enumerate(parts, start=1):
            for slot_n, slot in SLOTS.items():
                count = part.count(slot)
                if slot_n == n and count != 1:
                    raise TemplateError(f"part {n} must contain {slot} exactly once")
                if slot_n != n and count:
                    raise TemplateError(f"{slot} belongs in part {slot_n}, found in part {n}")
            if n != 1 and VOCABULARY_SLOT in part:
                raise TemplateError(f"{VOCABULARY_SLOT} is only allowed in part 1")
        return cls(parts)

    @classmethod
    def load(cls, path=None) -> "PromptTemplate":
        return cls.parse(Path(path or DEFAULT_TEMPLATE_PATH).read_text(encoding="utf-8"))

    def render(self, vocabulary: str, fills: dict[int, str]) -> str:
        out = []
        for n, part in enumerate(self.parts, start=1):
            if n == 1:
                part = part.replace(VOCABULARY_SLOT, vocabulary)
            elif n in SLOTS:
                part = part.replace(SLOTS[n], fills[n], 1)
            out.append(part)
        return "".join(out)


def content_hash(model: str, text: str) -> str:
    return hashlib.sha256((model + "\x00" + text).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class PromptBundle:
    snippet_id: int | None
    text: str
    model: str
    content_hash: str
    purpose: str = "extract"

    @classmethod
    def build(cls, text: str, model: str, snippet_id: int | None = None, purpose: str = "extract"):
        return cls(snippet_id, text, model, content_hash(model, text), purpose)


def minimum_budget(template: PromptTemplate, doc: SourceDocument, fnl_so_far: FnlDocument, k: int,
                   vocab: PredicateVocabulary | None = None) -> int:
    fixed = _render(template, doc, fnl_so_far, k, vocab or default_vocabulary(), processed="")
    return len(fixed) + max(len(EMPTY_MARKER), len(TRUNCATION_MARKER))


def _render(template, doc, fnl_so_far, k, vocab, processed):
    _, current, following = snippet_context(doc, k, 0)
    extracted = serialize_fnl(fnl_so_far.restricted(k))
    return template.render(vocab.describe(), {
        3: processed,
        4: extracted or EMPTY_MARKER,
        5: current,
        6: following if following is not None else NONE_MARKER,
    })


def assemble_prompt(
    template: PromptTemplate,
    doc: SourceDocument,
    fnl_so_far: FnlDocument,
    k: int,
    budget: int,
    vocab: PredicateVocabulary | None = None,
    model: str = "",
) -> PromptBundle:
    """Fill the template for snippet ``k`` so the result fits in ``budget`` characters."""
    vocab = vocab or default_vocabulary()
    fixed_len = len(_render(template, doc, fnl_so_far, k, vocab, processed=""))
    minimum = fixed_len + max(len(EMPTY_MARKER), len(TRUNCATION_MARKER))
    if budget < minimum:
        raise BudgetTooSmall(budget, minimum)
    processed, _, _ = snippet_context(doc, k, budget - fixed_len)
    text = _render(template, doc, fnl_so_far, k, vocab, processed=processed or EMPTY_MARKER)
    return PromptBundle.build(text, model, snippet_id=k)


# -- LLM client --------------------------------------------------------------

@dataclass(frozen=True)
class LlmResponse:
    text: str
    mode: str
    model: str


Transport = Callable[[str, dict, str, float], str]


def http_transport(endpoint: str, payload: dict, api_key: str, timeout: float) -> str:
    """POST ``payload`` as JSON and pull the completion text out of the reply."""
    req = urllib.request.Request(
        endpoint,
        data=json.dumps(payload).encode("utf-8"),
        headers={"Content-Type": "application/json", "Authorization": f"Bearer {api_key}"},
        method="POST",
    )
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            body = json.loads(resp.read().decode("utf-8"))
    except urllib.error.HTTPError as exc:
        raise TransportError(f"HTTP {exc.code} from {endpoint}", 1) from exc
    except (urllib.error.URLError, TimeoutError, OSError) as exc:
        raise TransportError(f"cannot reach {endpoint}: {exc}", 1) from exc
    except json.JSONDecodeError as exc:
        raise TransportError(f"non-JSON reply from {endpoint}", 1) from exc
    return _completion_text(body)


def _completion_text(body) -> str:
    try:
        if "choices" in body:
            choice = body["choices"][0]
            if "message" in choice:
                return choice["message"]["content"]
            return choice["text"]
        for key in ("text", "output", "response"):
            if isinstance(body.get(key), str):
                return body[key]
    except (KeyError, IndexError, TypeError):
        pass
    raise TransportError("reply has no completion text", 1)


class LlmClient:
    """Talks to one HTTP endpoint, with an on-disk response cache.

    ``live`` queries the service, ``record`` queries it and stores the reply,
    ``replay`` answers from the cache only.
    """

    def __init__(
        self,
        cache_dir,
        mode: str = "replay",
        endpoint: str | None = None,
        model: str = "unset",
        api_key: str | None = None,
        transport: Transport | None = None,
        max_attempts: int = 3,
        backoff: float = 1.0,
        timeout: float = 120.0,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        self.cache_dir = Path(cache_dir)
        self.mode = mode
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.transport = transport or http_transport
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.timeout = timeout
        self.sleep = sleep

    def cache_path(self, digest: str) -> Path:
        return self.cache_dir / digest[:2] / f"{digest}.json"

    def bundle(self, text: str, snippet_id: int | None = None, purpose: str = "extract") -> PromptBundle:
        return PromptBundle.build(text, self.model, snippet_id, purpose)

    def request_payload(self, bundle: PromptBundle) -> dict:
        return {
            "model": bundle.model,
            "messages": [{"role": "user", "content": bundle.text}],
            "temperature": 0,
        }

    def complete(self, bundle: PromptBundle, mode: str | None = None) -> LlmResponse:
        mode = mode or self.mode
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if mode == "replay":
            path = self.cache_path(bundle.content_hash)
            if not path.is_file():
                raise CacheMiss(bundle.content_hash)
            entry = json.loads(path.read_text(encoding="utf-8"))
            return LlmResponse(entry["response"], "replay", entry["model"])
        text = self._call(bundle)
        if mode == "record":
            self._store(bundle, text)
        return LlmResponse(text, "live", bundle.model)

    def _call(self, bundle: PromptBundle) -> str:
        if not self.api_key:
            raise AuthMissing(API_KEY_ENV)
        if not self.endpoint:
            raise TransportError("no LLM endpoint configured", 0)
        payload = self.request_payload(bundle)
        last = None
        for attempt in range(self.max_attempts):
            try:
                return self.transport(self.endpoint, payload, self.api_key, self.timeout)
            except TransportError as exc:
                last = exc
                log.warning("LLM request failed (attempt %d/%d): %s", attempt + 1, self.max_attempts, exc)
                if attempt + 1 < self.max_attempts:
                    self.sleep(self.backoff * 2 ** attempt)
        raise TransportError(str(last).split(" (after")[0], self.max_attempts)

    def _store(self, bundle: PromptBundle, text: str) -> None:
        path = self.cache_path(bundle.content_hash)
        path.parent.mkdir(parents=True, exist_ok=True)
        entry = {
            "content_hash": bundle.content_hash,
            "model": bundle.model,
            "purpose": bundle.purpose,
            "snippet_id": bundle.snippet_id,
            "request": self.request_payload(bundle),
            "response": text,
        }
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(entry, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
        tmp.replace(path)


_FENCE = re.compile(r"[ \t]*```[^\n]*")


def strip_fences(text: str) -> str:
    """Blank out code-fence lines, keeping line numbers aligned with the raw text."""
    return "\n".join("" if _FENCE.fullmatch(line.rstrip("\r")) else line for line in text.split("\n"))


def extract_snippet_fnl(bundle: PromptBundle, client: LlmClient, vocab: PredicateVocabulary | None = None):
    """Ask the LLM for snippet ``bundle.snippet_id``; returns (statements, diagnostics)."""
    vocab = vocab or default_vocabulary()
    response = client.complete(bundle)
    k = bundle.snippet_id
    doc, diags = parse_fnl(strip_fences(response.text), vocab, default_snippet=k)
    errors = [d for d in diags if d.severity == "error"]
    stray = [sid for sid in doc.blocks if sid != k]
    if stray:
        errors.append(Diagnostic("error", 1, 1, "UnexpectedBlock",
                                 f"response contains blocks for other snippets: {stray}"))
    if errors:
        raise ResponseUnparseable(response.text, errors)
    return doc.blocks.get(k, []), diags
