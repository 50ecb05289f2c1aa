from __future__ import annotations

import json
import os
import shutil
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from semforge.cli import run_command
from semforge.fnl import PredicateVocabulary

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS = FIXTURES / "corpus"
GOLDEN = FIXTURES / "golden"

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large]
)
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _no_api_key(monkeypatch):
    monkeypatch.delenv("SEMFORGE_LLM_API_KEY", raising=False)


@pytest.fixture(scope="session")
def corpus_vocab() -> PredicateVocabulary:
    return PredicateVocabulary.load(CORPUS / "vocabulary.toml")


@pytest.fixture(scope="session")
def golden() -> dict:
    return json.loads((GOLDEN / "tooltip_count.json").read_text(encoding="utf-8"))


def run(*argv, **kwargs) -> int:
    return run_command([str(a) for a in argv], **kwargs)


@pytest.fixture(scope="session")
def pipeline_out(tmp_path_factory) -> Path:
    """Output directory of one replay-mode pipeline run on the fixture corpus."""
    out = tmp_path_factory.mktemp("pipeline")
    old = os.environ.pop("SEMFORGE_LLM_API_KEY", None)
    try:
        status = run("--config", CORPUS / "semforge.toml", "--output-dir", out, "pipeline")
    finally:
        if old is not None:
            os.environ["SEMFORGE_LLM_API_KEY"] = old
    assert status == 0
    return out


@pytest.fixture
def corpus_copy(tmp_path) -> Path:
    """Writable copy of the fixture corpus (config, sources, cache)."""
    dest = tmp_path / "corpus"
    shutil.copytree(CORPUS, dest)
    return dest
