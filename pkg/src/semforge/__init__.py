"""semforge: LaTeX to knowledge graph to semantically annotated HTML."""

from .compiler import CompileReport, compile_fnl, compile_theorem_block, resolve_term
from .fnl import PredicateVocabulary, diff_summary, lint, parse_fnl, serialize_fnl
from .kgraph import KnowledgeGraph, Literal, Uri, export_builder_script, parse, serialize
from .latex_ingest import SourceDocument, split_document, validate_snippets
from .prompting import LlmClient, PromptTemplate, assemble_prompt, extract_snippet_fnl
from .semlayer import generate_tooltip_content, index_occurrences, latex_to_html, render

__version__ = "0.1.0"

__all__ = [
    "CompileReport", "KnowledgeGraph", "Literal", "LlmClient", "PredicateVocabulary", "PromptTemplate",
    "SourceDocument", "Uri", "assemble_prompt", "compile_fnl", "compile_theorem_block", "diff_summary",
    "export_builder_script", "extract_snippet_fnl", "generate_tooltip_content", "index_occurrences",
    "latex_to_html", "lint", "parse", "parse_fnl", "render", "resolve_term", "serialize", "serialize_fnl",
    "split_document", "validate_snippets",
]
