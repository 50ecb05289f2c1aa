"""Command line front end: ``semforge <command>`` driven by one TOML config.

Outputs land under the configured output directory::

    fnl/document.fnl        working FNL, edited during review
    fnl/extracted.fnl       raw LLM output as accepted, for ``diff``
    fnl/rejected/           responses that did not parse
    graph.kgt, graph.kgb    compiled knowledge graph
    doc.html                rendered document with the semantic layer
    reports/                plain-text stage reports

Exit status: 0 success, 1 diagnostics or module errors, 2 usage or config.
"""

from __future__ import annotations

import argparse
import logging
import shlex
import sys
from dataclasses import dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import kgraph
from .compiler import compile_fnl
from .errors import CacheMiss, ConfigError, ResponseUnparseable, SemforgeError
from .fnl import DEFAULT_VOCABULARY_PATH, Diagnostic, FnlDocument, PredicateVocabulary, diff_summary, lint, parse_fnl, serialize_fnl
from .kgraph import KnowledgeGraph, Literal, Uri
from .latex_ingest import split_document, validate_snippets
from .prompting import (
    API_KEY_ENV,
    DEFAULT_TEMPLATE_PATH,
    MODES,
    LlmClient,
    PromptTemplate,
    assemble_prompt,
    extract_snippet_fnl,
    minimum_budget,
)
from .semlayer import DEFAULT_STYLESHEET_PATH, generate_tooltip_content, index_occurrences, render

log = logging.getLogger("semforge")

COMMANDS = ("split", "prompt", "extract", "lint", "diff", "compile", "query", "render", "pipeline")
DEFAULT_CONFIG = "semforge.toml"
DEFAULT_BUDGET = 24000
_CREDENTIAL_KEYS = ("api_key", "apikey", "token", "secret", "password")


# -- configuration -----------------------------------------------------------

@dataclass(frozen=True)
class ConfigDiagnostic:
    code: str  # "MissingKey" or "BadValue"
    key: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}({self.key}): {self.message}"


@dataclass(frozen=True)
class PipelineConfig:
    path: Path
    source: Path
    template: Path
    vocabulary: Path
    base_graph: Path | None
    stylesheet: Path
    cache_dir: Path
    output_dir: Path
    namespace: str
    endpoint: str | None
    model: str
    mode: str
    budget: int
    refine_tooltips: bool
    warnings: tuple[str, ...] = ()

    @property
    def fnl_dir(self) -> Path:
        return self.output_dir / "fnl"

    @property
    def working_fnl(self) -> Path:
        return self.fnl_dir / "document.fnl"

    @property
    def extracted_fnl(self) -> Path:
        return self.fnl_dir / "extracted.fnl"

    @property
    def reports(self) -> Path:
        return self.output_dir / "reports"


def validate_config(path, overrides: dict | None = None) -> PipelineConfig:
    """Load and check a TOML config; raises ConfigError listing every bad key.

    Relative paths are taken relative to the config file. ``overrides``
    (from command line flags) replace file values before checking.
    """
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError([ConfigDiagnostic("BadValue", "config", f"cannot read {path}: {exc.strerror}")]) from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([ConfigDiagnostic("BadValue", "config", f"{path}: {exc}")]) from None
    llm = data.get("llm", {})
    if not isinstance(llm, dict):
        raise ConfigError([ConfigDiagnostic("BadValue", "llm", "must be a table")])
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value

    base = path.parent
    diags: list[ConfigDiagnostic] = []
    warnings: list[str] = []
    for table, name in ((data, ""), (llm, "llm.")):
        for key in table:
            if key.lower() in _CREDENTIAL_KEYS:
                warnings.append(f"{name}{key}: credentials in config files are ignored; set {API_KEY_ENV}")

    def get(key, kind, default=None, required=False):
        if key not in data:
            if required:
                diags.append(ConfigDiagnostic("MissingKey", key, "required"))
            return default
        value = data[key]
        if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
            diags.append(ConfigDiagnostic("BadValue", key, f"expected {kind.__name__}, got {value!r}"))
            return default
        return value

    def existing(key, default=None, required=False):
        raw = get(key, str, required=required)
        if raw is None:
            return default
        p = base / raw
        if not p.is_file():
            diags.append(ConfigDiagnostic("BadValue", key, f"no such file: {p}"))
        return p

    source = existing("source", required=True)
    template = existing("template", DEFAULT_TEMPLATE_PATH)
    vocabulary = existing("vocabulary", DEFAULT_VOCABULARY_PATH)
    base_graph = existing("base_graph")
    stylesheet = existing("stylesheet", DEFAULT_STYLESHEET_PATH)
    cache_dir = base / get("cache_dir", str, "cache")
    output_dir = base / get("output_dir", str, "out")
    namespace = get("namespace", str, "main")
    mode = get("mode", str, "replay")
    if mode not in MODES:
        diags.append(ConfigDiagnostic("BadValue", "mode", f"{mode!r} is not one of {', '.join(MODES)}"))
    budget = get("budget", int, DEFAULT_BUDGET)
    refine = get("refine_tooltips", bool, False)
    endpoint = llm.get("endpoint")
    model = llm.get("model", "unset")
    if endpoint is not None and not isinstance(endpoint, str):
        diags.append(ConfigDiagnostic("BadValue", "llm.endpoint", "expected a URL string"))
    if not isinstance(model, str) or not model:
        diags.append(ConfigDiagnostic("BadValue", "llm.model", "expected a nonempty string"))
    try:
        KnowledgeGraph(namespace)
    except ValueError:
        diags.append(ConfigDiagnostic("BadValue", "namespace", f"{namespace!r} is not a valid namespace"))
    if base_graph is not None and base_graph.is_file() and not diags:
        header = base_graph.read_text(encoding="utf-8").split("\n", 1)[0]
        graph_ns = header.split("namespace=", 1)[1].strip() if "namespace=" in header else "main"
        if "namespace" in data and graph_ns != namespace:
            diags.append(ConfigDiagnostic("BadValue", "namespace",
                                          f"{namespace!r} differs from the base graph namespace {graph_ns!r}"))
        namespace = graph_ns
    tmpl = vocab = None
    if not diags:
        try:
            tmpl = PromptTemplate.load(template)
        except SemforgeError as exc:
            diags.append(ConfigDiagnostic("BadValue", "template", str(exc)))
        try:
            vocab = PredicateVocabulary.load(vocabulary)
        except (ValueError, KeyError, TypeError, tomllib.TOMLDecodeError) as exc:
            diags.append(ConfigDiagnostic("BadValue", "vocabulary", str(exc)))
    if not diags:
        try:
            doc = split_document(source.read_text(encoding="utf-8"), str(source))
        except SemforgeError:
            doc = None  # reported by the command that reads the source
        if doc is not None:
            minimum = max(minimum_budget(tmpl, doc, FnlDocument(), k, vocab) for k in doc.ids())
            if budget < minimum:
                diags.append(ConfigDiagnostic("BadValue", "budget", f"{budget} is below the minimum {minimum}"))
    if diags:
        raise ConfigError(diags)
    return PipelineConfig(
        path=path, source=source, template=template, vocabulary=vocabulary, base_graph=base_graph,
        stylesheet=stylesheet, cache_dir=cache_dir, output_dir=output_dir, namespace=namespace,
        endpoint=endpoint, model=model, mode=mode, budget=budget, refine_tooltips=refine,
        warnings=tuple(warnings),
    )


# -- shared helpers ----------------------------------------------------------

class Stage:
    """Loaded inputs for one command run."""

    def __init__(self, config: PipelineConfig, transport=None, out=None, err=None):
        self.config = config
        self.transport = transport
        self.out = out or sys.stdout
        self.err = err or sys.stderr
        self._vocab = None

    @property
    def vocab(self) -> PredicateVocabulary:
        if self._vocab is None:
            self._vocab = PredicateVocabulary.load(self.config.vocabulary)
        return self._vocab

    def source(self):
        return split_document(self.config.source.read_text(encoding="utf-8"), str(self.config.source))

    def client(self) -> LlmClient:
        cfg = self.config
        return LlmClient(cfg.cache_dir, cfg.mode, cfg.endpoint, cfg.model, transport=self.transport)

    def base_graph(self) -> KnowledgeGraph:
        if self.config.base_graph is None:
            return KnowledgeGraph(self.config.namespace)
        return kgraph.parse(self.config.base_graph.read_text(encoding="utf-8"))

    def read_fnl(self, path: Path) -> tuple[FnlDocument, list[Diagnostic]]:
        if not path.is_file():
            return FnlDocument(), []
        return parse_fnl(path.read_text(encoding="utf-8"), self.vocab)

    def write(self, path: Path, text: str) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="\n")

    def report(self, name: str, lines) -> None:
        self.write(self.config.reports / name, "".join(f"{line}\n" for line in lines))

    def say(self, text: str = "") -> None:
        print(text, file=self.out)

    def complain(self, text: str) -> None:
        print(text, file=self.err)


# -- commands ----------------------------------------------------------------

def cmd_split(stage: Stage, args) -> int:
    doc = stage.source()
    warnings = validate_snippets(doc)
    for s in doc.snippets:
        stage.say(f"snippet {s.id}\tlines {s.line_range[0]}-{s.line_range[1]}\tsentences {s.sentence_estimate}")
    for w in warnings:
        stage.complain(f"warning: {w}")
    if doc.reassemble() != stage.config.source.read_text(encoding="utf-8"):
        stage.complain("split: reassembled snippets differ from the source")
        return 1
    return 0


def cmd_prompt(stage: Stage, args) -> int:
    doc = stage.source()
    accepted, _ = stage.read_fnl(stage.config.working_fnl)
    template = PromptTemplate.load(stage.config.template)
    bundle = assemble_prompt(template, doc, accepted, args.snippet, stage.config.budget, stage.vocab,
                             model=stage.config.model)
    stage.out.write(bundle.text)
    return 0


def cmd_extract(stage: Stage, args) -> int:
    """Ask the LLM for each snippet in turn; accepted blocks feed later prompts."""
    cfg = stage.config
    doc = stage.source()
    template = PromptTemplate.load(cfg.template)
    client = stage.client()
    working, diags = stage.read_fnl(cfg.working_fnl)
    if any(d.severity == "error" for d in diags):
        for d in diags:
            stage.complain(f"{cfg.working_fnl}:{d}")
        stage.complain("extract: fix the working FNL file first")
        return 1
    raw, _ = stage.read_fnl(cfg.extracted_fnl)
    lo = args.from_ if args.from_ is not None else min(doc.ids())
    hi = args.to if args.to is not None else max(doc.ids())
    report, status = [], 0
    for k in doc.ids():
        if not lo <= k <= hi:
            continue
        if k in working.blocks and not args.force:
            report.append(f"snippet {k}: kept (already in {cfg.working_fnl.name})")
            continue
        bundle = assemble_prompt(template, doc, working, k, cfg.budget, stage.vocab, model=cfg.model)
        try:
            statements, notes = extract_snippet_fnl(bundle, client, stage.vocab)
        except ResponseUnparseable as exc:
            stage.write(cfg.fnl_dir / "rejected" / f"snippet_{k}.txt", exc.raw)
            report.append(f"snippet {k}: rejected: {exc}")
            stage.complain(f"snippet {k}: {exc}")
            status = 1
            continue
        working.blocks[k] = statements
        raw.blocks[k] = statements
        report.append(f"snippet {k}: {sum(1 for top in statements for _ in top.walk())} statements")
        report += [f"snippet {k}: {d}" for d in notes]
        stage.write(cfg.working_fnl, serialize_fnl(working))
        stage.write(cfg.extracted_fnl, serialize_fnl(raw))
    stage.write(cfg.working_fnl, serialize_fnl(working))
    stage.report("extract.txt", report)
    for line in report:
        stage.say(line)
    return status


def _lint_all(stage: Stage, path: Path) -> tuple[FnlDocument, list[Diagnostic]]:
    doc, diags = stage.read_fnl(path)
    return doc, sorted(diags + lint(doc, stage.vocab, stage.base_graph()), key=lambda d: (d.line, d.code))


def cmd_lint(stage: Stage, args) -> int:
    path = Path(args.file) if args.file else stage.config.working_fnl
    if not path.is_file():
        stage.complain(f"lint: no such file: {path}")
        return 1
    _, diags = _lint_all(stage, path)
    for d in diags:
        stage.say(f"{path}:{d}")
    errors = sum(d.severity == "error" for d in diags)
    warnings = len(diags) - errors
    stage.say(f"{errors} errors, {warnings} warnings")
    return 1 if errors or (args.strict and warnings) else 0


def cmd_diff(stage: Stage, args) -> int:
    docs = []
    for name in (args.old, args.new):
        doc, diags = parse_fnl(Path(name).read_text(encoding="utf-8"), stage.vocab)
        errors = [d for d in diags if d.severity == "error"]
        if errors:
            for d in errors:
                stage.complain(f"{name}:{d}")
            return 1
        docs.append(doc)
    summary = diff_summary(*docs)
    stage.say(f"added: {summary.added}")
    stage.say(f"removed: {summary.removed}")
    stage.say(f"modified: {summary.modified}")
    stage.say(f"statements in old: {len(docs[0])}")
    stage.say(f"intervention_rate: {summary.intervention_rate:.4f}")
    return 0


def cmd_compile(stage: Stage, args) -> int:
    """Compile the reviewed FNL onto a fresh copy of the base graph."""
    cfg = stage.config
    if not cfg.working_fnl.is_file():
        stage.complain(f"compile: no FNL file at {cfg.working_fnl}; run extract first")
        return 1
    doc, diags = _lint_all(stage, cfg.working_fnl)
    errors = [d for d in diags if d.severity == "error"]
    if errors:
        for d in errors:
            stage.complain(f"{cfg.working_fnl}:{d}")
        stage.complain(f"compile: refused, {len(errors)} error diagnostics in {cfg.working_fnl.name}")
        return 1
    graph = stage.base_graph()
    result = compile_fnl(doc, graph, stage.vocab)
    stage.write(cfg.output_dir / "graph.kgt", kgraph.serialize(graph))
    stage.write(cfg.output_dir / "graph.kgb", kgraph.export_builder_script(graph))
    lines = result.summary().splitlines() + [f"lint: {d}" for d in diags]
    stage.report("compile.txt", lines)
    stage.say(f"compiled {len(doc.blocks)} snippet blocks: "
              f"{len(result.created)} entities, {len(result.asserted)} statements")
    return 0


def _load_compiled(stage: Stage) -> KnowledgeGraph:
    path = stage.config.output_dir / "graph.kgt"
    if not path.is_file():
        raise FileNotFoundError(f"no compiled graph at {path}; run compile first")
    return kgraph.parse(path.read_text(encoding="utf-8"))


def _query_term(token: str, graph: KnowledgeGraph, position: str):
    if token == "?":
        return None
    if token.startswith("kb://"):
        try:
            return Uri.parse(token)
        except ValueError as exc:
            raise SemforgeError(str(exc)) from None
    if token.startswith("lit:"):
        if position != "object":
            raise SemforgeError(f"a literal can only be the object, got {token!r}")
        if token.startswith("lit:str:") and not token[8:].startswith('"'):
            # shell quoting already removed the JSON quotes
            return Literal(token[8:], "str")
        try:
            return Literal.decode(token)
        except ValueError as exc:
            raise SemforgeError(str(exc)) from None
    if position == "predicate":
        uri = graph.relation_by_label(token)
    else:
        uri = graph.item_by_label(token) or graph.item_by_label(token.replace("_", " "))
    if uri is None:
        raise SemforgeError(f"no {'relation' if position == 'predicate' else 'item'} labelled {token!r}")
    return uri


def format_statement(st, graph: KnowledgeGraph) -> str:
    parts = [str(st.uri), graph.label_of(st.subject), graph.label_of(st.predicate), graph.label_of(st.object)]
    if st.scope is not None:
        parts.append(f"scope={graph.label_of(st.scope)}")
    return "\t".join(parts)


def cmd_query(stage: Stage, args) -> int:
    tokens = shlex.split(args.pattern)
    if len(tokens) != 3:
        stage.complain('query: pattern must have three parts, e.g. "? is_a theorem"')
        return 2
    graph = _load_compiled(stage)
    s, p, o = (_query_term(t, graph, pos) for t, pos in zip(tokens, ("subject", "predicate", "object")))
    for st in graph.query(s, p, o):
        stage.say(format_statement(st, graph))
    return 0


def cmd_render(stage: Stage, args) -> int:
    cfg = stage.config
    doc = stage.source()
    graph = _load_compiled(stage)
    warnings: list[str] = []
    occurrences = index_occurrences(doc, graph, warnings)
    client = stage.client() if cfg.refine_tooltips else None
    tooltips = {}
    for uri in sorted({o.entity for o in occurrences}):
        tooltips[uri] = generate_tooltip_content(uri, graph, client, warnings)
    stylesheet = Path(args.stylesheet) if getattr(args, "stylesheet", None) else cfg.stylesheet
    page = render(doc, graph, occurrences, tooltips, stylesheet.read_text(encoding="utf-8"))
    warnings += page.warnings
    stage.write(cfg.output_dir / "doc.html", page.html)
    stage.report("render.txt", [f"tooltips: {page.tooltip_count}", *warnings])
    stage.say(f"rendered {len(doc.snippets)} snippets with {page.tooltip_count} tooltips")
    return 0


def cmd_pipeline(stage: Stage, args) -> int:
    """extract, lint gate, compile, render."""
    args.from_ = args.to = None
    args.force = False
    status = cmd_extract(stage, args)
    if status:
        stage.complain("pipeline: stopped after extract")
        return status
    status = cmd_compile(stage, args)
    if status:
        stage.complain("pipeline: stopped at the lint gate")
        return status
    return cmd_render(stage, args)


HANDLERS = {
    "split": cmd_split, "prompt": cmd_prompt, "extract": cmd_extract, "lint": cmd_lint, "diff": cmd_diff,
    "compile": cmd_compile, "query": cmd_query, "render": cmd_render, "pipeline": cmd_pipeline,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semforge", description="LaTeX to knowledge graph to annotated HTML")
    parser.add_argument("--config", default=DEFAULT_CONFIG, help="TOML config file (default: %(default)s)")
    parser.add_argument("--mode", choices=MODES, help="LLM mode, overrides the config")
    parser.add_argument("--output-dir", help="output directory, overrides the config")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    sub.add_parser("split", help="check snippet delimiters")
    p = sub.add_parser("prompt", help="print the assembled prompt for one snippet")
    p.add_argument("--snippet", type=int, required=True)
    p = sub.add_parser("extract", help="LLM extraction of FNL, snippet by snippet")
    p.add_argument("--from", dest="from_", type=int)
    p.add_argument("--to", type=int)
    p.add_argument("--force", action="store_true", help="re-extract snippets already in the working file")
    p = sub.add_parser("lint", help="review diagnostics for an FNL file")
    p.add_argument("file", nargs="?")
    p.add_argument("--strict", action="store_true", help="treat warnings as errors")
    p = sub.add_parser("diff", help="intervention rate between two FNL files")
    p.add_argument("old")
    p.add_argument("new")
    sub.add_parser("compile", help="compile the working FNL into the graph")
    p = sub.add_parser("query", help='statements matching "S P O" ("?" is a wildcard)')
    p.add_argument("pattern")
    for name in ("render", "pipeline"):
        p = sub.add_parser(name, help="render HTML" if name == "render" else "extract, lint, compile, render")
        p.add_argument("--stylesheet", help="CSS file replacing the bundled stylesheet")
    return parser


def run_command(argv=None, transport=None, out=None, err=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    err = err or sys.stderr
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if args.command == "diff":
        config = None
        try:
            config = validate_config(args.config)
        except ConfigError:
            pass
        stage = Stage(config or _diff_only_config(), transport, out, err)
    else:
        try:
            output_dir = str(Path(args.output_dir).resolve()) if args.output_dir else None
            config = validate_config(args.config, {"mode": args.mode, "output_dir": output_dir})
        except ConfigError as exc:
            for d in exc.diagnostics:
                print(f"config: {d}", file=err)
            return 2
        for w in config.warnings:
            print(f"config warning: {w}", file=err)
        stage = Stage(config, transport, out, err)
    try:
        return HANDLERS[args.command](stage, args)
    except CacheMiss as exc:
        print(f"error: {exc} (run with --mode record to fill the cache)", file=err)
        return 1
    except SemforgeError as exc:
        print(f"error: {exc}", file=err)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=err)
        return 1


def _diff_only_config() -> PipelineConfig:
    """Defaults for ``diff``, which needs only the vocabulary."""
    return PipelineConfig(
        path=Path(DEFAULT_CONFIG), source=Path(), template=DEFAULT_TEMPLATE_PATH,
        vocabulary=DEFAULT_VOCABULARY_PATH, base_graph=None, stylesheet=DEFAULT_STYLESHEET_PATH,
        cache_dir=Path("cache"), output_dir=Path("out"), namespace="main", endpoint=None, model="unset",
        mode="replay", budget=DEFAULT_BUDGET, refine_tooltips=False,
    )


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
