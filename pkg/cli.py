"""Command-line entry point: ingest, generate, evaluate, report and embed."""
import argparse
import os
import sys
from typing import List, Optional, Sequence

from analyzers.characteristics_analyzer import collect_field_texts
from augmentation.clients import create_client, default_client_name
from augmentation.editor import utc_now
from augmentation.prompts import PromptLibrary
from config import (
    CHARACTERISTICS_COLUMNS, DEFAULT_REFS_MANIFEST, DEFAULT_TEMPERATURE, EMBED_PROVIDERS, EXIT_CODES,
    LAYER_INDICES, MAX_IN_FLIGHT, MAX_REPAIR_RETRIES, REFS_DIRNAME, REPORT_FORMATS, validate_embedding_config,
    validate_llm_config,
)
from core.corpus import ingest_references, load_corpus
from core.errors import QuarantineFailure, ScenarioToolError
from core.pipeline import (
    EvaluationOptions, RunConfig, ScenarioPipeline, frozen_clock, parse_generated_specs,
)
from core.scenario import ContextMode, StructureMode
from core.taxonomy import load_taxonomy
from utils.embedder import EmbeddingCache, create_provider, embed_corpus, embed_texts
from utils.fileio import atomic_write_text
from utils.logger import configure_logging, get_logger
from utils.report import MetricReport

logger = get_logger(__name__)

USAGE_ERROR = 2


def parse_layers(value: str) -> List[int]:
    try:
        layers = sorted({int(part) for part in value.split(",") if part.strip()})
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"layers must be comma-separated integers, got {value!r}") from e
    if not layers or any(k not in LAYER_INDICES for k in layers):
        raise argparse.ArgumentTypeError(f"layers must be within 1..5, got {value!r}")
    return layers


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scenario-tool",
        description="Generate edge-case driving scenarios by layer-wise editing and score them against references.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug logs")
    parser.add_argument("--taxonomy", default=None, help="Category taxonomy JSON (default: data/taxonomy.json)")
    commands = parser.add_subparsers(dest="command", required=True)

    ingest = commands.add_parser("ingest", help="Validate scenario files and store them as a reference corpus")
    ingest.add_argument("files", nargs="+", help="Scenario JSON files")
    ingest.add_argument("--out", required=True, help="Output root; the corpus lands in OUT/refs/")
    ingest.add_argument("--structure", choices=[m.value for m in StructureMode], default=None,
                        help="Convert references to this structure mode")

    generate = commands.add_parser("generate", help="Edit every reference on the chosen layers")
    generate.add_argument("--refs", default=DEFAULT_REFS_MANIFEST, help="Reference manifest")
    generate.add_argument("--out", required=True, help="Output root; results land in OUT/generated/<run-id>/")
    generate.add_argument("--layers", type=parse_layers, default=list(LAYER_INDICES), help="e.g. 1,4")
    generate.add_argument("--variants", type=int, default=10, help="Variants per (scenario, layer)")
    generate.add_argument("--structure", choices=[m.value for m in StructureMode],
                          default=StructureMode.UNSTRUCTURED.value)
    generate.add_argument("--context", choices=[m.value for m in ContextMode], default=ContextMode.INDEPENDENT.value)
    generate.add_argument("--client", choices=["mock", "http", "openai"], default=None,
                          help="Chat backend (default: http when LLM_ENDPOINT is set, else mock)")
    generate.add_argument("--seed", type=int, default=0)
    generate.add_argument("--temperature", type=float, default=DEFAULT_TEMPERATURE)
    generate.add_argument("--max-retries", type=int, default=MAX_REPAIR_RETRIES)
    generate.add_argument("--max-in-flight", type=int, default=MAX_IN_FLIGHT)
    generate.add_argument("--run-id", default=None)
    generate.add_argument("--tasks", default=None, help="Layer task JSON (default: data/tasks.json)")
    generate.add_argument("--system-prompt", default=None, help="System prompt text file")
    generate.add_argument("--strict", action="store_true", help="Fail when any scenario is quarantined")

    evaluate = commands.add_parser("evaluate", help="Score generated corpora against the references")
    evaluate.add_argument("--refs", default=DEFAULT_REFS_MANIFEST, help="Reference manifest")
    evaluate.add_argument("--gen", action="append", required=True, metavar="[LABEL=]MANIFEST",
                          help="Generated corpus manifest; repeat to compare several corpora")
    evaluate.add_argument("--provider", choices=EMBED_PROVIDERS, default="local",
                          help="cache: replay --embed-cache and fail on any miss")
    evaluate.add_argument("--embed-cache", default=None, help="Embedding cache file")
    evaluate.add_argument("--exclude-noops", action="store_true", help="Skip scenarios whose edited layer is unchanged")
    evaluate.add_argument("--diversity-mean", action="store_true", help="Also report diversity with mean aggregation")
    evaluate.add_argument("--out", default=None, help="Write the JSON report here")
    evaluate.add_argument("--format", choices=sorted(REPORT_FORMATS), default="markdown",
                          help="Format printed to stdout")

    report = commands.add_parser("report", help="Render a JSON report")
    report.add_argument("report", help="JSON report written by evaluate")
    report.add_argument("--format", choices=sorted(REPORT_FORMATS), default="markdown")
    report.add_argument("--out", default=None, help="Write here instead of stdout")

    embed = commands.add_parser("embed", help="Fill the embedding cache for corpora")
    embed.add_argument("--manifest", action="append", required=True, help="Corpus manifest; repeatable")
    embed.add_argument("--provider", choices=EMBED_PROVIDERS, default="local")
    embed.add_argument("--embed-cache", required=True, help="Embedding cache file")
    return parser


# ================================
# COMMANDS
# ================================

def cmd_ingest(args: argparse.Namespace) -> int:
    taxonomy = load_taxonomy(args.taxonomy)
    manifest = ingest_references(args.files, os.path.join(args.out, REFS_DIRNAME), mode=args.structure,
                                 taxonomy=taxonomy)
    print(f"ingested {len(args.files)} scenarios; corpus holds {len(manifest)}")
    return 0


def cmd_generate(args: argparse.Namespace) -> int:
    taxonomy = load_taxonomy(args.taxonomy)
    library = PromptLibrary.load(args.system_prompt, args.tasks, taxonomy)
    logger.debug("chat backends: %s", validate_llm_config())
    client_name = args.client or default_client_name()
    client = create_client(client_name, taxonomy=taxonomy, seed=args.seed)
    reproducible = client_name == "mock" or "SOURCE_DATE_EPOCH" in os.environ
    config = RunConfig(
        refs=args.refs,
        out=args.out,
        layers=tuple(args.layers),
        variants=args.variants,
        structure=StructureMode(args.structure),
        context=ContextMode(args.context),
        seed=args.seed,
        temperature=args.temperature,
        strict=args.strict,
        max_retries=args.max_retries,
        max_in_flight=args.max_in_flight,
        run_id=args.run_id,
    )
    pipeline = ScenarioPipeline(taxonomy, library)
    summary = pipeline.run_generation(config, client, clock=frozen_clock() if reproducible else utc_now)
    print(f"generated: {summary['generated']}  quarantined: {summary['quarantined']}  "
          f"retried: {summary['retried']}  no-ops: {summary['noops']}")
    print(f"manifest: {summary['manifest']}")
    if not summary["success"]:
        raise QuarantineFailure(summary["error"])
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    taxonomy = load_taxonomy(args.taxonomy)
    generated = parse_generated_specs(args.gen)
    logger.debug("embedding backends: %s", validate_embedding_config())
    cache = EmbeddingCache(args.embed_cache) if args.embed_cache else None
    provider = create_provider(args.provider, cache)
    options = EvaluationOptions(diversity_mean=args.diversity_mean, exclude_noops=args.exclude_noops)
    report = ScenarioPipeline(taxonomy).run_evaluation(generated, args.refs, provider, cache, options)
    if args.out:
        atomic_write_text(args.out, report.to_json())
    sys.stdout.write(report.render(args.format))
    if cache is not None:
        logger.info("embedding cache: %d hits, %d misses", cache.hits, cache.misses)
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    with open(args.report, "r", encoding="utf-8") as handle:
        report = MetricReport.from_json(handle.read())
    rendered = report.render(args.format)
    if args.out:
        atomic_write_text(args.out, rendered)
    else:
        sys.stdout.write(rendered)
    return 0


def cmd_embed(args: argparse.Namespace) -> int:
    taxonomy = load_taxonomy(args.taxonomy)
    cache = EmbeddingCache(args.embed_cache)
    provider = create_provider(args.provider, cache)
    for manifest in args.manifest:
        corpus = load_corpus(manifest, taxonomy)
        if not len(corpus):
            continue
        for k in list(LAYER_INDICES) + [None]:
            embed_corpus(provider, corpus.scenarios, k, cache=cache)
        if corpus.mode is StructureMode.HARD:
            for k, group, field_name in CHARACTERISTICS_COLUMNS:
                texts = [text for _, text in collect_field_texts(corpus.scenarios, k, group, field_name)]
                if texts:
                    embed_texts(provider, texts, cache)
    cache.save()
    print(f"cache entries: {len(cache)}  hits: {cache.hits}  misses: {cache.misses}")
    return 0


COMMANDS = {
    "ingest": cmd_ingest,
    "generate": cmd_generate,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
    "embed": cmd_embed,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging({0: None, 1: "INFO"}.get(args.verbose, "DEBUG"))
    try:
        return COMMANDS[args.command](args)
    except ScenarioToolError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE_ERROR
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CODES["IoFailure"]


if __name__ == "__main__":
    sys.exit(main())
