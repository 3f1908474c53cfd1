"""Generation sweeps and corpus evaluation."""
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Sequence, Tuple

from analyzers.characteristics_analyzer import characteristics_diversity
from analyzers.component_analyzer import component_metrics, mean_component_count
from analyzers.semantic_analyzer import (
    NA, Aggregation, Score, diversity_from_matrix, originality_from_matrix, similarity_matrix,
)
from augmentation.clients import ChatClient
from augmentation.editor import Clock, generate_edits, utc_now
from augmentation.prompts import EditRequest, PromptLibrary
from config import (
    CHARACTERISTICS_COLUMNS, DEFAULT_GENERATED_LABEL, DEFAULT_TEMPERATURE, ERROR_MESSAGES,
    GENERATED_DIRNAME, LAYER_GROUPS, LAYER_INDICES, MANIFEST_NAME, MAX_IN_FLIGHT,
    MAX_REPAIR_RETRIES, REFERENCE_LABEL, REJECTS_DIRNAME, TOTAL_MEAN, TOTAL_TEXT,
)
from core.corpus import Corpus, load_corpus, save_generated, save_rejects
from core.errors import ModeMismatch, TooFewSamples
from core.layers import convert_mode, diff_layers
from core.scenario import ContextMode, Scenario, StructureMode
from core.taxonomy import Taxonomy, load_taxonomy
from utils.embedder import EmbeddingCache, EmbeddingProvider, EmbeddingSet, embed_corpus
from utils.logger import get_logger
from utils.report import MetricEntry, MetricReport

logger = get_logger(__name__)


def frozen_clock() -> Clock:
    """Clock pinned to SOURCE_DATE_EPOCH (or the epoch) for reproducible provenance."""
    instant = datetime.fromtimestamp(int(os.getenv("SOURCE_DATE_EPOCH", "0")), tz=timezone.utc)
    return lambda: instant


@dataclass
class RunConfig:
    """Settings of one generation sweep."""
    refs: str
    out: str
    layers: Tuple[int, ...] = LAYER_INDICES
    variants: int = 10
    structure: StructureMode = StructureMode.UNSTRUCTURED
    context: ContextMode = ContextMode.INDEPENDENT
    seed: int = 0
    temperature: float = DEFAULT_TEMPERATURE
    strict: bool = False
    max_retries: int = MAX_REPAIR_RETRIES
    max_in_flight: int = MAX_IN_FLIGHT
    run_id: Optional[str] = None

    def __post_init__(self):
        self.structure = StructureMode(self.structure)
        self.context = ContextMode(self.context)
        self.layers = tuple(sorted(set(self.layers)))
        if not self.layers or any(k not in LAYER_INDICES for k in self.layers):
            raise ValueError(f"layers must be a non-empty subset of 1..5, got {self.layers}")
        if self.variants < 1:
            raise ValueError("variants must be at least 1")

    @property
    def resolved_run_id(self) -> str:
        return self.run_id or f"{self.structure.value}-{self.context.value}-seed{self.seed}"

    @property
    def run_dir(self) -> str:
        return os.path.join(self.out, GENERATED_DIRNAME, self.resolved_run_id)


@dataclass
class EvaluationOptions:
    diversity_mean: bool = False
    exclude_noops: bool = False
    max_in_flight: int = MAX_IN_FLIGHT


@dataclass
class _Embeddings:
    """Per-layer embedding sets of one corpus; key None is the full-scenario text."""
    sets: Dict[Optional[int], EmbeddingSet] = field(default_factory=dict)


def drop_noops(generated: Sequence[Scenario], references: Sequence[Scenario]) -> List[Scenario]:
    """Generated scenarios whose edited layer actually differs from their source.

    Hard sources are flattened to the generated scenario's text mode before
    comparing; a text source cannot be compared against a hard edit and is kept.
    """
    sources = {s.id: s for s in references}
    kept = []
    for s in generated:
        source = sources.get(s.provenance.source_id) if s.provenance else None
        if source is None:
            kept.append(s)
            continue
        try:
            changed = diff_layers(convert_mode(source, s.mode), s)
        except ModeMismatch:
            kept.append(s)
            continue
        if s.provenance.edited_layer in changed:
            kept.append(s)
    return kept


class ScenarioPipeline:
    """Coordinates generation sweeps and metric evaluation over corpora."""

    def __init__(self, taxonomy: Optional[Taxonomy] = None, library: Optional[PromptLibrary] = None):
        self.taxonomy = taxonomy or load_taxonomy()
        self.library = library

    # ================================
    # GENERATION
    # ================================

    def run_generation(self, config: RunConfig, client: ChatClient, clock: Clock = utc_now) -> Dict[str, Any]:
        """
        Edit every reference scenario on every requested layer.

        Accepted scenarios are persisted after each (source, layer) cell so an
        interrupted sweep leaves a consistent corpus behind.

        Returns:
            Summary dict with success flag, counts and output paths
        """
        library = self.library or PromptLibrary.load(taxonomy=self.taxonomy)
        refs = load_corpus(config.refs, self.taxonomy)
        run_dir = config.run_dir
        rejects_dir = os.path.join(run_dir, REJECTS_DIRNAME)
        summary: Dict[str, Any] = {
            "success": True,
            "error": None,
            "run_id": config.resolved_run_id,
            "run_dir": run_dir,
            "manifest": os.path.join(run_dir, MANIFEST_NAME),
            "generated": 0,
            "quarantined": 0,
            "retried": 0,
            "noops": 0,
        }

        for source in refs.scenarios:
            for k in config.layers:
                req = EditRequest(
                    source=source,
                    target_layer=k,
                    structure_mode=config.structure,
                    context_mode=config.context,
                    n_variants=config.variants,
                    temperature=config.temperature,
                )
                batch = generate_edits(client, req, library, seed=config.seed, clock=clock,
                                       max_retries=config.max_retries, max_in_flight=config.max_in_flight)
                save_generated(batch.accepted, run_dir)
                save_rejects(batch.rejected, rejects_dir)
                summary["generated"] += len(batch.accepted)
                summary["quarantined"] += len(batch.rejected)
                summary["retried"] += batch.retries
                summary["noops"] += len(batch.noops)
            logger.info("edited %s: %d generated so far", source.id, summary["generated"])

        if config.strict and summary["quarantined"]:
            summary["success"] = False
            summary["error"] = ERROR_MESSAGES["strict_quarantine"].format(count=summary["quarantined"])
        return summary

    # ================================
    # EVALUATION
    # ================================

    def _embed(self, cache_sets: _Embeddings, provider: EmbeddingProvider, scenes: Sequence[Scenario],
               k: Optional[int], cache: Optional[EmbeddingCache], max_in_flight: int) -> EmbeddingSet:
        if k not in cache_sets.sets:
            cache_sets.sets[k] = embed_corpus(provider, scenes, k, cache=cache, max_in_flight=max_in_flight)
        return cache_sets.sets[k]

    @staticmethod
    def _diversity(matrix, mode: Aggregation) -> Score:
        try:
            return diversity_from_matrix(matrix, mode)
        except TooFewSamples:
            return NA

    def _semantic_entries(self, label: str, gen: Sequence[Scenario], refs: Sequence[Scenario],
                          gen_sets: _Embeddings, ref_sets: _Embeddings, provider: EmbeddingProvider,
                          cache: Optional[EmbeddingCache], options: EvaluationOptions,
                          include_reference: bool) -> List[MetricEntry]:
        m, n = len(gen), len(refs)
        diversity_modes = [Aggregation.MIN, Aggregation.MAX] + ([Aggregation.MEAN] if options.diversity_mean else [])
        entries: List[MetricEntry] = []
        layer_scores: Dict[Tuple[str, str, str], List[Optional[float]]] = {}

        for k in list(LAYER_INDICES) + [None]:
            layer = f"L{k}" if k is not None else TOTAL_TEXT
            gen_rows = self._embed(gen_sets, provider, gen, k, cache, options.max_in_flight) if gen else None
            ref_rows = self._embed(ref_sets, provider, refs, k, cache, options.max_in_flight) if refs else None

            scores: List[Tuple[str, str, str, Score]] = []
            if gen_rows is not None and ref_rows is not None:
                cross = similarity_matrix(gen_rows, ref_rows)
                for mode in (Aggregation.MAX, Aggregation.MIN):
                    scores.append((label, "O", mode.value, originality_from_matrix(cross, mode)))
            else:
                scores += [(label, "O", "max", NA), (label, "O", "min", NA)]

            gen_self = similarity_matrix(gen_rows, gen_rows) if gen_rows is not None else None
            for mode in diversity_modes:
                scores.append((label, "D", mode.value, self._diversity(gen_self, mode) if gen_self is not None else NA))
            if include_reference:
                ref_self = similarity_matrix(ref_rows, ref_rows) if ref_rows is not None else None
                for mode in diversity_modes:
                    score = self._diversity(ref_self, mode) if ref_self is not None else NA
                    scores.append((REFERENCE_LABEL, "D", mode.value, score))

            for corpus, metric, mode, score in scores:
                is_reference = corpus == REFERENCE_LABEL
                entries.append(MetricEntry(corpus, layer, metric, mode, score,
                                           M=None if is_reference else m, N=n))
                if k is not None:
                    layer_scores.setdefault((corpus, metric, mode), []).append(score.value)

        for (corpus, metric, mode), values in layer_scores.items():
            present = [v for v in values if v is not None]
            mean = sum(present) / len(present) if present else None
            entries.append(MetricEntry(corpus, TOTAL_MEAN, metric, mode, Score(mean),
                                       M=None if corpus == REFERENCE_LABEL else m, N=n))
        return entries

    def _component_entries(self, label: str, gen: Sequence[Scenario], refs: Sequence[Scenario],
                           include_reference: bool) -> List[MetricEntry]:
        m, n = len(gen), len(refs)
        entries = []
        for k in LAYER_INDICES:
            layer = f"L{k}"
            scores = component_metrics(gen, refs, k, None, self.taxonomy)
            entries.append(MetricEntry(label, layer, "CO", "max", scores["CO"], M=m, N=n))
            entries.append(MetricEntry(label, layer, "CD", "mean", scores["CD_gen"], M=m, N=n))
            if include_reference:
                entries.append(MetricEntry(REFERENCE_LABEL, layer, "CD", "mean", scores["CD_ref"], N=n))
        return entries

    def _structure_entries(self, corpus: str, scenes: Sequence[Scenario], provider: EmbeddingProvider,
                           cache: Optional[EmbeddingCache], m: Optional[int], n: int) -> List[MetricEntry]:
        entries = []
        for k, group, field_name in CHARACTERISTICS_COLUMNS:
            score = characteristics_diversity(scenes, k, group, provider, cache, field=field_name)
            column_group = group if field_name == "characteristics" else f"{group}.motion"
            entries.append(MetricEntry(corpus, f"L{k}", "char_D", "min", score, M=m, N=n, group=column_group))
        if scenes:
            for k in LAYER_INDICES:
                for group in LAYER_GROUPS[k]:
                    count = mean_component_count(scenes, k, group)
                    entries.append(MetricEntry(corpus, f"L{k}", "count", "mean", Score(count), M=m, N=n, group=group))
        return entries

    def run_evaluation(self, generated: Dict[str, str], reference: str, provider: EmbeddingProvider,
                       cache: Optional[EmbeddingCache] = None,
                       options: Optional[EvaluationOptions] = None) -> MetricReport:
        """
        Score one or more generated corpora against a reference corpus.

        Args:
            generated: Corpus label -> manifest path
            reference: Reference manifest path
            provider: Embedding provider used for every semantic metric
            cache: Optional embedding cache shared by all corpora
            options: Diversity-mean and no-op filtering switches

        Returns:
            MetricReport with semantic metrics for every corpus and, when all
            corpora are hard mode, component and characteristics metrics
        """
        options = options or EvaluationOptions()
        refs = load_corpus(reference, self.taxonomy)
        corpora: Dict[str, Corpus] = {label: load_corpus(path, self.taxonomy) for label, path in generated.items()}
        report = MetricReport(meta={
            "provider": provider.id,
            "reference_count": len(refs),
            "corpora": {label: len(corpus) for label, corpus in corpora.items()},
            "exclude_noops": options.exclude_noops,
        })

        ref_sets = _Embeddings()
        all_hard = refs.mode in (None, StructureMode.HARD) and all(
            c.mode in (None, StructureMode.HARD) for c in corpora.values())
        all_hard = all_hard and bool(len(refs))
        for position, (label, corpus) in enumerate(corpora.items()):
            gen = list(corpus.scenarios)
            if options.exclude_noops:
                kept = drop_noops(gen, refs.scenarios)
                logger.info("%s: excluded %d no-op scenarios", label, len(gen) - len(kept))
                gen = kept
            first = position == 0
            for entry in self._semantic_entries(label, gen, refs.scenarios, _Embeddings(), ref_sets,
                                                provider, cache, options, include_reference=first):
                report.add(entry)
            if all_hard:
                for entry in self._component_entries(label, gen, refs.scenarios, include_reference=first):
                    report.add(entry)
                for entry in self._structure_entries(label, gen, provider, cache, len(gen), len(refs)):
                    report.add(entry)

        if all_hard:
            for entry in self._structure_entries(REFERENCE_LABEL, refs.scenarios, provider, cache, None, len(refs)):
                report.add(entry)
        return report


def parse_generated_specs(specs: Sequence[str]) -> Dict[str, str]:
    """Turn --gen values ("LABEL=MANIFEST" or "MANIFEST") into label -> path."""
    out: Dict[str, str] = {}
    for spec in specs:
        label, sep, path = spec.partition("=")
        if not sep:
            label, path = (DEFAULT_GENERATED_LABEL if not out else f"{DEFAULT_GENERATED_LABEL}-{len(out) + 1}"), spec
        if label in out:
            raise ValueError(f"duplicate corpus label {label!r}")
        if label == REFERENCE_LABEL:
            raise ValueError(f"{REFERENCE_LABEL!r} is reserved for the reference corpus")
        out[label] = path
    return out
