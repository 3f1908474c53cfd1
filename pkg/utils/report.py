"""Metric reports: the JSON form written by evaluation and its markdown/CSV renderings."""
import io
import json
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import pandas as pd

from analyzers.semantic_analyzer import Score
from config import (
    CHARACTERISTICS_COLUMNS, CSV_COLUMNS, LAYER_GROUPS, LAYER_INDICES, NA_MARKER, REFERENCE_LABEL,
    SCORE_DECIMALS, TOTAL_MEAN, TOTAL_TEXT,
)

LAYER_COLUMNS: Tuple[str, ...] = tuple(f"L{k}" for k in LAYER_INDICES)
SEMANTIC_COLUMNS: Tuple[str, ...] = LAYER_COLUMNS + (TOTAL_TEXT, TOTAL_MEAN)

# Row order of the semantic table
SEMANTIC_ROWS: Tuple[Tuple[str, str], ...] = (("O", "max"), ("O", "min"), ("D", "min"), ("D", "max"), ("D", "mean"))
COMPONENT_ROWS: Tuple[Tuple[str, str], ...] = (("CO", "max"), ("CD", "mean"))


def format_score(value: Optional[float]) -> str:
    return NA_MARKER if value is None else f"{value:.{SCORE_DECIMALS}f}"


def markdown_table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    header_row = "| " + " | ".join(headers) + " |"
    separator = "|" + "|".join(["---"] + ["---:"] * (len(headers) - 1)) + "|"
    body = ["| " + " | ".join(row) + " |" for row in rows]
    return "\n".join([header_row, separator] + body) + "\n"


@dataclass(frozen=True)
class MetricEntry:
    """
    One score of the report.

    layer is "L1".."L5", "total-text" or "total-mean"; group narrows
    component-level rows ("objects", "objects.motion"). M and N count the
    generated and reference scenarios behind the score.
    """
    corpus: str
    layer: str
    metric: str
    mode: str
    score: Score
    M: Optional[int] = None
    N: Optional[int] = None
    group: str = ""

    @property
    def qualified_metric(self) -> str:
        name = f"{self.metric}.{self.group}" if self.group else self.metric
        return f"{name}@{self.corpus}"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "corpus": self.corpus,
            "layer": self.layer,
            "metric": self.metric,
            "mode": self.mode,
            "group": self.group,
            "score": self.score.value,
            "na_pairs": self.score.na_pairs,
            "M": self.M,
            "N": self.N,
        }

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "MetricEntry":
        return cls(
            corpus=raw["corpus"],
            layer=raw["layer"],
            metric=raw["metric"],
            mode=raw["mode"],
            score=Score(raw["score"], int(raw.get("na_pairs", 0))),
            M=raw.get("M"),
            N=raw.get("N"),
            group=raw.get("group", ""),
        )


@dataclass
class MetricReport:
    entries: List[MetricEntry] = field(default_factory=list)
    meta: Dict[str, Any] = field(default_factory=dict)

    def add(self, entry: MetricEntry) -> None:
        self.entries.append(entry)

    def lookup(self, corpus: str, layer: str, metric: str, mode: str, group: str = "") -> Optional[MetricEntry]:
        for entry in self.entries:
            if (entry.corpus, entry.layer, entry.metric, entry.mode, entry.group) == \
                    (corpus, layer, metric, mode, group):
                return entry
        return None

    def value(self, corpus: str, layer: str, metric: str, mode: str, group: str = "") -> Optional[float]:
        entry = self.lookup(corpus, layer, metric, mode, group)
        return None if entry is None else entry.score.value

    @property
    def corpora(self) -> List[str]:
        """Corpus labels in order of appearance, the reference last."""
        labels = list(dict.fromkeys(entry.corpus for entry in self.entries))
        if REFERENCE_LABEL in labels:
            labels.remove(REFERENCE_LABEL)
            labels.append(REFERENCE_LABEL)
        return labels

    # ================================
    # JSON
    # ================================

    def to_json(self) -> str:
        payload = {"meta": self.meta, "entries": [entry.to_dict() for entry in self.entries]}
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "MetricReport":
        payload = json.loads(text)
        return cls([MetricEntry.from_dict(raw) for raw in payload.get("entries", [])], dict(payload.get("meta", {})))

    # ================================
    # CSV
    # ================================

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {
                "layer": entry.layer,
                "metric": entry.qualified_metric,
                "mode": entry.mode,
                "score": format_score(entry.score.value),
                "M": "" if entry.M is None else str(entry.M),
                "N": "" if entry.N is None else str(entry.N),
                "na_pairs": str(entry.score.na_pairs),
            }
            for entry in self.entries
        ]
        return pd.DataFrame(rows, columns=CSV_COLUMNS, dtype=str)

    def to_csv(self) -> str:
        """One row per (layer, metric, mode); NA scores are written as "NA"."""
        buffer = io.StringIO()
        self.to_frame().to_csv(buffer, index=False, lineterminator="\n")
        return buffer.getvalue()

    def to_series_csv(self) -> str:
        """Plot-ready series: one row per corpus/metric/mode, one column per layer."""
        series: Dict[str, Dict[str, str]] = {}
        for entry in self.entries:
            if entry.layer not in LAYER_COLUMNS or entry.metric not in ("O", "D", "CO", "CD"):
                continue
            name = f"{entry.qualified_metric}({entry.mode})"
            series.setdefault(name, {column: NA_MARKER for column in LAYER_COLUMNS})[entry.layer] = \
                format_score(entry.score.value)
        rows = [{"series": name, **values} for name, values in series.items()]
        buffer = io.StringIO()
        pd.DataFrame(rows, columns=["series", *LAYER_COLUMNS], dtype=str).to_csv(
            buffer, index=False, lineterminator="\n")
        return buffer.getvalue()

    # ================================
    # MARKDOWN
    # ================================

    def _cell(self, corpus: str, layer: str, metric: str, mode: str, group: str = "") -> str:
        entry = self.lookup(corpus, layer, metric, mode, group)
        return "" if entry is None else format_score(entry.score.value)

    def _metric_rows(self, kinds: Iterable[Tuple[str, str]], columns: Sequence[str]) -> List[List[str]]:
        rows = []
        for corpus in self.corpora:
            for metric, mode in kinds:
                cells = [self._cell(corpus, column, metric, mode) for column in columns]
                if any(cells):
                    rows.append([corpus, f"{metric}({mode})", *cells])
        return rows

    def _grouped_rows(self, metric: str, mode: str, columns: Sequence[Tuple[str, str]]) -> List[List[str]]:
        rows = []
        for corpus in self.corpora:
            cells = [self._cell(corpus, layer, metric, mode, group) for layer, group in columns]
            if any(cells):
                rows.append([corpus, *cells])
        return rows

    def to_markdown(self) -> str:
        """Tables with layers as columns; an empty report renders only the title."""
        sections = ["# Scenario metric report\n"]
        if self.meta.get("provider"):
            sections.append(f"Embedding provider: `{self.meta['provider']}`\n")

        semantic = self._metric_rows(SEMANTIC_ROWS, SEMANTIC_COLUMNS)
        if semantic:
            headers = ["Corpus", "Metric", *LAYER_COLUMNS, "Total (text)", "Total (mean)"]
            sections.append("## Originality and diversity\n\n" + markdown_table(headers, semantic))

        component = self._metric_rows(COMPONENT_ROWS, LAYER_COLUMNS)
        if component:
            table = markdown_table(["Corpus", "Metric", *LAYER_COLUMNS], component)
            sections.append("## Component metrics\n\n" + table)

        characteristics_columns = [
            (f"L{k}", group if field_name == "characteristics" else f"{group}.motion")
            for k, group, field_name in CHARACTERISTICS_COLUMNS
        ]
        characteristics = self._grouped_rows("char_D", "min", characteristics_columns)
        if characteristics:
            headers = ["Corpus", *(f"{layer} {group}" for layer, group in characteristics_columns)]
            sections.append("## Characteristics diversity\n\n" + markdown_table(headers, characteristics))

        count_columns = [(f"L{k}", group) for k in LAYER_INDICES for group in LAYER_GROUPS[k]]
        counts = self._grouped_rows("count", "mean", count_columns)
        if counts:
            headers = ["Corpus", *(f"{layer} {group}" for layer, group in count_columns)]
            sections.append("## Mean component count\n\n" + markdown_table(headers, counts))
        return "\n".join(sections)

    def render(self, fmt: str) -> str:
        if fmt == "markdown":
            return self.to_markdown()
        if fmt == "csv":
            return self.to_csv()
        if fmt == "series":
            return self.to_series_csv()
        if fmt == "json":
            return self.to_json()
        raise ValueError(f"unknown report format {fmt!r}")
