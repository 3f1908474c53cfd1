import json
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Tuple

from config import DEFAULT_TAXONOMY_PATH, FREE_TEXT_LAYERS, LAYER_GROUPS
from core.errors import MalformedDocument, NotApplicable, SchemaViolation

DEFAULT_L4_OBJECTS: Tuple[str, ...] = (
    "vehicle", "cyclist", "pedestrian", "animal", "inanimate object", "other",
)


def _template_position(k: int, group: str) -> Tuple[int, int]:
    groups = LAYER_GROUPS.get(k, ())
    return (k, groups.index(group) if group in groups else len(groups))


def normalize_category(category: str) -> str:
    """Case-insensitive, whitespace-trimmed form used for category matching."""
    return " ".join(category.split()).lower()


@dataclass(frozen=True)
class Taxonomy:
    """Closed category lists per (layer index, group name)."""
    entries: Tuple[Tuple[Tuple[int, str], Tuple[str, ...]], ...]

    def __post_init__(self):
        seen = set()
        for (k, group), categories in self.entries:
            if (k, group) in seen:
                raise ValueError(f"duplicate taxonomy entry for L{k}.{group}")
            seen.add((k, group))
            if group not in LAYER_GROUPS.get(k, ()):
                raise ValueError(f"L{k} has no template group {group!r}")
            if k in FREE_TEXT_LAYERS:
                raise ValueError(f"L{k} categories are free text and cannot be enumerated")
            if not categories:
                raise ValueError(f"L{k}.{group} category list is empty")
            normalized = [normalize_category(c) for c in categories]
            if len(set(normalized)) != len(normalized):
                raise ValueError(f"L{k}.{group} category list has duplicates")

    @classmethod
    def from_mapping(cls, mapping: Dict[str, Dict[str, Iterable[str]]]) -> "Taxonomy":
        """Build from the taxonomy file layout {"L4": {"objects": [...]}, ...}."""
        entries = []
        for layer_key, groups in mapping.items():
            if not layer_key.startswith("L") or not layer_key[1:].isdigit():
                raise ValueError(f"taxonomy key {layer_key!r} is not a layer key")
            k = int(layer_key[1:])
            for group, categories in groups.items():
                entries.append(((k, group), tuple(categories)))
        entries.sort(key=lambda entry: _template_position(*entry[0]))
        return cls(entries=tuple(entries))

    def to_mapping(self) -> Dict[str, Dict[str, List[str]]]:
        mapping: Dict[str, Dict[str, List[str]]] = {}
        for (k, group), categories in self.entries:
            mapping.setdefault(f"L{k}", {})[group] = list(categories)
        return mapping

    def lookup(self, k: int, group: str) -> Optional[Tuple[str, ...]]:
        """Category list of (layer, group), or None when the group is not enumerated."""
        for key, categories in self.entries:
            if key == (k, group):
                return categories
        return None

    def categories(self, k: int, group: str) -> Tuple[str, ...]:
        """Like lookup, but free-text and undeclared groups raise NotApplicable."""
        categories = self.lookup(k, group)
        if categories is None:
            raise NotApplicable(f"L{k}.{group} has no closed category list")
        return categories

    def groups(self, k: int) -> Tuple[str, ...]:
        """Enumerated groups of layer k, in template order."""
        return tuple(group for group in LAYER_GROUPS[k] if self.lookup(k, group) is not None)

    def match(self, k: int, group: str, category: str) -> Optional[str]:
        """Canonical taxonomy entry matching `category`, or None."""
        wanted = normalize_category(category)
        for entry in self.categories(k, group):
            if normalize_category(entry) == wanted:
                return entry
        return None


def load_taxonomy(path: Optional[str] = None) -> Taxonomy:
    """Load a taxonomy file; defaults to the shipped data/taxonomy.json."""
    path = path or DEFAULT_TAXONOMY_PATH
    try:
        with open(path, "r", encoding="utf-8") as handle:
            mapping = json.load(handle)
    except json.JSONDecodeError as e:
        raise MalformedDocument(f"{path}: {e}") from e
    if not isinstance(mapping, dict):
        raise MalformedDocument(f"{path}: taxonomy must be a JSON object")
    try:
        return Taxonomy.from_mapping(mapping)
    except (ValueError, AttributeError, TypeError) as e:
        raise SchemaViolation([("taxonomy", str(e))], source=path) from e
