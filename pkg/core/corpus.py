"""Reference and generated corpora on disk.

A corpus directory holds one JSON file per scenario and a manifest listing
id, file, role, sha256 checksum and structure mode of every scenario.
Layout under an output root:

    refs/manifest.json
    generated/<run-id>/manifest.json
    generated/<run-id>/rejects/manifest.json
"""
import json
import os
import re
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from config import ERROR_MESSAGES, MANIFEST_NAME
from core.errors import ChecksumMismatch, DuplicateScenarioId, IoFailure, MalformedDocument, SchemaViolation
from core.layers import convert_mode
from core.parser import parse_scenario, scenario_to_dict, serialize_scenario
from core.scenario import Scenario, StructureMode
from core.taxonomy import Taxonomy, load_taxonomy
from utils.fileio import atomic_write_text, sha256_bytes
from utils.logger import get_logger

logger = get_logger(__name__)

ROLES = ("reference", "generated", "rejected")

_UNSAFE_FILENAME = re.compile(r"[^A-Za-z0-9._-]+")


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    file: str
    role: str
    checksum: str
    mode: StructureMode

    def to_dict(self) -> Dict[str, str]:
        return {"id": self.id, "file": self.file, "role": self.role,
                "checksum": self.checksum, "mode": self.mode.value}

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "ManifestEntry":
        if raw["role"] not in ROLES:
            raise ValueError(f"unknown role {raw['role']!r}")
        return cls(
            id=raw["id"],
            file=raw["file"],
            role=raw["role"],
            checksum=raw["checksum"],
            mode=StructureMode(raw["mode"]),
        )


@dataclass(frozen=True)
class Manifest:
    entries: Tuple[ManifestEntry, ...] = ()

    @property
    def ids(self) -> List[str]:
        return [entry.id for entry in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    @classmethod
    def load(cls, path: str) -> "Manifest":
        try:
            with open(path, "r", encoding="utf-8") as handle:
                payload = json.load(handle)
        except FileNotFoundError as e:
            raise IoFailure(f"manifest not found: {path}") from e
        except json.JSONDecodeError as e:
            raise MalformedDocument(f"{path}: invalid manifest JSON: {e.msg}") from e
        except OSError as e:
            raise IoFailure(f"cannot read {path}: {e}") from e
        try:
            entries = tuple(ManifestEntry.from_dict(raw) for raw in payload["scenarios"])
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaViolation([("scenarios", f"malformed manifest entry: {e}")], source=path) from e
        return cls(entries)

    @classmethod
    def load_or_empty(cls, path: str) -> "Manifest":
        if not os.path.exists(path):
            return cls()
        return cls.load(path)

    def to_json(self) -> str:
        return json.dumps({"scenarios": [entry.to_dict() for entry in self.entries]}, indent=2) + "\n"

    def write(self, path: str) -> None:
        try:
            atomic_write_text(path, self.to_json())
        except OSError as e:
            raise IoFailure(f"cannot write {path}: {e}") from e


@dataclass(frozen=True)
class Corpus:
    """An ordered set of scenarios sharing one role and one structure mode."""
    role: str
    scenarios: Tuple[Scenario, ...]
    manifest_path: Optional[str] = None

    def __len__(self) -> int:
        return len(self.scenarios)

    @property
    def mode(self) -> Optional[StructureMode]:
        return self.scenarios[0].mode if self.scenarios else None

    def by_id(self) -> Dict[str, Scenario]:
        return {s.id: s for s in self.scenarios}


@dataclass(frozen=True)
class Rejection:
    """A generated scenario that edited layers other than the target."""
    scenario: Scenario
    violations: Tuple[int, ...]
    reason: str = field(default="edited layers outside the target")


def scenario_filename(scenario_id: str) -> str:
    return f"{_UNSAFE_FILENAME.sub('_', scenario_id)}.json"


def load_corpus(manifest_path: str, taxonomy: Optional[Taxonomy] = None) -> Corpus:
    """
    Load every scenario listed in a manifest; nothing is returned unless all load.

    Raises:
        IoFailure: the manifest or a listed file cannot be read
        ChecksumMismatch: a file changed since the manifest was written
        SchemaViolation: a file, or the manifest itself, is invalid
    """
    taxonomy = taxonomy or load_taxonomy()
    manifest = Manifest.load(manifest_path)
    directory = os.path.dirname(os.path.abspath(manifest_path))

    roles = {entry.role for entry in manifest.entries}
    if len(roles) > 1:
        raise SchemaViolation([("scenarios", f"mixed roles {sorted(roles)}")], source=manifest_path)
    modes = {entry.mode for entry in manifest.entries}
    if len(modes) > 1:
        raise SchemaViolation([("scenarios", f"mixed structure modes {sorted(m.value for m in modes)}")],
                              source=manifest_path)

    seen = set()
    scenarios = []
    for entry in manifest.entries:
        if entry.id in seen:
            raise DuplicateScenarioId(ERROR_MESSAGES["duplicate_id"].format(id=entry.id))
        seen.add(entry.id)
        path = os.path.join(directory, entry.file)
        try:
            with open(path, "rb") as handle:
                data = handle.read()
        except OSError as e:
            raise IoFailure(f"cannot read {path}: {e}") from e
        if sha256_bytes(data) != entry.checksum:
            raise ChecksumMismatch(ERROR_MESSAGES["checksum_mismatch"].format(file=path))
        scenario = parse_scenario(data.decode("utf-8"), mode=entry.mode, taxonomy=taxonomy, source=path)
        if scenario.id != entry.id:
            raise SchemaViolation([("id", f"file holds {scenario.id!r}, manifest lists {entry.id!r}")], source=path)
        scenarios.append(scenario)

    role = roles.pop() if roles else "reference"
    logger.info("loaded %d %s scenarios from %s", len(scenarios), role, manifest_path)
    return Corpus(role, tuple(scenarios), manifest_path)


def _write_scenarios(documents: Sequence[Tuple[str, StructureMode, str]], directory: str,
                     role: str) -> Manifest:
    manifest_path = os.path.join(directory, MANIFEST_NAME)
    existing = Manifest.load_or_empty(manifest_path)
    if not documents:
        return existing

    taken = set(existing.ids)
    for scenario_id, _, _ in documents:
        if scenario_id in taken:
            raise DuplicateScenarioId(ERROR_MESSAGES["duplicate_id"].format(id=scenario_id))
        taken.add(scenario_id)

    entries = list(existing.entries)
    try:
        os.makedirs(directory, exist_ok=True)
        for scenario_id, mode, text in documents:
            filename = scenario_filename(scenario_id)
            atomic_write_text(os.path.join(directory, filename), text)
            entries.append(ManifestEntry(scenario_id, filename, role, sha256_bytes(text.encode("utf-8")), mode))
    except OSError as e:
        raise IoFailure(f"cannot write scenarios to {directory}: {e}") from e

    manifest = Manifest(tuple(entries))
    manifest.write(manifest_path)
    logger.info("wrote %d %s scenarios to %s", len(documents), role, directory)
    return manifest


def save_generated(batch: Iterable[Scenario], directory: str) -> Manifest:
    """
    Append a batch of generated scenarios to the corpus in `directory`.

    Ids are checked against the batch and the existing manifest before any
    file is written; an empty batch leaves the manifest untouched.
    """
    documents = [(s.id, s.mode, serialize_scenario(s)) for s in batch]
    return _write_scenarios(documents, directory, "generated")


def save_rejects(rejections: Iterable[Rejection], directory: str) -> Manifest:
    """Quarantine rejected scenarios, each annotated with the layers it wrongly edited."""
    documents = []
    for rejection in rejections:
        document = scenario_to_dict(rejection.scenario)
        document["quarantine"] = {"violations": list(rejection.violations), "reason": rejection.reason}
        text = json.dumps(document, indent=2, ensure_ascii=False) + "\n"
        documents.append((rejection.scenario.id, rejection.scenario.mode, text))
    return _write_scenarios(documents, directory, "rejected")


def read_scenario_file(path: str, mode: Optional[Union[StructureMode, str]] = None,
                       taxonomy: Optional[Taxonomy] = None) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            document = handle.read()
    except OSError as e:
        raise IoFailure(f"cannot read {path}: {e}") from e
    return parse_scenario(document, mode=mode, taxonomy=taxonomy, source=path)


def ingest_references(paths: Sequence[str], directory: str,
                      mode: Optional[Union[StructureMode, str]] = None,
                      taxonomy: Optional[Taxonomy] = None) -> Manifest:
    """
    Validate scenario files and store them as a reference corpus.

    Every file is parsed before anything is written. With `mode` given,
    hard documents are flattened to that text mode.
    """
    taxonomy = taxonomy or load_taxonomy()
    scenarios = []
    for path in paths:
        scenario = read_scenario_file(path, taxonomy=taxonomy)
        if mode is not None:
            scenario = convert_mode(scenario, mode)
        scenarios.append(scenario)

    modes = {s.mode for s in scenarios}
    if len(modes) > 1:
        raise SchemaViolation([("mode", f"references mix structure modes {sorted(m.value for m in modes)}")])
    documents = [(s.id, s.mode, serialize_scenario(s)) for s in scenarios]
    return _write_scenarios(documents, directory, "reference")

