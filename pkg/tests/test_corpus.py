import json
import os

import pytest

from core.corpus import (
    Manifest, Rejection, ingest_references, load_corpus, save_generated, save_rejects, scenario_filename,
)
from core.errors import ChecksumMismatch, DuplicateScenarioId, IoFailure, MalformedDocument, SchemaViolation
from core.scenario import StructureMode
from tests.conftest import text_scenario, write_json


def test_shipped_references_load(refs_manifest, taxonomy):
    corpus = load_corpus(refs_manifest, taxonomy)
    assert len(corpus) == 10
    assert corpus.role == "reference"
    assert corpus.mode is StructureMode.HARD
    assert [s.id for s in corpus.scenarios][:2] == ["ref-001", "ref-002"]


def test_reference_with_paper_layer_four(refs_manifest, taxonomy):
    scene = load_corpus(refs_manifest, taxonomy).by_id()["ref-001"]
    categories = [c.category for c in scene.layer(4).body.group("objects")]
    assert categories == ["vehicle", "inanimate object", "vehicle", "pedestrian"]


def test_checksum_mismatch(refs_manifest, taxonomy):
    path = os.path.join(os.path.dirname(refs_manifest), "ref-003.json")
    with open(path, "a", encoding="utf-8") as handle:
        handle.write("\n")
    with pytest.raises(ChecksumMismatch):
        load_corpus(refs_manifest, taxonomy)


def test_missing_and_broken_manifests(tmp_path, taxonomy):
    with pytest.raises(IoFailure):
        load_corpus(str(tmp_path / "nope.json"), taxonomy)
    broken = tmp_path / "manifest.json"
    broken.write_text("{not json", encoding="utf-8")
    with pytest.raises(MalformedDocument):
        load_corpus(str(broken), taxonomy)
    write_json(broken, {"scenarios": [{"id": "a", "file": "a.json", "role": "judge", "checksum": "", "mode": "hard"}]})
    with pytest.raises(SchemaViolation):
        load_corpus(str(broken), taxonomy)


def test_save_generated_appends(tmp_path, taxonomy):
    directory = str(tmp_path / "run")
    save_generated([text_scenario("g-1")], directory)
    manifest = save_generated([text_scenario("g-2"), text_scenario("g-3")], directory)
    assert manifest.ids == ["g-1", "g-2", "g-3"]
    corpus = load_corpus(os.path.join(directory, "manifest.json"), taxonomy)
    assert corpus.role == "generated"
    assert corpus.by_id()["g-2"] == text_scenario("g-2")


def test_duplicate_ids_are_refused_before_writing(tmp_path):
    directory = tmp_path / "run"
    save_generated([text_scenario("g-1")], str(directory))
    before = (directory / "manifest.json").read_text(encoding="utf-8")
    with pytest.raises(DuplicateScenarioId):
        save_generated([text_scenario("g-2"), text_scenario("g-1")], str(directory))
    with pytest.raises(DuplicateScenarioId):
        save_generated([text_scenario("g-3"), text_scenario("g-3")], str(directory))
    assert (directory / "manifest.json").read_text(encoding="utf-8") == before
    assert sorted(os.listdir(directory)) == ["g-1.json", "manifest.json"]


def test_empty_batch_leaves_manifest_unchanged(tmp_path):
    directory = tmp_path / "run"
    assert len(save_generated([], str(directory))) == 0
    assert not directory.exists()
    save_generated([text_scenario("g-1")], str(directory))
    before = (directory / "manifest.json").read_text(encoding="utf-8")
    assert save_generated([], str(directory)).ids == ["g-1"]
    assert (directory / "manifest.json").read_text(encoding="utf-8") == before


def test_rejects_carry_their_violations(tmp_path, taxonomy):
    directory = tmp_path / "rejects"
    save_rejects([Rejection(text_scenario("bad-1"), (2, 5))], str(directory))
    document = json.loads((directory / "bad-1.json").read_text(encoding="utf-8"))
    assert document["quarantine"]["violations"] == [2, 5]
    corpus = load_corpus(str(directory / "manifest.json"), taxonomy)
    assert corpus.role == "rejected"


def test_ingest_references(tmp_path, shipped_refs_dir, taxonomy):
    files = [os.path.join(shipped_refs_dir, f"ref-00{i}.json") for i in (1, 2)]
    manifest = ingest_references(files, str(tmp_path / "refs"), taxonomy=taxonomy)
    assert manifest.ids == ["ref-001", "ref-002"]
    assert {entry.role for entry in manifest.entries} == {"reference"}


def test_ingest_can_flatten_to_text(tmp_path, shipped_refs_dir, taxonomy):
    files = [os.path.join(shipped_refs_dir, "ref-001.json")]
    ingest_references(files, str(tmp_path / "refs"), mode="soft", taxonomy=taxonomy)
    corpus = load_corpus(str(tmp_path / "refs" / "manifest.json"), taxonomy)
    assert corpus.mode is StructureMode.SOFT
    assert "vehicle" in corpus.scenarios[0].layer(4).body


def test_ingest_rejects_invalid_files_before_writing(tmp_path, taxonomy):
    bad = write_json(tmp_path / "bad.json", {"id": "x", "L1": "road"})
    with pytest.raises(SchemaViolation):
        ingest_references([bad], str(tmp_path / "refs"), taxonomy=taxonomy)
    assert not (tmp_path / "refs").exists()


def test_manifest_json_shape(tmp_path):
    manifest = save_generated([text_scenario("g-1")], str(tmp_path))
    assert json.loads(manifest.to_json())["scenarios"][0]["file"] == "g-1.json"
    assert Manifest.load(str(tmp_path / "manifest.json")) == manifest


def test_scenario_filename_is_safe():
    assert scenario_filename("ref/../x y") == "ref_.._x_y.json"
