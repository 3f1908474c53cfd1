import json
import os
import shutil
from datetime import datetime, timezone

import pytest
import requests

from augmentation.clients import ChatClient
from config import DEFAULT_REFS_MANIFEST, FIXTURES_DIR
from core.parser import scenario_from_dict
from core.scenario import StructureMode
from core.taxonomy import load_taxonomy

FROZEN = datetime(2024, 1, 1, tzinfo=timezone.utc)


def text_scenario(scenario_id="txt-001", mode=StructureMode.UNSTRUCTURED, **layers):
    """Text-mode scenario with default layer texts, overridable as L1="...", ..."""
    document = {
        "id": scenario_id,
        "L1": "A two-lane urban road with dashed white markings.",
        "L2": "Brick buildings line both sides of the street.",
        "L3": "No temporary changes.",
        "L4": "A white van is parked on the right and a pedestrian walks on the sidewalk.",
        "L5": "Clear weather in daylight.",
    }
    document.update(layers)
    return scenario_from_dict(document, mode=mode)


def hard_document(scenario_id="hard-001", objects=None):
    """Minimal valid hard-mode document; `objects` replaces the L4 object list."""
    if objects is None:
        objects = [
            {"type": "vehicle", "characteristics": "white delivery van", "position": "right", "motion": "stationary"},
            {"type": "pedestrian", "characteristics": "adult with a bag", "motion": "walking"},
        ]
    return {
        "id": scenario_id,
        "mode": "hard",
        "L1": {
            "roads": [{"type": "urban road", "characteristics": "two lanes, dry asphalt"}],
            "guidance": [{"type": "lane marking", "characteristics": "dashed center line"}],
        },
        "L2": {
            "environment": [{"type": "urban", "characteristics": "city center"}],
            "structures": [{"type": "building", "characteristics": "brick houses", "position": "both sides"}],
        },
        "L3": [],
        "L4": {"objects": objects},
        "L5": {
            "weather": [{"type": "clear", "characteristics": "dry"}],
            "illumination": [{"type": "daylight", "characteristics": "midday sun"}],
        },
    }


@pytest.fixture(scope="session")
def taxonomy():
    return load_taxonomy()


@pytest.fixture
def hard_scenario(taxonomy):
    return scenario_from_dict(hard_document(), taxonomy=taxonomy)


@pytest.fixture
def frozen_clock():
    return lambda: FROZEN


@pytest.fixture
def refs_manifest(tmp_path):
    """A private copy of the shipped reference corpus."""
    target = tmp_path / "refs"
    shutil.copytree(os.path.dirname(DEFAULT_REFS_MANIFEST), target)
    return str(target / "manifest.json")


@pytest.fixture(scope="session")
def shipped_refs_dir():
    return os.path.join(FIXTURES_DIR, "refs")


@pytest.fixture(scope="session")
def replay_dir():
    """Small text corpus with a recorded embedding cache and its expected report."""
    return os.path.join(FIXTURES_DIR, "replay")


def write_json(path, payload):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2)
    return str(path)


class FakeResponse:
    def __init__(self, payload, status=200):
        self.payload = payload
        self.status = status

    def raise_for_status(self):
        if self.status >= 400:
            raise requests.HTTPError(f"status {self.status}")

    def json(self):
        return self.payload


class FakeSession:
    """Stands in for requests.Session; replays queued responses and records posted bodies."""

    def __init__(self, responses):
        self.responses = list(responses)
        self.posts = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.posts.append(json)
        response = self.responses.pop(0)
        if isinstance(response, Exception):
            raise response
        return response


class EchoClient(ChatClient):
    """Replies with the input scenario unchanged."""

    model_id = "echo"

    def _complete(self, bundle, seed):
        return bundle.scenario_payload
