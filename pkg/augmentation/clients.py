"""Chat clients that turn a PromptBundle into raw scenario text."""
import copy
import json
import random
import threading
from abc import ABC, abstractmethod
from typing import Any, Dict, List, Optional, Sequence

import requests

from config import (
    BACKOFF_BASE_SECONDS, ERROR_MESSAGES, LAYER_GROUPS, LAYER_INDICES, LLM_API_KEY, LLM_ENDPOINT,
    LLM_MODEL, LLM_TIMEOUT, MOTION_LAYERS, NETWORK_RETRIES, OPENAI_API_KEY, OPENAI_MAX_TOKENS,
    OPENAI_MODEL, OPENAI_TIMEOUT, SHARED_CONTEXT_SENTINEL,
)
from augmentation.prompts import PromptBundle
from core.errors import ClientUnavailable
from core.scenario import StructureMode
from core.taxonomy import Taxonomy, load_taxonomy
from utils.logger import get_logger
from utils.retry import call_with_retries

logger = get_logger(__name__)

FAULTS = ("malformed", "bad-category", "leak")


def strip_code_fences(content: str) -> str:
    """Remove a surrounding ```json ... ``` block from a model reply."""
    content = content.strip()
    if content.startswith("```json"):
        content = content[7:]
    if content.startswith("```"):
        content = content[3:]
    if content.endswith("```"):
        content = content[:-3]
    return content.strip()


class ChatClient(ABC):
    """A chat model behind one `complete` call."""

    model_id: str = "unknown"
    supports_schema_enforcement: bool = False

    def __init__(self):
        self.call_count = 0
        self._count_lock = threading.Lock()

    def complete(self, bundle: PromptBundle, seed: int) -> str:
        with self._count_lock:
            self.call_count += 1
        return self._complete(bundle, seed)

    @abstractmethod
    def _complete(self, bundle: PromptBundle, seed: int) -> str:
        """One round trip; returns the reply text."""


# ================================
# MOCK CLIENT
# ================================

_TEXT_EDITS: Dict[int, Sequence[str]] = {
    1: (
        "The lane markings abruptly end and the road narrows to a single unmarked lane.",
        "A traffic light at the next intersection shows green and red at the same time.",
        "The asphalt gives way to a gravel section with deep potholes.",
        "A temporary stop sign is mounted upside down on the right side of the road.",
    ),
    2: (
        "A billboard next to the road shows a life-size photograph of a pedestrian.",
        "Tall hedges on both sides hide every side street.",
        "A mirrored glass facade reflects the oncoming traffic.",
        "An overturned fence lies along the sidewalk.",
    ),
    3: (
        "A fallen tree blocks half of the ego lane.",
        "Unmarked road works have opened a trench across the right lane.",
        "Traffic cones are scattered randomly after being hit by a truck.",
        "A large puddle of spilled paint covers the lane markings.",
    ),
    4: (
        "A horse-drawn carriage moves slowly in the ego lane.",
        "A child on roller skates crosses the road between parked cars.",
        "A mattress falls from the truck ahead and slides towards the ego vehicle.",
        "A wheelchair user travels against traffic in the bicycle lane.",
    ),
    5: (
        "A low sun directly ahead causes strong glare on the windshield.",
        "Dense fog suddenly reduces visibility to a few meters.",
        "Heavy hail starts falling and covers the road in white.",
        "Flashing lights from a nearby event illuminate the scene in changing colors.",
    ),
}

_CHARACTERISTICS: Sequence[str] = (
    "unusual shape, partially hidden",
    "bright reflective surface, oversized",
    "damaged and barely recognizable",
    "painted in colors that blend with the background",
    "moving erratically, poorly lit",
)

_POSITIONS: Sequence[str] = (
    "in the ego lane, 20 m ahead",
    "on the right shoulder, 35 m ahead",
    "crossing from the left, 15 m ahead",
    "oncoming lane, 50 m ahead",
)

_MOTIONS: Sequence[str] = (
    "stationary",
    "moving slowly against traffic",
    "suddenly changing direction",
    "accelerating towards the ego lane",
)

_TEMPORARY_CATEGORIES: Sequence[str] = ("debris", "construction zone", "road damage", "lane closure")


class MockChatClient(ChatClient):
    """
    Offline, seeded stand-in for a chat model.

    Replies copy the input scenario and edit only the target layer: text
    layers gain one sentence, structured layers gain one component. The same
    (seed, bundle) always gives the same reply. Queued faults are consumed
    one per call: "malformed" replies with invalid JSON, "bad-category" uses
    a category outside the taxonomy and "leak" also edits a second layer.
    """

    model_id = "mock-editor"

    def __init__(self, taxonomy: Optional[Taxonomy] = None, seed: int = 0, faults: Sequence[str] = ()):
        super().__init__()
        unknown = [f for f in faults if f is not None and f not in FAULTS]
        if unknown:
            raise ValueError(f"unknown faults {unknown}; expected {FAULTS}")
        self.taxonomy = taxonomy or load_taxonomy()
        self.seed = seed
        self.faults: List[Optional[str]] = list(faults)

    def _complete(self, bundle: PromptBundle, seed: int) -> str:
        with self._count_lock:
            fault = self.faults.pop(0) if self.faults else None
        if fault == "malformed":
            return '{"L1": "the reply stops here'
        rng = random.Random(
            f"{self.seed}:{seed}:{bundle.target_layer}:{len(bundle.repair_notes)}:{bundle.scenario_payload}")
        source = json.loads(bundle.scenario_payload)
        documents = [self._edit(source, bundle, rng, fault) for _ in range(bundle.n_variants)]
        separator = f"\n{SHARED_CONTEXT_SENTINEL}\n"
        return separator.join(json.dumps(d, indent=2, ensure_ascii=False) for d in documents)

    def _edit(self, source: Dict[str, Any], bundle: PromptBundle, rng: random.Random,
              fault: Optional[str]) -> Dict[str, Any]:
        document = copy.deepcopy(source)
        k = bundle.target_layer
        self._edit_layer(document, k, bundle.structure_mode, rng, fault)
        if fault == "leak":
            other = rng.choice([i for i in LAYER_INDICES if i != k])
            self._edit_layer(document, other, bundle.structure_mode, rng, None)
        return document

    def _edit_layer(self, document: Dict[str, Any], k: int, mode: StructureMode,
                    rng: random.Random, fault: Optional[str]) -> None:
        key = f"L{k}"
        if mode.is_text:
            sentence = rng.choice(_TEXT_EDITS[k])
            document[key] = f"{document.get(key, '').rstrip()} {sentence} ({rng.randrange(1000):03d})".strip()
            return

        layer = document.get(key)
        if not isinstance(layer, dict):
            layer = {LAYER_GROUPS[k][0]: list(layer)} if layer and len(LAYER_GROUPS[k]) == 1 else {}
        group = rng.choice(LAYER_GROUPS[k])
        if fault == "bad-category":
            category = "spaceship"
        elif self.taxonomy.lookup(k, group) is None:
            category = rng.choice(_TEMPORARY_CATEGORIES)
        else:
            category = rng.choice(self.taxonomy.categories(k, group))
        component = {
            "type": category,
            "characteristics": f"{rng.choice(_CHARACTERISTICS)} ({rng.randrange(1000):03d})",
            "position": rng.choice(_POSITIONS),
        }
        if k in MOTION_LAYERS:
            component["motion"] = rng.choice(_MOTIONS)
        layer.setdefault(group, []).append(component)
        document[key] = layer


# ================================
# REMOTE CLIENTS
# ================================

class HttpChatClient(ChatClient):
    """
    Generic endpoint speaking {"model", "system", "user", "temperature",
    "seed", "response_schema"?} -> {"text"}.
    """

    supports_schema_enforcement = True

    def __init__(self, endpoint: Optional[str] = None, model: Optional[str] = None,
                 api_key: Optional[str] = None, timeout: int = LLM_TIMEOUT,
                 retries: int = NETWORK_RETRIES, session: Optional[requests.Session] = None):
        super().__init__()
        self.endpoint = endpoint or LLM_ENDPOINT
        if not self.endpoint:
            raise ClientUnavailable("LLM_ENDPOINT is not set")
        self.model_id = model or LLM_MODEL
        self.api_key = api_key if api_key is not None else LLM_API_KEY
        self.timeout = timeout
        self.retries = retries
        self.session = session or requests.Session()

    def _post(self, bundle: PromptBundle, seed: int) -> str:
        payload: Dict[str, Any] = {
            "model": self.model_id,
            "system": bundle.system,
            "user": bundle.user_text,
            "temperature": bundle.temperature,
            "seed": seed,
        }
        if bundle.schema is not None:
            payload["response_schema"] = bundle.schema
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        response = self.session.post(self.endpoint, json=payload, headers=headers, timeout=self.timeout)
        response.raise_for_status()
        body = response.json()
        if not isinstance(body, dict) or not isinstance(body.get("text"), str):
            raise ValueError("response has no 'text' field")
        return body["text"]

    def _complete(self, bundle: PromptBundle, seed: int) -> str:
        try:
            return call_with_retries(
                lambda: self._post(bundle, seed), self.retries, BACKOFF_BASE_SECONDS,
                (requests.RequestException, ValueError), f"chat request to {self.endpoint}",
            )
        except (requests.RequestException, ValueError) as e:
            raise ClientUnavailable(
                ERROR_MESSAGES["client_unavailable"].format(attempts=self.retries + 1, reason=e)
            ) from e


class OpenAIChatClient(ChatClient):
    supports_schema_enforcement = True

    def __init__(self, model: Optional[str] = None, api_key: Optional[str] = None,
                 retries: int = NETWORK_RETRIES, client=None):
        super().__init__()
        self.model_id = model or OPENAI_MODEL
        self.retries = retries
        if client is None:
            key = api_key or OPENAI_API_KEY
            if not key:
                raise ClientUnavailable("OPENAI_API_KEY is not set")
            try:
                import openai
            except ImportError as e:
                raise ClientUnavailable("the openai package is not installed") from e
            client = openai.OpenAI(api_key=key, timeout=OPENAI_TIMEOUT)
        self.client = client

    def _create(self, bundle: PromptBundle, seed: int) -> str:
        kwargs: Dict[str, Any] = {}
        if bundle.schema is not None:
            kwargs["response_format"] = {
                "type": "json_schema",
                "json_schema": {"name": "scenario", "schema": bundle.schema},
            }
        response = self.client.chat.completions.create(
            model=self.model_id,
            messages=[
                {"role": "system", "content": bundle.system},
                {"role": "user", "content": bundle.user_text},
            ],
            temperature=bundle.temperature,
            max_tokens=OPENAI_MAX_TOKENS,
            seed=seed,
            **kwargs,
        )
        return strip_code_fences(response.choices[0].message.content or "")

    def _complete(self, bundle: PromptBundle, seed: int) -> str:
        import openai

        try:
            return call_with_retries(lambda: self._create(bundle, seed), self.retries, BACKOFF_BASE_SECONDS,
                                     (openai.APIError, openai.APITimeoutError), "openai chat completion")
        except (openai.APIError, openai.APITimeoutError) as e:
            raise ClientUnavailable(
                ERROR_MESSAGES["client_unavailable"].format(attempts=self.retries + 1, reason=e)
            ) from e


def create_client(name: str = "mock", taxonomy: Optional[Taxonomy] = None, seed: int = 0) -> ChatClient:
    """Client by --client name: mock, http or openai."""
    if name == "mock":
        return MockChatClient(taxonomy=taxonomy, seed=seed)
    if name == "http":
        return HttpChatClient()
    if name == "openai":
        return OpenAIChatClient()
    raise ValueError(f"unknown chat client {name!r}")


def default_client_name() -> str:
    return "http" if LLM_ENDPOINT else "mock"
