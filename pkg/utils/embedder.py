"""Text embeddings: providers, the on-disk cache, cosine similarity and corpus embedding."""
import asyncio
import base64
import hashlib
import json
import math
import os
import re
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import requests

from config import (
    BACKOFF_BASE_SECONDS, EMBED_API_KEY, EMBED_BATCH_SIZE, EMBED_ENDPOINT, EMBED_MODEL,
    EMBED_TIMEOUT, LOCAL_EMBED_DIM, LOCAL_PROVIDER_ID, MAX_IN_FLIGHT, NETWORK_RETRIES,
    OPENAI_API_KEY, OPENAI_EMBED_MODEL, ERROR_MESSAGES,
)
from core.errors import DimensionMismatch, EmptyField, NotHardMode, ProviderUnavailable, ZeroNorm
from core.layers import concat_layers, layer_text
from core.scenario import Scenario
from utils.fileio import atomic_write_text
from utils.logger import get_logger
from utils.retry import call_with_retries

logger = get_logger(__name__)

_TOKEN = re.compile(r"[^\W_]+")


# ================================
# VALUE TYPES
# ================================

@dataclass(frozen=True, eq=False)
class Embedding:
    """Dense finite vector produced by one provider."""
    values: np.ndarray
    provider_id: str

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("an embedding is a non-empty 1-D vector")
        if not np.all(np.isfinite(values)):
            raise ValueError("embedding entries must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Embedding):
            return NotImplemented
        return self.provider_id == other.provider_id and np.array_equal(self.values, other.values)

    __hash__ = None


@dataclass(frozen=True)
class FieldSelector:
    """Which text of a layer gets embedded.

    kind "layer" embeds layer_text; "characteristics" and "motion" embed that
    field of the component at `position` within `group`.
    """
    kind: str = "layer"
    group: Optional[str] = None
    position: Optional[int] = None

    @property
    def label(self) -> str:
        if self.kind == "layer":
            return "layer"
        return f"{self.kind}({self.group},{self.position})"


WHOLE_LAYER = FieldSelector()


def characteristics_of(group: str, position: int) -> FieldSelector:
    return FieldSelector("characteristics", group, position)


def motion_of(group: str, position: int) -> FieldSelector:
    return FieldSelector("motion", group, position)


class SourceId(NamedTuple):
    scenario_id: str
    layer: Optional[int]
    field: str


@dataclass(frozen=True)
class EmbeddingSet:
    rows: Tuple[Embedding, ...]
    source_ids: Tuple[SourceId, ...]

    def __post_init__(self):
        if len(self.rows) != len(self.source_ids):
            raise ValueError("rows and source_ids must have equal length")
        if self.rows:
            first = self.rows[0]
            for row in self.rows[1:]:
                if row.dim != first.dim:
                    raise DimensionMismatch(f"embedding set mixes dims {first.dim} and {row.dim}")
                if row.provider_id != first.provider_id:
                    raise ValueError("embedding set mixes providers")

    @classmethod
    def from_vectors(cls, vectors: Iterable[Sequence[float]], provider_id: str = "array",
                     source_ids: Optional[Sequence[SourceId]] = None) -> "EmbeddingSet":
        rows = tuple(Embedding(np.asarray(v, dtype=np.float64), provider_id) for v in vectors)
        if source_ids is None:
            source_ids = tuple(SourceId(str(i), None, "vector") for i in range(len(rows)))
        return cls(rows, tuple(source_ids))

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def dim(self) -> Optional[int]:
        return self.rows[0].dim if self.rows else None

    @property
    def provider_id(self) -> Optional[str]:
        return self.rows[0].provider_id if self.rows else None

    def matrix(self) -> np.ndarray:
        if not self.rows:
            return np.zeros((0, 0), dtype=np.float64)
        return np.ascontiguousarray(np.stack([row.values for row in self.rows]))


# ================================
# SIMILARITY
# ================================

def _vector(value: Union[Embedding, Sequence[float], np.ndarray]) -> np.ndarray:
    if isinstance(value, Embedding):
        return value.values
    return np.asarray(value, dtype=np.float64)


def cosine(a: Union[Embedding, np.ndarray], b: Union[Embedding, np.ndarray]) -> float:
    """
    Cosine similarity aᵀb / (‖a‖‖b‖).

    Raises:
        DimensionMismatch: the vectors differ in length
        ZeroNorm: either vector is all zeros
    """
    va, vb = _vector(a), _vector(b)
    if va.shape != vb.shape:
        raise DimensionMismatch(f"cannot compare dims {va.shape[0]} and {vb.shape[0]}")
    squared = float(np.sum(va * va)) * float(np.sum(vb * vb))
    if squared == 0.0:
        raise ZeroNorm("cosine is undefined for a zero vector")
    return float(np.sum(va * vb)) / math.sqrt(squared)


# ================================
# LOCAL PROVIDER
# ================================

def tokenize(text: str) -> List[str]:
    """Lowercase alphanumeric tokens."""
    return _TOKEN.findall(text.lower())


def token_bucket(token: str, dim: int = LOCAL_EMBED_DIM) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % dim


def local_embed(text: str, dim: int = LOCAL_EMBED_DIM) -> Embedding:
    """Bag-of-tokens vector: hashed token counts over `dim` buckets."""
    counts = np.zeros(dim, dtype=np.float64)
    for token in tokenize(text):
        counts[token_bucket(token, dim)] += 1.0
    return Embedding(counts, LOCAL_PROVIDER_ID if dim == LOCAL_EMBED_DIM else f"local-bow-{dim}")


class EmbeddingProvider(ABC):
    """Turns batches of text into vectors; deterministic per (id, text)."""

    def __init__(self, provider_id: str, dim: Optional[int]):
        self.id = provider_id
        self.dim = dim
        self.request_count = 0
        self._count_lock = threading.Lock()

    @abstractmethod
    def _request(self, texts: List[str]) -> List[List[float]]:
        """One provider round trip."""

    def embed_batch(self, texts: Sequence[str]) -> List[np.ndarray]:
        with self._count_lock:
            self.request_count += 1
        vectors = [np.asarray(v, dtype=np.float64) for v in self._request(list(texts))]
        if len(vectors) != len(texts):
            raise ProviderUnavailable(f"{self.id} returned {len(vectors)} vectors for {len(texts)} inputs")
        for vector in vectors:
            if self.dim is None:
                self.dim = int(vector.shape[0])
            if vector.ndim != 1 or vector.shape[0] != self.dim:
                raise DimensionMismatch(f"{self.id} returned a vector of shape {vector.shape}, expected ({self.dim},)")
        return vectors


class LocalEmbeddingProvider(EmbeddingProvider):
    def __init__(self, dim: int = LOCAL_EMBED_DIM):
        super().__init__(LOCAL_PROVIDER_ID if dim == LOCAL_EMBED_DIM else f"local-bow-{dim}", dim)

    def _request(self, texts: List[str]) -> List[List[float]]:
        return [local_embed(text, self.dim).values for text in texts]


class HttpEmbeddingProvider(EmbeddingProvider):
    """Remote provider speaking {"model", "input"} -> {"vectors"}."""

    def __init__(self, endpoint: Optional[str] = None, model: Optional[str] = None,
                 api_key: Optional[str] = None, dim: Optional[int] = None,
                 timeout: int = EMBED_TIMEOUT, retries: int = NETWORK_RETRIES,
                 session: Optional[requests.Session] = None):
        self.endpoint = endpoint or EMBED_ENDPOINT
        if not self.endpoint:
            raise ProviderUnavailable("EMBED_ENDPOINT is not set")
        self.model = model or EMBED_MODEL
        self.api_key = api_key if api_key is not None else EMBED_API_KEY
        self.timeout = timeout
        self.retries = retries
        self.session = session or requests.Session()
        super().__init__(f"http:{self.model}", dim)

    def _post(self, texts: List[str]) -> List[List[float]]:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        response = self.session.post(
            self.endpoint,
            json={"model": self.model, "input": texts},
            headers=headers,
            timeout=self.timeout,
        )
        response.raise_for_status()
        payload = response.json()
        if not isinstance(payload, dict) or not isinstance(payload.get("vectors"), list):
            raise ValueError("response has no 'vectors' array")
        return payload["vectors"]

    def _request(self, texts: List[str]) -> List[List[float]]:
        try:
            return call_with_retries(
                lambda: self._post(texts), self.retries, BACKOFF_BASE_SECONDS,
                (requests.RequestException, ValueError), f"embedding request to {self.endpoint}",
            )
        except (requests.RequestException, ValueError) as e:
            raise ProviderUnavailable(
                ERROR_MESSAGES["provider_unavailable"].format(attempts=self.retries + 1, reason=e)
            ) from e


class OpenAIEmbeddingProvider(EmbeddingProvider):
    def __init__(self, model: Optional[str] = None, api_key: Optional[str] = None,
                 retries: int = NETWORK_RETRIES, client=None):
        self.model = model or OPENAI_EMBED_MODEL
        self.retries = retries
        if client is None:
            key = api_key or OPENAI_API_KEY
            if not key:
                raise ProviderUnavailable("OPENAI_API_KEY is not set")
            try:
                import openai
            except ImportError as e:
                raise ProviderUnavailable("the openai package is not installed") from e
            client = openai.OpenAI(api_key=key)
        self.client = client
        super().__init__(f"openai:{self.model}", None)

    def _request(self, texts: List[str]) -> List[List[float]]:
        import openai

        def create():
            response = self.client.embeddings.create(model=self.model, input=texts)
            return [item.embedding for item in response.data]

        try:
            return call_with_retries(create, self.retries, BACKOFF_BASE_SECONDS,
                                     (openai.APIError, openai.APITimeoutError), "openai embeddings")
        except (openai.APIError, openai.APITimeoutError) as e:
            raise ProviderUnavailable(
                ERROR_MESSAGES["provider_unavailable"].format(attempts=self.retries + 1, reason=e)
            ) from e


class CachedEmbeddingProvider(EmbeddingProvider):
    """Replays one recorded provider from the cache; every miss is an error."""

    def __init__(self, cache: "EmbeddingCache", provider_id: Optional[str] = None):
        if provider_id is None:
            recorded = cache.provider_ids()
            if len(recorded) != 1:
                raise ProviderUnavailable(
                    f"cannot replay a cache holding {len(recorded)} providers {recorded}; name one")
            provider_id = recorded[0]
        super().__init__(provider_id, None)

    def _request(self, texts: List[str]) -> List[List[float]]:
        raise ProviderUnavailable(ERROR_MESSAGES["cache_miss"].format(count=len(texts), provider=self.id))


def create_provider(name: str = "local", cache: Optional["EmbeddingCache"] = None) -> EmbeddingProvider:
    """Provider by --provider name: local, http, openai or cache."""
    if name == "local":
        return LocalEmbeddingProvider()
    if name == "http":
        return HttpEmbeddingProvider()
    if name == "openai":
        return OpenAIEmbeddingProvider()
    if name == "cache":
        if cache is None:
            raise ProviderUnavailable("the cache provider needs an embedding cache file")
        return CachedEmbeddingProvider(cache)
    raise ValueError(f"unknown embedding provider {name!r}")


# ================================
# ON-DISK CACHE
# ================================

class EmbeddingCache:
    """
    Content-hash keyed vector store backed by a single JSON file.

    Each entry keeps provider_id, dim and the vector as base64 of
    little-endian float64 bytes. Without a path the cache lives in memory.
    """

    VERSION = 1

    def __init__(self, path: Optional[str] = None):
        self.path = path
        self.hits = 0
        self.misses = 0
        self._entries: Dict[str, Dict[str, object]] = {}
        self._dirty = False
        self._lock = threading.Lock()
        if path and os.path.exists(path):
            self._load()

    @staticmethod
    def key(provider_id: str, text: str) -> str:
        return hashlib.sha256(f"{provider_id}\0{text}".encode("utf-8")).hexdigest()

    def _load(self) -> None:
        with open(self.path, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
        self._entries = dict(payload.get("entries", {}))
        logger.debug("loaded %d cached embeddings from %s", len(self._entries), self.path)

    def get(self, provider_id: str, text: str) -> Optional[np.ndarray]:
        with self._lock:
            entry = self._entries.get(self.key(provider_id, text))
            if entry is None or entry.get("provider_id") != provider_id:
                self.misses += 1
                return None
            self.hits += 1
        vector = np.frombuffer(base64.b64decode(entry["vector"]), dtype="<f8").astype(np.float64)
        if vector.shape[0] != entry["dim"]:
            raise DimensionMismatch(f"cache entry for {provider_id} has a corrupt vector")
        return vector

    def put(self, provider_id: str, text: str, vector: np.ndarray) -> None:
        encoded = base64.b64encode(np.asarray(vector, dtype="<f8").tobytes()).decode("ascii")
        with self._lock:
            self._entries[self.key(provider_id, text)] = {
                "provider_id": provider_id,
                "dim": int(vector.shape[0]),
                "vector": encoded,
            }
            self._dirty = True

    def provider_ids(self) -> List[str]:
        with self._lock:
            return sorted({str(entry.get("provider_id")) for entry in self._entries.values()})

    def __len__(self) -> int:
        return len(self._entries)

    def save(self) -> None:
        """Atomically rewrite the cache file if anything changed."""
        if not self.path or not self._dirty:
            return
        with self._lock:
            payload = {"version": self.VERSION, "entries": dict(sorted(self._entries.items()))}
            atomic_write_text(self.path, json.dumps(payload, indent=0, sort_keys=True) + "\n")
            self._dirty = False


# ================================
# CORPUS EMBEDDING
# ================================

def field_text(s: Scenario, k: Optional[int], selector: FieldSelector = WHOLE_LAYER) -> str:
    """Text selected for embedding; k=None selects the concatenation of all layers."""
    if selector.kind == "layer":
        return concat_layers(s) if k is None else layer_text(s, k)
    if k is None:
        raise EmptyField(f"{selector.label} needs a layer index")
    layer = s.layer(k)
    if not layer.is_structured:
        raise NotHardMode(f"scenario {s.id!r} is {s.mode.value}; {selector.label} needs hard mode")
    components = layer.body.group(selector.group)
    if selector.position is None or not 0 <= selector.position < len(components):
        raise EmptyField(f"scenario {s.id!r} has no component L{k}.{selector.group}[{selector.position}]")
    component = components[selector.position]
    text = component.characteristics if selector.kind == "characteristics" else component.motion
    if not text or not text.strip():
        raise EmptyField(f"scenario {s.id!r} L{k}.{selector.group}[{selector.position}] has no {selector.kind}")
    return text


async def _embed_batches(provider: EmbeddingProvider, batches: List[List[str]],
                         max_in_flight: int) -> List[List[np.ndarray]]:
    semaphore = asyncio.Semaphore(max(1, max_in_flight))

    async def run(batch: List[str]) -> List[np.ndarray]:
        async with semaphore:
            return await asyncio.to_thread(provider.embed_batch, batch)

    return await asyncio.gather(*(run(batch) for batch in batches))


def embed_texts(provider: EmbeddingProvider, texts: Sequence[str],
                cache: Optional[EmbeddingCache] = None,
                max_in_flight: int = MAX_IN_FLIGHT,
                batch_size: int = EMBED_BATCH_SIZE) -> List[np.ndarray]:
    """
    Embed texts through the cache, requesting only the misses.

    Requests run concurrently up to `max_in_flight`; cache writes happen
    afterwards on the calling thread and results keep input order.
    """
    resolved: Dict[str, np.ndarray] = {}
    missing: List[str] = []
    for text in dict.fromkeys(texts):
        cached = cache.get(provider.id, text) if cache is not None else None
        if cached is None:
            missing.append(text)
        else:
            resolved[text] = cached

    if missing:
        batches = [missing[i:i + batch_size] for i in range(0, len(missing), max(1, batch_size))]
        logger.debug("embedding %d texts with %s in %d batches", len(missing), provider.id, len(batches))
        results = asyncio.run(_embed_batches(provider, batches, max_in_flight))
        for batch, vectors in zip(batches, results):
            for text, vector in zip(batch, vectors):
                resolved[text] = vector
                if cache is not None:
                    cache.put(provider.id, text, vector)
        if cache is not None:
            cache.save()
    return [resolved[text] for text in texts]


def embed_corpus(provider: EmbeddingProvider, scenarios: Sequence[Scenario], k: Optional[int],
                 selector: FieldSelector = WHOLE_LAYER,
                 cache: Optional[EmbeddingCache] = None,
                 max_in_flight: int = MAX_IN_FLIGHT) -> EmbeddingSet:
    """
    Embed one text per scenario.

    Args:
        provider: Embedding provider
        scenarios: Scenarios in the order the rows should follow
        k: Layer index, or None for the concatenation of all layers
        selector: Whole layer, or a characteristics/motion field
        cache: Optional cache the vectors are written through

    Returns:
        EmbeddingSet with one row per scenario
    """
    texts = [field_text(s, k, selector) for s in scenarios]
    vectors = embed_texts(provider, texts, cache, max_in_flight)
    rows = tuple(Embedding(vector, provider.id) for vector in vectors)
    source_ids = tuple(SourceId(s.id, k, selector.label) for s in scenarios)
    return EmbeddingSet(rows, source_ids)
