import os
from typing import Dict, Any, List, Tuple

# ================================
# API CONFIGURATION
# ================================

# Generic chat endpoint (minimal request/response wire format)
LLM_ENDPOINT = os.getenv("LLM_ENDPOINT")
LLM_MODEL = os.getenv("LLM_MODEL", "scenario-editor")
LLM_API_KEY = os.getenv("LLM_API_KEY")
LLM_TIMEOUT = int(os.getenv("LLM_TIMEOUT", "120"))

# OpenAI Configuration
OPENAI_API_KEY = os.getenv("OPENAI_API_KEY")
OPENAI_MODEL = os.getenv("OPENAI_MODEL", "gpt-4o-mini")
OPENAI_MAX_TOKENS = int(os.getenv("OPENAI_MAX_TOKENS", "4000"))
OPENAI_TIMEOUT = int(os.getenv("OPENAI_TIMEOUT", "60"))
OPENAI_EMBED_MODEL = os.getenv("OPENAI_EMBED_MODEL", "text-embedding-3-small")

# Remote embedding endpoint
EMBED_ENDPOINT = os.getenv("EMBED_ENDPOINT")
EMBED_MODEL = os.getenv("EMBED_MODEL", "text-embedding")
EMBED_API_KEY = os.getenv("EMBED_API_KEY")
EMBED_TIMEOUT = int(os.getenv("EMBED_TIMEOUT", "60"))
EMBED_BATCH_SIZE = int(os.getenv("EMBED_BATCH_SIZE", "32"))

# Retry policy shared by the remote chat and embedding providers
NETWORK_RETRIES = 3
BACKOFF_BASE_SECONDS = float(os.getenv("BACKOFF_BASE_SECONDS", "0.5"))

# Requests in flight per embedding or independent-mode generation batch
MAX_IN_FLIGHT = int(os.getenv("MAX_IN_FLIGHT", "4"))

# ================================
# LOGGING CONFIGURATION
# ================================

LOG_LEVEL = os.getenv("SCENARIO_LOG_LEVEL", "WARNING")
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# ================================
# SCENARIO MODEL
# ================================

LAYER_INDICES: Tuple[int, ...] = (1, 2, 3, 4, 5)

LAYER_NAMES: Dict[int, str] = {
    1: "road structures",
    2: "structures surrounding the road",
    3: "temporary changes to the road and its surroundings",
    4: "dynamic objects",
    5: "environmental conditions",
}

# Component groups of the hard template, in serialization order
LAYER_GROUPS: Dict[int, Tuple[str, ...]] = {
    1: ("roads", "guidance"),
    2: ("environment", "structures"),
    3: ("objects",),
    4: ("objects",),
    5: ("weather", "illumination"),
}

# Only layer-4 components may carry a motion field
MOTION_LAYERS: Tuple[int, ...] = (4,)

# Layers whose categories stay free text (no closed taxonomy)
FREE_TEXT_LAYERS: Tuple[int, ...] = (3,)

# Component keys understood by the parser; anything else lands in extras
COMPONENT_KEYS: Tuple[str, ...] = ("type", "characteristics", "position", "motion")

# Separator used when the five layer texts are concatenated
LAYER_SEPARATOR = "\n\n"

# ================================
# DATA FILES
# ================================

DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")
FIXTURES_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "fixtures")

DEFAULT_TAXONOMY_PATH = os.path.join(DATA_DIR, "taxonomy.json")
DEFAULT_TASKS_PATH = os.path.join(DATA_DIR, "tasks.json")
DEFAULT_SYSTEM_PROMPT_PATH = os.path.join(DATA_DIR, "system_prompt.txt")
DEFAULT_REFS_MANIFEST = os.path.join(FIXTURES_DIR, "refs", "manifest.json")

MANIFEST_NAME = "manifest.json"
REFS_DIRNAME = "refs"
GENERATED_DIRNAME = "generated"
REJECTS_DIRNAME = "rejects"

# ================================
# EMBEDDING CONFIGURATION
# ================================

LOCAL_EMBED_DIM = 256
LOCAL_PROVIDER_ID = f"local-bow-{LOCAL_EMBED_DIM}"

# Provider ids accepted by --provider; "cache" replays --embed-cache without a backend
EMBED_PROVIDERS: Tuple[str, ...] = ("local", "http", "openai", "cache")

# ================================
# AUGMENTATION CONFIGURATION
# ================================

DEFAULT_TEMPERATURE = 1.0
MAX_REPAIR_RETRIES = 2

# Line separating scenario documents when several come back in one reply
SHARED_CONTEXT_SENTINEL = "=====SCENARIO====="

UNSTRUCTURED_EDIT_INSTRUCTION = (
    "Please only modify the layer specified in the prompt to generate an Edge Case "
    "and change nothing in the other layers (MOST IMPORTANT)"
)

LAYER4_EDGE_CASE_TASK = (
    "Turn this scenario into an Edge Case by modifying only the layer L4 from the input. "
    "You should either: "
    "- Modify existing dynamic objects, or add new ones with rare and/or challenging "
    "characteristics. Look for object that do not belong in such a scenario. "
    "- Modify the motion of existing dynamic objects, or add new objects with unique and "
    "challenging motion. "
    "You may do both if needed, but focus on either the characteristics or the motion of "
    "the objects when generating a scenario."
)

# Prose guidance for the soft structure: components each layer must mention
SOFT_STRUCTURE_GUIDANCE: Dict[int, str] = {
    1: "Mention the road type, number and direction of lanes, surface, and lane markings, traffic lights or signs.",
    2: "Mention the surrounding environment (urban, rural, ...) and the roadside structures "
       "with their characteristics.",
    3: "Mention any temporary change (construction, debris, closures) with its position relative to the ego vehicle.",
    4: "Mention every dynamic object with its type, characteristics, position and motion.",
    5: "Mention the weather, the illumination sources and the resulting visibility.",
}

OUTPUT_FORMAT_TEXT = (
    "Reply with a single JSON object with the string fields \"L1\", \"L2\", \"L3\", \"L4\" and \"L5\" "
    "and nothing else."
)

OUTPUT_FORMAT_HARD = (
    "Reply with a single JSON object with the fields \"L1\" to \"L5\". Each layer is an object "
    "mapping its component groups to arrays of components with a \"type\", a non-empty "
    "\"characteristics\", an optional \"position\" and, for layer L4 only, an optional \"motion\"."
)

# ================================
# METRICS CONFIGURATION
# ================================

# Characteristics-diversity columns: (layer, group, field)
CHARACTERISTICS_COLUMNS: Tuple[Tuple[int, str, str], ...] = (
    (1, "roads", "characteristics"),
    (1, "guidance", "characteristics"),
    (2, "environment", "characteristics"),
    (2, "structures", "characteristics"),
    (3, "objects", "characteristics"),
    (4, "objects", "characteristics"),
    (4, "objects", "motion"),
    (5, "weather", "characteristics"),
    (5, "illumination", "characteristics"),
)

TOTAL_TEXT = "total-text"
TOTAL_MEAN = "total-mean"

DEFAULT_GENERATED_LABEL = "generated"
REFERENCE_LABEL = "reference"

# ================================
# REPORT CONFIGURATION
# ================================

CSV_COLUMNS: List[str] = ["layer", "metric", "mode", "score", "M", "N", "na_pairs"]
NA_MARKER = "NA"
SCORE_DECIMALS = 4

REPORT_FORMATS: Dict[str, Dict[str, str]] = {
    "markdown": {"extension": ".md", "description": "Markdown tables, layers as columns"},
    "csv": {"extension": ".csv", "description": "One row per layer, metric and mode"},
    "series": {"extension": ".csv", "description": "Plot-ready series, metric vs layer"},
    "json": {"extension": ".json", "description": "Complete report data"},
}

# ================================
# ERROR HANDLING
# ================================

EXIT_CODES: Dict[str, int] = {
    "ScenarioToolError": 1,
    "MalformedDocument": 10,
    "SchemaViolation": 11,
    "ModeMismatch": 12,
    "NotApplicable": 13,
    "NotHardMode": 14,
    "DimensionMismatch": 20,
    "ZeroNorm": 21,
    "EmptyReference": 22,
    "EmptyGenerated": 23,
    "TooFewSamples": 24,
    "EmptySet": 25,
    "EmptyField": 26,
    "ProviderUnavailable": 30,
    "ClientUnavailable": 31,
    "ExhaustedRepairs": 32,
    "MissingTaskText": 33,
    "ChecksumMismatch": 40,
    "DuplicateScenarioId": 41,
    "IoFailure": 42,
    "QuarantineFailure": 50,
}

ERROR_MESSAGES: Dict[str, str] = {
    "client_unavailable": "Chat client unreachable after {attempts} attempts: {reason}",
    "provider_unavailable": "Embedding provider unreachable after {attempts} attempts: {reason}",
    "cache_miss": "{count} texts are missing from the embedding cache for {provider}",
    "exhausted_repairs": "No valid scenario after {attempts} attempts",
    "missing_task": "No task text configured for layer L{layer}",
    "checksum_mismatch": "Checksum mismatch for {file}",
    "duplicate_id": "Duplicate scenario id {id!r}",
    "strict_quarantine": "{count} generated scenarios were quarantined (strict mode)",
}

# ================================
# UTILITY FUNCTIONS (using config values)
# ================================

def validate_llm_config() -> Dict[str, Any]:
    """Describe which chat backends are configured."""
    return {
        "endpoint_set": bool(LLM_ENDPOINT),
        "model": LLM_MODEL,
        "openai_key_set": bool(OPENAI_API_KEY),
        "openai_model": OPENAI_MODEL,
        "timeout": LLM_TIMEOUT,
    }

def validate_embedding_config() -> Dict[str, Any]:
    """Describe which embedding backends are configured."""
    return {
        "endpoint_set": bool(EMBED_ENDPOINT),
        "model": EMBED_MODEL,
        "openai_key_set": bool(OPENAI_API_KEY),
        "local_dim": LOCAL_EMBED_DIM,
        "batch_size": EMBED_BATCH_SIZE,
    }

def exit_code_for(error: BaseException) -> int:
    """Exit code of an error class, walking up its hierarchy."""
    for cls in type(error).__mro__:
        if cls.__name__ in EXIT_CODES:
            return EXIT_CODES[cls.__name__]
    return 1
