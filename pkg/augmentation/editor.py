"""Layer-targeted scenario editing: prompting, output repair and edit enforcement."""
import asyncio
import hashlib
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Callable, List, Tuple

from config import MAX_IN_FLIGHT, MAX_REPAIR_RETRIES, SHARED_CONTEXT_SENTINEL
from augmentation.clients import ChatClient, strip_code_fences
from augmentation.prompts import EditRequest, PromptBundle, PromptLibrary, build_edit_prompt
from core.corpus import Rejection
from core.errors import ExhaustedRepairs, MalformedDocument, SchemaViolation
from core.layers import diff_layers
from core.parser import parse_scenario
from core.scenario import ContextMode, Provenance, Scenario
from core.taxonomy import Taxonomy
from utils.logger import get_logger

logger = get_logger(__name__)

Clock = Callable[[], datetime]


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


@dataclass(frozen=True)
class EditCheck:
    accepted: bool
    violations: Tuple[int, ...] = ()
    noop: bool = False


@dataclass(frozen=True)
class Repaired:
    scenarios: Tuple[Scenario, ...]
    retries: int


@dataclass
class EditBatch:
    """Outcome of one EditRequest."""
    accepted: List[Scenario] = field(default_factory=list)
    rejected: List[Rejection] = field(default_factory=list)
    noops: List[str] = field(default_factory=list)
    retries: int = 0

    def __len__(self) -> int:
        return len(self.accepted) + len(self.rejected)


def enforce_single_layer_edit(original: Scenario, candidate: Scenario, k: int) -> EditCheck:
    """
    Accept a candidate only if no layer other than k changed.

    An unchanged target layer is still accepted and flagged as a no-op.
    """
    changed = diff_layers(original, candidate)
    violations = tuple(sorted(changed - {k}))
    if violations:
        return EditCheck(accepted=False, violations=violations, noop=k not in changed)
    return EditCheck(accepted=True, noop=k not in changed)


def split_reply(raw: str, expected: int) -> List[str]:
    """Split a reply into `expected` documents on the shared-context sentinel line."""
    if expected == 1:
        return [strip_code_fences(raw)]
    chunks, current = [], []
    for line in raw.splitlines():
        if line.strip() == SHARED_CONTEXT_SENTINEL:
            chunks.append("\n".join(current))
            current = []
        else:
            current.append(line)
    chunks.append("\n".join(current))
    documents = [strip_code_fences(chunk) for chunk in chunks if chunk.strip()]
    if len(documents) != expected:
        raise MalformedDocument(
            f"expected {expected} scenarios separated by {SHARED_CONTEXT_SENTINEL}, got {len(documents)}")
    return documents


def parse_reply(raw: str, bundle: PromptBundle, taxonomy: Taxonomy) -> Tuple[Scenario, ...]:
    return tuple(
        parse_scenario(document, mode=bundle.structure_mode, taxonomy=taxonomy)
        for document in split_reply(raw, bundle.n_variants)
    )


def repair_structured_output(raw: str, bundle: PromptBundle, client: ChatClient, taxonomy: Taxonomy,
                             max_retries: int = MAX_REPAIR_RETRIES, seed: int = 0) -> Repaired:
    """
    Parse a reply, re-prompting with the validation errors until it is valid.

    Args:
        raw: First reply of the client
        bundle: The prompt that produced it; its schema drives validation
        client: Client used for the repair prompts
        taxonomy: Category lists for hard mode
        max_retries: Re-prompts allowed after the first reply

    Returns:
        The parsed scenarios and the number of re-prompts used

    Raises:
        ExhaustedRepairs: still invalid after max_retries re-prompts
    """
    messages: List[str] = []
    for attempt in range(max_retries + 1):
        try:
            return Repaired(parse_reply(raw, bundle, taxonomy), retries=attempt)
        except SchemaViolation as e:
            problems = e.messages()
        except MalformedDocument as e:
            problems = [str(e)]
        messages.extend(problems)
        if attempt == max_retries:
            break
        logger.info("reply for L%d failed validation (%s); re-prompting", bundle.target_layer, problems[0])
        bundle = bundle.with_repair("; ".join(problems))
        raw = client.complete(bundle, seed)
    raise ExhaustedRepairs(messages, attempts=max_retries + 1)


def variant_seed(base_seed: int, source_id: str, k: int, index: int) -> int:
    digest = hashlib.sha256(f"{base_seed}:{source_id}:{k}:{index}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big") & 0x7FFFFFFF


async def _run_independent(client: ChatClient, bundle: PromptBundle, taxonomy: Taxonomy,
                           seeds: List[int], max_retries: int, max_in_flight: int) -> List[Repaired]:
    semaphore = asyncio.Semaphore(max(1, max_in_flight))

    def one(seed: int) -> Repaired:
        raw = client.complete(bundle, seed)
        return repair_structured_output(raw, bundle, client, taxonomy, max_retries, seed)

    async def bounded(seed: int) -> Repaired:
        async with semaphore:
            return await asyncio.to_thread(one, seed)

    return await asyncio.gather(*(bounded(seed) for seed in seeds))


def generate_edits(client: ChatClient, req: EditRequest, library: PromptLibrary,
                   seed: int = 0, clock: Clock = utc_now,
                   max_retries: int = MAX_REPAIR_RETRIES,
                   max_in_flight: int = MAX_IN_FLIGHT) -> EditBatch:
    """
    Produce req.n_variants edits of one layer of req.source.

    Independent mode issues one call per variant, at most `max_in_flight` at
    a time; shared mode asks for every variant in a single call. Variants
    that changed layers other than the target are returned as rejections.

    Raises:
        ExhaustedRepairs: a reply stayed invalid after max_retries re-prompts
        ClientUnavailable: the client could not be reached
        MissingTaskText: no task text for the target layer
    """
    source = req.prepared_source
    k = req.target_layer
    bundle = build_edit_prompt(req, library)

    if req.context_mode is ContextMode.SHARED:
        call_seed = variant_seed(seed, source.id, k, 0)
        raw = client.complete(bundle, call_seed)
        results = [repair_structured_output(raw, bundle, client, library.taxonomy, max_retries, call_seed)]
    else:
        seeds = [variant_seed(seed, source.id, k, i) for i in range(req.n_variants)]
        results = asyncio.run(_run_independent(client, bundle, library.taxonomy, seeds, max_retries, max_in_flight))

    candidates = [scenario for result in results for scenario in result.scenarios]
    batch = EditBatch(retries=sum(result.retries for result in results))
    created_at = clock()
    for index, candidate in enumerate(candidates):
        scenario = replace(
            candidate,
            id=f"{source.id}-L{k}-{req.context_mode.value}-{index:02d}",
            provenance=Provenance(
                source_id=source.id,
                edited_layer=k,
                strategy=req.structure_mode,
                context_mode=req.context_mode,
                model_id=client.model_id,
                temperature=req.temperature,
                created_at=created_at,
            ),
        )
        check = enforce_single_layer_edit(source, scenario, k)
        if not check.accepted:
            logger.warning("quarantined %s: edited %s besides L%d", scenario.id,
                           ", ".join(f"L{i}" for i in check.violations), k)
            batch.rejected.append(Rejection(scenario, check.violations))
            continue
        if check.noop:
            logger.warning("%s left the target layer L%d unchanged", scenario.id, k)
            batch.noops.append(scenario.id)
        batch.accepted.append(scenario)
    return batch
