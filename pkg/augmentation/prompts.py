"""Prompt construction for layer-targeted scenario edits."""
import json
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional, Tuple

from config import (
    DEFAULT_SYSTEM_PROMPT_PATH, DEFAULT_TASKS_PATH, DEFAULT_TEMPERATURE, ERROR_MESSAGES,
    LAYER4_EDGE_CASE_TASK, LAYER_INDICES, LAYER_NAMES, OUTPUT_FORMAT_HARD, OUTPUT_FORMAT_TEXT,
    SHARED_CONTEXT_SENTINEL, SOFT_STRUCTURE_GUIDANCE, UNSTRUCTURED_EDIT_INSTRUCTION,
)
from core.errors import MissingTaskText, ModeMismatch
from core.layers import convert_mode
from core.parser import layer_to_document, template_schema
from core.scenario import ContextMode, Scenario, StructureMode
from core.taxonomy import Taxonomy, load_taxonomy


@dataclass(frozen=True)
class EditRequest:
    """One experiment cell: edit layer `target_layer` of `source` into n variants."""
    source: Scenario
    target_layer: int
    structure_mode: StructureMode
    context_mode: ContextMode = ContextMode.INDEPENDENT
    n_variants: int = 1
    temperature: float = DEFAULT_TEMPERATURE

    def __post_init__(self):
        object.__setattr__(self, "structure_mode", StructureMode(self.structure_mode))
        object.__setattr__(self, "context_mode", ContextMode(self.context_mode))
        if self.target_layer not in LAYER_INDICES:
            raise ValueError(f"target_layer must be in 1..5, got {self.target_layer}")
        if self.n_variants < 1:
            raise ValueError(f"n_variants must be at least 1, got {self.n_variants}")
        if self.structure_mode is StructureMode.HARD and self.source.mode is not StructureMode.HARD:
            raise ModeMismatch(f"hard edits need a hard source, {self.source.id!r} is {self.source.mode.value}")

    @property
    def prepared_source(self) -> Scenario:
        """The source expressed in the requested structure mode."""
        return convert_mode(self.source, self.structure_mode)


@dataclass(frozen=True)
class PromptBundle:
    system: str
    task: str
    scenario_payload: str
    output_format: str
    target_layer: int
    structure_mode: StructureMode
    n_variants: int
    temperature: float = DEFAULT_TEMPERATURE
    schema: Optional[Dict[str, Any]] = None
    repair_notes: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def user_text(self) -> str:
        parts = [self.task, f"Input scenario:\n{self.scenario_payload}", self.output_format]
        if self.repair_notes:
            notes = "\n".join(f"- {note}" for note in self.repair_notes)
            parts.append(f"Your previous reply was rejected for these reasons:\n{notes}\nReply again, fixing them.")
        return "\n\n".join(parts)

    def with_repair(self, note: str) -> "PromptBundle":
        return replace(self, repair_notes=self.repair_notes + (note,))


@dataclass(frozen=True)
class PromptLibrary:
    """System prompt and per-layer tasks loaded from the data directory."""
    system_prompt: str
    tasks: Dict[int, str]
    taxonomy: Taxonomy

    @classmethod
    def load(cls, system_prompt_path: Optional[str] = None, tasks_path: Optional[str] = None,
             taxonomy: Optional[Taxonomy] = None) -> "PromptLibrary":
        return cls(
            system_prompt=load_system_prompt(system_prompt_path),
            tasks=load_tasks(tasks_path),
            taxonomy=taxonomy or load_taxonomy(),
        )

    def task_for(self, k: int) -> str:
        if k == 4:
            return LAYER4_EDGE_CASE_TASK
        task = self.tasks.get(k)
        if not task:
            raise MissingTaskText(ERROR_MESSAGES["missing_task"].format(layer=k))
        return task


def load_tasks(path: Optional[str] = None) -> Dict[int, str]:
    """Layer index -> task text; keys starting with "_" are comments."""
    with open(path or DEFAULT_TASKS_PATH, "r", encoding="utf-8") as handle:
        raw = json.load(handle)
    return {int(key): text for key, text in raw.items() if not key.startswith("_")}


def load_system_prompt(path: Optional[str] = None) -> str:
    with open(path or DEFAULT_SYSTEM_PROMPT_PATH, "r", encoding="utf-8") as handle:
        return handle.read().strip()


def scenario_payload(s: Scenario) -> str:
    """The five layers of a scenario as the JSON the model sees."""
    return json.dumps({f"L{layer.index}": layer_to_document(layer) for layer in s.layers},
                      indent=2, ensure_ascii=False)


def _structure_notes(mode: StructureMode) -> str:
    if mode is StructureMode.UNSTRUCTURED:
        return "Each layer is described by free text."
    if mode is StructureMode.SOFT:
        lines = [f"- L{k} ({LAYER_NAMES[k]}): {SOFT_STRUCTURE_GUIDANCE[k]}" for k in LAYER_INDICES]
        return "Each layer is free text that covers these components:\n" + "\n".join(lines)
    return ("Each layer follows a fixed template: component groups holding components with a "
            "category chosen from a closed list and a free-text characteristics field.")


def _context_instruction(req: EditRequest) -> str:
    if req.context_mode is ContextMode.SHARED and req.n_variants > 1:
        return (f"Generate {req.n_variants} different edited scenarios, each one different from the others. "
                f"Put a line containing only {SHARED_CONTEXT_SENTINEL} between consecutive scenarios.")
    return "Generate one edited scenario."


def build_edit_prompt(req: EditRequest, library: PromptLibrary) -> PromptBundle:
    """
    Assemble the prompt for one edit request.

    Args:
        req: The edit request
        library: System prompt, layer tasks and taxonomy

    Returns:
        A PromptBundle; equal requests give equal bundles

    Raises:
        MissingTaskText: a soft or hard edit targets a layer without a task
    """
    k = req.target_layer
    mode = req.structure_mode
    if mode is StructureMode.UNSTRUCTURED:
        task = f"Layer to modify: L{k} ({LAYER_NAMES[k]}).\n{UNSTRUCTURED_EDIT_INSTRUCTION}"
    else:
        task = library.task_for(k)
        if mode is StructureMode.SOFT:
            task = f"{task}\nThe edited layer must still cover: {SOFT_STRUCTURE_GUIDANCE[k]}"

    return PromptBundle(
        system=f"{library.system_prompt}\n\n{_structure_notes(mode)}",
        task=f"{task}\n\n{_context_instruction(req)}",
        scenario_payload=scenario_payload(req.prepared_source),
        output_format=OUTPUT_FORMAT_HARD if mode is StructureMode.HARD else OUTPUT_FORMAT_TEXT,
        target_layer=k,
        structure_mode=mode,
        n_variants=req.n_variants if req.context_mode is ContextMode.SHARED else 1,
        temperature=req.temperature,
        schema=template_schema(library.taxonomy) if mode is StructureMode.HARD else None,
    )
