"""Immutable value types of the five-layer scenario model."""
from dataclasses import dataclass, field, replace
from datetime import datetime
from enum import Enum
from typing import Any, Dict, Iterator, Optional, Tuple, Union

from config import LAYER_GROUPS, LAYER_INDICES


class StructureMode(str, Enum):
    UNSTRUCTURED = "unstructured"
    SOFT = "soft"
    HARD = "hard"

    @property
    def is_text(self) -> bool:
        return self is not StructureMode.HARD


class ContextMode(str, Enum):
    INDEPENDENT = "independent"
    SHARED = "shared"


@dataclass(frozen=True)
class Component:
    """One typed object inside a structured layer."""
    category: str
    characteristics: str
    position: Optional[str] = None
    motion: Optional[str] = None
    extras: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class StructuredBody:
    """Component groups of a hard-mode layer, keyed by template group name."""
    component_groups: Dict[str, Tuple[Component, ...]] = field(default_factory=dict)

    def group(self, name: str) -> Tuple[Component, ...]:
        return self.component_groups.get(name, ())

    def components(self) -> Iterator[Tuple[str, Component]]:
        for name, components in self.component_groups.items():
            for component in components:
                yield name, component

    @property
    def is_empty(self) -> bool:
        return not any(self.component_groups.values())


@dataclass(frozen=True)
class Layer:
    index: int
    body: Union[str, StructuredBody]

    def __post_init__(self):
        if self.index not in LAYER_INDICES:
            raise ValueError(f"layer index must be in 1..5, got {self.index}")

    @property
    def is_structured(self) -> bool:
        return isinstance(self.body, StructuredBody)


@dataclass(frozen=True)
class Provenance:
    """Where a generated scenario came from and under which experiment settings."""
    source_id: str
    edited_layer: int
    strategy: StructureMode
    context_mode: ContextMode
    model_id: str
    temperature: float
    created_at: datetime

    def __post_init__(self):
        if self.edited_layer not in LAYER_INDICES:
            raise ValueError(f"edited_layer must be in 1..5, got {self.edited_layer}")


@dataclass(frozen=True)
class Scenario:
    id: str
    mode: StructureMode
    layers: Tuple[Layer, ...]
    provenance: Optional[Provenance] = None
    extras: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        indices = tuple(layer.index for layer in self.layers)
        if indices != LAYER_INDICES:
            raise ValueError(f"a scenario needs layers 1..5 exactly once in order, got {indices}")
        structured = self.mode is StructureMode.HARD
        for layer in self.layers:
            if layer.is_structured != structured:
                raise ValueError(f"layer L{layer.index} does not conform to mode {self.mode.value}")
            if structured:
                unknown = set(layer.body.component_groups) - set(LAYER_GROUPS[layer.index])
                if unknown:
                    raise ValueError(f"layer L{layer.index} has undeclared groups {sorted(unknown)}")

    def layer(self, k: int) -> Layer:
        if k not in LAYER_INDICES:
            raise ValueError(f"layer index must be in 1..5, got {k}")
        return self.layers[k - 1]

    def with_layer(self, layer: Layer) -> "Scenario":
        layers = tuple(layer if existing.index == layer.index else existing for existing in self.layers)
        return replace(self, layers=layers)
