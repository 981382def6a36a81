"""Three-layer entity-relationship model of an organization.

Entities live in exactly one layer (operations, service, systems). Relationships
are hyperedges over two or more entities and are treated as undirected for
connectivity. Criticality and sensitivity zones are sets of entity ids; an
entity in both zones carries an integrity requirement.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable

from .errors import Diagnostic, UnknownEntityError


class Layer(IntEnum):
    OPERATIONS = 1
    SERVICE = 2
    SYSTEMS = 3

    @property
    def title(self) -> str:
        return self.name.capitalize()

    @classmethod
    def parse(cls, value: "Layer | int | str") -> "Layer":
        """Accept 1/2/3, "1", or a case-insensitive layer name."""
        if isinstance(value, Layer):
            return value
        if isinstance(value, int):
            return cls(value)
        text = str(value).strip()
        if text.isdigit():
            return cls(int(text))
        try:
            return cls[text.upper()]
        except KeyError:
            raise ValueError(f"unknown layer {value!r}") from None


@dataclass(frozen=True)
class EntityNode:
    id: str
    layer: Layer
    display_name: str = ""
    attributes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.display_name:
            object.__setattr__(self, "display_name", self.id)
        object.__setattr__(self, "layer", Layer.parse(self.layer))
        object.__setattr__(self, "attributes", tuple(self.attributes))


@dataclass(frozen=True)
class RelationshipEdge:
    id: str
    label: str
    endpoints: tuple[str, ...]
    attributes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "endpoints", tuple(self.endpoints))
        object.__setattr__(self, "attributes", tuple(self.attributes))


@dataclass(frozen=True)
class ZoneAssignment:
    criticality_members: frozenset[str] = frozenset()
    sensitivity_members: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "criticality_members", frozenset(self.criticality_members))
        object.__setattr__(self, "sensitivity_members", frozenset(self.sensitivity_members))


@dataclass(frozen=True, eq=False)
class OrgModel:
    """An organization description.

    Construction does not validate; call :func:`validate_model`. Equality is
    structural: entities and relationships compare as id-keyed collections, so
    declaration order does not matter (endpoint and attribute order does).
    """

    name: str = ""
    entities: tuple[EntityNode, ...] = ()
    relationships: tuple[RelationshipEdge, ...] = ()
    zones: ZoneAssignment = field(default_factory=ZoneAssignment)

    def __post_init__(self) -> None:
        object.__setattr__(self, "entities", tuple(self.entities))
        object.__setattr__(self, "relationships", tuple(self.relationships))

    def _key(self):
        return (
            self.name,
            tuple(sorted(self.entities, key=lambda e: e.id)),
            tuple(sorted(self.relationships, key=lambda r: r.id)),
            self.zones,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, OrgModel):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())

    def entity(self, entity_id: str) -> EntityNode:
        for e in self.entities:
            if e.id == entity_id:
                return e
        raise UnknownEntityError(entity_id)


def validate_model(model: OrgModel) -> list[Diagnostic]:
    """Check every structural invariant and return the findings.

    Dangling endpoints, duplicate ids, short relationships and unresolved zone
    members are errors; an empty layer is a warning. Nothing is raised.
    """
    report: list[Diagnostic] = []
    seen: set[str] = set()
    for e in model.entities:
        if not e.id:
            report.append(Diagnostic("error", "empty-id", "entity with empty id", "entity"))
        elif e.id in seen:
            report.append(Diagnostic("error", "duplicate-id", f"duplicate id {e.id!r}", f"entity {e.id}"))
        seen.add(e.id)
    entity_ids = {e.id for e in model.entities}

    for r in model.relationships:
        loc = f"rel {r.id}"
        if not r.id:
            report.append(Diagnostic("error", "empty-id", "relationship with empty id", "rel"))
        elif r.id in seen:
            report.append(Diagnostic("error", "duplicate-id", f"duplicate id {r.id!r}", loc))
        seen.add(r.id)
        if len(r.endpoints) < 2:
            report.append(
                Diagnostic("error", "too-few-endpoints", f"relationship {r.id!r} needs >= 2 endpoints", loc)
            )
        for ep in r.endpoints:
            if ep not in entity_ids:
                report.append(
                    Diagnostic("error", "dangling-endpoint", f"endpoint {ep!r} is not a declared entity", loc)
                )

    for zone, members in (
        ("criticality", model.zones.criticality_members),
        ("sensitivity", model.zones.sensitivity_members),
    ):
        for m in sorted(members - entity_ids):
            report.append(
                Diagnostic("error", "unknown-zone-member", f"{zone} member {m!r} is not a declared entity", f"zone {zone}")
            )

    for layer in Layer:
        if not any(e.layer == layer for e in model.entities):
            report.append(
                Diagnostic("warning", "empty-layer", f"no entities in layer {layer.title}", f"layer {layer.title}")
            )
    return report


def errors_only(report: Iterable[Diagnostic]) -> list[Diagnostic]:
    return [d for d in report if d.severity == "error"]


def entities_in_layer(model: OrgModel, layer: Layer | int | str) -> list[EntityNode]:
    layer = Layer.parse(layer)
    return [e for e in model.entities if e.layer == layer]


def zone_flags(model: OrgModel, entity_id: str) -> dict[str, bool]:
    model.entity(entity_id)
    return {
        "criticality": entity_id in model.zones.criticality_members,
        "sensitivity": entity_id in model.zones.sensitivity_members,
    }


_CIA = {"confidentiality", "integrity", "availability"}


def cia_to_cs(requirements: Iterable[str]) -> dict[str, bool]:
    """Map CIA requirements onto criticality/sensitivity flags.

    Availability needs criticality, confidentiality needs sensitivity and
    integrity needs both.
    """
    reqs = {r.lower() for r in requirements}
    unknown = reqs - _CIA
    if unknown:
        raise ValueError(f"unknown CIA requirement(s): {sorted(unknown)}")
    return {
        "criticality": bool(reqs & {"availability", "integrity"}),
        "sensitivity": bool(reqs & {"confidentiality", "integrity"}),
    }


def reachable_from(model: OrgModel, entity_id: str) -> set[str]:
    """Entities connected to ``entity_id`` through any chain of relationships."""
    model.entity(entity_id)
    adjacency: dict[str, set[str]] = {e.id: set() for e in model.entities}
    for r in model.relationships:
        ends = [ep for ep in r.endpoints if ep in adjacency]
        for ep in ends:
            adjacency[ep].update(ends)

    seen = {entity_id}
    queue = deque([entity_id])
    while queue:
        for nxt in adjacency[queue.popleft()]:
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def zone_exposure(model: OrgModel) -> dict[Layer, dict[str, int]]:
    """Count entities per layer in each zone; used by quote-time sanity checks."""
    out: dict[Layer, dict[str, int]] = {}
    for layer in Layer:
        ents = entities_in_layer(model, layer)
        out[layer] = {
            "entities": len(ents),
            "criticality": sum(e.id in model.zones.criticality_members for e in ents),
            "sensitivity": sum(e.id in model.zones.sensitivity_members for e in ents),
        }
    return out
