"""Target-selection strategies over stabilized gesture points.

Two concrete strategies share a stability gate (all N samples within a radial
threshold of their mean, strict ``<``):

* pick: nearest registered target to the sample mean by Euclidean distance,
  optionally restricted to a target group first.
* place: the area whose rectangle contains the mean; when the mean is out of
  every area, the nearest area center wins (``fallback_used``).

Ties (equidistant targets, overlapping areas) break deterministically by
distance then lexicographic id. Registries allow concurrent readers with
exclusive writers; strategy evaluation is pure over a registry snapshot.

Layout file format (meters, workplane frame):

    {"targets": [{"id": "b1", "label": "big_bolt_1", "group": "big_bolt",
                  "u": 0.2, "v": 0.3}],
     "areas":   [{"id": "a1", "cu": 0.3, "cv": 0.4, "hu": 0.1, "hv": 0.1}]}
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterable, Sequence

from .geometry import PlanarPoint

DEFAULT_STABILITY_THRESHOLD = 0.05
DEFAULT_SAMPLE_COUNT = 15


class SnapError(ValueError):
    pass


class EmptySamplesError(SnapError):
    pass


class EmptyRegistryError(SnapError):
    pass


class EmptyAreasError(SnapError):
    pass


class DuplicateIdError(SnapError):
    pass


class UnknownIdError(SnapError):
    pass


class MalformedFileError(SnapError):
    pass


@dataclass(frozen=True)
class Target:
    id: str
    label: str
    position: PlanarPoint
    group: str | None = None


@dataclass(frozen=True)
class Area:
    id: str
    center: PlanarPoint
    half_extent: tuple[float, float]

    def __post_init__(self) -> None:
        hu, hv = self.half_extent
        if hu <= 0 or hv <= 0:
            raise SnapError(f"area {self.id!r} half_extent must be positive, got {self.half_extent}")

    def contains(self, p: PlanarPoint) -> bool:
        """Axis-aligned containment in (u, v); the boundary counts as inside."""
        return (
            abs(p.u - self.center.u) <= self.half_extent[0]
            and abs(p.v - self.center.v) <= self.half_extent[1]
        )


@dataclass(frozen=True)
class SnapRequest:
    samples: tuple[PlanarPoint, ...]
    strategy: str
    group_filter: str | None = None


@dataclass(frozen=True)
class GateResult:
    mean: PlanarPoint
    max_deviation: float
    stable: bool


@dataclass(frozen=True)
class SnapResult:
    selected_id: str
    mean_point: PlanarPoint
    max_radial_deviation: float
    fallback_used: bool
    distance_to_selected: float


def _distance_uv(a: PlanarPoint, b: PlanarPoint) -> float:
    return math.hypot(a.u - b.u, a.v - b.v)


def stability_gate(
    samples: Sequence[PlanarPoint], threshold: float = DEFAULT_STABILITY_THRESHOLD
) -> GateResult:
    """Mean the samples and check every radial deviation is < threshold."""
    if not samples:
        raise EmptySamplesError("stability gate needs at least one sample")
    k = len(samples)
    # mean as offset from the first sample: exact for identical samples
    first = samples[0]
    mean = PlanarPoint(
        u=first.u + sum(p.u - first.u for p in samples) / k,
        v=first.v + sum(p.v - first.v for p in samples) / k,
        z_residual=first.z_residual + sum(p.z_residual - first.z_residual for p in samples) / k,
    )
    max_dev = max(_distance_uv(p, mean) for p in samples)
    return GateResult(mean=mean, max_deviation=max_dev, stable=max_dev < threshold)


def pick_snap(
    samples: Sequence[PlanarPoint],
    targets: Sequence[Target],
    *,
    threshold: float = DEFAULT_STABILITY_THRESHOLD,
    group: str | None = None,
    max_distance: float | None = None,
) -> SnapResult | None:
    """Select the nearest target to the stable sample mean, or None.

    None means no selection: the gate failed, the group filter matched
    nothing, or the nearest target exceeds ``max_distance`` (off by default,
    matching the original behaviour of always selecting the nearest target).
    """
    if not targets:
        raise EmptyRegistryError("no targets registered")
    candidates = [t for t in targets if group is None or t.group == group]
    if not candidates:
        return None
    gate = stability_gate(samples, threshold)
    if not gate.stable:
        return None
    best = min(candidates, key=lambda t: (_distance_uv(gate.mean, t.position), t.id))
    distance = _distance_uv(gate.mean, best.position)
    if max_distance is not None and distance > max_distance:
        return None
    return SnapResult(
        selected_id=best.id,
        mean_point=gate.mean,
        max_radial_deviation=gate.max_deviation,
        fallback_used=False,
        distance_to_selected=distance,
    )


def place_snap(
    samples: Sequence[PlanarPoint],
    areas: Sequence[Area],
    *,
    threshold: float = DEFAULT_STABILITY_THRESHOLD,
) -> SnapResult | None:
    """Select the area containing the stable sample mean, else the nearest
    area center (fallback), or None when the gate fails."""
    if not areas:
        raise EmptyAreasError("no areas registered")
    gate = stability_gate(samples, threshold)
    if not gate.stable:
        return None
    containing = [a for a in areas if a.contains(gate.mean)]
    pool = containing if containing else list(areas)
    best = min(pool, key=lambda a: (_distance_uv(gate.mean, a.center), a.id))
    return SnapResult(
        selected_id=best.id,
        mean_point=gate.mean,
        max_radial_deviation=gate.max_deviation,
        fallback_used=not containing,
        distance_to_selected=_distance_uv(gate.mean, best.center),
    )


def evaluate_request(
    request: SnapRequest,
    targets: Sequence[Target],
    areas: Sequence[Area],
    *,
    threshold: float = DEFAULT_STABILITY_THRESHOLD,
    max_distance: float | None = None,
) -> SnapResult | None:
    """Dispatch a SnapRequest to the strategy it names."""
    if request.strategy == "pick":
        return pick_snap(
            request.samples, targets,
            threshold=threshold, group=request.group_filter, max_distance=max_distance,
        )
    if request.strategy == "place":
        return place_snap(request.samples, areas, threshold=threshold)
    raise SnapError(f"unknown strategy {request.strategy!r}")


class SnapStrategy(ABC):
    """Common interface so selection servers can run strategies in parallel."""

    name: str

    @abstractmethod
    def select(
        self, samples: Sequence[PlanarPoint], group: str | None = None
    ) -> SnapResult | None:
        """Evaluate the strategy over a sample window."""


class PickStrategy(SnapStrategy):
    name = "pick"

    def __init__(
        self,
        registry: "TargetRegistry",
        threshold: float = DEFAULT_STABILITY_THRESHOLD,
        max_distance: float | None = None,
    ) -> None:
        self.registry = registry
        self.threshold = threshold
        self.max_distance = max_distance

    def select(
        self, samples: Sequence[PlanarPoint], group: str | None = None
    ) -> SnapResult | None:
        return pick_snap(
            samples,
            self.registry.snapshot(),
            threshold=self.threshold,
            group=group,
            max_distance=self.max_distance,
        )


class PlaceStrategy(SnapStrategy):
    name = "place"

    def __init__(
        self, registry: "AreaRegistry", threshold: float = DEFAULT_STABILITY_THRESHOLD
    ) -> None:
        self.registry = registry
        self.threshold = threshold

    def select(
        self, samples: Sequence[PlanarPoint], group: str | None = None
    ) -> SnapResult | None:
        return place_snap(samples, self.registry.snapshot(), threshold=self.threshold)


class _Registry:
    """Id-keyed store with copy-on-read snapshots; writers take the lock."""

    def __init__(self) -> None:
        self._items: dict[str, object] = {}
        self._lock = threading.RLock()

    def _add(self, item_id: str, item: object) -> None:
        with self._lock:
            if item_id in self._items:
                raise DuplicateIdError(f"id {item_id!r} already registered")
            self._items[item_id] = item

    def remove(self, item_id: str) -> None:
        with self._lock:
            if item_id not in self._items:
                raise UnknownIdError(f"id {item_id!r} not registered")
            del self._items[item_id]

    def replace_all(self, items: Iterable) -> None:
        staged: dict[str, object] = {}
        for item in items:
            if item.id in staged:
                raise DuplicateIdError(f"id {item.id!r} appears twice")
            staged[item.id] = item
        with self._lock:
            self._items = staged

    def snapshot(self) -> tuple:
        with self._lock:
            return tuple(self._items[k] for k in sorted(self._items))

    def __len__(self) -> int:
        return len(self._items)

    def __contains__(self, item_id: str) -> bool:
        return item_id in self._items


class TargetRegistry(_Registry):
    def add(self, target: Target) -> None:
        self._add(target.id, target)

    def snapshot(self) -> tuple[Target, ...]:
        return super().snapshot()


class AreaRegistry(_Registry):
    def add(self, area: Area) -> None:
        self._add(area.id, area)

    def snapshot(self) -> tuple[Area, ...]:
        return super().snapshot()


def _target_from_dict(spec: dict) -> Target:
    try:
        return Target(
            id=str(spec["id"]),
            label=str(spec.get("label", spec["id"])),
            position=PlanarPoint(u=float(spec["u"]), v=float(spec["v"])),
            group=None if spec.get("group") in (None, "") else str(spec["group"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedFileError(f"bad target entry {spec!r}: {exc}") from exc


def _area_from_dict(spec: dict) -> Area:
    try:
        return Area(
            id=str(spec["id"]),
            center=PlanarPoint(u=float(spec["cu"]), v=float(spec["cv"])),
            half_extent=(float(spec["hu"]), float(spec["hv"])),
        )
    except (KeyError, TypeError, ValueError, SnapError) as exc:
        raise MalformedFileError(f"bad area entry {spec!r}: {exc}") from exc


def parse_layout(doc: dict) -> tuple[list[Target], list[Area]]:
    if not isinstance(doc, dict):
        raise MalformedFileError("layout file must hold a JSON object")
    targets = [_target_from_dict(t) for t in doc.get("targets", [])]
    areas = [_area_from_dict(a) for a in doc.get("areas", [])]
    return targets, areas


def load_layout(path: str | os.PathLike) -> tuple[list[Target], list[Area]]:
    """Read a targets/areas JSON document."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedFileError(f"{path}: invalid JSON: {exc}") from exc
    return parse_layout(doc)


def layout_document(
    targets: Sequence[Target], areas: Sequence[Area], extra: dict | None = None
) -> dict:
    doc = dict(extra or {})
    doc["targets"] = [
        {"id": t.id, "label": t.label, "group": t.group, "u": t.position.u, "v": t.position.v}
        for t in targets
    ]
    doc["areas"] = [
        {"id": a.id, "cu": a.center.u, "cv": a.center.v, "hu": a.half_extent[0], "hv": a.half_extent[1]}
        for a in areas
    ]
    return doc


def save_layout(
    path: str | os.PathLike,
    targets: Sequence[Target],
    areas: Sequence[Area],
    extra: dict | None = None,
) -> None:
    """Write a layout document atomically (write-then-rename)."""
    doc = layout_document(targets, areas, extra)
    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_into(
    path: str | os.PathLike, targets: TargetRegistry, areas: AreaRegistry
) -> tuple[int, int]:
    """Atomically replace both registries from a layout file."""
    loaded_targets, loaded_areas = load_layout(path)
    targets.replace_all(loaded_targets)
    areas.replace_all(loaded_areas)
    return len(loaded_targets), len(loaded_areas)
