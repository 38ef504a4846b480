"""Benchmark instances: reference-frame grounding plus future-frame supervision.

An instance pairs a natural-language query with explicit reference boxes
and the ground-truth trajectories over a short window of 5 or 6 future
frames. Records serialize to JSON with a strict schema: unknown or
missing fields are rejected by name, and serialize/deserialize round-trip
to equal values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .geometry import BBox
from .tracks import Trajectory

QUERY_KINDS = ("single", "multi", "occlusion")

_RECORD_FIELDS = (
    "instance_id",
    "source_sequence",
    "query_text",
    "query_kind",
    "reference_frame",
    "reference_boxes",
    "future_frames",
    "gt_trajectories",
)


@dataclass(frozen=True)
class QueryInstance:
    instance_id: str
    source_sequence: str
    query_text: str
    query_kind: str
    reference_frame: int
    reference_boxes: Mapping[int, BBox]
    future_frames: tuple[int, ...]
    gt_trajectories: Mapping[int, Trajectory] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.query_kind not in QUERY_KINDS:
            raise ValueError(
                f"query_kind must be one of {QUERY_KINDS}, got {self.query_kind!r}"
            )
        frames = tuple(int(f) for f in self.future_frames)
        if len(frames) not in (5, 6):
            raise ValueError(
                f"future_frames must hold 5 or 6 frames, got {len(frames)}"
            )
        if list(frames) != sorted(set(frames)):
            raise ValueError("future_frames must be strictly increasing")
        object.__setattr__(self, "future_frames", frames)
        object.__setattr__(self, "reference_boxes", dict(self.reference_boxes))
        object.__setattr__(self, "gt_trajectories", dict(self.gt_trajectories))
        window = set(frames)
        for oid, traj in self.gt_trajectories.items():
            if oid not in self.reference_boxes:
                raise ValueError(f"object {oid} has a trajectory but no reference box")
            if traj.object_id != oid:
                raise ValueError(
                    f"trajectory keyed {oid} carries object_id {traj.object_id}"
                )
            extra = set(traj.frames) - window
            if extra:
                raise ValueError(
                    f"object {oid} trajectory covers frames outside the window: {sorted(extra)}"
                )

    @property
    def object_ids(self) -> tuple[int, ...]:
        return tuple(sorted(self.gt_trajectories))


def _box_to_list(b: BBox) -> list[float]:
    return [b.x1, b.y1, b.x2, b.y2]


def _box_from_list(v, where: str) -> BBox:
    if not isinstance(v, list) or len(v) != 4:
        raise ValueError(f"{where}: expected a 4-element box list, got {v!r}")
    return BBox(*(float(c) for c in v))


def instance_to_record(inst: QueryInstance) -> dict:
    """Plain-JSON form of an instance (object ids become string keys)."""
    return {
        "instance_id": inst.instance_id,
        "source_sequence": inst.source_sequence,
        "query_text": inst.query_text,
        "query_kind": inst.query_kind,
        "reference_frame": inst.reference_frame,
        "reference_boxes": {
            str(oid): _box_to_list(box)
            for oid, box in sorted(inst.reference_boxes.items())
        },
        "future_frames": list(inst.future_frames),
        "gt_trajectories": {
            str(oid): [
                {"frame": f, "bbox": _box_to_list(b)} for f, b in traj.boxes.items()
            ]
            for oid, traj in sorted(inst.gt_trajectories.items())
        },
    }


def instance_from_record(record: dict) -> QueryInstance:
    """Strict inverse of :func:`instance_to_record`."""
    if not isinstance(record, dict):
        raise ValueError(f"instance record must be an object, got {type(record).__name__}")
    unknown = set(record) - set(_RECORD_FIELDS)
    if unknown:
        raise ValueError(f"unknown instance field: {sorted(unknown)[0]}")
    missing = set(_RECORD_FIELDS) - set(record)
    if missing:
        raise ValueError(f"missing instance field: {sorted(missing)[0]}")

    reference_boxes = {
        int(oid): _box_from_list(box, f"reference_boxes[{oid}]")
        for oid, box in record["reference_boxes"].items()
    }
    trajectories: dict[int, Trajectory] = {}
    for oid_str, entries in record["gt_trajectories"].items():
        oid = int(oid_str)
        boxes: dict[int, BBox] = {}
        for entry in entries:
            if set(entry) != {"frame", "bbox"}:
                raise ValueError(
                    f"gt_trajectories[{oid_str}]: entries must have exactly "
                    f"'frame' and 'bbox' fields, got {sorted(entry)}"
                )
            boxes[int(entry["frame"])] = _box_from_list(
                entry["bbox"], f"gt_trajectories[{oid_str}]"
            )
        trajectories[oid] = Trajectory(oid, boxes)

    return QueryInstance(
        instance_id=str(record["instance_id"]),
        source_sequence=str(record["source_sequence"]),
        query_text=str(record["query_text"]),
        query_kind=str(record["query_kind"]),
        reference_frame=int(record["reference_frame"]),
        reference_boxes=reference_boxes,
        future_frames=tuple(int(f) for f in record["future_frames"]),
        gt_trajectories=trajectories,
    )


def save_instances(path: str | Path, instances: Iterable[QueryInstance]) -> None:
    """One JSON record per line, in the given order."""
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps(instance_to_record(inst), separators=(",", ":")))
            fh.write("\n")


def load_instances(path: str | Path) -> list[QueryInstance]:
    instances = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                instances.append(instance_from_record(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad instance record: {exc}") from exc
    return instances
