"""Trajectories: one object identity's ordered frame-to-box mapping."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .geometry import BBox


@dataclass(frozen=True)
class Trajectory:
    """Boxes of a single identity keyed by frame index (strictly increasing)."""

    object_id: int
    boxes: Mapping[int, BBox] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not isinstance(self.object_id, int) or isinstance(self.object_id, bool):
            raise ValueError(f"object_id must be an integer, got {self.object_id!r}")
        ordered: dict[int, BBox] = {}
        for frame in sorted(self.boxes):
            if not isinstance(frame, int) or isinstance(frame, bool):
                raise ValueError(f"frame index must be an integer, got {frame!r}")
            box = self.boxes[frame]
            if not isinstance(box, BBox):
                raise ValueError(f"frame {frame}: expected BBox, got {type(box).__name__}")
            ordered[frame] = box
        object.__setattr__(self, "boxes", ordered)

    @property
    def frames(self) -> tuple[int, ...]:
        return tuple(self.boxes)

    def __len__(self) -> int:
        return len(self.boxes)

    def box_at(self, frame: int) -> BBox:
        return self.boxes[frame]

    def common_frames(self, other: "Trajectory") -> tuple[int, ...]:
        """Frames present in both trajectories, ascending."""
        mine = set(self.boxes)
        return tuple(f for f in other.boxes if f in mine)

    def restricted(self, frames: Iterable[int]) -> "Trajectory":
        keep = set(frames)
        return Trajectory(self.object_id, {f: b for f, b in self.boxes.items() if f in keep})
