"""Benchmark construction from MOTChallenge-format ground truth.

Ingests ``gt.txt`` annotations (frame,id,x,y,w,h,conf,class,visibility),
slides reference frames over each sequence to cut 5-6 future-frame
instances per query kind, partitions sequences into disjoint splits, and
exports predictions back to the MOT field order for external tooling.
Construction is a pure function of (detections, config, seed).
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .geometry import BBox, BBoxXYWH, xywh_to_xyxy, xyxy_to_xywh
from .instances import QueryInstance
from .queries import template_query
from .tracks import Trajectory

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MotDetection:
    frame: int
    object_id: int
    box: BBoxXYWH
    confidence: float
    class_id: int
    visibility: float

    def __post_init__(self) -> None:
        if self.frame < 1:
            raise ValueError(f"frame must be >= 1, got {self.frame}")
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError(f"visibility must lie in [0, 1], got {self.visibility}")

    @property
    def ignorable(self) -> bool:
        """MOT convention: confidence 0 marks rows to exclude from evaluation."""
        return self.confidence == 0


@dataclass(frozen=True)
class BuilderConfig:
    """Eligibility thresholds and sampling knobs for instance construction."""

    min_visibility: float = 0.5
    occlusion_reference_max_visibility: float = 0.3
    occlusion_future_min_visibility: float = 0.7
    reference_stride: int = 1
    max_instances_per_sequence: int | None = None

    def __post_init__(self) -> None:
        if self.reference_stride < 1:
            raise ValueError(f"reference_stride must be >= 1, got {self.reference_stride}")
        if self.max_instances_per_sequence is not None and self.max_instances_per_sequence < 1:
            raise ValueError("max_instances_per_sequence must be >= 1 when set")


@dataclass(frozen=True)
class SplitManifest:
    train_sequences: tuple[str, ...]
    test_sequences: tuple[str, ...]
    train_instances: int = 0
    test_instances: int = 0

    def __post_init__(self) -> None:
        overlap = set(self.train_sequences) & set(self.test_sequences)
        if overlap:
            raise ValueError(f"splits overlap on sequences: {sorted(overlap)}")


def parse_mot_ground_truth(path: str | Path) -> list[MotDetection]:
    """Read a gt.txt file; malformed lines fail with their line number."""
    detections = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) != 9:
                raise ValueError(
                    f"{path}:{lineno}: expected 9 comma-separated fields, got {len(fields)}"
                )
            try:
                det = MotDetection(
                    frame=int(fields[0]),
                    object_id=int(fields[1]),
                    box=BBoxXYWH(float(fields[2]), float(fields[3]),
                                 float(fields[4]), float(fields[5])),
                    confidence=float(fields[6]),
                    class_id=int(fields[7]),
                    visibility=float(fields[8]),
                )
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
            if det.ignorable:
                logger.debug("%s:%d: confidence-0 row retained but ignorable", path, lineno)
            detections.append(det)
    return detections


def _index_detections(
    detections: Iterable[MotDetection],
) -> dict[int, dict[int, MotDetection]]:
    """object_id -> frame -> detection; ignorable rows are dropped."""
    index: dict[int, dict[int, MotDetection]] = {}
    for det in detections:
        if det.ignorable:
            continue
        index.setdefault(det.object_id, {})[det.frame] = det
    return index


def _feasible_lengths(frames: set[int], ref: int, window: tuple[int, int]) -> list[int]:
    """Window lengths whose future frames ref+1..ref+L are all annotated."""
    lo, hi = window
    lengths = []
    for length in range(lo, hi + 1):
        if all(ref + k in frames for k in range(1, length + 1)):
            lengths.append(length)
    return lengths


def _instance_id(sequence_id: str, kind: str, ref: int, oids: Sequence[int]) -> str:
    tag = "-".join(str(o) for o in oids)
    return f"{sequence_id}-{kind}-f{ref:05d}-o{tag}"


def _make_instance(sequence_id: str, kind: str, ref: int, length: int,
                   oids: Sequence[int],
                   index: Mapping[int, Mapping[int, MotDetection]]) -> QueryInstance:
    future = tuple(range(ref + 1, ref + length + 1))
    reference_boxes = {
        oid: xywh_to_xyxy(index[oid][ref].box) for oid in oids
    }
    trajectories = {
        oid: Trajectory(oid, {f: xywh_to_xyxy(index[oid][f].box) for f in future})
        for oid in oids
    }
    draft = QueryInstance(
        instance_id=_instance_id(sequence_id, kind, ref, sorted(oids)),
        source_sequence=sequence_id,
        query_text="",
        query_kind=kind,
        reference_frame=ref,
        reference_boxes=reference_boxes,
        future_frames=future,
        gt_trajectories=trajectories,
    )
    return replace(draft, query_text=template_query(draft))


def build_instances(detections: Iterable[MotDetection], sequence_id: str, *,
                    query_kind: str = "single", rng_seed: int = 0,
                    window: tuple[int, int] = (5, 6),
                    config: BuilderConfig | None = None) -> list[QueryInstance]:
    """Cut query instances of one kind from a sequence's annotations.

    Reference frames must show the target(s) at eligible visibility and
    every future frame must carry the target's box. Occlusion instances
    need a mostly-hidden reference and clear visibility later in the
    window. Deterministic for a given seed; output sorted by instance id.
    """
    config = config or BuilderConfig()
    lo, hi = window
    if not (5 <= lo <= hi <= 6):
        raise ValueError(f"window must lie within 5..6, got {window}")
    if query_kind not in ("single", "multi", "occlusion"):
        raise ValueError(f"unknown query_kind: {query_kind!r}")

    rng = random.Random(rng_seed)
    index = _index_detections(detections)
    instances: list[QueryInstance] = []

    if query_kind in ("single", "occlusion"):
        for oid in sorted(index):
            per_frame = index[oid]
            frames = set(per_frame)
            for ref in sorted(per_frame)[:: config.reference_stride]:
                lengths = _feasible_lengths(frames, ref, window)
                vis_ref = per_frame[ref].visibility
                if query_kind == "single":
                    if vis_ref < config.min_visibility:
                        continue
                else:
                    if vis_ref >= config.occlusion_reference_max_visibility:
                        continue
                    lengths = [
                        length for length in lengths
                        if max(per_frame[ref + k].visibility for k in range(1, length + 1))
                        > config.occlusion_future_min_visibility
                    ]
                if not lengths:
                    continue
                length = rng.choice(lengths)
                instances.append(
                    _make_instance(sequence_id, query_kind, ref, length, [oid], index)
                )
    else:
        all_frames = sorted({f for per_frame in index.values() for f in per_frame})
        for ref in all_frames[:: config.reference_stride]:
            visible = [
                oid for oid in sorted(index)
                if ref in index[oid]
                and index[oid][ref].visibility >= config.min_visibility
            ]
            lengths = []
            for length in range(lo, hi + 1):
                covering = [
                    oid for oid in visible
                    if all(ref + k in index[oid] for k in range(1, length + 1))
                ]
                if len(covering) >= 2:
                    lengths.append((length, covering))
            if not lengths:
                continue
            length, oids = rng.choice(lengths)
            instances.append(
                _make_instance(sequence_id, "multi", ref, length, oids, index)
            )

    if not instances:
        logger.warning("%s: no eligible reference frames for kind %r",
                       sequence_id, query_kind)
    cap = config.max_instances_per_sequence
    if cap is not None and len(instances) > cap:
        instances = rng.sample(instances, cap)
    return sorted(instances, key=lambda inst: inst.instance_id)


def split_sequences(sequences: Iterable[str], ratio: float,
                    rng_seed: int = 0) -> SplitManifest:
    """Seed-deterministic disjoint partition at the sequence level."""
    pool = sorted(set(sequences))
    if len(pool) < 2:
        raise ValueError(f"need at least 2 sequences to split, got {len(pool)}")
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"ratio must lie in [0, 1], got {ratio}")
    rng = random.Random(rng_seed)
    rng.shuffle(pool)
    n_train = round(ratio * len(pool))
    return SplitManifest(
        train_sequences=tuple(sorted(pool[:n_train])),
        test_sequences=tuple(sorted(pool[n_train:])),
    )


def _fmt_mot_value(v: float) -> str:
    return str(int(v)) if v == int(v) else repr(float(v))


def export_mot_segments(
    instances: Sequence[QueryInstance],
    predictions: Mapping[str, Mapping[int, Trajectory]],
    out_dir: str | Path,
) -> dict[str, Path]:
    """Write per-sequence MOT-format files for the predicted segments.

    Boxes convert back to (x, y, w, h); lines carry confidence 1, class 1,
    visibility 1.0 and sort by (frame, object id). Returns the written
    paths keyed by sequence id.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    by_sequence: dict[str, list[tuple[int, int, BBox]]] = {}
    for inst in instances:
        preds = predictions.get(inst.instance_id)
        if preds is None:
            continue
        rows = by_sequence.setdefault(inst.source_sequence, [])
        for oid in sorted(preds):
            for frame, box in preds[oid].boxes.items():
                rows.append((frame, oid, box))

    written: dict[str, Path] = {}
    for sequence in sorted(by_sequence):
        path = out / f"{sequence}.txt"
        lines = []
        for frame, oid, box in sorted(by_sequence[sequence], key=lambda r: (r[0], r[1])):
            xywh = xyxy_to_xywh(box)
            lines.append(
                ",".join(
                    [str(frame), str(oid)]
                    + [_fmt_mot_value(v) for v in xywh.as_tuple()]
                    + ["1", "1", "1.0"]
                )
            )
        path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
        written[sequence] = path
    return written


def discover_sequences(root: str | Path) -> dict[str, Path]:
    """Map sequence id -> gt.txt under the layout ``<root>/<seq>/gt/gt.txt``."""
    root = Path(root)
    found = {}
    for gt in sorted(root.glob("*/gt/gt.txt")):
        found[gt.parent.parent.name] = gt
    if not found:
        raise ValueError(f"no <sequence>/gt/gt.txt files under {root}")
    return found
