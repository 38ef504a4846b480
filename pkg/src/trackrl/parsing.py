"""Parsing and validation of model rollouts.

A rollout is expected to carry its reasoning inside a ``<think>`` block
followed by box predictions inside an ``<answer>`` block. The answer body
is a JSON array of records, single-object::

    [{"frame": 1, "bbox": [x1, y1, x2, y2]}, ...]

or multi-object with an ``object_id`` between ``frame`` and ``bbox``. This
module validates the tag structure, parses the answer strictly, recovers
fields from slightly malformed answers with a documented regex fallback,
and computes the two binary format rewards.

Parsing is total: no input text raises. Strict parsing requires the exact
JSON shape above (keys ``frame``/``bbox`` plus optional ``object_id``,
integer frame >= 0, four finite coordinates with x1 <= x2 and y1 <= y2).
The fallback locates ``frame``, optional ``object_id``, and ``bbox`` (or
``bbox_2d``) key tokens followed by numeric payloads, tolerant of quote
style, whitespace, missing or ``=`` separators, trailing commas, and
swapped corners. Fallback runs
on the answer block when one exists, otherwise on the whole text.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass

from .geometry import BBox

# A rollout arrives as the raw generated string; no wrapper type needed.
RawRollout = str

PARSE_STRICT = "strict"
PARSE_FALLBACK = "fallback"
PARSE_FAILED = "failed"

THINK_OPEN = "<think>"
THINK_CLOSE = "</think>"
ANSWER_OPEN = "<answer>"
ANSWER_CLOSE = "</answer>"

_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_FRAME_RE = re.compile(r"""["']?\bframe\b["']?\s*[:=]?\s*["']?(-?\d+)""")
_OBJECT_ID_RE = re.compile(r"""["']?\bobject_id\b["']?\s*[:=]?\s*["']?(-?\d+)""")
_BBOX_RE = re.compile(
    r"""["']?\bbbox(?:_2d)?\b["']?\s*[:=]?\s*[\[\(]\s*({n})\s*,\s*({n})\s*,\s*({n})\s*,\s*({n})""".format(n=_NUM)
)


@dataclass(frozen=True)
class FramePrediction:
    """One predicted box: frame index, optional identity, corner-form box."""

    frame: int
    bbox: BBox
    object_id: int | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.frame, int) or isinstance(self.frame, bool):
            raise ValueError(f"frame must be an integer, got {self.frame!r}")
        if self.frame < 0:
            raise ValueError(f"frame must be >= 0, got {self.frame}")
        if self.object_id is not None and (
            not isinstance(self.object_id, int) or isinstance(self.object_id, bool)
        ):
            raise ValueError(f"object_id must be an integer, got {self.object_id!r}")
        if not isinstance(self.bbox, BBox):
            raise ValueError(f"bbox must be a BBox, got {type(self.bbox).__name__}")


@dataclass(frozen=True)
class ParsedRollout:
    """A rollout decomposed into reasoning, predictions, and validity flags."""

    reasoning: str | None
    predictions: tuple[FramePrediction, ...]
    think_format_valid: bool
    answer_format_valid: bool
    parse_mode: str


def _single_block(text: str, open_tag: str, close_tag: str) -> tuple[str | None, int, int]:
    """Content of a uniquely-occurring, well-ordered tag pair.

    Returns (content, open_pos, close_pos); content is None when the pair
    is absent, repeated, or inverted.
    """
    if text.count(open_tag) != 1 or text.count(close_tag) != 1:
        return None, -1, -1
    i = text.index(open_tag)
    j = text.index(close_tag)
    if i + len(open_tag) > j:
        return None, -1, -1
    return text[i + len(open_tag) : j], i, j


def _strict_parse(answer_text: str) -> list[FramePrediction] | None:
    """Parse the answer body against the exact JSON schema; None on any deviation."""
    try:
        data = json.loads(answer_text)
    except (json.JSONDecodeError, RecursionError):
        return None
    if not isinstance(data, list):
        return None
    preds: list[FramePrediction] = []
    for item in data:
        if not isinstance(item, dict):
            return None
        keys = set(item)
        if keys != {"frame", "bbox"} and keys != {"frame", "object_id", "bbox"}:
            return None
        frame = item["frame"]
        if isinstance(frame, bool) or not isinstance(frame, int) or frame < 0:
            return None
        object_id = item.get("object_id")
        if object_id is not None and (
            isinstance(object_id, bool) or not isinstance(object_id, int)
        ):
            return None
        coords = item["bbox"]
        if not isinstance(coords, list) or len(coords) != 4:
            return None
        vals: list[float] = []
        for c in coords:
            if isinstance(c, bool) or not isinstance(c, (int, float)) or not math.isfinite(c):
                return None
            vals.append(float(c))
        # The format defines (x1, y1) as the top-left corner; reversed
        # corners are not the documented shape and drop to the fallback.
        if vals[2] < vals[0] or vals[3] < vals[1]:
            return None
        preds.append(
            FramePrediction(frame=frame, object_id=object_id, bbox=BBox(*vals))
        )
    return preds


def _fallback_parse(text: str) -> list[FramePrediction]:
    """Regex recovery of frame / object_id / bbox fields from malformed text.

    The text is segmented at each ``frame`` key occurrence; within a
    segment the first ``object_id`` and ``bbox`` payloads are taken.
    Segments without a usable box, or with out-of-contract values, are
    dropped rather than raising.
    """
    frame_hits = list(_FRAME_RE.finditer(text))
    preds: list[FramePrediction] = []
    for idx, hit in enumerate(frame_hits):
        seg_end = frame_hits[idx + 1].start() if idx + 1 < len(frame_hits) else len(text)
        segment = text[hit.end() : seg_end]
        box_hit = _BBOX_RE.search(segment)
        if box_hit is None:
            continue
        oid_hit = _OBJECT_ID_RE.search(segment, 0, box_hit.start())
        try:
            coords = [float(g) for g in box_hit.groups()]
            if not all(math.isfinite(c) for c in coords):
                continue
            preds.append(
                FramePrediction(
                    frame=int(hit.group(1)),
                    object_id=int(oid_hit.group(1)) if oid_hit else None,
                    bbox=BBox.from_corners(*coords),
                )
            )
        except ValueError:
            continue
    return preds


def parse_rollout(raw: RawRollout) -> ParsedRollout:
    """Decompose a raw rollout into reasoning, predictions, and format flags.

    Tag validation is independent of answer parsing: a missing think block
    does not prevent box recovery, and vice versa.
    """
    text = raw if isinstance(raw, str) else str(raw)
    reasoning, t_open, t_close = _single_block(text, THINK_OPEN, THINK_CLOSE)
    answer, a_open, a_close = _single_block(text, ANSWER_OPEN, ANSWER_CLOSE)
    think_valid = (
        reasoning is not None
        and answer is not None
        and t_close + len(THINK_CLOSE) <= a_open
    )

    if answer is not None:
        preds = _strict_parse(answer)
        if preds is not None:
            mode = PARSE_STRICT
        else:
            preds = _fallback_parse(answer)
            mode = PARSE_FALLBACK if preds else PARSE_FAILED
    else:
        preds = _fallback_parse(text)
        mode = PARSE_FALLBACK if preds else PARSE_FAILED

    return ParsedRollout(
        reasoning=reasoning,
        predictions=tuple(preds),
        think_format_valid=think_valid,
        answer_format_valid=mode == PARSE_STRICT,
        parse_mode=mode,
    )


def thinking_format_reward(p: ParsedRollout) -> float:
    """1.0 iff the think block is valid and an answer block is present and well-nested."""
    return 1.0 if p.think_format_valid else 0.0


def answer_format_reward(p: ParsedRollout) -> float:
    """1.0 iff the answer body parsed strictly; fallback recoveries earn 0.0."""
    return 1.0 if p.parse_mode == PARSE_STRICT else 0.0


def serialize_predictions(preds: list[FramePrediction] | tuple[FramePrediction, ...],
                          multi_object: bool = False) -> str:
    """Emit the exact answer wire format.

    Keys appear in the order frame, object_id, bbox; object_id is included
    iff ``multi_object``; separators are a comma or colon followed by a
    single space. The output re-parses strictly to an equal value.
    """
    records = []
    for p in preds:
        if multi_object:
            if p.object_id is None:
                raise ValueError(
                    f"multi-object serialization requires object_id on every "
                    f"prediction (frame {p.frame} has none)"
                )
            records.append(
                {"frame": p.frame, "object_id": p.object_id, "bbox": list(p.bbox.as_tuple())}
            )
        else:
            records.append({"frame": p.frame, "bbox": list(p.bbox.as_tuple())})
    return json.dumps(records, separators=(", ", ": "))


def format_rollout(reasoning: str, preds: list[FramePrediction] | tuple[FramePrediction, ...],
                   multi_object: bool = False) -> str:
    """Render a full well-formed rollout string (fixtures and simulations)."""
    answer = serialize_predictions(preds, multi_object=multi_object)
    return f"{THINK_OPEN}{reasoning}{THINK_CLOSE}\n{ANSWER_OPEN}{answer}{ANSWER_CLOSE}"
