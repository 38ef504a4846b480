"""Unified per-rollout reward: format + matched spatial + motion consistency.

The spatial reward scores each predicted/ground-truth box pair with three
binary components (IoU above threshold, mean corner L1 below threshold,
keypoint distance below threshold with the predicted point inside the
predicted box), Hungarian-matches the pair matrix via cost = 3 - R, and
normalizes the matched sum by max(M, N). The motion reward scores each
frame transition as direction alignment * Gaussian speed consistency *
anti-static penalty, where both motion vectors are anchored at the
previous ground-truth center.

Keypoints are box centers on both sides unless callers supply their own:
boxes are the only geometry the data model defines, so centers stand in
for the otherwise-unspecified keypoints.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .assignment import hungarian
from .geometry import (
    BBox,
    Point,
    center,
    displacement,
    euclidean,
    iou,
    mean_l1,
    point_in_box,
)
from .instances import QueryInstance
from .parsing import (
    PARSE_FAILED,
    ParsedRollout,
    answer_format_reward,
    thinking_format_reward,
)
from .tracks import Trajectory

logger = logging.getLogger(__name__)

# Identity key for predictions that carry no object_id (single-object mode).
_ANONYMOUS_ID = -1


@dataclass(frozen=True)
class RewardConfig:
    """Thresholds and shaping constants for all reward components."""

    iou_threshold: float = 0.5
    l1_threshold: float = 10.0
    point_threshold: float = 30.0
    alpha: float = 0.9
    static_epsilon: float = 1.0
    anti_static_ratio: float = 0.1
    anti_static_penalty: float = 0.2
    iou_only: bool = False
    numeric_epsilon: float = 1e-8

    def __post_init__(self) -> None:
        for name in ("iou_threshold", "l1_threshold", "point_threshold",
                     "static_epsilon", "anti_static_ratio", "numeric_epsilon"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.5 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0.5, 1.0], got {self.alpha}")
        if not 0.0 < self.anti_static_penalty <= 1.0:
            raise ValueError(
                f"anti_static_penalty must lie in (0, 1], got {self.anti_static_penalty}"
            )

    @property
    def pair_max(self) -> float:
        return 1.0 if self.iou_only else 3.0


@dataclass(frozen=True)
class RewardBreakdown:
    """Per-rollout components; total is always their sum."""

    thinking_format: float
    answer_format: float
    spatial: float
    mcp: float
    total: float = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "total",
            self.thinking_format + self.answer_format + self.spatial + self.mcp,
        )


def pair_reward(pred: BBox, gt: BBox, cfg: RewardConfig | None = None, *,
                pred_point: Point | None = None,
                gt_point: Point | None = None) -> float:
    """Three-component binary reward for one box pair, in {0, 1, 2, 3}.

    With ``cfg.iou_only`` set, only the IoU component is scored (range {0, 1}).
    """
    cfg = cfg or RewardConfig()
    r = 1.0 if iou(pred, gt) > cfg.iou_threshold else 0.0
    if cfg.iou_only:
        return r
    if mean_l1(pred, gt) < cfg.l1_threshold:
        r += 1.0
    p = pred_point if pred_point is not None else center(pred)
    q = gt_point if gt_point is not None else center(gt)
    if euclidean(p, q) < cfg.point_threshold and point_in_box(p, pred):
        r += 1.0
    return r


def spatial_reward(preds: Sequence[BBox], gts: Sequence[BBox],
                   cfg: RewardConfig | None = None) -> float:
    """Hungarian-matched pair rewards normalized by max(M, N).

    Both lists empty is vacuously perfect (full marks); exactly one empty
    is a total miss (0.0).
    """
    cfg = cfg or RewardConfig()
    if not preds and not gts:
        return cfg.pair_max
    if not preds or not gts:
        return 0.0
    rewards = [[pair_reward(p, g, cfg) for g in gts] for p in preds]
    costs = [[cfg.pair_max - r for r in row] for row in rewards]
    matching = hungarian(costs)
    matched = sum(rewards[i][j] for i, j in matching.pairs)
    return matched / max(len(preds), len(gts))


def _direction_alignment(dp, dg, eps: float) -> float:
    if dp.dx == dg.dx and dp.dy == dg.dy:
        return 1.0  # identical vectors align exactly; skip the guarded division
    cos = dp.dot(dg) / (dp.norm() * dg.norm() + eps)
    cos = max(-1.0, min(1.0, cos))
    return (1.0 + cos) / 2.0


def mcp_step_reward(gt_prev: BBox, gt_cur: BBox, pred_cur: BBox,
                    cfg: RewardConfig | None = None) -> float:
    """Motion-consistency reward for one frame transition, in [0, 1].

    Both the ground-truth and the predicted motion vector are anchored at
    the previous ground-truth center. Nearly static ground truth (motion
    below ``static_epsilon``) is not judged and scores 1.0.
    """
    cfg = cfg or RewardConfig()
    anchor = center(gt_prev)
    dg = displacement(anchor, center(gt_cur))
    dp = displacement(anchor, center(pred_cur))
    v_gt = dg.norm()
    if v_gt < cfg.static_epsilon:
        return 1.0
    v_pred = dp.norm()
    a = _direction_alignment(dp, dg, cfg.numeric_epsilon)
    s = math.exp(-((v_pred - v_gt) ** 2) / (2.0 * (cfg.alpha * v_gt) ** 2))
    p = cfg.anti_static_penalty if v_pred < cfg.anti_static_ratio * v_gt else 1.0
    return a * s * p


def mcp_trajectory_reward(gt: Trajectory, pred: Trajectory,
                          cfg: RewardConfig | None = None) -> float:
    """Mean step reward over consecutive common-frame transitions.

    Frames present on only one side are skipped. Fewer than two common
    frames leaves no transition to score and yields 0.0.
    """
    cfg = cfg or RewardConfig()
    common = gt.common_frames(pred)
    if len(common) < 2:
        logger.warning(
            "trajectory pair (gt %s, pred %s) shares %d frame(s); "
            "motion reward is 0.0",
            gt.object_id, pred.object_id, len(common),
        )
        return 0.0
    steps = [
        mcp_step_reward(gt.boxes[prev], gt.boxes[cur], pred.boxes[cur], cfg)
        for prev, cur in zip(common, common[1:])
    ]
    return sum(steps) / len(steps)


def _predictions_by_identity(rollout: ParsedRollout,
                             window: set[int]) -> dict[int, Trajectory]:
    """Group in-window predictions into per-identity trajectories.

    Predictions without an object_id share one anonymous identity. The
    first prediction wins when a frame repeats within an identity.
    """
    grouped: dict[int, dict[int, BBox]] = {}
    for p in rollout.predictions:
        if p.frame not in window:
            continue
        key = p.object_id if p.object_id is not None else _ANONYMOUS_ID
        grouped.setdefault(key, {})
        if p.frame not in grouped[key]:
            grouped[key][p.frame] = p.bbox
    return {oid: Trajectory(oid, boxes) for oid, boxes in sorted(grouped.items())}


def _match_identities(pred_trajs: Mapping[int, Trajectory],
                      gt_trajs: Mapping[int, Trajectory],
                      cfg: RewardConfig) -> list[tuple[Trajectory, Trajectory]]:
    """Hungarian pairing of predicted to ground-truth identities.

    Pair cost is pair_max minus the mean per-frame pair reward over common
    frames; pairs with no common frames cost more than any scoreable pair.
    """
    preds = [pred_trajs[k] for k in sorted(pred_trajs)]
    gts = [gt_trajs[k] for k in sorted(gt_trajs)]
    no_overlap_cost = cfg.pair_max + 1.0
    costs = []
    for pt in preds:
        row = []
        for gt in gts:
            common = gt.common_frames(pt)
            if not common:
                row.append(no_overlap_cost)
                continue
            mean_r = sum(
                pair_reward(pt.boxes[f], gt.boxes[f], cfg) for f in common
            ) / len(common)
            row.append(cfg.pair_max - mean_r)
        costs.append(row)
    matching = hungarian(costs)
    return [(preds[i], gts[j]) for i, j in matching.pairs]


def score_rollout(rollout: ParsedRollout, instance: QueryInstance,
                  cfg: RewardConfig | None = None) -> RewardBreakdown:
    """All four reward components for one rollout against one instance.

    Spatial terms are matched per future frame; motion terms are computed
    per Hungarian-matched identity and normalized by the larger identity
    count. Predictions outside the instance window are ignored. A failed
    parse zeroes the spatial and motion components.
    """
    cfg = cfg or RewardConfig()
    thinking = thinking_format_reward(rollout)
    answer = answer_format_reward(rollout)
    if rollout.parse_mode == PARSE_FAILED:
        return RewardBreakdown(thinking, answer, 0.0, 0.0)

    window = set(instance.future_frames)
    gt_trajs = instance.gt_trajectories

    per_frame = []
    for f in instance.future_frames:
        pred_boxes = [p.bbox for p in rollout.predictions if p.frame == f]
        gt_boxes = [t.boxes[f] for _, t in sorted(gt_trajs.items()) if f in t.boxes]
        per_frame.append(spatial_reward(pred_boxes, gt_boxes, cfg))
    spatial = sum(per_frame) / len(per_frame)

    pred_trajs = _predictions_by_identity(rollout, window)
    if not pred_trajs or not gt_trajs:
        mcp = 0.0
    else:
        matched = _match_identities(pred_trajs, gt_trajs, cfg)
        total = sum(mcp_trajectory_reward(gt, pred, cfg) for pred, gt in matched)
        mcp = total / max(len(pred_trajs), len(gt_trajs))

    return RewardBreakdown(thinking, answer, spatial, mcp)
