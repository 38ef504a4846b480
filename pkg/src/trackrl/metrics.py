"""Trajectory evaluation metrics and corpus aggregation.

The motion-consistency metric differs from the reward on purpose: here
the predicted motion vector runs between consecutive *predicted* centers
(the reward anchors both vectors at the previous ground-truth center),
and no anti-static factor is applied. Center location error, a
diagonal-normalized distance error, threshold-matched mean IoU, and
CLEAR-style MOTA complete the suite.

Per-trajectory metrics that are undefined for a pair (too few common
frames) are skipped and flagged rather than scored, and corpus values are
uniform means over per-instance values, independent of input order.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .assignment import hungarian
from .geometry import center, displacement, euclidean, iou
from .instances import QueryInstance
from .tracks import Trajectory

logger = logging.getLogger(__name__)

_UNMATCHABLE_COST = 1e9

_METRIC_FIELDS = ("mcp", "motp", "cle_px", "nde", "mota")


@dataclass(frozen=True)
class MetricConfig:
    alpha: float = 0.9
    static_epsilon: float = 1.0
    iou_match_threshold: float = 0.5
    numeric_epsilon: float = 1e-8

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        for name in ("static_epsilon", "iou_match_threshold", "numeric_epsilon"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class InstanceMetrics:
    """Per-instance metric values; None marks an undefined (skipped) field."""

    instance_id: str
    source_sequence: str
    mcp: float | None
    motp: float | None
    cle_px: float | None
    nde: float | None
    mota: float | None
    frames_evaluated: int
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class MetricReport:
    """Corpus means over instances plus the per-instance breakdown."""

    mcp: float | None
    motp: float | None
    cle_px: float | None
    nde: float | None
    mota: float | None
    frames_evaluated: int
    per_sequence: tuple[InstanceMetrics, ...]

    @property
    def instances(self) -> int:
        return len(self.per_sequence)


def _fast_path_identical(dp, dg) -> bool:
    return dp.dx == dg.dx and dp.dy == dg.dy


def mcp_metric(gt: Trajectory, pred: Trajectory,
               cfg: MetricConfig | None = None) -> float | None:
    """Mean direction*speed consistency over common-frame transitions.

    Predicted motion is measured between consecutive predicted centers.
    Transitions with nearly static ground truth contribute 1.0. Returns
    None (undefined) when fewer than two common frames exist.
    """
    cfg = cfg or MetricConfig()
    common = gt.common_frames(pred)
    if len(common) < 2:
        logger.warning(
            "object %s: %d common frame(s); motion metric undefined",
            gt.object_id, len(common),
        )
        return None
    steps = []
    for prev, cur in zip(common, common[1:]):
        dg = displacement(center(gt.boxes[prev]), center(gt.boxes[cur]))
        v_gt = dg.norm()
        if v_gt < cfg.static_epsilon:
            steps.append(1.0)
            continue
        dp = displacement(center(pred.boxes[prev]), center(pred.boxes[cur]))
        if _fast_path_identical(dp, dg):
            steps.append(1.0)
            continue
        cos = dp.dot(dg) / (dp.norm() * v_gt + cfg.numeric_epsilon)
        a = (1.0 + max(-1.0, min(1.0, cos))) / 2.0
        v_pred = dp.norm()
        s = math.exp(-((v_pred - v_gt) ** 2) / (2.0 * (cfg.alpha * v_gt) ** 2))
        steps.append(a * s)
    return sum(steps) / len(steps)


def cle(gt: Trajectory, pred: Trajectory) -> float | None:
    """Mean center distance in pixels over common frames; None if none."""
    common = gt.common_frames(pred)
    if not common:
        logger.warning("object %s: no common frames; CLE undefined", gt.object_id)
        return None
    dists = [euclidean(center(gt.boxes[f]), center(pred.boxes[f])) for f in common]
    return sum(dists) / len(dists)


def motp(gt: Trajectory, pred: Trajectory,
         cfg: MetricConfig | None = None) -> float | None:
    """Mean IoU over common frames that clear the match threshold.

    0.0 when common frames exist but none match; None when there are no
    common frames at all.
    """
    cfg = cfg or MetricConfig()
    common = gt.common_frames(pred)
    if not common:
        logger.warning("object %s: no common frames; MOTP undefined", gt.object_id)
        return None
    matched = [
        v for f in common
        if (v := iou(pred.boxes[f], gt.boxes[f])) >= cfg.iou_match_threshold
    ]
    if not matched:
        return 0.0
    return sum(matched) / len(matched)


def nde(gt: Trajectory, pred: Trajectory) -> float | None:
    """Center distance normalized by the ground-truth box diagonal, averaged.

    Frames whose ground-truth box has zero diagonal are skipped. None when
    nothing is evaluable.
    """
    common = gt.common_frames(pred)
    values = []
    for f in common:
        diag = gt.boxes[f].diagonal
        if diag <= 0.0:
            continue
        values.append(euclidean(center(gt.boxes[f]), center(pred.boxes[f])) / diag)
    if not values:
        logger.warning("object %s: no evaluable frames; NDE undefined", gt.object_id)
        return None
    return sum(values) / len(values)


def mota(gts: Sequence[Trajectory], preds: Sequence[Trajectory],
         cfg: MetricConfig | None = None) -> float:
    """CLEAR-style accuracy: 1 - (FN + FP + IDSW) / total ground-truth boxes.

    Per-frame Hungarian matching on IoU at the configured threshold;
    identity switches are counted against each ground-truth object's last
    matched prediction identity.
    """
    cfg = cfg or MetricConfig()
    gts = sorted(gts, key=lambda t: t.object_id)
    preds = sorted(preds, key=lambda t: t.object_id)
    total_gt = sum(len(t) for t in gts)
    if total_gt == 0:
        raise ValueError("MOTA is undefined without ground-truth detections")

    frames = sorted({f for t in gts for f in t.frames} | {f for t in preds for f in t.frames})
    fn = fp = idsw = 0
    last_match: dict[int, int] = {}
    for f in frames:
        gt_here = [t for t in gts if f in t.boxes]
        pred_here = [t for t in preds if f in t.boxes]
        matches: list[tuple[int, int]] = []
        if gt_here and pred_here:
            costs = []
            for g in gt_here:
                row = []
                for p in pred_here:
                    v = iou(p.boxes[f], g.boxes[f])
                    row.append(1.0 - v if v >= cfg.iou_match_threshold else _UNMATCHABLE_COST)
                costs.append(row)
            for i, j in hungarian(costs).pairs:
                if costs[i][j] < _UNMATCHABLE_COST:
                    matches.append((i, j))
        fn += len(gt_here) - len(matches)
        fp += len(pred_here) - len(matches)
        for i, j in matches:
            gid = gt_here[i].object_id
            pid = pred_here[j].object_id
            if gid in last_match and last_match[gid] != pid:
                idsw += 1
            last_match[gid] = pid
    return 1.0 - (fn + fp + idsw) / total_gt


def _mean_or_none(values: list[float]) -> float | None:
    if not values:
        return None
    return sum(values) / len(values)


def evaluate_instance(instance: QueryInstance,
                      predictions: Mapping[int, Trajectory],
                      cfg: MetricConfig | None = None) -> InstanceMetrics:
    """Metrics for one instance; prediction trajectories are keyed by object id.

    Identities without a predicted trajectory are flagged and excluded
    from the per-trajectory metrics (MOTA still counts their misses).
    """
    cfg = cfg or MetricConfig()
    flags: list[str] = []
    per_field: dict[str, list[float]] = {"mcp": [], "motp": [], "cle_px": [], "nde": []}
    frames_evaluated = 0

    for oid in sorted(instance.gt_trajectories):
        gt = instance.gt_trajectories[oid]
        pred = predictions.get(oid)
        if pred is None:
            flags.append(f"missing_prediction:{oid}")
            continue
        frames_evaluated += len(gt.common_frames(pred))
        for name, value in (
            ("mcp", mcp_metric(gt, pred, cfg)),
            ("motp", motp(gt, pred, cfg)),
            ("cle_px", cle(gt, pred)),
            ("nde", nde(gt, pred)),
        ):
            if value is None:
                flags.append(f"{name}_undefined:{oid}")
            else:
                per_field[name].append(value)

    gt_trajs = [instance.gt_trajectories[oid] for oid in sorted(instance.gt_trajectories)]
    pred_trajs = [predictions[k] for k in sorted(predictions)]
    if sum(len(t) for t in gt_trajs) > 0:
        mota_value = mota(gt_trajs, pred_trajs, cfg)
    else:
        mota_value = None
        flags.append("mota_undefined")

    return InstanceMetrics(
        instance_id=instance.instance_id,
        source_sequence=instance.source_sequence,
        mcp=_mean_or_none(per_field["mcp"]),
        motp=_mean_or_none(per_field["motp"]),
        cle_px=_mean_or_none(per_field["cle_px"]),
        nde=_mean_or_none(per_field["nde"]),
        mota=mota_value,
        frames_evaluated=frames_evaluated,
        flags=tuple(flags),
    )


def aggregate(per_instance: Sequence[InstanceMetrics]) -> MetricReport:
    """Uniform means over instances, deterministic regardless of input order."""
    ordered = tuple(sorted(per_instance, key=lambda m: m.instance_id))
    corpus: dict[str, float | None] = {}
    for name in _METRIC_FIELDS:
        corpus[name] = _mean_or_none(
            [getattr(m, name) for m in ordered if getattr(m, name) is not None]
        )
    return MetricReport(
        mcp=corpus["mcp"],
        motp=corpus["motp"],
        cle_px=corpus["cle_px"],
        nde=corpus["nde"],
        mota=corpus["mota"],
        frames_evaluated=sum(m.frames_evaluated for m in ordered),
        per_sequence=ordered,
    )


def evaluate_corpus(pairs: Sequence[tuple[QueryInstance, Mapping[int, Trajectory]]],
                    cfg: MetricConfig | None = None) -> MetricReport:
    """Evaluate (instance, predictions) pairs and aggregate uniformly."""
    cfg = cfg or MetricConfig()
    return aggregate([evaluate_instance(inst, preds, cfg) for inst, preds in pairs])


def _instance_record(m: InstanceMetrics) -> dict:
    return {
        "instance_id": m.instance_id,
        "source_sequence": m.source_sequence,
        "mcp": m.mcp,
        "motp": m.motp,
        "cle_px": m.cle_px,
        "nde": m.nde,
        "mota": m.mota,
        "frames_evaluated": m.frames_evaluated,
        "flags": list(m.flags),
    }


def report_to_record(report: MetricReport) -> dict:
    return {
        "corpus": {
            "mcp": report.mcp,
            "motp": report.motp,
            "cle_px": report.cle_px,
            "nde": report.nde,
            "mota": report.mota,
            "frames_evaluated": report.frames_evaluated,
            "instances": report.instances,
        },
        "per_sequence": [_instance_record(m) for m in report.per_sequence],
    }


def render_report_text(report: MetricReport) -> str:
    """Human-readable report: one line per instance plus the corpus summary."""
    def fmt(v: float | None) -> str:
        return "n/a" if v is None else f"{v:.6f}"

    lines = []
    for m in report.per_sequence:
        lines.append(
            f"instance {m.instance_id} seq={m.source_sequence} "
            f"mcp={fmt(m.mcp)} motp={fmt(m.motp)} cle_px={fmt(m.cle_px)} "
            f"nde={fmt(m.nde)} mota={fmt(m.mota)} frames={m.frames_evaluated}"
            + (f" flags={','.join(m.flags)}" if m.flags else "")
        )
    lines.append(
        f"corpus instances={report.instances} mcp={fmt(report.mcp)} "
        f"motp={fmt(report.motp)} cle_px={fmt(report.cle_px)} "
        f"nde={fmt(report.nde)} mota={fmt(report.mota)} "
        f"frames={report.frames_evaluated}"
    )
    return "\n".join(lines) + "\n"


def save_report(path: str | Path, report: MetricReport, fmt: str = "structured") -> None:
    """Write a report as JSON (``structured``) or human-readable text."""
    if fmt == "structured":
        payload = json.dumps(report_to_record(report), indent=2, sort_keys=True) + "\n"
    elif fmt == "text":
        payload = render_report_text(report)
    else:
        raise ValueError(f"unknown report format: {fmt!r}")
    Path(path).write_text(payload, encoding="utf-8")
