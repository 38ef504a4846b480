"""Rewards, metrics, policy objectives, and benchmark construction for
language-queried multi-object tracking."""

from .assignment import Matching, hungarian
from .dataset import (
    BuilderConfig,
    MotDetection,
    SplitManifest,
    build_instances,
    discover_sequences,
    export_mot_segments,
    parse_mot_ground_truth,
    split_sequences,
)
from .geometry import (
    BBox,
    BBoxXYWH,
    MotionVector,
    Point,
    center,
    displacement,
    euclidean,
    iou,
    mean_l1,
    point_in_box,
    xywh_to_xyxy,
    xyxy_to_xywh,
)
from .instances import (
    QueryInstance,
    instance_from_record,
    instance_to_record,
    load_instances,
    save_instances,
)
from .metrics import (
    InstanceMetrics,
    MetricConfig,
    MetricReport,
    cle,
    evaluate_corpus,
    evaluate_instance,
    mcp_metric,
    mota,
    motp,
    nde,
    save_report,
)
from .parsing import (
    FramePrediction,
    ParsedRollout,
    answer_format_reward,
    format_rollout,
    parse_rollout,
    serialize_predictions,
    thinking_format_reward,
)
from .policy import (
    FrameMask,
    PolicyConfig,
    RolloutGroup,
    build_frame_mask,
    grpo_advantages,
    grpo_objective,
    should_apply_corruption,
    tapo_objective,
    tapo_temporal_loss,
)
from .queries import RemoteQueryClient, generate_query, render_prompt, template_query
from .rewards import (
    RewardBreakdown,
    RewardConfig,
    mcp_step_reward,
    mcp_trajectory_reward,
    pair_reward,
    score_rollout,
    spatial_reward,
)
from .tracks import Trajectory

__version__ = "0.1.0"

__all__ = [
    "BBox",
    "BBoxXYWH",
    "BuilderConfig",
    "FrameMask",
    "FramePrediction",
    "InstanceMetrics",
    "Matching",
    "MetricConfig",
    "MetricReport",
    "MotDetection",
    "MotionVector",
    "ParsedRollout",
    "Point",
    "PolicyConfig",
    "QueryInstance",
    "RemoteQueryClient",
    "RewardBreakdown",
    "RewardConfig",
    "RolloutGroup",
    "SplitManifest",
    "Trajectory",
    "answer_format_reward",
    "build_frame_mask",
    "build_instances",
    "center",
    "cle",
    "discover_sequences",
    "displacement",
    "euclidean",
    "evaluate_corpus",
    "evaluate_instance",
    "export_mot_segments",
    "format_rollout",
    "generate_query",
    "grpo_advantages",
    "grpo_objective",
    "hungarian",
    "instance_from_record",
    "instance_to_record",
    "iou",
    "load_instances",
    "mcp_metric",
    "mcp_step_reward",
    "mcp_trajectory_reward",
    "mean_l1",
    "mota",
    "motp",
    "nde",
    "pair_reward",
    "parse_mot_ground_truth",
    "parse_rollout",
    "point_in_box",
    "render_prompt",
    "save_instances",
    "save_report",
    "score_rollout",
    "serialize_predictions",
    "should_apply_corruption",
    "spatial_reward",
    "split_sequences",
    "tapo_objective",
    "tapo_temporal_loss",
    "template_query",
    "thinking_format_reward",
    "xywh_to_xyxy",
    "xyxy_to_xywh",
]
