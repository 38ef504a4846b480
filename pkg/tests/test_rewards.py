import itertools
import math
import random

import pytest

from trackrl.geometry import BBox, Point, center
from trackrl.instances import QueryInstance
from trackrl.parsing import FramePrediction, format_rollout, parse_rollout
from trackrl.rewards import (
    RewardBreakdown,
    RewardConfig,
    mcp_step_reward,
    mcp_trajectory_reward,
    pair_reward,
    score_rollout,
    spatial_reward,
)
from trackrl.tracks import Trajectory

CFG = RewardConfig()


def step_oracle(gt_prev, gt_cur, pred_cur, alpha=0.9, eps=1e-8,
                static_eps=1.0, ratio=0.1, penalty=0.2):
    """Independent transcription of the motion-step formula."""
    ax = (gt_prev.x1 + gt_prev.x2) / 2
    ay = (gt_prev.y1 + gt_prev.y2) / 2
    gx = (gt_cur.x1 + gt_cur.x2) / 2 - ax
    gy = (gt_cur.y1 + gt_cur.y2) / 2 - ay
    px = (pred_cur.x1 + pred_cur.x2) / 2 - ax
    py = (pred_cur.y1 + pred_cur.y2) / 2 - ay
    v_gt = math.hypot(gx, gy)
    if v_gt < static_eps:
        return 1.0
    v_pred = math.hypot(px, py)
    if (px, py) == (gx, gy):
        a = 1.0  # exact alignment scores exactly, bypassing the eps guard
    else:
        cos = (px * gx + py * gy) / (v_pred * v_gt + eps)
        a = (1 + cos) / 2
    s = math.exp(-((v_pred - v_gt) ** 2) / (2 * (alpha * v_gt) ** 2))
    p = penalty if v_pred < ratio * v_gt else 1.0
    return a * s * p


def spatial_oracle(preds, gts, cfg=CFG):
    """Brute-force assignment over all injective pairings."""
    if not preds and not gts:
        return cfg.pair_max
    if not preds or not gts:
        return 0.0
    m, n = len(preds), len(gts)
    best = 0.0
    if m <= n:
        for cols in itertools.permutations(range(n), m):
            total = sum(pair_reward(preds[r], gts[c], cfg) for r, c in enumerate(cols))
            best = max(best, total)
    else:
        for rows in itertools.permutations(range(m), n):
            total = sum(pair_reward(preds[r], gts[c], cfg) for c, r in enumerate(rows))
            best = max(best, total)
    return best / max(m, n)


def shifted(box, dx, dy=None):
    dy = dx if dy is None else dy
    return box.translated(dx, dy)


def random_box(rng, span=200.0):
    x1 = rng.uniform(-span, span)
    y1 = rng.uniform(-span, span)
    return BBox(x1, y1, x1 + rng.uniform(0.5, 60), y1 + rng.uniform(0.5, 60))


def make_instance(boxes_by_oid, reference_frame=1, kind="single", iid="inst-0"):
    """boxes_by_oid: {oid: {frame: BBox}} over future frames 2..6."""
    future = (2, 3, 4, 5, 6)
    return QueryInstance(
        instance_id=iid,
        source_sequence="seq-a",
        query_text="track it",
        query_kind=kind,
        reference_frame=reference_frame,
        reference_boxes={oid: boxes[min(boxes)] for oid, boxes in boxes_by_oid.items()},
        future_frames=future,
        gt_trajectories={
            oid: Trajectory(oid, boxes) for oid, boxes in boxes_by_oid.items()
        },
    )


def linear_boxes(start_x=0.0, step=10.0, frames=(2, 3, 4, 5, 6), size=20.0):
    return {
        f: BBox(start_x + step * i, 0.0, start_x + step * i + size, size)
        for i, f in enumerate(frames)
    }


class TestPairReward:
    def test_identical_boxes_full_marks(self):
        b = BBox(0, 0, 10, 10)
        assert pair_reward(b, b, CFG) == 3.0

    def test_disjoint_distant_zero(self):
        assert pair_reward(BBox(0, 0, 10, 10), BBox(500, 500, 520, 520), CFG) == 0.0

    def test_hand_computed_mixed_case(self):
        # IoU 36/164 < 0.5 -> 0; mean L1 = 4 < 10 -> 1; center dist sqrt(32) < 30 -> 1.
        assert pair_reward(BBox(0, 0, 10, 10), BBox(4, 4, 14, 14), CFG) == 2.0

    def test_point_outside_pred_box_denies_point_reward(self):
        pred = BBox(0, 0, 10, 10)
        gt = BBox(0, 0, 10, 10)
        outside = Point(50, 50)
        r = pair_reward(pred, gt, CFG, pred_point=outside, gt_point=Point(55, 55))
        assert r == 2.0  # IoU and L1 hold, point component denied

    def test_iou_only_mode(self):
        cfg = RewardConfig(iou_only=True)
        b = BBox(0, 0, 10, 10)
        assert pair_reward(b, b, cfg) == 1.0
        assert pair_reward(b, BBox(4, 4, 14, 14), cfg) == 0.0

    def test_values_in_contract_set(self):
        rng = random.Random(21)
        for _ in range(2000):
            r = pair_reward(random_box(rng), random_box(rng), CFG)
            assert r in (0.0, 1.0, 2.0, 3.0)


class TestSpatialReward:
    def test_single_identical_pair(self):
        b = BBox(0, 0, 10, 10)
        assert spatial_reward([b], [b], CFG) == 3.0

    def test_one_prediction_two_ground_truths(self):
        b = BBox(0, 0, 10, 10)
        other = BBox(100, 100, 120, 120)
        assert spatial_reward([b], [b, other], CFG) == 1.5
        assert spatial_oracle([b], [b, other]) == 1.5

    def test_permutation_invariance(self):
        rng = random.Random(22)
        for _ in range(300):
            gts = [random_box(rng) for _ in range(rng.randint(1, 4))]
            preds = [shifted(g, rng.uniform(-5, 5)) for g in gts]
            base = spatial_reward(preds, gts, CFG)
            rng.shuffle(preds)
            assert spatial_reward(preds, gts, CFG) == base

    def test_matches_brute_force_oracle(self):
        rng = random.Random(23)
        for _ in range(300):
            preds = [random_box(rng, span=30) for _ in range(rng.randint(1, 4))]
            gts = [random_box(rng, span=30) for _ in range(rng.randint(1, 4))]
            assert spatial_reward(preds, gts, CFG) == pytest.approx(
                spatial_oracle(preds, gts), abs=1e-12
            )

    def test_empty_conventions(self):
        b = BBox(0, 0, 10, 10)
        assert spatial_reward([], [], CFG) == 3.0
        assert spatial_reward([b], [], CFG) == 0.0
        assert spatial_reward([], [b], CFG) == 0.0

    def test_bounded(self):
        rng = random.Random(24)
        for _ in range(1000):
            preds = [random_box(rng) for _ in range(rng.randint(1, 3))]
            gts = [random_box(rng) for _ in range(rng.randint(1, 3))]
            v = spatial_reward(preds, gts, CFG)
            assert 0.0 <= v <= 3.0


class TestMcpStepReward:
    def test_static_ground_truth(self):
        b = BBox(0, 0, 10, 10)
        assert mcp_step_reward(b, b, BBox(50, 50, 60, 60), CFG) == 1.0

    def test_perfect_step(self):
        gt_prev = BBox(0, 0, 20, 20)
        gt_cur = BBox(10, 0, 30, 20)
        assert mcp_step_reward(gt_prev, gt_cur, gt_cur, CFG) == pytest.approx(1.0, abs=1e-9)

    def test_frozen_prediction_capped_by_anti_static(self):
        gt_prev = BBox(0, 0, 20, 20)
        gt_cur = BBox(10, 0, 30, 20)  # moved 10 px
        frozen = gt_prev
        r = mcp_step_reward(gt_prev, gt_cur, frozen, CFG)
        assert r <= 0.2
        assert r == pytest.approx(step_oracle(gt_prev, gt_cur, frozen))

    def test_matches_independent_oracle(self):
        rng = random.Random(25)
        for _ in range(2000):
            gt_prev = random_box(rng, span=50)
            gt_cur = shifted(gt_prev, rng.uniform(-30, 30), rng.uniform(-30, 30))
            pred = random_box(rng, span=80)
            got = mcp_step_reward(gt_prev, gt_cur, pred, CFG)
            assert got == pytest.approx(step_oracle(gt_prev, gt_cur, pred), abs=1e-9)
            assert 0.0 <= got <= 1.0

    def test_translation_invariance(self):
        rng = random.Random(26)
        for _ in range(500):
            gt_prev = random_box(rng, span=50)
            gt_cur = shifted(gt_prev, rng.uniform(-30, 30), rng.uniform(-30, 30))
            pred = random_box(rng, span=80)
            dx, dy = rng.uniform(-500, 500), rng.uniform(-500, 500)
            a = mcp_step_reward(gt_prev, gt_cur, pred, CFG)
            b = mcp_step_reward(
                gt_prev.translated(dx, dy), gt_cur.translated(dx, dy),
                pred.translated(dx, dy), CFG,
            )
            assert b == pytest.approx(a, abs=1e-9)

    def test_scale_invariance_with_scaled_epsilon(self):
        rng = random.Random(27)
        for _ in range(300):
            gt_prev = random_box(rng, span=40)
            gt_cur = shifted(gt_prev, rng.uniform(5, 30), rng.uniform(5, 30))
            pred = random_box(rng, span=60)
            k = rng.uniform(2.0, 8.0)
            scaled_cfg = RewardConfig(static_epsilon=CFG.static_epsilon * k)
            def scale(b):
                return BBox(b.x1 * k, b.y1 * k, b.x2 * k, b.y2 * k)
            a = mcp_step_reward(gt_prev, gt_cur, pred, CFG)
            b = mcp_step_reward(scale(gt_prev), scale(gt_cur), scale(pred), scaled_cfg)
            assert b == pytest.approx(a, abs=1e-6)


class TestMcpTrajectoryReward:
    def test_perfect_linear_motion(self):
        boxes = linear_boxes()
        gt = Trajectory(1, boxes)
        assert mcp_trajectory_reward(gt, Trajectory(1, dict(boxes)), CFG) == 1.0

    def test_reversed_direction_scores_zero(self):
        gt_boxes = linear_boxes(step=10.0)
        frames = sorted(gt_boxes)
        pred_boxes = {frames[0]: gt_boxes[frames[0]]}
        for prev, cur in zip(frames, frames[1:]):
            anchor = center(gt_boxes[prev])
            target = center(gt_boxes[cur])
            dx, dy = target.x - anchor.x, target.y - anchor.y
            b = gt_boxes[cur]
            pred_boxes[cur] = b.translated(-2 * dx, -2 * dy)  # mirror through the anchor
        r = mcp_trajectory_reward(Trajectory(1, gt_boxes), Trajectory(1, pred_boxes), CFG)
        assert r == pytest.approx(0.0, abs=1e-8)

    def test_mixed_steps_average(self):
        frames = (2, 3, 4, 5, 6)
        gt_boxes = linear_boxes(step=10.0, frames=frames)
        pred_boxes = dict(gt_boxes)
        pred_boxes[4] = gt_boxes[3]  # frozen on the 3->4 transition
        gt = Trajectory(1, gt_boxes)
        pred = Trajectory(1, pred_boxes)
        per_step = [
            step_oracle(gt_boxes[p], gt_boxes[c], pred_boxes[c])
            for p, c in zip(frames, frames[1:])
        ]
        # Note the frozen box also corrupts the 4->5 anchor-relative step.
        assert mcp_trajectory_reward(gt, pred, CFG) == pytest.approx(
            sum(per_step) / len(per_step), abs=1e-12
        )

    def test_too_few_common_frames(self):
        gt = Trajectory(1, linear_boxes())
        pred = Trajectory(1, {2: BBox(0, 0, 20, 20)})
        assert mcp_trajectory_reward(gt, pred, CFG) == 0.0

    def test_disjoint_frames_skipped(self):
        gt = Trajectory(1, linear_boxes(frames=(2, 3, 4, 5, 6)))
        pred_boxes = {f: b for f, b in linear_boxes(frames=(2, 3, 4, 5, 6)).items() if f != 4}
        pred_boxes[99] = BBox(0, 0, 5, 5)  # frame unknown to GT, skipped
        r = mcp_trajectory_reward(gt, Trajectory(1, pred_boxes), CFG)
        assert 0.0 <= r <= 1.0


class TestScoreRollout:
    def test_perfect_rollout_scores_six(self):
        boxes = linear_boxes()
        inst = make_instance({1: boxes})
        preds = [FramePrediction(frame=f, bbox=b) for f, b in boxes.items()]
        rollout = parse_rollout(format_rollout("tracking the target", preds))
        breakdown = score_rollout(rollout, inst, CFG)
        assert breakdown.thinking_format == 1.0
        assert breakdown.answer_format == 1.0
        assert breakdown.spatial == 3.0
        assert breakdown.mcp == 1.0
        assert breakdown.total == 6.0

    def test_disjoint_frozen_rollout(self):
        boxes = linear_boxes(step=10.0)
        inst = make_instance({1: boxes})
        far = BBox(1000, 1000, 1020, 1020)
        preds = [FramePrediction(frame=f, bbox=far) for f in boxes]
        rollout = parse_rollout(format_rollout("lost it", preds))
        breakdown = score_rollout(rollout, inst, CFG)
        assert breakdown.thinking_format == 1.0
        assert breakdown.answer_format == 1.0
        assert breakdown.spatial == 0.0
        assert breakdown.mcp <= 0.2  # static prediction on moving ground truth

    def test_garbage_rollout_scores_zero(self):
        inst = make_instance({1: linear_boxes()})
        breakdown = score_rollout(parse_rollout("total nonsense"), inst, CFG)
        assert breakdown.total == 0.0

    def test_multi_object_identity_permutation(self):
        boxes_a = linear_boxes(start_x=0.0)
        boxes_b = linear_boxes(start_x=300.0)
        inst = make_instance({1: boxes_a, 2: boxes_b}, kind="multi")
        forward = [FramePrediction(frame=f, object_id=1, bbox=b) for f, b in boxes_a.items()]
        forward += [FramePrediction(frame=f, object_id=2, bbox=b) for f, b in boxes_b.items()]
        # Swap the emitted ids; Hungarian matching should still align boxes.
        swapped = [FramePrediction(frame=f, object_id=2, bbox=b) for f, b in boxes_a.items()]
        swapped += [FramePrediction(frame=f, object_id=1, bbox=b) for f, b in boxes_b.items()]
        r1 = score_rollout(parse_rollout(format_rollout("a", forward, True)), inst, CFG)
        r2 = score_rollout(parse_rollout(format_rollout("b", swapped, True)), inst, CFG)
        assert r1.total == 6.0
        assert r2.spatial == r1.spatial
        assert r2.mcp == r1.mcp

    def test_missing_identity_normalization(self):
        boxes_a = linear_boxes(start_x=0.0)
        boxes_b = linear_boxes(start_x=300.0)
        inst = make_instance({1: boxes_a, 2: boxes_b}, kind="multi")
        only_a = [FramePrediction(frame=f, object_id=1, bbox=b) for f, b in boxes_a.items()]
        breakdown = score_rollout(
            parse_rollout(format_rollout("a", only_a, True)), inst, CFG
        )
        assert breakdown.spatial == 1.5  # per-frame: 3 / max(1, 2)
        assert breakdown.mcp == 0.5  # one perfect identity / max(1, 2)

    def test_total_is_component_sum(self):
        rng = random.Random(28)
        for _ in range(500):
            b = RewardBreakdown(
                thinking_format=rng.choice([0.0, 1.0]),
                answer_format=rng.choice([0.0, 1.0]),
                spatial=rng.uniform(0, 3),
                mcp=rng.uniform(0, 1),
            )
            assert b.total == b.thinking_format + b.answer_format + b.spatial + b.mcp

    def test_component_bounds_random_rollouts(self):
        rng = random.Random(29)
        inst = make_instance({1: linear_boxes()})
        for _ in range(300):
            preds = [
                FramePrediction(
                    frame=rng.choice([2, 3, 4, 5, 6, 7]),
                    bbox=random_box(rng),
                )
                for _ in range(rng.randint(0, 8))
            ]
            rollout = parse_rollout(format_rollout("r", preds))
            b = score_rollout(rollout, inst, CFG)
            assert b.thinking_format in (0.0, 1.0)
            assert b.answer_format in (0.0, 1.0)
            assert 0.0 <= b.spatial <= 3.0
            assert 0.0 <= b.mcp <= 1.0
            assert b.total == b.thinking_format + b.answer_format + b.spatial + b.mcp


class TestRewardConfig:
    def test_alpha_band_enforced(self):
        with pytest.raises(ValueError):
            RewardConfig(alpha=0.4)
        with pytest.raises(ValueError):
            RewardConfig(alpha=1.1)

    def test_positive_thresholds(self):
        with pytest.raises(ValueError):
            RewardConfig(iou_threshold=0.0)

    def test_penalty_band(self):
        with pytest.raises(ValueError):
            RewardConfig(anti_static_penalty=0.0)
