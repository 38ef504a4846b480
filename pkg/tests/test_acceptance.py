"""Acceptance suite: every exit criterion at its stated tolerance.

Each test prints one PASS/FAIL line (visible with ``pytest -s``); a failed
assertion both prints FAIL and fails the test.
"""

import itertools
import json
import math
import random
import time
from contextlib import contextmanager

import pytest

from trackrl.assignment import hungarian
from trackrl.cli import main
from trackrl.geometry import BBox
from trackrl.instances import save_instances
from trackrl.parsing import (
    FramePrediction,
    answer_format_reward,
    format_rollout,
    parse_rollout,
    serialize_predictions,
    thinking_format_reward,
)
from trackrl.policy import (
    PolicyConfig,
    RolloutGroup,
    build_frame_mask,
    grpo_advantages,
    grpo_objective,
    tapo_objective,
)
from trackrl.rewards import RewardConfig, mcp_step_reward, spatial_reward
from trackrl.metrics import MetricConfig, mcp_metric
from trackrl.tracks import Trajectory

from test_parsing import MALFORMED_CORPUS


@contextmanager
def criterion(name):
    try:
        yield
    except Exception:
        print(f"FAIL [acceptance] {name}")
        raise
    print(f"PASS [acceptance] {name}")


def _random_box(rng, span=200.0):
    x1 = rng.uniform(-span, span)
    y1 = rng.uniform(-span, span)
    return BBox(x1, y1, x1 + rng.uniform(0.5, 60), y1 + rng.uniform(0.5, 60))


def test_hungarian_optimality():
    with criterion("Hungarian matches brute force on 1000 random matrices up to 6x6 in < 5 s"):
        rng = random.Random(1000)
        start = time.perf_counter()
        for _ in range(1000):
            m = rng.randint(1, 6)
            n = rng.randint(1, 6)
            matrix = [[rng.randint(0, 9) for _ in range(n)] for _ in range(m)]
            got = hungarian(matrix).total_cost
            best = None
            if m <= n:
                for cols in itertools.permutations(range(n), m):
                    total = sum(matrix[r][c] for r, c in enumerate(cols))
                    best = total if best is None else min(best, total)
            else:
                for rows in itertools.permutations(range(m), n):
                    total = sum(matrix[r][c] for c, r in enumerate(rows))
                    best = total if best is None else min(best, total)
            assert got == best
        elapsed = time.perf_counter() - start
        assert elapsed < 5.0, f"took {elapsed:.2f}s"


def test_spatial_reward():
    with criterion("Spatial reward: identical lists 3.0 exact, 1000-shuffle invariance, [0,3] on 1e4 cases"):
        cfg = RewardConfig()
        rng = random.Random(1001)

        for _ in range(50):
            boxes = [_random_box(rng) for _ in range(rng.randint(1, 5))]
            assert spatial_reward(list(boxes), list(boxes), cfg) == 3.0

        gts = [_random_box(rng) for _ in range(4)]
        preds = [b.translated(rng.uniform(-8, 8), rng.uniform(-8, 8)) for b in gts]
        base = spatial_reward(preds, gts, cfg)
        for _ in range(1000):
            shuffled = list(preds)
            rng.shuffle(shuffled)
            assert spatial_reward(shuffled, gts, cfg) == base

        for _ in range(10_000):
            p = [_random_box(rng) for _ in range(rng.randint(1, 3))]
            g = [_random_box(rng) for _ in range(rng.randint(1, 3))]
            v = spatial_reward(p, g, cfg)
            assert 0.0 <= v <= 3.0


def test_mcp_reward():
    with criterion("Motion step reward: static 1.0, perfect within 1e-9, frozen <= 0.2, "
                   "[0,1] on 1e4 triples, translation-invariant within 1e-9"):
        cfg = RewardConfig()
        rng = random.Random(1002)

        b = BBox(0, 0, 10, 10)
        assert mcp_step_reward(b, b, BBox(90, 90, 100, 100), cfg) == 1.0

        prev = BBox(0, 0, 20, 20)
        cur = BBox(10, 0, 30, 20)
        assert abs(mcp_step_reward(prev, cur, cur, cfg) - 1.0) <= 1e-9

        assert mcp_step_reward(prev, cur, prev, cfg) <= 0.2

        for _ in range(10_000):
            gt_prev = _random_box(rng, span=100)
            gt_cur = gt_prev.translated(rng.uniform(-40, 40), rng.uniform(-40, 40))
            pred = _random_box(rng, span=150)
            v = mcp_step_reward(gt_prev, gt_cur, pred, cfg)
            assert 0.0 <= v <= 1.0

        for _ in range(500):
            gt_prev = _random_box(rng, span=100)
            gt_cur = gt_prev.translated(rng.uniform(-40, 40), rng.uniform(-40, 40))
            pred = _random_box(rng, span=150)
            dx, dy = rng.uniform(-400, 400), rng.uniform(-400, 400)
            a = mcp_step_reward(gt_prev, gt_cur, pred, cfg)
            moved = mcp_step_reward(
                gt_prev.translated(dx, dy), gt_cur.translated(dx, dy),
                pred.translated(dx, dy), cfg,
            )
            assert abs(moved - a) <= 1e-9


def test_mcp_metric():
    with criterion("Motion metric: perfect trajectory 1.0; stationary step equals "
                   "0.5*exp(-1/1.62) within 1e-6 of hand computation"):
        cfg = MetricConfig(alpha=0.9)
        frames = (1, 2, 3, 4, 5)
        moving = {
            f: BBox(10.0 * i, 0.0, 10.0 * i + 20.0, 20.0) for i, f in enumerate(frames)
        }
        gt = Trajectory(1, moving)
        assert mcp_metric(gt, Trajectory(1, dict(moving)), cfg) == 1.0

        frozen = {f: BBox(0.0, 0.0, 20.0, 20.0) for f in frames}
        # Hand computation: guarded cosine 0 -> A = 1/2; Gaussian term at
        # v_pred = 0 is exp(-v^2 / (2 (0.9 v)^2)) = exp(-1/1.62).
        hand_step = 0.5 * math.exp(-1.0 / 1.62)
        got = mcp_metric(gt, Trajectory(1, frozen), cfg)
        assert abs(got - hand_step) <= 1e-6


def test_grpo_advantages():
    with criterion("Advantages: mean < 1e-9, std within 1e-9 of 1, [1,2,3] oracle within "
                   "1e-4, all-equal zeros, shift/scale invariance"):
        cfg = PolicyConfig()
        rng = random.Random(1003)

        got = grpo_advantages([1, 2, 3], cfg)
        assert abs(got[0] + 1.2247) <= 1e-4
        assert abs(got[2] - 1.2247) <= 1e-4

        assert grpo_advantages([4.5] * 6, cfg) == [0.0] * 6

        for _ in range(1000):
            g = rng.randint(2, 10)
            rewards = [rng.uniform(-5, 10) for _ in range(g)]
            if len(set(rewards)) == 1:
                continue
            adv = grpo_advantages(rewards, cfg)
            mean = sum(adv) / g
            std = math.sqrt(sum((a - mean) ** 2 for a in adv) / g)
            assert abs(mean) < 1e-9
            assert abs(std - 1.0) < 1e-9

            shift = rng.uniform(-50, 50)
            scale = rng.uniform(0.5, 20)
            shifted = grpo_advantages([r + shift for r in rewards], cfg)
            scaled = grpo_advantages([r * scale for r in rewards], cfg)
            for a, b, c in zip(adv, shifted, scaled):
                assert abs(a - b) <= 1e-6
                assert abs(a - c) <= 1e-6


def test_clipped_surrogate():
    with criterion("Clipped surrogate: (1.5, 0.2, +1) -> 1.2 and (0.5, 0.2, -1) -> -0.8 "
                   "exact; pessimism on 100x100 grid"):
        cfg = PolicyConfig(clip_epsilon=0.2, kl_beta=0.0)

        def single(ratio, advantage):
            group = RolloutGroup(
                rewards=(0.0,), logp_new=(math.log(ratio),), logp_old=(0.0,)
            )
            return grpo_objective(group, [advantage], cfg)

        assert single(1.5, 1.0) == pytest.approx(1.2, abs=1e-12)
        assert single(0.5, -1.0) == pytest.approx(-0.8, abs=1e-12)

        for i in range(100):
            rho = 0.01 + i * 0.03
            clipped = min(max(rho, 0.8), 1.2)
            for j in range(100):
                a = -5.0 + j * 0.1
                term = min(rho * a, clipped * a)
                got = single(rho, a)
                assert got == pytest.approx(term, abs=1e-12)
                assert got <= rho * a + 1e-12  # never exceeds the unclipped surrogate


def test_tapo():
    with criterion("TAPO: gamma=0 bit-identical to GRPO on 100 traces; keep_prob=0 "
                   "freezes all frames to 0; masks are seed-deterministic"):
        rng = random.Random(1004)
        cfg = PolicyConfig(tapo_gamma=0.0, kl_beta=0.0)
        for _ in range(100):
            g = rng.randint(2, 8)
            group = RolloutGroup(
                rewards=tuple(rng.uniform(0, 6) for _ in range(g)),
                logp_new=tuple(rng.uniform(-5, 0) for _ in range(g)),
                logp_old=tuple(rng.uniform(-5, 0) for _ in range(g)),
                logp_masked=tuple(rng.uniform(-5, 0) for _ in range(g)),
            )
            adv = grpo_advantages(group.rewards, cfg)
            assert tapo_objective(group, adv, cfg) == grpo_objective(group, adv, cfg)

        frozen = build_frame_mask(8, PolicyConfig(tapo_keep_prob=0.0), rng_seed=5)
        assert frozen.source_frames() == (0,) * 8
        assert frozen.keep == (True,) + (False,) * 7

        live = PolicyConfig(tapo_keep_prob=0.7)
        for seed in range(30):
            assert build_frame_mask(12, live, seed) == build_frame_mask(12, live, seed)


def test_parsing():
    with criterion("Parsing: 1000 strict round-trips; 10-case fallback corpus recovered "
                   "with format reward 0; decision table reproduced"):
        rng = random.Random(1005)
        for _ in range(1000):
            multi = rng.random() < 0.5
            preds = []
            for _ in range(rng.randint(0, 6)):
                preds.append(
                    FramePrediction(
                        frame=rng.randint(0, 300),
                        object_id=rng.randint(1, 50) if multi else None,
                        bbox=_random_box(rng),
                    )
                )
            parsed = parse_rollout(format_rollout("r", preds, multi_object=multi))
            assert parsed.parse_mode == "strict"
            assert list(parsed.predictions) == preds

        for text, expected in MALFORMED_CORPUS:
            parsed = parse_rollout(text)
            assert parsed.parse_mode == "fallback"
            assert answer_format_reward(parsed) == 0.0
            got = [(p.frame, p.object_id, p.bbox.as_tuple()) for p in parsed.predictions]
            want = [(f, o, tuple(float(c) for c in b)) for f, o, b in expected]
            assert got == want

        # Decision table: correct tags 1.0, missing tags 0.0, malformed tags 0.0.
        correct = parse_rollout('<think>t</think><answer>[]</answer>')
        missing = parse_rollout('<answer>[]</answer>')
        malformed = parse_rollout('<think>t<answer></think>[]</answer>')
        assert thinking_format_reward(correct) == 1.0
        assert thinking_format_reward(missing) == 0.0
        assert thinking_format_reward(malformed) == 0.0


def test_dataset(tmp_path):
    with criterion("Dataset: disjoint splits, 5-6 frame windows, exact MOT round-trip, "
                   "3-sequence build+evaluate < 10 s"):
        from test_cli import write_gt_tree, write_predictions
        from trackrl.dataset import parse_mot_ground_truth, export_mot_segments
        from trackrl.instances import load_instances
        from trackrl.geometry import xywh_to_xyxy

        start = time.perf_counter()
        gt_root = tmp_path / "gt"
        gt_root.mkdir()
        write_gt_tree(gt_root, n_sequences=3, n_frames=14)
        out = tmp_path / "dataset"
        assert main(["build-dataset", "--gt-root", str(gt_root), "--out", str(out),
                     "--kinds", "single", "multi", "--seed", "11"]) == 0

        train = json.loads((out / "train_manifest.json").read_text())
        test = json.loads((out / "test_manifest.json").read_text())
        assert not set(train["sequences"]) & set(test["sequences"])
        assert set(train["sequences"]) | set(test["sequences"]) == {"seq-0", "seq-1", "seq-2"}

        instances = load_instances(out / "train.jsonl") + load_instances(out / "test.jsonl")
        assert instances
        assert all(len(inst.future_frames) in (5, 6) for inst in instances)

        inst = instances[0]
        preds = {oid: traj for oid, traj in inst.gt_trajectories.items()}
        written = export_mot_segments([inst], {inst.instance_id: preds}, tmp_path / "mot")
        back = parse_mot_ground_truth(written[inst.source_sequence])
        boxes = {(d.frame, d.object_id): xywh_to_xyxy(d.box) for d in back}
        for oid, traj in preds.items():
            for f, b in traj.boxes.items():
                assert boxes[(f, oid)] == b

        eval_instances = load_instances(out / "test.jsonl")
        inst_file = tmp_path / "eval_instances.jsonl"
        save_instances(inst_file, eval_instances)
        pred_file = tmp_path / "eval_preds.jsonl"
        write_predictions(pred_file, eval_instances)
        report_file = tmp_path / "report.json"
        assert main(["evaluate", "--instances", str(inst_file), "--predictions",
                     str(pred_file), "--out", str(report_file)]) == 0
        report = json.loads(report_file.read_text())
        assert report["corpus"]["mcp"] == 1.0

        elapsed = time.perf_counter() - start
        assert elapsed < 10.0, f"took {elapsed:.2f}s"


def test_cli_determinism(tmp_path):
    with criterion("CLI evaluate is byte-identical at parallelism 1 and 8"):
        from test_cli import make_instance, write_predictions

        instances = [make_instance(f"i-{k}", start_x=17.0 * k) for k in range(16)]
        inst_file = tmp_path / "instances.jsonl"
        save_instances(inst_file, instances)
        pred_file = tmp_path / "preds.jsonl"
        write_predictions(pred_file, instances, perfect=False)
        out1, out8 = tmp_path / "r1.json", tmp_path / "r8.json"
        assert main(["evaluate", "--instances", str(inst_file), "--predictions",
                     str(pred_file), "--out", str(out1), "--jobs", "1"]) == 0
        assert main(["evaluate", "--instances", str(inst_file), "--predictions",
                     str(pred_file), "--out", str(out8), "--jobs", "8"]) == 0
        assert out1.read_bytes() == out8.read_bytes()
