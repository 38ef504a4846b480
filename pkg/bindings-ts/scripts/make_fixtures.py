#!/usr/bin/env python3
"""Regenerate the golden parity fixtures from the engine CLI.

Inputs are built as plain records against the documented file schemas and
the expected outputs are whatever the engine command line produces for
them, so the fixtures pin engine behavior without importing engine code.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
ENGINE = [sys.executable, "-m", "trackrl"]


def run(args, cwd):
    proc = subprocess.run(ENGINE + args, cwd=cwd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(f"engine failed: {proc.stderr}")


def write_jsonl(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records))


def box(x1, y1, x2, y2):
    return [float(x1), float(y1), float(x2), float(y2)]


def make_instance(iid="fix-0", start=0.0):
    future = [2, 3, 4, 5, 6]
    boxes = {f: box(start + 10.0 * i, 0.0, start + 10.0 * i + 20.0, 20.0)
             for i, f in enumerate(future)}
    return {
        "instance_id": iid,
        "source_sequence": "fix-seq",
        "query_text": "track object 1",
        "query_kind": "single",
        "reference_frame": 1,
        "reference_boxes": {"1": boxes[2]},
        "future_frames": future,
        "gt_trajectories": {
            "1": [{"frame": f, "bbox": b} for f, b in boxes.items()]
        },
    }


def answer_text(records):
    return json.dumps(records, separators=(", ", ": "))


def rollout_texts(instance):
    gt = {e["frame"]: e["bbox"] for e in instance["gt_trajectories"]["1"]}
    perfect = answer_text([{"frame": f, "bbox": b} for f, b in gt.items()])
    offset = answer_text(
        [{"frame": f, "bbox": [b[0] + 4, b[1] + 4, b[2] + 4, b[3] + 4]}
         for f, b in gt.items()]
    )
    frozen = answer_text([{"frame": f, "bbox": gt[2]} for f in gt])
    partial = answer_text([{"frame": f, "bbox": gt[f]} for f in [2, 3, 4]])
    return [
        f"<think>steady motion</think><answer>{perfect}</answer>",
        f"<think>slight drift</think><answer>{offset}</answer>",
        f"<think>static guess</think><answer>{frozen}</answer>",
        f"<think>gave up early</think><answer>{partial}</answer>",
        "<think>tags only</think><answer>[]</answer>",
        "<think>sloppy</think><answer>[{'frame': 2, 'bbox': [0,0,20,20]},]</answer>",
        f"missing think tag <answer>{perfect}</answer>",
        "complete garbage output",
    ]


def scoring_fixture(workdir):
    instance = make_instance()
    texts = rollout_texts(instance)
    config = {"reward": {"alpha": 0.9}, "policy": {"kl_beta": 0.005}}

    instance_file = workdir / "instance.jsonl"
    rollouts_file = workdir / "rollouts.jsonl"
    config_file = workdir / "config.json"
    out_file = workdir / "rewards.jsonl"
    write_jsonl(instance_file, [instance])
    write_jsonl(rollouts_file, [{"text": t} for t in texts])
    config_file.write_text(json.dumps(config))
    run(["reward", "--instances", str(instance_file), "--rollouts", str(rollouts_file),
         "--out", str(out_file), "--config", str(config_file)], workdir)

    expected = [json.loads(line) for line in out_file.read_text().splitlines()]
    target = FIXTURES / "scoring"
    target.mkdir(parents=True, exist_ok=True)
    (target / "instance.json").write_text(json.dumps(instance, indent=2) + "\n")
    (target / "rollouts.json").write_text(json.dumps(texts, indent=2) + "\n")
    (target / "config.json").write_text(json.dumps(config, indent=2) + "\n")
    (target / "expected.json").write_text(json.dumps(expected, indent=2) + "\n")


def metrics_fixture(workdir):
    instances = [make_instance("fix-0", 0.0), make_instance("fix-1", 35.0)]
    predictions = []
    for k, inst in enumerate(instances):
        entries = []
        for e in inst["gt_trajectories"]["1"]:
            b = e["bbox"]
            shift = 2.0 * k
            entries.append({"frame": e["frame"],
                            "bbox": [b[0] + shift, b[1], b[2] + shift, b[3]]})
        predictions.append(
            {"instance_id": inst["instance_id"], "trajectories": {"1": entries}}
        )

    instances_file = workdir / "instances.jsonl"
    predictions_file = workdir / "predictions.jsonl"
    out_file = workdir / "report.json"
    write_jsonl(instances_file, instances)
    write_jsonl(predictions_file, predictions)
    run(["evaluate", "--instances", str(instances_file), "--predictions",
         str(predictions_file), "--out", str(out_file), "--format", "structured"],
        workdir)

    target = FIXTURES / "metrics"
    target.mkdir(parents=True, exist_ok=True)
    (target / "instances.json").write_text(json.dumps(instances, indent=2) + "\n")
    (target / "predictions.json").write_text(json.dumps(predictions, indent=2) + "\n")
    (target / "expected.json").write_text(out_file.read_text())


def grpo_fixture(workdir):
    group = {
        "rewards": [6.0, 4.25, 2.5, 1.0, 2.0, 0.0, 5.0, 0.0],
        "logp_new": [-1.2, -2.0, -0.7, -3.1, -1.9, -4.0, -0.9, -2.2],
        "logp_old": [-1.0, -2.2, -0.9, -3.0, -2.0, -3.8, -1.1, -2.0],
        "logp_ref": [-1.1, -2.1, -0.8, -3.2, -1.8, -3.9, -1.0, -2.1],
        "logp_masked": [-2.2, -2.4, -1.5, -3.3, -2.6, -4.1, -1.8, -2.5],
    }
    config = {"policy": {"clip_epsilon": 0.2, "kl_beta": 0.005, "tapo_gamma": 0.1}}

    trace_file = workdir / "trace.jsonl"
    config_file = workdir / "config.json"
    out_file = workdir / "sim.json"
    write_jsonl(trace_file, [group])
    config_file.write_text(json.dumps(config))
    run(["grpo-sim", "--trace", str(trace_file), "--out", str(out_file),
         "--config", str(config_file), "--format", "structured"], workdir)

    step = json.loads(out_file.read_text())["steps"][0]
    target = FIXTURES / "grpo"
    target.mkdir(parents=True, exist_ok=True)
    (target / "group.json").write_text(json.dumps(group, indent=2) + "\n")
    (target / "config.json").write_text(json.dumps(config, indent=2) + "\n")
    (target / "expected.json").write_text(json.dumps(step, indent=2) + "\n")


def main():
    with tempfile.TemporaryDirectory() as tmp:
        workdir = Path(tmp)
        scoring_fixture(workdir)
        metrics_fixture(workdir)
        grpo_fixture(workdir)
    print(f"fixtures written under {FIXTURES}")


if __name__ == "__main__":
    main()
