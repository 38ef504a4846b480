"""Command-line surface: dataset construction, scoring, evaluation, export.

Subcommands: build-dataset, evaluate, reward, export-mot, grpo-sim. A JSON
config file (sections ``reward``, ``metric``, ``policy``, ``builder``)
overrides library defaults and flags override the file, so a run is fully
reproducible from one artifact plus the command line. All outputs are
byte-identical for identical inputs, seed, and any parallelism degree.

Exit codes: 0 success, 1 input error, 2 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from .dataset import (
    BuilderConfig,
    build_instances,
    discover_sequences,
    export_mot_segments,
    parse_mot_ground_truth,
    split_sequences,
)
from .geometry import BBox
from .instances import QueryInstance, load_instances, save_instances
from .metrics import MetricConfig, evaluate_instance, aggregate, save_report, render_report_text
from .parsing import parse_rollout
from .policy import PolicyConfig, RolloutGroup, grpo_advantages, grpo_objective, tapo_objective, tapo_temporal_loss
from .queries import RemoteQueryClient, generate_query
from .rewards import RewardConfig, score_rollout
from .tracks import Trajectory

_CONFIG_SECTIONS = {
    "reward": RewardConfig,
    "metric": MetricConfig,
    "policy": PolicyConfig,
    "builder": BuilderConfig,
}


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config root must be a JSON object")
    unknown = set(data) - set(_CONFIG_SECTIONS)
    if unknown:
        raise ValueError(f"{path}: unknown config section: {sorted(unknown)[0]}")
    return data


def _section_config(cls, file_config: dict, section: str):
    values = dict(file_config.get(section, {}))
    known = {f for f in cls.__dataclass_fields__}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"config section {section!r}: unknown key: {sorted(unknown)[0]}")
    return cls(**values)


def _read_jsonl(path: str | Path) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise ValueError(f"{path}:{lineno}: expected a JSON object per line")
            records.append(record)
    return records


def _load_predictions(path: str | Path) -> dict[str, dict[int, Trajectory]]:
    """Prediction records: {"instance_id": ..., "trajectories": {oid: [{frame, bbox}]}}."""
    out: dict[str, dict[int, Trajectory]] = {}
    for record in _read_jsonl(path):
        extra = set(record) - {"instance_id", "trajectories"}
        if extra:
            raise ValueError(f"{path}: unknown prediction field: {sorted(extra)[0]}")
        if "instance_id" not in record or "trajectories" not in record:
            raise ValueError(f"{path}: prediction records need instance_id and trajectories")
        iid = str(record["instance_id"])
        trajectories: dict[int, Trajectory] = {}
        for oid_str, entries in record["trajectories"].items():
            oid = int(oid_str)
            boxes = {}
            for entry in entries:
                boxes[int(entry["frame"])] = BBox(*(float(v) for v in entry["bbox"]))
            trajectories[oid] = Trajectory(oid, boxes)
        if iid in out:
            raise ValueError(f"{path}: duplicate predictions for instance {iid}")
        out[iid] = trajectories
    return out


def _write_jsonl(path: str | Path, records: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")))
            fh.write("\n")


def cmd_evaluate(args: argparse.Namespace) -> int:
    file_config = _load_config_file(args.config)
    cfg = _section_config(MetricConfig, file_config, "metric")
    instances = load_instances(args.instances)
    predictions = _load_predictions(args.predictions)

    known = {inst.instance_id for inst in instances}
    unknown = sorted(set(predictions) - known)
    if unknown:
        raise ValueError(f"predictions reference unknown instance id: {unknown[0]}")

    ordered = sorted(instances, key=lambda inst: inst.instance_id)
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        per_instance = list(
            pool.map(
                lambda inst: evaluate_instance(inst, predictions.get(inst.instance_id, {}), cfg),
                ordered,
            )
        )
    report = aggregate(per_instance)
    save_report(args.out, report, fmt=args.format)
    sys.stdout.write(render_report_text(report).splitlines()[-1] + "\n")
    return 0


def cmd_reward(args: argparse.Namespace) -> int:
    file_config = _load_config_file(args.config)
    reward_cfg = _section_config(RewardConfig, file_config, "reward")
    policy_cfg = _section_config(PolicyConfig, file_config, "policy")

    instances = load_instances(args.instances)
    if len(instances) != 1:
        raise ValueError(
            f"reward scoring expects exactly one instance record (a rollout "
            f"group shares one input), got {len(instances)}"
        )
    instance = instances[0]

    rollouts = _read_jsonl(args.rollouts)
    texts = []
    for record in rollouts:
        if "text" not in record:
            raise ValueError(f"{args.rollouts}: rollout records need a 'text' field")
        texts.append(str(record["text"]))
    if not texts:
        raise ValueError(f"{args.rollouts}: no rollouts to score")

    breakdowns = [score_rollout(parse_rollout(t), instance, reward_cfg) for t in texts]
    totals = [b.total for b in breakdowns]
    advantages = grpo_advantages(totals, policy_cfg) if len(totals) >= 2 else [None] * len(totals)

    rows = [
        {
            "index": i,
            "thinking_format": b.thinking_format,
            "answer_format": b.answer_format,
            "spatial": b.spatial,
            "mcp": b.mcp,
            "total": b.total,
            "advantage": advantages[i],
        }
        for i, b in enumerate(breakdowns)
    ]
    if args.format == "structured":
        _write_jsonl(args.out, rows)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            for row in rows:
                adv = "n/a" if row["advantage"] is None else f"{row['advantage']:.6f}"
                fh.write(
                    f"rollout {row['index']}: think={row['thinking_format']:.1f} "
                    f"answer={row['answer_format']:.1f} spatial={row['spatial']:.6f} "
                    f"mcp={row['mcp']:.6f} total={row['total']:.6f} advantage={adv}\n"
                )
    sys.stdout.write(f"scored {len(rows)} rollouts against {instance.instance_id}\n")
    return 0


def cmd_grpo_sim(args: argparse.Namespace) -> int:
    file_config = _load_config_file(args.config)
    cfg = _section_config(PolicyConfig, file_config, "policy")

    steps = []
    for i, record in enumerate(_read_jsonl(args.trace)):
        allowed = {"rewards", "logp_new", "logp_old", "logp_ref", "logp_masked"}
        extra = set(record) - allowed
        if extra:
            raise ValueError(f"{args.trace}: step {i}: unknown field: {sorted(extra)[0]}")
        if "rewards" not in record:
            raise ValueError(f"{args.trace}: step {i}: missing rewards")
        group = RolloutGroup(
            rewards=tuple(record["rewards"]),
            logp_new=tuple(record["logp_new"]) if "logp_new" in record else None,
            logp_old=tuple(record["logp_old"]) if "logp_old" in record else None,
            logp_ref=tuple(record["logp_ref"]) if "logp_ref" in record else None,
            logp_masked=tuple(record["logp_masked"]) if "logp_masked" in record else None,
        )
        advantages = grpo_advantages(group.rewards, cfg)
        j_grpo = grpo_objective(group, advantages, cfg)
        if group.logp_masked is not None:
            l_track = tapo_temporal_loss(group)
            j_tapo = tapo_objective(group, advantages, cfg)
        else:
            l_track = None
            j_tapo = None
        steps.append(
            {
                "step": i,
                "advantages": advantages,
                "j_grpo": j_grpo,
                "l_track": l_track,
                "j_tapo": j_tapo,
            }
        )

    if args.format == "structured":
        payload = json.dumps({"steps": steps}, indent=2, sort_keys=True) + "\n"
    else:
        def fmt(v):
            return "n/a" if v is None else f"{v:.8f}"

        payload = "".join(
            f"step {s['step']}: J_GRPO={fmt(s['j_grpo'])} "
            f"L_track={fmt(s['l_track'])} J_TAPO={fmt(s['j_tapo'])}\n"
            for s in steps
        )
    Path(args.out).write_text(payload, encoding="utf-8")
    sys.stdout.write(f"processed {len(steps)} trace steps\n")
    return 0


def _write_manifest(path: Path, split: str, sequences: tuple[str, ...], count: int) -> None:
    payload = {"split": split, "sequences": list(sequences), "instances": count}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_build_dataset(args: argparse.Namespace) -> int:
    file_config = _load_config_file(args.config)
    builder_cfg = _section_config(BuilderConfig, file_config, "builder")

    sequences = discover_sequences(args.gt_root)
    client = None
    if args.query_mode == "remote":
        if not args.remote_url:
            raise ValueError("--query-mode remote requires --remote-url")
        client = RemoteQueryClient(base_url=args.remote_url, model=args.remote_model)

    per_sequence: dict[str, list[QueryInstance]] = {}
    for seq_id in sorted(sequences):
        detections = parse_mot_ground_truth(sequences[seq_id])
        built: list[QueryInstance] = []
        for kind in args.kinds:
            built.extend(
                build_instances(
                    detections, seq_id, query_kind=kind, rng_seed=args.seed,
                    window=(args.window[0], args.window[1]), config=builder_cfg,
                )
            )
        if args.query_mode == "remote":
            built = [
                replace(inst, query_text=generate_query(inst, mode="remote", client=client))
                for inst in built
            ]
        per_sequence[seq_id] = sorted(built, key=lambda inst: inst.instance_id)

    manifest = split_sequences(sorted(sequences), args.ratio, rng_seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    counts = {}
    for split, split_seqs in (("train", manifest.train_sequences),
                              ("test", manifest.test_sequences)):
        rows = [inst for seq in split_seqs for inst in per_sequence.get(seq, [])]
        rows.sort(key=lambda inst: inst.instance_id)
        save_instances(out / f"{split}.jsonl", rows)
        counts[split] = len(rows)
        _write_manifest(out / f"{split}_manifest.json", split, split_seqs, len(rows))

    sys.stdout.write(
        f"built {counts['train']} train / {counts['test']} test instances "
        f"over {len(sequences)} sequences\n"
    )
    return 0


def cmd_export_mot(args: argparse.Namespace) -> int:
    instances = load_instances(args.instances)
    predictions = _load_predictions(args.predictions)
    known = {inst.instance_id for inst in instances}
    unknown = sorted(set(predictions) - known)
    if unknown:
        raise ValueError(f"predictions reference unknown instance id: {unknown[0]}")
    written = export_mot_segments(instances, predictions, args.out)
    sys.stdout.write(f"wrote {len(written)} sequence file(s) to {args.out}\n")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trackrl",
        description="Rewards, metrics, policy objectives, and dataset "
                    "construction for language-queried tracking.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=1, help="parallelism degree")
        p.add_argument("--out", required=True, help="output file or directory")
        p.add_argument("--format", choices=("text", "structured"), default="structured")

    p = sub.add_parser("build-dataset", help="construct query instances from MOT ground truth")
    common(p)
    p.add_argument("--gt-root", required=True, help="directory of <seq>/gt/gt.txt trees")
    p.add_argument("--ratio", type=float, default=0.8, help="train fraction of sequences")
    p.add_argument("--window", type=int, nargs=2, default=(5, 6), metavar=("MIN", "MAX"))
    p.add_argument("--kinds", nargs="+", default=["single"],
                   choices=("single", "multi", "occlusion"))
    p.add_argument("--query-mode", choices=("template", "remote"), default="template")
    p.add_argument("--remote-url", default=None)
    p.add_argument("--remote-model", default="default")
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("evaluate", help="metric report for predictions against instances")
    common(p)
    p.add_argument("--instances", required=True)
    p.add_argument("--predictions", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("reward", help="score raw rollouts against one instance")
    common(p)
    p.add_argument("--instances", required=True, help="file with exactly one instance record")
    p.add_argument("--rollouts", required=True, help="JSONL of {\"text\": ...} rollouts")
    p.set_defaults(func=cmd_reward)

    p = sub.add_parser("export-mot", help="write predictions as MOT-format segment files")
    common(p)
    p.add_argument("--instances", required=True)
    p.add_argument("--predictions", required=True)
    p.set_defaults(func=cmd_export_mot)

    p = sub.add_parser("grpo-sim", help="replay a reward/log-prob trace and print objectives")
    common(p)
    p.add_argument("--trace", required=True)
    p.set_defaults(func=cmd_grpo_sim)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - invariant violations map to exit 2
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
