/**
 * Node bindings for the trackrl engine.
 *
 * Every entry point is a stateless wrapper that shells out to the trackrl
 * command line through its documented file formats; no scoring or
 * objective logic lives on this side, so results are numerically
 * identical to the primary engine by construction. Failures surface as
 * exceptions carrying the engine's own error message.
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export interface BindingOptions {
  /** Command used to invoke the engine; defaults to `python3 -m trackrl`. */
  pythonCommand?: string[];
}

export interface TrackRlConfig {
  reward?: Record<string, unknown>;
  metric?: Record<string, unknown>;
  policy?: Record<string, unknown>;
  builder?: Record<string, unknown>;
}

export interface RewardBreakdownRow {
  index: number;
  thinking_format: number;
  answer_format: number;
  spatial: number;
  mcp: number;
  total: number;
  advantage: number | null;
}

export interface RolloutGroupRecord {
  rewards: number[];
  logp_new?: number[];
  logp_old?: number[];
  logp_ref?: number[];
  logp_masked?: number[];
}

export interface InstanceMetricsRecord {
  instance_id: string;
  source_sequence: string;
  mcp: number | null;
  motp: number | null;
  cle_px: number | null;
  nde: number | null;
  mota: number | null;
  frames_evaluated: number;
  flags: string[];
}

export interface MetricReportRecord {
  corpus: {
    mcp: number | null;
    motp: number | null;
    cle_px: number | null;
    nde: number | null;
    mota: number | null;
    frames_evaluated: number;
    instances: number;
  };
  per_sequence: InstanceMetricsRecord[];
}

interface SimStep {
  step: number;
  advantages: number[];
  j_grpo: number;
  l_track: number | null;
  j_tapo: number | null;
}

function pythonCommand(opts?: BindingOptions): string[] {
  if (opts?.pythonCommand && opts.pythonCommand.length > 0) {
    return opts.pythonCommand;
  }
  const env = process.env.TRACKRL_PYTHON;
  if (env && env.trim()) {
    return env.trim().split(/\s+/);
  }
  return ["python3", "-m", "trackrl"];
}

function runCli(args: string[], opts?: BindingOptions): void {
  const [cmd, ...prefix] = pythonCommand(opts);
  const result = spawnSync(cmd, [...prefix, ...args], { encoding: "utf-8" });
  if (result.error) {
    throw new Error(`failed to launch trackrl engine: ${result.error.message}`);
  }
  if (result.status !== 0) {
    const message = (result.stderr || result.stdout || "").trim();
    throw new Error(message || `trackrl exited with status ${result.status}`);
  }
}

function withWorkdir<T>(body: (dir: string) => T): T {
  const dir = mkdtempSync(join(tmpdir(), "trackrl-bindings-"));
  try {
    return body(dir);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

function writeJsonl(path: string, records: unknown[]): void {
  writeFileSync(path, records.map((r) => JSON.stringify(r)).join("\n") + "\n");
}

function readJsonl<T>(path: string): T[] {
  return readFileSync(path, "utf-8")
    .split("\n")
    .filter((line) => line.trim().length > 0)
    .map((line) => JSON.parse(line) as T);
}

function configArgs(dir: string, config?: TrackRlConfig): string[] {
  if (!config) {
    return [];
  }
  const path = join(dir, "config.json");
  writeFileSync(path, JSON.stringify(config));
  return ["--config", path];
}

/**
 * Score raw rollout texts against one instance record. Returns one
 * breakdown row per rollout; groups of two or more also carry the
 * group-normalized advantage of each total.
 */
export function scoreRollouts(
  rolloutTexts: string[],
  instanceRecord: unknown,
  config?: TrackRlConfig,
  opts?: BindingOptions,
): RewardBreakdownRow[] {
  if (rolloutTexts.length === 0) {
    throw new Error("scoreRollouts needs at least one rollout text");
  }
  return withWorkdir((dir) => {
    const instanceFile = join(dir, "instance.jsonl");
    const rolloutsFile = join(dir, "rollouts.jsonl");
    const outFile = join(dir, "rewards.jsonl");
    writeJsonl(instanceFile, [instanceRecord]);
    writeJsonl(rolloutsFile, rolloutTexts.map((text) => ({ text })));
    runCli(
      [
        "reward",
        "--instances", instanceFile,
        "--rollouts", rolloutsFile,
        "--out", outFile,
        ...configArgs(dir, config),
      ],
      opts,
    );
    return readJsonl<RewardBreakdownRow>(outFile);
  });
}

/** Score a single rollout text; the advantage column is null by definition. */
export function scoreRollout(
  rolloutText: string,
  instanceRecord: unknown,
  config?: TrackRlConfig,
  opts?: BindingOptions,
): RewardBreakdownRow {
  return scoreRollouts([rolloutText], instanceRecord, config, opts)[0];
}

/**
 * Run the trajectory metric suite over instance records and prediction
 * records, returning the corpus report with its per-instance breakdown.
 */
export function evaluateTrajectories(
  instanceRecords: unknown[],
  predictionRecords: unknown[],
  config?: TrackRlConfig,
  opts?: BindingOptions,
): MetricReportRecord {
  return withWorkdir((dir) => {
    const instancesFile = join(dir, "instances.jsonl");
    const predictionsFile = join(dir, "predictions.jsonl");
    const outFile = join(dir, "report.json");
    writeJsonl(instancesFile, instanceRecords);
    writeJsonl(predictionsFile, predictionRecords);
    runCli(
      [
        "evaluate",
        "--instances", instancesFile,
        "--predictions", predictionsFile,
        "--out", outFile,
        "--format", "structured",
        ...configArgs(dir, config),
      ],
      opts,
    );
    return JSON.parse(readFileSync(outFile, "utf-8")) as MetricReportRecord;
  });
}

function simulate(
  group: RolloutGroupRecord,
  config?: TrackRlConfig,
  opts?: BindingOptions,
): SimStep {
  return withWorkdir((dir) => {
    const traceFile = join(dir, "trace.jsonl");
    const outFile = join(dir, "sim.json");
    writeJsonl(traceFile, [group]);
    runCli(
      [
        "grpo-sim",
        "--trace", traceFile,
        "--out", outFile,
        "--format", "structured",
        ...configArgs(dir, config),
      ],
      opts,
    );
    const payload = JSON.parse(readFileSync(outFile, "utf-8")) as { steps: SimStep[] };
    return payload.steps[0];
  });
}

/** Group-normalized advantages of a reward vector. */
export function grpoAdvantages(
  rewards: number[],
  config?: TrackRlConfig,
  opts?: BindingOptions,
): number[] {
  const zeros = rewards.map(() => 0);
  const group: RolloutGroupRecord = {
    rewards,
    logp_new: zeros,
    logp_old: zeros,
    logp_ref: zeros,
  };
  return simulate(group, config, opts).advantages;
}

/** Clipped-surrogate objective of a rollout group record. */
export function grpoObjective(
  group: RolloutGroupRecord,
  config?: TrackRlConfig,
  opts?: BindingOptions,
): number {
  return simulate(group, config, opts).j_grpo;
}

/**
 * Combined objective (clipped surrogate plus the weighted temporal term).
 * The group record must carry logp_masked.
 */
export function tapoObjective(
  group: RolloutGroupRecord,
  config?: TrackRlConfig,
  opts?: BindingOptions,
): number {
  if (!group.logp_masked) {
    throw new Error("tapoObjective requires logp_masked in the group record");
  }
  const value = simulate(group, config, opts).j_tapo;
  if (value === null) {
    throw new Error("engine returned no combined objective for the group");
  }
  return value;
}
