/**
 * Node bindings for the vrskit reward and GRPO-advantage pipeline.
 *
 * The bindings hold no state of their own: every call round-trips through
 * the vrskit CLI and its JSONL wire formats, so results are identical to
 * the `reward` and `grpo-advantages` subcommands by construction. Calls are
 * fully async (child processes), safe to issue concurrently, and never
 * block the event loop during heavy batches.
 */

import { execFile } from "node:child_process";
import { mkdtemp, readFile, rm, writeFile } from "node:fs/promises";
import { tmpdir } from "node:os";
import { join } from "node:path";

/** Version of the core library these bindings are pinned to. */
export const version = "0.1.0";

export type TaskName = "aks" | "ktg";

export interface GroundingCue {
  bbox_2d: [number, number, number, number];
  point_2d: [number, number];
}

export type AksGroundTruth = { option: "A" | "B" };
export type KtgGroundTruth = { cues: GroundingCue[] };
export type GroundTruth = AksGroundTruth | KtgGroundTruth;

export interface BatchItem {
  /** Raw model output, <think>...</think><answer>...</answer>. */
  response: string;
  gt: GroundTruth;
}

/** Reward-threshold/weight overrides; unset fields keep the built-in defaults. */
export interface RewardConfigOverrides {
  eta?: number;
  gamma_box?: number;
  gamma_pt?: number;
  alpha_iou?: number;
  alpha_boxl1?: number;
  alpha_ptl1?: number;
  lambda_f_aks?: number;
  lambda_a_aks?: number;
  lambda_f_ktg?: number;
  lambda_a_ktg?: number;
  scale?: number;
}

export interface BatchRequest {
  task: TaskName;
  items: BatchItem[];
  config?: RewardConfigOverrides;
}

export interface MatchingResult {
  /** One-to-one (prediction index, ground-truth index) pairs. */
  pairs: [number, number][];
  total: number;
}

/** One scored response; field names mirror the rewards JSONL schema. */
export interface RewardBreakdown {
  format: number;
  format_max: number | null;
  accuracy: number;
  total: number;
  matching: MatchingResult | null;
  diagnostics: string[];
}

/** Path of the vrskit executable; override with the VRSKIT_CLI env var. */
function cliPath(): string {
  return process.env.VRSKIT_CLI ?? "vrskit";
}

function runCli(args: string[]): Promise<void> {
  return new Promise((resolve, reject) => {
    execFile(cliPath(), args, { maxBuffer: 64 * 1024 * 1024 }, (error, _stdout, stderr) => {
      if (!error) {
        resolve();
        return;
      }
      // The CLI reports failures as one JSON object on stderr; surface its
      // message verbatim so callers see the same diagnostic text.
      const line = stderr.trim().split("\n").pop() ?? "";
      try {
        const report = JSON.parse(line) as { error?: { message?: string } };
        if (report.error?.message) {
          reject(new Error(report.error.message));
          return;
        }
      } catch {
        // fall through to the raw error
      }
      reject(new Error(`vrskit invocation failed: ${stderr.trim() || error.message}`));
    });
  });
}

async function readJsonl(path: string): Promise<unknown[]> {
  const text = await readFile(path, "utf-8");
  return text
    .split("\n")
    .filter((line) => line.trim().length > 0)
    .map((line) => JSON.parse(line));
}

async function withWorkDir<T>(fn: (dir: string) => Promise<T>): Promise<T> {
  const dir = await mkdtemp(join(tmpdir(), "vrskit-bindings-"));
  try {
    return await fn(dir);
  } finally {
    await rm(dir, { recursive: true, force: true });
  }
}

/**
 * Score a batch of responses against their ground truths.
 *
 * Results are element-for-element identical to the `vrskit reward`
 * subcommand on the same data. Malformed responses never throw: they come
 * back as zero-total breakdowns carrying diagnostics. Schema-level problems
 * (e.g. invalid ground truth shape in the config) raise with the CLI's
 * diagnostic text.
 */
export async function score(batch: BatchRequest): Promise<RewardBreakdown[]> {
  return withWorkDir(async (dir) => {
    const inPath = join(dir, "responses.jsonl");
    const outPath = join(dir, "rewards.jsonl");
    const lines = batch.items.map((item, index) =>
      JSON.stringify({ id: index, response: item.response, gt: item.gt }),
    );
    await writeFile(inPath, lines.map((l) => l + "\n").join(""), "utf-8");

    const args = ["reward", "--task", batch.task, "--in", inPath, "--out", outPath];
    if (batch.config && Object.keys(batch.config).length > 0) {
      const cfgPath = join(dir, "config.json");
      await writeFile(cfgPath, JSON.stringify({ reward: batch.config }), "utf-8");
      args.push("--config", cfgPath);
    }
    await runCli(args);

    const rows = (await readJsonl(outPath)) as Array<Record<string, unknown>>;
    return rows.map((row) => ({
      format: row.format as number,
      format_max: (row.format_max ?? null) as number | null,
      accuracy: row.accuracy as number,
      total: row.total as number,
      matching: (row.matching ?? null) as MatchingResult | null,
      diagnostics: (row.diagnostics ?? []) as string[],
    }));
  });
}

/**
 * Group-standardized advantages: (R - mean) / population std, all zeros for
 * constant-reward groups. Throws for groups smaller than 2, with the same
 * diagnostic text as the `vrskit grpo-advantages` subcommand.
 */
export async function advantages(rewards: number[]): Promise<number[]> {
  const [single] = await advantagesBatch([rewards]);
  return single;
}

/**
 * Batched variant for training-loop hot paths: one CLI invocation for many
 * rollout groups. Group i in the result corresponds to groups[i].
 */
export async function advantagesBatch(groups: number[][]): Promise<number[][]> {
  return withWorkDir(async (dir) => {
    const inPath = join(dir, "groups.jsonl");
    const outPath = join(dir, "advantages.jsonl");
    const lines = groups.map((rewards, index) =>
      JSON.stringify({ query_id: `g${index}`, rewards }),
    );
    await writeFile(inPath, lines.map((l) => l + "\n").join(""), "utf-8");
    await runCli(["grpo-advantages", "--in", inPath, "--out", outPath]);
    const rows = (await readJsonl(outPath)) as Array<{ advantages: number[] }>;
    return rows.map((row) => row.advantages);
  });
}
