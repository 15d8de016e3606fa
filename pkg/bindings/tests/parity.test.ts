/**
 * Parity tests: bindings output must be element-wise identical to the
 * vrskit CLI's JSONL outputs on the same fixture corpus.
 */

import { execFile } from "node:child_process";
import { mkdtemp, rm, readFile, writeFile } from "node:fs/promises";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { promisify } from "node:util";
import { afterAll, describe, expect, it } from "vitest";

import {
  BatchItem,
  GroundingCue,
  RewardBreakdown,
  TaskName,
  advantages,
  advantagesBatch,
  score,
  version,
} from "../src/index.js";

const execFileAsync = promisify(execFile);
const CLI = process.env.VRSKIT_CLI ?? "vrskit";

const workDirs: string[] = [];

afterAll(async () => {
  await Promise.all(workDirs.map((dir) => rm(dir, { recursive: true, force: true })));
});

async function newWorkDir(): Promise<string> {
  const dir = await mkdtemp(join(tmpdir(), "vrskit-parity-"));
  workDirs.push(dir);
  return dir;
}

/** Deterministic PRNG so the fixture corpus is stable across runs. */
function mulberry32(seed: number): () => number {
  return () => {
    seed |= 0;
    seed = (seed + 0x6d2b79f5) | 0;
    let t = Math.imul(seed ^ (seed >>> 15), 1 | seed);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function randInt(rng: () => number, lo: number, hi: number): number {
  return lo + Math.floor(rng() * (hi - lo + 1));
}

function randomCue(rng: () => number): GroundingCue {
  let [x1, x2] = [randInt(rng, 0, 840), randInt(rng, 0, 840)].sort((a, b) => a - b);
  let [y1, y2] = [randInt(rng, 0, 840), randInt(rng, 0, 840)].sort((a, b) => a - b);
  x2 = Math.min(840, Math.max(x2, x1 + 2));
  y2 = Math.min(840, Math.max(y2, y1 + 2));
  return {
    bbox_2d: [x1, y1, x2, y2],
    point_2d: [randInt(rng, x1, x2), randInt(rng, y1, y2)],
  };
}

function ktgItem(rng: () => number): BatchItem {
  const gtCues = Array.from({ length: randInt(rng, 1, 4) }, () => randomCue(rng));
  const roll = rng();
  let response: string;
  if (roll < 0.5) {
    // valid: some matched cues, some random
    const predCues = gtCues.slice(0, randInt(rng, 1, gtCues.length));
    while (rng() < 0.4) predCues.push(randomCue(rng));
    response = `<think>scan</think><answer>${JSON.stringify(predCues)}</answer>`;
  } else if (roll < 0.65) {
    response = `<answer>${JSON.stringify(gtCues)}</answer>`; // missing think
  } else if (roll < 0.8) {
    response = "<think>x</think><answer>not json</answer>";
  } else {
    const bad = [{ bbox_2d: [900, 0, 950, 10], point_2d: [901, 5] }];
    response = `<think>x</think><answer>${JSON.stringify(bad)}</answer>`;
  }
  return { response, gt: { cues: gtCues } };
}

function aksItem(rng: () => number): BatchItem {
  const gt = rng() < 0.5 ? "A" : "B";
  const roll = rng();
  let response: string;
  if (roll < 0.6) {
    const answer = rng() < 0.75 ? gt : gt === "A" ? "B" : "A";
    response = `<think>judging the frame</think><answer>${answer}</answer>`;
  } else if (roll < 0.8) {
    response = "<think>no answer tag</think>";
  } else {
    response = "<think>x</think><answer>C</answer>";
  }
  return { response, gt: { option: gt as "A" | "B" } };
}

/** Run the reward subcommand directly on the same records the bindings build. */
async function cliScore(task: TaskName, items: BatchItem[]): Promise<RewardBreakdown[]> {
  const dir = await newWorkDir();
  const inPath = join(dir, "responses.jsonl");
  const outPath = join(dir, "rewards.jsonl");
  const lines = items.map((item, index) =>
    JSON.stringify({ id: index, response: item.response, gt: item.gt }),
  );
  await writeFile(inPath, lines.map((l) => l + "\n").join(""), "utf-8");
  await execFileAsync(CLI, ["reward", "--task", task, "--in", inPath, "--out", outPath]);
  const text = await readFile(outPath, "utf-8");
  return text
    .split("\n")
    .filter((line) => line.trim().length > 0)
    .map((line) => {
      const row = JSON.parse(line);
      return {
        format: row.format,
        format_max: row.format_max ?? null,
        accuracy: row.accuracy,
        total: row.total,
        matching: row.matching ?? null,
        diagnostics: row.diagnostics ?? [],
      };
    });
}

describe("score parity with the CLI", () => {
  it("matches element-wise on a 1,000-record fixture corpus", async () => {
    const rng = mulberry32(20240811);
    const ktgItems = Array.from({ length: 500 }, () => ktgItem(rng));
    const aksItems = Array.from({ length: 500 }, () => aksItem(rng));

    for (const [task, items] of [
      ["ktg", ktgItems],
      ["aks", aksItems],
    ] as Array<[TaskName, BatchItem[]]>) {
      const viaBindings = await score({ task, items });
      const viaCli = await cliScore(task, items);
      expect(viaBindings.length).toBe(items.length);
      for (let i = 0; i < items.length; i++) {
        expect(viaBindings[i].total).toBe(viaCli[i].total);
        expect(viaBindings[i].format).toBe(viaCli[i].format);
        expect(viaBindings[i].accuracy).toBe(viaCli[i].accuracy);
        expect(viaBindings[i].matching).toEqual(viaCli[i].matching);
        expect(viaBindings[i].diagnostics).toEqual(viaCli[i].diagnostics);
      }
    }
  }, 120_000);

  it("scores a perfect AKS response at the 3.0 cap", async () => {
    const rows = await score({
      task: "aks",
      items: [{ response: "<think>clear</think><answer>A</answer>", gt: { option: "A" } }],
    });
    expect(rows).toHaveLength(1);
    expect(rows[0].total).toBe(3.0);
    expect(rows[0].format).toBe(1.0);
    expect(rows[0].accuracy).toBe(1.0);
  });

  it("returns an empty list for an empty batch", async () => {
    expect(await score({ task: "ktg", items: [] })).toEqual([]);
  });

  it("reports malformed responses as zero-total rows with diagnostics", async () => {
    const rows = await score({
      task: "ktg",
      items: [{ response: "garbage", gt: { cues: [randomCue(mulberry32(1))] } }],
    });
    expect(rows[0].total).toBe(0.0);
    expect(rows[0].diagnostics.length).toBeGreaterThan(0);
  });

  it("applies reward-config overrides", async () => {
    const cue = { bbox_2d: [100, 100, 200, 200] as [number, number, number, number],
                  point_2d: [150, 150] as [number, number] };
    const items = [{
      response: `<think>x</think><answer>${JSON.stringify([cue])}</answer>`,
      gt: { cues: [cue] },
    }];
    const boosted = await score({ task: "ktg", items, config: { lambda_a_ktg: 2.0 } });
    expect(boosted[0].total).toBe(9.0); // 1*3 + 2*3
  });

  it("raises the CLI's diagnostic text on schema violations", async () => {
    await expect(
      score({ task: "ktg", items: [], config: { eta: 42 } }),
    ).rejects.toThrow(/eta/);
  });
});

describe("advantages parity with the CLI", () => {
  async function cliAdvantages(groups: number[][]): Promise<number[][]> {
    const dir = await newWorkDir();
    const inPath = join(dir, "groups.jsonl");
    const outPath = join(dir, "advantages.jsonl");
    const lines = groups.map((rewards, index) =>
      JSON.stringify({ query_id: `g${index}`, rewards }),
    );
    await writeFile(inPath, lines.map((l) => l + "\n").join(""), "utf-8");
    await execFileAsync(CLI, ["grpo-advantages", "--in", inPath, "--out", outPath]);
    const text = await readFile(outPath, "utf-8");
    return text
      .split("\n")
      .filter((line) => line.trim().length > 0)
      .map((line) => JSON.parse(line).advantages);
  }

  it("matches element-wise on a 1,000-group fixture corpus", async () => {
    const rng = mulberry32(7);
    const groups = Array.from({ length: 1000 }, () =>
      Array.from({ length: randInt(rng, 2, 12) }, () => rng() * 6),
    );
    const viaBindings = await advantagesBatch(groups);
    const viaCli = await cliAdvantages(groups);
    expect(viaBindings.length).toBe(1000);
    for (let i = 0; i < groups.length; i++) {
      expect(viaBindings[i]).toEqual(viaCli[i]);
    }
  }, 120_000);

  it("matches on single-vector calls", async () => {
    const rng = mulberry32(13);
    for (let trial = 0; trial < 3; trial++) {
      const rewards = Array.from({ length: randInt(rng, 2, 8) }, () => rng() * 6);
      const single = await advantages(rewards);
      const [viaCli] = await cliAdvantages([rewards]);
      expect(single).toEqual(viaCli);
    }
  }, 60_000);

  it("standardizes two-point groups exactly", async () => {
    expect(await advantages([0, 2])).toEqual([-1, 1]);
  });

  it("zeroes constant-reward groups", async () => {
    expect(await advantages([3, 3, 3])).toEqual([0, 0, 0]);
  });

  it("rejects groups smaller than 2 with the CLI's message", async () => {
    await expect(advantages([1])).rejects.toThrow(/at least 2/);
  });
});

describe("version", () => {
  it("matches the core library version", async () => {
    const { stdout } = await execFileAsync(CLI, ["--version"]);
    expect(stdout.trim()).toBe(`vrskit ${version}`);
  });
});
