/**
 * Bridge entry point.
 *
 *   serve    --echo-test | --checkpoint ckpt.json  [--host H] [--port P]
 *   init     --seed N --out ckpt.json
 *   finetune --manifest data/manifest.jsonl --out ckpt.json
 *            [--from ckpt] [--iterations K] [--lr X] [--batch-size B]
 *            [--seed N] [--t1 "..."] [--t2 "..."] [--verify-pairs]
 */
import * as path from "node:path";

import { EchoEncoder, TwoTowerEncoder, initCheckpoint, loadCheckpoint,
  saveCheckpoint } from "./encoder.js";
import { finetune, loadManifest, textsFromPairs } from "./finetune.js";
import { serve } from "./server.js";

interface Flags {
  [key: string]: string | boolean;
}

function parseFlags(argv: string[]): Flags {
  const flags: Flags = {};
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (!arg.startsWith("--")) continue;
    const name = arg.slice(2);
    if (i + 1 < argv.length && !argv[i + 1].startsWith("--")) {
      flags[name] = argv[++i];
    } else {
      flags[name] = true;
    }
  }
  return flags;
}

function str(flags: Flags, name: string, fallback?: string): string {
  const v = flags[name];
  if (typeof v === "string") return v;
  if (fallback !== undefined) return fallback;
  throw new Error(`missing required flag --${name}`);
}

function num(flags: Flags, name: string, fallback: number): number {
  const v = flags[name];
  return typeof v === "string" ? Number(v) : fallback;
}

async function cmdServe(flags: Flags): Promise<void> {
  const echo = flags["echo-test"] === true;
  const ckptPath = typeof flags.checkpoint === "string" ? flags.checkpoint : null;
  if (echo === Boolean(ckptPath)) {
    throw new Error("serve needs exactly one of --echo-test or --checkpoint");
  }
  const encoder = echo
    ? new EchoEncoder()
    : new TwoTowerEncoder(loadCheckpoint(ckptPath!),
      `two-tower:${path.basename(ckptPath!)}`);
  await serve({
    host: str(flags, "host", "127.0.0.1"),
    port: num(flags, "port", 8901),
    encoder,
    deterministic: flags["deterministic"] !== "false",
  });
}

function cmdInit(flags: Flags): void {
  const out = str(flags, "out");
  const ckpt = initCheckpoint(num(flags, "seed", 0), num(flags, "dim", 16));
  saveCheckpoint(ckpt, out);
  console.log(out);
}

function cmdFinetune(flags: Flags): void {
  const manifestPath = str(flags, "manifest");
  const out = str(flags, "out");
  const from = typeof flags.from === "string"
    ? loadCheckpoint(flags.from)
    : initCheckpoint(num(flags, "seed", 0), num(flags, "dim", 16));

  let instruction = typeof flags.t1 === "string" ? flags.t1 : "";
  let opposite = typeof flags.t2 === "string" ? flags.t2 : "";
  if (!instruction || !opposite) {
    const pairsPath = path.join(path.dirname(manifestPath), "pairs.jsonl");
    const texts = textsFromPairs(pairsPath, loadManifest(manifestPath));
    instruction = instruction || texts.instruction;
    opposite = opposite || texts.opposite;
  }

  const result = finetune({
    manifestPath,
    iterations: num(flags, "iterations", 2000),
    learningRate: num(flags, "lr", 0.05),
    batchSize: num(flags, "batch-size", 8),
    seed: num(flags, "seed", 0),
    instruction,
    opposite,
    verifyPairs: flags["verify-pairs"] === true,
  }, from);

  saveCheckpoint(result.ckpt, out);
  const first = result.losses.slice(0, 50);
  const last = result.losses.slice(-50);
  const mean = (xs: number[]) => xs.reduce((a, b) => a + b, 0) / xs.length;
  console.error(`[finetune] loss ${mean(first).toFixed(4)} -> ${mean(last).toFixed(4)}` +
    (result.pairsVerified ? ` (verified ${result.pairsVerified} pair labels)` : ""));
  console.log(out);
}

async function main(): Promise<number> {
  const [command, ...rest] = process.argv.slice(2);
  const flags = parseFlags(rest);
  try {
    switch (command) {
      case "serve":
        await cmdServe(flags);
        return 0;
      case "init":
        cmdInit(flags);
        return 0;
      case "finetune":
        cmdFinetune(flags);
        return 0;
      default:
        console.error("usage: cli.js <serve|init|finetune> [flags]");
        return 2;
    }
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

main().then((code) => {
  if (code !== 0) process.exit(code);
});
