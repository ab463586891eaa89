import assert from "node:assert/strict";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { test } from "node:test";

import { initCheckpoint, matVec, TwoTowerEncoder } from "../src/encoder.js";
import { textFeatures } from "../src/features.js";
import { finetune, loadManifest, textsFromPairs, verifyPairsFile } from "../src/finetune.js";
import { encodePng } from "./helpers.js";

const T1 = "close a drawer with a drawer handle";
const T2 = "open a drawer with a drawer handle";

/** Synthetic drawer-ish dataset: a red block slides with progress. */
function writeDataset(dir: string, n: number): string {
  fs.mkdirSync(path.join(dir, "images"), { recursive: true });
  const manifest: string[] = [];
  for (let k = 0; k < n; k++) {
    const y = -0.2 * (k / (n - 1));
    const block = Math.round((-y / 0.2) * 24);
    const png = encodePng(32, 32, (x, yy) =>
      x >= block && x < block + 6 && yy >= 12 && yy < 20 ? [220, 60, 50] : [40, 40, 40]);
    const rel = `images/drawer_${String(k).padStart(6, "0")}.png`;
    fs.writeFileSync(path.join(dir, rel), png);
    manifest.push(JSON.stringify({ task: "drawer-close", k, y, image: rel }));
  }
  const manifestPath = path.join(dir, "manifest.jsonl");
  fs.writeFileSync(manifestPath, manifest.join("\n") + "\n");
  return manifestPath;
}

function writePairs(dir: string, samples: { y: number }[], count: number): void {
  const lines: string[] = [];
  for (let i = 0; i < count; i++) {
    const a = i % samples.length;
    const b = (i * 7 + 3) % samples.length;
    if (a === b) continue;
    const order = samples[b].y > samples[a].y ? [T1, T2] : [T2, T1];
    lines.push(JSON.stringify({ i1: a, i2: b, t1: order[0], t2: order[1] }));
  }
  fs.writeFileSync(path.join(dir, "pairs.jsonl"), lines.join("\n") + "\n");
}

function signAccuracy(ckptDir: string, manifestPath: string,
  enc: TwoTowerEncoder): number {
  const samples = loadManifest(manifestPath);
  const g1 = matVec(enc.ckpt.wTxt, textFeatures(T1));
  const g2 = matVec(enc.ckpt.wTxt, textFeatures(T2));
  const cos = (a: Float64Array, b: Float64Array) => {
    let ab = 0, na = 0, nb = 0;
    for (let i = 0; i < a.length; i++) {
      ab += a[i] * b[i];
      na += a[i] * a[i];
      nb += b[i] * b[i];
    }
    return ab / (Math.sqrt(na) * Math.sqrt(nb) || 1);
  };
  let hits = 0, total = 0;
  for (let i = 0; i < samples.length; i++) {
    for (let j = 0; j < samples.length; j += 3) {
      if (i === j || samples[i].y === samples[j].y) continue;
      const hi = matVec(enc.ckpt.wImg, samples[i].features!);
      const hj = matVec(enc.ckpt.wImg, samples[j].features!);
      const d = hi.map((v, k) => v - hj[k]) as Float64Array;
      const diff = cos(d, g1) - cos(d, g2);
      hits += diff * (samples[i].y - samples[j].y) >= 0 ? 1 : 0;
      total++;
    }
  }
  return hits / total;
}

test("one iteration on a two-sample dataset runs and writes state", () => {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "bridge-ft-"));
  const manifestPath = writeDataset(dir, 2);
  const result = finetune({
    manifestPath, iterations: 1, learningRate: 0.05, batchSize: 2,
    seed: 1, instruction: T1, opposite: T2,
  }, initCheckpoint(1));
  assert.equal(result.losses.length, 1);
  assert.ok(Number.isFinite(result.losses[0]));
  assert.equal(result.ckpt.meta.trained, true);
});

test("loss trends down: late-window mean <= early-window mean", () => {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "bridge-ft-"));
  const manifestPath = writeDataset(dir, 24);
  const result = finetune({
    manifestPath, iterations: 200, learningRate: 0.05, batchSize: 8,
    seed: 2, instruction: T1, opposite: T2,
  }, initCheckpoint(2));
  const mean = (xs: number[]) => xs.reduce((a, b) => a + b, 0) / xs.length;
  assert.ok(mean(result.losses.slice(100, 200)) <= mean(result.losses.slice(0, 100)),
    "averaged loss failed to decrease");
});

test("fine-tuning raises direction-sign accuracy on held-in pairs", () => {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "bridge-ft-"));
  const manifestPath = writeDataset(dir, 40);
  const base = initCheckpoint(3);
  const before = signAccuracy(dir, manifestPath, new TwoTowerEncoder(structuredClone(base)));
  const result = finetune({
    manifestPath, iterations: 600, learningRate: 0.05, batchSize: 8,
    seed: 3, instruction: T1, opposite: T2,
  }, base);
  const after = signAccuracy(dir, manifestPath, new TwoTowerEncoder(result.ckpt));
  assert.ok(after > before + 0.05, `accuracy ${before} -> ${after}`);
  assert.ok(after > 0.85, `expected strong fit, got ${after}`);
});

test("texts are recoverable from pairs.jsonl and labels verify", () => {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "bridge-ft-"));
  const manifestPath = writeDataset(dir, 10);
  const samples = loadManifest(manifestPath);
  writePairs(dir, samples, 30);
  const texts = textsFromPairs(path.join(dir, "pairs.jsonl"), samples);
  assert.equal(texts.instruction, T1);
  assert.equal(texts.opposite, T2);
  const checked = verifyPairsFile(path.join(dir, "pairs.jsonl"), samples, T1, T2);
  assert.ok(checked > 0);
  // A corrupted label must be caught.
  const lines = fs.readFileSync(path.join(dir, "pairs.jsonl"), "utf-8")
    .split("\n").filter(Boolean);
  const bad = JSON.parse(lines[0]);
  [bad.t1, bad.t2] = [bad.t2, bad.t1];
  fs.writeFileSync(path.join(dir, "pairs.jsonl"),
    [JSON.stringify(bad), ...lines.slice(1)].join("\n") + "\n");
  assert.throws(() => verifyPairsFile(path.join(dir, "pairs.jsonl"), samples, T1, T2));
});

test("needs at least two samples", () => {
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "bridge-ft-"));
  const manifestPath = writeDataset(dir, 1);
  assert.throws(() => finetune({
    manifestPath, iterations: 1, learningRate: 0.05, batchSize: 1,
    seed: 1, instruction: T1, opposite: T2,
  }, initCheckpoint(1)));
});
