/**
 * Fine-tuning on progress-labeled image pairs.
 *
 * Per iteration: sample a pair of dataset images, order the task texts
 * by which image sits closer to the goal (ground truth from the stored
 * progress values, recomputed here rather than trusted from pairs.jsonl),
 * build the antisymmetric feature difference [h2-h1, h1-h2], embed the
 * ordered texts, and minimize the symmetric cross-entropy over the 2x2
 * cosine-logit matrix. Gradients are exact and hand-derived; the model
 * is two linear maps, nothing more.
 */
import * as fs from "node:fs";
import * as path from "node:path";

import { Checkpoint, matVec } from "./encoder.js";
import { imageFeatures, textFeatures } from "./features.js";
import { Rng } from "./rng.js";

export interface SampleRecord {
  task: string;
  k: number;
  y: number;
  image: string;
  features?: Float64Array;
}

export interface FinetuneJob {
  manifestPath: string;
  iterations: number;
  learningRate: number;
  batchSize: number;
  seed: number;
  instruction: string;
  opposite: string;
  verifyPairs?: boolean;
}

export interface FinetuneResult {
  ckpt: Checkpoint;
  losses: number[];
  pairsVerified: number;
}

export function loadManifest(manifestPath: string): SampleRecord[] {
  const base = path.dirname(manifestPath);
  const lines = fs.readFileSync(manifestPath, "utf-8").split("\n").filter(Boolean);
  return lines.map((line) => {
    const rec = JSON.parse(line) as SampleRecord;
    rec.features = imageFeatures(fs.readFileSync(path.join(base, rec.image)));
    return rec;
  });
}

/** Recover (instruction, opposite) from a pairs.jsonl written alongside the
 * manifest: any non-tied pair plus its progress values pins the order. */
export function textsFromPairs(pairsPath: string, samples: SampleRecord[]):
  { instruction: string; opposite: string } {
  const lines = fs.readFileSync(pairsPath, "utf-8").split("\n").filter(Boolean);
  for (const line of lines) {
    const rec = JSON.parse(line) as { i1: number; i2: number; t1: string; t2: string };
    const y1 = samples[rec.i1].y;
    const y2 = samples[rec.i2].y;
    if (y1 === y2) continue;
    return y2 > y1
      ? { instruction: rec.t1, opposite: rec.t2 }
      : { instruction: rec.t2, opposite: rec.t1 };
  }
  throw new Error("pairs.jsonl has only tied pairs; pass the texts explicitly");
}

export function verifyPairsFile(pairsPath: string, samples: SampleRecord[],
  instruction: string, opposite: string): number {
  const lines = fs.readFileSync(pairsPath, "utf-8").split("\n").filter(Boolean);
  let checked = 0;
  for (const line of lines) {
    const rec = JSON.parse(line) as { i1: number; i2: number; t1: string; t2: string };
    const want = samples[rec.i2].y > samples[rec.i1].y
      ? [instruction, opposite] : [opposite, instruction];
    if (rec.t1 !== want[0] || rec.t2 !== want[1]) {
      throw new Error(`pairs.jsonl label mismatch at pair (${rec.i1}, ${rec.i2})`);
    }
    checked++;
  }
  return checked;
}

function norm(v: Float64Array): number {
  let s = 0;
  for (const x of v) s += x * x;
  return Math.sqrt(s);
}

function dot(a: Float64Array, b: Float64Array): number {
  let s = 0;
  for (let i = 0; i < a.length; i++) s += a[i] * b[i];
  return s;
}

/** grad = d cos(a,b) / d a, given cached norms and the cosine value. */
function cosGradA(a: Float64Array, b: Float64Array, na: number, nb: number,
  c: number): Float64Array {
  const out = new Float64Array(a.length);
  for (let i = 0; i < a.length; i++) {
    out[i] = b[i] / (na * nb) - (c * a[i]) / (na * na);
  }
  return out;
}

function addOuter(w: number[][], g: Float64Array, x: Float64Array, scale: number): void {
  for (let r = 0; r < w.length; r++) {
    const gr = g[r] * scale;
    if (gr === 0) continue;
    const row = w[r];
    for (let c = 0; c < row.length; c++) row[c] -= gr * x[c];
  }
}

export function finetune(job: FinetuneJob, ckpt: Checkpoint): FinetuneResult {
  if (job.iterations < 1) throw new Error("iterations must be at least 1");
  if (job.batchSize < 1) throw new Error("batch size must be at least 1");
  const samples = loadManifest(job.manifestPath);
  if (samples.length < 2) throw new Error("need at least 2 samples per task");
  let pairsVerified = 0;
  if (job.verifyPairs) {
    const pairsPath = path.join(path.dirname(job.manifestPath), "pairs.jsonl");
    pairsVerified = verifyPairsFile(pairsPath, samples, job.instruction, job.opposite);
  }

  const rng = new Rng(job.seed);
  const tInstr = textFeatures(job.instruction);
  const tOpp = textFeatures(job.opposite);
  const s = ckpt.logitScale;
  const losses: number[] = [];

  for (let iter = 0; iter < job.iterations; iter++) {
    let lossAcc = 0;
    let used = 0;
    for (let b = 0; b < job.batchSize; b++) {
      const i = rng.int(samples.length);
      let j = rng.int(samples.length - 1);
      if (j >= i) j++;
      const s1 = samples[i];
      const s2 = samples[j];

      // Ground-truth text order from progress (Algorithm step, not file trust).
      const [txt1, txt2] = s2.y > s1.y ? [tInstr, tOpp] : [tOpp, tInstr];

      const h1 = matVec(ckpt.wImg, s1.features!);
      const h2 = matVec(ckpt.wImg, s2.features!);
      const a1 = new Float64Array(ckpt.dim);
      for (let d = 0; d < ckpt.dim; d++) a1[d] = h2[d] - h1[d];
      const a2 = new Float64Array(ckpt.dim);
      for (let d = 0; d < ckpt.dim; d++) a2[d] = -a1[d];
      // Antisymmetry by construction; keep the invariant loud.
      for (let d = 0; d < ckpt.dim; d++) {
        if (a2[d] !== -a1[d]) throw new Error("feature-difference antisymmetry broken");
      }
      const b1 = matVec(ckpt.wTxt, txt1);
      const b2 = matVec(ckpt.wTxt, txt2);

      const na = [norm(a1), norm(a2)];
      const nb = [norm(b1), norm(b2)];
      if (na[0] < 1e-12 || nb[0] < 1e-12 || nb[1] < 1e-12) continue;

      const A = [a1, a2];
      const B = [b1, b2];
      const c = [[0, 0], [0, 0]];
      for (let jj = 0; jj < 2; jj++) {
        for (let kk = 0; kk < 2; kk++) {
          c[jj][kk] = dot(A[jj], B[kk]) / (na[jj] * nb[kk]);
        }
      }
      const z = c.map((row) => row.map((v) => v * s));

      // Symmetric cross-entropy with the matching index as the label.
      const rowP = z.map((row) => {
        const m = Math.max(...row);
        const e = row.map((v) => Math.exp(v - m));
        const sum = e[0] + e[1];
        return e.map((v) => v / sum);
      });
      const colP = [0, 1].map((kk) => {
        const col = [z[0][kk], z[1][kk]];
        const m = Math.max(...col);
        const e = col.map((v) => Math.exp(v - m));
        const sum = e[0] + e[1];
        return e.map((v) => v / sum);
      });
      const loss = -0.25 * (Math.log(rowP[0][0]) + Math.log(rowP[1][1]) +
        Math.log(colP[0][0]) + Math.log(colP[1][1]));
      if (!Number.isFinite(loss)) {
        throw new Error(`loss diverged (NaN/inf) at iteration ${iter}`);
      }
      lossAcc += loss;
      used++;

      // dL/dz, then chain through the cosines into both towers.
      const dz = [[0, 0], [0, 0]];
      for (let jj = 0; jj < 2; jj++) {
        for (let kk = 0; kk < 2; kk++) {
          const dRow = rowP[jj][kk] - (jj === kk ? 1 : 0);
          const dCol = colP[kk][jj] - (jj === kk ? 1 : 0);
          dz[jj][kk] = 0.25 * (dRow + dCol) * s;
        }
      }
      const dA = [new Float64Array(ckpt.dim), new Float64Array(ckpt.dim)];
      const dB = [new Float64Array(ckpt.dim), new Float64Array(ckpt.dim)];
      for (let jj = 0; jj < 2; jj++) {
        for (let kk = 0; kk < 2; kk++) {
          const gA = cosGradA(A[jj], B[kk], na[jj], nb[kk], c[jj][kk]);
          const gB = cosGradA(B[kk], A[jj], nb[kk], na[jj], c[jj][kk]);
          for (let d = 0; d < ckpt.dim; d++) {
            dA[jj][d] += dz[jj][kk] * gA[d];
            dB[kk][d] += dz[jj][kk] * gB[d];
          }
        }
      }
      // dL/dh2 = dL/da1 - dL/da2; dL/dh1 is its negation, so the image
      // tower sees the feature-difference input directly.
      const dh2 = new Float64Array(ckpt.dim);
      for (let d = 0; d < ckpt.dim; d++) dh2[d] = dA[0][d] - dA[1][d];
      const xDiff = new Float64Array(s1.features!.length);
      for (let d = 0; d < xDiff.length; d++) {
        xDiff[d] = s2.features![d] - s1.features![d];
      }
      const lr = job.learningRate / job.batchSize;
      addOuter(ckpt.wImg, dh2, xDiff, lr);
      addOuter(ckpt.wTxt, dB[0], txt1, lr);
      addOuter(ckpt.wTxt, dB[1], txt2, lr);
    }
    losses.push(used ? lossAcc / used : NaN);
  }

  ckpt.meta = {
    ...ckpt.meta,
    trained: true,
    manifest: job.manifestPath,
    iterations: job.iterations,
    learning_rate: job.learningRate,
    batch_size: job.batchSize,
    seed: job.seed,
    loss_first: losses[0],
    loss_last: losses[losses.length - 1],
    // One sampled pair per batch slot, symmetric CE over 2x2 cosine
    // logits with a fixed scale: the batch construction this bridge uses.
    objective: "symmetric-ce-2x2-cosine",
  };
  return { ckpt, losses, pairsVerified };
}
