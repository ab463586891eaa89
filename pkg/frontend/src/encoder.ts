/**
 * The servable encoders.
 *
 * EchoEncoder: dependency-free test mode mapping any input to a fixed
 * hash-derived 8-dim vector (the integration-test contract).
 *
 * TwoTowerEncoder: trainable linear maps over the raw image/text
 * features; checkpoints are plain JSON so training provenance travels
 * with the weights.
 */
import * as fs from "node:fs";

import { IMAGE_FEATURES, TEXT_FEATURES, imageFeatures, textFeatures } from "./features.js";
import { Rng, fnv1a } from "./rng.js";

export interface Encoder {
  readonly dim: number;
  readonly model: string;
  embedText(text: string): Float64Array;
  embedImage(png: Buffer): Float64Array;
}

export class EchoEncoder implements Encoder {
  readonly dim = 8;
  readonly model = "echo-test";

  private hashVector(seed: number): Float64Array {
    const rng = new Rng(seed);
    const out = new Float64Array(this.dim);
    for (let i = 0; i < this.dim; i++) out[i] = rng.next() * 2 - 1;
    return out;
  }

  embedText(text: string): Float64Array {
    return this.hashVector(fnv1a("text:" + text));
  }

  embedImage(png: Buffer): Float64Array {
    return this.hashVector(fnv1a(png));
  }
}

export interface Checkpoint {
  dim: number;
  imgFeatures: number;
  txtFeatures: number;
  logitScale: number;
  wImg: number[][];
  wTxt: number[][];
  meta: Record<string, unknown>;
}

export function initCheckpoint(seed: number, dim = 16): Checkpoint {
  const rng = new Rng(seed);
  const mk = (rows: number, cols: number) =>
    Array.from({ length: rows }, () =>
      Array.from({ length: cols }, () => rng.normal() * 0.1));
  return {
    dim,
    imgFeatures: IMAGE_FEATURES,
    txtFeatures: TEXT_FEATURES,
    logitScale: 10.0,
    wImg: mk(dim, IMAGE_FEATURES),
    wTxt: mk(dim, TEXT_FEATURES),
    meta: { init_seed: seed, trained: false },
  };
}

export function saveCheckpoint(ckpt: Checkpoint, path: string): void {
  fs.writeFileSync(path, JSON.stringify(ckpt));
}

export function loadCheckpoint(path: string): Checkpoint {
  const ckpt = JSON.parse(fs.readFileSync(path, "utf-8")) as Checkpoint;
  if (!ckpt.wImg || !ckpt.wTxt || !ckpt.dim) throw new Error(`bad checkpoint ${path}`);
  return ckpt;
}

export function matVec(w: number[][], x: Float64Array): Float64Array {
  const out = new Float64Array(w.length);
  for (let r = 0; r < w.length; r++) {
    const row = w[r];
    let acc = 0;
    for (let c = 0; c < row.length; c++) acc += row[c] * x[c];
    out[r] = acc;
  }
  return out;
}

export class TwoTowerEncoder implements Encoder {
  readonly dim: number;
  readonly model: string;

  constructor(readonly ckpt: Checkpoint, name = "two-tower") {
    this.dim = ckpt.dim;
    this.model = name;
  }

  embedText(text: string): Float64Array {
    return matVec(this.ckpt.wTxt, textFeatures(text));
  }

  embedImage(png: Buffer): Float64Array {
    return matVec(this.ckpt.wImg, imageFeatures(png));
  }
}
