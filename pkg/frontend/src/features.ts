/**
 * Raw (untrained) feature extraction for the two-tower encoder.
 *
 * Images reduce to per-cell RGB means on a fixed grid; texts use the
 * hashing trick over lowercase word tokens. Both are deterministic, so
 * the trainable linear maps on top are the only learnable state.
 */
import { decodePng, Image } from "./png.js";
import { fnv1a } from "./rng.js";

export const IMAGE_GRID = 8;
export const IMAGE_FEATURES = IMAGE_GRID * IMAGE_GRID * 3;
export const TEXT_FEATURES = 64;

export function imageFeatures(png: Buffer): Float64Array {
  return imageFeaturesFromPixels(decodePng(png));
}

export function imageFeaturesFromPixels(img: Image): Float64Array {
  const g = IMAGE_GRID;
  const out = new Float64Array(IMAGE_FEATURES);
  const counts = new Float64Array(g * g);
  for (let y = 0; y < img.height; y++) {
    const cy = Math.min(g - 1, Math.floor((y * g) / img.height));
    for (let x = 0; x < img.width; x++) {
      const cx = Math.min(g - 1, Math.floor((x * g) / img.width));
      const cell = cy * g + cx;
      const px = (y * img.width + x) * 3;
      out[cell * 3] += img.data[px];
      out[cell * 3 + 1] += img.data[px + 1];
      out[cell * 3 + 2] += img.data[px + 2];
      counts[cell]++;
    }
  }
  for (let cell = 0; cell < g * g; cell++) {
    const n = counts[cell] || 1;
    for (let ch = 0; ch < 3; ch++) {
      out[cell * 3 + ch] = out[cell * 3 + ch] / n / 255 - 0.5;
    }
  }
  return out;
}

export function textFeatures(text: string): Float64Array {
  const out = new Float64Array(TEXT_FEATURES);
  const words = text.toLowerCase().split(/[^a-z0-9]+/).filter(Boolean);
  for (const word of words) {
    const h = fnv1a(word);
    const bucket = h % TEXT_FEATURES;
    const sign = (h >>> 16) & 1 ? 1 : -1;
    out[bucket] += sign;
  }
  let norm = 0;
  for (const v of out) norm += v * v;
  norm = Math.sqrt(norm) || 1;
  for (let i = 0; i < out.length; i++) out[i] /= norm;
  return out;
}
