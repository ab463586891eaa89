import assert from "node:assert/strict";
import { test } from "node:test";

import { imageFeatures, IMAGE_FEATURES } from "../src/features.js";
import { decodePng } from "../src/png.js";
import { encodePng } from "./helpers.js";

test("decodes filter-0 RGB images exactly", () => {
  const img = decodePng(encodePng(5, 3, (x, y) => [x * 10, y * 20, 255 - x]));
  assert.equal(img.width, 5);
  assert.equal(img.height, 3);
  assert.equal(img.data[0], 0);
  assert.equal(img.data[(2 * 5 + 4) * 3], 40);      // x=4,y=2 red
  assert.equal(img.data[(2 * 5 + 4) * 3 + 1], 40);  // green
  assert.equal(img.data[(2 * 5 + 4) * 3 + 2], 251); // blue
});

test("rejects non-PNG bytes", () => {
  assert.throws(() => decodePng(Buffer.from("nope")));
});

test("rejects truncated chunks", () => {
  const good = encodePng(4, 4, () => [1, 2, 3]);
  // Cut into the IDAT body (the trailing 12 bytes are just IEND).
  assert.throws(() => decodePng(good.subarray(0, good.length - 20)));
});

test("image features have the documented length and react to content", () => {
  const a = imageFeatures(encodePng(32, 32, () => [0, 0, 0]));
  const b = imageFeatures(encodePng(32, 32, (x) => (x < 16 ? [255, 0, 0] : [0, 0, 0])));
  assert.equal(a.length, IMAGE_FEATURES);
  assert.notDeepEqual(Array.from(a), Array.from(b));
  // Uniform black image: every cell mean is -0.5 after centering.
  for (const v of a) assert.ok(Math.abs(v + 0.5) < 1e-12);
});
