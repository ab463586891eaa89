/**
 * Minimal PNG decoder for 8-bit RGB non-interlaced images (what the
 * control-side renderer emits). Handles all five scanline filters.
 */
import * as zlib from "node:zlib";

export interface Image {
  width: number;
  height: number;
  /** RGB triples, row-major. */
  data: Uint8Array;
}

const SIGNATURE = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

export function decodePng(buf: Buffer): Image {
  if (buf.length < 8 || !buf.subarray(0, 8).equals(SIGNATURE)) {
    throw new Error("not a PNG");
  }
  let pos = 8;
  let width = 0;
  let height = 0;
  const idat: Buffer[] = [];
  while (pos + 8 <= buf.length) {
    const length = buf.readUInt32BE(pos);
    const tag = buf.toString("ascii", pos + 4, pos + 8);
    const body = buf.subarray(pos + 8, pos + 8 + length);
    if (body.length !== length) throw new Error("truncated PNG chunk");
    if (tag === "IHDR") {
      width = body.readUInt32BE(0);
      height = body.readUInt32BE(4);
      const depth = body[8];
      const colorType = body[9];
      const interlace = body[12];
      if (depth !== 8 || colorType !== 2 || interlace !== 0) {
        throw new Error(`unsupported PNG variant (depth=${depth} color=${colorType})`);
      }
    } else if (tag === "IDAT") {
      idat.push(Buffer.from(body));
    } else if (tag === "IEND") {
      break;
    }
    pos += 12 + length;
  }
  if (!width || !idat.length) throw new Error("PNG missing IHDR or IDAT");
  const raw = zlib.inflateSync(Buffer.concat(idat));
  const stride = width * 3;
  if (raw.length !== height * (stride + 1)) {
    throw new Error("PNG scanline payload has the wrong size");
  }
  const out = new Uint8Array(height * stride);
  const prior = new Uint8Array(stride);
  for (let row = 0; row < height; row++) {
    const filter = raw[row * (stride + 1)];
    const line = raw.subarray(row * (stride + 1) + 1, (row + 1) * (stride + 1));
    const cur = out.subarray(row * stride, (row + 1) * stride);
    for (let i = 0; i < stride; i++) {
      const left = i >= 3 ? cur[i - 3] : 0;
      const up = prior[i];
      const ul = i >= 3 ? prior[i - 3] : 0;
      let pred: number;
      switch (filter) {
        case 0: pred = 0; break;
        case 1: pred = left; break;
        case 2: pred = up; break;
        case 3: pred = (left + up) >> 1; break;
        case 4: {
          const p = left + up - ul;
          const pa = Math.abs(p - left);
          const pb = Math.abs(p - up);
          const pc = Math.abs(p - ul);
          pred = pa <= pb && pa <= pc ? left : pb <= pc ? up : ul;
          break;
        }
        default:
          throw new Error(`unsupported PNG filter ${filter}`);
      }
      cur[i] = (line[i] + pred) & 0xff;
    }
    prior.set(cur);
  }
  return { width, height, data: out };
}
