/**
 * Wire protocol: newline-delimited JSON, one request per line.
 *
 *   {"op":"embed_text","text":...}   -> {"ok":true,"vector":[...]}
 *   {"op":"embed_image","png_b64":...} -> {"ok":true,"vector":[...]}
 *   {"op":"info"}                    -> {"ok":true,"dim":...,"model":...}
 *
 * Any failure answers {"ok":false,"error":...} on the same connection;
 * a bad request must never take the session down.
 */
import { Encoder } from "./encoder.js";

export type Response =
  | { ok: true; vector: number[] }
  | { ok: true; dim: number; model: string }
  | { ok: false; error: string };

export function handleLine(line: string, encoder: Encoder): Response {
  let req: unknown;
  try {
    req = JSON.parse(line);
  } catch {
    return { ok: false, error: "malformed JSON request" };
  }
  if (typeof req !== "object" || req === null || !("op" in req)) {
    return { ok: false, error: "request must be an object with an op field" };
  }
  const r = req as Record<string, unknown>;
  try {
    switch (r.op) {
      case "info":
        return { ok: true, dim: encoder.dim, model: encoder.model };
      case "embed_text": {
        if (typeof r.text !== "string" || r.text.length === 0) {
          return { ok: false, error: "embed_text needs a non-empty text field" };
        }
        return { ok: true, vector: Array.from(encoder.embedText(r.text)) };
      }
      case "embed_image": {
        if (typeof r.png_b64 !== "string" || r.png_b64.length === 0) {
          return { ok: false, error: "embed_image needs a non-empty png_b64 field" };
        }
        let png: Buffer;
        try {
          png = Buffer.from(r.png_b64, "base64");
        } catch {
          return { ok: false, error: "png_b64 is not valid base64" };
        }
        return { ok: true, vector: Array.from(encoder.embedImage(png)) };
      }
      default:
        return { ok: false, error: `unknown op ${String(r.op)}` };
    }
  } catch (err) {
    return { ok: false, error: err instanceof Error ? err.message : String(err) };
  }
}
