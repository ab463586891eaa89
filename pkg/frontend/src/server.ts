/**
 * TCP server hosting an encoder behind the NDJSON protocol.
 *
 * One request at a time per connection (requests on a connection are
 * answered in arrival order); multiple connections are fine. Inference
 * here is pure CPU math, so identical requests always produce identical
 * responses; the deterministic flag is recorded for parity with heavier
 * backends.
 */
import * as net from "node:net";

import { Encoder } from "./encoder.js";
import { handleLine } from "./protocol.js";

export interface BridgeConfig {
  host: string;
  port: number;
  encoder: Encoder;
  deterministic: boolean;
  quiet?: boolean;
}

export function serve(config: BridgeConfig): Promise<net.Server> {
  const log = config.quiet ? () => {} : console.error.bind(console);
  const server = net.createServer((conn) => {
    log(`[bridge] client connected ${conn.remoteAddress}:${conn.remotePort}`);
    let pending = "";
    conn.on("data", (chunk: Buffer) => {
      pending += chunk.toString("utf-8");
      let nl: number;
      while ((nl = pending.indexOf("\n")) >= 0) {
        const line = pending.slice(0, nl).trim();
        pending = pending.slice(nl + 1);
        if (!line) continue;
        const resp = handleLine(line, config.encoder);
        conn.write(JSON.stringify(resp) + "\n");
      }
    });
    conn.on("error", (err) => log(`[bridge] connection error: ${err.message}`));
    conn.on("end", () => log("[bridge] client disconnected"));
  });
  return new Promise((resolve, reject) => {
    server.once("error", reject);
    server.listen(config.port, config.host, () => {
      const addr = server.address() as net.AddressInfo;
      log(`[bridge] serving ${config.encoder.model} (dim ${config.encoder.dim}, ` +
        `deterministic=${config.deterministic}) on ${addr.address}:${addr.port}`);
      resolve(server);
    });
  });
}
