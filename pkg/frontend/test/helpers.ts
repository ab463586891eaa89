/** Shared test utilities: a minimal PNG encoder (filter 0), a tiny NDJSON
 * client, and child-process helpers for driving the bridge and the
 * control-side CLI. */
import { spawn, spawnSync, ChildProcess, SpawnSyncReturns } from "node:child_process";
import * as net from "node:net";
import * as zlib from "node:zlib";

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(buf: Buffer): number {
  let c = 0xffffffff;
  for (let i = 0; i < buf.length; i++) {
    c = CRC_TABLE[(c ^ buf[i]) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

function chunk(tag: string, body: Buffer): Buffer {
  const head = Buffer.alloc(4);
  head.writeUInt32BE(body.length);
  const tagged = Buffer.concat([Buffer.from(tag, "ascii"), body]);
  const crc = Buffer.alloc(4);
  crc.writeUInt32BE(crc32(tagged));
  return Buffer.concat([head, tagged, crc]);
}

/** Encode an RGB image (rows of [r,g,b] triples) as a PNG. */
export function encodePng(width: number, height: number,
  pixel: (x: number, y: number) => [number, number, number]): Buffer {
  const raw = Buffer.alloc(height * (width * 3 + 1));
  for (let y = 0; y < height; y++) {
    const row = y * (width * 3 + 1);
    raw[row] = 0;
    for (let x = 0; x < width; x++) {
      const [r, g, b] = pixel(x, y);
      raw[row + 1 + x * 3] = r;
      raw[row + 2 + x * 3] = g;
      raw[row + 3 + x * 3] = b;
    }
  }
  const ihdr = Buffer.alloc(13);
  ihdr.writeUInt32BE(width, 0);
  ihdr.writeUInt32BE(height, 4);
  ihdr[8] = 8;   // bit depth
  ihdr[9] = 2;   // RGB
  const sig = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);
  return Buffer.concat([
    sig,
    chunk("IHDR", ihdr),
    chunk("IDAT", zlib.deflateSync(raw, { level: 6 })),
    chunk("IEND", Buffer.alloc(0)),
  ]);
}

/** One-connection NDJSON client. */
export class LineClient {
  private sock: net.Socket;
  private buffer = "";
  private waiters: Array<(line: string) => void> = [];

  private constructor(sock: net.Socket) {
    this.sock = sock;
    sock.on("data", (chunk: Buffer) => {
      this.buffer += chunk.toString("utf-8");
      let nl: number;
      while ((nl = this.buffer.indexOf("\n")) >= 0 && this.waiters.length) {
        const line = this.buffer.slice(0, nl);
        this.buffer = this.buffer.slice(nl + 1);
        this.waiters.shift()!(line);
      }
    });
  }

  static connect(port: number, host = "127.0.0.1"): Promise<LineClient> {
    return new Promise((resolve, reject) => {
      const sock = net.createConnection(port, host, () => resolve(new LineClient(sock)));
      sock.once("error", reject);
    });
  }

  request(payload: unknown): Promise<string> {
    return new Promise((resolve) => {
      this.waiters.push(resolve);
      this.sock.write(JSON.stringify(payload) + "\n");
    });
  }

  /** Raw line, for malformed-request tests. */
  requestRaw(line: string): Promise<string> {
    return new Promise((resolve) => {
      this.waiters.push(resolve);
      this.sock.write(line + "\n");
    });
  }

  close(): void {
    this.sock.destroy();
  }
}

export async function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = net.createServer();
    srv.once("error", reject);
    srv.listen(0, "127.0.0.1", () => {
      const port = (srv.address() as net.AddressInfo).port;
      srv.close(() => resolve(port));
    });
  });
}

/** Start the bridge CLI and wait until it accepts connections. */
export async function startBridge(args: string[]): Promise<{ proc: ChildProcess; port: number }> {
  const port = await freePort();
  const proc = spawn("node", [new URL("../src/cli.js", import.meta.url).pathname,
    ...args, "--port", String(port)], { stdio: ["ignore", "pipe", "pipe"] });
  for (let attempt = 0; attempt < 100; attempt++) {
    await new Promise((r) => setTimeout(r, 50));
    try {
      const client = await LineClient.connect(port);
      client.close();
      return { proc, port };
    } catch {
      if (proc.exitCode !== null) {
        throw new Error(`bridge exited early with code ${proc.exitCode}`);
      }
    }
  }
  proc.kill();
  throw new Error("bridge never came up");
}

/** Run the control-side CLI (the Python package this bridge serves). */
export function controlCli(args: string[], env: Record<string, string> = {}):
  SpawnSyncReturns<string> {
  return spawnSync("python3", ["-m", "gradseek.cli", ...args], {
    encoding: "utf-8",
    env: { ...process.env, ...env },
    timeout: 600_000,
  });
}
