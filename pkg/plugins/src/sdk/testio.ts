/**
 * Test side of the harness's subprocess contract.
 *
 * The harness writes exactly one JSON context line to the test's stdin and
 * expects exactly one JSON result line on stdout before the deadline:
 *
 *   in:  {"target_host":"127.0.0.1","target_port":80,"change":{...},"params":{}}
 *   out: {"result_name":"header version","result_summary":"Apache/2"}
 *
 * Anything else (nonzero exit, no output, garbage) is reported by the
 * harness as a failed test, so validation errors here simply throw; an
 * unhandled rejection gives the nonzero exit the contract wants.
 */

import * as net from "node:net";
import * as readline from "node:readline";
import type { Readable, Writable } from "node:stream";
import type { Scalar } from "./communicator.js";

/** The change the campaign just applied, as the harness reports it. */
export interface AppliedChange {
  id: number;
  name: string;
  action: string;
  value: Scalar;
}

export interface TestContext {
  target_host: string;
  target_port: number;
  change: AppliedChange;
  params: Record<string, Scalar>;
}

function fail(field: string): never {
  throw new Error(`test context missing or malformed field: ${field}`);
}

function isScalar(value: unknown): value is Scalar {
  return (
    typeof value === "boolean" || typeof value === "number" || typeof value === "string"
  );
}

export function parseContext(line: string): TestContext {
  let doc: unknown;
  try {
    doc = JSON.parse(line);
  } catch {
    throw new Error("test context is not JSON");
  }
  if (typeof doc !== "object" || doc === null) throw new Error("test context is not an object");
  const record = doc as Record<string, unknown>;
  const host = record["target_host"];
  if (typeof host !== "string" || host === "") fail("target_host");
  const port = record["target_port"];
  if (typeof port !== "number" || !Number.isInteger(port)) fail("target_port");
  const change = record["change"];
  if (typeof change !== "object" || change === null) fail("change");
  const fields = change as Record<string, unknown>;
  const id = fields["id"];
  if (typeof id !== "number" || !Number.isInteger(id)) fail("change.id");
  const name = fields["name"];
  if (typeof name !== "string") fail("change.name");
  const action = fields["action"];
  if (typeof action !== "string") fail("change.action");
  const value = fields["value"];
  if (!isScalar(value)) fail("change.value");
  const params = record["params"] ?? {};
  if (typeof params !== "object" || Array.isArray(params)) fail("params");
  for (const entry of Object.values(params as Record<string, unknown>)) {
    if (!isScalar(entry)) fail("params");
  }
  return {
    target_host: host,
    target_port: port,
    change: { id, name, action, value },
    params: { ...(params as Record<string, Scalar>) },
  };
}

/** Read the single context line the harness sends. */
export async function readContext(input: Readable = process.stdin): Promise<TestContext> {
  const lines = readline.createInterface({ input, terminal: false });
  for await (const line of lines) {
    lines.close();
    return parseContext(line);
  }
  throw new Error("no test context on stdin");
}

/** Emit the single result line and flush it. */
export function writeResult(
  name: string,
  summary: string,
  output: Writable = process.stdout,
): void {
  output.write(JSON.stringify({ result_name: name, result_summary: summary }) + "\n");
}

/**
 * One-shot line exchange with the target: connect, send one line, return the
 * first reply line. Any failure (refused, unreachable, timeout, EOF before a
 * full line) yields null so tests can map it to their "server missing" text.
 */
export function requestOneLine(
  host: string,
  port: number,
  line: string,
  timeoutMs = 2000,
): Promise<string | null> {
  return new Promise((resolve) => {
    const sock = net.connect({ host, port });
    let buffered = "";
    let done = false;
    const finish = (value: string | null) => {
      if (!done) {
        done = true;
        sock.destroy();
        resolve(value);
      }
    };
    sock.setTimeout(timeoutMs, () => finish(null));
    sock.on("error", () => finish(null));
    sock.on("connect", () => {
      sock.write(line.endsWith("\n") ? line : line + "\n");
    });
    sock.on("data", (chunk) => {
      buffered += chunk.toString("utf8");
      const end = buffered.indexOf("\n");
      if (end >= 0) finish(buffered.slice(0, end));
    });
    sock.on("close", () => finish(null));
  });
}
