/**
 * Communicator side of the campaign client's subprocess contract.
 *
 * The client writes one JSON object per line to the communicator's stdin and
 * reads one JSON response line per command from its stdout:
 *
 *   in:  {"command":"CHANGE","config_change":{"Name":"port","Value":5000,"Action":"modify"}}
 *   out: {"status":"OK","extended_status":{}}
 *   in:  {"command":"CLOSE"}
 *
 * `runLoop` owns that plumbing so a communicator only implements the
 * lifecycle hooks: `ready` is called once before any command, `onCommand`
 * once per CHANGE, and `close` exactly once, on CLOSE or when stdin ends.
 * Implementations may keep state across calls or recompute it per call; the
 * loop imposes neither.
 */

import * as readline from "node:readline";
import type { Readable, Writable } from "node:stream";

export type Scalar = boolean | number | string;

/** The applied-change payload inside a CHANGE request. Field names are wire-exact. */
export interface ConfigChangeFields {
  Name: string;
  Value: Scalar;
  Action: string;
}

/** One decoded request line from the campaign client. */
export interface ConfigRequest {
  command: string;
  config_change?: ConfigChangeFields;
}

export type ResponseStatus = "OK" | "ERROR" | "INVALID";

export interface CommunicatorResponse {
  status: ResponseStatus;
  extended_status?: Record<string, unknown>;
}

/** Successful application. */
export function ok(extended?: Record<string, unknown>): CommunicatorResponse {
  return { status: "OK", extended_status: extended ?? {} };
}

/** The change should have worked but did not (target unreachable, command failed). */
export function error(reason: string): CommunicatorResponse {
  return { status: "ERROR", extended_status: { reason } };
}

/** The change can never work (unknown parameter, value out of the target's domain). */
export function invalid(reason: string): CommunicatorResponse {
  return { status: "INVALID", extended_status: { reason } };
}

export interface Communicator {
  /** Called once, before the first command. */
  ready?(): void | Promise<void>;
  /** Called once per CHANGE request; the returned response is written back. */
  onCommand(request: ConfigRequest): CommunicatorResponse | Promise<CommunicatorResponse>;
  /** Called exactly once, after CLOSE or stdin EOF. */
  close?(): void | Promise<void>;
}

export interface RunLoopOptions {
  input?: Readable;
  output?: Writable;
  /** Replaces process.exit; tests inject a recorder here. */
  exit?: (code: number) => void;
}

function isScalar(value: unknown): value is Scalar {
  return (
    typeof value === "boolean" || typeof value === "number" || typeof value === "string"
  );
}

/** Parse one stdin line into a request, or null when it is not usable. */
export function parseRequestLine(line: string): ConfigRequest | null {
  let doc: unknown;
  try {
    doc = JSON.parse(line);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) return null;
  const command = (doc as Record<string, unknown>)["command"];
  if (typeof command !== "string") return null;
  const change = (doc as Record<string, unknown>)["config_change"];
  if (change === undefined) return { command };
  if (typeof change !== "object" || change === null || Array.isArray(change)) return null;
  const fields = change as Record<string, unknown>;
  if (typeof fields["Name"] !== "string") return null;
  if (!isScalar(fields["Value"])) return null;
  if (typeof fields["Action"] !== "string") return null;
  return {
    command,
    config_change: {
      Name: fields["Name"],
      Value: fields["Value"],
      Action: fields["Action"],
    },
  };
}

export function serializeResponse(response: CommunicatorResponse): string {
  return (
    JSON.stringify({
      status: response.status,
      extended_status: response.extended_status ?? {},
    }) + "\n"
  );
}

/**
 * Serve the request loop until CLOSE or EOF, then exit 0.
 *
 * A malformed line gets an ERROR response and the loop continues; one bad
 * frame must not kill the communicator mid-campaign. An exception from
 * `onCommand` is folded into an ERROR response the same way.
 */
export async function runLoop(comm: Communicator, options: RunLoopOptions = {}): Promise<void> {
  const input = options.input ?? process.stdin;
  const output = options.output ?? process.stdout;
  const exit = options.exit ?? ((code: number) => process.exit(code));
  const respond = (response: CommunicatorResponse) => {
    output.write(serializeResponse(response));
  };

  await comm.ready?.();
  const lines = readline.createInterface({ input, terminal: false });
  for await (const line of lines) {
    const request = parseRequestLine(line);
    if (request === null) {
      respond(error("malformed request line"));
      continue;
    }
    const command = request.command.toUpperCase();
    if (command === "CLOSE") break;
    if (command !== "CHANGE" || request.config_change === undefined) {
      respond(error(`unusable request: ${request.command}`));
      continue;
    }
    try {
      respond(await comm.onCommand(request));
    } catch (err) {
      respond(error(`communicator failure: ${err instanceof Error ? err.message : err}`));
    }
  }
  lines.close();
  await comm.close?.();
  exit(0);
}
