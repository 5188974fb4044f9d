// Shared plumbing for the campaign tests: process orchestration around the
// Python CLI, port readiness checks, and a strict CSV reader.

import { spawn, type ChildProcess } from "node:child_process";
import * as fs from "node:fs";
import * as net from "node:net";
import * as os from "node:os";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

export const PKG_ROOT = path.resolve(path.dirname(fileURLToPath(import.meta.url)), "..");
export const DIST_PLUGINS = path.join(PKG_ROOT, "dist", "plugins");
export const FIXTURES = path.join(PKG_ROOT, "tests", "fixtures");

export function plugin(name: string): string {
  return path.join(DIST_PLUGINS, name);
}

const PYTHON = "python3";
const CLI = [PYTHON, "-m", "configfuzz.cli"];

export function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export function makeWorkDir(tag: string): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), `configfuzz-${tag}-`));
}

/** Ask the kernel for a free loopback port. */
export function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const server = net.createServer();
    server.listen(0, "127.0.0.1", () => {
      const address = server.address();
      if (address === null || typeof address === "string") {
        reject(new Error("no bound address"));
        return;
      }
      server.close(() => resolve(address.port));
    });
    server.on("error", reject);
  });
}

/** Poll until a TCP connect to the port succeeds (safe for multi-accept listeners). */
export async function waitForPort(port: number, timeoutMs = 10_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    const connected = await new Promise<boolean>((resolve) => {
      const sock = net.connect({ host: "127.0.0.1", port });
      sock.setTimeout(250, () => {
        sock.destroy();
        resolve(false);
      });
      sock.on("error", () => resolve(false));
      sock.on("connect", () => {
        sock.destroy();
        resolve(true);
      });
    });
    if (connected) return;
    await sleep(25);
  }
  throw new Error(`nothing accepting on port ${port} after ${timeoutMs}ms`);
}

/**
 * Poll /proc/net/tcp* until the port shows up in LISTEN state. The campaign
 * server accepts exactly one client, so probing it with a connect would
 * steal that slot; this watches the kernel table instead.
 */
export async function waitForListen(port: number, timeoutMs = 10_000): Promise<void> {
  const hexPort = port.toString(16).toUpperCase().padStart(4, "0");
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    for (const table of ["/proc/net/tcp", "/proc/net/tcp6"]) {
      let text: string;
      try {
        text = fs.readFileSync(table, "utf8");
      } catch {
        continue;
      }
      for (const row of text.split("\n").slice(1)) {
        const fields = row.trim().split(/\s+/);
        if (fields.length > 3 && fields[1]!.endsWith(`:${hexPort}`) && fields[3] === "0A") {
          return;
        }
      }
    }
    await sleep(25);
  }
  throw new Error(`nothing listening on port ${port} after ${timeoutMs}ms`);
}

export interface FinishedProcess {
  code: number | null;
  stdout: string;
  stderr: string;
}

function startProcess(argv: string[], io: "ignore" | "pipe"): ChildProcess {
  const [cmd, ...args] = argv;
  return spawn(cmd!, args, {
    stdio: io === "ignore" ? "ignore" : ["ignore", "pipe", "pipe"],
  });
}

/** Run a command to completion, collecting output; kills it on timeout. */
export function runToExit(argv: string[], timeoutMs: number): Promise<FinishedProcess> {
  return new Promise((resolve, reject) => {
    const [cmd, ...args] = argv;
    const child = spawn(cmd!, args, { stdio: ["ignore", "pipe", "pipe"] });
    let stdout = "";
    let stderr = "";
    child.stdout.on("data", (chunk) => (stdout += chunk));
    child.stderr.on("data", (chunk) => (stderr += chunk));
    const timer = setTimeout(() => {
      child.kill("SIGKILL");
      reject(new Error(`timed out after ${timeoutMs}ms: ${argv.join(" ")}\n${stderr}`));
    }, timeoutMs);
    child.on("error", (err) => {
      clearTimeout(timer);
      reject(err);
    });
    child.on("close", (code) => {
      clearTimeout(timer);
      resolve({ code, stdout, stderr });
    });
  });
}

export interface CampaignOptions {
  definitionPath: string;
  /** "builtin:mock" or an absolute path to a communicator script. */
  communicator: string;
  /** Mock target state at campaign start. */
  initialState: Record<string, unknown>;
  workDir: string;
}

export interface CampaignOutcome {
  csv: Buffer;
  serverLog: string;
  elapsedMs: number;
}

/**
 * One full campaign over the CLI: mock target up, server up, client run to
 * exhaustion, then CSV export. Everything is torn down before returning.
 */
export async function runCampaign(options: CampaignOptions): Promise<CampaignOutcome> {
  const started = Date.now();
  const controlPort = await freePort();
  const serverPort = await freePort();
  const storePath = path.join(options.workDir, "campaign.db");
  const csvPath = path.join(options.workDir, "campaign.csv");
  const configPath = path.join(options.workDir, "client.json");

  const communicatorArgs =
    options.communicator === "builtin:mock"
      ? { control_port: controlPort }
      : ["127.0.0.1", String(controlPort)];
  fs.writeFileSync(
    configPath,
    JSON.stringify({
      server_host: "127.0.0.1",
      server_port: serverPort,
      communicator: options.communicator,
      communicator_args: communicatorArgs,
    }),
  );

  const mock = startProcess(
    [...CLI, "mock-target", "--control-port", String(controlPort),
      "--initial-state", JSON.stringify(options.initialState)],
    "ignore",
  );
  let server: ChildProcess | null = null;
  let serverLog = "";
  try {
    await waitForPort(controlPort);

    server = startProcess(
      [...CLI, "server", "--port", String(serverPort),
        "--definition", options.definitionPath, "--store", storePath],
      "pipe",
    );
    server.stdout!.on("data", (chunk) => (serverLog += chunk));
    const serverExit = new Promise<number | null>((resolve) =>
      server!.on("close", (code) => resolve(code)),
    );
    await waitForListen(serverPort);

    const client = await runToExit(
      [...CLI, "client", "--config", configPath],
      240_000,
    );
    if (client.code !== 0) {
      throw new Error(`client exited ${client.code}: ${client.stderr}`);
    }
    const serverCode = await serverExit;
    if (serverCode !== 0) {
      throw new Error(`server exited ${serverCode}`);
    }
    server = null;
  } finally {
    if (server !== null && server.exitCode === null) server.kill("SIGKILL");
    mock.kill("SIGKILL");
  }

  const exported = await runToExit(
    [...CLI, "export", "--store", storePath, "--out", csvPath],
    60_000,
  );
  if (exported.code !== 0) {
    throw new Error(`export exited ${exported.code}: ${exported.stderr}`);
  }
  return {
    csv: fs.readFileSync(csvPath),
    serverLog,
    elapsedMs: Date.now() - started,
  };
}

/** Strict reader for the exporter's CSV dialect: CRLF rows, doubled quotes. */
export function parseCsv(text: string): string[][] {
  const rows: string[][] = [];
  let row: string[] = [];
  let cell = "";
  let quoted = false;
  for (let i = 0; i < text.length; i++) {
    const ch = text[i];
    if (quoted) {
      if (ch === '"') {
        if (text[i + 1] === '"') {
          cell += '"';
          i++;
        } else {
          quoted = false;
        }
      } else {
        cell += ch;
      }
    } else if (ch === '"') {
      quoted = true;
    } else if (ch === ",") {
      row.push(cell);
      cell = "";
    } else if (ch === "\r" && text[i + 1] === "\n") {
      row.push(cell);
      rows.push(row);
      row = [];
      cell = "";
      i++;
    } else {
      cell += ch;
    }
  }
  if (cell !== "" || row.length > 0) {
    row.push(cell);
    rows.push(row);
  }
  return rows;
}
