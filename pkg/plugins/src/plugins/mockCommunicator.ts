#!/usr/bin/env node
/**
 * Communicator that drives the mock target's control channel.
 *
 * Usage: mockCommunicator.js <control_host> <control_port>
 *
 * Maps the web-server style parameters onto control commands: "port" becomes
 * SET port, "start_systemctl_service" (or "enabled") becomes SET enabled,
 * "server_tokens" rewrites the banner through the token table, and
 * "server_signature" toggles the error-page signature. The signature tracks
 * whatever banner the current token selects, so the two parameters interact
 * the way they do on the real server.
 */

import * as net from "node:net";
import * as readline from "node:readline";
import {
  error,
  invalid,
  ok,
  runLoop,
  type Communicator,
  type CommunicatorResponse,
  type ConfigRequest,
} from "../sdk/communicator.js";

const TOKEN_BANNERS: Record<string, string> = {
  Full: "Apache/2.4.53 (Debian)",
  Prod: "Apache",
  Major: "Apache/2",
  Minor: "Apache/2.4",
  Min: "Apache/2.4.53",
  OS: "Apache/2.4.53 (Debian)",
};

const DEFAULT_VERSION = "Apache/2.4.53 (Debian)";

/** Lazy one-line-per-command channel to the mock target's control port. */
class ControlChannel {
  private sock: net.Socket | null = null;
  private replies: AsyncIterator<string> | null = null;

  constructor(
    private readonly host: string,
    private readonly port: number,
  ) {}

  private connect(): Promise<net.Socket> {
    return new Promise((resolve, reject) => {
      const sock = net.connect({ host: this.host, port: this.port });
      sock.setTimeout(5000, () => {
        sock.destroy();
        reject(new Error("control connect timeout"));
      });
      sock.once("error", reject);
      sock.once("connect", () => {
        sock.setTimeout(0);
        sock.removeListener("error", reject);
        resolve(sock);
      });
    });
  }

  /** Send one command; null means the target answered OK. */
  async send(command: string): Promise<string | null> {
    try {
      if (this.sock === null) {
        this.sock = await this.connect();
        const lines = readline.createInterface({ input: this.sock, terminal: false });
        this.replies = lines[Symbol.asyncIterator]();
      }
      this.sock.write(command + "\n");
      const reply = await this.replies!.next();
      if (reply.done) return "control channel closed";
      return reply.value === "OK" ? null : reply.value || "control channel closed";
    } catch (err) {
      return err instanceof Error ? err.message : String(err);
    }
  }

  close(): void {
    this.sock?.destroy();
    this.sock = null;
    this.replies = null;
  }
}

class MockTargetCommunicator implements Communicator {
  private version = DEFAULT_VERSION;
  private signatureOn = true;

  constructor(private readonly control: ControlChannel) {}

  async onCommand(request: ConfigRequest): Promise<CommunicatorResponse> {
    const change = request.config_change!;
    const { Name: name, Value: value } = change;
    const commands: string[] = [];

    if (name === "port") {
      if (typeof value !== "number" || !Number.isInteger(value)) {
        return invalid("port must be a number");
      }
      commands.push(`SET port ${value}`);
    } else if (name === "start_systemctl_service" || name === "enabled") {
      if (typeof value !== "boolean") {
        return invalid("enabled must be a bool");
      }
      commands.push(`SET enabled ${value}`);
    } else if (name === "server_tokens") {
      const banner = typeof value === "string" ? TOKEN_BANNERS[value] : undefined;
      if (banner === undefined) {
        return invalid(`unknown token ${JSON.stringify(value)}`);
      }
      this.version = banner;
      commands.push(`SET banner ${banner}`);
      if (this.signatureOn) commands.push(`SET signature ${banner}`);
    } else if (name === "server_signature") {
      if (value !== "On" && value !== "Off" && value !== "EMail") {
        return invalid(`unknown signature mode ${JSON.stringify(value)}`);
      }
      this.signatureOn = value !== "Off";
      commands.push(this.signatureOn ? `SET signature ${this.version}` : "SET signature");
    } else {
      return invalid(`unknown parameter ${JSON.stringify(name)}`);
    }

    for (const command of commands) {
      const failure = await this.control.send(command);
      if (failure !== null) return error(failure);
    }
    return ok();
  }

  close(): void {
    this.control.close();
  }
}

const [host, portArg] = process.argv.slice(2);
const port = Number(portArg);
if (!host || !Number.isInteger(port) || port < 1 || port > 65535) {
  process.stderr.write("usage: mockCommunicator.js <control_host> <control_port>\n");
  process.exit(2);
}

await runLoop(new MockTargetCommunicator(new ControlChannel(host, port)));
