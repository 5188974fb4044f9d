// Unit tests for the test-side helpers: context parsing, result emission,
// and the one-line TCP exchange.

import * as net from "node:net";
import { PassThrough } from "node:stream";
import { afterAll, describe, expect, it } from "vitest";
import {
  parseContext,
  readContext,
  requestOneLine,
  writeResult,
} from "../dist/sdk/testio.js";
import { freePort } from "./helpers.js";

const CTX =
  '{"target_host":"127.0.0.1","target_port":80,' +
  '"change":{"id":7,"name":"port","action":"modify","value":5000},"params":{"cve":"42013"}}';

describe("parseContext", () => {
  it("decodes every field", () => {
    expect(parseContext(CTX)).toEqual({
      target_host: "127.0.0.1",
      target_port: 80,
      change: { id: 7, name: "port", action: "modify", value: 5000 },
      params: { cve: "42013" },
    });
  });

  it("defaults params to empty", () => {
    const line =
      '{"target_host":"h","target_port":1,"change":{"id":1,"name":"n","action":"modify","value":true}}';
    expect(parseContext(line).params).toEqual({});
  });

  it("throws on missing or mistyped fields", () => {
    const bad = [
      "not json",
      "[]",
      '{"target_port":80,"change":{"id":1,"name":"n","action":"a","value":1}}',
      '{"target_host":"h","change":{"id":1,"name":"n","action":"a","value":1}}',
      '{"target_host":"h","target_port":"80","change":{"id":1,"name":"n","action":"a","value":1}}',
      '{"target_host":"h","target_port":80}',
      '{"target_host":"h","target_port":80,"change":{"name":"n","action":"a","value":1}}',
      '{"target_host":"h","target_port":80,"change":{"id":1,"action":"a","value":1}}',
      '{"target_host":"h","target_port":80,"change":{"id":1,"name":"n","value":1}}',
      '{"target_host":"h","target_port":80,"change":{"id":1,"name":"n","action":"a","value":null}}',
      '{"target_host":"h","target_port":80,"change":{"id":1,"name":"n","action":"a","value":1},"params":[1]}',
      '{"target_host":"h","target_port":80,"change":{"id":1,"name":"n","action":"a","value":1},"params":{"k":[]}}',
    ];
    for (const line of bad) {
      expect(() => parseContext(line), line).toThrow();
    }
  });
});

describe("readContext", () => {
  it("reads the first stdin line", async () => {
    const input = new PassThrough();
    const pending = readContext(input);
    input.write(CTX + "\n");
    const ctx = await pending;
    expect(ctx.change.id).toBe(7);
  });

  it("rejects on EOF without a line", async () => {
    const input = new PassThrough();
    const pending = readContext(input);
    input.end();
    await expect(pending).rejects.toThrow("no test context");
  });
});

describe("writeResult", () => {
  it("emits the exact wire line", () => {
    const output = new PassThrough();
    const chunks: Buffer[] = [];
    output.on("data", (chunk) => chunks.push(chunk));
    writeResult("header version", "Apache/2", output);
    expect(Buffer.concat(chunks).toString("utf8")).toBe(
      '{"result_name":"header version","result_summary":"Apache/2"}\n',
    );
  });
});

describe("requestOneLine", () => {
  const servers: net.Server[] = [];
  afterAll(() => {
    for (const server of servers) server.close();
  });

  async function listen(onLine: (line: string, sock: net.Socket) => void): Promise<number> {
    const port = await freePort();
    const server = net.createServer((sock) => {
      let buffered = "";
      sock.on("data", (chunk) => {
        buffered += chunk.toString("utf8");
        const end = buffered.indexOf("\n");
        if (end >= 0) onLine(buffered.slice(0, end), sock);
      });
    });
    await new Promise<void>((resolve) => server.listen(port, "127.0.0.1", resolve));
    servers.push(server);
    return port;
  }

  it("returns the first reply line", async () => {
    const port = await listen((line, sock) => {
      expect(line).toBe("HEAD");
      sock.write("BANNER test/1.0\nBANNER extra\n");
    });
    expect(await requestOneLine("127.0.0.1", port, "HEAD")).toBe("BANNER test/1.0");
  });

  it("maps a refused connection to null", async () => {
    const port = await freePort();
    expect(await requestOneLine("127.0.0.1", port, "HEAD")).toBeNull();
  });

  it("maps a silent peer to null after the timeout", async () => {
    const port = await listen(() => {
      /* never answer */
    });
    expect(await requestOneLine("127.0.0.1", port, "HEAD", 300)).toBeNull();
  });

  it("maps EOF before a full line to null", async () => {
    const port = await listen((_line, sock) => {
      sock.end("BANNER unterminated");
    });
    expect(await requestOneLine("127.0.0.1", port, "HEAD")).toBeNull();
  });
});
