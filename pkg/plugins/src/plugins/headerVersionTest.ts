#!/usr/bin/env node
// Reads the version string the target volunteers in its response header.

import { readContext, requestOneLine, writeResult } from "../sdk/testio.js";

const PREFIX = "BANNER ";

const ctx = await readContext();
const reply = await requestOneLine(ctx.target_host, ctx.target_port, "HEAD");

let summary: string;
if (reply === null) {
  summary = "<could not find server>";
} else if (reply.startsWith(PREFIX)) {
  summary = reply.slice(PREFIX.length);
} else {
  summary = `<unexpected reply: ${reply}>`;
}

writeResult("header version", summary);
