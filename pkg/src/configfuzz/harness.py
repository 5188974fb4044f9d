"""Per-change test battery: builtin TCP port scan plus external subprocess tests.

External tests are standalone programs.  The harness writes one JSON line
describing the target and the change under test to the program's stdin and
expects one JSON line {"result_name": ..., "result_summary": ...} on its
stdout before a wall-clock deadline.  Anything else (nonzero exit, timeout,
garbage output) is folded into a "<test failed: ...>" summary so one broken
test never aborts the campaign.
"""

from __future__ import annotations

import ast
import json
import socket
import subprocess
from dataclasses import dataclass, field
from typing import Any

from .definition import Scalar, TestSpec
from .generator import ConfigChange

CONNECT_TIMEOUT_MS = 250


@dataclass(frozen=True, slots=True)
class TestResult:
    result_name: str
    result_summary: str


@dataclass(frozen=True, slots=True)
class TestContext:
    """Where the target lives and which change was just applied."""

    target_host: str
    target_port: int
    change: ConfigChange
    params: dict[str, Scalar] = field(default_factory=dict)

    def to_json_line(self) -> bytes:
        doc = {
            "target_host": self.target_host,
            "target_port": self.target_port,
            "change": {
                "id": self.change.change_id,
                "name": self.change.name,
                "action": self.change.action,
                "value": self.change.value,
            },
            "params": self.params,
        }
        return json.dumps(doc, separators=(",", ":")).encode("utf-8") + b"\n"


def probe_port(host: str, port: int, connect_timeout_ms: int = CONNECT_TIMEOUT_MS) -> bool:
    """True when a TCP connect to host:port succeeds within the timeout."""
    try:
        with socket.create_connection((host, port), timeout=connect_timeout_ms / 1000.0):
            return True
    except OSError:
        return False


def format_scan(pairs: list[tuple[int, bool]]) -> str:
    return "[" + ", ".join(f"({port}, {is_open})" for port, is_open in pairs) + "]"


def parse_scan(summary: str) -> list[tuple[int, bool]]:
    """Inverse of :func:`format_scan`; the summary is a Python literal."""
    parsed = ast.literal_eval(summary)
    return [(int(port), bool(is_open)) for port, is_open in parsed]


def builtin_port_scan(
    host: str,
    port_start: int,
    port_end: int,
    connect_timeout_ms: int = CONNECT_TIMEOUT_MS,
) -> TestResult:
    """TCP connect scan of the inclusive port range, ascending order."""
    if not (1 <= port_start <= port_end <= 65535):
        raise ValueError(f"bad port range {port_start}..{port_end}")
    try:
        infos = socket.getaddrinfo(host, None)
    except socket.gaierror:
        return TestResult("ports_open", "<could not find server>")
    del infos
    pairs = [
        (port, probe_port(host, port, connect_timeout_ms))
        for port in range(port_start, port_end + 1)
    ]
    return TestResult("ports_open", format_scan(pairs))


def _failed(name: str, reason: str) -> TestResult:
    return TestResult(name, f"<test failed: {reason}>")


def invoke_external_test(spec: TestSpec, ctx: TestContext) -> TestResult:
    """Run one external test program over the single-line stdio contract."""
    if not spec.exec_path:
        return _failed(spec.name, "no exec_path")
    try:
        completed = subprocess.run(
            [spec.exec_path],
            input=ctx.to_json_line(),
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            timeout=spec.timeout_s,
        )
    except subprocess.TimeoutExpired:
        return _failed(spec.name, f"timeout after {spec.timeout_s}s")
    except OSError as exc:
        return _failed(spec.name, f"spawn error: {exc}")
    if completed.returncode != 0:
        return _failed(spec.name, f"exit {completed.returncode}")
    line = completed.stdout.split(b"\n", 1)[0]
    try:
        doc = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        return _failed(spec.name, "malformed output")
    if not isinstance(doc, dict):
        return _failed(spec.name, "malformed output")
    name = doc.get("result_name")
    summary = doc.get("result_summary")
    if not isinstance(name, str) or not name or not isinstance(summary, str):
        return _failed(spec.name, "malformed output")
    return TestResult(name, summary)


def run_test(spec: TestSpec, ctx: TestContext) -> TestResult:
    if spec.kind == "builtin_port_scan":
        params = spec.params
        start = params.get("port_start")
        end = params.get("port_end")
        if not isinstance(start, int) or not isinstance(end, int):
            return _failed(spec.name, "missing port bounds")
        timeout_ms = params.get("connect_timeout_ms", CONNECT_TIMEOUT_MS)
        if not isinstance(timeout_ms, int) or timeout_ms <= 0:
            timeout_ms = CONNECT_TIMEOUT_MS
        try:
            result = builtin_port_scan(ctx.target_host, start, end, timeout_ms)
        except ValueError as exc:
            return _failed(spec.name, str(exc))
        if params.get("compact") is True and result.result_summary.startswith("["):
            # Compact rendering: just the open ports, ";"-separated.
            open_ports = [str(p) for p, is_open in parse_scan(result.result_summary) if is_open]
            return TestResult(result.result_name, ";".join(open_ports))
        return result
    if spec.kind == "external":
        merged = TestContext(
            target_host=ctx.target_host,
            target_port=ctx.target_port,
            change=ctx.change,
            params={**spec.params, **ctx.params},
        )
        return invoke_external_test(spec, merged)
    return _failed(spec.name, f"unknown kind {spec.kind!r}")


def run_all_tests(specs: list[TestSpec] | tuple[TestSpec, ...], ctx: TestContext) -> list[TestResult]:
    """Run the battery sequentially; one result per spec, never aborts."""
    results: list[TestResult] = []
    for spec in specs:
        try:
            results.append(run_test(spec, ctx))
        except Exception as exc:  # isolation: a harness bug must not kill the campaign
            results.append(_failed(spec.name, f"internal error: {exc}"))
    return results
