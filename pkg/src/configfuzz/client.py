"""Campaign client: a proxy between the server and the communicator.

The client connects to the server, handshakes, and then loops: request a
change, hand it to the communicator, return the communicator's status as a
confirmation, repeat until the server reports exhaustion.  It performs no
processing of its own on the change and writes nothing to stdout.

Communicators come in two flavors: an executable script spoken to over
newline-delimited JSON on stdin/stdout, and the builtin ``builtin:mock``
communicator that drives the mock target's control channel in-process.
"""

from __future__ import annotations

import json
import logging
import queue
import socket
import subprocess
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Protocol

from .definition import DefinitionError, strip_json_comments
from .generator import ConfigChange
from .protocol import (
    ClientAction,
    ClientSignal,
    ClientState,
    ConfigConfirmation,
    ConfigExhaustion,
    ConfigFulfillment,
    ConfigRequest,
    ConfigTimeout,
    HandshakeInit,
    ProtocolError,
    client_transition,
    decode,
    read_frame,
    send_message,
)

log = logging.getLogger(__name__)

APPLY_TIMEOUT_S = 30


@dataclass(frozen=True, slots=True)
class CommunicatorResponse:
    status: str
    extended_status: dict[str, Any] = field(default_factory=dict)


def _error(reason: str) -> CommunicatorResponse:
    return CommunicatorResponse("ERROR", {"reason": reason})


class Communicator(Protocol):
    def apply_change(self, change: ConfigChange) -> CommunicatorResponse: ...

    def close(self) -> None: ...


def encode_change_command(change: ConfigChange) -> bytes:
    doc = {
        "command": "CHANGE",
        "config_change": {
            "Name": change.name,
            "Value": change.value,
            "Action": change.action,
        },
    }
    return json.dumps(doc, separators=(",", ":")).encode("utf-8") + b"\n"


def parse_communicator_response(line: bytes) -> CommunicatorResponse:
    try:
        doc = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        return _error("malformed response")
    if not isinstance(doc, dict):
        return _error("malformed response")
    status = doc.get("status")
    if status not in ("OK", "ERROR", "INVALID"):
        return _error("malformed response")
    extended = doc.get("extended_status", {})
    if not isinstance(extended, dict):
        return _error("malformed response")
    return CommunicatorResponse(status, extended)


class ScriptCommunicator:
    """Communicator subprocess speaking one JSON line per command."""

    def __init__(self, argv: list[str], apply_timeout_s: float = APPLY_TIMEOUT_S) -> None:
        self.apply_timeout_s = apply_timeout_s
        self._proc = subprocess.Popen(
            argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
        )
        self._lines: queue.Queue[bytes | None] = queue.Queue()
        threading.Thread(target=self._pump, daemon=True).start()

    def _pump(self) -> None:
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def _send(self, payload: bytes) -> bool:
        if self._proc.poll() is not None or self._proc.stdin is None:
            return False
        try:
            self._proc.stdin.write(payload)
            self._proc.stdin.flush()
            return True
        except (BrokenPipeError, OSError):
            return False

    def apply_change(self, change: ConfigChange) -> CommunicatorResponse:
        if not self._send(encode_change_command(change)):
            return _error("communicator closed")
        try:
            line = self._lines.get(timeout=self.apply_timeout_s)
        except queue.Empty:
            return _error("timeout")
        if line is None:
            return _error("communicator closed")
        return parse_communicator_response(line)

    def close(self) -> None:
        self._send(b'{"command":"CLOSE"}\n')
        if self._proc.stdin is not None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
        try:
            self._proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()


#: server_tokens value -> banner string the target would expose.
TOKEN_BANNERS = {
    "Full": "Apache/2.4.53 (Debian)",
    "Prod": "Apache",
    "Major": "Apache/2",
    "Minor": "Apache/2.4",
    "Min": "Apache/2.4.53",
    "OS": "Apache/2.4.53 (Debian)",
}

DEFAULT_VERSION = "Apache/2.4.53 (Debian)"


class MockCommunicator:
    """Builtin communicator driving the mock target's control channel.

    Understands the four demo parameters: port, start_systemctl_service
    (enabled), server_tokens (banner + signature text), server_signature
    (signature on/off).  The token currently in force decides both the
    banner and, while the signature is on, the error-page version string.
    """

    def __init__(self, control_host: str, control_port: int) -> None:
        self.control_host = control_host
        self.control_port = control_port
        self._sock: socket.socket | None = None
        self._reader: Any = None
        self._version = DEFAULT_VERSION
        self._signature_on = True

    def _connect(self) -> None:
        if self._sock is None:
            self._sock = socket.create_connection((self.control_host, self.control_port), timeout=5)
            self._reader = self._sock.makefile("r", encoding="utf-8", newline="\n")

    def _control(self, line: str) -> str | None:
        """Send one control command; returns an error reason or None."""
        try:
            self._connect()
            assert self._sock is not None
            self._sock.sendall(line.encode("utf-8") + b"\n")
            reply = self._reader.readline()
        except OSError as exc:
            return f"control channel: {exc}"
        if not reply:
            return "control channel closed"
        reply = reply.rstrip("\n")
        if reply != "OK":
            return reply
        return None

    def apply_change(self, change: ConfigChange) -> CommunicatorResponse:
        name, value = change.name, change.value
        commands: list[str] = []
        if name == "port":
            if isinstance(value, bool) or not isinstance(value, int):
                return CommunicatorResponse("INVALID", {"reason": "port must be a number"})
            commands.append(f"SET port {value}")
        elif name in ("start_systemctl_service", "enabled"):
            if not isinstance(value, bool):
                return CommunicatorResponse("INVALID", {"reason": "enabled must be a bool"})
            commands.append(f"SET enabled {'true' if value else 'false'}")
        elif name == "server_tokens":
            banner = TOKEN_BANNERS.get(value) if isinstance(value, str) else None
            if banner is None:
                return CommunicatorResponse("INVALID", {"reason": f"unknown token {value!r}"})
            self._version = banner
            commands.append(f"SET banner {banner}")
            if self._signature_on:
                commands.append(f"SET signature {banner}")
        elif name == "server_signature":
            if value not in ("On", "Off", "EMail"):
                return CommunicatorResponse("INVALID", {"reason": f"unknown signature mode {value!r}"})
            self._signature_on = value != "Off"
            text = self._version if self._signature_on else ""
            commands.append(f"SET signature {text}".rstrip())
        else:
            return CommunicatorResponse("INVALID", {"reason": f"unknown parameter {name!r}"})

        for command in commands:
            reason = self._control(command)
            if reason is not None:
                return _error(reason)
        return CommunicatorResponse("OK", {})

    def close(self) -> None:
        if self._sock is not None:
            self._sock.close()
            self._sock = None


@dataclass(frozen=True, slots=True)
class ClientConfig:
    server_host: str
    server_port: int
    communicator: str
    communicator_args: tuple[str, ...] | dict[str, Any] = ()


def parse_client_config(text: str) -> ClientConfig:
    try:
        doc = json.loads(strip_json_comments(text))
    except json.JSONDecodeError as exc:
        raise DefinitionError(f"malformed client config: {exc}") from exc
    if not isinstance(doc, dict):
        raise DefinitionError("client config must be a JSON object")
    host = doc.get("server_host")
    port = doc.get("server_port")
    communicator = doc.get("communicator")
    args = doc.get("communicator_args", [])
    if not isinstance(host, str) or not host:
        raise DefinitionError("client config: server_host must be a string")
    if isinstance(port, bool) or not isinstance(port, int) or not 1 <= port <= 65535:
        raise DefinitionError("client config: server_port must be a port number")
    if not isinstance(communicator, str) or not communicator:
        raise DefinitionError("client config: communicator must be a string")
    if isinstance(args, list):
        if not all(isinstance(a, str) for a in args):
            raise DefinitionError("client config: communicator_args list must hold strings")
        return ClientConfig(host, port, communicator, tuple(args))
    if isinstance(args, dict):
        return ClientConfig(host, port, communicator, args)
    raise DefinitionError("client config: communicator_args must be a list or object")


def load_client_config(path: str) -> ClientConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_client_config(fh.read())


def spawn_communicator(cfg: ClientConfig) -> Communicator:
    if cfg.communicator == "builtin:mock":
        args = cfg.communicator_args if isinstance(cfg.communicator_args, dict) else {}
        host = args.get("control_host", "127.0.0.1")
        port = args.get("control_port")
        if isinstance(port, bool) or not isinstance(port, int):
            raise DefinitionError("builtin:mock needs an integer control_port argument")
        return MockCommunicator(host, port)
    argv = [cfg.communicator]
    if isinstance(cfg.communicator_args, tuple):
        argv.extend(cfg.communicator_args)
    return ScriptCommunicator(argv)


def run_client(cfg: ClientConfig) -> int:
    """Run the campaign loop; 0 after clean exhaustion, 1 otherwise."""
    try:
        sock = socket.create_connection((cfg.server_host, cfg.server_port), timeout=10)
    except OSError as exc:
        log.warning("connection to %s:%d failed: %s", cfg.server_host, cfg.server_port, exc)
        return 1
    # Generous read deadline: tests on the server side may run long, but a
    # silent server past this point is a hang, not a campaign.
    sock.settimeout(300)

    communicator: Communicator | None = None
    pending: ConfigChange | None = None
    clean_exit = False
    state = ClientState.CONNECTING
    state, action = client_transition(state, ClientSignal.CONNECTED)

    with sock, sock.makefile("rb") as stream:
        try:
            send_message(sock, HandshakeInit())
            while state is not ClientState.CLOSED:
                try:
                    frame = read_frame(stream)
                except OSError:
                    frame = None
                if frame is None:
                    log.warning("server closed the connection mid-session")
                    break
                try:
                    msg = decode(frame)
                except ProtocolError as exc:
                    log.warning("protocol error: %s", exc)
                    break
                state, action = client_transition(state, msg)

                if action is ClientAction.SEND_REQUEST:
                    send_message(sock, ConfigRequest())
                elif action is ClientAction.APPLY_CHANGE:
                    assert isinstance(msg, ConfigFulfillment)
                    pending = msg.change
                    if communicator is None:
                        try:
                            communicator = spawn_communicator(cfg)
                        except (OSError, DefinitionError) as exc:
                            log.warning("cannot start communicator: %s", exc)
                            break
                    response = communicator.apply_change(pending)
                    state, action = client_transition(state, ClientSignal.COMMUNICATOR_DONE)
                    if action is ClientAction.CONFIRM_THEN_REQUEST:
                        send_message(
                            sock,
                            ConfigConfirmation(
                                pending.change_id, response.status, response.extended_status
                            ),
                        )
                        send_message(sock, ConfigRequest())
                elif action is ClientAction.SLEEP:
                    assert isinstance(msg, ConfigTimeout)
                    time.sleep(msg.wait_ms / 1000.0)
                    state, action = client_transition(state, ClientSignal.TIMER_EXPIRED)
                    if action is ClientAction.SEND_REQUEST:
                        send_message(sock, ConfigRequest())
                elif action is ClientAction.CLOSE_COMMUNICATOR:
                    assert isinstance(msg, ConfigExhaustion)
                    if communicator is not None:
                        communicator.close()
                        communicator = None
                    state, action = client_transition(state, ClientSignal.COMMUNICATOR_CLOSED)
                    clean_exit = True
                elif state is ClientState.CLOSED:
                    log.warning("unexpected message %r closed the session", msg)
        except OSError as exc:
            # A failed send; reads are guarded above.
            log.warning("connection failed mid-session: %s", exc)

    if communicator is not None:
        communicator.close()
    return 0 if clean_exit else 1
