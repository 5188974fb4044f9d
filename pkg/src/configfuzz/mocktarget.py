"""Controllable stand-in for a reconfigurable network service.

The mock exposes two loopback TCP endpoints:

* a control channel taking one command per line (``SET port 5003``,
  ``SET banner <text>``, ``SET signature <text>``, ``SET enabled true``,
  ``RESET``) and answering ``OK`` or ``ERR <reason>``;
* at most one service port whose line protocol answers ``HEAD`` with
  ``BANNER <banner>`` and ``GET <path>`` with an error-page string carrying
  the signature and the port, mirroring how a web server leaks its version
  in headers and error pages.

Port changes rebind the service listener before the control reply is sent,
so a scan issued after ``OK`` always sees the new state.  Disabled means no
service listener at all.
"""

from __future__ import annotations

import logging
import socket
import threading
from dataclasses import dataclass, replace

from .protocol import close_listener

log = logging.getLogger(__name__)

LOOPBACK = "127.0.0.1"


@dataclass(frozen=True, slots=True)
class MockTargetState:
    enabled: bool = True
    service_port: int = 80
    banner: str = "Apache/2.4.53 (Debian)"
    signature: str = "Apache/2.4.53 (Debian)"


NO_VERSION = "<no version number found>"


def serve_request(state: MockTargetState, request: str) -> str:
    """Service-side request handling; pure so it is testable without sockets."""
    verb = request.split(" ", 1)[0]
    if verb == "HEAD":
        return f"BANNER {state.banner}"
    if verb == "GET":
        if state.signature == "":
            return f"ERRORPAGE {NO_VERSION}"
        return f"ERRORPAGE {state.signature} Server at {LOOPBACK} Port {state.service_port}"
    return "ERR verb"


def parse_control(line: str) -> tuple[str, str] | None:
    """Split a control line into (command, argument); None when malformed."""
    line = line.rstrip("\r\n")
    if line == "RESET":
        return ("RESET", "")
    if not line.startswith("SET "):
        return None
    rest = line[4:]
    field, _, value = rest.partition(" ")
    if field in ("port", "enabled") and not value:
        return None
    if field in ("port", "banner", "signature", "enabled"):
        return (field, value)
    return None


class MockTarget:
    """Owns the state, the control listener, and the service listener."""

    def __init__(self, control_port: int, initial: MockTargetState | None = None) -> None:
        self.initial = initial if initial is not None else MockTargetState()
        self._lock = threading.Lock()
        self._state = self.initial
        self._service_sock: socket.socket | None = None
        self._control_sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._control_sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._control_sock.bind((LOOPBACK, control_port))
        self._control_sock.listen(8)
        self.control_port = self._control_sock.getsockname()[1]
        self._closing = False

    @property
    def state(self) -> MockTargetState:
        with self._lock:
            return self._state

    # Service side.

    def _open_service(self, port: int) -> socket.socket:
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind((LOOPBACK, port))
        sock.listen(16)
        threading.Thread(target=self._service_accept_loop, args=(sock,), daemon=True).start()
        return sock

    def _service_accept_loop(self, sock: socket.socket) -> None:
        while True:
            try:
                conn, _ = sock.accept()
            except OSError:
                return  # listener was closed by a rebind or shutdown
            threading.Thread(target=self._service_session, args=(conn,), daemon=True).start()

    def _service_session(self, conn: socket.socket) -> None:
        with conn:
            reader = conn.makefile("r", encoding="utf-8", newline="\n")
            for line in reader:
                with self._lock:
                    state = self._state
                reply = serve_request(state, line.rstrip("\r\n"))
                try:
                    conn.sendall(reply.encode("utf-8") + b"\n")
                except OSError:
                    return

    def _rebind_service(self, new_state: MockTargetState) -> str | None:
        """Apply listener side effects for new_state; returns an error or None."""
        old = self._service_sock
        want_open = new_state.enabled
        if old is not None:
            close_listener(old)
            self._service_sock = None
        if want_open:
            try:
                self._service_sock = self._open_service(new_state.service_port)
            except OSError as exc:
                return f"bind {exc.strerror or exc}"
        return None

    # Control side.

    def apply_control(self, line: str) -> str:
        parsed = parse_control(line)
        if parsed is None:
            return "ERR parse"
        command, value = parsed
        with self._lock:
            state = self._state
            if command == "RESET":
                new_state = self.initial
            elif command == "port":
                try:
                    port = int(value, 10)
                except ValueError:
                    return "ERR parse"
                if not 1 <= port <= 65535:
                    return "ERR range"
                new_state = replace(state, service_port=port)
            elif command == "enabled":
                if value not in ("true", "false"):
                    return "ERR parse"
                new_state = replace(state, enabled=(value == "true"))
            elif command == "banner":
                new_state = replace(state, banner=value)
            else:
                new_state = replace(state, signature=value)

            needs_rebind = new_state.enabled != state.enabled or (
                new_state.enabled and new_state.service_port != state.service_port
            )
            if needs_rebind:
                error = self._rebind_service(new_state)
                if error is not None:
                    # Listener is down; reflect that rather than lie.
                    self._state = replace(new_state, enabled=False)
                    return f"ERR {error}"
            self._state = new_state
        return "OK"

    def _control_session(self, conn: socket.socket) -> None:
        with conn:
            reader = conn.makefile("r", encoding="utf-8", newline="\n")
            for line in reader:
                reply = self.apply_control(line)
                try:
                    conn.sendall(reply.encode("utf-8") + b"\n")
                except OSError:
                    return

    def start(self) -> None:
        """Bind the initial service listener and serve control connections in back."""
        with self._lock:
            error = self._rebind_service(self._state)
            if error is not None:
                raise OSError(f"cannot open service port {self._state.service_port}: {error}")
        threading.Thread(target=self._control_accept_loop, daemon=True).start()

    def _control_accept_loop(self) -> None:
        while True:
            try:
                conn, _ = self._control_sock.accept()
            except OSError:
                return
            threading.Thread(target=self._control_session, args=(conn,), daemon=True).start()

    def close(self) -> None:
        self._closing = True
        close_listener(self._control_sock)
        with self._lock:
            if self._service_sock is not None:
                close_listener(self._service_sock)
                self._service_sock = None

    def __enter__(self) -> "MockTarget":
        self.start()
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()


def run_mock_target(control_port: int, initial: MockTargetState | None = None) -> None:
    """Blocking entry point used by the CLI; runs until interrupted."""
    target = MockTarget(control_port, initial)
    target.start()
    log.info("mock target: control on %s:%d", LOOPBACK, target.control_port)
    try:
        threading.Event().wait()
    finally:
        target.close()
