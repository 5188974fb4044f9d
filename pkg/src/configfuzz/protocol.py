"""Wire protocol: seven message types and the two session state machines.

Framing is one UTF-8 JSON object per line, LF-terminated, over TCP.  The
client initiates the connection (reverse connection: the target side never
opens a listening port) and speaks first with HANDSHAKE_INIT.

The transition functions are pure: they take the current state plus one
event and return the successor state and the action the driver must
perform.  Events are decoded messages or local signals (tests finished,
generator exhausted, timer expiry...).  Any out-of-order message lands in
the Closed state, which is absorbing.
"""

from __future__ import annotations

import json
import socket
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, BinaryIO, Union

from .generator import CHANGE_ACTIONS, ConfigChange

PROTOCOL_VERSION = 1

STATUSES = ("OK", "ERROR", "INVALID")


class ProtocolError(ValueError):
    """Frame that cannot be decoded; the caller closes the connection."""


@dataclass(frozen=True, slots=True)
class HandshakeInit:
    protocol_version: int = PROTOCOL_VERSION


@dataclass(frozen=True, slots=True)
class HandshakeAck:
    protocol_version: int = PROTOCOL_VERSION


@dataclass(frozen=True, slots=True)
class ConfigRequest:
    pass


@dataclass(frozen=True, slots=True)
class ConfigFulfillment:
    change: ConfigChange


@dataclass(frozen=True, slots=True)
class ConfigConfirmation:
    change_id: int
    status: str
    extended_status: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.status not in STATUSES:
            raise ProtocolError(f"unknown confirmation status {self.status!r}")


@dataclass(frozen=True, slots=True)
class ConfigTimeout:
    wait_ms: int


@dataclass(frozen=True, slots=True)
class ConfigExhaustion:
    pass


Message = Union[
    HandshakeInit,
    HandshakeAck,
    ConfigRequest,
    ConfigFulfillment,
    ConfigConfirmation,
    ConfigTimeout,
    ConfigExhaustion,
]


def _dumps(doc: dict[str, Any]) -> bytes:
    return json.dumps(doc, separators=(",", ":")).encode("utf-8") + b"\n"


def encode(msg: Message) -> bytes:
    """One LF-terminated JSON line; field order is fixed per variant."""
    if isinstance(msg, HandshakeInit):
        return _dumps({"type": "HANDSHAKE_INIT", "protocol_version": msg.protocol_version})
    if isinstance(msg, HandshakeAck):
        return _dumps({"type": "HANDSHAKE_ACK", "protocol_version": msg.protocol_version})
    if isinstance(msg, ConfigRequest):
        return _dumps({"type": "CONFIG_REQUEST"})
    if isinstance(msg, ConfigFulfillment):
        change = msg.change
        return _dumps(
            {
                "type": "CONFIG_FULFILLMENT",
                "change": {
                    "id": change.change_id,
                    "name": change.name,
                    "action": change.action,
                    "value": change.value,
                },
            }
        )
    if isinstance(msg, ConfigConfirmation):
        return _dumps(
            {
                "type": "CONFIG_CONFIRMATION",
                "change_id": msg.change_id,
                "status": msg.status,
                "extended_status": msg.extended_status,
            }
        )
    if isinstance(msg, ConfigTimeout):
        return _dumps({"type": "CONFIG_TIMEOUT", "wait_ms": msg.wait_ms})
    if isinstance(msg, ConfigExhaustion):
        return _dumps({"type": "CONFIG_EXHAUSTION"})
    raise ProtocolError(f"cannot encode {msg!r}")


def _need(doc: dict[str, Any], key: str, kind: str) -> Any:
    if key not in doc:
        raise ProtocolError(f"{kind} frame is missing {key!r}")
    return doc[key]


def _need_int(doc: dict[str, Any], key: str, kind: str) -> int:
    value = _need(doc, key, kind)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ProtocolError(f"{kind}.{key} must be an integer")
    return value


def _check_keys(doc: dict[str, Any], kind: str, allowed: tuple[str, ...]) -> None:
    for key in doc:
        if key != "type" and key not in allowed:
            raise ProtocolError(f"unexpected field {key!r} in {kind} frame")


def decode(frame: bytes) -> Message:
    """Inverse of :func:`encode`; raises :class:`ProtocolError` otherwise."""
    try:
        doc = json.loads(frame.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"malformed frame: {exc}") from exc
    if not isinstance(doc, dict):
        raise ProtocolError("frame is not a JSON object")
    kind = doc.get("type")
    if not isinstance(kind, str):
        raise ProtocolError("frame has no type tag")

    if kind == "HANDSHAKE_INIT":
        _check_keys(doc, kind, ("protocol_version",))
        return HandshakeInit(_need_int(doc, "protocol_version", kind))
    if kind == "HANDSHAKE_ACK":
        _check_keys(doc, kind, ("protocol_version",))
        return HandshakeAck(_need_int(doc, "protocol_version", kind))
    if kind == "CONFIG_REQUEST":
        _check_keys(doc, kind, ())
        return ConfigRequest()
    if kind == "CONFIG_FULFILLMENT":
        _check_keys(doc, kind, ("change",))
        change = _need(doc, "change", kind)
        if not isinstance(change, dict):
            raise ProtocolError("CONFIG_FULFILLMENT.change must be an object")
        _check_keys(change, "change", ("id", "name", "action", "value"))
        name = _need(change, "name", "change")
        action = _need(change, "action", "change")
        value = _need(change, "value", "change")
        if not isinstance(name, str):
            raise ProtocolError("change.name must be a string")
        if action not in CHANGE_ACTIONS:
            raise ProtocolError(f"change.action {action!r} is unknown")
        if not isinstance(value, (bool, int, str)):
            raise ProtocolError(f"change.value {value!r} is not a scalar")
        return ConfigFulfillment(
            ConfigChange(_need_int(change, "id", "change"), name, action, value)
        )
    if kind == "CONFIG_CONFIRMATION":
        _check_keys(doc, kind, ("change_id", "status", "extended_status"))
        status = _need(doc, "status", kind)
        if status not in STATUSES:
            raise ProtocolError(f"confirmation status {status!r} is unknown")
        extended = _need(doc, "extended_status", kind)
        if not isinstance(extended, dict):
            raise ProtocolError("extended_status must be an object")
        return ConfigConfirmation(_need_int(doc, "change_id", kind), status, extended)
    if kind == "CONFIG_TIMEOUT":
        _check_keys(doc, kind, ("wait_ms",))
        wait_ms = _need_int(doc, "wait_ms", kind)
        if wait_ms <= 0:
            raise ProtocolError("wait_ms must be positive")
        return ConfigTimeout(wait_ms)
    if kind == "CONFIG_EXHAUSTION":
        _check_keys(doc, kind, ())
        return ConfigExhaustion()
    raise ProtocolError(f"unknown message type {kind!r}")


def send_message(sock: socket.socket, msg: Message) -> None:
    sock.sendall(encode(msg))


def close_listener(sock: socket.socket) -> None:
    """Close a listening socket so a blocked accept() wakes immediately.

    A bare close() leaves the kernel socket in LISTEN until the accept
    thread's in-flight syscall drops its reference, which it only does
    after accepting one more connection; shutdown() aborts it now.
    """
    try:
        sock.shutdown(socket.SHUT_RDWR)
    except OSError:
        pass
    sock.close()


def read_frame(stream: BinaryIO) -> bytes | None:
    """Next LF-terminated line, or None at EOF."""
    line = stream.readline()
    if not line:
        return None
    return line


# Session state machines.


class ServerState(Enum):
    AWAIT_HANDSHAKE = "await_handshake"
    AWAIT_REQUEST = "await_request"
    AWAIT_CONFIRMATION = "await_confirmation"
    TESTING = "testing"
    EXHAUSTED = "exhausted"
    CLOSED = "closed"


class ServerAction(Enum):
    NONE = "none"
    SEND_ACK = "send_ack"
    SEND_FULFILLMENT = "send_fulfillment"
    SEND_TIMEOUT = "send_timeout"
    SEND_EXHAUSTION = "send_exhaustion"
    START_TESTS = "start_tests"


class ServerSignal(Enum):
    """Local (non-wire) events fed to the server machine."""

    TESTS_FINISHED = "tests_finished"
    GENERATOR_EXHAUSTED = "generator_exhausted"


ServerEvent = Union[Message, ServerSignal]


def server_transition(
    state: ServerState, event: ServerEvent, *, change_available: bool = True
) -> tuple[ServerState, ServerAction]:
    """Pure transition: (state, event) -> (state', action).

    ``change_available`` is consulted only for CONFIG_REQUEST in
    AwaitRequest; the driver may equivalently feed GENERATOR_EXHAUSTED
    after a failed pull.  Closed is absorbing.
    """
    if state is ServerState.CLOSED:
        return (ServerState.CLOSED, ServerAction.NONE)

    if state is ServerState.AWAIT_HANDSHAKE:
        if isinstance(event, HandshakeInit) and event.protocol_version == PROTOCOL_VERSION:
            return (ServerState.AWAIT_REQUEST, ServerAction.SEND_ACK)
        return (ServerState.CLOSED, ServerAction.NONE)

    if state is ServerState.AWAIT_REQUEST:
        if isinstance(event, ConfigRequest):
            if change_available:
                return (ServerState.AWAIT_CONFIRMATION, ServerAction.SEND_FULFILLMENT)
            return (ServerState.EXHAUSTED, ServerAction.SEND_EXHAUSTION)
        if event is ServerSignal.GENERATOR_EXHAUSTED:
            return (ServerState.EXHAUSTED, ServerAction.SEND_EXHAUSTION)
        return (ServerState.CLOSED, ServerAction.NONE)

    if state is ServerState.AWAIT_CONFIRMATION:
        if isinstance(event, ConfigConfirmation):
            return (ServerState.TESTING, ServerAction.START_TESTS)
        return (ServerState.CLOSED, ServerAction.NONE)

    if state is ServerState.TESTING:
        if isinstance(event, ConfigRequest):
            return (ServerState.TESTING, ServerAction.SEND_TIMEOUT)
        if event is ServerSignal.TESTS_FINISHED:
            return (ServerState.AWAIT_REQUEST, ServerAction.NONE)
        return (ServerState.CLOSED, ServerAction.NONE)

    # Exhausted: keep answering requests, close on anything else.
    if isinstance(event, ConfigRequest):
        return (ServerState.EXHAUSTED, ServerAction.SEND_EXHAUSTION)
    return (ServerState.CLOSED, ServerAction.NONE)


class ClientState(Enum):
    CONNECTING = "connecting"
    HANDSHAKING = "handshaking"
    REQUESTING = "requesting"
    APPLYING = "applying"
    WAITING = "waiting"
    SHUTTING_DOWN = "shutting_down"
    CLOSED = "closed"


class ClientAction(Enum):
    NONE = "none"
    SEND_HANDSHAKE = "send_handshake"
    SEND_REQUEST = "send_request"
    APPLY_CHANGE = "apply_change"
    CONFIRM_THEN_REQUEST = "confirm_then_request"
    SLEEP = "sleep"
    CLOSE_COMMUNICATOR = "close_communicator"


class ClientSignal(Enum):
    """Local (non-wire) events fed to the client machine."""

    CONNECTED = "connected"
    COMMUNICATOR_DONE = "communicator_done"
    TIMER_EXPIRED = "timer_expired"
    COMMUNICATOR_CLOSED = "communicator_closed"


ClientEvent = Union[Message, ClientSignal]


def client_transition(
    state: ClientState, event: ClientEvent
) -> tuple[ClientState, ClientAction]:
    """Pure transition for the client session.  Closed is absorbing."""
    if state is ClientState.CLOSED:
        return (ClientState.CLOSED, ClientAction.NONE)

    if state is ClientState.CONNECTING:
        if event is ClientSignal.CONNECTED:
            return (ClientState.HANDSHAKING, ClientAction.SEND_HANDSHAKE)
        return (ClientState.CLOSED, ClientAction.NONE)

    if state is ClientState.HANDSHAKING:
        if isinstance(event, HandshakeAck) and event.protocol_version == PROTOCOL_VERSION:
            return (ClientState.REQUESTING, ClientAction.SEND_REQUEST)
        return (ClientState.CLOSED, ClientAction.NONE)

    if state is ClientState.REQUESTING:
        if isinstance(event, ConfigFulfillment):
            return (ClientState.APPLYING, ClientAction.APPLY_CHANGE)
        if isinstance(event, ConfigTimeout):
            return (ClientState.WAITING, ClientAction.SLEEP)
        if isinstance(event, ConfigExhaustion):
            return (ClientState.SHUTTING_DOWN, ClientAction.CLOSE_COMMUNICATOR)
        return (ClientState.CLOSED, ClientAction.NONE)

    if state is ClientState.APPLYING:
        if event is ClientSignal.COMMUNICATOR_DONE:
            return (ClientState.REQUESTING, ClientAction.CONFIRM_THEN_REQUEST)
        return (ClientState.CLOSED, ClientAction.NONE)

    if state is ClientState.WAITING:
        if event is ClientSignal.TIMER_EXPIRED:
            return (ClientState.REQUESTING, ClientAction.SEND_REQUEST)
        return (ClientState.CLOSED, ClientAction.NONE)

    # ShuttingDown.
    if event is ClientSignal.COMMUNICATOR_CLOSED:
        return (ClientState.CLOSED, ClientAction.NONE)
    return (ClientState.CLOSED, ClientAction.NONE)
