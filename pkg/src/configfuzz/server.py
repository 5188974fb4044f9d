"""Campaign server: drive generation, fulfillment, testing and storage.

One campaign per process.  The main loop owns the session state machine,
the only socket-writer role, and the only store-writer role; it consumes a
queue fed by two helpers:

* a reader thread turning client frames into events (and EOF into one);
* a test thread per confirmed change running the battery off-loop, so a
  CONFIG_REQUEST arriving mid-testing is answered with CONFIG_TIMEOUT
  immediately instead of after the tests.

Each pushed change is echoed to the log stream as
``pushed name/value pair <name>:<value>`` — the campaign's progress log.
Extra client connections are refused while a session is active.
"""

from __future__ import annotations

import logging
import queue
import socket
import sys
import threading
from dataclasses import dataclass
from typing import TextIO

from .definition import ConfigDefinition, load_definition, render_scalar, validate_definition
from .generator import ChangeGenerator, ConfigChange
from .harness import TestContext, run_all_tests
from .protocol import (
    ConfigConfirmation,
    close_listener,
    ConfigExhaustion,
    ConfigFulfillment,
    ConfigRequest,
    ConfigTimeout,
    HandshakeAck,
    ProtocolError,
    ServerAction,
    ServerSignal,
    ServerState,
    decode,
    read_frame,
    send_message,
    server_transition,
)
from .store import ResultsStore, open_store

log = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class ServerConfig:
    bind_port: int
    definition_path: str
    store_path: str
    bind_host: str = "127.0.0.1"


@dataclass(slots=True)
class CampaignStatus:
    changes_issued: int = 0
    changes_confirmed: int = 0
    results_recorded: int = 0
    state: ServerState = ServerState.AWAIT_HANDSHAKE


# Internal event tags for the main loop's queue.
_FRAME, _EOF, _TESTS_DONE = "frame", "eof", "tests_done"


class CampaignServer:
    """Bind, accept one client, run the campaign to exhaustion."""

    def __init__(
        self,
        definition: ConfigDefinition,
        store: ResultsStore,
        *,
        bind_host: str = "127.0.0.1",
        bind_port: int = 0,
        log_stream: TextIO | None = None,
    ) -> None:
        self.definition = definition
        self.store = store
        self.log_stream = log_stream if log_stream is not None else sys.stdout
        self.status = CampaignStatus()
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((bind_host, bind_port))
        self._listener.listen(8)
        self.bound_port: int = self._listener.getsockname()[1]
        self._events: queue.Queue = queue.Queue()
        self._conn: socket.socket | None = None

    # Helper threads.

    def _reader(self, conn: socket.socket) -> None:
        stream = conn.makefile("rb")
        try:
            while True:
                try:
                    frame = read_frame(stream)
                except OSError:
                    frame = None
                if frame is None:
                    self._events.put((_EOF,))
                    return
                self._events.put((_FRAME, frame))
        finally:
            # Release the io-ref so conn.close() actually closes the fd.
            try:
                stream.close()
            except OSError:
                pass

    def _refuser(self) -> None:
        while True:
            try:
                extra, peer = self._listener.accept()
            except OSError:
                return
            log.warning("refusing extra connection from %s", peer)
            extra.close()

    def _run_tests(self, change: ConfigChange, target_port: int) -> None:
        ctx = TestContext(
            target_host=self.definition.meta.target.host,
            target_port=target_port,
            change=change,
        )
        results = run_all_tests(self.definition.meta.tests, ctx)
        self._events.put((_TESTS_DONE, change.change_id, results))

    # Main loop.

    def run(self) -> int:
        """Block until exhaustion (0) or session abort (1)."""
        meta = self.definition.meta
        generator = ChangeGenerator(self.definition)
        target_port = meta.target.base_port
        outstanding: ConfigChange | None = None
        exhausted = False

        try:
            conn, peer = self._listener.accept()
        except OSError:
            log.info("listener closed before any client connected")
            return 1
        self._conn = conn
        log.info("client connected from %s", peer)
        threading.Thread(target=self._refuser, daemon=True).start()
        threading.Thread(target=self._reader, args=(conn,), daemon=True).start()

        state = ServerState.AWAIT_HANDSHAKE
        try:
            while True:
                event = self._events.get()
                if event[0] == _EOF:
                    if exhausted:
                        break
                    log.warning("client disappeared mid-campaign")
                    return 1

                if event[0] == _TESTS_DONE:
                    _, change_id, results = event
                    self.store.record_results(change_id, results)
                    self.status.results_recorded += 1
                    state, action = server_transition(state, ServerSignal.TESTS_FINISHED)
                    self.status.state = state
                    if state is ServerState.CLOSED:
                        return 1
                    continue

                try:
                    msg = decode(event[1])
                except ProtocolError as exc:
                    log.warning("protocol error, aborting campaign: %s", exc)
                    return 1

                # Correlation rule: a confirmation must name the
                # outstanding change.
                if (
                    isinstance(msg, ConfigConfirmation)
                    and state is ServerState.AWAIT_CONFIRMATION
                    and (outstanding is None or msg.change_id != outstanding.change_id)
                ):
                    log.warning("confirmation for wrong change %d", msg.change_id)
                    return 1

                pulled: ConfigChange | None = None
                if isinstance(msg, ConfigRequest) and state is ServerState.AWAIT_REQUEST:
                    pulled = generator.next_change()
                    if pulled is None:
                        state, action = server_transition(state, ServerSignal.GENERATOR_EXHAUSTED)
                    else:
                        state, action = server_transition(state, msg, change_available=True)
                else:
                    state, action = server_transition(state, msg)
                self.status.state = state

                if action is ServerAction.SEND_ACK:
                    send_message(conn, HandshakeAck())
                elif action is ServerAction.SEND_FULFILLMENT:
                    assert pulled is not None
                    outstanding = pulled
                    send_message(conn, ConfigFulfillment(pulled))
                    self.status.changes_issued += 1
                    print(
                        f"pushed name/value pair {pulled.name}:{render_scalar(pulled.value)}",
                        file=self.log_stream,
                        flush=True,
                    )
                elif action is ServerAction.SEND_TIMEOUT:
                    send_message(conn, ConfigTimeout(meta.timeout_wait_ms))
                elif action is ServerAction.SEND_EXHAUSTION:
                    send_message(conn, ConfigExhaustion())
                    exhausted = True
                    break
                elif action is ServerAction.START_TESTS:
                    assert outstanding is not None and isinstance(msg, ConfigConfirmation)
                    self.status.changes_confirmed += 1
                    self.store.record_change(outstanding, msg.status)
                    if (
                        msg.status == "OK"
                        and outstanding.name == meta.port_parameter
                        and isinstance(outstanding.value, int)
                        and not isinstance(outstanding.value, bool)
                    ):
                        # The service moved; tests must follow it.
                        target_port = outstanding.value
                    threading.Thread(
                        target=self._run_tests, args=(outstanding, target_port), daemon=True
                    ).start()

                if state is ServerState.CLOSED:
                    log.warning("out-of-order message %r, aborting campaign", msg)
                    return 1
        finally:
            self.close()
        log.info(
            "campaign complete: %d issued, %d confirmed, %d result sets",
            self.status.changes_issued,
            self.status.changes_confirmed,
            self.status.results_recorded,
        )
        return 0

    def close(self) -> None:
        close_listener(self._listener)
        conn, self._conn = self._conn, None  # may be called from two threads
        if conn is not None:
            # shutdown() bypasses the makefile io-ref held by the reader
            # thread, so the peer sees FIN even while that thread blocks.
            try:
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            conn.close()


def run_server(cfg: ServerConfig, *, log_stream: TextIO | None = None) -> int:
    """CLI entry: validate, bind, run one campaign.  2 = bad definition."""
    try:
        definition = load_definition(cfg.definition_path)
    except (OSError, ValueError) as exc:
        log.error("cannot load definition: %s", exc)
        return 2
    violations = validate_definition(definition)
    if violations:
        for violation in violations:
            log.error("definition: %s", violation)
        return 2
    with open_store(cfg.store_path) as store:
        server = CampaignServer(
            definition,
            store,
            bind_host=cfg.bind_host,
            bind_port=cfg.bind_port,
            log_stream=log_stream,
        )
        return server.run()
