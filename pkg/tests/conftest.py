from __future__ import annotations

import os
import socket
import sys
import threading

import pytest

sys.path.insert(0, os.path.dirname(__file__))

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")
PLUGINS = os.path.join(os.path.dirname(__file__), "plugins")

# Lines printed in the terminal summary, one per acceptance criterion.
ACCEPTANCE_LINES: list[str] = []


def record_acceptance(name: str, passed: bool) -> None:
    ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}: {name}")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def free_port() -> int:
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as sock:
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


@pytest.fixture
def fixtures_dir() -> str:
    return FIXTURES


@pytest.fixture
def plugins_dir() -> str:
    return PLUGINS


class ServerThread:
    """Run a CampaignServer in a thread and collect its exit code."""

    def __init__(self, server) -> None:
        self.server = server
        self.exit_code: int | None = None
        self._thread = threading.Thread(target=self._run, daemon=True)

    def _run(self) -> None:
        self.exit_code = self.server.run()

    def __enter__(self) -> "ServerThread":
        self._thread.start()
        return self

    def __exit__(self, *exc_info: object) -> None:
        self._thread.join(timeout=30)
        if self._thread.is_alive():
            # Unblock a stuck accept/recv so teardown cannot hang.
            self.server.close()
            self._thread.join(timeout=10)
        else:
            self.server.close()

    def join(self, timeout: float = 60) -> int | None:
        self._thread.join(timeout=timeout)
        return self.exit_code
