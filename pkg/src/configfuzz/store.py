"""Campaign results persistence on SQLite, plus the CSV export.

Two tables: ``changes`` keyed by the generator's change_id and ``results``
referencing it.  The change row is committed before its results ever exist,
so a crash mid-campaign can lose results but never orphan them.

The CSV export is the campaign's flat view: one row per change, one column
per distinct result name in first-appearance order.  Quoting is RFC-4180
style but applied to any cell containing a comma, quote, bracket, CR or LF,
because downstream consumers split on commas and brackets.
"""

from __future__ import annotations

import sqlite3
from dataclasses import dataclass
from datetime import datetime, timezone

from .definition import render_scalar
from .generator import ConfigChange
from .harness import TestResult

_SCHEMA = """
CREATE TABLE IF NOT EXISTS changes (
    change_id INTEGER PRIMARY KEY,
    change_name TEXT NOT NULL,
    action TEXT NOT NULL,
    change_value TEXT NOT NULL,
    status TEXT NOT NULL,
    created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS results (
    result_id INTEGER PRIMARY KEY AUTOINCREMENT,
    change_id INTEGER NOT NULL REFERENCES changes(change_id),
    result_name TEXT NOT NULL,
    result_summary TEXT NOT NULL
);
"""


class StoreError(Exception):
    pass


@dataclass(frozen=True, slots=True)
class ChangeRecord:
    change_id: int
    change_name: str
    action: str
    change_value: str
    status: str
    created_at: str


@dataclass(frozen=True, slots=True)
class ResultRecord:
    result_id: int
    change_id: int
    result_name: str
    result_summary: str


class ResultsStore:
    """Single-writer store; open/close or use as a context manager."""

    def __init__(self, path: str) -> None:
        self.path = path
        try:
            # Single-writer discipline is enforced by the server loop, not
            # by sqlite; the opening thread need not be the writing thread.
            self._db = sqlite3.connect(path, check_same_thread=False)
            self._db.execute("PRAGMA foreign_keys = ON")
            self._db.executescript(_SCHEMA)
            self._db.commit()
        except sqlite3.Error as exc:
            raise StoreError(f"cannot open store at {path}: {exc}") from exc

    def close(self) -> None:
        self._db.close()

    def __enter__(self) -> "ResultsStore":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()

    def record_change(self, change: ConfigChange, status: str) -> int:
        created_at = datetime.now(timezone.utc).isoformat()
        try:
            self._db.execute(
                "INSERT INTO changes (change_id, change_name, action, change_value, status, created_at)"
                " VALUES (?, ?, ?, ?, ?, ?)",
                (
                    change.change_id,
                    change.name,
                    change.action,
                    render_scalar(change.value),
                    status,
                    created_at,
                ),
            )
            self._db.commit()
        except sqlite3.Error as exc:
            raise StoreError(f"cannot record change {change.change_id}: {exc}") from exc
        return change.change_id

    def record_results(self, change_id: int, results: list[TestResult]) -> None:
        row = self._db.execute(
            "SELECT 1 FROM changes WHERE change_id = ?", (change_id,)
        ).fetchone()
        if row is None:
            raise StoreError(f"change {change_id} does not exist")
        try:
            self._db.executemany(
                "INSERT INTO results (change_id, result_name, result_summary) VALUES (?, ?, ?)",
                [(change_id, r.result_name, r.result_summary) for r in results],
            )
            self._db.commit()
        except sqlite3.Error as exc:
            raise StoreError(f"cannot record results for change {change_id}: {exc}") from exc

    def changes(self) -> list[ChangeRecord]:
        rows = self._db.execute(
            "SELECT change_id, change_name, action, change_value, status, created_at"
            " FROM changes ORDER BY change_id"
        ).fetchall()
        return [ChangeRecord(*row) for row in rows]

    def results(self, change_id: int | None = None) -> list[ResultRecord]:
        if change_id is None:
            rows = self._db.execute(
                "SELECT result_id, change_id, result_name, result_summary"
                " FROM results ORDER BY result_id"
            ).fetchall()
        else:
            rows = self._db.execute(
                "SELECT result_id, change_id, result_name, result_summary"
                " FROM results WHERE change_id = ? ORDER BY result_id",
                (change_id,),
            ).fetchall()
        return [ResultRecord(*row) for row in rows]

    def orphan_results(self) -> list[ResultRecord]:
        """Results whose change row is missing; always empty for a healthy store."""
        rows = self._db.execute(
            "SELECT r.result_id, r.change_id, r.result_name, r.result_summary"
            " FROM results r LEFT JOIN changes c ON r.change_id = c.change_id"
            " WHERE c.change_id IS NULL ORDER BY r.result_id"
        ).fetchall()
        return [ResultRecord(*row) for row in rows]


def open_store(path: str) -> ResultsStore:
    store = ResultsStore(path)
    # A non-database file fails lazily on first real query; force it now.
    try:
        store._db.execute("SELECT count(*) FROM changes").fetchone()
    except sqlite3.Error as exc:
        store.close()
        raise StoreError(f"{path} is not a results store: {exc}") from exc
    return store


_QUOTE_TRIGGERS = set(',"[]\r\n')


def _csv_cell(text: str) -> str:
    if any(ch in _QUOTE_TRIGGERS for ch in text):
        return '"' + text.replace('"', '""') + '"'
    return text


def export_csv(store: ResultsStore) -> str:
    """Flat campaign view; see the module docstring for the shape."""
    result_names: list[str] = []
    by_change: dict[int, dict[str, str]] = {}
    for record in store.results():
        if record.result_name not in result_names:
            result_names.append(record.result_name)
        cells = by_change.setdefault(record.change_id, {})
        # First occurrence of a name within one change wins.
        cells.setdefault(record.result_name, record.result_summary)

    lines = [",".join(["changeName", "changeResult"] + [_csv_cell(n) for n in result_names])]
    for change in store.changes():
        cells = by_change.get(change.change_id, {})
        row = [change.change_name, change.change_value]
        row.extend(cells.get(name, "") for name in result_names)
        lines.append(",".join(_csv_cell(cell) for cell in row))
    return "\r\n".join(lines) + "\r\n"
