"""
SQLite ledger of pipeline runs.

Each row ties one CLI invocation to the resolved config it ran with and the
sha256 of the artifact it wrote, so a replay can be checked against the
original without keeping the artifact itself.
"""

from __future__ import annotations

import logging
import sqlite3
import threading
import uuid
from contextlib import closing, contextmanager
from dataclasses import astuple, dataclass, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterator, Optional, Union

from errors import ConfigValidationError

logger = logging.getLogger(__name__)

MAX_HISTORY_ROWS = 1000
MAX_LISTED = 500

_SCHEMA = """
CREATE TABLE IF NOT EXISTS runs (
    id TEXT PRIMARY KEY,
    timestamp TEXT NOT NULL,
    command TEXT NOT NULL,
    config_text TEXT NOT NULL,
    artifact_path TEXT,
    artifact_sha256 TEXT,
    elapsed_ms REAL
)
"""


@dataclass
class RunRecord:
    id: str
    timestamp: str
    command: str
    config_text: str                 # PipelineConfig.to_text() of the resolved config
    artifact_path: Optional[str]
    artifact_sha256: Optional[str]
    elapsed_ms: Optional[float]

    @classmethod
    def new(
        cls,
        command: str,
        config_text: str,
        artifact_path: Optional[Union[str, Path]] = None,
        artifact_sha256: Optional[str] = None,
        elapsed_ms: Optional[float] = None,
    ) -> "RunRecord":
        return cls(
            id=uuid.uuid4().hex,
            timestamp=datetime.now(timezone.utc).isoformat(),
            command=command,
            config_text=config_text,
            artifact_path=str(artifact_path) if artifact_path is not None else None,
            artifact_sha256=artifact_sha256,
            elapsed_ms=elapsed_ms,
        )

    def summary_line(self) -> str:
        elapsed = "" if self.elapsed_ms is None else f"{self.elapsed_ms:.0f}ms"
        cells = (self.id, self.timestamp, self.command, self.artifact_path, self.artifact_sha256, elapsed)
        return "\t".join("" if cell is None else cell for cell in cells)

    def to_text(self) -> str:
        """Every column as `name<TAB>value`, then the config block verbatim."""
        out = [
            f"{f.name}\t{'' if getattr(self, f.name) is None else getattr(self, f.name)}"
            for f in fields(self) if f.name != "config_text"
        ]
        out.append("config")
        out.append(self.config_text.rstrip("\n"))
        return "\n".join(out) + "\n"


_COLUMNS = ", ".join(f.name for f in fields(RunRecord))


class RunHistory:
    def __init__(self, db_path: Union[str, Path], max_rows: int = MAX_HISTORY_ROWS):
        self.db_path = Path(db_path)
        self.db_path.parent.mkdir(parents=True, exist_ok=True)
        self.max_rows = max_rows
        self._lock = threading.Lock()
        with self._session() as conn:
            conn.execute(_SCHEMA)

    @contextmanager
    def _session(self) -> Iterator[sqlite3.Connection]:
        with self._lock, closing(self._connect()) as conn:
            with conn:
                yield conn

    def _connect(self) -> sqlite3.Connection:
        return sqlite3.connect(self.db_path)

    def save(self, record: RunRecord) -> None:
        """Append a record and prune the oldest rows beyond max_rows. Never raises."""
        try:
            with self._session() as conn:
                conn.execute(f"INSERT INTO runs ({_COLUMNS}) VALUES (?, ?, ?, ?, ?, ?, ?)", astuple(record))
                conn.execute(
                    "DELETE FROM runs WHERE rowid IN ("
                    " SELECT rowid FROM runs ORDER BY timestamp ASC, rowid ASC"
                    " LIMIT (SELECT MAX(0, COUNT(*) - ?) FROM runs))",
                    (self.max_rows,),
                )
        except sqlite3.Error as exc:
            logger.warning("Failed to save run record: %s", exc)

    def list(self, limit: int = 20, command: Optional[str] = None) -> list[RunRecord]:
        """Newest first, at most MAX_LISTED."""
        query = f"SELECT {_COLUMNS} FROM runs"
        params: tuple = ()
        if command:
            query += " WHERE command = ?"
            params = (command,)
        query += " ORDER BY timestamp DESC, rowid DESC LIMIT ?"
        try:
            with self._session() as conn:
                rows = conn.execute(query, params + (max(1, min(limit, MAX_LISTED)),)).fetchall()
        except sqlite3.Error as exc:
            logger.warning("Failed to list run history: %s", exc)
            return []
        return [RunRecord(*row) for row in rows]

    def get(self, id_prefix: str) -> Optional[RunRecord]:
        """The run whose id starts with id_prefix; an ambiguous prefix is a usage error."""
        if not id_prefix:
            raise ConfigValidationError("run id must not be empty")
        try:
            with self._session() as conn:
                rows = conn.execute(
                    f"SELECT {_COLUMNS} FROM runs WHERE substr(id, 1, ?) = ? LIMIT 2",
                    (len(id_prefix), id_prefix),
                ).fetchall()
        except sqlite3.Error as exc:
            logger.warning("Failed to read run history: %s", exc)
            return None
        if len(rows) > 1:
            raise ConfigValidationError(f"run id prefix {id_prefix!r} matches more than one run")
        return RunRecord(*rows[0]) if rows else None

    def clear(self, command: Optional[str] = None) -> int:
        """Delete all runs, or only those of one command; returns the count removed."""
        try:
            with self._session() as conn:
                if command:
                    cursor = conn.execute("DELETE FROM runs WHERE command = ?", (command,))
                else:
                    cursor = conn.execute("DELETE FROM runs")
                return cursor.rowcount
        except sqlite3.Error as exc:
            logger.warning("Failed to clear run history: %s", exc)
            return 0


class NullRunHistory:
    """Stand-in when no ledger is configured or the database cannot be opened."""

    def save(self, record: RunRecord) -> None:
        return None

    def list(self, limit: int = 20, command: Optional[str] = None) -> list[RunRecord]:
        return []

    def get(self, id_prefix: str) -> Optional[RunRecord]:
        return None

    def clear(self, command: Optional[str] = None) -> int:
        return 0


def open_history(db_path: Optional[Path]) -> Union[RunHistory, NullRunHistory]:
    if db_path is None:
        return NullRunHistory()
    try:
        return RunHistory(db_path)
    except (OSError, sqlite3.Error) as exc:
        logger.warning("Run history unavailable, running without it: %s", exc)
        return NullRunHistory()
