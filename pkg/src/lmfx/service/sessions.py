"""In-memory session registry.

A session is one fitted :class:`~lmfx.pipeline.Analysis` plus bookkeeping.
Sessions are immutable once stored; the store serializes mutation (create,
delete) behind a lock while reads share the fitted artifacts freely. Deleted
ids are remembered so teardown stays idempotent while never-issued ids still
404.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone

from ..errors import LmfxError
from ..pipeline import Analysis


class CapacityError(LmfxError):
    """The store is at its configured session limit."""

    exit_code = 2


@dataclass(frozen=True)
class Session:
    id: str
    analysis: Analysis
    created_at: datetime

    def created_at_iso(self) -> str:
        return self.created_at.isoformat()


class SessionStore:
    def __init__(self, max_sessions: int = 16):
        self.max_sessions = max_sessions
        self._lock = threading.Lock()
        self._sessions: dict[str, Session] = {}
        self._deleted: set[str] = set()

    def reserve(self) -> None:
        """Fail fast before paying for a fit the store could not keep."""
        with self._lock:
            if len(self._sessions) >= self.max_sessions:
                raise CapacityError(
                    f"session limit reached ({self.max_sessions}); "
                    "delete a session first"
                )

    def add(self, analysis: Analysis) -> Session:
        session = Session(
            id=uuid.uuid4().hex[:12],
            analysis=analysis,
            created_at=datetime.now(timezone.utc),
        )
        with self._lock:
            if len(self._sessions) >= self.max_sessions:
                raise CapacityError(
                    f"session limit reached ({self.max_sessions}); "
                    "delete a session first"
                )
            self._sessions[session.id] = session
        return session

    def get(self, session_id: str) -> Session | None:
        with self._lock:
            return self._sessions.get(session_id)

    def delete(self, session_id: str) -> bool:
        """True if the id is (or was) a real session; False if never issued."""
        with self._lock:
            if session_id in self._sessions:
                del self._sessions[session_id]
                self._deleted.add(session_id)
                return True
            return session_id in self._deleted

    def list(self) -> list[Session]:
        with self._lock:
            return sorted(self._sessions.values(), key=lambda s: s.created_at)
