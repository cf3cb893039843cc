"""HTTP service wrapping the engine: sessions, live effect queries."""

from .app import create_app
from .schemas import SCHEMA_VERSION
from .sessions import Session, SessionStore

__all__ = ["SCHEMA_VERSION", "Session", "SessionStore", "create_app"]
