# engine.py
from __future__ import annotations

import os
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional

from sqlalchemy import create_engine
from sqlalchemy.engine import Engine
from sqlalchemy.orm import Session, sessionmaker

from .models import Base

_ENGINE: Optional[Engine] = None
_SessionLocal: Optional[sessionmaker] = None


def get_database_url() -> str:
    url = os.getenv("DATABASE_URL")
    if url:
        return url
    db_path = Path.cwd() / ".local" / "stemsim.db"
    db_path.parent.mkdir(parents=True, exist_ok=True)
    return f"sqlite:///{db_path}"


def engine() -> Engine:
    global _ENGINE, _SessionLocal
    if _ENGINE is None:
        url = get_database_url()
        connect_args = {"check_same_thread": False} if url.startswith("sqlite") else {}
        _ENGINE = create_engine(url, future=True, echo=False, connect_args=connect_args)
        Base.metadata.create_all(bind=_ENGINE)
        _SessionLocal = sessionmaker(
            bind=_ENGINE,
            autoflush=False,
            autocommit=False,
            future=True,
            expire_on_commit=False,
        )
    return _ENGINE


def reset_engine() -> None:
    """Drop the cached engine so the next session re-reads DATABASE_URL."""
    global _ENGINE, _SessionLocal
    if _ENGINE is not None:
        _ENGINE.dispose()
    _ENGINE = None
    _SessionLocal = None


@contextmanager
def db_session() -> Iterator[Session]:
    engine()
    session: Session = _SessionLocal()
    try:
        yield session
        session.commit()
    except Exception:
        session.rollback()
        raise
    finally:
        session.close()
