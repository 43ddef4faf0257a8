"""
Run-registry database configuration.

Database path resolution priority:
1. SSC_DB_PATH environment variable
2. <package root>/ssc_registry.db
3. /tmp/ssc_registry.db (fallback for read-only checkouts)

The registry only records bookkeeping (datasets, runs, losses, evaluation
summaries); checkpoints and reports on disk stay the source of truth.
"""

import os
from pathlib import Path
from typing import Optional

from sqlalchemy import create_engine, event
from sqlalchemy.orm import declarative_base, sessionmaker

from app.utils.logging_setup import get_logger

logger = get_logger("db")

_DATABASE_PATH: Optional[Path] = None


def get_database_path() -> Path:
    """
    Resolve the registry database path once per process.

    Returns:
        Path: Absolute path to the SQLite file
    """
    global _DATABASE_PATH
    if _DATABASE_PATH is not None:
        return _DATABASE_PATH

    env_path = os.getenv('SSC_DB_PATH')
    if env_path:
        _DATABASE_PATH = Path(env_path).resolve()
        logger.info(f"Using database path from SSC_DB_PATH: {_DATABASE_PATH}")
        return _DATABASE_PATH

    package_root = Path(__file__).parent.parent.parent
    db_path = (package_root / "ssc_registry.db").resolve()
    if os.access(db_path.parent, os.W_OK):
        _DATABASE_PATH = db_path
        logger.info(f"Using database path (package root): {db_path}")
        return db_path

    _DATABASE_PATH = Path("/tmp/ssc_registry.db")
    logger.info(f"Using database path (fallback): {_DATABASE_PATH}")
    return _DATABASE_PATH


DATABASE_PATH = get_database_path()

try:
    DATABASE_PATH.parent.mkdir(parents=True, exist_ok=True)
except OSError as e:
    logger.error(f"Cannot create registry directory {DATABASE_PATH.parent}: {e}")
    raise

DATABASE_URL = f"sqlite:///{DATABASE_PATH.absolute()}"

engine = create_engine(
    DATABASE_URL,
    echo=False,
    pool_pre_ping=True,
    connect_args={
        "check_same_thread": False,  # evaluation workers share the engine
        "timeout": 20,
    }
)


@event.listens_for(engine, "connect")
def set_sqlite_pragma(dbapi_conn, connection_record):
    cursor = dbapi_conn.cursor()
    cursor.execute("PRAGMA foreign_keys=ON")
    cursor.execute("PRAGMA journal_mode=WAL")
    cursor.execute("PRAGMA synchronous=NORMAL")
    cursor.close()


SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)

Base = declarative_base()


def init_db() -> bool:
    """
    Create all registry tables and verify the schema.

    Returns:
        bool: True if successful, False otherwise
    """
    from app.database.manager import DatabaseManager

    return DatabaseManager().initialize(verify_schema=True)
