"""
Run-registry storage: SQLite engine, sessions and schema checks.
"""

from .config import DATABASE_PATH, DATABASE_URL, Base, SessionLocal, engine, init_db
from .manager import DatabaseManager, get_database_manager
from .schema import EXPECTED_TABLES, SchemaVerifier

__all__ = ['DATABASE_PATH', 'DATABASE_URL', 'Base', 'SessionLocal', 'engine', 'init_db',
           'DatabaseManager', 'get_database_manager', 'EXPECTED_TABLES', 'SchemaVerifier']
