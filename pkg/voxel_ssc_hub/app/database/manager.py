"""
Database manager for the run registry.

Handles table creation, verification and status reporting.
"""

from typing import Dict, List, Optional

from sqlalchemy.engine import Engine

from app.database.config import DATABASE_PATH, Base, engine as _engine
from app.database.schema import EXPECTED_TABLES, SchemaVerifier
from app.utils.logging_setup import get_logger

logger = get_logger("db")


class DatabaseManager:
    """Manages registry initialization and verification."""

    def __init__(self, engine: Optional[Engine] = None):
        """
        Args:
            engine: SQLAlchemy engine (uses default if not provided)
        """
        self.engine = engine or _engine
        self.database_path = DATABASE_PATH
        self.verifier = SchemaVerifier(self.engine, self.database_path)

    def ensure_database_exists(self) -> bool:
        try:
            self.database_path.parent.mkdir(parents=True, exist_ok=True)
            if not self.database_path.exists():
                self.database_path.touch()
            return True
        except OSError as e:
            logger.error(f"Failed to ensure database exists: {e}")
            return False

    def initialize_schema(self) -> bool:
        """Create every registry table that does not exist yet."""
        try:
            import app.models  # noqa: F401  registers the ORM classes on Base

            Base.metadata.create_all(bind=self.engine)
            logger.info("Schema initialized successfully")
            return True
        except Exception as e:
            logger.error(f"Failed to initialize schema: {e}", exc_info=True)
            return False

    def verify_schema(self, expected_tables: Optional[List[str]] = None) -> Dict:
        return self.verifier.verify_schema(expected_tables or EXPECTED_TABLES)

    def initialize(self, verify_schema: bool = True) -> bool:
        """
        Complete database initialization.

        Args:
            verify_schema: Whether to verify schema after initialization

        Returns:
            True if successful, False otherwise
        """
        if not self.ensure_database_exists():
            return False
        if not self.initialize_schema():
            return False
        if verify_schema:
            verification = self.verify_schema()
            if not verification['valid']:
                logger.warning(f"Schema verification failed: {verification}")
        logger.info(f"Database initialization complete: {self.database_path}")
        return True

    def get_status(self) -> Dict:
        return {
            'database': self.verifier.get_database_info(),
            'schema': self.verify_schema(),
            'row_counts': self.verifier.get_all_table_row_counts(),
            'path': str(self.database_path),
        }

    def print_status_report(self):
        status = self.get_status()
        print("=" * 80)
        print("RUN REGISTRY STATUS")
        print("=" * 80)
        print(f"\nDatabase Path: {status['path']}")
        print(f"Database Exists: {status['database']['exists']}")
        if status['database']['exists']:
            print(f"Database Size: {status['database']['size_kb']:.2f} KB")
        for table, count in sorted(status['row_counts'].items()):
            print(f"  {table}: {count} rows")
        print(f"\nSchema Valid: {status['schema']['valid']}")
        if not status['schema']['valid']:
            print(f"Missing Tables: {status['schema']['missing_tables']}")
        print("=" * 80)


_db_manager: Optional[DatabaseManager] = None


def get_database_manager() -> DatabaseManager:
    global _db_manager
    if _db_manager is None:
        _db_manager = DatabaseManager()
    return _db_manager
