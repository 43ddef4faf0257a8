"""
Schema verification utilities for the run registry.
"""

from pathlib import Path
from typing import Dict, List

from sqlalchemy import inspect, text
from sqlalchemy.engine import Engine

from app.utils.logging_setup import get_logger

logger = get_logger("db")

EXPECTED_TABLES = ['datasets', 'training_runs', 'loss_records', 'evaluations']


class SchemaVerifier:
    """Verify registry schema and provide diagnostic information."""

    def __init__(self, engine: Engine, database_path: Path):
        self.engine = engine
        self.database_path = database_path

    def table_names(self) -> List[str]:
        # fresh inspector: table creation invalidates cached reflection
        return inspect(self.engine).get_table_names()

    def get_database_info(self) -> Dict:
        info = {
            'path': str(self.database_path),
            'exists': self.database_path.exists(),
            'size_kb': 0,
            'tables': []
        }
        if info['exists']:
            info['size_kb'] = self.database_path.stat().st_size / 1024
        try:
            info['tables'] = self.table_names()
        except Exception as e:
            logger.warning(f"cannot list registry tables in {self.database_path}: {e}")
        return info

    def get_table_columns(self, table_name: str) -> List[str]:
        inspector = inspect(self.engine)
        if table_name not in inspector.get_table_names():
            return []
        return [col['name'] for col in inspector.get_columns(table_name)]

    def get_table_row_count(self, table_name: str) -> int:
        try:
            with self.engine.connect() as conn:
                return conn.execute(text(f"SELECT COUNT(*) FROM {table_name}")).scalar()
        except Exception as e:
            logger.debug(f"row count of {table_name} unavailable: {e}")
            return -1

    def get_all_table_row_counts(self) -> Dict[str, int]:
        return {name: self.get_table_row_count(name) for name in self.table_names()}

    def verify_schema(self, expected_tables: List[str]) -> Dict:
        """
        Verify database schema against expected tables.

        Args:
            expected_tables: List of expected table names

        Returns:
            Dictionary with verification results
        """
        actual = set(self.table_names())
        expected = set(expected_tables)
        missing = expected - actual
        return {
            'valid': not missing,
            'missing_tables': sorted(missing),
            'extra_tables': sorted(actual - expected),
            'expected_count': len(expected),
            'actual_count': len(actual)
        }
