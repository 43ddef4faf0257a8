"""
Run registry verification script.

Checks the registry tables against the expected schema, then summarizes
what has been recorded: runs per stage and status, and the latest
evaluation per range.

Exit code 1 when a table is missing or the registry cannot be read.
"""

import sys
from pathlib import Path

# Add the current directory to Python path
sys.path.insert(0, str(Path(__file__).parent))

from sqlalchemy import inspect
from app.database.config import engine, DATABASE_PATH
from app.database.schema import EXPECTED_TABLES, SchemaVerifier
from app.services.registry_service import RegistryService


def print_tables(verifier: SchemaVerifier) -> bool:
    """Columns and row count per registry table; False when one is missing."""
    inspector = inspect(engine)
    existing = set(verifier.table_names())
    print(f"Registry: {DATABASE_PATH}")
    ok = True
    for table_name in EXPECTED_TABLES:
        if table_name not in existing:
            print(f"  [MISSING] {table_name}")
            ok = False
            continue
        columns = ", ".join(col['name'] for col in inspector.get_columns(table_name))
        print(f"  {table_name:<14} {verifier.get_table_row_count(table_name):>8} rows  ({columns})")
    return ok


def print_summary(registry: RegistryService):
    runs = registry.runs_frame()
    if runs.empty:
        print("\nNo training runs recorded.")
    else:
        print("\nTraining runs:")
        counts = runs.groupby(['stage', 'status']).size()
        for (stage, status), count in counts.items():
            print(f"  stage {stage} {status:<9} {count}")

    evaluations = registry.evaluation_frame()
    if evaluations.empty:
        print("\nNo evaluations recorded.")
        return
    latest = evaluations[evaluations['created_at'] == evaluations['created_at'].max()]
    print(f"\nLatest evaluation ({latest['label'].iloc[0] or 'unlabelled'}, "
          f"{latest['query_mode'].iloc[0]}):")
    for _, row in latest.iterrows():
        print(f"  {row['range_m']:>6g} m  IoU {row['IoU']:6.2f}  mIoU {row['mIoU']:6.2f}")


if __name__ == "__main__":
    try:
        if not print_tables(SchemaVerifier(engine, DATABASE_PATH)):
            print("\n[ERROR] Registry schema incomplete; run init_db.py")
            sys.exit(1)
        print_summary(RegistryService())
    except Exception as e:
        print(f"\n[ERROR] Error during verification: {str(e)}")
        sys.exit(1)
