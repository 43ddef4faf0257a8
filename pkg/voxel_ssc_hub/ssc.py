"""
Command-line entry point: ``python ssc.py <command> ...``.
"""

import sys
from pathlib import Path

# Add the current directory to Python path
sys.path.insert(0, str(Path(__file__).parent))

from app.cli import main

if __name__ == "__main__":
    sys.exit(main())
