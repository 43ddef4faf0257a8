"""
Utility modules for the voxel scene completion pipeline.
"""

from .errors import (
    SSCError,
    InvalidInputError,
    DatasetIOError,
    MissingDependencyError,
    ShapeMismatchError,
    NumericFailureError,
)
from .logging_setup import configure_logging, get_logger

__all__ = [
    'SSCError',
    'InvalidInputError',
    'DatasetIOError',
    'MissingDependencyError',
    'ShapeMismatchError',
    'NumericFailureError',
    'configure_logging',
    'get_logger',
]
