"""
Error types for the voxel scene completion pipeline.

Library code raises these; only the command-line surface turns them into
process exit codes.
"""

from typing import Optional


class SSCError(Exception):
    """Base class for all pipeline errors."""

    exit_code = 1


class InvalidInputError(SSCError, ValueError):
    """A precondition of an operation was violated."""

    exit_code = 1


class DatasetIOError(SSCError):
    """Reading or writing a dataset, checkpoint or report failed."""

    exit_code = 2


class MissingDependencyError(SSCError):
    """A required upstream artifact (e.g. the stage-1 checkpoint) is absent."""

    exit_code = 3


class ShapeMismatchError(SSCError):
    """A checkpoint tensor does not match the configured model."""

    exit_code = 4

    def __init__(self, tensor_name: str, expected, found: Optional[tuple] = None):
        self.tensor_name = tensor_name
        self.expected = expected
        self.found = found
        if found is None:
            message = f"tensor '{tensor_name}' missing from checkpoint (expected shape {expected})"
        else:
            message = f"tensor '{tensor_name}' has shape {found}, config expects {expected}"
        super().__init__(message)


class NumericFailureError(SSCError):
    """A loss or gradient became non-finite."""

    exit_code = 5
