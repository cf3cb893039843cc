"""Exception hierarchy shared across the engine.

Every error class maps to one CLI exit code and one HTTP status so the
service and the command line report failures consistently.
"""

from __future__ import annotations


class LmfxError(Exception):
    """Base class for all engine errors."""

    exit_code = 1


class SpecError(LmfxError):
    """Invalid model specification or query configuration."""

    exit_code = 2


class DataError(LmfxError):
    """Malformed input data: parse failures, NaN/Inf, unknown columns."""

    exit_code = 3


class RankError(LmfxError):
    """Design matrix is rank deficient; carries the offending column label."""

    exit_code = 4

    def __init__(
        self,
        message: str,
        column_label: str | None = None,
        term_index: int | None = None,
    ):
        super().__init__(message)
        self.column_label = column_label
        self.term_index = term_index


class VerifyError(LmfxError):
    """Fast path disagreed with the reference path in --verify mode."""

    exit_code = 5


class StaleMatrixError(LmfxError):
    """A model matrix was built from an older version of the dataset."""

    exit_code = 3


class GroupKeyError(LmfxError):
    """A query grouped by a column that was not a compression key."""

    exit_code = 2
