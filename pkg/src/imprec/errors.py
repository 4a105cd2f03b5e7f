"""Exception types raised across the package."""

from __future__ import annotations


class ImprecError(Exception):
    """Base class for all package errors."""


class DataError(ImprecError):
    """A table or file violates a data contract."""


# -- CSV / table construction ------------------------------------------------

class MalformedRowError(DataError):
    """A CSV row has the wrong number of fields."""


class HeaderMismatchError(DataError):
    """The CSV header does not match the schema column names in order."""


class CellParseError(DataError):
    """A raw cell could not be parsed as its declared type or is out of domain."""


class MaskedCellError(DataError):
    """A masked cell was read as if it held a value."""


class EmptyTableError(DataError):
    """The operation needs more rows than the table has."""


# -- missingness --------------------------------------------------------------

class AlreadyMissingError(DataError):
    """Injection targeted a column that already has masked cells."""


class BadFractionError(ImprecError):
    """A fraction parameter lies outside [0, 1]."""


class CellNotMaskedError(DataError):
    """A ledger entry points at a cell that is not masked."""


class CellStillMissingError(DataError):
    """A ledger entry points at a cell that is still masked after imputation."""


# -- imputers ------------------------------------------------------------------

class EmptyColumnError(DataError):
    """A fit column has no observed values to compute statistics from."""


class EmptyFitTableError(DataError):
    """The fit table has no rows."""


class SingularSystemError(ImprecError):
    """The ridge system is singular; raise the ridge parameter."""


# -- generative imputation ------------------------------------------------------

class NoMissingTargetError(DataError):
    """Prompt serialization was asked for a row with no missing target."""


class IncompleteInputError(DataError):
    """An operation requiring a complete table received masked cells."""


class NotFittedError(ImprecError):
    """A backend or imputer was used before fit."""


class BackendUnavailableError(ImprecError):
    """The remote generative backend stayed unreachable after retries."""


class ProtocolError(ImprecError):
    """The remote backend sent a malformed or failure response."""


# -- recommender ----------------------------------------------------------------

class MissingLabelError(DataError):
    """The training table lacks the label column the task needs."""


class MaskedInputError(DataError):
    """Model input rows contain masked cells."""


class SchemaMismatchError(DataError):
    """Prediction rows do not match the schema the model was trained on."""


class InsufficientCandidatesError(DataError):
    """The candidate pool is too small for the requested negative sample."""


# -- metrics ---------------------------------------------------------------------

class NoRelevantItemsError(DataError):
    """Ranking evaluation received an empty relevant set."""


class LengthMismatchError(DataError):
    """Paired sequences differ in length."""


# -- harness ---------------------------------------------------------------------

class ConfigError(ImprecError):
    """The experiment config is invalid (unknown key, unknown imputer, ...)."""


class MixedTasksError(ImprecError):
    """A report was requested over results from different tasks."""
