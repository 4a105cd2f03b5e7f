"""Column-major typed tables with explicit per-cell missingness masks.

A :class:`Table` stores each column as a numpy array plus a boolean mask
array (``True`` = missing). Numeric columns are float64; identifier and
categorical columns hold strings in object arrays. Masked cells carry a
canonical payload (``nan`` / ``""``) so two tables with equal masks and
equal observed values compare equal, but the mask is the source of truth:
reading a masked cell through :meth:`Table.value_at` raises.

Tables are immutable after construction; every transformation returns a
new table.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    CellParseError,
    DataError,
    EmptyTableError,
    HeaderMismatchError,
    MalformedRowError,
    MaskedCellError,
)
from .rng import STREAM_SPLIT, make_rng

DEFAULT_MISSING_TOKENS = frozenset({"", "NA", "NaN"})


class ColumnKind(enum.Enum):
    IDENTIFIER = "identifier"
    CATEGORICAL = "categorical"
    NUMERIC = "numeric"

    @property
    def is_numeric(self) -> bool:
        return self is ColumnKind.NUMERIC

    @property
    def is_discrete(self) -> bool:
        """Identifier columns are high-cardinality categoricals for modeling."""
        return self is not ColumnKind.NUMERIC


@dataclass(frozen=True)
class ColumnSchema:
    """One column: name, kind, and an optional domain.

    ``bounds`` is an inclusive (lo, hi) range for numeric columns;
    ``vocabulary`` an optional enumerated vocabulary for discrete ones.
    """

    name: str
    kind: ColumnKind
    bounds: tuple[float, float] | None = None
    vocabulary: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if not self.name:
            raise DataError("column name must be non-empty")
        if self.bounds is not None:
            if self.kind is not ColumnKind.NUMERIC:
                raise DataError(f"column {self.name!r}: only numeric columns take a range")
            lo, hi = self.bounds
            if not lo <= hi:
                raise DataError(f"column {self.name!r}: range lo {lo} > hi {hi}")
        if self.vocabulary is not None and self.kind is ColumnKind.NUMERIC:
            raise DataError(f"column {self.name!r}: numeric columns take no vocabulary")

    def clamp(self, value: float) -> float:
        """Clamp a numeric value into the declared range (identity if unbounded)."""
        if self.bounds is None:
            return value
        lo, hi = self.bounds
        return min(max(value, lo), hi)

    def in_domain(self, value: float) -> bool:
        if self.bounds is None:
            return True
        lo, hi = self.bounds
        return lo <= value <= hi


@dataclass(frozen=True)
class TableSchema:
    columns: tuple[ColumnSchema, ...]

    def __post_init__(self) -> None:
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise DataError("duplicate column names in schema")

    def __len__(self) -> int:
        return len(self.columns)

    def __iter__(self):
        return iter(self.columns)

    def __getitem__(self, i: int) -> ColumnSchema:
        return self.columns[i]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DataError(f"no column named {name!r}") from None

    def column(self, name: str) -> ColumnSchema:
        return self.columns[self.index(name)]

    def with_vocabulary(self, name: str, vocabulary: Sequence[str]) -> "TableSchema":
        cols = list(self.columns)
        i = self.index(name)
        old = cols[i]
        cols[i] = ColumnSchema(old.name, old.kind, old.bounds, tuple(vocabulary))
        return TableSchema(tuple(cols))


@dataclass(frozen=True)
class CellRef:
    row: int
    col: int


@dataclass(frozen=True)
class SplitSpec:
    """Fractions for the train/test/valid split plus the shuffle seed."""

    train_frac: float = 0.6
    test_frac: float = 0.2
    valid_frac: float = 0.2
    seed: int = 0

    def __post_init__(self) -> None:
        total = self.train_frac + self.test_frac + self.valid_frac
        if not math.isclose(total, 1.0, abs_tol=1e-9):
            raise DataError(f"split fractions sum to {total}, expected 1")
        if min(self.train_frac, self.test_frac, self.valid_frac) < 0:
            raise DataError("split fractions must be non-negative")


class Table:
    """Immutable column-major table with a per-cell missingness mask."""

    def __init__(
        self,
        schema: TableSchema,
        columns: Sequence[np.ndarray],
        mask: Sequence[np.ndarray],
    ) -> None:
        if len(columns) != len(schema) or len(mask) != len(schema):
            raise DataError("column/mask count does not match schema")
        n_rows = len(columns[0]) if columns else 0
        cols: list[np.ndarray] = []
        masks: list[np.ndarray] = []
        for spec, values, m in zip(schema, columns, mask):
            m = np.asarray(m, dtype=bool).copy()
            if len(values) != n_rows or len(m) != n_rows:
                raise DataError(f"column {spec.name!r}: length mismatch")
            if spec.kind.is_numeric:
                v = np.asarray(values, dtype=np.float64).copy()
                v[m] = np.nan
                observed = v[~m]
                if observed.size and not np.all(np.isfinite(observed)):
                    raise DataError(f"column {spec.name!r}: non-finite observed value")
                if spec.bounds is not None and observed.size:
                    lo, hi = spec.bounds
                    if observed.min() < lo or observed.max() > hi:
                        raise DataError(
                            f"column {spec.name!r}: value outside declared range [{lo}, {hi}]"
                        )
            else:
                v = np.asarray(values, dtype=object).copy()
                v[m] = ""
            cols.append(v)
            masks.append(m)
            v.setflags(write=False)
            m.setflags(write=False)
        self._schema = schema
        self._columns = tuple(cols)
        self._mask = tuple(masks)
        self._n_rows = n_rows

    # -- basic accessors ------------------------------------------------------

    @property
    def schema(self) -> TableSchema:
        return self._schema

    @property
    def n_rows(self) -> int:
        return self._n_rows

    @property
    def n_cols(self) -> int:
        return len(self._schema)

    def column_values(self, col: int | str) -> np.ndarray:
        """Raw value array (read-only); masked cells hold the canonical payload."""
        return self._columns[self._col_index(col)]

    def column_mask(self, col: int | str) -> np.ndarray:
        return self._mask[self._col_index(col)]

    def value_at(self, row: int, col: int | str):
        c = self._col_index(col)
        if self._mask[c][row]:
            name = self._schema[c].name
            raise MaskedCellError(f"cell ({row}, {name!r}) is masked")
        return self._columns[c][row]

    def is_masked(self, row: int, col: int | str) -> bool:
        return bool(self._mask[self._col_index(col)][row])

    def _col_index(self, col: int | str) -> int:
        return self._schema.index(col) if isinstance(col, str) else col

    # -- row-level views --------------------------------------------------------

    def row_missing_counts(self) -> np.ndarray:
        """Number of masked cells per row."""
        if self.n_cols == 0:
            return np.zeros(self._n_rows, dtype=np.int64)
        return np.sum(np.stack(self._mask), axis=0)

    def complete_row_mask(self) -> np.ndarray:
        return self.row_missing_counts() == 0

    def observed_values(self, col: int | str) -> np.ndarray:
        c = self._col_index(col)
        return self._columns[c][~self._mask[c]]

    def observed_vocabulary(self, col: int | str) -> tuple[str, ...]:
        """Distinct observed values of a discrete column, first-occurrence order."""
        c = self._col_index(col)
        if self._schema[c].kind.is_numeric:
            raise DataError(f"column {self._schema[c].name!r} is numeric")
        seen: dict[str, None] = {}
        for v in self.observed_values(c):
            seen.setdefault(v, None)
        return tuple(seen)

    # -- construction helpers ----------------------------------------------------

    def take_rows(self, rows: Sequence[int] | np.ndarray) -> "Table":
        rows = np.asarray(rows, dtype=np.int64)
        return Table(
            self._schema,
            [c[rows] for c in self._columns],
            [m[rows] for m in self._mask],
        )

    def replace_column(self, col: int | str, values: np.ndarray, mask: np.ndarray) -> "Table":
        c = self._col_index(col)
        cols = list(self._columns)
        masks = list(self._mask)
        cols[c] = values
        masks[c] = mask
        return Table(self._schema, cols, masks)

    def with_schema(self, schema: TableSchema) -> "Table":
        return Table(schema, list(self._columns), list(self._mask))

    def select_columns(self, names: Sequence[str]) -> "Table":
        """Project onto ``names``, keeping schema order."""
        keep = [c for c, spec in enumerate(self._schema) if spec.name in set(names)]
        missing = set(names) - {self._schema[c].name for c in keep}
        if missing:
            raise DataError(f"no such columns: {sorted(missing)}")
        return Table(
            TableSchema(tuple(self._schema[c] for c in keep)),
            [self._columns[c] for c in keep],
            [self._mask[c] for c in keep],
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Table):
            return NotImplemented
        if self._schema != other._schema or self._n_rows != other._n_rows:
            return False
        for spec, a, b, ma, mb in zip(
            self._schema, self._columns, other._columns, self._mask, other._mask
        ):
            if not np.array_equal(ma, mb):
                return False
            if spec.kind.is_numeric:
                if not np.array_equal(a, b, equal_nan=True):
                    return False
            elif not np.array_equal(a, b):
                return False
        return True

    def __repr__(self) -> str:
        return f"Table({self._n_rows} rows x {self.n_cols} cols)"


def concat_rows(parts: Sequence[Table]) -> Table:
    """Stack tables sharing one schema, preserving part order."""
    if not parts:
        raise EmptyTableError("nothing to concatenate")
    schema = parts[0].schema
    for p in parts[1:]:
        if p.schema != schema:
            raise DataError("cannot concatenate tables with different schemas")
    cols = [np.concatenate([p.column_values(i) for p in parts]) for i in range(len(schema))]
    masks = [np.concatenate([p.column_mask(i) for p in parts]) for i in range(len(schema))]
    return Table(schema, cols, masks)


# -- schema descriptor file -----------------------------------------------------

def load_schema(path: str) -> TableSchema:
    """Read a schema descriptor: a JSON list of column objects.

    Keys per column: ``name``, ``kind`` (identifier|categorical|numeric),
    optional ``range`` ([lo, hi]) and ``vocabulary`` (list of strings).
    """
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, list):
        raise DataError("schema descriptor must be a JSON list of column objects")
    columns = []
    for entry in raw:
        unknown = set(entry) - {"name", "kind", "range", "vocabulary"}
        if unknown:
            raise DataError(f"schema entry has unknown keys: {sorted(unknown)}")
        try:
            kind = ColumnKind(entry["kind"])
        except (KeyError, ValueError):
            raise DataError(f"schema entry {entry.get('name')!r}: bad kind") from None
        bounds = tuple(entry["range"]) if entry.get("range") is not None else None
        vocab = tuple(entry["vocabulary"]) if entry.get("vocabulary") is not None else None
        columns.append(ColumnSchema(entry["name"], kind, bounds, vocab))
    return TableSchema(tuple(columns))


def save_schema(schema: TableSchema, path: str) -> None:
    out = [
        {
            "name": c.name,
            "kind": c.kind.value,
            "range": list(c.bounds) if c.bounds is not None else None,
            "vocabulary": list(c.vocabulary) if c.vocabulary is not None else None,
        }
        for c in schema
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(out, fh, indent=2)
        fh.write("\n")


# -- CSV -------------------------------------------------------------------------

def load_csv(
    path: str,
    schema: TableSchema,
    missing_tokens: Iterable[str] | None = None,
) -> Table:
    """Load a simple-dialect CSV (comma-separated, header row, no quoting).

    Cells whose raw text is in ``missing_tokens`` become masked. Numeric
    cells must parse as decimal numbers and lie in the declared range.
    """
    tokens = frozenset(missing_tokens) if missing_tokens is not None else DEFAULT_MISSING_TOKENS
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise HeaderMismatchError(f"{path}: empty file, expected a header row")
    header = lines[0].split(",")
    if tuple(header) != schema.names:
        raise HeaderMismatchError(
            f"{path}: header {header} does not match schema columns {list(schema.names)}"
        )
    n_cols = len(schema)
    raw_cols: list[list] = [[] for _ in range(n_cols)]
    mask_cols: list[list[bool]] = [[] for _ in range(n_cols)]
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != n_cols:
            raise MalformedRowError(
                f"{path}:{lineno}: expected {n_cols} fields, got {len(fields)}"
            )
        for c, (spec, text) in enumerate(zip(schema, fields)):
            if text in tokens:
                raw_cols[c].append(np.nan if spec.kind.is_numeric else "")
                mask_cols[c].append(True)
                continue
            mask_cols[c].append(False)
            if spec.kind.is_numeric:
                try:
                    value = float(text)
                except ValueError:
                    raise CellParseError(
                        f"{path}:{lineno}: column {spec.name!r}: cannot parse {text!r} as a number"
                    ) from None
                if not math.isfinite(value) or not spec.in_domain(value):
                    raise CellParseError(
                        f"{path}:{lineno}: column {spec.name!r}: value {text!r} outside domain"
                    )
                raw_cols[c].append(value)
            else:
                raw_cols[c].append(text)
    columns = [
        np.asarray(vals, dtype=np.float64 if spec.kind.is_numeric else object)
        for spec, vals in zip(schema, raw_cols)
    ]
    masks = [np.asarray(m, dtype=bool) for m in mask_cols]
    return Table(schema, columns, masks)


def render_cell(spec: ColumnSchema, value) -> str:
    """Exact-round-trip text for one observed cell."""
    if spec.kind.is_numeric:
        return repr(float(value))
    return str(value)


def write_csv(table: Table, path: str) -> None:
    """Write the simple CSV dialect; masked cells become the empty token.

    Discrete values may not contain commas or newlines (the dialect has no
    quoting), and numeric cells are rendered with ``repr`` so a reload
    reproduces float64 payloads bit-exactly.
    """
    lines = [",".join(table.schema.names)]
    for r in range(table.n_rows):
        fields = []
        for c, spec in enumerate(table.schema):
            if table.is_masked(r, c):
                fields.append("")
                continue
            text = render_cell(spec, table.column_values(c)[r])
            if "," in text or "\n" in text:
                raise DataError(
                    f"column {spec.name!r}: value {text!r} needs quoting, unsupported dialect"
                )
            fields.append(text)
        lines.append(",".join(fields))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


# -- splits ------------------------------------------------------------------------

def split_complete_incomplete(t: Table) -> tuple[Table, Table]:
    """Partition rows into (no masked cells, at least one masked cell)."""
    complete = t.complete_row_mask()
    idx = np.arange(t.n_rows)
    return t.take_rows(idx[complete]), t.take_rows(idx[~complete])


def split_train_test_valid(t: Table, spec: SplitSpec) -> tuple[Table, Table, Table]:
    """Seeded shuffle, then floor-sized test/valid parts with train taking the rest.

    The shuffled order is cut as [train | test | valid]; the same spec
    always reproduces the same partition.
    """
    n = t.n_rows
    if n < 3:
        raise EmptyTableError(f"need at least 3 rows to split, got {n}")
    rng = make_rng(spec.seed, STREAM_SPLIT)
    perm = rng.permutation(n)
    n_test = math.floor(spec.test_frac * n)
    n_valid = math.floor(spec.valid_frac * n)
    n_train = n - n_test - n_valid
    train = t.take_rows(perm[:n_train])
    test = t.take_rows(perm[n_train : n_train + n_test])
    valid = t.take_rows(perm[n_train + n_test :])
    return train, test, valid
