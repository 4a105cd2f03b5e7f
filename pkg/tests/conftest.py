"""Shared table builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from imprec.tabular import ColumnKind, ColumnSchema, Table, TableSchema


def table_from_rows(specs: list[ColumnSchema], rows: list[tuple]) -> Table:
    """Build a table from row tuples; None marks a masked cell."""
    schema = TableSchema(tuple(specs))
    n = len(rows)
    columns = []
    masks = []
    for c, spec in enumerate(specs):
        mask = np.array([rows[r][c] is None for r in range(n)], dtype=bool)
        if spec.kind.is_numeric:
            values = np.array(
                [np.nan if rows[r][c] is None else float(rows[r][c]) for r in range(n)]
            )
        else:
            values = np.array(
                ["" if rows[r][c] is None else str(rows[r][c]) for r in range(n)],
                dtype=object,
            )
        columns.append(values)
        masks.append(mask)
    return Table(schema, columns, masks)


def random_table(
    rng: np.random.Generator,
    n_rows: int,
    n_numeric: int = 2,
    n_categorical: int = 2,
    missing_frac: float = 0.0,
    guarantee_complete_row: bool = True,
) -> Table:
    """Random mixed-type table, optionally with random masks."""
    specs = []
    columns = []
    masks = []
    for j in range(n_numeric):
        specs.append(ColumnSchema(f"num{j}", ColumnKind.NUMERIC))
        columns.append(rng.normal(0, 3, n_rows))
    for j in range(n_categorical):
        vocab = tuple(f"v{j}_{i}" for i in range(rng.integers(2, 5)))
        specs.append(ColumnSchema(f"cat{j}", ColumnKind.CATEGORICAL, vocabulary=vocab))
        columns.append(np.array([vocab[i] for i in rng.integers(0, len(vocab), n_rows)], dtype=object))
    for _ in specs:
        mask = rng.random(n_rows) < missing_frac
        masks.append(mask)
    if guarantee_complete_row and n_rows:
        for mask in masks:
            mask[0] = False
    return Table(TableSchema(tuple(specs)), columns, masks)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
