from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imprec.errors import (
    CellParseError,
    DataError,
    EmptyTableError,
    HeaderMismatchError,
    MalformedRowError,
    MaskedCellError,
)
from imprec.tabular import (
    ColumnKind,
    ColumnSchema,
    SplitSpec,
    Table,
    TableSchema,
    concat_rows,
    load_csv,
    load_schema,
    save_schema,
    split_complete_incomplete,
    split_train_test_valid,
    write_csv,
)

from conftest import random_table, table_from_rows

UR_SCHEMA = TableSchema(
    (
        ColumnSchema("u", ColumnKind.IDENTIFIER),
        ColumnSchema("r", ColumnKind.NUMERIC),
    )
)


def test_load_csv_complete(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("u,r\n1,4.0\n")
    t = load_csv(str(path), UR_SCHEMA)
    assert t.n_rows == 1
    assert not t.column_mask("u").any() and not t.column_mask("r").any()
    assert t.value_at(0, "u") == "1"
    assert t.value_at(0, "r") == 4.0


def test_load_csv_missing_cell(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("u,r\n1,\n")
    t = load_csv(str(path), UR_SCHEMA)
    assert t.is_masked(0, "r")
    with pytest.raises(MaskedCellError):
        t.value_at(0, "r")


def test_load_csv_malformed_row(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("u,r\n1,4.0,9\n")
    with pytest.raises(MalformedRowError):
        load_csv(str(path), UR_SCHEMA)


def test_load_csv_header_mismatch(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("r,u\n4.0,1\n")
    with pytest.raises(HeaderMismatchError):
        load_csv(str(path), UR_SCHEMA)


def test_load_csv_bad_number(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("u,r\n1,abc\n")
    with pytest.raises(CellParseError):
        load_csv(str(path), UR_SCHEMA)


def test_load_csv_custom_missing_tokens(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("u,r\n?,4.0\n")
    t = load_csv(str(path), UR_SCHEMA, missing_tokens={"?"})
    assert t.is_masked(0, "u")


def test_numeric_domain_enforced(tmp_path):
    schema = TableSchema((ColumnSchema("r", ColumnKind.NUMERIC, bounds=(0.0, 5.0)),))
    path = tmp_path / "t.csv"
    path.write_text("r\n6.5\n")
    with pytest.raises(CellParseError):
        load_csv(str(path), schema)


def test_csv_round_trip_exact(tmp_path, rng):
    t = random_table(rng, 60, missing_frac=0.25)
    path = tmp_path / "rt.csv"
    write_csv(t, str(path))
    back = load_csv(str(path), t.schema)
    assert back == t


def test_schema_descriptor_round_trip(tmp_path):
    schema = TableSchema(
        (
            ColumnSchema("UserId", ColumnKind.IDENTIFIER),
            ColumnSchema("Genre", ColumnKind.CATEGORICAL, vocabulary=("A", "B")),
            ColumnSchema("Rating", ColumnKind.NUMERIC, bounds=(0.0, 5.0)),
        )
    )
    path = tmp_path / "schema.json"
    save_schema(schema, str(path))
    assert load_schema(str(path)) == schema


def test_schema_rejects_duplicate_names():
    with pytest.raises(DataError):
        TableSchema((ColumnSchema("a", ColumnKind.NUMERIC), ColumnSchema("a", ColumnKind.NUMERIC)))


def test_split_spec_fractions_must_sum_to_one():
    with pytest.raises(DataError):
        SplitSpec(0.5, 0.2, 0.2, seed=1)


def test_split_complete_incomplete_counts(rng):
    t = random_table(rng, 10, missing_frac=0.0)
    # mask one cell in rows 1..3
    masks = [t.column_mask(c).copy() for c in range(t.n_cols)]
    for r in (1, 2, 3):
        masks[0][r] = True
    t = Table(t.schema, [t.column_values(c) for c in range(t.n_cols)], masks)
    complete, incomplete = split_complete_incomplete(t)
    assert (complete.n_rows, incomplete.n_rows) == (7, 3)
    assert complete.n_rows + incomplete.n_rows == t.n_rows


def test_split_complete_identity_cases(rng):
    t = random_table(rng, 8, missing_frac=0.0)
    complete, incomplete = split_complete_incomplete(t)
    assert complete == t and incomplete.n_rows == 0

    all_masked = Table(
        t.schema,
        [t.column_values(c) for c in range(t.n_cols)],
        [np.ones(t.n_rows, dtype=bool) for _ in range(t.n_cols)],
    )
    complete, incomplete = split_complete_incomplete(all_masked)
    assert complete.n_rows == 0 and incomplete == all_masked


def test_split_preserves_row_multiset(rng):
    t = random_table(rng, 50, missing_frac=0.3)
    complete, incomplete = split_complete_incomplete(t)
    merged = concat_rows([complete, incomplete])
    original_rows = sorted(
        tuple(str(t.column_values(c)[r]) for c in range(t.n_cols)) for r in range(t.n_rows)
    )
    merged_rows = sorted(
        tuple(str(merged.column_values(c)[r]) for c in range(merged.n_cols))
        for r in range(merged.n_rows)
    )
    assert original_rows == merged_rows


@pytest.mark.parametrize(
    "n,sizes",
    [(100, (60, 20, 20)), (10, (6, 2, 2)), (101, (61, 20, 20))],
)
def test_split_train_test_valid_sizes(rng, n, sizes):
    t = random_table(rng, n)
    train, test, valid = split_train_test_valid(t, SplitSpec(seed=7))
    assert (train.n_rows, test.n_rows, valid.n_rows) == sizes


def test_split_train_test_valid_deterministic(rng):
    t = random_table(rng, 40)
    a = split_train_test_valid(t, SplitSpec(seed=11))
    b = split_train_test_valid(t, SplitSpec(seed=11))
    assert all(x == y for x, y in zip(a, b))
    c = split_train_test_valid(t, SplitSpec(seed=12))
    assert any(x != y for x, y in zip(a, c))


def test_split_train_test_valid_partitions(rng):
    t = random_table(rng, 23)
    train, test, valid = split_train_test_valid(t, SplitSpec(seed=3))
    assert train.n_rows + test.n_rows + valid.n_rows == t.n_rows


def test_split_too_small(rng):
    t = random_table(rng, 2)
    with pytest.raises(EmptyTableError):
        split_train_test_valid(t, SplitSpec(seed=0))


def test_mask_and_length_invariants(rng):
    t = random_table(rng, 17, missing_frac=0.4)
    for c in range(t.n_cols):
        assert len(t.column_values(c)) == len(t.column_mask(c)) == t.n_rows


@settings(max_examples=30)
@given(n_rows=st.integers(1, 40), frac=st.floats(0, 0.9), seed=st.integers(0, 10_000))
def test_csv_round_trip_property(tmp_path_factory, n_rows, frac, seed):
    rng = np.random.default_rng(seed)
    t = random_table(rng, n_rows, missing_frac=frac, guarantee_complete_row=False)
    path = tmp_path_factory.mktemp("csv") / "t.csv"
    write_csv(t, str(path))
    assert load_csv(str(path), t.schema) == t


def test_table_rejects_length_mismatch():
    schema = TableSchema((ColumnSchema("a", ColumnKind.NUMERIC),))
    with pytest.raises(DataError):
        Table(schema, [np.array([1.0, 2.0])], [np.array([False])])


def test_masked_numeric_payload_is_canonical():
    t = table_from_rows(
        [ColumnSchema("x", ColumnKind.NUMERIC)],
        [(1.0,), (None,), (3.0,)],
    )
    assert np.isnan(t.column_values("x")[1])
    assert t.row_missing_counts().tolist() == [0, 1, 0]
