from __future__ import annotations

import math

import numpy as np
import pytest

from imprec.errors import (
    AlreadyMissingError,
    BadFractionError,
    CellNotMaskedError,
    CellStillMissingError,
)
from imprec.imputers import mean_impute
from imprec.missingness import inject_mcar, masked_cell_score, restore, save_ledger, load_ledger
from imprec.tabular import ColumnKind, ColumnSchema, Table, TableSchema

from conftest import random_table, table_from_rows


def test_exact_count_per_column(rng):
    t = random_table(rng, 400, n_numeric=2, n_categorical=1)
    injected, ledger = inject_mcar(t, 0.05, seed=9)
    for c in range(t.n_cols):
        assert injected.column_mask(c).sum() == math.floor(0.05 * 400)
    assert len(ledger) == t.n_cols * math.floor(0.05 * 400)


def test_identifiers_excluded_by_default():
    t = table_from_rows(
        [
            ColumnSchema("id", ColumnKind.IDENTIFIER),
            ColumnSchema("x", ColumnKind.NUMERIC),
        ],
        [(str(i), float(i)) for i in range(50)],
    )
    injected, ledger = inject_mcar(t, 0.2, seed=1)
    assert not injected.column_mask("id").any()
    assert injected.column_mask("x").sum() == 10
    assert ledger.columns == ("x",)


def test_explicit_columns_can_include_identifiers():
    t = table_from_rows(
        [
            ColumnSchema("id", ColumnKind.IDENTIFIER),
            ColumnSchema("x", ColumnKind.NUMERIC),
        ],
        [(str(i), float(i)) for i in range(50)],
    )
    injected, _ = inject_mcar(t, 0.1, seed=1, columns=("id",))
    assert injected.column_mask("id").sum() == 5
    assert not injected.column_mask("x").any()


def test_p_zero_is_identity(rng):
    t = random_table(rng, 30)
    injected, ledger = inject_mcar(t, 0.0, seed=4)
    assert injected == t
    assert len(ledger) == 0


def test_bad_fraction(rng):
    t = random_table(rng, 10)
    with pytest.raises(BadFractionError):
        inject_mcar(t, 1.5, seed=0)


def test_already_missing_rejected(rng):
    t = random_table(rng, 30, missing_frac=0.2, guarantee_complete_row=False)
    if not any(t.column_mask(c).any() for c in range(t.n_cols)):
        pytest.skip("rng produced no masks")
    with pytest.raises(AlreadyMissingError):
        inject_mcar(t, 0.1, seed=0)


def test_determinism_and_conservation(rng):
    t = random_table(rng, 200)
    a1, l1 = inject_mcar(t, 0.1, seed=42)
    a2, l2 = inject_mcar(t, 0.1, seed=42)
    assert a1 == a2 and l1 == l2
    b, _ = inject_mcar(t, 0.1, seed=43)
    assert b != a1
    # conservation: unmasked cells byte-identical
    for c in range(t.n_cols):
        keep = ~a1.column_mask(c)
        assert np.array_equal(a1.column_values(c)[keep], t.column_values(c)[keep])


def test_injection_independent_of_column_order(rng):
    t = random_table(rng, 100)
    a, la = inject_mcar(t, 0.1, seed=6, columns=("num0", "cat0"))
    b, lb = inject_mcar(t, 0.1, seed=6, columns=("cat0", "num0"))
    assert a == b
    assert set(la.entries) == set(lb.entries)


def test_restore_inverts_injection(rng):
    for seed in range(5):
        t = random_table(np.random.default_rng(seed), 80)
        injected, ledger = inject_mcar(t, 0.15, seed=seed)
        assert restore(injected, ledger) == t


def test_restore_empty_ledger_is_identity(rng):
    t = random_table(rng, 20)
    injected, ledger = inject_mcar(t, 0.0, seed=0)
    assert restore(injected, ledger) == t


def test_restore_unmasked_cell_raises(rng):
    t = random_table(rng, 20)
    injected, ledger = inject_mcar(t, 0.1, seed=0)
    filled = mean_impute(injected, injected)
    with pytest.raises(CellNotMaskedError):
        restore(filled, ledger)


def test_masked_cell_score_perfect(rng):
    t = random_table(rng, 60)
    injected, ledger = inject_mcar(t, 0.1, seed=5)
    score = masked_cell_score(restore(injected, ledger), ledger)
    assert score.numeric_rmse == 0.0
    assert score.categorical_accuracy == 1.0


def test_masked_cell_score_formula():
    t = table_from_rows(
        [ColumnSchema("x", ColumnKind.NUMERIC)],
        [(2.0,), (4.0,)],
    )
    injected, ledger = inject_mcar(t, 1.0, seed=0)
    values = np.array([1.0, 2.0])
    imputed = Table(t.schema, [values], [np.zeros(2, dtype=bool)])
    score = masked_cell_score(imputed, ledger)
    # rmse over truths [2, 4] vs fills [1, 2] = sqrt((1 + 4) / 2)
    assert score.numeric_rmse == pytest.approx(math.sqrt(2.5), abs=1e-12)
    assert score.numeric_rmse == pytest.approx(1.5811, abs=1e-4)
    assert score.categorical_accuracy is None


def test_masked_cell_score_categorical_only():
    t = table_from_rows(
        [ColumnSchema("g", ColumnKind.CATEGORICAL)],
        [("A",), ("B",)],
    )
    injected, ledger = inject_mcar(t, 0.5, seed=0)
    filled = mean_impute(t, injected)
    score = masked_cell_score(filled, ledger)
    assert score.numeric_rmse is None
    assert score.categorical_accuracy is not None


def test_masked_cell_score_requires_filled(rng):
    t = random_table(rng, 30)
    injected, ledger = inject_mcar(t, 0.1, seed=2)
    with pytest.raises(CellStillMissingError):
        masked_cell_score(injected, ledger)


def test_ledger_file_round_trip(tmp_path, rng):
    t = random_table(rng, 50)
    injected, ledger = inject_mcar(t, 0.1, seed=3)
    path = tmp_path / "ledger.json"
    save_ledger(ledger, injected, str(path))
    back = load_ledger(str(path), injected)
    assert back == ledger
    assert restore(injected, back) == t


def test_row_incomplete_fraction_matches_analytic():
    """Fraction of rows with >= 1 masked cell under independent per-column
    injection approaches 1 - (1-p)^c; Monte Carlo over seeds."""
    t = random_table(np.random.default_rng(0), 2000, n_numeric=2, n_categorical=1)
    p, n_cols = 0.05, 3
    expected = 1.0 - (1.0 - p) ** n_cols
    fractions = []
    for seed in range(40):
        injected, _ = inject_mcar(t, p, seed=seed)
        fractions.append(float(np.mean(~injected.complete_row_mask())))
    assert abs(np.mean(fractions) - expected) < 0.01
