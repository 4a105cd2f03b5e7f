"""Controlled MCAR injection with a ground-truth ledger.

Injection removes exactly ``floor(p * n_rows)`` cells per targeted column,
sampled without replacement on an independent per-column sub-stream of the
package PRNG, so the result is deterministic in (table, p, seed, columns)
and order-independent across columns. The ledger keeps every removed value
so imputation quality is scorable and the original table is recoverable
bit-exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AlreadyMissingError,
    BadFractionError,
    CellNotMaskedError,
    CellStillMissingError,
    DataError,
)
from .rng import STREAM_INJECT, make_rng
from .tabular import CellRef, ColumnKind, Table


@dataclass(frozen=True)
class MaskLedger:
    """Injected cells with their held-out true values.

    ``entries`` are (cell, true value) pairs ordered by column then row;
    ``p``/``seed``/``columns`` echo the injection parameters.
    """

    entries: tuple[tuple[CellRef, object], ...]
    p: float
    seed: int
    columns: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.entries)


def default_injection_columns(t: Table) -> tuple[str, ...]:
    """All non-identifier columns (imputing an identifier is semantically void)."""
    return tuple(c.name for c in t.schema if c.kind is not ColumnKind.IDENTIFIER)


def inject_mcar(
    t: Table,
    p: float,
    seed: int,
    columns: tuple[str, ...] | list[str] | None = None,
) -> tuple[Table, MaskLedger]:
    """Mask exactly floor(p * n_rows) cells per targeted column.

    Column choices are independent (per-column sub-seed keyed by the
    column's index in the schema); untouched cells come out byte-identical.
    """
    if not 0.0 <= p <= 1.0:
        raise BadFractionError(f"p={p} outside [0, 1]")
    targets = tuple(columns) if columns is not None else default_injection_columns(t)
    for name in targets:
        if t.column_mask(name).any():
            raise AlreadyMissingError(f"column {name!r} already has masked cells")

    n_pick = math.floor(p * t.n_rows)
    out = t
    entries: list[tuple[CellRef, object]] = []
    for name in targets:
        c = t.schema.index(name)
        if n_pick == 0:
            continue
        rng = make_rng(seed, STREAM_INJECT, c)
        rows = np.sort(rng.choice(t.n_rows, size=n_pick, replace=False))
        values = out.column_values(c).copy()
        mask = out.column_mask(c).copy()
        for r in rows:
            entries.append((CellRef(int(r), c), _python_value(t, int(r), c)))
        mask[rows] = True
        out = out.replace_column(c, values, mask)
    return out, MaskLedger(tuple(entries), p, seed, targets)


def _python_value(t: Table, row: int, col: int):
    v = t.value_at(row, col)
    return float(v) if t.schema[col].kind.is_numeric else str(v)


def restore(t: Table, ledger: MaskLedger) -> Table:
    """Put every ledger value back, clearing its mask; inverse of inject_mcar."""
    by_col: dict[int, list[tuple[int, object]]] = {}
    for cell, value in ledger.entries:
        if not t.is_masked(cell.row, cell.col):
            name = t.schema[cell.col].name
            raise CellNotMaskedError(f"cell ({cell.row}, {name!r}) is not masked")
        by_col.setdefault(cell.col, []).append((cell.row, value))
    out = t
    for c, items in by_col.items():
        values = out.column_values(c).copy()
        mask = out.column_mask(c).copy()
        for r, v in items:
            values[r] = v
            mask[r] = False
        out = out.replace_column(c, values, mask)
    return out


@dataclass(frozen=True)
class MaskedCellScore:
    """Intrinsic imputation quality over the ledger cells.

    Either field is None when the ledger has no entries of that type.
    """

    numeric_rmse: float | None
    categorical_accuracy: float | None
    n_numeric: int
    n_categorical: int


def masked_cell_score(imputed: Table, ledger: MaskLedger) -> MaskedCellScore:
    """RMSE over numeric ledger cells plus exact-match accuracy over discrete ones."""
    sq_errors: list[float] = []
    hits = 0
    n_cat = 0
    for cell, truth in ledger.entries:
        if imputed.is_masked(cell.row, cell.col):
            name = imputed.schema[cell.col].name
            raise CellStillMissingError(f"cell ({cell.row}, {name!r}) is still masked")
        got = imputed.value_at(cell.row, cell.col)
        if imputed.schema[cell.col].kind.is_numeric:
            sq_errors.append((float(got) - float(truth)) ** 2)
        else:
            n_cat += 1
            hits += int(str(got) == str(truth))
    rmse = math.sqrt(sum(sq_errors) / len(sq_errors)) if sq_errors else None
    acc = hits / n_cat if n_cat else None
    return MaskedCellScore(rmse, acc, len(sq_errors), n_cat)


# -- ledger file -----------------------------------------------------------------

def save_ledger(ledger: MaskLedger, table: Table, path: str) -> None:
    """One record per cell: row, column name, true value."""
    records = []
    for cell, value in ledger.entries:
        records.append(
            {"row": cell.row, "column": table.schema[cell.col].name, "value": value}
        )
    doc = {
        "p": ledger.p,
        "seed": ledger.seed,
        "columns": list(ledger.columns),
        "entries": records,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_ledger(path: str, table: Table) -> MaskLedger:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    entries = []
    for rec in doc["entries"]:
        c = table.schema.index(rec["column"])
        value = rec["value"]
        if table.schema[c].kind.is_numeric:
            value = float(value)
        entries.append((CellRef(int(rec["row"]), c), value))
    return MaskLedger(tuple(entries), doc["p"], doc["seed"], tuple(doc["columns"]))
