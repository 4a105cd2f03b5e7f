"""Baseline imputation strategies behind one fit/impute interface.

Every imputer fits on a complete reference table and fills masked cells of
any target table without touching observed cells. Case-wise deletion is
the one exception to the "output has zero masked cells" contract: it is a
row filter.

All strategies here are deterministic; tie rules are spelled out where a
choice had to be made:

* mode (mean/kNN categorical fill): highest count, ties broken by first
  occurrence in fit-row order;
* kNN neighbours: k smallest distances, ties by fit-row index;
* iterative categorical predictions: argmax over one-vs-rest scores, ties
  by vocabulary index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    EmptyColumnError,
    EmptyFitTableError,
    SingularSystemError,
)
from .tabular import ColumnKind, ColumnSchema, Table, TableSchema

UNK_TOKEN = "UNK"


class Imputer:
    """fit(complete) prepares state; impute(t) fills every masked cell."""

    name = "base"

    def fit(self, complete: Table) -> "Imputer":
        return self

    def impute(self, t: Table) -> Table:
        raise NotImplementedError


# -- case-wise deletion ------------------------------------------------------------


def casewise_delete(t: Table) -> Table:
    """Keep only the rows with zero masked cells, order preserved."""
    idx = np.arange(t.n_rows)[t.complete_row_mask()]
    return t.take_rows(idx)


class CaseWiseDeletion(Imputer):
    name = "deletion"

    def impute(self, t: Table) -> Table:
        return casewise_delete(t)


# -- zero --------------------------------------------------------------------------


def zero_impute(t: Table) -> Table:
    """Masked numerics become 0 (clamped into the column range); masked
    discrete cells become the reserved UNK token, added to the vocabulary."""
    out = t
    schema = t.schema
    for c, spec in enumerate(t.schema):
        mask = t.column_mask(c)
        if not mask.any():
            continue
        values = out.column_values(c).copy()
        if spec.kind.is_numeric:
            values[mask] = spec.clamp(0.0)
        else:
            values[mask] = UNK_TOKEN
            if spec.vocabulary is not None and UNK_TOKEN not in spec.vocabulary:
                schema = schema.with_vocabulary(spec.name, spec.vocabulary + (UNK_TOKEN,))
        out = out.replace_column(c, values, np.zeros(t.n_rows, dtype=bool))
    if schema is not t.schema:
        out = out.with_schema(schema)
    return out


class ZeroImputer(Imputer):
    name = "zero"

    def impute(self, t: Table) -> Table:
        return zero_impute(t)


# -- mean / mode -------------------------------------------------------------------


def _column_mode(values: np.ndarray) -> str:
    """Most frequent value; ties go to the first occurrence."""
    counts: dict[str, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    best, best_n = None, -1
    for v, n in counts.items():  # insertion order = first occurrence order
        if n > best_n:
            best, best_n = v, n
    return best


class MeanImputer(Imputer):
    """Column mean for numerics, column mode for discrete columns."""

    name = "mean"

    def __init__(self) -> None:
        self.fill_: dict[str, object] | None = None

    def fit(self, complete: Table) -> "MeanImputer":
        fill: dict[str, object] = {}
        for c, spec in enumerate(complete.schema):
            observed = complete.observed_values(c)
            if observed.size == 0:
                raise EmptyColumnError(f"column {spec.name!r} has no observed values")
            if spec.kind.is_numeric:
                fill[spec.name] = float(np.mean(observed))
            else:
                fill[spec.name] = _column_mode(observed)
        self.fill_ = fill
        return self

    def impute(self, t: Table) -> Table:
        if self.fill_ is None:
            raise DataError("MeanImputer.impute called before fit")
        out = t
        for c, spec in enumerate(t.schema):
            mask = t.column_mask(c)
            if not mask.any():
                continue
            values = out.column_values(c).copy()
            values[mask] = self.fill_[spec.name]
            out = out.replace_column(c, values, np.zeros(t.n_rows, dtype=bool))
        return out


def mean_impute(fit: Table, t: Table) -> Table:
    return MeanImputer().fit(fit).impute(t)


# -- kNN ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KnnConfig:
    k: int = 5
    standardize: bool = True

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ConfigError("k must be >= 1")


class KnnImputer(Imputer):
    """Distance over a query row's observed features only: standardized
    squared difference for numerics plus 0/1 mismatch for discrete columns,
    averaged over the features used. Neighbour values are averaged
    (numeric) or voted (discrete, ties by earliest contributing fit row).
    """

    name = "knn"

    def __init__(self, cfg: KnnConfig | None = None) -> None:
        self.cfg = cfg or KnnConfig()
        self.fit_table_: Table | None = None
        self.scale_: dict[int, float] = {}

    def fit(self, complete: Table) -> "KnnImputer":
        if complete.n_rows == 0:
            raise EmptyFitTableError("kNN needs at least one fit row")
        self.fit_table_ = complete
        self.scale_ = {}
        for c, spec in enumerate(complete.schema):
            if spec.kind.is_numeric:
                std = float(np.std(complete.observed_values(c))) if self.cfg.standardize else 1.0
                self.scale_[c] = std if std > 0 else 1.0
        return self

    def impute(self, t: Table) -> Table:
        if self.fit_table_ is None:
            raise DataError("KnnImputer.impute called before fit")
        fit = self.fit_table_
        n_fit = fit.n_rows
        k = min(self.cfg.k, n_fit)
        incomplete = np.arange(t.n_rows)[~t.complete_row_mask()]
        new_values = {c: t.column_values(c).copy() for c in range(t.n_cols)}
        for r in incomplete:
            dist = np.zeros(n_fit)
            used = 0
            for c, spec in enumerate(t.schema):
                if t.is_masked(r, c):
                    continue
                used += 1
                q = t.column_values(c)[r]
                fit_col = fit.column_values(c)
                if spec.kind.is_numeric:
                    dist += ((float(q) - fit_col.astype(np.float64)) / self.scale_[c]) ** 2
                else:
                    dist += (fit_col != q).astype(np.float64)
            if used:
                dist /= used
            # aggregate in fit-row order so the k >= n case degrades to the
            # column mean bit-exactly
            neighbours = np.sort(np.argsort(dist, kind="stable")[:k])
            for c, spec in enumerate(t.schema):
                if not t.is_masked(r, c):
                    continue
                neigh_vals = fit.column_values(c)[neighbours]
                if spec.kind.is_numeric:
                    new_values[c][r] = float(np.mean(neigh_vals.astype(np.float64)))
                else:
                    new_values[c][r] = _neighbour_mode(neigh_vals, neighbours)
        return Table(
            t.schema,
            [new_values[c] for c in range(t.n_cols)],
            [np.zeros(t.n_rows, dtype=bool) for _ in range(t.n_cols)],
        )


def _neighbour_mode(values: np.ndarray, fit_indices: np.ndarray) -> str:
    """Most frequent neighbour value; ties to the smallest fit-row index."""
    counts: dict[str, int] = {}
    earliest: dict[str, int] = {}
    for v, i in zip(values, fit_indices):
        counts[v] = counts.get(v, 0) + 1
        earliest[v] = min(earliest.get(v, int(i)), int(i))
    best, best_key = None, None
    for v in counts:
        key = (counts[v], -earliest[v])
        if best_key is None or key > best_key:
            best, best_key = v, key
    return best


def knn_impute(fit: Table, t: Table, cfg: KnnConfig | None = None) -> Table:
    return KnnImputer(cfg).fit(fit).impute(t)


# -- iterative (round-robin ridge) ---------------------------------------------------


@dataclass(frozen=True)
class IterativeConfig:
    max_iters: int = 10
    tol: float = 1e-3
    ridge: float = 1e-3

    def __post_init__(self) -> None:
        if self.tol <= 0:
            raise ConfigError("tol must be positive")
        if self.ridge < 0:
            raise ConfigError("ridge must be non-negative")
        if self.max_iters < 0:
            raise ConfigError("max_iters must be non-negative")


@dataclass(frozen=True)
class IterativeReport:
    iterations: int
    converged: bool
    used_mean_fallback: bool


class IterativeImputer(Imputer):
    """Round-robin ridge regression of each incomplete column on the rest.

    Masked cells start at the fit mean/mode; each round re-estimates every
    incomplete column (fewest masked cells first) from all other columns,
    one-hot encoding discrete predictors, via ridge normal equations fitted
    on the fit rows plus the currently-imputed rows. Numeric predictions
    are clamped to the column range; categorical ones take the argmax over
    one-vs-rest scores. Rounds stop early once no imputed numeric cell
    moves more than ``tol`` in standardized units. The last ``impute`` call
    leaves its round count and convergence flag in ``last_report_``.
    """

    name = "iterative"

    def __init__(self, cfg: IterativeConfig | None = None) -> None:
        self.cfg = cfg or IterativeConfig()
        self.fit_table_: Table | None = None
        self.mean_: MeanImputer | None = None
        self.stats_: dict[int, tuple[float, float]] = {}
        self.vocab_: dict[int, tuple[str, ...]] = {}
        self.last_report_: IterativeReport | None = None

    def fit(self, complete: Table) -> "IterativeImputer":
        if complete.n_rows == 0:
            raise EmptyFitTableError("iterative imputation needs a non-empty fit table")
        self.fit_table_ = complete
        self.mean_ = MeanImputer().fit(complete)
        self.stats_ = {}
        self.vocab_ = {}
        for c, spec in enumerate(complete.schema):
            if spec.kind.is_numeric:
                observed = complete.observed_values(c)
                std = float(np.std(observed))
                self.stats_[c] = (float(np.mean(observed)), std if std > 0 else 1.0)
            else:
                self.vocab_[c] = (
                    spec.vocabulary
                    if spec.vocabulary is not None
                    else complete.observed_vocabulary(c)
                )
        return self

    def impute(self, t: Table) -> Table:
        if self.fit_table_ is None or self.mean_ is None:
            raise DataError("IterativeImputer.impute called before fit")
        n_regular = sum(1 for s in t.schema if s.kind is not ColumnKind.IDENTIFIER)
        if n_regular < 2:
            self.last_report_ = IterativeReport(0, False, used_mean_fallback=True)
            return self.mean_.impute(t)

        target_cols = [c for c in range(t.n_cols) if t.column_mask(c).any()]
        if not target_cols:
            self.last_report_ = IterativeReport(0, True, used_mean_fallback=False)
            return t
        target_cols.sort(key=lambda c: (int(t.column_mask(c).sum()), c))

        fit = self.fit_table_
        filled = self.mean_.impute(t)
        work = {c: filled.column_values(c).copy() for c in range(t.n_cols)}
        entry_mask = {c: t.column_mask(c) for c in range(t.n_cols)}
        incomplete_rows = np.arange(t.n_rows)[~t.complete_row_mask()]

        iterations = 0
        converged = self.cfg.max_iters == 0
        for _ in range(self.cfg.max_iters):
            iterations += 1
            max_change = 0.0
            for c in target_cols:
                X_fit = self._encode_predictors(fit, c, from_fit=True)
                X_cur = self._encode_predictors_work(t.schema, work, incomplete_rows, c)
                X = np.vstack([X_fit, X_cur])
                rows_masked = np.arange(t.n_rows)[entry_mask[c]]
                X_query = self._encode_predictors_work(t.schema, work, rows_masked, c)
                spec = t.schema[c]
                if spec.kind.is_numeric:
                    y = np.concatenate(
                        [
                            fit.column_values(c).astype(np.float64),
                            work[c][incomplete_rows].astype(np.float64),
                        ]
                    )
                    pred = X_query @ self._solve(X, y[:, None])[:, 0]
                    pred = np.array([spec.clamp(v) for v in pred])
                    _, std = self.stats_[c]
                    old = work[c][rows_masked].astype(np.float64)
                    if rows_masked.size:
                        max_change = max(max_change, float(np.max(np.abs(pred - old))) / std)
                    work[c][rows_masked] = pred
                else:
                    vocab = self.vocab_[c]
                    index = {v: i for i, v in enumerate(vocab)}
                    current = np.concatenate([fit.column_values(c), work[c][incomplete_rows]])
                    Y = np.zeros((len(current), len(vocab)))
                    for i, v in enumerate(current):
                        j = index.get(v)
                        if j is not None:
                            Y[i, j] = 1.0
                    scores = X_query @ self._solve(X, Y)
                    picks = np.argmax(scores, axis=1)
                    work[c][rows_masked] = [vocab[j] for j in picks]
            if max_change < self.cfg.tol:
                converged = True
                break

        self.last_report_ = IterativeReport(iterations, converged, used_mean_fallback=False)
        return Table(
            t.schema,
            [work[c] for c in range(t.n_cols)],
            [np.zeros(t.n_rows, dtype=bool) for _ in range(t.n_cols)],
        )

    def _solve(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Ridge normal equations; the bias column is not penalized."""
        A = X.T @ X
        penalty = np.full(X.shape[1], self.cfg.ridge)
        penalty[-1] = 0.0  # bias
        A[np.diag_indices_from(A)] += penalty
        try:
            W = np.linalg.solve(A, X.T @ Y)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(
                "ridge system is singular; raise the ridge parameter"
            ) from exc
        if not np.all(np.isfinite(W)):
            raise SingularSystemError("ridge solve produced non-finite weights")
        return W

    def _encode_predictors(self, table: Table, skip_col: int, from_fit: bool) -> np.ndarray:
        rows = np.arange(table.n_rows)
        work = {c: table.column_values(c) for c in range(table.n_cols)}
        return self._encode_predictors_work(table.schema, work, rows, skip_col)

    def _encode_predictors_work(
        self,
        schema: TableSchema,
        work: dict[int, np.ndarray],
        rows: np.ndarray,
        skip_col: int,
    ) -> np.ndarray:
        """Design matrix over ``rows``: standardized numerics, one-hot
        discrete columns (unknown values encode as all-zero), bias last."""
        blocks: list[np.ndarray] = []
        for c in range(len(schema)):
            if c == skip_col:
                continue
            spec = schema[c]
            vals = work[c][rows] if len(rows) else work[c][:0]
            if spec.kind.is_numeric:
                mean, std = self.stats_[c]
                blocks.append(((vals.astype(np.float64) - mean) / std)[:, None])
            else:
                vocab = self.vocab_[c]
                index = {v: i for i, v in enumerate(vocab)}
                onehot = np.zeros((len(rows), len(vocab)))
                for i, v in enumerate(vals):
                    j = index.get(v)
                    if j is not None:
                        onehot[i, j] = 1.0
                blocks.append(onehot)
        blocks.append(np.ones((len(rows), 1)))
        return np.hstack(blocks) if blocks else np.ones((len(rows), 1))


def iterative_impute(
    fit: Table, t: Table, cfg: IterativeConfig | None = None
) -> tuple[Table, IterativeReport]:
    imp = IterativeImputer(cfg).fit(fit)
    out = imp.impute(t)
    return out, imp.last_report_


# -- registry -------------------------------------------------------------------------

IMPUTER_NAMES = ("deletion", "zero", "mean", "knn", "iterative", "llm")


def make_imputer(name: str, params: dict | None = None) -> Imputer:
    """Build a baseline imputer by its config name.

    The ``llm`` imputer needs a generative backend and is assembled by the
    harness; asking for it here is a config error.
    """
    params = dict(params or {})
    if name == "deletion":
        _reject_params(name, params)
        return CaseWiseDeletion()
    if name == "zero":
        _reject_params(name, params)
        return ZeroImputer()
    if name == "mean":
        _reject_params(name, params)
        return MeanImputer()
    if name == "knn":
        known = {"k", "standardize"}
        _reject_params(name, {k: v for k, v in params.items() if k not in known})
        return KnnImputer(KnnConfig(**params))
    if name == "iterative":
        known = {"max_iters", "tol", "ridge"}
        _reject_params(name, {k: v for k, v in params.items() if k not in known})
        return IterativeImputer(IterativeConfig(**params))
    if name == "llm":
        raise ConfigError("the llm imputer is wired up by the harness, not the registry")
    raise ConfigError(f"unknown imputer {name!r}; expected one of {IMPUTER_NAMES}")


def _reject_params(name: str, params: dict) -> None:
    if params:
        raise ConfigError(f"imputer {name!r} does not accept params {sorted(params)}")
