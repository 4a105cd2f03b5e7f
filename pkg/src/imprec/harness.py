"""Experiment orchestration: inject, impute, train, evaluate, report.

One run executes the full grid for a config: a single shared injection,
per-imputer fitting on the complete subset, whole-table imputation (so
row order and split indices stay comparable across imputers), the shared
60/20/20 split (or per-user holdout for the ranking task), recommender
training, and metric evaluation. Every stage persists its artifacts in the
run directory so stages can be re-run independently and results audited.

Determinism contract: identical config and seeds produce byte-identical
``results.json`` and reports. Wall-clock durations therefore live in a
separate ``timings.json``.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import metrics as metrics_mod
from .backends import LocalBackend, RemoteBackend
from .errors import ConfigError, DataError, MixedTasksError
from .genimpute import GenerativeImputer
from .imputers import IMPUTER_NAMES, Imputer, casewise_delete, make_imputer
from .missingness import (
    MaskLedger,
    inject_mcar,
    load_ledger,
    masked_cell_score,
    save_ledger,
)
from .recsys import (
    RankingProtocol,
    RecModel,
    RecModelConfig,
    Task,
    load_checkpoint,
    per_user_holdout,
    rank_topk,
    save_checkpoint,
    train,
)
from .rng import STREAM_RANK, make_rng
from .tabular import (
    SplitSpec,
    Table,
    TableSchema,
    concat_rows,
    load_csv,
    load_schema,
    split_complete_incomplete,
    split_train_test_valid,
    write_csv,
)

TASKS = ("single_classification", "multi_classification", "regression")
ENDPOINT_ENV_VAR = "IMPREC_LLM_ENDPOINT"

_TASK_TO_MODEL_TASK = {
    "single_classification": Task.BINARY_CLICK,
    "multi_classification": Task.TOPK_RANKING,
    "regression": Task.RATING_REGRESSION,
}


@dataclass(frozen=True)
class Seeds:
    injection: int = 0
    split: int = 0
    training: int = 0
    ranking: int = 0


@dataclass(frozen=True)
class ImputerSpec:
    name: str
    params: dict = field(default_factory=dict)


@dataclass
class ExperimentConfig:
    dataset: str
    schema: str
    task: str
    label_col: str
    imputers: list[ImputerSpec]
    user_col: str | None = None
    item_col: str | None = None
    item_feature_cols: list[str] | None = None
    timestamp_col: str | None = None
    drop_cols: tuple[str, ...] = ()
    inject_cols: tuple[str, ...] | None = None
    missing_p: float = 0.05
    rec: RecModelConfig = field(default_factory=RecModelConfig)
    ranking: RankingProtocol = field(default_factory=RankingProtocol)
    seeds: Seeds = field(default_factory=Seeds)
    out_dir: str | None = None
    llm_endpoint: str | None = None
    missing_tokens: tuple[str, ...] | None = None
    train_negatives_per_positive: int = 1

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}; expected one of {TASKS}")
        if not 0.0 <= self.missing_p <= 1.0:
            raise ConfigError(f"missing_p={self.missing_p} outside [0, 1]")
        if not self.imputers:
            raise ConfigError("config needs at least one imputer")
        for spec in self.imputers:
            if spec.name not in IMPUTER_NAMES:
                raise ConfigError(
                    f"unknown imputer {spec.name!r}; expected one of {IMPUTER_NAMES}"
                )
        names = [s.name for s in self.imputers]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate imputer entries")
        if self.task == "multi_classification":
            if not self.user_col or not self.item_col:
                raise ConfigError("multi_classification needs user_col and item_col")
        if self.timestamp_col and self.timestamp_col in self.drop_cols:
            raise ConfigError("timestamp_col cannot also be in drop_cols")


_TOP_KEYS = {
    "dataset", "schema", "task", "label_col", "imputers", "user_col", "item_col",
    "item_feature_cols", "timestamp_col", "drop_cols", "inject_cols", "missing_p",
    "rec", "ranking", "seeds", "out_dir", "llm_endpoint", "missing_tokens",
    "train_negatives_per_positive",
}
_REC_KEYS = {"embedding_dim", "hidden_layers", "learning_rate", "epochs", "batch_size"}
_RANKING_KEYS = {"n_negatives", "k_values", "holdout_frac"}
_SEED_KEYS = {"injection", "split", "training", "ranking"}


def load_config(path: str) -> ExperimentConfig:
    """Parse and validate the JSON experiment config; unknown keys are errors."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown config keys {sorted(unknown)}")
    for key in ("dataset", "schema", "task", "label_col", "imputers"):
        if key not in doc:
            raise ConfigError(f"{path}: missing required key {key!r}")

    imputers = []
    for entry in doc["imputers"]:
        if isinstance(entry, str):
            imputers.append(ImputerSpec(entry))
        elif isinstance(entry, dict):
            if "name" not in entry:
                raise ConfigError(f"{path}: imputer entry without a name: {entry}")
            params = {k: v for k, v in entry.items() if k != "name"}
            imputers.append(ImputerSpec(entry["name"], params))
        else:
            raise ConfigError(f"{path}: bad imputer entry {entry!r}")

    rec_doc = doc.get("rec", {})
    unknown = set(rec_doc) - _REC_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown rec keys {sorted(unknown)}")
    if "hidden_layers" in rec_doc:
        rec_doc = dict(rec_doc, hidden_layers=tuple(rec_doc["hidden_layers"]))

    ranking_doc = doc.get("ranking", {})
    unknown = set(ranking_doc) - _RANKING_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown ranking keys {sorted(unknown)}")
    if "k_values" in ranking_doc:
        ranking_doc = dict(ranking_doc, k_values=tuple(ranking_doc["k_values"]))

    seeds_doc = doc.get("seeds", {})
    unknown = set(seeds_doc) - _SEED_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown seeds keys {sorted(unknown)}")

    return ExperimentConfig(
        dataset=doc["dataset"],
        schema=doc["schema"],
        task=doc["task"],
        label_col=doc["label_col"],
        imputers=imputers,
        user_col=doc.get("user_col"),
        item_col=doc.get("item_col"),
        item_feature_cols=doc.get("item_feature_cols"),
        timestamp_col=doc.get("timestamp_col"),
        drop_cols=tuple(doc.get("drop_cols", ())),
        inject_cols=tuple(doc["inject_cols"]) if doc.get("inject_cols") else None,
        missing_p=doc.get("missing_p", 0.05),
        rec=RecModelConfig(**rec_doc),
        ranking=RankingProtocol(**ranking_doc),
        seeds=Seeds(**seeds_doc),
        out_dir=doc.get("out_dir"),
        llm_endpoint=doc.get("llm_endpoint"),
        missing_tokens=tuple(doc["missing_tokens"]) if "missing_tokens" in doc else None,
        train_negatives_per_positive=doc.get("train_negatives_per_positive", 1),
    )


def override_seeds(cfg: ExperimentConfig, seed: int | None) -> ExperimentConfig:
    """Apply the CLI --seed flag: one seed drives all four stage streams."""
    if seed is None:
        return cfg
    cfg.seeds = Seeds(seed, seed, seed, seed)
    return cfg


@dataclass
class RunResult:
    imputer: str
    task: str
    metrics: dict[str, float]
    audit: dict
    seeds: dict[str, int]
    durations: dict[str, float] = field(default_factory=dict)

    def to_record(self) -> dict:
        """The deterministic part, as written to results.json."""
        return {
            "imputer": self.imputer,
            "task": self.task,
            "metrics": self.metrics,
            "audit": self.audit,
            "seeds": self.seeds,
        }


# -- stages --------------------------------------------------------------------------


def _load_dataset(cfg: ExperimentConfig) -> Table:
    schema = load_schema(cfg.schema)
    table = load_csv(cfg.dataset, schema, cfg.missing_tokens)
    if cfg.drop_cols:
        keep = [name for name in table.schema.names if name not in set(cfg.drop_cols)]
        table = table.select_columns(keep)
    return table


def stage_inject(cfg: ExperimentConfig, out_dir: str) -> tuple[Table, MaskLedger]:
    os.makedirs(out_dir, exist_ok=True)
    table = _load_dataset(cfg)
    injected, ledger = inject_mcar(table, cfg.missing_p, cfg.seeds.injection, cfg.inject_cols)
    write_csv(injected, os.path.join(out_dir, "injected.csv"))
    save_ledger(ledger, injected, os.path.join(out_dir, "ledger.json"))
    return injected, ledger


def _load_injected(cfg: ExperimentConfig, out_dir: str) -> tuple[Table, MaskLedger]:
    schema = load_schema(cfg.schema)
    if cfg.drop_cols:
        schema = TableSchema(tuple(c for c in schema if c.name not in set(cfg.drop_cols)))
    path = os.path.join(out_dir, "injected.csv")
    if not os.path.exists(path):
        raise DataError(f"{path} not found; run the inject stage first")
    injected = load_csv(path, schema, cfg.missing_tokens)
    ledger = load_ledger(os.path.join(out_dir, "ledger.json"), injected)
    return injected, ledger


def build_imputer(spec: ImputerSpec, cfg: ExperimentConfig) -> Imputer:
    if spec.name != "llm":
        return make_imputer(spec.name, spec.params)
    endpoint = cfg.llm_endpoint or os.environ.get(ENDPOINT_ENV_VAR)
    temperature = spec.params.get("temperature", 0.0)
    unknown = set(spec.params) - {"temperature", "epochs", "adapter_rank"}
    if unknown:
        raise ConfigError(f"imputer 'llm' does not accept params {sorted(unknown)}")
    if endpoint:
        backend = RemoteBackend(
            endpoint,
            epochs=spec.params.get("epochs", 3),
            adapter_rank=spec.params.get("adapter_rank", 8),
            seed=cfg.seeds.training,
        )
    else:
        backend = LocalBackend(seed=cfg.seeds.training)
    return GenerativeImputer(backend, temperature=temperature)


def stage_impute(
    cfg: ExperimentConfig,
    out_dir: str,
    injected: Table | None = None,
    ledger: MaskLedger | None = None,
) -> dict[str, tuple[Table, dict]]:
    """Fit every configured imputer on the complete subset and fill the
    whole injected table (deletion filters rows instead). Writes one
    imputed CSV per imputer plus audits.json."""
    if injected is None or ledger is None:
        injected, ledger = _load_injected(cfg, out_dir)
    complete, _ = split_complete_incomplete(injected)
    results: dict[str, tuple[Table, dict]] = {}
    durations: dict[str, float] = {}
    for spec in cfg.imputers:
        started = time.perf_counter()
        audit: dict = {}
        if spec.name == "deletion":
            imputed = casewise_delete(injected)
            audit = {
                "rows_kept": imputed.n_rows,
                "rows_dropped": injected.n_rows - imputed.n_rows,
            }
        else:
            imputer = build_imputer(spec, cfg)
            imputer.fit(complete)
            imputed = imputer.impute(injected)
            score = masked_cell_score(imputed, ledger)
            audit = {
                "masked_numeric_rmse": score.numeric_rmse,
                "masked_categorical_accuracy": score.categorical_accuracy,
                "n_numeric_cells": score.n_numeric,
                "n_categorical_cells": score.n_categorical,
            }
            if spec.name == "llm" and imputer.last_audit_ is not None:
                audit["n_prompts"] = imputer.last_audit_.n_prompts
                audit["n_parse_fallbacks"] = imputer.last_audit_.n_parse_fallbacks
            if spec.name == "iterative" and getattr(imputer, "last_report_", None):
                audit["iterations"] = imputer.last_report_.iterations
                audit["converged"] = imputer.last_report_.converged
        durations[spec.name] = time.perf_counter() - started
        write_csv(imputed, os.path.join(out_dir, f"imputed_{spec.name}.csv"))
        results[spec.name] = (imputed, audit)
    with open(os.path.join(out_dir, "audits.json"), "w", encoding="utf-8") as fh:
        json.dump(
            {name: audit for name, (_, audit) in results.items()},
            fh, indent=2, sort_keys=True,
        )
        fh.write("\n")
    with open(os.path.join(out_dir, "impute_timings.json"), "w", encoding="utf-8") as fh:
        json.dump(durations, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return results


def _load_imputed(cfg: ExperimentConfig, out_dir: str, name: str) -> Table:
    schema = load_schema(cfg.schema)
    if cfg.drop_cols:
        schema = TableSchema(tuple(c for c in schema if c.name not in set(cfg.drop_cols)))
    path = os.path.join(out_dir, f"imputed_{name}.csv")
    if not os.path.exists(path):
        raise DataError(f"{path} not found; run the impute stage first")
    return load_csv(path, schema, cfg.missing_tokens)


def _rec_config(cfg: ExperimentConfig) -> RecModelConfig:
    base = cfg.rec
    return RecModelConfig(
        embedding_dim=base.embedding_dim,
        hidden_layers=base.hidden_layers,
        learning_rate=base.learning_rate,
        epochs=base.epochs,
        batch_size=base.batch_size,
        seed=cfg.seeds.training,
        task=_TASK_TO_MODEL_TASK[cfg.task],
    )


class ItemCatalog:
    """Per-item feature profile from the first occurrence in the reference table."""

    def __init__(self, table: Table, item_col: str, feature_cols: list[str]) -> None:
        self.feature_cols = feature_cols
        self.profile: dict[str, dict[str, object]] = {}
        items = table.column_values(item_col)
        for r in range(table.n_rows):
            item = items[r]
            if item not in self.profile:
                self.profile[item] = {
                    name: table.column_values(name)[r] for name in feature_cols
                }

    def items(self) -> list[str]:
        return sorted(self.profile)

    def features_of(self, item: str) -> dict[str, object]:
        return self.profile[item]


def _item_feature_cols(cfg: ExperimentConfig, table: Table) -> list[str]:
    if cfg.item_feature_cols is not None:
        return list(cfg.item_feature_cols)
    reserved = {cfg.user_col, cfg.item_col, cfg.label_col, cfg.timestamp_col}
    return [name for name in table.schema.names if name not in reserved]


def _build_candidate_rows(
    base: Table,
    cfg: ExperimentConfig,
    user: str,
    items: list[str],
    catalog: ItemCatalog,
    user_profile: dict[str, object],
) -> Table:
    """Rows for scoring (user, item) pairs: item features from the catalog,
    user-side features from the user's first training row, dummy label."""
    n = len(items)
    columns = []
    masks = []
    item_cols = set(catalog.feature_cols)
    for c, spec in enumerate(base.schema):
        if spec.name == cfg.user_col:
            col = np.array([user] * n, dtype=object)
        elif spec.name == cfg.item_col:
            col = np.array(items, dtype=object)
        elif spec.name in item_cols:
            values = [catalog.features_of(i)[spec.name] for i in items]
            dtype = np.float64 if spec.kind.is_numeric else object
            col = np.array(values, dtype=dtype)
        elif spec.name == cfg.label_col:
            lo = spec.bounds[0] if spec.bounds else 0.0
            col = np.full(n, lo, dtype=np.float64)
        else:
            dtype = np.float64 if spec.kind.is_numeric else object
            col = np.array([user_profile[spec.name]] * n, dtype=dtype)
        columns.append(col)
        masks.append(np.zeros(n, dtype=bool))
    return Table(base.schema, columns, masks)


def _ranking_training_table(cfg: ExperimentConfig, interactions: Table) -> Table:
    """Observed interactions keep their strength label; sampled unseen
    (user, item) pairs are appended with label 0."""
    per_pos = cfg.train_negatives_per_positive
    if per_pos == 0:
        return interactions
    catalog = ItemCatalog(interactions, cfg.item_col, _item_feature_cols(cfg, interactions))
    all_items = catalog.items()
    users = interactions.column_values(cfg.user_col)
    items = interactions.column_values(cfg.item_col)
    seen: dict[str, set] = {}
    first_row: dict[str, int] = {}
    for r in range(interactions.n_rows):
        seen.setdefault(users[r], set()).add(items[r])
        first_row.setdefault(users[r], r)
    rng = make_rng(cfg.seeds.training, STREAM_RANK)
    neg_parts = []
    side_cols = [
        name
        for name in interactions.schema.names
        if name not in {cfg.user_col, cfg.item_col, cfg.label_col}
        and name not in set(catalog.feature_cols)
    ]
    for r in range(interactions.n_rows):
        user = users[r]
        pool = [i for i in all_items if i not in seen[user]]
        if not pool:
            continue
        take = min(per_pos, len(pool))
        picks = rng.choice(len(pool), size=take, replace=False)
        chosen = [pool[int(i)] for i in picks]
        profile = {
            name: interactions.column_values(name)[first_row[user]] for name in side_cols
        }
        neg_parts.append(
            _build_candidate_rows(interactions, cfg, user, chosen, catalog, profile)
        )
    if not neg_parts:
        return interactions
    return concat_rows([interactions, *neg_parts])


def stage_train(
    cfg: ExperimentConfig,
    out_dir: str,
    imputed: dict[str, tuple[Table, dict]] | None = None,
) -> dict[str, RecModel]:
    models: dict[str, RecModel] = {}
    rec_cfg = _rec_config(cfg)
    durations: dict[str, float] = {}
    for spec in cfg.imputers:
        table = (
            imputed[spec.name][0] if imputed is not None else _load_imputed(cfg, out_dir, spec.name)
        )
        started = time.perf_counter()
        if cfg.task == "multi_classification":
            keep, _ = per_user_holdout(
                table, cfg.user_col, cfg.ranking.holdout_frac, cfg.timestamp_col
            )
            train_table = _ranking_training_table(cfg, keep)
        else:
            split = SplitSpec(seed=cfg.seeds.split)
            train_table, _, _ = split_train_test_valid(table, split)
        model = train(train_table, rec_cfg, cfg.label_col)
        durations[spec.name] = time.perf_counter() - started
        save_checkpoint(model, os.path.join(out_dir, f"ckpt_{spec.name}.npz"))
        models[spec.name] = model
    with open(os.path.join(out_dir, "train_timings.json"), "w", encoding="utf-8") as fh:
        json.dump(durations, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return models


def _evaluate_classification(model: RecModel, test: Table, label_col: str) -> dict[str, float]:
    probs = model.predict(test)
    # imputed label cells may be soft; threshold truth and predictions alike
    truth = (test.column_values(label_col).astype(np.float64) >= 0.5).astype(np.float64)
    pred = (probs >= 0.5).astype(np.float64)
    tp = int(np.sum((pred == 1) & (truth == 1)))
    fp = int(np.sum((pred == 1) & (truth == 0)))
    tn = int(np.sum((pred == 0) & (truth == 0)))
    fn = int(np.sum((pred == 0) & (truth == 1)))
    confusion = metrics_mod.BinaryConfusion(tp=tp, fp=fp, tn=tn, fn=fn)
    precision, recall, f1 = metrics_mod.precision_recall_f1(confusion)
    neg = metrics_mod.BinaryConfusion(tp=tn, fp=fn, tn=tp, fn=fp)
    p0, r0, f0 = metrics_mod.precision_recall_f1(neg)
    return {
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "precision_class0": p0,
        "recall_class0": r0,
        "f1_class0": f0,
    }


def _evaluate_regression(model: RecModel, test: Table, label_col: str) -> dict[str, float]:
    pred = model.predict(test)
    truth = test.column_values(label_col).astype(np.float64)
    mae, mse, rmse = metrics_mod.regression_errors(list(pred), list(truth))
    return {"MAE": mae, "MSE": mse, "RMSE": rmse}


def _evaluate_ranking(
    model: RecModel, cfg: ExperimentConfig, table: Table
) -> dict[str, float]:
    keep, heldout = per_user_holdout(
        table, cfg.user_col, cfg.ranking.holdout_frac, cfg.timestamp_col
    )
    catalog = ItemCatalog(keep, cfg.item_col, _item_feature_cols(cfg, keep))
    all_items = catalog.items()
    users = keep.column_values(cfg.user_col)
    items = keep.column_values(cfg.item_col)
    seen: dict[str, set] = {}
    first_row: dict[str, int] = {}
    for r in range(keep.n_rows):
        seen.setdefault(users[r], set()).add(items[r])
        first_row.setdefault(users[r], r)
    side_cols = [
        name
        for name in keep.schema.names
        if name not in {cfg.user_col, cfg.item_col, cfg.label_col}
        and name not in set(catalog.feature_cols)
    ]
    k_values = sorted(cfg.ranking.k_values)
    recall_sums = {k: 0.0 for k in k_values}
    ndcg_sums = {k: 0.0 for k in k_values}
    n_points = 0
    hold_users = heldout.column_values(cfg.user_col)
    hold_items = heldout.column_values(cfg.item_col)
    user_index = {u: i for i, u in enumerate(sorted(set(users)))}
    for r in range(heldout.n_rows):
        user = hold_users[r]
        positive = hold_items[r]
        if user not in seen or positive not in catalog.profile:
            continue  # cold user or item unseen in training: not rankable
        candidates = [i for i in all_items if i not in seen[user]]
        profile = {
            name: keep.column_values(name)[first_row[user]] for name in side_cols
        }

        def scorer(item_list: list[str]) -> np.ndarray:
            rows = _build_candidate_rows(table, cfg, user, item_list, catalog, profile)
            return model.scores(rows)

        point_seed_stream = make_rng(cfg.seeds.ranking, STREAM_RANK, user_index[user], r)
        point_seed = int(point_seed_stream.integers(0, 2**62))
        ranked = rank_topk(scorer, [positive], candidates, cfg.ranking, point_seed)[0]
        n_points += 1
        for k in k_values:
            e = metrics_mod.RankedEval(tuple(ranked), frozenset({positive}), k)
            recall_sums[k] += metrics_mod.recall_at_k(e)
            ndcg_sums[k] += metrics_mod.ndcg_at_k(e)
    out: dict[str, float] = {}
    for k in k_values:
        out[f"R@{k}"] = recall_sums[k] / n_points if n_points else 0.0
    for k in k_values:
        out[f"N@{k}"] = ndcg_sums[k] / n_points if n_points else 0.0
    return out


def stage_evaluate(
    cfg: ExperimentConfig,
    out_dir: str,
    imputed: dict[str, tuple[Table, dict]] | None = None,
    models: dict[str, RecModel] | None = None,
) -> list[RunResult]:
    results: list[RunResult] = []
    audits: dict[str, dict] = {}
    if imputed is None:
        audits_path = os.path.join(out_dir, "audits.json")
        if os.path.exists(audits_path):
            with open(audits_path, encoding="utf-8") as fh:
                audits = json.load(fh)
    seeds = {
        "injection": cfg.seeds.injection,
        "split": cfg.seeds.split,
        "training": cfg.seeds.training,
        "ranking": cfg.seeds.ranking,
    }
    for spec in cfg.imputers:
        table = (
            imputed[spec.name][0] if imputed is not None else _load_imputed(cfg, out_dir, spec.name)
        )
        audit = imputed[spec.name][1] if imputed is not None else audits.get(spec.name, {})
        model = (
            models[spec.name]
            if models is not None
            else load_checkpoint(os.path.join(out_dir, f"ckpt_{spec.name}.npz"))
        )
        started = time.perf_counter()
        if cfg.task == "multi_classification":
            metric_values = _evaluate_ranking(model, cfg, table)
        else:
            split = SplitSpec(seed=cfg.seeds.split)
            _, test, _ = split_train_test_valid(table, split)
            if cfg.task == "single_classification":
                metric_values = _evaluate_classification(model, test, cfg.label_col)
            else:
                metric_values = _evaluate_regression(model, test, cfg.label_col)
        duration = time.perf_counter() - started
        results.append(
            RunResult(
                imputer=spec.name,
                task=cfg.task,
                metrics=metric_values,
                audit=audit,
                seeds=seeds,
                durations={"evaluate": duration},
            )
        )
    save_results(results, cfg.task, out_dir)
    return results


def save_results(results: list[RunResult], task: str, out_dir: str) -> None:
    doc = {"task": task, "results": [r.to_record() for r in results]}
    with open(os.path.join(out_dir, "results.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    timings = {"results": [{"imputer": r.imputer, "durations": r.durations} for r in results]}
    with open(os.path.join(out_dir, "timings.json"), "w", encoding="utf-8") as fh:
        json.dump(timings, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_results(out_dir: str) -> tuple[str, list[RunResult]]:
    path = os.path.join(out_dir, "results.json")
    if not os.path.exists(path):
        raise DataError(f"{path} not found; run the evaluate stage first")
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    results = [
        RunResult(
            imputer=rec["imputer"],
            task=rec["task"],
            metrics=rec["metrics"],
            audit=rec.get("audit", {}),
            seeds=rec.get("seeds", {}),
        )
        for rec in doc["results"]
    ]
    return doc["task"], results


def run_experiment(cfg: ExperimentConfig, out_dir: str) -> list[RunResult]:
    """The full grid: inject once, then impute/train/evaluate per imputer."""
    injected, ledger = stage_inject(cfg, out_dir)
    imputed = stage_impute(cfg, out_dir, injected, ledger)
    models = stage_train(cfg, out_dir, imputed)
    return stage_evaluate(cfg, out_dir, imputed, models)


# -- reports -------------------------------------------------------------------------

_LOWER_IS_BETTER = {"MAE", "MSE", "RMSE"}


def _metric_columns(task: str, results: list[RunResult]) -> list[str]:
    if task == "single_classification":
        return ["precision", "recall", "f1"]
    if task == "regression":
        return ["MAE", "MSE", "RMSE"]
    ks = sorted(
        {int(name.split("@")[1]) for r in results for name in r.metrics if "@" in name}
    )
    return [f"R@{k}" for k in ks] + [f"N@{k}" for k in ks]


def emit_report(results: list[RunResult], fmt: str, out_dir: str) -> str:
    """Render one row per imputer, one column per metric, best value marked.

    Markdown bolds the best cell; CSV appends ``*``. Arrows in the header
    give the metric direction.
    """
    if not results:
        raise DataError("no results to report")
    tasks = {r.task for r in results}
    if len(tasks) != 1:
        raise MixedTasksError(f"results span tasks {sorted(tasks)}")
    task = results[0].task
    if fmt not in ("markdown", "csv"):
        raise ConfigError(f"unknown report format {fmt!r}")
    columns = _metric_columns(task, results)
    best: dict[str, float] = {}
    for name in columns:
        values = [r.metrics[name] for r in results]
        best[name] = min(values) if name in _LOWER_IS_BETTER else max(values)

    def arrow(name: str) -> str:
        return "↓" if name in _LOWER_IS_BETTER else "↑"

    lines: list[str] = []
    if fmt == "markdown":
        header = "| model | " + " | ".join(f"{n} {arrow(n)}" for n in columns) + " |"
        sep = "|" + "---|" * (len(columns) + 1)
        lines.extend([header, sep])
        for r in results:
            cells = []
            for n in columns:
                text = f"{r.metrics[n]:.4f}"
                cells.append(f"**{text}**" if r.metrics[n] == best[n] else text)
            lines.append("| " + r.imputer + " | " + " | ".join(cells) + " |")
        path = os.path.join(out_dir, "report.md")
    else:
        lines.append("model," + ",".join(f"{n} {arrow(n)}" for n in columns))
        for r in results:
            cells = []
            for n in columns:
                text = f"{r.metrics[n]:.4f}"
                cells.append(text + "*" if r.metrics[n] == best[n] else text)
            lines.append(r.imputer + "," + ",".join(cells))
        path = os.path.join(out_dir, "report.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return path
