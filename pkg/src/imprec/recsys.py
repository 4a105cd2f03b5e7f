"""DLRM-lite neural recommender with hand-written gradients.

Discrete features pass through per-feature embedding tables, numeric
features through an affine layer into the same width; the interaction
stage takes pairwise dot products of all embedded vectors (dense vector
included) and concatenates them with the dense projection; a tanh MLP
produces one score. Training is plain mini-batch gradient descent on the
package PRNG so runs are bit-reproducible, and the analytic gradients are
checkable against central finite differences (the reason the hidden
activation is smooth).

Heads per task: sigmoid for click probability, identity clamped to the
label's declared range for rating regression, raw score for ranking.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    InsufficientCandidatesError,
    MaskedInputError,
    MissingLabelError,
    SchemaMismatchError,
)
from .rng import STREAM_GRADCHECK, STREAM_RANK, STREAM_TRAIN, make_rng
from .tabular import ColumnKind, Table


class Task(enum.Enum):
    BINARY_CLICK = "binary_click"
    RATING_REGRESSION = "rating_regression"
    TOPK_RANKING = "topk_ranking"


@dataclass(frozen=True)
class RecModelConfig:
    embedding_dim: int = 16
    hidden_layers: tuple[int, ...] = (64, 32)
    learning_rate: float = 1e-3
    epochs: int = 5
    batch_size: int = 256
    seed: int = 0
    task: Task = Task.RATING_REGRESSION

    def __post_init__(self) -> None:
        if self.embedding_dim < 1 or any(w < 1 for w in self.hidden_layers):
            raise ConfigError("embedding and hidden widths must be >= 1")
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("bad learning_rate/batch_size/epochs")


@dataclass(frozen=True)
class RankingProtocol:
    n_negatives: int = 99
    k_values: tuple[int, ...] = (3, 5, 10)
    holdout_frac: float = 0.2

    def __post_init__(self) -> None:
        if self.n_negatives < max(self.k_values) - 1:
            raise ConfigError("n_negatives must be >= max(k) - 1")
        if not 0 < self.holdout_frac < 1:
            raise ConfigError("holdout_frac must lie in (0, 1)")


# -- feature encoding ---------------------------------------------------------------


@dataclass
class FeatureCodec:
    """Maps feature columns to (categorical index, standardized dense) arrays.

    Discrete vocabularies are 1-based with index 0 reserved for unseen
    values; numeric features standardize with the training mean/std.
    """

    cat_features: list[tuple[str, dict[str, int]]]
    dense_features: list[tuple[str, float, float]]

    @classmethod
    def fit(cls, data: Table, label_col: str) -> "FeatureCodec":
        cats: list[tuple[str, dict[str, int]]] = []
        denses: list[tuple[str, float, float]] = []
        for c, spec in enumerate(data.schema):
            if spec.name == label_col:
                continue
            if spec.kind.is_numeric:
                values = data.column_values(c).astype(np.float64)
                std = float(np.std(values))
                denses.append((spec.name, float(np.mean(values)), std if std > 0 else 1.0))
            else:
                vocab = {v: i + 1 for i, v in enumerate(data.observed_vocabulary(c))}
                cats.append((spec.name, vocab))
        return cls(cats, denses)

    def encode(self, rows: Table) -> tuple[np.ndarray, np.ndarray]:
        names = rows.schema.names
        for name, _ in self.cat_features:
            if name not in names or rows.schema.column(name).kind.is_numeric:
                raise SchemaMismatchError(f"missing or mistyped feature column {name!r}")
        for name, _, _ in self.dense_features:
            if name not in names or not rows.schema.column(name).kind.is_numeric:
                raise SchemaMismatchError(f"missing or mistyped feature column {name!r}")
        for name in [n for n, _ in self.cat_features] + [n for n, _, _ in self.dense_features]:
            if rows.column_mask(name).any():
                raise MaskedInputError(f"feature column {name!r} contains masked cells")
        n = rows.n_rows
        X_cat = np.zeros((n, len(self.cat_features)), dtype=np.int64)
        for j, (name, vocab) in enumerate(self.cat_features):
            col = rows.column_values(name)
            X_cat[:, j] = [vocab.get(v, 0) for v in col]
        X_dense = np.zeros((n, len(self.dense_features)))
        for j, (name, mean, std) in enumerate(self.dense_features):
            X_dense[:, j] = (rows.column_values(name).astype(np.float64) - mean) / std
        return X_cat, X_dense

    def vocab_sizes(self) -> list[int]:
        return [len(vocab) + 1 for _, vocab in self.cat_features]


# -- parameters ----------------------------------------------------------------------


def init_params(codec: FeatureCodec, cfg: RecModelConfig) -> dict[str, np.ndarray]:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, in a
    fixed creation order on the seeded PRNG."""
    rng = make_rng(cfg.seed, STREAM_TRAIN)
    d = cfg.embedding_dim
    params: dict[str, np.ndarray] = {}
    for j, size in enumerate(codec.vocab_sizes()):
        bound = 1.0 / math.sqrt(d)
        params[f"emb_{j}"] = rng.uniform(-bound, bound, size=(size, d))
    n_dense = len(codec.dense_features)
    bound = 1.0 / math.sqrt(max(n_dense, 1))
    params["dense_W"] = rng.uniform(-bound, bound, size=(n_dense, d))
    params["dense_b"] = np.zeros(d)
    m = len(codec.cat_features) + 1
    top_dim = d + m * (m - 1) // 2
    dims = [top_dim, *cfg.hidden_layers, 1]
    for l in range(len(dims) - 1):
        bound = 1.0 / math.sqrt(dims[l])
        params[f"mlp_W{l}"] = rng.uniform(-bound, bound, size=(dims[l], dims[l + 1]))
        params[f"mlp_b{l}"] = np.zeros(dims[l + 1])
    return params


def _forward(params: dict[str, np.ndarray], X_cat: np.ndarray, X_dense: np.ndarray, n_hidden: int):
    n = X_cat.shape[0]
    d = params["dense_W"].shape[1]
    embs = [params[f"emb_{j}"][X_cat[:, j]] for j in range(X_cat.shape[1])]
    z_dense = X_dense @ params["dense_W"] + params["dense_b"]
    vectors = np.stack([z_dense, *embs], axis=1)  # (n, m, d)
    m = vectors.shape[1]
    iu = np.triu_indices(m, k=1)
    gram = vectors @ vectors.transpose(0, 2, 1)
    dots = gram[:, iu[0], iu[1]]
    top = np.concatenate([z_dense, dots], axis=1)
    acts = [top]
    h = top
    for l in range(n_hidden + 1):
        z = h @ params[f"mlp_W{l}"] + params[f"mlp_b{l}"]
        h = np.tanh(z) if l < n_hidden else z
        acts.append(h)
    out = h[:, 0]
    return out, (embs, z_dense, vectors, iu, acts)


def _loss_and_dout(out: np.ndarray, y: np.ndarray, task: Task) -> tuple[float, np.ndarray]:
    n = len(out)
    if task is Task.BINARY_CLICK:
        loss = float(np.mean(np.logaddexp(0.0, out) - y * out))
        dout = (1.0 / (1.0 + np.exp(-out)) - y) / n
    else:
        diff = out - y
        loss = float(np.mean(diff**2))
        dout = 2.0 * diff / n
    return loss, dout


def _backward(
    params: dict[str, np.ndarray],
    cache,
    X_cat: np.ndarray,
    X_dense: np.ndarray,
    dout: np.ndarray,
    n_hidden: int,
) -> dict[str, np.ndarray]:
    embs, z_dense, vectors, iu, acts = cache
    grads: dict[str, np.ndarray] = {}
    d = z_dense.shape[1]
    da = dout[:, None]
    for l in range(n_hidden, -1, -1):
        dz = da if l == n_hidden else da * (1.0 - acts[l + 1] ** 2)
        grads[f"mlp_W{l}"] = acts[l].T @ dz
        grads[f"mlp_b{l}"] = dz.sum(axis=0)
        da = dz @ params[f"mlp_W{l}"].T
    d_top = da
    d_zdense = d_top[:, :d].copy()
    d_dots = d_top[:, d:]
    m = vectors.shape[1]
    d_gram = np.zeros((len(dout), m, m))
    d_gram[:, iu[0], iu[1]] = d_dots
    d_vectors = d_gram @ vectors + d_gram.transpose(0, 2, 1) @ vectors
    d_zdense += d_vectors[:, 0, :]
    grads["dense_W"] = X_dense.T @ d_zdense
    grads["dense_b"] = d_zdense.sum(axis=0)
    for j in range(X_cat.shape[1]):
        g = np.zeros_like(params[f"emb_{j}"])
        np.add.at(g, X_cat[:, j], d_vectors[:, j + 1, :])
        grads[f"emb_{j}"] = g
    return grads


# -- model ----------------------------------------------------------------------------


@dataclass
class RecModel:
    config: RecModelConfig
    label_col: str
    label_bounds: tuple[float, float] | None
    codec: FeatureCodec
    params: dict[str, np.ndarray]
    training_log: list[float] = field(default_factory=list)

    def scores(self, rows: Table) -> np.ndarray:
        """Raw pre-head outputs."""
        X_cat, X_dense = self.codec.encode(rows)
        out, _ = _forward(self.params, X_cat, X_dense, len(self.config.hidden_layers))
        return out

    def predict(self, rows: Table) -> np.ndarray:
        out = self.scores(rows)
        if self.config.task is Task.BINARY_CLICK:
            return 1.0 / (1.0 + np.exp(-out))
        if self.config.task is Task.RATING_REGRESSION and self.label_bounds is not None:
            return np.clip(out, *self.label_bounds)
        return out


def predict(model: RecModel, rows: Table) -> np.ndarray:
    return model.predict(rows)


def _label_array(data: Table, label_col: str, task: Task) -> np.ndarray:
    if label_col not in data.schema.names:
        raise MissingLabelError(f"label column {label_col!r} not in table")
    spec = data.schema.column(label_col)
    if not spec.kind.is_numeric:
        raise MissingLabelError(f"label column {label_col!r} must be numeric")
    if data.column_mask(label_col).any():
        raise MaskedInputError(f"label column {label_col!r} contains masked cells")
    y = data.column_values(label_col).astype(np.float64)
    # imputation can turn 0/1 clicks into soft targets; log-loss handles [0, 1]
    if task is Task.BINARY_CLICK and (y.min() < 0.0 or y.max() > 1.0):
        raise DataError(f"label column {label_col!r} must lie in [0, 1] for click training")
    return y


def train(data: Table, cfg: RecModelConfig, label_col: str) -> RecModel:
    """Mini-batch gradient descent; same (data, cfg, seed) reproduces the
    training log and parameters bit-for-bit.

    The per-epoch log records the sample-weighted mean of batch losses
    (each computed before its update step).
    """
    if np.any(~data.complete_row_mask()):
        raise MaskedInputError("training data contains masked cells")
    y_all = _label_array(data, label_col, cfg.task)
    codec = FeatureCodec.fit(data, label_col)
    X_cat, X_dense = codec.encode(data)
    params = init_params(codec, cfg)
    n = data.n_rows
    n_hidden = len(cfg.hidden_layers)
    rng = make_rng(cfg.seed, STREAM_TRAIN, 1)  # batch shuffling stream
    log: list[float] = []
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            out, cache = _forward(params, X_cat[idx], X_dense[idx], n_hidden)
            loss, dout = _loss_and_dout(out, y_all[idx], cfg.task)
            loss_sum += loss * len(idx)
            grads = _backward(params, cache, X_cat[idx], X_dense[idx], dout, n_hidden)
            for key, g in grads.items():
                params[key] -= cfg.learning_rate * g
                if not np.all(np.isfinite(params[key])):
                    raise DataError(
                        f"non-finite parameters in {key} during training; lower the learning rate"
                    )
        log.append(loss_sum / n)
    spec = data.schema.column(label_col)
    return RecModel(cfg, label_col, spec.bounds, codec, params, log)


# -- gradient check ---------------------------------------------------------------------


def grad_check(
    cfg: RecModelConfig,
    sample: Table,
    label_col: str,
    n_params: int = 120,
    step: float = 1e-4,
) -> float:
    """Max relative error between analytic and central-difference gradients
    over ``n_params`` randomly chosen parameter coordinates."""
    if sample.n_rows > 32:
        raise DataError("grad_check samples are capped at 32 rows")
    y = _label_array(sample, label_col, cfg.task)
    codec = FeatureCodec.fit(sample, label_col)
    X_cat, X_dense = codec.encode(sample)
    params = init_params(codec, cfg)
    n_hidden = len(cfg.hidden_layers)

    def loss_at() -> float:
        out, _ = _forward(params, X_cat, X_dense, n_hidden)
        return _loss_and_dout(out, y, cfg.task)[0]

    out, cache = _forward(params, X_cat, X_dense, n_hidden)
    _, dout = _loss_and_dout(out, y, cfg.task)
    grads = _backward(params, cache, X_cat, X_dense, dout, n_hidden)

    keys = sorted(params)
    sizes = np.array([params[k].size for k in keys])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    total = int(offsets[-1])
    rng = make_rng(cfg.seed, STREAM_GRADCHECK)
    chosen = rng.choice(total, size=min(n_params, total), replace=False)
    worst = 0.0
    for flat in chosen:
        k = keys[int(np.searchsorted(offsets, flat, side="right")) - 1]
        local = int(flat - offsets[keys.index(k)])
        idx = np.unravel_index(local, params[k].shape)
        orig = params[k][idx]
        params[k][idx] = orig + step
        up = loss_at()
        params[k][idx] = orig - step
        down = loss_at()
        params[k][idx] = orig
        numeric = (up - down) / (2 * step)
        analytic = grads[k][idx]
        rel = abs(analytic - numeric) / max(1.0, abs(analytic), abs(numeric))
        worst = max(worst, rel)
    return worst


# -- ranking protocol ---------------------------------------------------------------------


def per_user_holdout(
    t: Table, user_col: str, holdout_frac: float, timestamp_col: str | None = None
) -> tuple[Table, Table]:
    """Hold out each user's floor(frac * n) most recent interactions.

    Recency comes from ``timestamp_col`` when given (stable sort), else
    from row order. Returns (training interactions, held-out positives),
    each preserving original row order.
    """
    by_user: dict[str, list[int]] = {}
    users = t.column_values(user_col)
    for r in range(t.n_rows):
        by_user.setdefault(users[r], []).append(r)
    ts = t.column_values(timestamp_col).astype(np.float64) if timestamp_col else None
    hold: set[int] = set()
    for rows in by_user.values():
        n_hold = math.floor(holdout_frac * len(rows))
        if n_hold == 0:
            continue
        ordered = sorted(rows, key=lambda r: (ts[r], r)) if ts is not None else rows
        hold.update(ordered[-n_hold:])
    keep_idx = [r for r in range(t.n_rows) if r not in hold]
    hold_idx = [r for r in range(t.n_rows) if r in hold]
    return t.take_rows(keep_idx), t.take_rows(hold_idx)


def rank_topk(
    scorer,
    positives: list,
    candidates: list,
    proto: RankingProtocol,
    seed: int,
) -> list[list]:
    """One ranked list per held-out positive.

    For each positive, ``n_negatives`` items are sampled without
    replacement from the candidate pool (positive excluded) on a
    per-evaluation-point PRNG stream, scored together with the positive by
    ``scorer(items) -> scores``, and ranked by descending score with ties
    broken by ascending item id.
    """
    ranked_lists: list[list] = []
    for j, pos in enumerate(positives):
        pool = [c for c in candidates if c != pos]
        if len(pool) < proto.n_negatives:
            raise InsufficientCandidatesError(
                f"pool of {len(pool)} candidates cannot supply {proto.n_negatives} negatives"
            )
        rng = make_rng(seed, STREAM_RANK, j)
        picks = rng.choice(len(pool), size=proto.n_negatives, replace=False)
        items = [pos] + [pool[int(i)] for i in picks]
        scores = np.asarray(scorer(items), dtype=np.float64)
        order = sorted(range(len(items)), key=lambda i: (-scores[i], items[i]))
        ranked_lists.append([items[i] for i in order])
    return ranked_lists


# -- checkpoints -----------------------------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_checkpoint(model: RecModel, path: str) -> None:
    meta = {
        "version": CHECKPOINT_VERSION,
        "config": {
            "embedding_dim": model.config.embedding_dim,
            "hidden_layers": list(model.config.hidden_layers),
            "learning_rate": model.config.learning_rate,
            "epochs": model.config.epochs,
            "batch_size": model.config.batch_size,
            "seed": model.config.seed,
            "task": model.config.task.value,
        },
        "label_col": model.label_col,
        "label_bounds": list(model.label_bounds) if model.label_bounds else None,
        "codec": {
            "cat_features": [[name, list(vocab)] for name, vocab in model.codec.cat_features],
            "dense_features": [list(f) for f in model.codec.dense_features],
        },
        "training_log": model.training_log,
    }
    arrays = {f"param_{k}": v for k, v in model.params.items()}
    np.savez(path, meta=np.str_(json.dumps(meta)), **arrays)


def load_checkpoint(path: str) -> RecModel:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta["version"] != CHECKPOINT_VERSION:
            raise DataError(f"unsupported checkpoint version {meta['version']}")
        params = {
            k[len("param_") :]: data[k] for k in data.files if k.startswith("param_")
        }
    cfg = RecModelConfig(
        embedding_dim=meta["config"]["embedding_dim"],
        hidden_layers=tuple(meta["config"]["hidden_layers"]),
        learning_rate=meta["config"]["learning_rate"],
        epochs=meta["config"]["epochs"],
        batch_size=meta["config"]["batch_size"],
        seed=meta["config"]["seed"],
        task=Task(meta["config"]["task"]),
    )
    codec = FeatureCodec(
        cat_features=[
            (name, {v: i + 1 for i, v in enumerate(vocab)})
            for name, vocab in meta["codec"]["cat_features"]
        ],
        dense_features=[tuple(f) for f in meta["codec"]["dense_features"]],
    )
    bounds = tuple(meta["label_bounds"]) if meta["label_bounds"] else None
    return RecModel(cfg, meta["label_col"], bounds, codec, params, meta["training_log"])
