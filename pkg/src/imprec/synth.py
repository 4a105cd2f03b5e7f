"""Deterministic synthetic datasets for demos, tests, and desk-scale runs.

Each generator is a pure function of its seed (package PRNG), producing a
complete table ready for controlled injection.
"""

from __future__ import annotations

import numpy as np

from .rng import STREAM_SYNTH, make_rng
from .tabular import ColumnKind, ColumnSchema, Table, TableSchema

GENRES = ("Action", "Comedy", "Drama", "Horror", "Romance", "Sci-Fi", "Thriller", "Western")


def movielens_like(
    n_rows: int = 2000,
    n_users: int = 150,
    n_movies: int = 120,
    seed: int = 0,
    include_timestamp: bool = False,
) -> Table:
    """User/movie/genre/rating interactions with latent affinities.

    Ratings live on the 0-5 scale in half-point steps: a base score plus a
    user-genre affinity plus movie quality plus noise, clipped and rounded.
    """
    rng = make_rng(seed, STREAM_SYNTH, 0)
    movie_genre = rng.integers(0, len(GENRES), size=n_movies)
    movie_quality = rng.normal(0.0, 0.6, size=n_movies)
    user_affinity = rng.normal(0.0, 0.8, size=(n_users, len(GENRES)))
    users = rng.integers(0, n_users, size=n_rows)
    movies = rng.integers(0, n_movies, size=n_rows)
    noise = rng.normal(0.0, 0.4, size=n_rows)
    raw = 3.0 + user_affinity[users, movie_genre[movies]] + movie_quality[movies] + noise
    ratings = np.clip(np.round(raw * 2.0) / 2.0, 0.0, 5.0)

    columns = [
        np.array([str(u + 1) for u in users], dtype=object),
        np.array([str(m + 1) for m in movies], dtype=object),
        np.array([GENRES[g] for g in movie_genre[movies]], dtype=object),
        ratings.astype(np.float64),
    ]
    specs = [
        ColumnSchema("UserId", ColumnKind.IDENTIFIER),
        ColumnSchema("MovieId", ColumnKind.IDENTIFIER),
        ColumnSchema("Genre", ColumnKind.CATEGORICAL, vocabulary=GENRES),
        ColumnSchema("Rating", ColumnKind.NUMERIC, bounds=(0.0, 5.0)),
    ]
    if include_timestamp:
        ts = rng.integers(1_000_000, 2_000_000, size=n_rows).astype(np.float64)
        columns.append(ts)
        specs.append(ColumnSchema("Timestamp", ColumnKind.NUMERIC))
    schema = TableSchema(tuple(specs))
    return Table(schema, columns, [np.zeros(n_rows, dtype=bool) for _ in columns])


AD_CATEGORIES = ("Auto", "Fashion", "Finance", "Food", "Games", "Travel")
SITE_SECTIONS = ("Home", "News", "Sports", "Video")


def adclick_like(n_rows: int = 2000, n_users: int = 200, seed: int = 0) -> Table:
    """Click log where the click odds depend on (ad category, site section)."""
    rng = make_rng(seed, STREAM_SYNTH, 1)
    cat_effect = rng.normal(0.0, 1.4, size=len(AD_CATEGORIES))
    site_effect = rng.normal(0.0, 0.9, size=len(SITE_SECTIONS))
    users = rng.integers(0, n_users, size=n_rows)
    cats = rng.integers(0, len(AD_CATEGORIES), size=n_rows)
    sites = rng.integers(0, len(SITE_SECTIONS), size=n_rows)
    hour = rng.integers(0, 24, size=n_rows).astype(np.float64)
    logits = -0.4 + cat_effect[cats] + site_effect[sites]
    clicks = (rng.random(n_rows) < 1.0 / (1.0 + np.exp(-logits))).astype(np.float64)

    schema = TableSchema(
        (
            ColumnSchema("UserId", ColumnKind.IDENTIFIER),
            ColumnSchema("AdCategory", ColumnKind.CATEGORICAL, vocabulary=AD_CATEGORIES),
            ColumnSchema("SiteSection", ColumnKind.CATEGORICAL, vocabulary=SITE_SECTIONS),
            ColumnSchema("Hour", ColumnKind.NUMERIC, bounds=(0.0, 23.0)),
            ColumnSchema("Click", ColumnKind.NUMERIC, bounds=(0.0, 1.0)),
        )
    )
    columns = [
        np.array([str(u + 1) for u in users], dtype=object),
        np.array([AD_CATEGORIES[c] for c in cats], dtype=object),
        np.array([SITE_SECTIONS[s] for s in sites], dtype=object),
        hour,
        clicks,
    ]
    return Table(schema, columns, [np.zeros(n_rows, dtype=bool) for _ in columns])


CAT_A = tuple(f"A{i}" for i in range(8))
CAT_B = tuple(f"B{i}" for i in range(5))


def rating_function_dataset(n_rows: int = 5000, seed: int = 0, noise: float = 0.3) -> Table:
    """Rating is a noisy additive function of two small categorical columns.

    The cell means spread over roughly [0.5, 4.9], so naive fills (overall
    mean, zero) are far from the truth while any model conditioning on the
    categoricals can get within the noise level.
    """
    rng = make_rng(seed, STREAM_SYNTH, 2)
    a_idx = rng.integers(0, len(CAT_A), size=n_rows)
    b_idx = rng.integers(0, len(CAT_B), size=n_rows)
    a_effect = 0.4 * np.arange(len(CAT_A))
    b_effect = 0.4 * np.arange(len(CAT_B))
    raw = 0.5 + a_effect[a_idx] + b_effect[b_idx] + rng.normal(0.0, noise, size=n_rows)
    ratings = np.clip(raw, 0.0, 5.0)

    schema = TableSchema(
        (
            ColumnSchema("CatA", ColumnKind.CATEGORICAL, vocabulary=CAT_A),
            ColumnSchema("CatB", ColumnKind.CATEGORICAL, vocabulary=CAT_B),
            ColumnSchema("Rating", ColumnKind.NUMERIC, bounds=(0.0, 5.0)),
        )
    )
    columns = [
        np.array([CAT_A[i] for i in a_idx], dtype=object),
        np.array([CAT_B[i] for i in b_idx], dtype=object),
        ratings.astype(np.float64),
    ]
    return Table(schema, columns, [np.zeros(n_rows, dtype=bool) for _ in columns])
