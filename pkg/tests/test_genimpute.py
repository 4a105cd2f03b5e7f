from __future__ import annotations

import numpy as np
import pytest

from imprec.errors import DataError, IncompleteInputError, NoMissingTargetError
from imprec.genimpute import (
    GenerativeImputer,
    PromptPair,
    PromptTemplate,
    UNPARSEABLE,
    build_finetune_pairs,
    generative_impute,
    parse_completion,
    parse_prompt,
    serialize_row_to_prompt,
)
from imprec.imputers import MeanImputer
from imprec.missingness import inject_mcar
from imprec.tabular import ColumnKind, ColumnSchema, Table, TableSchema

from conftest import table_from_rows

NUM = ColumnKind.NUMERIC
CAT = ColumnKind.CATEGORICAL
ID = ColumnKind.IDENTIFIER

MOVIE_SPECS = [
    ColumnSchema("UserId", ID),
    ColumnSchema("MovieId", ID),
    ColumnSchema("Genres", CAT, vocabulary=("Sci-Fi", "Action", "Drama")),
    ColumnSchema("Rating", NUM, bounds=(0.0, 5.0)),
]
MOVIE_TPL = PromptTemplate(
    display={"UserId": "UserID", "MovieId": "MovieID", "Genres": "Genre", "Rating": "Rating"},
    number_format={"Rating": 1},
)


def movie_row(user, movie, genre, rating):
    return table_from_rows(MOVIE_SPECS, [(user, movie, genre, rating)])


# -- serialization --------------------------------------------------------------


def test_single_target_prompt_matches_reference_string():
    t = movie_row("11", "44", "Sci-Fi", None)
    prompt = serialize_row_to_prompt(t, 0, ("Rating",), MOVIE_TPL)
    assert prompt == (
        "given a UserID of 11, a MovieID of 44, and a Genre of Sci-Fi, "
        "what is the corresponding Rating?"
    )


def test_multi_target_prompt():
    t = movie_row("11", "44", None, None)
    prompt = serialize_row_to_prompt(t, 0, ("Genres", "Rating"), MOVIE_TPL)
    assert prompt == (
        "given a UserID of 11, and a MovieID of 44, "
        "what are the corresponding Genre and Rating?"
    )


def test_no_target_raises():
    t = movie_row("11", "44", "Sci-Fi", 4.0)
    with pytest.raises(NoMissingTargetError):
        serialize_row_to_prompt(t, 0, (), MOVIE_TPL)


def test_single_context_and_three_targets():
    t = movie_row("11", None, None, None)
    prompt = serialize_row_to_prompt(t, 0, ("MovieId", "Genres", "Rating"), MOVIE_TPL)
    assert prompt == (
        "given a UserID of 11, "
        "what are the corresponding MovieID, Genre, and Rating?"
    )
    context, targets = parse_prompt(prompt)
    assert context == {"UserID": "11"}
    assert targets == ["MovieID", "Genre", "Rating"]


def test_prompt_round_trip():
    t = movie_row("11", "44", "Sci-Fi", None)
    prompt = serialize_row_to_prompt(t, 0, ("Rating",), MOVIE_TPL)
    context, targets = parse_prompt(prompt)
    assert context == {"UserID": "11", "MovieID": "44", "Genre": "Sci-Fi"}
    assert targets == ["Rating"]


def test_template_rejects_grammar_breaking_names():
    with pytest.raises(DataError):
        PromptTemplate(display={"a": "Date of Birth"}, number_format={})
    with pytest.raises(DataError):
        PromptTemplate(display={"a": "X", "b": "X"}, number_format={})


def test_template_infers_number_format():
    t = table_from_rows(
        [ColumnSchema("count", NUM), ColumnSchema("rating", NUM)],
        [(1.0, 3.5), (2.0, 4.0)],
    )
    tpl = PromptTemplate.infer(t)
    assert tpl.number_format == {"count": 0, "rating": 1}
    assert tpl.render(t.schema.column("count"), 2.0) == "2"
    assert tpl.render(t.schema.column("rating"), 4.0) == "4.0"


# -- fine-tune pairs ---------------------------------------------------------------


def test_build_finetune_pairs_counts_and_order():
    t = table_from_rows(MOVIE_SPECS, [("11", "44", "Sci-Fi", 4.0), ("12", "45", "Drama", 2.5)])
    pairs = build_finetune_pairs(t, MOVIE_TPL)
    # 2 rows x 2 non-identifier columns, row-major
    assert len(pairs) == 4
    assert pairs[0].target_columns == ("Genres",)
    assert pairs[1].target_columns == ("Rating",)
    assert pairs[1].completion == "4.0"
    assert pairs[2].prompt.startswith("given a UserID of 12")


def test_build_finetune_pairs_requires_complete():
    t = movie_row("11", "44", "Sci-Fi", None)
    with pytest.raises(IncompleteInputError):
        build_finetune_pairs(t, MOVIE_TPL)


# -- completion parsing ----------------------------------------------------------------


def test_parse_completion_numeric():
    schema = TableSchema(tuple(MOVIE_SPECS))
    assert parse_completion(" 4.0", ("Rating",), schema) == [4.0]
    assert parse_completion("6.3", ("Rating",), schema) == [5.0]  # clamped
    assert parse_completion("a great movie", ("Rating",), schema) is UNPARSEABLE


def test_parse_completion_categorical_longest_match():
    schema = TableSchema(
        (ColumnSchema("g", CAT, vocabulary=("Fi", "Sci-Fi", "Action")),)
    )
    assert parse_completion("definitely sci-fi!", ("g",), schema) == ["Sci-Fi"]
    assert parse_completion("nothing here", ("g",), schema) is UNPARSEABLE


def test_parse_completion_consumes_left_to_right():
    schema = TableSchema(
        (
            ColumnSchema("g", CAT, vocabulary=("Action", "Drama")),
            ColumnSchema("r", NUM, bounds=(0.0, 5.0)),
        )
    )
    assert parse_completion("Action and 3.5", ("g", "r"), schema) == ["Action", 3.5]
    assert parse_completion("3.5 and Drama", ("r", "g"), schema) == [3.5, "Drama"]


def test_parse_completion_fails_if_any_target_fails():
    schema = TableSchema(
        (
            ColumnSchema("g", CAT, vocabulary=("Action",)),
            ColumnSchema("r", NUM),
        )
    )
    assert parse_completion("Action and nothing", ("g", "r"), schema) is UNPARSEABLE


# -- generative imputation ---------------------------------------------------------------


class ConstantBackend:
    def __init__(self, text):
        self.text = text
        self.prompts: list[str] = []

    def fit(self, pairs):
        pass

    def generate(self, prompt, max_new_tokens=16, temperature=0.0):
        self.prompts.append(prompt)
        return self.text


class GibberishEveryOther:
    def __init__(self, good_text):
        self.good = good_text
        self.calls = 0

    def fit(self, pairs):
        pass

    def generate(self, prompt, max_new_tokens=16, temperature=0.0):
        self.calls += 1
        return self.good if self.calls % 2 else "%%%"


def _rating_table(n=10, masked_rows=(2, 5)):
    rows = []
    for i in range(n):
        rating = None if i in masked_rows else 3.0 + (i % 3) * 0.5
        rows.append((str(i), "Sci-Fi" if i % 2 else "Drama", rating))
    return table_from_rows(
        [
            ColumnSchema("UserId", ID),
            ColumnSchema("Genre", CAT, vocabulary=("Sci-Fi", "Drama")),
            ColumnSchema("Rating", NUM, bounds=(0.0, 5.0)),
        ],
        rows,
    )


def test_generative_impute_constant_backend():
    t = _rating_table()
    fallback = MeanImputer().fit(t.take_rows([r for r in range(10) if r not in (2, 5)]))
    tpl = PromptTemplate.infer(t)
    out, audit = generative_impute(ConstantBackend("4.0"), t, tpl, fallback)
    assert out.value_at(2, "Rating") == 4.0
    assert out.value_at(5, "Rating") == 4.0
    assert audit.n_prompts == 2
    assert audit.n_parse_fallbacks == 0
    assert not any(out.column_mask(c).any() for c in range(out.n_cols))


def test_generative_impute_fallback_and_audit_conservation():
    t = _rating_table(masked_rows=(1, 3, 5, 7))
    complete = t.take_rows([r for r in range(10) if r not in (1, 3, 5, 7)])
    fallback = MeanImputer().fit(complete)
    tpl = PromptTemplate.infer(t)
    out, audit = generative_impute(GibberishEveryOther("4.5"), t, tpl, fallback)
    assert audit.n_prompts == 4
    assert audit.n_parse_fallbacks == 2
    mean_rating = float(np.mean(complete.column_values("Rating")))
    fallback_rows = {cell.row for cell in audit.fallback_cells}
    assert len(fallback_rows) == 2
    for r in fallback_rows:
        assert out.value_at(r, "Rating") == mean_rating
    # conservation: backend-filled + fallback-filled = masked on entry
    masked_on_entry = int(sum(t.column_mask(c).sum() for c in range(t.n_cols)))
    backend_filled = masked_on_entry - audit.n_parse_fallbacks
    assert backend_filled + len(audit.fallback_cells) == masked_on_entry


def test_generative_impute_no_missing_is_identity():
    t = _rating_table(masked_rows=())
    fallback = MeanImputer().fit(t)
    out, audit = generative_impute(ConstantBackend("4.0"), t, PromptTemplate.infer(t), fallback)
    assert out == t
    assert audit.n_prompts == 0


def test_generative_impute_values_stay_in_domain():
    t = _rating_table()
    complete = t.take_rows([r for r in range(10) if r not in (2, 5)])
    fallback = MeanImputer().fit(complete)
    out, _ = generative_impute(ConstantBackend("11.0"), t, PromptTemplate.infer(t), fallback)
    assert out.value_at(2, "Rating") == 5.0  # clamped into [0, 5]


def test_generative_impute_masked_identifier_goes_to_fallback():
    t = table_from_rows(
        [
            ColumnSchema("UserId", ID),
            ColumnSchema("Rating", NUM, bounds=(0.0, 5.0)),
        ],
        [("1", 4.0), (None, 3.0), ("3", 2.0)],
    )
    complete = t.take_rows([0, 2])
    fallback = MeanImputer().fit(complete)
    backend = ConstantBackend("4.0")
    out, audit = generative_impute(backend, t, PromptTemplate.infer(t), fallback)
    assert audit.n_prompts == 0  # identifier is never a generation target
    assert audit.n_parse_fallbacks == 1
    assert out.value_at(1, "UserId") == "1"  # fit-table mode


def test_generative_imputer_end_to_end_with_injection():
    base = _rating_table(masked_rows=())
    injected, ledger = inject_mcar(base, 0.2, seed=5)
    complete = injected.take_rows(
        [r for r in range(injected.n_rows) if injected.complete_row_mask()[r]]
    )
    imp = GenerativeImputer(ConstantBackend("4.0")).fit(complete)
    out = imp.impute(injected)
    assert not any(out.column_mask(c).any() for c in range(out.n_cols))
    assert imp.last_audit_ is not None
