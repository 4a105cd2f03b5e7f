"""Prompt-based generative imputation.

Rows serialize to a fixed question grammar ("given a UserID of 11, a
MovieID of 44, and a Genre of Sci-Fi, what is the corresponding Rating?"),
complete rows become (prompt, completion) fine-tuning pairs, and masked
cells are filled from backend completions parsed back into typed,
in-domain values. Parsing failures never abort a run: a fallback imputer
fills those cells and the audit records them.

The grammar is an exact inverse pair with :func:`parse_prompt`; display
names may not contain ", ", " of ", or " and ", and rendered values may
not contain ", " (the bundled schemas satisfy this).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, IncompleteInputError, NoMissingTargetError
from .imputers import Imputer, MeanImputer
from .tabular import CellRef, ColumnKind, Table, TableSchema


class Unparseable:
    """Sentinel value for completions no target could be extracted from."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "Unparseable"


UNPARSEABLE = Unparseable()

_FORBIDDEN_IN_DISPLAY = (", ", " of ", " and ")


@dataclass(frozen=True)
class PromptTemplate:
    """Per-column display names and numeric rendering precision."""

    display: dict[str, str]
    number_format: dict[str, int]

    def __post_init__(self) -> None:
        names = list(self.display.values())
        if len(set(names)) != len(names):
            raise DataError("display names must be unique")
        for name in names:
            if not name or any(tok in name for tok in _FORBIDDEN_IN_DISPLAY):
                raise DataError(f"display name {name!r} would break the prompt grammar")

    @classmethod
    def infer(cls, t: Table, display: dict[str, str] | None = None) -> "PromptTemplate":
        """Default template: column names as display names; numeric columns
        whose observed values are all integral render with 0 decimals, the
        rest with 1 (the rating convention)."""
        disp = {c.name: c.name for c in t.schema}
        if display:
            disp.update(display)
        fmt: dict[str, int] = {}
        for c, spec in enumerate(t.schema):
            if not spec.kind.is_numeric:
                continue
            observed = t.observed_values(c)
            integral = observed.size > 0 and bool(np.all(observed == np.floor(observed)))
            fmt[spec.name] = 0 if integral else 1
        return cls(disp, fmt)

    def render(self, spec, value) -> str:
        if spec.kind.is_numeric:
            nd = self.number_format.get(spec.name, 1)
            return f"{float(value):.{nd}f}"
        return str(value)

    def display_of(self, col_name: str) -> str:
        return self.display.get(col_name, col_name)

    def column_of(self, display_name: str) -> str | None:
        for col, disp in self.display.items():
            if disp == display_name:
                return col
        return None


@dataclass(frozen=True)
class PromptPair:
    prompt: str
    completion: str
    target_columns: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.completion:
            raise DataError("completion must be non-empty")
        if not self.target_columns:
            raise DataError("target_columns must be non-empty")


def _join_listing(parts: list[str]) -> str:
    if len(parts) == 1:
        return parts[0]
    if len(parts) == 2:
        return f"{parts[0]} and {parts[1]}"
    return ", ".join(parts[:-1]) + f", and {parts[-1]}"


def serialize_row_to_prompt(
    t: Table, row: int, missing_cols: tuple[str, ...] | list[str], tpl: PromptTemplate
) -> str:
    """Render one row as the question grammar with ``missing_cols`` as targets."""
    if not missing_cols:
        raise NoMissingTargetError(f"row {row} has no target column")
    targets = list(missing_cols)
    clauses = []
    for c, spec in enumerate(t.schema):
        if spec.name in targets:
            continue
        if t.is_masked(row, c):
            raise DataError(
                f"row {row}: context column {spec.name!r} is masked but not a target"
            )
        value = tpl.render(spec, t.column_values(c)[row])
        if ", " in value:
            raise DataError(f"value {value!r} in column {spec.name!r} breaks the grammar")
        clauses.append(f"a {tpl.display_of(spec.name)} of {value}")
    target_disp = [tpl.display_of(name) for name in targets]
    if len(targets) == 1:
        question = f"what is the corresponding {target_disp[0]}?"
    else:
        question = f"what are the corresponding {_join_listing(target_disp)}?"
    if not clauses:
        return question
    if len(clauses) == 1:
        context = f"given {clauses[0]}"
    else:
        context = "given " + ", ".join(clauses[:-1]) + f", and {clauses[-1]}"
    return f"{context}, {question}"


_PROMPT_RE = re.compile(
    r"^(?:given (?P<ctx>.+), )?what (?:is|are) the corresponding (?P<targets>.+)\?$"
)
_CLAUSE_RE = re.compile(r"^a (.+?) of (.+)$")


def parse_prompt(text: str) -> tuple[dict[str, str], list[str]]:
    """Inverse of the serializer: (display name -> rendered value, target display names)."""
    m = _PROMPT_RE.match(text)
    if not m:
        raise DataError(f"not a grammar prompt: {text!r}")
    context: dict[str, str] = {}
    if m.group("ctx"):
        for part in m.group("ctx").split(", "):
            if part.startswith("and "):
                part = part[4:]
            cm = _CLAUSE_RE.match(part)
            if not cm:
                raise DataError(f"bad context clause: {part!r}")
            context[cm.group(1)] = cm.group(2)
    raw_targets = m.group("targets")
    if ", " in raw_targets:
        parts = raw_targets.split(", ")
    else:
        parts = raw_targets.split(" and ")
    targets = [p[4:] if p.startswith("and ") else p for p in parts]
    if any(not p for p in targets):
        raise DataError(f"bad target listing: {raw_targets!r}")
    return context, targets


def build_finetune_pairs(complete: Table, tpl: PromptTemplate) -> list[PromptPair]:
    """One single-target pair per (row, non-identifier column), row-major order."""
    if not all(complete.complete_row_mask()):
        raise IncompleteInputError("fine-tune pairs need a table with zero masked cells")
    targets = [
        (c, spec) for c, spec in enumerate(complete.schema)
        if spec.kind is not ColumnKind.IDENTIFIER
    ]
    pairs: list[PromptPair] = []
    for r in range(complete.n_rows):
        for c, spec in targets:
            prompt = serialize_row_to_prompt(complete, r, (spec.name,), tpl)
            completion = tpl.render(spec, complete.column_values(c)[r])
            pairs.append(PromptPair(prompt, completion, (spec.name,)))
    return pairs


_NUMBER_RE = re.compile(r"[-+]?(?:\d+\.\d+|\d+\.|\.\d+|\d+)")


def parse_completion(
    raw: str,
    targets: tuple[str, ...] | list[str],
    schema: TableSchema,
    vocabularies: dict[str, tuple[str, ...]] | None = None,
):
    """Extract one typed value per target, consuming the text left to right.

    Numeric targets take the next decimal-number token, clamped to the
    column range; discrete targets take the longest case-insensitive
    vocabulary match (ties: earliest position, then vocabulary order).
    Returns UNPARSEABLE when any target fails.
    """
    if not targets:
        raise DataError("parse_completion needs at least one target")
    vocabularies = vocabularies or {}
    values = []
    cursor = 0
    lowered = raw.lower()
    for name in targets:
        spec = schema.column(name)
        if spec.kind.is_numeric:
            m = _NUMBER_RE.search(raw, cursor)
            if not m:
                return UNPARSEABLE
            values.append(spec.clamp(float(m.group())))
            cursor = m.end()
        else:
            vocab = vocabularies.get(name) or spec.vocabulary
            if not vocab:
                return UNPARSEABLE
            best = None  # (-len, pos, vocab_index, entry)
            for i, entry in enumerate(vocab):
                pos = lowered.find(entry.lower(), cursor)
                if pos < 0:
                    continue
                key = (-len(entry), pos, i)
                if best is None or key < best[0]:
                    best = (key, entry, pos + len(entry))
            if best is None:
                return UNPARSEABLE
            values.append(best[1])
            cursor = best[2]
    return values


@dataclass(frozen=True)
class ImputationAudit:
    n_prompts: int
    n_parse_fallbacks: int
    fallback_cells: tuple[CellRef, ...]


def generative_impute(
    backend,
    t: Table,
    tpl: PromptTemplate,
    fallback: Imputer,
    temperature: float = 0.0,
    max_new_tokens_per_target: int = 16,
    vocabularies: dict[str, tuple[str, ...]] | None = None,
) -> tuple[Table, ImputationAudit]:
    """Fill every masked cell from backend completions, one prompt per
    incomplete row covering all its missing columns.

    Unparseable completions (and masked identifier cells, which are never
    generation targets) fall back to ``fallback`` and are audited.
    ``vocabularies`` default to the schema vocabulary or the observed
    values of each discrete column in ``t``.
    """
    if vocabularies is None:
        vocabularies = {}
        for c, spec in enumerate(t.schema):
            if not spec.kind.is_numeric:
                vocabularies[spec.name] = spec.vocabulary or t.observed_vocabulary(c)

    incomplete = np.arange(t.n_rows)[~t.complete_row_mask()]
    fallback_table: Table | None = None

    def fallback_value(r: int, c: int):
        nonlocal fallback_table
        if fallback_table is None:
            fallback_table = fallback.impute(t)
        return fallback_table.value_at(r, c)

    new_values = {c: t.column_values(c).copy() for c in range(t.n_cols)}
    n_prompts = 0
    fallback_cells: list[CellRef] = []
    for r in incomplete:
        r = int(r)
        gen_targets: list[str] = []
        for c, spec in enumerate(t.schema):
            if not t.is_masked(r, c):
                continue
            if spec.kind is ColumnKind.IDENTIFIER:
                new_values[c][r] = fallback_value(r, c)
                fallback_cells.append(CellRef(r, c))
            else:
                gen_targets.append(spec.name)
        if not gen_targets:
            continue
        prompt = serialize_row_to_prompt(t, r, tuple(gen_targets), tpl)
        raw = backend.generate(
            prompt,
            max_new_tokens=max_new_tokens_per_target * len(gen_targets),
            temperature=temperature,
        )
        n_prompts += 1
        parsed = parse_completion(raw, tuple(gen_targets), t.schema, vocabularies)
        if parsed is UNPARSEABLE:
            for name in gen_targets:
                c = t.schema.index(name)
                new_values[c][r] = fallback_value(r, c)
                fallback_cells.append(CellRef(r, c))
        else:
            for name, value in zip(gen_targets, parsed):
                c = t.schema.index(name)
                new_values[c][r] = value
    out = Table(
        t.schema,
        [new_values[c] for c in range(t.n_cols)],
        [np.zeros(t.n_rows, dtype=bool) for _ in range(t.n_cols)],
    )
    audit = ImputationAudit(n_prompts, len(fallback_cells), tuple(fallback_cells))
    return out, audit


class GenerativeImputer(Imputer):
    """The fit/impute interface over a generative backend.

    fit builds single-target fine-tune pairs from the complete table and
    fits both the backend and the fallback; impute runs
    :func:`generative_impute` and keeps the audit in ``last_audit_``.
    """

    name = "llm"

    def __init__(
        self,
        backend,
        template: PromptTemplate | None = None,
        fallback: Imputer | None = None,
        temperature: float = 0.0,
    ) -> None:
        self.backend = backend
        self.template = template
        self.fallback = fallback or MeanImputer()
        self.temperature = temperature
        self.vocabularies_: dict[str, tuple[str, ...]] | None = None
        self.last_audit_: ImputationAudit | None = None

    def fit(self, complete: Table) -> "GenerativeImputer":
        if self.template is None:
            self.template = PromptTemplate.infer(complete)
        self.fallback.fit(complete)
        self.vocabularies_ = {}
        for c, spec in enumerate(complete.schema):
            if not spec.kind.is_numeric:
                self.vocabularies_[spec.name] = (
                    spec.vocabulary or complete.observed_vocabulary(c)
                )
        pairs = build_finetune_pairs(complete, self.template)
        self.backend.fit(pairs)
        return self

    def impute(self, t: Table) -> Table:
        if self.vocabularies_ is None:
            raise DataError("GenerativeImputer.impute called before fit")
        out, audit = generative_impute(
            self.backend,
            t,
            self.template,
            self.fallback,
            temperature=self.temperature,
            vocabularies=self.vocabularies_,
        )
        self.last_audit_ = audit
        return out
