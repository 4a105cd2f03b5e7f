"""Synthetic pre-training corpus in the prompt grammar.

Lines look like the client's prompts followed by an answer:

    given a Color of red, and a Shape of cube, what is the corresponding
    Color? red

Most lines are copy tasks: the question names one of the context fields
and the answer is that field's value. Field names and values are random
and never repeat across lines, so nothing is memorizable; what the base
model learns is the grammar, digit emission, and crucially the skill of
attending from the answer position back into the context values. Low-rank
adapters later only have to remap retrieved values onto a task-specific
answer. A minority of lines ask for an unseen field (answer unrelated) so
the model also has a fallback behavior for imputation-style questions.
"""

from __future__ import annotations

import numpy as np

_LETTERS = "abcdefghijklmnopqrstuvwxyz"


def _word(rng: np.random.Generator, lo: int = 3, hi: int = 6) -> str:
    n = int(rng.integers(lo, hi + 1))
    return "".join(_LETTERS[int(i)] for i in rng.integers(0, 26, n))


def _name(rng: np.random.Generator) -> str:
    return _word(rng).capitalize()


def _value(rng: np.random.Generator) -> str:
    kind = int(rng.integers(0, 3))
    if kind == 0:
        return str(int(rng.integers(0, 100)))
    if kind == 1:
        return f"{rng.uniform(0, 6):.1f}"
    return _word(rng)


def grammar_line(rng: np.random.Generator) -> str:
    n_ctx = int(rng.integers(1, 4))
    names = []
    while len(names) < n_ctx:  # distinct field names
        name = _name(rng)
        if name not in names:
            names.append(name)
    values = [_value(rng) for _ in range(n_ctx)]
    clauses = [f"a {n} of {v}" for n, v in zip(names, values)]
    if n_ctx == 1:
        ctx = f"given {clauses[0]}"
    else:
        ctx = "given " + ", ".join(clauses[:-1]) + f", and {clauses[-1]}"

    roll = rng.random()
    if roll < 0.60:
        # copy one named field
        pick = int(rng.integers(0, n_ctx))
        question = f"what is the corresponding {names[pick]}?"
        answer = values[pick]
    elif roll < 0.75 and n_ctx >= 2:
        # copy two named fields, joined the way the client joins them
        i, j = (int(x) for x in rng.choice(n_ctx, size=2, replace=False))
        question = f"what are the corresponding {names[i]} and {names[j]}?"
        answer = f"{values[i]} and {values[j]}"
    else:
        # unseen target: answer unrelated to the context
        question = f"what is the corresponding {_name(rng)}?"
        answer = _value(rng)
    return f"{ctx}, {question} {answer}"


def corpus_lines(n_lines: int, seed: int, max_chars: int = 180) -> list[str]:
    rng = np.random.default_rng(seed)
    lines = []
    while len(lines) < n_lines:
        line = grammar_line(rng)
        if len(line) <= max_chars:
            lines.append(line)
    return lines
