"""Fixed character-level tokenizer.

The alphabet is printable ASCII plus newline, with three reserved ids:
pad (0), end-of-text (1), unknown (2). Being fixed, it needs no files and
every checkpoint shares it.
"""

from __future__ import annotations

PAD_ID = 0
END_ID = 1
UNK_ID = 2

_ALPHABET = "\n" + "".join(chr(c) for c in range(32, 127))
_CHAR_TO_ID = {ch: i + 3 for i, ch in enumerate(_ALPHABET)}
_ID_TO_CHAR = {i + 3: ch for i, ch in enumerate(_ALPHABET)}

VOCAB_SIZE = len(_ALPHABET) + 3


def encode(text: str) -> list[int]:
    return [_CHAR_TO_ID.get(ch, UNK_ID) for ch in text]


def decode(ids: list[int]) -> str:
    out = []
    for i in ids:
        if i in (PAD_ID, END_ID):
            break
        out.append(_ID_TO_CHAR.get(i, "?"))
    return "".join(out)
