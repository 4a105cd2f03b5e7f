"""Token-by-token decoding with stop strings.

Temperature 0 is greedy argmax and fully deterministic for a fixed
checkpoint; positive temperatures sample from the softmax sharpened by
1/temperature. ``max_new_tokens`` counts tokenizer tokens (characters).
"""

from __future__ import annotations

import torch

from .model import TinyCausalLM
from .tokenizer import END_ID, decode, encode


@torch.no_grad()
def generate(
    model: TinyCausalLM,
    prompt: str,
    max_new_tokens: int = 16,
    temperature: float = 0.0,
    stop: list[str] | None = None,
    generator: torch.Generator | None = None,
) -> str:
    """Continue ``prompt`` (the training-format separator space is added)."""
    stop = stop or []
    ids = encode(prompt + " ")
    # leave room to generate
    ids = ids[-(model.cfg.max_seq - max_new_tokens) :]
    produced: list[int] = []
    for _ in range(max_new_tokens):
        tokens = torch.tensor([ids + produced], dtype=torch.long)
        logits = model(tokens)[0, -1]
        if temperature > 0.0:
            probs = torch.softmax(logits / temperature, dim=-1)
            next_id = int(torch.multinomial(probs, 1, generator=generator).item())
        else:
            next_id = int(torch.argmax(logits).item())
        if next_id == END_ID:
            break
        produced.append(next_id)
        text = decode(produced)
        for s in stop:
            if s and s in text:
                return text.split(s, 1)[0]
    return decode(produced)
