"""Pre-training the base model and adapter-only fine-tuning.

Fine-tuning renders each pair as ``<prompt> <completion><end>``, computes
cross-entropy on the completion tokens only, and steps Adam over the
adapter parameters exclusively; the base weights stay frozen (and are
asserted bitwise-identical by the test suite).
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .corpus import corpus_lines
from .lora import adapter_parameters, apply_lora
from .model import ModelConfig, TinyCausalLM
from .tokenizer import END_ID, PAD_ID, encode

IGNORE = -100


def _pack(sequences: list[list[int]], label_starts: list[int] | None):
    """Pad a batch; labels are next-token targets, IGNORE outside the span."""
    width = max(len(s) for s in sequences)
    tokens = torch.full((len(sequences), width), PAD_ID, dtype=torch.long)
    labels = torch.full((len(sequences), width), IGNORE, dtype=torch.long)
    for i, seq in enumerate(sequences):
        tokens[i, : len(seq)] = torch.tensor(seq, dtype=torch.long)
        start = label_starts[i] if label_starts is not None else 1
        # position j predicts token j+1
        for j in range(max(start - 1, 0), len(seq) - 1):
            labels[i, j] = seq[j + 1]
    return tokens, labels


def _loss(model: nn.Module, tokens: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    logits = model(tokens)
    return nn.functional.cross_entropy(
        logits[:, :-1].reshape(-1, logits.size(-1)),
        labels[:, :-1].reshape(-1),
        ignore_index=IGNORE,
    )


def pretrain(
    n_lines: int = 40_000,
    steps: int = 1500,
    batch_size: int = 32,
    lr: float = 3e-4,
    seed: int = 0,
    config: ModelConfig | None = None,
    log_every: int = 0,
) -> TinyCausalLM:
    """Train a fresh base model on the synthetic grammar corpus."""
    torch.manual_seed(seed)
    cfg = config or ModelConfig()
    model = TinyCausalLM(cfg)
    lines = corpus_lines(n_lines, seed=seed, max_chars=cfg.max_seq - 2)
    # length-sorted so each batch pads to a similar width
    sequences = sorted((encode(line) + [END_ID] for line in lines), key=len)
    rng = np.random.default_rng(seed)
    optim = torch.optim.Adam(model.parameters(), lr=lr)
    model.train()
    for step in range(steps):
        start = int(rng.integers(0, len(sequences) - batch_size + 1))
        batch = sequences[start : start + batch_size]
        tokens, labels = _pack(batch, None)
        loss = _loss(model, tokens, labels)
        optim.zero_grad()
        loss.backward()
        optim.step()
        if log_every and (step + 1) % log_every == 0:
            print(f"  pretrain step {step + 1}/{steps}  loss {loss.item():.3f}")
    model.eval()
    return model


@dataclass
class FinetuneStats:
    steps: int
    final_loss: float


def run_finetune(
    base: TinyCausalLM,
    pairs: list[tuple[str, str]],
    epochs: int = 3,
    adapter_rank: int = 8,
    seed: int = 0,
    lr: float = 1e-2,
    batch_size: int = 16,
    alpha: float = 16.0,
    include_mlp: bool = False,
):
    """Adapter-only fine-tuning on (prompt, completion) pairs.

    Works on a deep copy of the base so the served base model is never
    touched; within the copy, only adapter parameters receive gradients.
    Returns (adapted model, adapter modules, stats).
    """
    if not pairs:
        raise ValueError("fine-tuning needs at least one pair")
    for prompt, completion in pairs:
        if not completion:
            raise ValueError("pair with empty completion")
    torch.manual_seed(seed)
    model = copy.deepcopy(base)
    adapters = apply_lora(model, adapter_rank, alpha=alpha, include_mlp=include_mlp)

    sequences: list[list[int]] = []
    starts: list[int] = []
    max_seq = model.cfg.max_seq
    for prompt, completion in pairs:
        prefix = encode(prompt + " ")
        seq = prefix + encode(completion) + [END_ID]
        if len(seq) > max_seq:
            raise ValueError(f"pair of {len(seq)} tokens exceeds max_seq {max_seq}")
        sequences.append(seq)
        starts.append(len(prefix))

    params = adapter_parameters(adapters)
    optim = torch.optim.Adam(params, lr=lr)
    rng = np.random.default_rng(seed)
    model.train()
    steps = 0
    final_loss = math.nan
    for _ in range(epochs):
        order = rng.permutation(len(sequences))
        for lo in range(0, len(sequences), batch_size):
            idx = order[lo : lo + batch_size]
            tokens, labels = _pack([sequences[int(i)] for i in idx], [starts[int(i)] for i in idx])
            loss = _loss(model, tokens, labels)
            optim.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(params, 1.0)
            optim.step()
            steps += 1
            final_loss = float(loss.item())
    model.eval()
    return model, adapters, FinetuneStats(steps, final_loss)
