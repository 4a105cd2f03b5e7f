"""Low-rank adapters over frozen linear layers.

``LoRALinear`` computes ``base(x) + (alpha / rank) * B(A(x))`` with the
base layer frozen; ``B`` starts at zero so a freshly adapted model is
bitwise-equivalent to its base. Adapters attach to the four attention
projections by default (configurable to include the MLP linears).
"""

from __future__ import annotations

import torch
from torch import nn

ATTENTION_TARGETS = ("q_proj", "k_proj", "v_proj", "o_proj")
MLP_TARGETS = ("mlp.0", "mlp.2")


class LoRALinear(nn.Module):
    def __init__(self, base: nn.Linear, rank: int, alpha: float = 2.0) -> None:
        super().__init__()
        if rank < 1:
            raise ValueError("adapter rank must be >= 1")
        self.base = base
        for p in self.base.parameters():
            p.requires_grad_(False)
        self.rank = rank
        self.scale = alpha / rank
        self.lora_a = nn.Linear(base.in_features, rank, bias=False)
        self.lora_b = nn.Linear(rank, base.out_features, bias=False)
        nn.init.normal_(self.lora_a.weight, std=0.02)
        nn.init.zeros_(self.lora_b.weight)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.base(x) + self.scale * self.lora_b(self.lora_a(x))


def apply_lora(model: nn.Module, rank: int, alpha: float = 2.0, include_mlp: bool = False):
    """Wrap the target linears in place; returns the list of adapter modules."""
    for p in model.parameters():
        p.requires_grad_(False)
    adapters: list[LoRALinear] = []
    for block in model.blocks:
        for name in ATTENTION_TARGETS:
            base = getattr(block.attn, name)
            wrapped = LoRALinear(base, rank, alpha)
            setattr(block.attn, name, wrapped)
            adapters.append(wrapped)
        if include_mlp:
            for idx in (0, 2):
                wrapped = LoRALinear(block.mlp[idx], rank, alpha)
                block.mlp[idx] = wrapped
                adapters.append(wrapped)
    return adapters


def adapter_parameters(adapters) -> list[torch.nn.Parameter]:
    params: list[torch.nn.Parameter] = []
    for module in adapters:
        params.extend([module.lora_a.weight, module.lora_b.weight])
    return params


def adapter_state_dict(adapters) -> dict[str, torch.Tensor]:
    state = {}
    for i, module in enumerate(adapters):
        state[f"adapter_{i}.a"] = module.lora_a.weight.detach().clone()
        state[f"adapter_{i}.b"] = module.lora_b.weight.detach().clone()
    return state


def load_adapter_state(adapters, state: dict[str, torch.Tensor]) -> None:
    for i, module in enumerate(adapters):
        with torch.no_grad():
            module.lora_a.weight.copy_(state[f"adapter_{i}.a"])
            module.lora_b.weight.copy_(state[f"adapter_{i}.b"])
