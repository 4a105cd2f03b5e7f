"""Shared fixtures: a once-per-session pre-trained base model and the
deterministic field->value mapping used by the learning checks."""

from __future__ import annotations

import os

import numpy as np
import pytest

from imprec_sidecar.model import load_model, save_model
from imprec_sidecar.training import pretrain

PRETRAIN_STEPS = 400

COLORS = [c.capitalize() for c in
          ["red", "blue", "green", "amber", "ivory", "jade", "onyx", "pearl", "ruby", "slate"]]
SHAPES = [s.capitalize() for s in
          ["cube", "cone", "disk", "ring", "rod", "slab", "orb", "wedge"]]


def mapping_value(color_i: int, shape_i: int) -> str:
    """The ground-truth mapping; 11 distinct half-point answers."""
    return f"{(color_i * 7 + shape_i * 3) % 11 * 0.5:.1f}"


def mapping_prompt(color_i: int, shape_i: int) -> str:
    return (
        f"given a Color of {COLORS[color_i]}, and a Shape of {SHAPES[shape_i]}, "
        f"what is the corresponding Rating?"
    )


def sample_mapping_pairs(n: int, seed: int) -> list[tuple[str, str]]:
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(n):
        ci = int(rng.integers(0, len(COLORS)))
        si = int(rng.integers(0, len(SHAPES)))
        pairs.append((mapping_prompt(ci, si), mapping_value(ci, si)))
    return pairs


@pytest.fixture(scope="session")
def model_dir(tmp_path_factory) -> str:
    """Directory holding base.pt; pre-trains once per test session."""
    path = tmp_path_factory.mktemp("sidecar_model")
    base = pretrain(n_lines=20_000, steps=PRETRAIN_STEPS, seed=0)
    save_model(base, str(path / "base.pt"))
    return str(path)


@pytest.fixture(scope="session")
def base_model(model_dir):
    return load_model(os.path.join(model_dir, "base.pt"))
