"""Shared builders for randomized test instances."""

import numpy as np

from hopeq.network import HAM, Architecture, dense_wtilde
from hopeq.training import xavier_init


def spawn_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def contractive_model(seed: int, sizes, target: float, variant: str = HAM):
    """Xavier init rescaled so ||W~||_2 == target; target < 1 makes the HAM
    map a contraction (max rho' = 1 for the shifted sigmoid)."""
    arch = Architecture(tuple(int(n) for n in sizes))
    p = xavier_init(arch, seed, variant)
    norm = np.linalg.norm(dense_wtilde(p), 2)
    for b in p.blocks:
        b *= target / norm
    return p


def random_sizes(rng: np.random.Generator, caps) -> tuple[int, ...]:
    return tuple(int(rng.integers(2, cap + 1)) for cap in caps)
