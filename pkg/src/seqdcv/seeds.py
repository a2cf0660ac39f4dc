"""Hierarchical seed streams.

A seed is either a non-negative int or a tuple ``(root, k1, k2, ...)``.  The
stream for a tuple is ``SeedSequence(root, spawn_key=(k1, k2, ...))``, so
child streams never collide with their parent and derived seeds do not depend
on how many other streams were drawn before them.
"""
from __future__ import annotations

from typing import Tuple, Union

import numpy as np

SeedLike = Union[int, Tuple[int, ...]]


def as_tuple(seed: SeedLike) -> tuple[int, ...]:
    if isinstance(seed, (tuple, list)):
        out = tuple(int(s) for s in seed)
    else:
        out = (int(seed),)
    if not out or any(s < 0 for s in out):
        raise ValueError(f"seeds must be non-empty and non-negative, got {seed!r}")
    return out


def child(seed: SeedLike, *keys: int) -> tuple[int, ...]:
    return as_tuple(seed) + tuple(int(k) for k in keys)


def rng(seed: SeedLike) -> np.random.Generator:
    root, *path = as_tuple(seed)
    return np.random.default_rng(np.random.SeedSequence(root, spawn_key=tuple(path)))
