"""Permutation test for the added predictive ability of the second block.

Each replicate permutes the stage-1 deletion residuals, rebuilds a null
response ``y* = p1 + res[perm]`` and reruns both stages from scratch, fold
plans included.  Replicate ``m`` draws its permutation from stream
``child(seed, m, 0)`` and its fold plans from ``child(seed, m, 1)``, so
replicates can run in any order or process and adding replicates never
changes earlier ones.
"""
from __future__ import annotations

import dataclasses
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from . import seeds
from .errors import DegenerateResponseError, InputError
from .seqassess import Q2Warning, SequentialConfig, SequentialResult, sequential_assess

WORKERS_ENV = "SEQDCV_WORKERS"


class Statistic(str, Enum):
    COND = "q2_cond"
    GAIN = "gain"  # q2_joint - q2_x1


def _stat(res: SequentialResult, which: Statistic) -> float:
    return res.q2_cond if which is Statistic.COND else res.gain


@dataclass(frozen=True)
class PermutationResult:
    observed: float
    null_values: np.ndarray
    p_value: float
    M: int
    seed: seeds.SeedLike
    statistic: Statistic = Statistic.COND
    observed_cond: float = math.nan
    observed_gain: float = math.nan
    null_cond: Optional[np.ndarray] = None
    null_gain: Optional[np.ndarray] = None
    smoothed: bool = False

    def p_value_for(self, statistic: Statistic, smooth: bool = False) -> float:
        """Recompute the p-value from the stored nulls of either statistic."""
        if Statistic(statistic) is Statistic.COND:
            return p_value(self.observed_cond, self.null_cond, smooth)
        return p_value(self.observed_gain, self.null_gain, smooth)


def p_value(observed: float, null_values, smooth: bool = False) -> float:
    """Share of null values strictly above ``observed``.

    ``smooth`` gives ``(1 + #) / (1 + M)`` instead.  A nan null value never
    counts as an exceedance; a nan observed value gives a nan p-value.
    """
    null_values = np.asarray(null_values, dtype=np.float64)
    M = null_values.size
    if M == 0:
        raise InputError("no null values")
    if math.isnan(observed):
        return math.nan
    hits = int(np.sum(null_values > observed))
    return (1 + hits) / (1 + M) if smooth else hits / M


def worker_count(default: int = 1) -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None or raw.strip() == "":
        return default
    try:
        n = int(raw)
    except ValueError:
        raise InputError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise InputError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}")
    return n


def draw_permutation(n: int, seed: seeds.SeedLike, m: int) -> np.ndarray:
    return seeds.rng(seeds.child(seed, m, 0)).permutation(n)


def _replicate(X1, X2, p1, res, cfg: SequentialConfig, seed, m: int, perm) -> tuple[float, float]:
    y_star = p1 + res[perm]
    rep_cfg = dataclasses.replace(cfg, seed=seeds.child(seed, m, 1))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", Q2Warning)
        try:
            out = sequential_assess(X1, X2, y_star, rep_cfg)
        except DegenerateResponseError as err:
            raise DegenerateResponseError(f"permutation replicate {m}: {err}") from err
    return out.q2_cond, out.gain


def _run_chunk(args):
    X1, X2, p1, res, cfg, seed, items = args
    return [(m,) + _replicate(X1, X2, p1, res, cfg, seed, m, perm) for m, perm in items]


def permutation_test(X1, X2, y, cfg: SequentialConfig, M: int, seed: seeds.SeedLike = 0,
                     statistic: Statistic = Statistic.COND, smooth: bool = False,
                     permutations: Optional[Sequence[Sequence[int]]] = None,
                     workers: Optional[int] = None,
                     observed: Optional[SequentialResult] = None) -> PermutationResult:
    """Permutation p-value for H0: the second block adds nothing.

    ``permutations`` (M rows) overrides the drawn permutations; ``observed``
    reuses an existing real-data assessment run with the same ``cfg``.
    ``workers`` defaults to the ``SEQDCV_WORKERS`` environment variable.
    """
    statistic = Statistic(statistic)
    if int(M) != M or M < 1:
        raise InputError(f"M must be a positive integer, got {M}")
    M = int(M)
    if observed is None:
        observed = sequential_assess(X1, X2, y, cfg)
    X1 = np.asarray(X1, dtype=np.float64)
    X2 = np.asarray(X2, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    n = y.size
    p1 = observed.p1.values
    res = y - p1
    if permutations is None:
        perms = [draw_permutation(n, seed, m) for m in range(M)]
    else:
        perms = [np.asarray(pm, dtype=np.int64) for pm in permutations]
        if len(perms) != M:
            raise InputError(f"expected {M} permutations, got {len(perms)}")
        for pm in perms:
            if pm.shape != (n,) or not np.array_equal(np.sort(pm), np.arange(n)):
                raise InputError("each permutation must reorder 0..n-1")

    items = list(enumerate(perms))
    workers = worker_count() if workers is None else int(workers)
    if workers <= 1 or M == 1:
        rows = _run_chunk((X1, X2, p1, res, cfg, seed, items))
    else:
        chunks = [items[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_run_chunk, [(X1, X2, p1, res, cfg, seed, c) for c in chunks if c])
            rows = [row for part in parts for row in part]
    rows.sort(key=lambda r: r[0])
    null_cond = np.array([r[1] for r in rows])
    null_gain = np.array([r[2] for r in rows])

    obs = _stat(observed, statistic)
    null = null_cond if statistic is Statistic.COND else null_gain
    return PermutationResult(
        observed=obs, null_values=null, p_value=p_value(obs, null, smooth), M=M,
        seed=seed, statistic=statistic, observed_cond=observed.q2_cond,
        observed_gain=observed.gain, null_cond=null_cond, null_gain=null_gain,
        smoothed=smooth)
