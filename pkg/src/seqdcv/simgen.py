"""Synthetic two-block designs with latent factors shared through the SVD.

Recipe for one dataset:

1. draw ``C`` latent columns ``L ~ N(0, I)``, one per shared component pair;
2. build hub-structured correlation matrices for both blocks;
3. draw ``X*_i ~ N(0, Sigma_i)`` and take thin SVDs ``X*_i = U_i D_i V_i'``;
4. overwrite the paired left singular vectors of both blocks with the same
   latent column, rescaled to unit length, and rebuild ``X_i = U_i' D_i V_i'``;
5. set ``beta_i = V_i beta*_i`` and ``y = X1 beta_1 + X2 beta_2 + eps``.

``beta*`` maps a component index (0-based, components sorted by decreasing
singular value) to a coefficient, so ``X_i beta_i = U_i' D_i beta*_i``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from . import seeds
from .errors import InputError, SimulationError

# With unit-variance noise a 0.01 component coefficient sits far below the
# noise floor of the hub design.  This level puts the named scenarios on the
# reference Q^2 scale; see README, "Simulation scale".
DEFAULT_NOISE_SD = 0.015


@dataclass(frozen=True)
class HubSpec:
    """Block-diagonal hub correlation: ``n_groups`` equal groups of ``dim``.

    Within a group the first feature is the hub.  Its correlation with the
    k-th other member decays linearly (or with exponent ``decay_power``) from
    ``rho_hub`` to ``rho_min``; two non-hub members correlate through the hub,
    i.e. by the product of their hub correlations.
    """

    dim: int
    n_groups: int
    rho_hub: float = 0.9
    rho_min: float = 0.1
    decay_power: float = 1.0

    def __post_init__(self):
        if self.dim < 1 or self.n_groups < 1 or self.dim % self.n_groups:
            raise InputError(f"dim={self.dim} is not divisible into {self.n_groups} groups")
        if not 0.0 < self.rho_hub < 1.0 or not 0.0 <= self.rho_min <= self.rho_hub:
            raise InputError("need 0 <= rho_min <= rho_hub < 1")


def _hub_loadings(size: int, spec: HubSpec) -> np.ndarray:
    a = np.ones(size)
    if size == 2:
        a[1] = spec.rho_hub
    elif size > 2:
        t = (np.arange(size - 1) / (size - 2)) ** spec.decay_power
        a[1:] = spec.rho_hub - t * (spec.rho_hub - spec.rho_min)
    return a


def hub_covariance(spec: HubSpec, return_repair: bool = False, floor: float = 1e-8):
    """Hub correlation matrix; optionally also whether eigenvalue repair fired."""
    g = spec.dim // spec.n_groups
    a = _hub_loadings(g, spec)
    block = np.outer(a, a)
    np.fill_diagonal(block, 1.0)
    repaired = False
    w, Q = np.linalg.eigh(block)
    if w.min() < floor:
        if w.min() < -1e-6:
            raise SimulationError(f"hub block is far from PSD (min eigenvalue {w.min():.3g})")
        block = (Q * np.maximum(w, floor)) @ Q.T
        d = np.sqrt(np.diag(block))
        block = block / np.outer(d, d)
        repaired = True
    Sigma = np.kron(np.eye(spec.n_groups), block)
    return (Sigma, repaired) if return_repair else Sigma


@lru_cache(maxsize=8)
def _cached_cholesky(spec: HubSpec) -> np.ndarray:
    return np.linalg.cholesky(hub_covariance(spec))


def draw_gaussian(n: int, Sigma, seed: seeds.SeedLike) -> np.ndarray:
    """``n`` rows i.i.d. ``N(0, Sigma)`` via the Cholesky factor."""
    Sigma = np.asarray(Sigma, dtype=np.float64)
    try:
        Lc = np.linalg.cholesky(Sigma)
    except np.linalg.LinAlgError as err:
        raise SimulationError(f"covariance is not positive definite: {err}") from err
    return _draw_with_factor(n, Lc, seed)


def _draw_with_factor(n: int, Lc: np.ndarray, seed: seeds.SeedLike) -> np.ndarray:
    Zs = seeds.rng(seed).standard_normal((n, Lc.shape[0]))
    return Zs @ Lc.T


def thin_svd(X):
    """Thin SVD ``X = U diag(D) V'`` with ``D`` non-increasing; returns (U, D, V)."""
    X = np.asarray(X, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise InputError("X contains non-finite values")
    try:
        U, D, Vt = np.linalg.svd(X, full_matrices=False)
    except np.linalg.LinAlgError as err:
        raise SimulationError(f"SVD did not converge: {err}") from err
    return U, D, Vt.T


def inject_common_factors(U1, U2, pairs: Sequence[tuple[int, int]], L):
    """Replace paired columns of ``U1`` and ``U2`` by shared latent columns.

    Pair ``c`` overwrites ``U1[:, pairs[c][0]]`` and ``U2[:, pairs[c][1]]`` with
    ``L[:, c] / ||L[:, c]||``.  Inputs are not modified.
    """
    U1 = np.array(U1, dtype=np.float64, copy=True)
    U2 = np.array(U2, dtype=np.float64, copy=True)
    pairs = list(pairs)
    if not pairs:
        return U1, U2
    L = np.asarray(L, dtype=np.float64)
    if L.ndim != 2 or L.shape[0] != U1.shape[0] or L.shape[1] < len(pairs):
        raise InputError("L must have one row per observation and a column per pair")
    if U2.shape[0] != U1.shape[0]:
        raise InputError("U1 and U2 must have the same number of rows")
    for c, (i1, i2) in enumerate(pairs):
        if not (0 <= i1 < U1.shape[1] and 0 <= i2 < U2.shape[1]):
            raise InputError(f"pair {(i1, i2)} is out of range")
        col = L[:, c] / np.linalg.norm(L[:, c])
        U1[:, i1] = col
        U2[:, i2] = col
    return U1, U2


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    n: int = 100
    p: int = 1000
    q: int = 100
    beta1_star: Mapping[int, float] = field(default_factory=dict)
    beta2_star: Mapping[int, float] = field(default_factory=dict)
    shared_columns: tuple[tuple[int, int], ...] = ((0, 0),)
    noise_sd: float = DEFAULT_NOISE_SD
    groups1: int = 4
    groups2: int = 2
    rho_hub: float = 0.9
    rho_min: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "beta1_star", dict(self.beta1_star))
        object.__setattr__(self, "beta2_star", dict(self.beta2_star))
        object.__setattr__(self, "shared_columns",
                           tuple(tuple(int(i) for i in pr) for pr in self.shared_columns))
        k1, k2 = min(self.n, self.p), min(self.n, self.q)
        for idx in self.beta1_star:
            if not 0 <= idx < k1:
                raise InputError(f"beta1_star index {idx} outside 0..{k1 - 1}")
        for idx in self.beta2_star:
            if not 0 <= idx < k2:
                raise InputError(f"beta2_star index {idx} outside 0..{k2 - 1}")
        if self.noise_sd <= 0:
            raise InputError("noise_sd must be positive")

    @property
    def hub1(self) -> HubSpec:
        return HubSpec(self.p, self.groups1, self.rho_hub, self.rho_min)

    @property
    def hub2(self) -> HubSpec:
        return HubSpec(self.q, self.groups2, self.rho_hub, self.rho_min)

    def with_(self, **changes) -> "ScenarioSpec":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["beta1_star"] = {str(k): v for k, v in self.beta1_star.items()}
        d["beta2_star"] = {str(k): v for k, v in self.beta2_star.items()}
        d["shared_columns"] = [list(pr) for pr in self.shared_columns]
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ScenarioSpec":
        d = dict(d)
        d["beta1_star"] = {int(k): float(v) for k, v in d.get("beta1_star", {}).items()}
        d["beta2_star"] = {int(k): float(v) for k, v in d.get("beta2_star", {}).items()}
        d["shared_columns"] = tuple(tuple(pr) for pr in d.get("shared_columns", ()))
        return cls(**d)


SCENARIOS: dict[str, ScenarioSpec] = {
    # null: X2 carries nothing beyond its shared first component
    "1a": ScenarioSpec("1a", beta1_star={0: 0.01}),
    "1b": ScenarioSpec("1b", beta1_star={5: 1.0}),
    "1c": ScenarioSpec("1c", beta1_star={0: 1.0, 1: 1.0}),
    "1d": ScenarioSpec("1d", beta1_star={0: 1.0, 1: 1.0, 2: 1.0, 3: 1.0}),
    # alternative: X2 acts through a component not shared with X1
    "2a": ScenarioSpec("2a", beta1_star={0: 0.01}, beta2_star={0: 0.01},
                       shared_columns=((1, 1),)),
    "2b": ScenarioSpec("2b", beta1_star={0: 0.01}, beta2_star={2: 0.01}),
    "2c": ScenarioSpec("2c", beta1_star={5: 0.01}, beta2_star={2: 0.01}),
}

NULL_SCENARIOS = ("1a", "1b", "1c", "1d")


def scenario(name: str, **overrides) -> ScenarioSpec:
    try:
        base = SCENARIOS[name]
    except KeyError:
        raise InputError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None
    return base.with_(**overrides) if overrides else base


@dataclass(frozen=True)
class SimulatedDataset:
    X1: np.ndarray
    X2: np.ndarray
    y: np.ndarray
    spec: ScenarioSpec
    beta1: np.ndarray
    beta2: np.ndarray
    noise: np.ndarray
    seed: seeds.SeedLike

    def save_csv(self, directory, precision: Optional[int] = None) -> dict[str, Path]:
        from . import io  # local import: io depends on nothing here

        return io.export_dataset(self, directory, precision=precision)


def _beta_star(mapping: Mapping[int, float], k: int) -> np.ndarray:
    b = np.zeros(k)
    for idx, val in mapping.items():
        b[idx] = val
    return b


def build_scenario(spec: ScenarioSpec, seed: seeds.SeedLike) -> SimulatedDataset:
    """Stream layout: latents ``child(seed, 0)``, X1* ``child(seed, 1)``,
    X2* ``child(seed, 2)``, noise ``child(seed, 3)``."""
    n = spec.n
    C = len(spec.shared_columns)
    L = seeds.rng(seeds.child(seed, 0)).standard_normal((n, C))
    try:
        L1 = _cached_cholesky(spec.hub1)
        L2 = _cached_cholesky(spec.hub2)
    except np.linalg.LinAlgError as err:
        raise SimulationError(f"hub covariance is not positive definite: {err}") from err
    U1, D1, V1 = thin_svd(_draw_with_factor(n, L1, seeds.child(seed, 1)))
    U2, D2, V2 = thin_svd(_draw_with_factor(n, L2, seeds.child(seed, 2)))
    U1, U2 = inject_common_factors(U1, U2, spec.shared_columns, L)
    X1 = (U1 * D1) @ V1.T
    X2 = (U2 * D2) @ V2.T
    beta1 = V1 @ _beta_star(spec.beta1_star, D1.size)
    beta2 = V2 @ _beta_star(spec.beta2_star, D2.size)
    eps = spec.noise_sd * seeds.rng(seeds.child(seed, 3)).standard_normal(n)
    y = X1 @ beta1 + X2 @ beta2 + eps
    return SimulatedDataset(X1, X2, y, spec, beta1, beta2, eps, seed)


def gini(values) -> float:
    """Gini coefficient of ``|values|`` (0 = perfectly even, near 1 = sparse)."""
    v = np.sort(np.abs(np.asarray(values, dtype=np.float64)))
    if v.sum() == 0:
        return 0.0
    k = v.size
    ranks = np.arange(1, k + 1)
    return float(2 * np.sum(ranks * v) / (k * v.sum()) - (k + 1) / k)
