"""Fold plans and cross-validated prediction vectors.

Double cross-validation: every outer training set picks its own penalty by an
inner K-fold search over a grid computed from that training set, refits on the
whole training set and predicts the held-out fold.  Single cross-validation
picks one penalty by K-fold search on the full sample and returns in-sample
fitted values.

Seed streams (see ``seeds``): ``child(seed, 0)`` draws the outer plan and
``child(seed, 1, j)`` the inner plan of outer fold ``j`` (``j = 0`` is the
single-CV search), so results never depend on the order folds are run in.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from . import penreg, seeds
from .errors import ConvergenceError, DegenerateResponseError, InputError, SeqDCVError

# glmnet's devmax: a lasso path stops once 99.9% of training deviance is explained
DEV_SATURATION = 0.999


class SelectionRule(str, Enum):
    OPT = "opt"
    ONE_SE = "one_se"


class Loops(str, Enum):
    DOUBLE = "double"
    SINGLE = "single"


@dataclass(frozen=True)
class FoldPlan:
    assignments: np.ndarray  # fold label 1..J per observation
    seed: seeds.SeedLike

    @property
    def J(self) -> int:
        return int(self.assignments.max())

    def test_index(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == j)

    def train_index(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != j)


@dataclass(frozen=True)
class CvStrategy:
    loops: Loops = Loops.DOUBLE
    rule: SelectionRule = SelectionRule.OPT
    J: int = 5
    K: int = 5
    n_lambda: int = penreg.N_LAMBDA
    eps_ratio: Optional[float] = None
    standardize: bool = True  # False keeps column scales (used for stacking)

    def __post_init__(self):
        object.__setattr__(self, "loops", Loops(self.loops))
        object.__setattr__(self, "rule", SelectionRule(self.rule))
        if self.J < 2 or self.K < 2:
            raise InputError("J and K must both be at least 2")

    @property
    def label(self) -> str:
        cv = "CV_D" if self.loops is Loops.DOUBLE else "CV_S"
        lam = "lambda_opt" if self.rule is SelectionRule.OPT else "lambda_1se"
        return f"{cv}/{lam}"


@dataclass(frozen=True)
class CvPrediction:
    """Cross-validated predictions of ``y - offset``.

    ``values`` never include the offset.  ``fold_means[j-1]`` is the mean of
    ``y - offset`` over the training part of fold ``j`` (for single CV, the
    full-sample mean repeated).
    """

    values: np.ndarray
    fold_means: np.ndarray
    plan: FoldPlan
    chosen_lambdas: np.ndarray
    loops: Loops = Loops.DOUBLE
    lambda_index: np.ndarray = field(default=None, repr=False)

    def held_out_means(self) -> np.ndarray:
        """Per-observation mean of the training set that predicted it."""
        return self.fold_means[self.plan.assignments - 1]


@dataclass(frozen=True)
class InnerSearch:
    grid: np.ndarray
    cv_error: np.ndarray  # mean held-out MSE per grid value
    cv_se: np.ndarray  # standard error of that mean over the K folds
    index_opt: int
    index_1se: int

    def index(self, rule: SelectionRule) -> int:
        return self.index_opt if SelectionRule(rule) is SelectionRule.OPT else self.index_1se


def make_folds(n: int, J: int, seed: seeds.SeedLike) -> FoldPlan:
    """Balanced random split of ``n`` observations into ``J`` folds."""
    if not 2 <= J <= n:
        raise InputError(f"need 2 <= J <= n, got J={J}, n={n}")
    labels = np.arange(n) % J + 1
    return FoldPlan(seeds.rng(seed).permutation(labels), seed)


def _target(y, offset):
    return y if offset is None else y - offset


def inner_search(X, y, offset, alpha: float, K: int, seed: seeds.SeedLike,
                 n_lambda: int = penreg.N_LAMBDA, eps_ratio: Optional[float] = None,
                 standardize: bool = True) -> InnerSearch:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    if n < 2 * K:
        raise InputError(f"training set of {n} is too small for {K} inner folds")
    grid = penreg.lambda_grid(X, y, offset, alpha, n_lambda, eps_ratio, standardize)
    target = _target(y, offset)
    plan = make_folds(n, K, seed)
    mse = np.empty((K, grid.size))
    for k in range(1, K + 1):
        tr, te = plan.train_index(k), plan.test_index(k)
        off = None if offset is None else offset[tr]
        pred = penreg.path_predict(X[tr], y[tr], off, X[te], grid, alpha,
                                   devmax=DEV_SATURATION, standardize=standardize)
        mse[k - 1] = np.mean((target[te, None] - pred) ** 2, axis=0)
    cvm = mse.mean(axis=0)
    cvse = mse.std(axis=0, ddof=1) / math.sqrt(K)
    i_opt = int(np.argmin(cvm))  # first minimum = largest lambda among ties
    i_1se = int(np.flatnonzero(cvm <= cvm[i_opt] + cvse[i_opt])[0])
    return InnerSearch(grid, cvm, cvse, i_opt, i_1se)


def inner_select_lambda(X, y, offset, alpha: float, K: int,
                        rule: SelectionRule = SelectionRule.OPT,
                        seed: seeds.SeedLike = 0, n_lambda: int = penreg.N_LAMBDA,
                        eps_ratio: Optional[float] = None, standardize: bool = True) -> float:
    """Penalty chosen by K-fold cross-validation on one training set."""
    search = inner_search(X, y, offset, alpha, K, seed, n_lambda, eps_ratio, standardize)
    return float(search.grid[search.index(rule)])


def _refit_predict(X_tr, y_tr, off_tr, X_te, search: InnerSearch, idx: int, alpha: float,
                   standardize: bool = True):
    return penreg.path_predict(X_tr, y_tr, off_tr, X_te, search.grid[: idx + 1], alpha,
                               devmax=DEV_SATURATION, standardize=standardize)[:, -1]


def _annotate(err: SeqDCVError, where: str) -> SeqDCVError:
    msg = f"{where}: {err}"
    if isinstance(err, ConvergenceError):
        return ConvergenceError(msg, err.gap)
    return type(err)(msg)


def _validate(X, y, offset, J):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InputError("X must be two-dimensional")
    n = X.shape[0]
    y = penreg._as_vector(y, n, "y")
    if offset is not None:
        offset = penreg._as_vector(offset, n, "offset")
    if n < 2 * J:
        raise InputError(f"n={n} is too small for {J} folds")
    return X, y, offset


def double_cv_predict(X, y, offset, alpha: float, strategy: CvStrategy,
                      seed: seeds.SeedLike) -> CvPrediction:
    """Out-of-fold predictions of ``y - offset`` from nested cross-validation.

    An outer training set whose response is constant gets the intercept-only
    prediction and an infinite chosen penalty.
    """
    X, y, offset = _validate(X, y, offset, strategy.J)
    n = X.shape[0]
    plan = make_folds(n, strategy.J, seeds.child(seed, 0))
    target = _target(y, offset)
    values = np.empty(n)
    means = np.empty(plan.J)
    lams = np.empty(plan.J)
    index = np.full(plan.J, -1)
    for j in range(1, plan.J + 1):
        tr, te = plan.train_index(j), plan.test_index(j)
        off = None if offset is None else offset[tr]
        means[j - 1] = target[tr].mean()
        try:
            search = inner_search(X[tr], y[tr], off, alpha, strategy.K,
                                  seeds.child(seed, 1, j), strategy.n_lambda,
                                  strategy.eps_ratio, strategy.standardize)
        except DegenerateResponseError:
            values[te] = means[j - 1]
            lams[j - 1] = math.inf
            continue
        except SeqDCVError as err:
            raise _annotate(err, f"outer fold {j}") from err
        idx = search.index(strategy.rule)
        try:
            values[te] = _refit_predict(X[tr], y[tr], off, X[te], search, idx, alpha,
                                        strategy.standardize)
        except SeqDCVError as err:
            raise _annotate(err, f"outer fold {j} refit") from err
        lams[j - 1] = search.grid[idx]
        index[j - 1] = idx
    return CvPrediction(values, means, plan, lams, Loops.DOUBLE, index)


def single_cv_predict(X, y, offset, alpha: float, strategy: CvStrategy,
                      seed: seeds.SeedLike) -> CvPrediction:
    """In-sample fitted values at a penalty chosen by K-fold search."""
    X, y, offset = _validate(X, y, offset, strategy.K)
    n = X.shape[0]
    target = _target(y, offset)
    inner_seed = seeds.child(seed, 1, 0)
    plan = make_folds(n, strategy.K, inner_seed)
    means = np.full(plan.J, target.mean())
    try:
        search = inner_search(X, y, offset, alpha, strategy.K, inner_seed,
                              strategy.n_lambda, strategy.eps_ratio, strategy.standardize)
    except DegenerateResponseError:
        return CvPrediction(np.full(n, target.mean()), means, plan,
                            np.array([math.inf]), Loops.SINGLE, np.array([-1]))
    idx = search.index(strategy.rule)
    values = _refit_predict(X, y, offset, X, search, idx, alpha, strategy.standardize)
    return CvPrediction(values, means, plan, np.array([search.grid[idx]]), Loops.SINGLE,
                        np.array([idx]))


def cv_predict(X, y, offset, alpha: float, strategy: CvStrategy,
               seed: seeds.SeedLike) -> CvPrediction:
    if strategy.loops is Loops.DOUBLE:
        return double_cv_predict(X, y, offset, alpha, strategy, seed)
    return single_cv_predict(X, y, offset, alpha, strategy, seed)
