"""Two-stage sequential assessment and its Q^2 summaries.

Stage 1 predicts ``y`` from the primary block.  Stage 2 predicts the stage-1
residuals ``y - p1`` from the secondary block, which is the same as fitting
``y`` on the secondary block with ``p1`` as a fixed offset.  With double CV
the residuals are deletion residuals: no observation influenced its own
stage-1 prediction.

All three measures are ratios of sums of squares taken around held-out
training means, so none of them can be negative:

    q2_x1    = sum (p1 - ybar_-j)^2      / sum (y - ybar_-j)^2
    q2_cond  = sum (p2 - rbar_-j)^2      / sum (res - rbar_-j)^2
    q2_joint = sum (p1 + p2 - ybar_-j)^2 / sum (y - ybar_-j)^2

where ``ybar_-j`` comes from the stage-1 fold plan and ``rbar_-j`` (mean
residual over the stage-2 training folds) from the stage-2 plan.
"""
from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import cv, seeds
from .errors import DegenerateResponseError, InputError


class Q2Warning(UserWarning):
    """A Q^2 value is outside the range where it reads as a proportion."""


@dataclass(frozen=True)
class SequentialConfig:
    alpha1: float = 0.0
    alpha2: float = 0.0
    strategy: cv.CvStrategy = field(default_factory=cv.CvStrategy)
    seed: seeds.SeedLike = 0

    def __post_init__(self):
        for a in (self.alpha1, self.alpha2):
            if not 0.0 <= a <= 1.0:
                raise InputError(f"alpha must lie in [0, 1], got {a}")


class ConditionalQ2(NamedTuple):
    value: float  # nan when degenerate
    approx: float  # sum p2^2 / sum res^2, the zero-mean-residual shortcut
    discrepancy: float
    degenerate: bool


@dataclass(frozen=True)
class SequentialResult:
    p1: cv.CvPrediction
    p2: cv.CvPrediction
    q2_x1: float
    q2_cond: float
    q2_joint: float
    q2_cond_approx: float
    press_null: float  # sum (y - ybar_-j)^2
    cvss_1: float  # sum (p1 - ybar_-j)^2
    cvss_2: float  # sum (p2 - rbar_-j)^2
    degenerate_stage2: bool = False

    @property
    def gain(self) -> float:
        """Absolute gain ``q2_joint - q2_x1``."""
        return self.q2_joint - self.q2_x1


def _ratio(num: float, den: float, what: str) -> float:
    if den <= 0.0:
        raise DegenerateResponseError(f"{what}: zero total sum of squares")
    q = num / den
    if q > 1.0:
        warnings.warn(f"{what} = {q:.4f} exceeds 1", Q2Warning, stacklevel=3)
    return q


def _sums(y, p1: cv.CvPrediction):
    y = np.asarray(y, dtype=np.float64)
    ybar = p1.held_out_means()
    return y, ybar, float(np.sum((y - ybar) ** 2))


def q2_primary(y, p1: cv.CvPrediction) -> float:
    y, ybar, press = _sums(y, p1)
    return _ratio(float(np.sum((p1.values - ybar) ** 2)), press, "q2_x1")


def q2_conditional(y, p1: cv.CvPrediction, p2: cv.CvPrediction) -> ConditionalQ2:
    y = np.asarray(y, dtype=np.float64)
    res = y - p1.values
    rbar = p2.held_out_means()
    den = float(np.sum((res - rbar) ** 2))
    den_approx = float(np.sum(res ** 2))
    approx = float(np.sum(p2.values ** 2)) / den_approx if den_approx > 0 else math.nan
    if den <= 1e-24 * max(1.0, float(np.sum(y ** 2))):
        return ConditionalQ2(math.nan, approx, math.nan, True)
    value = _ratio(float(np.sum((p2.values - rbar) ** 2)), den, "q2_cond")
    return ConditionalQ2(value, approx, value - approx, False)


def q2_joint(y, p1: cv.CvPrediction, p2: cv.CvPrediction) -> float:
    y, ybar, press = _sums(y, p1)
    return _ratio(float(np.sum((p1.values + p2.values - ybar) ** 2)), press, "q2_joint")


def q2_from_rearrangement(q2_x1: float, q2_joint_value: float) -> float:
    """``(q2_joint - q2_x1) / (1 - q2_x1)``; nan when ``q2_x1`` is 0 or 1."""
    if q2_x1 <= 0.0 or q2_x1 >= 1.0:
        return math.nan
    return (q2_joint_value - q2_x1) / (1.0 - q2_x1)


def _check_blocks(X1, X2, y):
    X1 = np.asarray(X1, dtype=np.float64)
    X2 = np.asarray(X2, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X1.ndim != 2 or X2.ndim != 2:
        raise InputError("predictor blocks must be two-dimensional")
    if not X1.shape[0] == X2.shape[0] == y.shape[0]:
        raise InputError(
            f"row counts differ: X1 {X1.shape[0]}, X2 {X2.shape[0]}, y {y.shape[0]}")
    return X1, X2, y


def sequential_assess(X1, X2, y, cfg: SequentialConfig) -> SequentialResult:
    """Run both stages and summarize them.

    Stage 1 uses seed stream ``child(cfg.seed, 1)`` and stage 2
    ``child(cfg.seed, 2)``, so the two fold plans are independent.
    """
    X1, X2, y = _check_blocks(X1, X2, y)
    if np.var(y) == 0.0:
        raise DegenerateResponseError("the response is constant")
    s = cfg.strategy
    p1 = cv.cv_predict(X1, y, None, cfg.alpha1, s, seeds.child(cfg.seed, 1))
    q1 = q2_primary(y, p1)
    if q1 <= 0.0:
        warnings.warn("q2_x1 is not positive; the conditional measure is hard to read",
                      Q2Warning, stacklevel=2)
    p2 = cv.cv_predict(X2, y, p1.values, cfg.alpha2, s, seeds.child(cfg.seed, 2))
    cond = q2_conditional(y, p1, p2)
    qj = q2_joint(y, p1, p2)
    ybar = p1.held_out_means()
    return SequentialResult(
        p1=p1, p2=p2, q2_x1=q1, q2_cond=cond.value, q2_joint=qj,
        q2_cond_approx=cond.approx,
        press_null=float(np.sum((y - ybar) ** 2)),
        cvss_1=float(np.sum((p1.values - ybar) ** 2)),
        cvss_2=float(np.sum((p2.values - p2.held_out_means()) ** 2)),
        degenerate_stage2=cond.degenerate,
    )


@dataclass(frozen=True)
class StackResult:
    q2: float
    prediction: cv.CvPrediction
    scaled: bool


def stack_assess(X1, X2, y, alpha: float = 0.0, strategy: cv.CvStrategy = None,
                 seed: seeds.SeedLike = 0, scale: bool = True) -> StackResult:
    """One cross-validated model on the column-wise concatenation ``[X1 | X2]``.

    With ``scale`` every column is standardized over the full sample before
    stacking; without it the columns keep their own units.  Either way the
    penalized fits themselves do not rescale columns, so a block measured on a
    larger scale is penalized less when ``scale`` is off.  Stream
    ``child(seed, 1)`` is used, as for stage 1 of ``sequential_assess``.
    """
    X1, X2, y = _check_blocks(X1, X2, y)
    if np.var(y) == 0.0:
        raise DegenerateResponseError("the response is constant")
    X = np.hstack([X1, X2])
    if scale:
        sd = X.std(axis=0)
        sd[sd == 0.0] = 1.0
        X = (X - X.mean(axis=0)) / sd
    base = strategy if strategy is not None else cv.CvStrategy()
    s = dataclasses.replace(base, standardize=False)
    pred = cv.cv_predict(X, y, None, alpha, s, seeds.child(seed, 1))
    return StackResult(q2_primary(y, pred), pred, scale)
