"""Monte Carlo driver: scenarios x strategies -> trial rows -> summary rows.

Trial ``t`` of a run with master seed ``s`` simulates from ``child(s, t, 0)``,
cross-validates with ``child(s, t, 1)`` and permutes with ``child(s, t, 2)``.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from . import cv, permtest, seeds, simgen
from .errors import InputError, SeqDCVError
from .seqassess import Q2Warning, SequentialConfig, sequential_assess

STRATEGIES: dict[str, cv.CvStrategy] = {
    "CV_D/lambda_opt": cv.CvStrategy(cv.Loops.DOUBLE, cv.SelectionRule.OPT),
    "CV_D/lambda_1se": cv.CvStrategy(cv.Loops.DOUBLE, cv.SelectionRule.ONE_SE),
    "CV_S/lambda_opt": cv.CvStrategy(cv.Loops.SINGLE, cv.SelectionRule.OPT),
}
THRESHOLD = 0.05
SUMMARY_COLUMNS = ("scenario", "strategy", "alpha", "n_trials", "n_failed",
                   "q2_x1_mean", "q2_x1_sd", "q2_cond_mean", "q2_cond_sd",
                   "q2_joint_mean", "q2_joint_sd", "rejection", "single_trial")
DESK_TRIALS = 100
DESK_PERMUTATIONS = 100
FULL_TRIALS = 500
FULL_PERMUTATIONS = 200


def strategy(label: str) -> cv.CvStrategy:
    try:
        return STRATEGIES[label]
    except KeyError:
        raise InputError(f"unknown strategy {label!r}; choose from {sorted(STRATEGIES)}") from None


@dataclass(frozen=True)
class TrialResult:
    scenario: str
    strategy: str
    alpha: float
    trial: int
    q2_x1: float
    q2_cond: float
    q2_joint: float
    p_value: float  # nan when no permutations were run
    seed: tuple

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seed"] = list(self.seed)
        return d


@dataclass(frozen=True)
class TrialFailure:
    trial: int
    error: str
    message: str


@dataclass
class TrialBatch:
    results: list[TrialResult] = field(default_factory=list)
    failures: list[TrialFailure] = field(default_factory=list)

    def __iter__(self):
        return iter(self.results)

    def __len__(self):
        return len(self.results)

    @property
    def n_failed(self) -> int:
        return len(self.failures)


@dataclass(frozen=True)
class MeasureSummary:
    mean: float
    sd: float


@dataclass(frozen=True)
class AggregateRow:
    scenario: str
    strategy: str
    alpha: float
    n_trials: int
    q2_x1: MeasureSummary
    q2_cond: MeasureSummary
    q2_joint: MeasureSummary
    rejection: float  # share of p-values below THRESHOLD, nan without a test
    single_trial: bool = False  # sd fields are 0 by convention
    n_failed: int = 0

    def flat(self) -> dict:
        values = (self.scenario, self.strategy, self.alpha, self.n_trials, self.n_failed,
                  self.q2_x1.mean, self.q2_x1.sd, self.q2_cond.mean, self.q2_cond.sd,
                  self.q2_joint.mean, self.q2_joint.sd, self.rejection, self.single_trial)
        return dict(zip(SUMMARY_COLUMNS, values))


def run_one(spec: simgen.ScenarioSpec, cfg: SequentialConfig, label: str, t: int,
            M: int, master: seeds.SeedLike) -> TrialResult:
    """Trial ``t`` on its own; ``cfg.strategy`` is replaced by ``label``."""
    data = simgen.build_scenario(spec, seeds.child(master, t, 0))
    tcfg = SequentialConfig(cfg.alpha1, cfg.alpha2, strategy(label), seeds.child(master, t, 1))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", Q2Warning)
        res = sequential_assess(data.X1, data.X2, data.y, tcfg)
        p = math.nan
        if M > 0:
            p = permtest.permutation_test(data.X1, data.X2, data.y, tcfg, M,
                                          seeds.child(master, t, 2), workers=1,
                                          observed=res).p_value
    return TrialResult(spec.name, label, float(cfg.alpha1), t, res.q2_x1, res.q2_cond,
                       res.q2_joint, p, seeds.child(master, t))


def _run_chunk(args):
    spec, cfg, label, ts, M, master = args
    out = []
    for t in ts:
        try:
            out.append(run_one(spec, cfg, label, t, M, master))
        except SeqDCVError as err:
            out.append(TrialFailure(t, type(err).__name__, str(err)))
    return out


def run_trials(spec: simgen.ScenarioSpec, cfg: SequentialConfig, label: str,
               n_trials: int = DESK_TRIALS, M: int = DESK_PERMUTATIONS,
               master: seeds.SeedLike = 0, workers: Optional[int] = None,
               trials: Optional[Sequence[int]] = None) -> TrialBatch:
    """Run trials ``0..n_trials-1`` (or the explicit ``trials``).

    Failing trials are kept in ``failures`` and left out of ``results``.
    """
    strategy(label)
    if n_trials < 1:
        raise InputError("n_trials must be at least 1")
    if M < 0:
        raise InputError("M must be non-negative")
    ts = list(range(n_trials)) if trials is None else [int(t) for t in trials]
    workers = permtest.worker_count() if workers is None else int(workers)
    if workers <= 1 or len(ts) == 1:
        rows = _run_chunk((spec, cfg, label, ts, M, master))
    else:
        chunks = [ts[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_run_chunk, [(spec, cfg, label, c, M, master) for c in chunks if c])
            rows = [r for part in parts for r in part]
    rows.sort(key=lambda r: r.trial)
    batch = TrialBatch()
    for r in rows:
        (batch.failures if isinstance(r, TrialFailure) else batch.results).append(r)
    return batch


def _summary(values) -> MeasureSummary:
    v = np.asarray(values, dtype=np.float64)
    v = v[~np.isnan(v)]
    if v.size == 0:
        return MeasureSummary(math.nan, math.nan)
    sd = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
    return MeasureSummary(float(np.mean(v)), sd)


def rejection_rate(p_values: Iterable[float], threshold: float = THRESHOLD) -> float:
    p = np.asarray(list(p_values), dtype=np.float64)
    p = p[~np.isnan(p)]
    return float(np.mean(p < threshold)) if p.size else math.nan


def aggregate(results: Iterable[TrialResult], n_failed: int = 0) -> AggregateRow:
    if isinstance(results, TrialBatch):
        n_failed = results.n_failed
        results = results.results
    results = list(results)
    if not results:
        raise InputError("cannot aggregate an empty set of trials")
    first = results[0]
    return AggregateRow(
        scenario=first.scenario, strategy=first.strategy, alpha=first.alpha,
        n_trials=len(results),
        q2_x1=_summary([r.q2_x1 for r in results]),
        q2_cond=_summary([r.q2_cond for r in results]),
        q2_joint=_summary([r.q2_joint for r in results]),
        rejection=rejection_rate(r.p_value for r in results),
        single_trial=len(results) == 1, n_failed=n_failed)
