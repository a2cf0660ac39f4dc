"""Command implementations shared by the HTTP service and the CLI.

Each function takes plain values and returns a report dict that serializes
deterministically with ``io.dumps``.  Seed layout for a run seeded with ``S``:
cross-validation uses ``child(S, 1)`` and permutations ``child(S, 2)``.
"""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from . import cv, harness, io, permtest, seeds, simgen
from .errors import InputError
from .seqassess import (Q2Warning, SequentialConfig, q2_primary, sequential_assess,
                        stack_assess as _stack)


@dataclass
class SimulateConfig:
    scenario: str
    seed: int = 0
    out: str = "."
    n: Optional[int] = None
    p: Optional[int] = None
    q: Optional[int] = None
    noise_sd: Optional[float] = None
    precision: Optional[int] = None


def simulate(cfg: SimulateConfig) -> dict:
    overrides = {k: getattr(cfg, k) for k in ("n", "p", "q", "noise_sd")
                 if getattr(cfg, k) is not None}
    spec = simgen.scenario(cfg.scenario, **overrides)
    ds = simgen.build_scenario(spec, cfg.seed)
    paths = io.export_dataset(ds, cfg.out, cfg.precision)
    return {
        "spec_version": io.SPEC_VERSION, "command": "simulate", "config": asdict(cfg),
        "scenario": spec.to_dict(),
        "files": {k: str(v) for k, v in sorted(paths.items())},
        "shape": {"n": spec.n, "p": spec.p, "q": spec.q},
    }


@dataclass
class AssessConfig:
    x1: str
    x2: str
    y: str
    alpha: float = 0.0
    alpha2: Optional[float] = None
    strategy: str = "double"
    rule: str = "opt"
    J: int = 5
    K: int = 5
    perms: int = 0
    seed: int = 0
    log_y: bool = False
    reverse: bool = False
    statistic: str = "q2_cond"
    smooth: bool = False

    def cv_strategy(self) -> cv.CvStrategy:
        try:
            return cv.CvStrategy(cv.Loops(self.strategy), cv.SelectionRule(self.rule),
                                 self.J, self.K)
        except ValueError as err:
            raise InputError(str(err)) from None


def _load(cfg) -> io.Dataset:
    return io.load_dataset(io.DatasetFiles(Path(cfg.x1), Path(cfg.x2), Path(cfg.y), cfg.log_y))


def _cv_block(pred: cv.CvPrediction) -> dict:
    return {
        "loops": pred.loops.value,
        "chosen_lambdas": pred.chosen_lambdas,
        "fold_assignments": pred.plan.assignments,
        "fold_means": pred.fold_means,
    }


def assess(cfg: AssessConfig) -> dict:
    """Sequential assessment, plus a permutation test when ``perms > 0``."""
    if cfg.perms < 0:
        raise InputError("perms must be non-negative")
    data = _load(cfg)
    X1, X2 = (data.X2, data.X1) if cfg.reverse else (data.X1, data.X2)
    names = ("x2", "x1") if cfg.reverse else ("x1", "x2")
    alpha2 = cfg.alpha if cfg.alpha2 is None else cfg.alpha2
    strategy = cfg.cv_strategy()
    cv_seed = seeds.child(cfg.seed, 1)
    scfg = SequentialConfig(cfg.alpha, alpha2, strategy, cv_seed)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", Q2Warning)
        res = sequential_assess(X1, X2, data.y, scfg)
    result = {
        "q2_primary": res.q2_x1,
        "q2_secondary_given_primary": res.q2_cond,
        "q2_joint": res.q2_joint,
        "q2_cond_approx": res.q2_cond_approx,
        "gain": res.gain,
        "stage2_degenerate": res.degenerate_stage2,
    }
    report = {
        "spec_version": io.SPEC_VERSION, "command": "assess", "config": asdict(cfg),
        "data": {"n": int(data.y.size), "primary": names[0], "secondary": names[1],
                 "p_primary": int(X1.shape[1]), "p_secondary": int(X2.shape[1])},
        "result": result,
        "provenance": {
            "strategy": strategy.label,
            "seed_streams": {"cv": list(cv_seed)},
            "stage1": _cv_block(res.p1), "stage2": _cv_block(res.p2),
        },
        "warnings": [str(w.message) for w in caught if issubclass(w.category, Q2Warning)],
    }
    if cfg.perms > 0:
        perm_seed = seeds.child(cfg.seed, 2)
        pt = permtest.permutation_test(X1, X2, data.y, scfg, cfg.perms, perm_seed,
                                       statistic=cfg.statistic, smooth=cfg.smooth,
                                       observed=res)
        result["p_value"] = pt.p_value
        report["provenance"]["seed_streams"]["permutation"] = list(perm_seed)
        report["permutation"] = {
            "M": pt.M, "statistic": pt.statistic.value, "smoothed": pt.smoothed,
            "observed": pt.observed, "null_values": pt.null_values,
            "p_value_q2_cond": pt.p_value_for(permtest.Statistic.COND, cfg.smooth),
            "p_value_gain": pt.p_value_for(permtest.Statistic.GAIN, cfg.smooth),
        }
    return report


@dataclass
class StackConfig:
    x1: str
    x2: str
    y: str
    alpha: float = 0.0
    strategy: str = "double"
    rule: str = "opt"
    J: int = 5
    K: int = 5
    seed: int = 0
    log_y: bool = False
    scale: bool = True


def stack_assess(cfg: StackConfig) -> dict:
    """Stacked-source Q^2 next to each single-source Q^2 on the same folds."""
    data = _load(cfg)
    strategy = AssessConfig("", "", "", strategy=cfg.strategy, rule=cfg.rule,
                            J=cfg.J, K=cfg.K).cv_strategy()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", Q2Warning)
        st = _stack(data.X1, data.X2, data.y, cfg.alpha, strategy, cfg.seed, cfg.scale)
        stream = seeds.child(cfg.seed, 1)
        single = {}
        for name, X in (("x1", data.X1), ("x2", data.X2)):
            pred = cv.cv_predict(X, data.y, None, cfg.alpha, strategy, stream)
            single[name] = q2_primary(data.y, pred)
    best = max(single.values())
    return {
        "spec_version": io.SPEC_VERSION, "command": "stack-assess", "config": asdict(cfg),
        "data": {"n": int(data.y.size), "p_x1": int(data.X1.shape[1]),
                 "p_x2": int(data.X2.shape[1])},
        "result": {"q2_stacked": st.q2, "q2_x1_only": single["x1"],
                   "q2_x2_only": single["x2"], "stack_below_best_single": bool(st.q2 < best)},
        "provenance": {"strategy": strategy.label, "seed_streams": {"cv": list(stream)},
                       "stack": _cv_block(st.prediction)},
    }


@dataclass
class MonteCarloConfig:
    scenario: str
    trials: int = harness.DESK_TRIALS
    perms: int = harness.DESK_PERMUTATIONS
    alpha: float = 0.0
    strategies: Sequence[str] = field(default_factory=lambda: ["CV_D/lambda_opt"])
    seed: int = 0
    n: Optional[int] = None
    p: Optional[int] = None
    q: Optional[int] = None
    noise_sd: Optional[float] = None
    full_scale: bool = False
    workers: Optional[int] = None  # None reads SEQDCV_WORKERS; never changes results


def montecarlo(cfg: MonteCarloConfig) -> dict:
    trials = harness.FULL_TRIALS if cfg.full_scale else cfg.trials
    perms = harness.FULL_PERMUTATIONS if cfg.full_scale else cfg.perms
    overrides = {k: getattr(cfg, k) for k in ("n", "p", "q", "noise_sd")
                 if getattr(cfg, k) is not None}
    spec = simgen.scenario(cfg.scenario, **overrides)
    labels = list(cfg.strategies)
    if not labels:
        raise InputError("at least one strategy is required")
    for label in labels:
        harness.strategy(label)
    sc = SequentialConfig(cfg.alpha, cfg.alpha)
    rows, trial_rows, failures = [], [], []
    for k, label in enumerate(labels):
        # strategies share the simulated data: the master seed is the same
        batch = harness.run_trials(spec, sc, label, trials, perms, cfg.seed, cfg.workers)
        trial_rows += [r.to_dict() for r in batch.results]
        failures += [dict(asdict(f), strategy=label) for f in batch.failures]
        if batch.results:
            rows.append(harness.aggregate(batch).flat())
    config = asdict(cfg)
    config.pop("workers")
    config["strategies"] = labels
    return {
        "spec_version": io.SPEC_VERSION, "command": "montecarlo", "config": config,
        "scenario": spec.to_dict(), "effective": {"trials": trials, "perms": perms},
        "rows": rows, "trials": trial_rows, "failures": failures,
    }


def report(reports: Sequence[dict], fmt: str = "json") -> str:
    """Summary table (one row per scenario x strategy) from montecarlo reports."""
    rows = []
    for rep in reports:
        if rep.get("command") != "montecarlo":
            raise InputError("report expects montecarlo output files")
        # keys come back sorted from JSON; restore the summary column order
        rows.extend({c: row.get(c) for c in harness.SUMMARY_COLUMNS} for row in rep["rows"])
    if fmt == "csv":
        return io.rows_to_csv(rows)
    if fmt == "json":
        return io.dumps({"spec_version": io.SPEC_VERSION, "rows": rows})
    raise InputError(f"unknown format {fmt!r}; use csv or json")


COMMANDS = {
    "simulate": (SimulateConfig, simulate),
    "assess": (AssessConfig, assess),
    "stack-assess": (StackConfig, stack_assess),
    "montecarlo": (MonteCarloConfig, montecarlo),
}


def rerun(previous: dict) -> dict:
    """Repeat the command recorded in a report with its embedded config."""
    try:
        cls, fn = COMMANDS[previous["command"]]
        return fn(cls(**previous["config"]))
    except (KeyError, TypeError) as err:
        raise InputError(f"not a rerunnable report: {err}") from None
