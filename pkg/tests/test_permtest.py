import dataclasses
import math

import numpy as np
import pytest

from seqdcv import permtest, seeds
from seqdcv.errors import DegenerateResponseError, InputError
from seqdcv.permtest import Statistic
from seqdcv.seqassess import SequentialConfig, sequential_assess


def _small(rng, n=40, p=30, q=8, signal2=0.0):
    X1 = rng.normal(size=(n, p))
    X2 = rng.normal(size=(n, q))
    y = X1[:, :2] @ np.array([1.0, 1.0]) + signal2 * X2[:, 0] + 0.7 * rng.normal(size=n)
    return X1, X2, y


CFG = SequentialConfig(seed=5)


def test_p_value_formula():
    null = np.array([0.1, 0.5, 0.5, 0.9])
    assert permtest.p_value(0.5, null) == 0.25  # strict inequality
    assert permtest.p_value(0.5, null, smooth=True) == 2 / 5
    assert permtest.p_value(1.0, null) == 0.0
    assert permtest.p_value(0.2, [np.nan, 0.3]) == 0.5
    assert math.isnan(permtest.p_value(np.nan, null))
    with pytest.raises(InputError):
        permtest.p_value(0.1, [])


def test_identity_permutation_reruns_original(rng):
    X1, X2, y = _small(rng)
    res = permtest.permutation_test(X1, X2, y, CFG, 1, seed=9,
                                    permutations=[np.arange(y.size)])
    rerun = sequential_assess(X1, X2, y, dataclasses.replace(CFG, seed=seeds.child(9, 0, 1)))
    p1 = sequential_assess(X1, X2, y, CFG).p1.values
    y_star = p1 + (y - p1)
    assert np.allclose(y_star, y, rtol=0, atol=1e-12)
    assert res.null_values[0] == pytest.approx(rerun.q2_cond, abs=1e-9)
    assert res.p_value in (0.0, 1.0)
    assert res.null_values.size == res.M == 1


def test_permuted_response_keeps_its_sum(rng):
    X1, X2, y = _small(rng)
    p1 = sequential_assess(X1, X2, y, CFG).p1.values
    res = y - p1
    for m in range(20):
        perm = permtest.draw_permutation(y.size, 3, m)
        y_star = p1 + res[perm]
        assert math.fsum(y_star) == pytest.approx(math.fsum(y), abs=1e-11)
        assert sorted(y_star - p1) == pytest.approx(sorted(res), abs=1e-15)


def test_stored_nulls_reproduce_p_value(rng):
    X1, X2, y = _small(rng, signal2=0.5)
    out = permtest.permutation_test(X1, X2, y, CFG, 12, seed=1)
    assert out.null_values.size == 12
    assert out.p_value == np.sum(out.null_values > out.observed) / 12
    assert out.p_value_for(Statistic.GAIN) == np.sum(out.null_gain > out.observed_gain) / 12
    gain = permtest.permutation_test(X1, X2, y, CFG, 12, seed=1, statistic="gain")
    assert np.array_equal(gain.null_values, out.null_gain)


def test_parallel_equals_serial(rng):
    X1, X2, y = _small(rng)
    a = permtest.permutation_test(X1, X2, y, CFG, 6, seed=2, workers=1)
    b = permtest.permutation_test(X1, X2, y, CFG, 6, seed=2, workers=3)
    assert np.array_equal(a.null_values, b.null_values)
    assert np.array_equal(a.null_gain, b.null_gain)


def test_worker_env(monkeypatch, rng):
    monkeypatch.setenv(permtest.WORKERS_ENV, "2")
    assert permtest.worker_count() == 2
    monkeypatch.setenv(permtest.WORKERS_ENV, "zero")
    with pytest.raises(InputError):
        permtest.worker_count()
    monkeypatch.setenv(permtest.WORKERS_ENV, "0")
    with pytest.raises(InputError):
        permtest.worker_count()


def test_more_replicates_extend_earlier_ones(rng):
    X1, X2, y = _small(rng)
    a = permtest.permutation_test(X1, X2, y, CFG, 3, seed=4)
    b = permtest.permutation_test(X1, X2, y, CFG, 5, seed=4)
    assert np.array_equal(a.null_values, b.null_values[:3])


def test_signal_gives_small_p_value(rng):
    X1, X2, y = _small(rng, signal2=2.0)
    assert permtest.permutation_test(X1, X2, y, CFG, 20, seed=0).p_value == 0.0


def test_statistics_share_replicates(rng):
    # Both nulls come from the same refitted replicates, so they move together.
    # They are not interchangeable: the gain is also scaled by each replicate's
    # own 1 - q2_x1, which is why only a positive association is asserted.
    for t in range(3):
        X1, X2, y = _small(rng, signal2=0.3 * t)
        out = permtest.permutation_test(X1, X2, y, CFG, 20, seed=t)
        assert np.corrcoef(out.null_cond, out.null_gain)[0, 1] > 0


def test_argument_checks(rng):
    X1, X2, y = _small(rng)
    with pytest.raises(InputError):
        permtest.permutation_test(X1, X2, y, CFG, 0)
    with pytest.raises(InputError):
        permtest.permutation_test(X1, X2, y, CFG, 1, permutations=[np.zeros(y.size, int)])
    with pytest.raises(InputError):
        permtest.permutation_test(X1, X2, y, CFG, 2, permutations=[np.arange(y.size)])


def test_degenerate_replicate_aborts(rng):
    X1, X2, y = _small(rng)
    observed = sequential_assess(X1, X2, y, CFG)
    # a stage 1 that reproduced a constant response leaves nothing to permute
    flat = np.full(y.size, 2.5)
    observed = dataclasses.replace(observed, p1=dataclasses.replace(observed.p1, values=flat))
    with pytest.raises(DegenerateResponseError, match="replicate 0"):
        permtest.permutation_test(X1, X2, flat, CFG, 2, observed=observed)
