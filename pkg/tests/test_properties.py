import warnings

import numpy as np
from hypothesis import given, strategies as st

from seqdcv import cv, penreg, permtest
from seqdcv.cv import CvPrediction, FoldPlan
from seqdcv.penreg import PenaltyConfig
from seqdcv.seqassess import Q2Warning, q2_conditional, q2_joint, q2_primary

seeds_ = st.integers(0, 2 ** 32 - 1)


def _design(seed, n, p):
    g = np.random.default_rng(seed)
    X = g.normal(size=(n, p)) * g.uniform(0.2, 5.0, size=p) + g.normal(size=p)
    y = X @ g.normal(size=p) + g.normal(size=n)
    return g, X, y


def _ridge_closed_form(X, t, lam):
    """Centered normal equations with per-column penalty n * lam * var_j."""
    n = X.shape[0]
    mu = X.mean(0)
    Xc = X - mu
    var = np.mean(Xc ** 2, axis=0)
    beta = np.linalg.solve(Xc.T @ Xc + n * lam * np.diag(var), Xc.T @ (t - t.mean()))
    return beta, t.mean() - mu @ beta


@given(seeds_, st.integers(5, 30), st.integers(1, 12), st.floats(1e-3, 10.0))
def test_ridge_matches_closed_form(seed, n, p, lam):
    _, X, y = _design(seed, n, p)
    f = penreg.fit(X, y, None, PenaltyConfig(0.0, lam))
    beta, b0 = _ridge_closed_form(X, y, lam)
    assert np.linalg.norm(f.coefficients - beta) <= 1e-8 * np.linalg.norm(beta) + 1e-12
    assert abs(f.intercept - b0) <= 1e-8 * (abs(b0) + np.abs(X.mean(0) @ beta)) + 1e-12


@given(seeds_, st.sampled_from([0.0, 0.5, 1.0]), st.floats(0.01, 0.5))
def test_offset_is_a_shifted_response(seed, alpha, frac):
    g, X, y = _design(seed, 25, 8)
    off = g.normal(size=25) * 3
    lam = frac * penreg.lambda_grid(X, y, off, alpha=max(alpha, 0.5), n_lambda=2)[0]
    a = penreg.fit(X, y, off, PenaltyConfig(alpha, lam))
    b = penreg.fit(X, y - off, None, PenaltyConfig(alpha, lam))
    assert np.allclose(a.coefficients, b.coefficients, rtol=1e-9, atol=1e-12)
    assert np.allclose(penreg.predict(a, X, off), penreg.predict(b, X) + off, atol=1e-9)


@given(seeds_, st.floats(0.0, 1.2))
def test_orthogonal_lasso_soft_thresholds(seed, frac):
    g = np.random.default_rng(seed)
    n, p = 40, 5
    A = g.normal(size=(n, p))
    Q, _ = np.linalg.qr(A - A.mean(0))  # columns stay orthogonal to the ones vector
    Z = Q * np.sqrt(n)  # unit population variance
    y = Z @ g.normal(size=p) + 0.5 * g.normal(size=n)
    u = (y - y.mean()) / np.std(y)
    c = Z.T @ u / n
    lam = max(frac * np.abs(c).max(), 1e-4)
    f = penreg.fit(Z, y, None, PenaltyConfig(1.0, lam))
    b = f.coefficients * np.std(Z, axis=0) / np.std(y)
    cn = np.mean(Z ** 2, axis=0)
    expect = np.sign(c) * np.maximum(np.abs(c) - lam, 0.0) / cn
    assert np.allclose(b, expect, atol=1e-6)


@given(seeds_, st.floats(0.1, 1000.0), st.sampled_from([0.0, 1.0]))
def test_column_rescaling_only_rescales_coefficients(seed, c, alpha):
    _, X, y = _design(seed, 20, 6)
    lam = 0.05
    a = penreg.fit(X, y, None, PenaltyConfig(alpha, lam))
    X2 = X.copy()
    X2[:, 2] *= c
    b = penreg.fit(X2, y, None, PenaltyConfig(alpha, lam))
    assert np.isclose(b.coefficients[2] * c, a.coefficients[2], rtol=1e-6, atol=1e-9)
    assert np.allclose(penreg.predict(a, X), penreg.predict(b, X2), atol=1e-6 * np.std(y))


@given(seeds_)
def test_warm_and_cold_paths_agree(seed):
    _, X, y = _design(seed, 30, 20)
    grid = penreg.lambda_grid(X, y, alpha=1.0, n_lambda=12)
    warm = penreg.fit_path(X, y, None, 1.0, grid)
    cold = penreg.fit_path(X, y, None, 1.0, grid, warm_start=False)
    for a, b in zip(warm, cold):
        pa, pb = penreg.predict(a, X), penreg.predict(b, X)
        assert np.max(np.abs(pa - pb)) <= 1e-5 * np.std(y)


@given(st.integers(2, 300), st.integers(2, 10), seeds_)
def test_folds_are_balanced(n, J, seed):
    if J > n:
        J = n
    counts = np.bincount(cv.make_folds(n, J, seed).assignments)[1:]
    assert counts.size == J and counts.sum() == n
    assert counts.max() - counts.min() <= 1


def _random_pred(g, n, J):
    a = np.arange(n) % J + 1
    g.shuffle(a)
    return CvPrediction(g.normal(size=n), g.normal(size=J), FoldPlan(a, 0), np.ones(J))


@given(seeds_, st.integers(6, 40))
def test_q2_measures_are_never_negative(seed, n):
    g = np.random.default_rng(seed)
    y = g.normal(size=n)
    p1, p2 = _random_pred(g, n, 3), _random_pred(g, n, 3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", Q2Warning)
        vals = [q2_primary(y, p1), q2_conditional(y, p1, p2).value, q2_joint(y, p1, p2)]
    assert min(vals) >= 0.0


@given(seeds_, st.integers(6, 40))
def test_zero_stage2_gives_primary_exactly(seed, n):
    g = np.random.default_rng(seed)
    y = g.normal(size=n)
    p1 = _random_pred(g, n, 4)
    p2 = CvPrediction(np.zeros(n), g.normal(size=4), p1.plan, np.ones(4))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", Q2Warning)
        assert q2_joint(y, p1, p2) == q2_primary(y, p1)


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=50), st.floats(-1, 1))
def test_p_value_recomputed_from_nulls(null, observed):
    count = 0
    for v in null:
        if v > observed:
            count += 1
    assert permtest.p_value(observed, null) == count / len(null)
    assert permtest.p_value(observed, null, smooth=True) == (1 + count) / (1 + len(null))
