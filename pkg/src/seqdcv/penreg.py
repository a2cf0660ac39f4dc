"""Elastic-net penalized least squares with an optional fixed offset.

Every fit works on a standardized problem.  Columns of ``X`` are centered and
scaled to unit (population) variance inside the training data, and the working
response ``u = (y - offset - mean) / sd`` is centered and scaled the same way.
``standardize=False`` keeps the centering but leaves column scales alone, so
high-variance columns are penalized less.  The solver minimizes

    (1 / 2n) ||u - Z b||^2 + lam * ((1 - alpha) / 2 ||b||^2 + alpha ||b||_1)

and maps back with ``beta_j = sd * b_j / scale_j``.  Consequences worth knowing:

* ridge (``alpha == 0``) has the closed form ``b = (Z'Z + n lam I)^-1 Z'u``, so
  the effective ridge constant on the standardized columns is ``n * lam``;
* because the response is standardized, ``lam`` is unit free: multiplying
  ``y`` by ``c`` multiplies every coefficient by ``c`` at the same ``lam``;
* ``lambda_max = max_j |z_j'u| / (n * max(alpha, 1e-3))`` is the maximal
  absolute correlation of a column with the response, divided by the alpha
  floor.  For lasso it is the smallest ``lam`` with an all-zero solution.

Ridge paths are computed from one thin SVD of ``Z``; every other ``alpha``
uses cyclic coordinate descent with warm starts and an active-set inner loop.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .errors import ConvergenceError, DegenerateResponseError, InputError

ALPHA_FLOOR = 1e-3
TOL = 1e-7
MAX_SWEEPS = 100_000
N_LAMBDA = 100
FACE_REPEATS = 5
FACE_AFTER = 3


@dataclass(frozen=True)
class PenaltyConfig:
    """Penalty mix ``alpha`` (0 ridge, 1 lasso) and strength ``lam``."""

    alpha: float
    lam: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise InputError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.lam > 0.0 or not np.isfinite(self.lam):
            raise InputError(f"lam must be positive and finite, got {self.lam}")


@dataclass(frozen=True)
class Standardization:
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    y_scale: float
    active: np.ndarray  # columns with nonzero training variance


@dataclass(frozen=True)
class FitResult:
    coefficients: np.ndarray
    intercept: float
    standardization: Standardization
    alpha: float
    lam: float
    n_sweeps: int = 0


@dataclass(frozen=True)
class _Problem:
    Z: np.ndarray  # n x p_active, centered (and scaled unless ``scaled`` is False)
    u: np.ndarray  # standardized working response
    std: Standardization
    scaled: bool = True

    @property
    def n(self) -> int:
        return self.Z.shape[0]


def _as_matrix(X, name="X") -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InputError(f"{name} must be two-dimensional, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InputError(f"{name} contains non-finite values")
    return X


def _as_vector(v, n: int, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.shape[0] != n:
        raise InputError(f"{name} has length {v.shape[0]}, expected {n}")
    if not np.all(np.isfinite(v)):
        raise InputError(f"{name} contains non-finite values")
    return v


def _check(X, y, offset):
    X = _as_matrix(X)
    n = X.shape[0]
    y = _as_vector(y, n, "y")
    if n < 3:
        raise InputError(f"need at least 3 observations, got {n}")
    if offset is not None:
        offset = _as_vector(offset, n, "offset")
    return X, y, offset


def _standardize(X, y, offset, standardize: bool = True) -> _Problem:
    X, y, offset = _check(X, y, offset)
    target = y if offset is None else y - offset
    x_mean = X.mean(axis=0)
    Xc = X - x_mean
    x_scale = np.sqrt(np.mean(Xc * Xc, axis=0))
    # constant columns (possible after resampling) are dropped from the fit
    active = x_scale > 1e-12 * np.maximum(1.0, np.abs(x_mean))
    if not standardize:
        x_scale = np.ones_like(x_scale)
    Z = Xc[:, active] / x_scale[active]
    y_mean = float(target.mean())
    rc = target - y_mean
    y_scale = float(np.sqrt(np.mean(rc * rc)))
    if y_scale <= 1e-14 * max(1.0, abs(y_mean)):
        y_scale = 0.0
        u = np.zeros_like(rc)
    else:
        u = rc / y_scale
    std = Standardization(x_mean, np.where(active, x_scale, 1.0), y_mean, y_scale, active)
    return _Problem(np.ascontiguousarray(Z), u, std, bool(standardize))


def _lambda_max(prob: _Problem, alpha: float) -> float:
    if prob.Z.shape[1] == 0 or prob.std.y_scale == 0.0:
        return 0.0
    top = float(np.max(np.abs(prob.Z.T @ prob.u)) / (prob.n * max(alpha, ALPHA_FLOOR)))
    # headroom for rounding differences between this product and the solver's own
    return top * (1.0 + 1e-12)


def _default_eps(n: int, p: int) -> float:
    return 1e-3 if n < p else 1e-4


def _grid_from_max(lmax: float, n_lambda: int, eps_ratio: float) -> np.ndarray:
    if n_lambda == 1:
        return np.array([lmax])
    return lmax * np.geomspace(1.0, eps_ratio, n_lambda)


def lambda_grid(X, y, offset=None, alpha: float = 1.0, n_lambda: int = N_LAMBDA,
                eps_ratio: Optional[float] = None, standardize: bool = True) -> np.ndarray:
    """Geometric grid of ``n_lambda`` values from ``lambda_max`` down to
    ``eps_ratio * lambda_max`` (default ``1e-3`` when n < p, else ``1e-4``)."""
    if n_lambda < 2:
        raise InputError("n_lambda must be at least 2")
    prob = _standardize(X, y, offset, standardize)
    if eps_ratio is None:
        eps_ratio = _default_eps(*X.shape) if hasattr(X, "shape") else 1e-3
    if not 0.0 < eps_ratio < 1.0:
        raise InputError(f"eps_ratio must lie in (0, 1), got {eps_ratio}")
    if prob.std.y_scale == 0.0:
        raise DegenerateResponseError("response is constant after offset removal")
    lmax = _lambda_max(prob, alpha)
    if lmax <= 0.0:
        raise InputError("no column of X varies; the penalty grid is undefined")
    return _grid_from_max(lmax, n_lambda, eps_ratio)


@njit(cache=True)
def _update(ZT, r, b, j, l1, l2, cn, n):
    # cn[j] = ||z_j||^2 / n, exactly 1 for standardized columns
    g = 0.0
    for i in range(n):
        g += ZT[j, i] * r[i]
    g = g / n + cn[j] * b[j]
    if g > l1:
        new = (g - l1) / (cn[j] + l2)
    elif g < -l1:
        new = (g + l1) / (cn[j] + l2)
    else:
        new = 0.0
    d = new - b[j]
    if d != 0.0:
        for i in range(n):
            r[i] -= d * ZT[j, i]
        b[j] = new
    return d


@njit(cache=True)
def _face_step(ZT, u, r, b, act, n_act, lam, alpha, n):
    """Move toward the minimizer on the current support with signs held fixed.

    The walk stops where the first coefficient reaches zero.  A singular face
    (more nonzeros than the rank of Z) has no minimizer; there the fit is flat
    along a null direction while the l1 term is linear, so we walk along it to
    the first zero instead.  Returns 2 when the face minimizer was reached, 1
    after stopping at a zero and 0 if nothing moved (a step that fails to
    lower the objective is undone).
    """
    k = 0
    for a in range(n_act):
        if b[act[a]] != 0.0:
            k += 1
    if k == 0:
        return 0
    idx = np.empty(k, dtype=np.int64)
    k = 0
    for a in range(n_act):
        if b[act[a]] != 0.0:
            idx[k] = act[a]
            k += 1
    ZA = np.empty((k, n))
    sgn = np.empty(k)
    b0 = np.empty(k)
    for a in range(k):
        ZA[a] = ZT[idx[a]]
        sgn[a] = np.sign(b[idx[a]])
        b0[a] = b[idx[a]]
    G = ZA @ ZA.T
    rhs = ZA @ u
    for a in range(k):
        G[a, a] += n * lam * (1.0 - alpha)
        rhs[a] -= n * lam * alpha * sgn[a]
    singular = False
    scale = 0.0
    for a in range(k):
        scale = max(scale, G[a, a])
    try:
        C = np.linalg.cholesky(G)
        diag_min = np.inf
        for a in range(k):
            diag_min = min(diag_min, C[a, a])
        singular = diag_min * diag_min <= 1e-10 * scale
    except Exception:  # noqa: BLE001 - not positive definite
        singular = True
    if singular:
        w, V = np.linalg.eigh(G)
        d = V[:, 0].copy()
        if sgn @ d > 0.0:
            d = -d
        t = np.inf
    else:
        z = np.linalg.solve(C, rhs)
        d = np.linalg.solve(C.T, z) - b0
        t = 1.0
    hit = -1
    for a in range(k):
        if not np.isfinite(d[a]):
            return 0
        if d[a] * b0[a] < 0.0:
            ta = -b0[a] / d[a]
            if ta < t:
                t = ta
                hit = a
    if hit < 0 and singular:
        return 0
    before = _objective(r, b, lam, alpha, n)
    r_old = r.copy()
    for a in range(k):
        b[idx[a]] = b0[a] + t * d[a]
    if hit >= 0:
        b[idx[hit]] = 0.0
    for i in range(n):
        r[i] = u[i]
    for a in range(k):
        if b[idx[a]] != 0.0:
            for i in range(n):
                r[i] -= b[idx[a]] * ZA[a, i]
    if _objective(r, b, lam, alpha, n) > before:
        for a in range(k):
            b[idx[a]] = b0[a]
        r[:] = r_old
        return 0
    return 1 if hit >= 0 else 2


@njit(cache=True)
def _sweep(ZT, u, r, b, idx, m, l1, l2, cn, n, act, in_act, n_act):
    """One cyclic pass over idx[:m]; returns (max change, support flips, n_act)."""
    maxd = 0.0
    flips = 0
    for k in range(m):
        j = idx[k]
        before = b[j]
        d = _update(ZT, r, b, j, l1, l2, cn, n)
        if d != 0.0:
            if abs(d) > maxd:
                maxd = abs(d)
            if before == 0.0 or b[j] == 0.0:
                flips += 1
            if not in_act[j]:
                in_act[j] = True
                act[n_act] = j
                n_act += 1
    return maxd, flips, n_act


@njit(cache=True)
def _cd_path(ZT, u, cn, lams, alpha, tol, max_sweeps, B, sweeps_out, trace, devmax):
    """Coordinate descent over a decreasing grid with warm starts.

    ZT is p x n so each column is contiguous.  Each grid point screens columns
    with the sequential strong rule, runs cyclic sweeps on the screened set
    (with exact face steps once the support settles) and finishes with a KKT
    check over every column.  Returns (status, last change); status is -1 on
    success, otherwise the grid index that failed to converge.  When the
    training deviance explained reaches ``devmax`` the remaining grid points
    reuse the last solution.
    """
    p, n = ZT.shape
    b = np.zeros(p)
    r = u.copy()
    act = np.empty(p, dtype=np.int64)
    in_act = np.zeros(p, dtype=np.bool_)
    n_act = 0
    strong = np.empty(p, dtype=np.int64)
    in_strong = np.zeros(p, dtype=np.bool_)
    total = 0
    maxd = 0.0
    grad = (ZT @ r) / n  # afterwards always the gradient at the last solution
    for l in range(lams.shape[0]):
        lam = lams[l]
        l1 = lam * alpha
        l2 = lam * (1.0 - alpha)
        prev = lams[l - 1] if l > 0 else lam
        screen = alpha * (2.0 * lam - prev)
        m = 0
        for j in range(p):
            in_strong[j] = in_act[j] or abs(grad[j]) >= screen
            if in_strong[j]:
                strong[m] = j
                m += 1
        sweeps = 0
        while True:
            # converge on the screened set
            while True:
                maxd, flips, n_act = _sweep(ZT, u, r, b, strong, m, l1, l2, cn, n,
                                            act, in_act, n_act)
                sweeps += 1
                if total + sweeps <= trace.shape[0]:
                    trace[total + sweeps - 1] = _objective(r, b, lam, alpha, n)
                if maxd < tol:
                    break
                if sweeps >= max_sweeps:
                    return l, maxd
                stable = 0
                while True:
                    maxd, flips, n_act = _sweep(ZT, u, r, b, act, n_act, l1, l2, cn, n,
                                                act, in_act, n_act)
                    sweeps += 1
                    if total + sweeps <= trace.shape[0]:
                        trace[total + sweeps - 1] = _objective(r, b, lam, alpha, n)
                    if maxd < tol:
                        break
                    if sweeps >= max_sweeps:
                        return l, maxd
                    stable = 0 if flips else stable + 1
                    if stable >= FACE_AFTER:
                        for _ in range(FACE_REPEATS):
                            if _face_step(ZT, u, r, b, act, n_act, lam, alpha, n) != 1:
                                break
                        stable = 0
                        sweeps += 1
                        if total + sweeps <= trace.shape[0]:
                            trace[total + sweeps - 1] = _objective(r, b, lam, alpha, n)
            # KKT over the screened-out columns (their coefficients are zero)
            grad = (ZT @ r) / n
            added = 0
            for j in range(p):
                if not in_strong[j] and abs(grad[j]) > l1 * (1.0 + 1e-12):
                    in_strong[j] = True
                    strong[m] = j
                    m += 1
                    added += 1
            if added == 0:
                break
        total += sweeps
        sweeps_out[l] = sweeps
        B[l, :] = b
        if devmax < 1.0 and 1.0 - (r @ r) / (u @ u) >= devmax:
            for k in range(l + 1, lams.shape[0]):
                B[k, :] = b
            return -1, maxd
    return -1, maxd


@njit(cache=True)
def _objective(r, b, lam, alpha, n):
    rss = 0.0
    for i in range(r.shape[0]):
        rss += r[i] * r[i]
    l2 = 0.0
    l1 = 0.0
    for j in range(b.shape[0]):
        l2 += b[j] * b[j]
        l1 += abs(b[j])
    return rss / (2.0 * n) + lam * ((1.0 - alpha) / 2.0 * l2 + alpha * l1)


def _ridge_factors(Z, u):
    U, s, Vt = np.linalg.svd(Z, full_matrices=False)
    return s, U.T @ u, Vt


def _ridge_shrink(s, c, grid, n):
    # row l holds the coefficients of Z's right singular vectors at grid[l]
    return c * s / (s * s + n * np.asarray(grid)[:, None])


def _solve_path(prob: _Problem, grid, alpha: float, tol: float = TOL,
                max_sweeps: int = MAX_SWEEPS, trace=None, devmax: float = 1.0):
    """Standardized coefficient rows (L x p_active) and sweep counts."""
    grid = np.asarray(grid, dtype=np.float64)
    L, pa = grid.shape[0], prob.Z.shape[1]
    if pa == 0 or prob.std.y_scale == 0.0:
        return np.zeros((L, pa)), np.zeros(L, dtype=np.int64)
    if alpha == 0.0:
        s, c, Vt = _ridge_factors(prob.Z, prob.u)
        return _ridge_shrink(s, c, grid, prob.n) @ Vt, np.zeros(L, dtype=np.int64)
    B = np.empty((L, pa))
    sweeps = np.zeros(L, dtype=np.int64)
    if trace is None:
        trace = np.empty(0)
    cn = np.ones(pa) if prob.scaled else np.mean(prob.Z * prob.Z, axis=0)
    status, gap = _cd_path(np.ascontiguousarray(prob.Z.T), prob.u, cn, grid, float(alpha),
                           float(tol), int(max_sweeps), B, sweeps, trace, float(devmax))
    if status >= 0:
        raise ConvergenceError(
            f"coordinate descent did not converge at lam={grid[status]:.4g} "
            f"after {max_sweeps} sweeps (last max change {gap:.3g})", gap)
    return B, sweeps


def _unstandardize(std: Standardization, b: np.ndarray):
    beta = np.zeros(std.active.shape[0])
    beta[std.active] = std.y_scale * b / std.x_scale[std.active]
    intercept = std.y_mean - float(std.x_mean @ beta)
    return beta, intercept


def _check_grid(grid) -> np.ndarray:
    grid = np.atleast_1d(np.asarray(grid, dtype=np.float64))
    if grid.ndim != 1 or grid.size == 0:
        raise InputError("grid must be a non-empty vector")
    if np.any(grid <= 0) or not np.all(np.isfinite(grid)):
        raise InputError("grid values must be positive and finite")
    if np.any(np.diff(grid) >= 0):
        raise InputError("grid must be strictly decreasing")
    return grid


def fit(X, y, offset=None, cfg: PenaltyConfig = None, standardize: bool = True) -> FitResult:
    """Fit one penalized regression of ``y - offset`` on ``X``."""
    if cfg is None:
        raise InputError("a PenaltyConfig is required")
    prob = _standardize(X, y, offset, standardize)
    B, sweeps = _solve_path(prob, [cfg.lam], cfg.alpha)
    beta, intercept = _unstandardize(prob.std, B[0])
    return FitResult(beta, intercept, prob.std, cfg.alpha, cfg.lam, int(sweeps[0]))


def fit_path(X, y, offset, alpha: float, grid: Sequence[float],
             warm_start: bool = True, standardize: bool = True) -> list[FitResult]:
    """Fits along a strictly decreasing grid.

    With ``warm_start=False`` every grid point is solved from zero, which is
    only useful for checking the warm-started path.
    """
    grid = _check_grid(grid)
    PenaltyConfig(alpha, float(grid[0]))
    prob = _standardize(X, y, offset, standardize)
    if warm_start:
        B, sweeps = _solve_path(prob, grid, alpha)
    else:
        rows = [_solve_path(prob, grid[l:l + 1], alpha) for l in range(grid.size)]
        B = np.vstack([r[0] for r in rows]) if rows else np.zeros((0, prob.Z.shape[1]))
        sweeps = np.concatenate([r[1] for r in rows])
    out = []
    for l, lam in enumerate(grid):
        beta, intercept = _unstandardize(prob.std, B[l])
        out.append(FitResult(beta, intercept, prob.std, alpha, float(lam), int(sweeps[l])))
    return out


def predict(fit: FitResult, X_new, offset=None) -> np.ndarray:
    X_new = _as_matrix(X_new, "X_new")
    if X_new.shape[1] != fit.coefficients.shape[0]:
        raise InputError(
            f"X_new has {X_new.shape[1]} columns, the fit has {fit.coefficients.shape[0]}")
    out = fit.intercept + X_new @ fit.coefficients
    if offset is not None:
        out = out + _as_vector(offset, X_new.shape[0], "offset")
    return out


def path_predict(X, y, offset, X_new, grid, alpha: float, devmax: float = 1.0,
                 standardize: bool = True) -> np.ndarray:
    """Predictions of ``y - offset`` on ``X_new`` for every grid value.

    Returns an ``m x L`` matrix, the same values as ``predict`` over
    ``fit_path`` without forming original-scale coefficients.  Ridge uses the
    kernel form ``Zn Z' (Z Z' + n lam I)^-1 u`` from one eigendecomposition
    when n < p.  ``devmax < 1`` stops a coordinate-descent path once the
    training deviance explained reaches it (later grid points repeat the
    last solution, as glmnet does).
    """
    grid = _check_grid(grid)
    prob = _standardize(X, y, offset, standardize)
    X_new = _as_matrix(X_new, "X_new")
    if X_new.shape[1] != prob.std.active.shape[0]:
        raise InputError("X_new column count does not match X")
    std = prob.std
    if std.y_scale == 0.0 or prob.Z.shape[1] == 0:
        return np.full((X_new.shape[0], grid.size), std.y_mean)
    Zn = (X_new[:, std.active] - std.x_mean[std.active]) / std.x_scale[std.active]
    n, pa = prob.Z.shape
    if alpha == 0.0 and n < pa:
        w, U = np.linalg.eigh(prob.Z @ prob.Z.T)
        w = np.clip(w, 0.0, None)
        A = (Zn @ prob.Z.T) @ U
        fitted = A @ ((U.T @ prob.u)[:, None] / (w[:, None] + n * grid[None, :]))
    elif alpha == 0.0:
        s, c, Vt = _ridge_factors(prob.Z, prob.u)
        fitted = (Zn @ Vt.T) @ _ridge_shrink(s, c, grid, n).T
    else:
        B, _ = _solve_path(prob, grid, alpha, devmax=devmax)
        fitted = Zn @ B.T
    return std.y_mean + std.y_scale * fitted
