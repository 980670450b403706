"""Delocalization statistics, LCD estimation and concentration estimates.

Order statistics are 1-based: ``order_stat(x, 1)`` is the largest
magnitude and ``order_stat(x, n)`` the smallest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .core import as_array, real_embed
from .ensembles import as_rng

Z95 = 1.959963984540054


@dataclass(frozen=True, eq=False)
class OrderStats:
    sorted_magnitudes: np.ndarray

    def __getitem__(self, i):
        return order_from(self.sorted_magnitudes, i)

    def __len__(self):
        return len(self.sorted_magnitudes)


def order_from(sorted_mags, i):
    n = len(sorted_mags)
    if not 1 <= i <= n:
        raise IndexError(f"order statistic index {i} outside 1..{n}")
    return float(sorted_mags[i - 1])


def rearrange(x) -> OrderStats:
    """Nonincreasing rearrangement of |x|."""
    x = as_array(x, ndim=1, name="x")
    return OrderStats(np.sort(np.abs(x))[::-1])


def order_stat(x, i) -> float:
    return rearrange(x)[i]


def sorted_magnitudes(X, axis=-1):
    """Nonincreasing magnitudes along ``axis`` for a batch of vectors."""
    return np.flip(np.sort(np.abs(X), axis=axis), axis=axis)


def min_subset_norm(v, m) -> float:
    """min over |I| = m of ||v_I||, i.e. the norm of the m smallest magnitudes."""
    v = as_array(v, ndim=1, name="v")
    n = v.shape[0]
    if not 1 <= m <= n:
        raise ValueError(f"m must be in 1..{n}")
    small = np.sort(np.abs(v))[:m]
    return float(np.linalg.norm(small))


def dist_to_sparse(x, s) -> float:
    """Distance from x to the set of vectors with at most floor(s) nonzeros."""
    x = as_array(x, ndim=1, name="x")
    n = x.shape[0]
    if not 0 <= s <= n:
        raise ValueError(f"s must be in [0, {n}]")
    keep = int(math.floor(s))
    tail = np.sort(np.abs(x))[: n - keep]
    return float(np.linalg.norm(tail))


@dataclass(frozen=True)
class IncompParams:
    delta: float
    rho: float

    def __post_init__(self):
        if not (0 < self.delta < 1 and 0 < self.rho < 1):
            raise ValueError("delta and rho must lie in (0, 1)")


def is_incompressible(x, params: IncompParams, norm_tol=1e-10) -> bool:
    x = as_array(x, ndim=1, name="x")
    if abs(np.linalg.norm(x) - 1) > norm_tol:
        raise ValueError("x must be a unit vector")
    return dist_to_sparse(x, params.delta * x.shape[0]) > params.rho


@dataclass(frozen=True)
class LCDParams:
    alpha: float
    gamma: float
    theta_cap: float
    grid_step: float | None = None

    def __post_init__(self):
        if self.alpha <= 0 or not 0 < self.gamma < 1 or self.theta_cap <= 0:
            raise ValueError("need alpha > 0, 0 < gamma < 1, theta_cap > 0")
        if self.grid_step is None:
            object.__setattr__(self, "grid_step", self.theta_cap / 1e4)
        if not 0 < self.grid_step <= self.theta_cap / 1e3:
            raise ValueError("grid_step must be in (0, theta_cap/1000]")


def lattice_gap(theta, x):
    """dist(theta * x, Z^n) for each theta in a 1-d array."""
    y = np.multiply.outer(np.atleast_1d(theta), x)
    return np.linalg.norm(y - np.rint(y), axis=-1)


def lcd_violates(theta, x, params: LCDParams):
    """True where dist(theta x, Z^n) < min(gamma ||theta x||, alpha)."""
    theta = np.atleast_1d(theta)
    nx = np.linalg.norm(x)
    return lattice_gap(theta, x) < np.minimum(params.gamma * theta * nx, params.alpha)


def lcd_vector(x, params: LCDParams, refine_tol=1e-12, chunk=4096):
    """Bracket (lower, upper] for the least common denominator of x.

    Scans theta = h, 2h, ... up to theta_cap (h = grid_step) and stops at the
    first grid point where the defining inequality holds.  The bracket
    between that node and the previous one is then narrowed by bisection on
    the violation predicate.  Returns (theta_cap, inf) if no node below the
    cap violates.
    """
    x = as_array(x, ndim=1, name="x")
    if np.iscomplexobj(x):
        raise ValueError("lcd_vector needs a real vector")
    if np.linalg.norm(x) == 0:
        raise ValueError("x must be nonzero")
    h, cap = params.grid_step, params.theta_cap
    n_nodes = int(math.floor(cap / h + 1e-9))
    start = 1
    while start <= n_nodes:
        stop = min(start + chunk, n_nodes + 1)
        nodes = np.arange(start, stop) * h
        bad = np.flatnonzero(lcd_violates(nodes, x, params))
        if bad.size:
            j = start + int(bad[0])
            lo, hi = (j - 1) * h, j * h
            while hi - lo > refine_tol * max(1.0, hi):
                mid = 0.5 * (lo + hi)
                if lcd_violates(mid, x, params)[0]:
                    hi = mid
                else:
                    lo = mid
            return (lo, hi)
        start = stop
    return (cap, math.inf)


def lcd_subspace_lower_estimate(E_basis, params: LCDParams, n_samples, seed=None):
    """Sampled estimate of the subspace LCD (min over random unit vectors of E).

    This is a heuristic: a minimum over samples can only overestimate the
    infimum over the whole unit sphere of E.
    """
    E_basis = as_array(E_basis, ndim=2, name="E_basis")
    rng = as_rng(seed)
    coeffs = rng.standard_normal((n_samples, E_basis.shape[1]))
    best = math.inf
    for c in coeffs:
        v = E_basis @ c
        lo, _ = lcd_vector(v / np.linalg.norm(v), params)
        best = min(best, lo)
    return best


@dataclass(frozen=True)
class ConcentrationEstimate:
    t: float
    value: float
    ci_halfwidth: float
    n_samples: int


def concentration_fn_estimate(samples, t, max_centers=2000) -> ConcentrationEstimate:
    """Estimate sup_w P{||X - w|| <= t} using sample points as centers.

    One-dimensional samples use every sample as a center (exact counts via
    sorting).  Higher-dimensional samples use the first ``max_centers``
    samples as centers and count neighbours with a k-d tree.  Complex
    samples are embedded in real space first.
    """
    X = np.asarray(samples)
    if X.shape[0] < 100:
        raise ValueError("need at least 100 samples")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if np.iscomplexobj(X):
        X = real_embed(X.T).T if X.ndim > 1 else np.stack([X.real, X.imag], axis=1)
    X = X.astype(float)
    n = X.shape[0]
    if X.ndim == 1 or X.shape[1] == 1:
        xs = np.sort(X.reshape(-1))
        counts = np.searchsorted(xs, xs + t, side="right") - np.searchsorted(xs, xs - t, side="left")
    else:
        tree = cKDTree(X)
        centers = X[:max_centers]
        counts = tree.query_ball_point(centers, r=t, return_length=True)
    p = float(np.max(counts)) / n
    half = Z95 * math.sqrt(max(p * (1 - p), 0.25 / n) / n)
    return ConcentrationEstimate(float(t), p, half, n)


def wilson_interval(k, n, z=Z95):
    """Wilson score interval for a binomial proportion."""
    if n == 0:
        return (0.0, 1.0)
    p = k / n
    denom = 1 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


def _check_index(n, i):
    if not (n / 2 <= i < n):
        raise ValueError(f"need n/2 <= i < n, got n={n}, i={i}")


def bound_A(n, i, t, C, c):
    """(threshold, probability bound) = ((n-i) t / n^1.5, (C t)^(n-i) + exp(-c n))."""
    _check_index(n, i)
    if min(t, C, c) <= 0:
        raise ValueError("t, C, c must be positive")
    return (n - i) * t / n ** 1.5, (C * t) ** (n - i) + math.exp(-c * n)


def bound_B(n, i, C):
    _check_index(n, i)
    if C < 0:
        raise ValueError("C must be nonnegative")
    return (n - i) / (n ** 1.5 * math.log(n) ** C)


def bound_C(n, i, C):
    _check_index(n, i)
    if C < 0:
        raise ValueError("C must be nonnegative")
    return math.sqrt(n - i) / (n * math.log(n) ** C)
