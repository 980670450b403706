"""Hilbert-Schmidt nets, HS-norm concentration and smallest singular value tails.

Projected random matrices here have columns P_F X_l, where X_l are i.i.d.
isotropic vectors in K^m and F is a fixed random d-dimensional subspace.
In the orthonormal coordinates of F such a matrix is d x r.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from .core import FieldTag, as_array, singular_values
from .ensembles import EntryLaw, as_rng, trial_rng
from .stats import wilson_interval


@dataclass(frozen=True)
class NetSpec:
    r: int
    t: float
    card_constant: float = 8.0
    retry_cap: int = 3

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("r must be positive")
        if not 2.0 ** (-(2.0 ** self.r)) < self.t <= 1:
            raise ValueError("t must lie in (2^(-2^r), 1]")
        if self.card_constant < 2:
            raise ValueError("card_constant must be at least 2")
        if self.retry_cap < 1:
            raise ValueError("retry_cap must be positive")

    @property
    def cardinality(self) -> int:
        """ceil((C/t)^r), computed exactly from the float inputs."""
        return math.ceil((Fraction(self.card_constant) / Fraction(self.t)) ** self.r)


class Net:
    """Finite point set in the shell 1/2 <= ||x|| <= 3/2 of R^r."""

    def __init__(self, points, spec: NetSpec | None = None, seed=None):
        self.points = np.asarray(points, dtype=float)
        self.spec = spec
        self.seed = seed

    def __len__(self):
        return len(self.points)

    @cached_property
    def tree(self):
        return cKDTree(self.points, leafsize=32, balanced_tree=False, compact_nodes=False)


def sample_shell(rng, count, r, chunk=1 << 20):
    """Uniform points in {1/2 <= ||x|| <= 3/2} of R^r."""
    out = np.empty((count, r))
    lo, hi = 0.5 ** r, 1.5 ** r
    for start in range(0, count, chunk):
        m = min(chunk, count - start)
        g = rng.standard_normal((m, r))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        rad = (lo + (hi - lo) * rng.random(m)) ** (1.0 / r)
        out[start:start + m] = g * rad[:, None]
    return out


def build_hs_net(spec: NetSpec, seed) -> Net:
    if spec.r > 12:
        raise ValueError("r above 12 is beyond desk scale")
    pts = sample_shell(as_rng(seed), spec.cardinality, spec.r)
    return Net(pts, spec, seed)


@dataclass(frozen=True, eq=False)
class CoverageReport:
    covered: np.ndarray
    min_dist: np.ndarray
    t: float

    @property
    def n_pairs(self):
        return len(self.covered)

    @property
    def fraction(self):
        return float(np.mean(self.covered)) if self.n_pairs else 1.0

    @property
    def all_covered(self):
        return bool(np.all(self.covered))


def sample_pair(rng, r, m=None):
    """Gaussian m x r matrix rescaled to ||A||_HS = sqrt(r), and X uniform on S^(r-1)."""
    m = r if m is None else m
    A = rng.standard_normal((m, r))
    A *= math.sqrt(r) / np.linalg.norm(A)
    X = rng.standard_normal(r)
    return A, X / np.linalg.norm(X)


def _min_image_dist(net, A, X, chunk=1 << 20):
    best = math.inf
    for start in range(0, len(net), chunk):
        diff = X[None, :] - net.points[start:start + chunk]
        best = min(best, float(np.min(np.linalg.norm(diff @ A.T, axis=1))))
    return best


def verify_net(net: Net, n_pairs, seed, t, m=None, k_near=16, pairs=None):
    """For random (A, X), test whether some net point X' has ||A(X - X')|| <= t.

    The k nearest net points in Euclidean distance are tried first; if none
    of them works the whole net is scanned, so the reported minimum is exact
    whenever a pair is reported uncovered.  ``pairs`` overrides the sampled
    (A, X) list.
    """
    if pairs is None:
        rng = as_rng(seed)
        pairs = [sample_pair(rng, net.points.shape[1], m) for _ in range(n_pairs)]
    covered = np.zeros(len(pairs), dtype=bool)
    dists = np.zeros(len(pairs))
    k = min(k_near, len(net))
    for j, (A, X) in enumerate(pairs):
        _, idx = net.tree.query(X, k=k)
        idx = np.atleast_1d(idx)
        d = float(np.min(np.linalg.norm((X[None, :] - net.points[idx]) @ A.T, axis=1)))
        if d > t:
            d = min(d, _min_image_dist(net, A, X))
        dists[j] = d
        covered[j] = d <= t
    return CoverageReport(covered, dists, float(t))


def build_verified_net(spec: NetSpec, seed, n_pairs=1000, pair_seed=None):
    """Construct-and-verify: rebuild with derived seeds until every sampled
    pair is covered, at most ``retry_cap`` builds.

    Returns (net, report, attempts).  The net of the last attempt is returned
    even when verification failed; check ``report.all_covered``.
    """
    pair_seed = seed if pair_seed is None else pair_seed
    for attempt in range(spec.retry_cap):
        net = build_hs_net(spec, trial_rng(seed, attempt))
        net.seed = (seed, attempt)
        report = verify_net(net, n_pairs, trial_rng(pair_seed, 10 ** 6 + attempt), spec.t)
        if report.all_covered:
            break
    return net, report, attempt + 1


def random_subspace(rng, m, d, field=FieldTag.REAL):
    """Orthonormal basis (m x d) of a uniformly random d-dim subspace."""
    G = EntryLaw.gaussian().sample(rng, (m, d), field)
    Q, _ = np.linalg.qr(G)
    return Q


def projected_matrices(seed, trials, m, d, r, law=None, field=FieldTag.REAL, F=None, start=0):
    """Stack of d x r matrices Q^H X with X an m x r matrix of i.i.d. entries.

    Trial j uses the generator derived from (seed, start + j).  F is fixed
    by the generator derived from (seed, 2^63) unless given.
    """
    law = law or EntryLaw.gaussian()
    if F is None:
        F = random_subspace(trial_rng(seed, 2 ** 63), m, d, field)
    out = np.empty((trials, d, r), dtype=FieldTag(field).dtype)
    for j in range(trials):
        X = law.sample(trial_rng(seed, start + j), (m, r), field)
        out[j] = F.conj().T @ X
    return out


@dataclass(frozen=True, eq=False)
class HSReport:
    ratios: np.ndarray
    mean_hs2: float
    quantiles: dict
    tail: dict
    rd: int


def hs_concentration_check(d, r, n_trials, seed, m=None, c0_grid=(1.5, 2.0, 3.0), law=None):
    """Empirical law of ||M||_HS / sqrt(r d) for projected random matrices."""
    m = 2 * d if m is None else m
    if not 1 <= d <= m:
        raise ValueError("need 1 <= d <= m")
    M = projected_matrices(seed, n_trials, m, d, r, law)
    hs2 = np.sum(np.abs(M) ** 2, axis=(1, 2))
    ratios = np.sqrt(hs2 / (r * d))
    qs = {str(q): float(np.quantile(ratios, q)) for q in (0.01, 0.5, 0.99)}
    tail = {str(c0): float(np.mean(ratios >= c0)) for c0 in c0_grid}
    return HSReport(ratios, float(np.mean(hs2)), qs, tail, r * d)


@dataclass(frozen=True, eq=False)
class TailCurve:
    t_grid: np.ndarray
    counts: np.ndarray
    trials: int
    probs: np.ndarray
    ci: np.ndarray
    slope: float
    slope_ci: float


def smin_values(d, r, n_trials, seed, W=None, m=None, law=None, field=FieldTag.REAL):
    """s_min(M + W) for n_trials projected d x r matrices M."""
    m = 2 * d if m is None else m
    if d < r:
        raise ValueError("need d >= r")
    out = np.empty(n_trials)
    chunk = 4096
    F = random_subspace(trial_rng(seed, 2 ** 63), m, d, field)
    for start in range(0, n_trials, chunk):
        cnt = min(chunk, n_trials - start)
        M = projected_matrices(seed, cnt, m, d, r, law, field, F=F, start=start)
        if W is not None:
            M = M + W
        out[start:start + cnt] = np.linalg.svd(M, compute_uv=False)[:, -1]
    return out


def smin_tail_experiment(d, r, W=None, t_grid=(0.05, 0.1, 0.15, 0.2, 0.25, 0.3), n_trials=10 ** 5, seed=0, m=None, law=None):
    """P{s_min(M + W) <= sqrt(d) t} on a grid of t, with a fitted log-log slope."""
    from .harness import tail_slope

    t = np.asarray(t_grid, dtype=float)
    s = smin_values(d, r, n_trials, seed, W, m, law)
    counts = np.array([int(np.sum(s <= math.sqrt(d) * ti)) for ti in t])
    probs = counts / n_trials
    ci = np.array([wilson_interval(c, n_trials) for c in counts])
    usable = (counts > 0) & (counts < n_trials)
    if usable.sum() >= 4:
        slope, slope_ci = tail_slope(t[usable], probs[usable], n_trials)
    else:
        slope, slope_ci = math.nan, math.nan
    return TailCurve(t, counts, n_trials, probs, ci, slope, slope_ci)


@dataclass(frozen=True)
class AnisoCheckParams:
    h: int
    psi: float
    R: float


def tail_energy(D, h):
    """(sum_{l >= h} s_l(D)^2)^(1/2), h 1-based."""
    s = singular_values(D)
    return float(np.sqrt(np.sum(s[h - 1:] ** 2)))


@dataclass(frozen=True, eq=False)
class AnisoReport:
    kind: str
    fraction: float
    threshold: float
    stats: np.ndarray


def aniso_distance_checks(D, kind, n_trials, seed, p=2, h=1, c=0.1, R=None, n_candidates=8, law=None, field=FieldTag.REAL):
    """Spot checks of distance bounds for anisotropic random vectors DX.

    kind="first": fraction of trials with
        min_i dist(D X_i, span{D X_j : j != i}) >= c * tail_energy(D, h)
    over p independent X_i.

    kind="second": for each trial, candidates Y = D X/||D X||^2 + eta with
    eta orthogonal to D X and ||Y|| <= R; fraction of trials where every
    candidate has ||D^H Y|| >= psi R / h with psi = c * tail_energy(D, h).
    """
    D = as_array(D, ndim=2, name="D")
    law = law or EntryLaw.gaussian()
    n_out, m = D.shape
    psi = tail_energy(D, h)
    stats = np.empty(n_trials)
    if kind == "first":
        thr = c * psi
        for j in range(n_trials):
            X = law.sample(trial_rng(seed, j), (m, p), field)
            V = D @ X
            best = math.inf
            for i in range(p):
                others = np.delete(V, i, axis=1)
                if others.shape[1]:
                    Q, _ = np.linalg.qr(others)
                    res = V[:, i] - Q @ (Q.conj().T @ V[:, i])
                else:
                    res = V[:, i]
                best = min(best, float(np.linalg.norm(res)))
            stats[j] = best
        ok = stats >= thr
    elif kind == "second":
        psi = c * psi
        for j in range(n_trials):
            rng = trial_rng(seed, j)
            X = law.sample(rng, m, field)
            DX = D @ X
            base = DX / np.linalg.norm(DX) ** 2
            cap = R if R is not None else 2 * np.linalg.norm(base)
            worst = math.inf
            for _ in range(n_candidates):
                eta = EntryLaw.gaussian().sample(rng, n_out, field)
                eta -= DX * (np.vdot(DX, eta) / np.vdot(DX, DX))
                room = max(cap ** 2 - np.linalg.norm(base) ** 2, 0.0)
                eta *= math.sqrt(room) * rng.random() / max(np.linalg.norm(eta), 1e-300)
                Y = base + eta
                worst = min(worst, float(np.linalg.norm(D.conj().T @ Y)))
            stats[j] = worst
        thr = psi * (R if R is not None else 1.0) / h
        ok = stats >= thr
    else:
        raise ValueError("kind must be 'first' or 'second'")
    return AnisoReport(kind, float(np.mean(ok)), float(thr), stats)
