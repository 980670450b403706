"""Seeded Monte Carlo experiments, lemma certification and result export.

Trials are split into fixed chunks that do not depend on the thread count.
Every trial draws from its own generator, derived from (seed, trial index),
and chunk results are merged in chunk order, so the summary is the same
for any number of threads.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import os
import time
import xml.etree.ElementTree as ET
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import duality as du
from .core import (
    Ellipsoid,
    FieldTag,
    eigenpairs,
    hs_norm,
    orthonormal_complement_basis,
    project,
    real_eigenpairs,
)
from .ensembles import EnsembleSpec, EntryLaw, null_vector, sample_matrix, sample_unit_sphere, trial_rng
from .errors import ConfigInvalid, DegenerateGrid, NoGapsError, PartialFailure
from .nets import NetSpec, build_verified_net, smin_values
from .stats import Z95, bound_B, bound_C, lcd_vector, LCDParams, min_subset_norm, wilson_interval

SCHEMA_VERSION = 1
FAILURE_RATE_LIMIT = 0.01

KINDS = (
    "null_vector_tail",
    "eigvec_nogaps_real",
    "eigvec_nogaps_complex",
    "small_eig_deloc",
    "singular_vector_deloc",
    "smin_tail",
    "net_verify",
    "sphere_baseline",
    "certify_suite",
    "lcd_probe",
)

NUMERIC_ERRORS = (np.linalg.LinAlgError, NoGapsError, FloatingPointError)


# ---------------------------------------------------------------- config

@dataclass
class ExperimentConfig:
    kind: str
    n: int | None = None
    n_list: tuple = ()
    N: int | None = None
    k_list: tuple = ()
    k_fraction: float | None = None
    ell: int = 1
    t_grid: tuple = ()
    C: float = 3.0
    c: float = 0.1
    d: int | None = None
    r: int | None = None
    trials: int = 100
    threads: int = 1
    master_seed: int = 0
    law: EntryLaw = field(default_factory=EntryLaw.gaussian)
    field: str = "real"
    chunk_size: int | None = None
    alpha: float | None = None
    gamma: float = 0.1
    theta_cap: float | None = None
    card_constant: float = 8.0
    retry_cap: int = 3
    output_dir: str | None = None
    output_format: str = "json"

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        known = {f.name for f in fields(cls)}
        ens = d.pop("ensemble", None)
        if ens is not None:
            d.setdefault("law", ens.get("law", "gaussian"))
            d.setdefault("field", ens.get("field", "real"))
            if "master_seed" in ens:
                d.setdefault("master_seed", ens["master_seed"])
        out = d.pop("output", None)
        if out is not None:
            d.setdefault("output_dir", out.get("path"))
            d.setdefault("output_format", out.get("format", "json"))
        bad = set(d) - known
        if bad:
            raise ConfigInvalid(f"unknown config keys: {sorted(bad)}")
        if "kind" not in d:
            raise ConfigInvalid("config needs a kind")
        try:
            if "law" in d and not isinstance(d["law"], EntryLaw):
                d["law"] = EntryLaw.from_dict(d["law"])
            for key in ("n_list", "k_list", "t_grid"):
                if key in d:
                    d[key] = tuple(d[key])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigInvalid(str(exc)) from exc
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def to_dict(self):
        d = asdict(self)
        d["law"] = self.law.to_dict()
        for key in ("n_list", "k_list", "t_grid"):
            d[key] = list(d[key])
        return d

    def echo(self):
        """Config as recorded in a summary; the thread count is left out
        because it does not affect results."""
        d = self.to_dict()
        d.pop("threads")
        return d

    def sizes(self):
        return tuple(self.n_list) if self.n_list else ((self.n,) if self.n else ())

    def validate(self):
        def need(cond, msg):
            if not cond:
                raise ConfigInvalid(msg)

        need(self.kind in KINDS, f"unknown kind {self.kind!r}")
        need(isinstance(self.trials, int) and self.trials >= 1, "trials must be a positive integer")
        need(isinstance(self.threads, int) and self.threads >= 1, "threads must be a positive integer")
        need(isinstance(self.master_seed, int) and 0 <= self.master_seed < 2 ** 64, "master_seed must be a 64-bit unsigned integer")
        need(self.field in ("real", "complex"), "field must be 'real' or 'complex'")
        need(self.chunk_size is None or self.chunk_size >= 1, "chunk_size must be positive")
        need(self.output_format in ("json", "csv"), "output format must be json or csv")
        grid = np.asarray(self.t_grid, dtype=float)
        need(np.all(np.isfinite(grid)) and np.all(grid > 0), "t_grid entries must be positive")
        need(np.all(np.diff(grid) > 0), "t_grid must be strictly increasing")
        kind = self.kind
        if kind in ("null_vector_tail", "sphere_baseline", "small_eig_deloc", "singular_vector_deloc"):
            need(self.sizes(), f"{kind} needs n")
            need(len(self.t_grid) >= 1, f"{kind} needs a t_grid")
            need(self.k_list and all(isinstance(k, int) and k >= 1 for k in self.k_list), f"{kind} needs positive integer k_list")
            for n in self.sizes():
                need(n >= 2 and max(self.k_list) <= n, "need 1 <= k <= n and n >= 2")
        if kind in ("eigvec_nogaps_real", "eigvec_nogaps_complex"):
            need(self.sizes(), f"{kind} needs n or n_list")
            need(self.k_list or self.k_fraction, f"{kind} needs k_list or k_fraction")
            if self.k_fraction is not None:
                need(0 < self.k_fraction <= 0.5, "k_fraction must be in (0, 1/2]")
            for n in self.sizes():
                need(n >= 4, "n must be at least 4")
                need(all(1 <= k <= n // 2 for k in self.k_list), "need 1 <= k <= n/2")
        if kind == "singular_vector_deloc":
            need(all(1 <= self.ell <= n for n in self.sizes()), "ell must be in 1..n")
        if kind == "smin_tail":
            need(self.d and self.r and self.d >= self.r >= 1, "smin_tail needs d >= r >= 1")
            need(len(self.t_grid) >= 1, "smin_tail needs a t_grid")
        if kind == "net_verify":
            need(self.r and self.t_grid and len(self.t_grid) == 1, "net_verify needs r and a single t")
            try:
                NetSpec(self.r, self.t_grid[0], self.card_constant, self.retry_cap)
            except ValueError as exc:
                raise ConfigInvalid(str(exc)) from exc
        if kind == "lcd_probe":
            need(self.sizes(), "lcd_probe needs n")
            need(self.gamma and 0 < self.gamma < 1, "gamma must be in (0, 1)")
        if self.field == "complex" and kind in ("eigvec_nogaps_real", "small_eig_deloc", "lcd_probe"):
            raise ConfigInvalid(f"{kind} is defined for the real field only")


# ---------------------------------------------------------------- summary

@dataclass
class Summary:
    kind: str
    config: dict
    trials: int
    failures: int = 0
    cells: list = field(default_factory=list)
    slopes: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION
    runtime: float = field(default=0.0, compare=False)

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "runtime"}
        return _clean(d)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d.pop("runtime", None)
        return cls(**d)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def csv_rows(self):
        return [[c["kind"], c["n"], c["i_or_k"], c["t"], c["prob"], c["ci_lo"], c["ci_hi"], c["slope"]] for c in self.cells]


def _clean(obj):
    """JSON-ready copy: numpy scalars to Python, NaN/inf to None, tuples to lists."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


# ---------------------------------------------------------------- slopes

def tail_slope(t_grid, probs, trials=None):
    """Least-squares slope of log p against log t, with its 95% half-width.

    With ``trials`` given, points are weighted by the inverse binomial
    variance of log p, n p / (1 - p).  Grid points with p in {0, 1} are
    dropped; fewer than four remaining raise DegenerateGrid.
    """
    t = np.asarray(t_grid, dtype=float)
    p = np.asarray(probs, dtype=float)
    if t.shape != p.shape:
        raise ValueError("t_grid and probs differ in length")
    ok = (p > 0) & (p < 1) & (t > 0)
    if ok.sum() < 4:
        raise DegenerateGrid("need at least 4 grid points with 0 < p < 1")
    x, y, p = np.log(t[ok]), np.log(p[ok]), p[ok]
    w = np.ones_like(x) if trials is None else trials * p / (1 - p)
    xm = np.sum(w * x) / np.sum(w)
    ym = np.sum(w * y) / np.sum(w)
    sxx = np.sum(w * (x - xm) ** 2)
    slope = float(np.sum(w * (x - xm) * (y - ym)) / sxx)
    resid = y - ym - slope * (x - xm)
    s2 = float(np.sum(w * resid ** 2) / (len(x) - 2))
    if trials is not None:
        s2 = max(s2, 1.0)
    return slope, float(Z95 * math.sqrt(s2 / sxx))


def _cells_for(kind, n, k, t_grid, counts, trials, slope_of=None):
    slope = math.nan
    probs = np.asarray(counts) / max(trials, 1)
    try:
        slope = tail_slope(t_grid, probs, trials)[0]
    except DegenerateGrid:
        pass
    out = []
    for t, cnt in zip(t_grid, counts):
        lo, hi = wilson_interval(int(cnt), trials)
        out.append(dict(kind=kind, n=n, i_or_k=k, t=float(t), prob=int(cnt) / trials if trials else math.nan, ci_lo=lo, ci_hi=hi,
                        slope=slope, count=int(cnt), trials=trials))
    return out, slope


def _slope_entry(n, k, t_grid, counts, trials):
    probs = np.asarray(counts) / max(trials, 1)
    try:
        s, ci = tail_slope(t_grid, probs, trials)
    except DegenerateGrid:
        s, ci = math.nan, math.nan
    return dict(n=n, k=k, slope=s, ci=ci)


def _quantiles(x):
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return {}
    qs = (0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0)
    return {f"{q:g}": float(np.quantile(x, q)) for q in qs}


# ---------------------------------------------------------------- running

def derive_seed(master_seed, *key):
    """64-bit seed derived from master_seed and an integer key."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _run_chunks(func, trials, chunk, threads):
    starts = list(range(0, trials, chunk))
    tasks = [range(s, min(s + chunk, trials)) for s in starts]
    if threads <= 1 or len(tasks) == 1:
        return [func(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, tasks))


def _field(cfg):
    return FieldTag(cfg.field)


def _kth_smallest(sorted_asc, ks):
    return sorted_asc[..., [k - 1 for k in ks]]


def _tail_values(cfg, n, seed):
    """Per trial, the k-th smallest magnitude of the null (or sphere) vector."""
    ks = list(cfg.k_list)
    fld = _field(cfg)
    spec = EnsembleSpec(n - 1, n, cfg.law, fld, seed)

    def work(idx):
        vals = np.full((len(idx), len(ks)), np.nan)
        fails = 0
        if cfg.kind == "sphere_baseline":
            U = np.stack([sample_unit_sphere(n, fld, trial_rng(seed, i)) for i in idx])
        else:
            Bs = np.stack([sample_matrix(spec, i) for i in idx])
            try:
                U = null_vector(Bs)
            except NUMERIC_ERRORS:
                U = np.full((len(idx), n), np.nan)
                for j, B in enumerate(Bs):
                    try:
                        U[j] = null_vector(B)
                    except NUMERIC_ERRORS:
                        fails += 1
        asc = np.sort(np.abs(U), axis=1)
        vals[:] = _kth_smallest(asc, ks)
        return vals, fails

    res = _run_chunks(work, cfg.trials, cfg.chunk_size or 512, cfg.threads)
    return np.concatenate([r[0] for r in res]), sum(r[1] for r in res)


def _run_tail(cfg):
    s = Summary(cfg.kind, cfg.echo(), cfg.trials)
    t_grid = np.asarray(cfg.t_grid, dtype=float)
    for n in cfg.sizes():
        seed = cfg.master_seed if len(cfg.sizes()) == 1 else derive_seed(cfg.master_seed, n)
        vals, fails = _tail_values(cfg, n, seed)
        s.failures += fails
        good = ~np.isnan(vals[:, 0])
        ntr = int(good.sum())
        for j, k in enumerate(cfg.k_list):
            v = vals[good, j]
            counts = [int(np.sum(v <= k * t / n ** 1.5)) for t in t_grid]
            cells, _ = _cells_for(cfg.kind, n, k, t_grid, counts, ntr)
            s.cells += cells
            s.slopes.append(_slope_entry(n, k, t_grid, counts, ntr))
            s.ratios.append(dict(n=n, k=k, stat="u*_{n-k+1} n^1.5 / k", quantiles=_quantiles(v * n ** 1.5 / k)))
    return s


def _eig_ks(cfg, n):
    ks = set(cfg.k_list)
    if cfg.k_fraction is not None:
        ks.add(math.ceil(cfg.k_fraction * n))
    return sorted(ks)


def _run_eigvec(cfg):
    real = cfg.kind == "eigvec_nogaps_real"
    fld = FieldTag.REAL if real else FieldTag.COMPLEX
    s = Summary(cfg.kind, cfg.echo(), cfg.trials)
    for n in cfg.sizes():
        ks = _eig_ks(cfg, n)
        seed = cfg.master_seed if len(cfg.sizes()) == 1 else derive_seed(cfg.master_seed, n)
        spec = EnsembleSpec(n, n, cfg.law, fld, seed)
        i_lo, i_hi = math.ceil(n / 2), n - math.ceil(math.log(n))
        i_range = np.arange(i_lo, i_hi + 1)
        bound = np.array([(bound_B if real else bound_C)(n, int(i), cfg.C) for i in i_range])

        def work(idx):
            out = []
            for i in idx:
                A = sample_matrix(spec, i)
                try:
                    pairs = real_eigenpairs(A) if real else eigenpairs(A)
                except NUMERIC_ERRORS:
                    out.append(None)
                    continue
                if not pairs:
                    out.append((np.zeros((0, len(ks))), 0, 0))
                    continue
                V = np.stack([p.v for p in pairs])
                asc = np.sort(np.abs(V), axis=1)
                norm = np.array([n ** 1.5 / k if real else n / math.sqrt(k) for k in ks])
                ratios = _kth_smallest(asc, ks) * norm
                # v*_{i+1} is the (n - i)-th smallest magnitude
                vi = asc[:, n - i_range - 1]
                viol = np.any(vi < bound[None, :], axis=1)
                out.append((ratios, int(viol.sum()), len(pairs)))
            return out

        res = list(itertools.chain.from_iterable(_run_chunks(work, cfg.trials, cfg.chunk_size or 4, cfg.threads)))
        ok = [r for r in res if r is not None]
        s.failures += len(res) - len(ok)
        n_vecs = sum(r[2] for r in ok)
        n_viol = sum(r[1] for r in ok)
        for j, k in enumerate(ks):
            pooled = np.concatenate([r[0][:, j] for r in ok]) if ok else np.zeros(0)
            trial_min = np.array([r[0][:, j].min() for r in ok if len(r[0])])
            trial_med = np.array([np.median(r[0][:, j]) for r in ok if len(r[0])])
            s.ratios.append(dict(
                n=n, k=k, i=n - k,
                stat="v*_{i+1} n^1.5/(n-i)" if real else "v*_{i+1} n/sqrt(n-i)",
                median_of_trial_median=float(np.median(trial_med)) if trial_med.size else math.nan,
                median_of_trial_min=float(np.median(trial_min)) if trial_min.size else math.nan,
                pooled=_quantiles(pooled), trial_min=_quantiles(trial_min),
                trials_with_eigvecs=int(trial_min.size), eigvecs=int(pooled.size)))
        s.violations.append(dict(n=n, bound="B" if real else "C", C=cfg.C, i_range=[i_lo, i_hi],
                                 violating_eigvecs=n_viol, eigvecs=n_vecs))
    return s


def _run_small_eig(cfg):
    s = Summary(cfg.kind, cfg.echo(), cfg.trials)
    t_grid = np.asarray(cfg.t_grid, dtype=float)
    for n in cfg.sizes():
        seed = cfg.master_seed if len(cfg.sizes()) == 1 else derive_seed(cfg.master_seed, n)
        spec = EnsembleSpec(n, n, cfg.law, FieldTag.REAL, seed)
        ks = list(cfg.k_list)
        steps = [cfg.c * k ** 2 / n ** 1.5 for k in ks]

        def work(idx):
            out = []
            for i in idx:
                A = sample_matrix(spec, i)
                try:
                    pairs = real_eigenpairs(A)
                except NUMERIC_ERRORS:
                    out.append(None)
                    continue
                rows = []
                for j, k in enumerate(ks):
                    best, resid, found = math.inf, 0.0, 0
                    for p in pairs:
                        if abs(p.lam) > math.sqrt(k):
                            continue
                        found += 1
                        lam0 = steps[j] * round(p.lam / steps[j])
                        lam0 = max(-math.sqrt(k), min(math.sqrt(k), lam0))
                        resid = max(resid, float(np.linalg.norm(A @ p.v - lam0 * p.v)) / steps[j])
                        best = min(best, float(np.sort(np.abs(p.v))[k - 1]) * n ** 1.5 / k)
                    rows.append((best, resid, found))
                out.append(rows)
            return out

        res = list(itertools.chain.from_iterable(_run_chunks(work, cfg.trials, cfg.chunk_size or 8, cfg.threads)))
        ok = [r for r in res if r is not None]
        s.failures += len(res) - len(ok)
        for j, k in enumerate(ks):
            best = np.array([r[j][0] for r in ok])
            counts = [int(np.sum(best <= t)) for t in t_grid]
            cells, _ = _cells_for(cfg.kind, n, k, t_grid, counts, len(ok))
            s.cells += cells
            s.extra[f"n={n},k={k}"] = dict(
                grid_nodes=2 * math.floor(math.sqrt(k) / steps[j]) + 1,
                grid_step=steps[j],
                eigvecs_in_window=int(sum(r[j][2] for r in ok)),
                max_residual_over_step=max((r[j][1] for r in ok), default=0.0))
            s.ratios.append(dict(n=n, k=k, stat="min over window of v*_{n-k+1} n^1.5/k",
                                 quantiles=_quantiles(best[np.isfinite(best)])))
    return s


def _run_singular(cfg):
    s = Summary(cfg.kind, cfg.echo(), cfg.trials)
    t_grid = np.asarray(cfg.t_grid, dtype=float)
    fld = _field(cfg)
    ks = list(cfg.k_list)
    for n in cfg.sizes():
        seed = cfg.master_seed if len(cfg.sizes()) == 1 else derive_seed(cfg.master_seed, n)
        spec = EnsembleSpec(n, n, cfg.law, fld, seed)

        def work(idx):
            vals = np.full((len(idx), len(ks)), np.nan)
            fails = 0
            for j, i in enumerate(idx):
                try:
                    _, _, Vh = np.linalg.svd(sample_matrix(spec, i))
                except np.linalg.LinAlgError:
                    fails += 1
                    continue
                v = Vh[n - cfg.ell].conj()
                vals[j] = np.sort(np.abs(v))[[k - 1 for k in ks]]
            return vals, fails

        res = _run_chunks(work, cfg.trials, cfg.chunk_size or 16, cfg.threads)
        vals = np.concatenate([r[0] for r in res])
        s.failures += sum(r[1] for r in res)
        good = ~np.isnan(vals[:, 0])
        for j, k in enumerate(ks):
            ratio = vals[good, j] * n ** 1.5 / k
            counts = [int(np.sum(ratio <= t)) for t in t_grid]
            cells, _ = _cells_for(cfg.kind, n, k, t_grid, counts, int(good.sum()))
            s.cells += cells
            s.ratios.append(dict(n=n, k=k, ell=cfg.ell, stat="v*_{n-k+1} n^1.5/k", quantiles=_quantiles(ratio)))
    return s


def _run_smin(cfg):
    s = Summary(cfg.kind, cfg.echo(), cfg.trials)
    t_grid = np.asarray(cfg.t_grid, dtype=float)
    d, r = cfg.d, cfg.r
    chunk = cfg.chunk_size or 4096

    def work(idx):
        seed = derive_seed(cfg.master_seed, idx.start)
        return smin_values(d, r, len(idx), seed, law=cfg.law, field=_field(cfg))

    vals = np.concatenate(_run_chunks(work, cfg.trials, chunk, cfg.threads))
    counts = [int(np.sum(vals <= math.sqrt(d) * t)) for t in t_grid]
    cells, _ = _cells_for(cfg.kind, d, r, t_grid, counts, cfg.trials)
    s.cells += cells
    s.slopes.append(_slope_entry(d, r, t_grid, counts, cfg.trials))
    s.extra["expected_exponent"] = d - r
    return s


def _run_net(cfg):
    s = Summary(cfg.kind, cfg.echo(), cfg.trials)
    spec = NetSpec(cfg.r, float(cfg.t_grid[0]), cfg.card_constant, cfg.retry_cap)
    net, rep, attempts = build_verified_net(spec, cfg.master_seed, n_pairs=cfg.trials)
    covered = int(rep.covered.sum())
    lo, hi = wilson_interval(covered, rep.n_pairs)
    s.cells.append(dict(kind=cfg.kind, n=cfg.r, i_or_k=cfg.r, t=spec.t, prob=rep.fraction, ci_lo=lo, ci_hi=hi,
                        slope=math.nan, count=covered, trials=rep.n_pairs))
    s.extra.update(cardinality=spec.cardinality, attempts=attempts, verified=rep.all_covered,
                   net_seed=list(net.seed), max_min_dist=float(rep.min_dist.max()))
    return s


def _run_lcd(cfg):
    s = Summary(cfg.kind, cfg.echo(), cfg.trials)
    for n in cfg.sizes():
        seed = cfg.master_seed if len(cfg.sizes()) == 1 else derive_seed(cfg.master_seed, n)
        spec = EnsembleSpec(n - 1, n, cfg.law, FieldTag.REAL, seed)
        alpha = cfg.alpha if cfg.alpha is not None else cfg.c * math.sqrt(n)
        cap = cfg.theta_cap if cfg.theta_cap is not None else 10 * math.sqrt(n)
        params = LCDParams(alpha, cfg.gamma, cap)

        def work(idx):
            out = []
            for i in idx:
                try:
                    u = null_vector(sample_matrix(spec, i))
                except NUMERIC_ERRORS:
                    out.append(None)
                    continue
                out.append(lcd_vector(u, params)[0])
            return out

        res = list(itertools.chain.from_iterable(_run_chunks(work, cfg.trials, cfg.chunk_size or 8, cfg.threads)))
        ok = np.array([r for r in res if r is not None])
        s.failures += len(res) - len(ok)
        s.ratios.append(dict(n=n, stat="lcd lower bracket / sqrt(n)", alpha=alpha, gamma=cfg.gamma, theta_cap=cap,
                             quantiles=_quantiles(ok / math.sqrt(n)),
                             reached_cap=int(np.sum(ok >= cap))))
    return s


def _run_certify(cfg):
    rep = certify_lemmas(cfg.trials, cfg.master_seed)
    s = Summary(cfg.kind, cfg.echo(), cfg.trials)
    s.extra["checkers"] = rep
    s.violations = [dict(checker=k, failed=v["failed"]) for k, v in rep.items()]
    return s


RUNNERS = {
    "null_vector_tail": _run_tail,
    "sphere_baseline": _run_tail,
    "eigvec_nogaps_real": _run_eigvec,
    "eigvec_nogaps_complex": _run_eigvec,
    "small_eig_deloc": _run_small_eig,
    "singular_vector_deloc": _run_singular,
    "smin_tail": _run_smin,
    "net_verify": _run_net,
    "lcd_probe": _run_lcd,
    "certify_suite": _run_certify,
}


def run_experiment(config) -> Summary:
    """Run the experiment described by ``config`` (an ExperimentConfig or dict).

    Raises PartialFailure, carrying the summary, when more than 1% of the
    trials hit numerical errors.
    """
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(config)
    cfg.validate()
    t0 = time.perf_counter()
    with np.errstate(all="ignore"):
        summary = RUNNERS[cfg.kind](cfg)
    summary.runtime = time.perf_counter() - t0
    total = cfg.trials * max(1, len(cfg.sizes()))
    if summary.failures > FAILURE_RATE_LIMIT * total:
        raise PartialFailure(f"{summary.failures} of {total} trials failed", summary)
    return summary


# ---------------------------------------------------------------- certification

def _cplx(rng, shape, complex_field):
    law = EntryLaw.gaussian()
    return law.sample(rng, shape, FieldTag.COMPLEX if complex_field else FieldTag.REAL)


def _cert_biorthogonality(rng, cf, corrupt=False):
    n, N = int(rng.integers(12, 41)), int(rng.integers(1, 9))
    A = _cplx(rng, (n, n), cf)
    z = math.sqrt(n) * (np.exp(2j * np.pi * rng.random()) if cf else rng.choice([-1.0, 1.0]))
    ctx = du.build_test_projection(A, z, N)
    V = du.dual_basis(ctx).V
    if corrupt:
        V = V.copy()
        V[:, 0] *= 1.1
    err = du.biorthogonality_error(ctx.U, V)
    return 1e-8 - err


def _cert_determ(rng, cf):
    n = int(rng.integers(6, 41))
    B = _cplx(rng, (n - 1, n), cf)
    u = null_vector(B)
    tau = max(float(np.linalg.norm(B @ u)), 1e-10 * hs_norm(B))
    order = np.argsort(np.abs(u))
    kI = int(rng.integers(1, n // 2 + 1))
    rJ = int(rng.integers(1, n - kI + 1))
    I = order[:kI]
    J = order[n - rJ:]
    theta = float(np.max(np.abs(u[I])))
    beta = float(np.min(np.abs(u[J])))
    if beta <= theta:
        return None
    return du.lemma_determ_check(B, u, theta, beta, tau, I, J).slack


def _cert_two_conditions(rng, cf):
    n, N = int(rng.integers(10, 31)), int(rng.integers(2, 6))
    A = _cplx(rng, (n, n), cf)
    pairs = eigenpairs(A)
    p = pairs[int(rng.integers(len(pairs)))]
    v = p.v.astype(np.complex128)
    order = np.argsort(np.abs(v))
    perm = np.concatenate([order[: N - 1], [order[-1]], order[N - 1:-1]])
    A = A[np.ix_(perm, perm)]
    v = v[perm]
    z = complex(p.lam)
    ctx = du.build_test_projection(A.astype(np.complex128), z, N)
    tau = max(float(np.linalg.norm(A @ v - z * v)), 1e-8 * hs_norm(A))
    theta = float(np.max(np.abs(v[: N - 1])))
    beta = float(abs(v[N - 1]))
    T = float(np.max(np.linalg.norm(project(A[:, :N], ctx.F_basis), axis=0)))
    res = du.two_conditions_check(ctx, v, theta, beta, tau, T)
    return min((res.radius_a - res.dist_a) / max(1, res.radius_a), (res.radius_b - res.dist_b) / max(1, res.radius_b))


def _duality_instance(rng, cf):
    n, N = int(rng.integers(12, 41)), int(rng.integers(1, 9))
    A = _cplx(rng, (n, n), cf)
    z = math.sqrt(n) * (np.exp(2j * np.pi * rng.random()) if cf else rng.choice([-1.0, 1.0]))
    ctx = du.build_test_projection(A, z, N)
    dual = du.dual_basis(ctx)
    delta = float(rng.choice([1e-3, 1e-2]))
    return ctx, dual, du.perturbed_dual(dual, z, delta)


def _cert_geom(rng, cf):
    ctx, dual, W = _duality_instance(rng, cf)
    N = ctx.N
    cb = du.classify_ellipsoid(Ellipsoid(ctx.U), 1 / (W.delta * math.sqrt(N)))
    g = du.check_geom_part1(W, cb)
    _, e = du.check_ellipsoid_to_distance(W, cb)
    return min(g.slack, e.slack)


def _cert_w_dist(rng, cf):
    ctx, dual, W = _duality_instance(rng, cf)
    order = du.sigma_order(W.W)
    a = du.w_dist_estimate_slack(W.W, order)
    b = 1e-8 - du.volume_identity_gap(W.W, order)
    c = du.w_y_singular_slack(W.W, dual.V, W.delta)
    kappa_gap = float(np.min(order.d)) - abs(W.kappa) + 1e-10
    return min(a, b, c, kappa_gap)


def membership_instance(rng, cf, n=None, N=None):
    """Random U with U_N = delta sum c_i U_i + T w, T delta <= 1/2."""
    n = int(rng.integers(10, 31)) if n is None else n
    N = int(rng.integers(2, 9)) if N is None else N
    U = np.zeros((n, N), dtype=np.complex128 if cf else np.float64)
    U[:, :-1] = _cplx(rng, (n, N - 1), cf)
    delta = float(10 ** rng.uniform(-3, -1.5))
    T = float(min(rng.uniform(0.5, 5.0), 0.5 / delta))
    c = _cplx(rng, N - 1, cf)
    c *= rng.random() / np.linalg.norm(c)
    w = _cplx(rng, n, cf)
    w *= rng.uniform(0.5, 1.0) / np.linalg.norm(w)
    U[:, -1] = delta * (U[:, :-1] @ c) + T * w
    return U, c, w, delta, T


def pipeline_instance(rng, cf, n=None, N=None):
    """Membership instance, witness, perturbed dual W and rescaled Y."""
    U, c, w, delta, T = membership_instance(rng, cf, n, N)
    Yd = du.dual_sequence(U)
    Y = du.witness_Y(U, c, w, delta, T, Y_dual=Yd)
    E = _cplx(rng, U.shape, cf)
    E *= rng.uniform(0, 1, size=E.shape[1]) / np.linalg.norm(E, axis=0)
    W = Yd + delta * E
    Ys, scale = du.rescale_witness(Y, W)
    dp = 2 * delta + 2 * delta * T
    if W.shape[1] > 1:
        F = orthonormal_complement_basis(W[:, :-1])
        dist = float(np.linalg.norm(project(W[:, -1], F)))
    else:
        dist = float(np.linalg.norm(W[:, -1]))
    return dict(U=U, Yd=Yd, Y=Y, W=W, Ys=Ys, scale=scale, delta=delta, T=T, delta_prime=dp,
                dist=dist, c=c, w=w)


def _cert_witness(rng, cf):
    inst = pipeline_instance(rng, cf)
    Y, Yd, W = inst["Y"], inst["Yd"], inst["W"]
    delta, T = inst["delta"], inst["T"]
    prods = Yd.conj().T @ Y
    s1 = T - np.linalg.norm(Y)
    s2 = 1e-9 - abs(abs(prods[-1]) - 1)
    s3 = delta ** 2 * (1 + 1e-6) - np.sum(np.abs(prods[:-1]) ** 2)
    wprods = np.abs(W[:, :-1].conj().T @ inst["Ys"])
    s4 = inst["delta_prime"] * (1 + 1e-9) - (wprods.max() if wprods.size else 0.0)
    s5 = 2 - abs(inst["scale"])
    return float(min(s1, s2, s3 / delta ** 2, s4 / inst["delta_prime"], s5))


def _cert_reduce(rng, cf):
    inst = pipeline_instance(rng, cf)
    W, dp = inst["W"], inst["delta_prime"]
    cert = du.reduce_to_upsilon(W, inst["Ys"], min(inst["delta"], inst["dist"]), dp)
    rep = du.verify_upsilon(W, cert.Z, dp, cert.T)
    found = du.upsilon_search(W, dp, cert.T, budget=10 ** 5)
    ok = rep.member and found is not None and du.verify_upsilon(W, found.Z, dp, cert.T).member
    return (cert.T - np.linalg.norm(cert.Z)) / cert.T if ok else -1.0


def _cert_construct_z(rng, cf):
    inst = pipeline_instance(rng, cf)
    W, dp = inst["W"], inst["delta_prime"]
    cert = du.reduce_to_upsilon(W, inst["Ys"], min(inst["delta"], inst["dist"]), dp)
    sigma, J, k = du.extract_upsilon_parameters(W, cert.Z, dp)
    Z = du.construct_Z(W, sigma, J, k, dp)
    return 1e-9 - float(np.linalg.norm(Z - cert.Z)) / max(1.0, float(np.linalg.norm(cert.Z)))


def _cert_subset_norm(rng, cf):
    n = int(rng.integers(1, 9))
    v = _cplx(rng, n, cf)
    m = int(rng.integers(1, n + 1))
    brute = min(np.linalg.norm(v[list(I)]) for I in itertools.combinations(range(n), m))
    return 1e-12 - abs(min_subset_norm(v, m) - brute)


CHECKERS = {
    "biorthogonality": _cert_biorthogonality,
    "lemma_determ": _cert_determ,
    "two_conditions": _cert_two_conditions,
    "geom_part1": _cert_geom,
    "w_dist_estimate": _cert_w_dist,
    "witness_y": _cert_witness,
    "reduce_to_upsilon": _cert_reduce,
    "construct_z_uniqueness": _cert_construct_z,
    "min_subset_norm": _cert_subset_norm,
}


def certify_lemmas(trials=50, seed=0, inject_fault=None, tol=-1e-8):
    """Run every deterministic checker on ``trials`` random instances each.

    Returns {checker: {"runs", "passed", "failed", "skipped", "worst_slack"}}.
    A run fails if its slack is below ``tol`` or it raises.  Instances are
    drawn from generators keyed by (seed, checker number, trial), half real
    and half complex.  ``inject_fault="biorthogonality"`` corrupts the dual
    vectors fed to that checker only.
    """
    report = {}
    for ci, (name, check) in enumerate(CHECKERS.items()):
        passed = failed = skipped = 0
        worst = math.inf
        for trial in range(trials):
            rng = trial_rng(seed, ci * 10 ** 6 + trial)
            cf = bool(trial % 2)
            try:
                if name == "biorthogonality":
                    slack = check(rng, cf, corrupt=inject_fault == name)
                else:
                    slack = check(rng, cf)
            except NUMERIC_ERRORS:
                failed += 1
                worst = -math.inf
                continue
            if slack is None:
                skipped += 1
                continue
            worst = min(worst, float(slack))
            if slack >= tol:
                passed += 1
            else:
                failed += 1
        report[name] = dict(runs=trials, passed=passed, failed=failed, skipped=skipped, worst_slack=worst)
    return report


# ---------------------------------------------------------------- output

CSV_HEADER = ["kind", "n", "i_or_k", "t", "prob", "ci_lo", "ci_hi", "slope"]


def export(summary: Summary, fmt, path):
    """Write the summary as JSON or CSV to ``path``; returns the path."""
    try:
        if fmt == "json":
            with open(path, "w") as f:
                f.write(summary.to_json())
        elif fmt == "csv":
            with open(path, "w", newline="") as f:
                w = csv.writer(f)
                w.writerow(CSV_HEADER)
                for row in summary.csv_rows():
                    w.writerow(["" if isinstance(x, float) and not math.isfinite(x) else x for x in row])
        else:
            raise ValueError(f"unknown format {fmt!r}")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc
    return path


def _svg_plot(series, title, xlabel, ylabel, logx, logy, width=480, height=360):
    """Minimal SVG line chart: one polyline per (label, xs, ys) series."""
    pad = 56
    pts = [(x, y) for _, xs, ys in series for x, y in zip(xs, ys)
           if (x > 0 or not logx) and (y > 0 or not logy) and math.isfinite(x) and math.isfinite(y)]
    tx = (lambda v: math.log10(v)) if logx else (lambda v: v)
    ty = (lambda v: math.log10(v)) if logy else (lambda v: v)
    if pts:
        xs_all = [tx(p[0]) for p in pts]
        ys_all = [ty(p[1]) for p in pts]
        x0, x1, y0, y1 = min(xs_all), max(xs_all), min(ys_all), max(ys_all)
    else:
        x0, x1, y0, y1 = 0.0, 1.0, 0.0, 1.0
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1

    def sx(v):
        return pad + (tx(v) - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(v):
        return height - pad - (ty(v) - y0) / (y1 - y0) * (height - 2 * pad)

    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(width), height=str(height))
    ET.SubElement(svg, "title").text = title
    ET.SubElement(svg, "rect", x=str(pad), y=str(pad), width=str(width - 2 * pad), height=str(height - 2 * pad),
                  fill="none", stroke="black")
    ET.SubElement(svg, "text", x=str(width / 2), y=str(height - 12), attrib={"text-anchor": "middle"}).text = xlabel
    ET.SubElement(svg, "text", x="14", y=str(height / 2),
                  transform=f"rotate(-90 14 {height / 2})", attrib={"text-anchor": "middle"}).text = ylabel
    for lab, pos in ((f"{10 ** x0 if logx else x0:.3g}", pad), (f"{10 ** x1 if logx else x1:.3g}", width - pad)):
        ET.SubElement(svg, "text", x=str(pos), y=str(height - pad + 16), attrib={"text-anchor": "middle"}).text = lab
    for lab, pos in ((f"{10 ** y0 if logy else y0:.3g}", height - pad), (f"{10 ** y1 if logy else y1:.3g}", pad)):
        ET.SubElement(svg, "text", x=str(pad - 4), y=str(pos), attrib={"text-anchor": "end"}).text = lab
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    for j, (label, xs, ys) in enumerate(series):
        p = [f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys)
             if (x > 0 or not logx) and (y > 0 or not logy) and math.isfinite(x) and math.isfinite(y)]
        ET.SubElement(svg, "polyline", points=" ".join(p), fill="none", stroke=colors[j % len(colors)],
                      attrib={"data-label": str(label)})
        ET.SubElement(svg, "text", x=str(width - pad + 4), y=str(pad + 14 * (j + 1)),
                      fill=colors[j % len(colors)]).text = str(label)
    return ET.tostring(svg, encoding="unicode")


def plot(summary: Summary, out_dir):
    """Write SVG plots for a summary; returns the list of files written.

    Tail cells give a log-log plot of probability against t with one
    polyline per (n, k).  Ratio entries across several n give a
    ratio-versus-n plot with one polyline per k.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []
    groups = {}
    for c in summary.cells:
        groups.setdefault((c["n"], c["i_or_k"]), []).append((c["t"], c["prob"]))
    if groups:
        series = [(f"n={n} k={k}", [p[0] for p in pts], [p[1] for p in pts]) for (n, k), pts in sorted(groups.items())]
        path = os.path.join(out_dir, f"{summary.kind}_tail.svg")
        with open(path, "w") as f:
            f.write(_svg_plot(series, f"{summary.kind} tail", "t", "probability", True, True))
        written.append(path)
    ratio_key = "median_of_trial_min"
    by_k = {}
    for r in summary.ratios:
        if ratio_key in r and r[ratio_key] is not None:
            by_k.setdefault(r.get("k"), []).append((r["n"], r[ratio_key]))
    if any(len(v) > 1 for v in by_k.values()):
        series = [(f"k={k}" if k is not None else "ratio", [p[0] for p in sorted(v)], [p[1] for p in sorted(v)])
                  for k, v in sorted(by_k.items(), key=lambda kv: (kv[0] is None, kv[0]))]
        path = os.path.join(out_dir, f"{summary.kind}_ratio_vs_n.svg")
        with open(path, "w") as f:
            f.write(_svg_plot(series, f"{summary.kind} normalized ratio", "n", "median ratio", True, False))
        written.append(path)
    return written
