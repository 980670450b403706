import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nogaps.stats import (
    IncompParams,
    LCDParams,
    bound_A,
    bound_B,
    bound_C,
    concentration_fn_estimate,
    dist_to_sparse,
    is_incompressible,
    lcd_subspace_lower_estimate,
    lcd_vector,
    lcd_violates,
    min_subset_norm,
    order_stat,
    rearrange,
    wilson_interval,
)

seeds = st.integers(0, 2 ** 32 - 1)


def test_rearrange_example():
    assert np.allclose(rearrange([3.0, -1.0, 2.0]).sorted_magnitudes, [3, 2, 1])


def test_order_stat_of_basis_vector():
    assert order_stat(np.eye(5)[0], 5) == 0.0
    assert order_stat(np.eye(5)[0], 1) == 1.0
    with pytest.raises(IndexError):
        order_stat(np.ones(3), 4)


@given(seeds, st.integers(1, 8), st.booleans())
def test_order_stat_min_max_form(seed, n, cf):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n) + (1j * rng.standard_normal(n) if cf else 0)
    mags = np.abs(x)
    for i in range(1, n + 1):
        brute = min(max(mags[j] for j in I) for I in itertools.combinations(range(n), n - i + 1))
        assert order_stat(x, i) == brute


def test_rearrange_preserves_multiset(rng):
    x = rng.standard_normal(9)
    assert np.array_equal(np.sort(rearrange(x).sorted_magnitudes), np.sort(np.abs(x)))


def test_min_subset_norm_examples():
    assert min_subset_norm(np.array([1.0, 0, 0]), 2) == 0.0
    assert np.isclose(min_subset_norm(np.ones(4) / 2, 2), 1 / np.sqrt(2))


@given(seeds, st.integers(1, 10))
def test_min_subset_norm_brute_force(seed, n):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    m = int(rng.integers(1, n + 1))
    brute = min(np.linalg.norm(v[list(I)]) for I in itertools.combinations(range(n), m))
    assert abs(min_subset_norm(v, m) - brute) <= 1e-12


@given(seeds, st.integers(1, 12))
def test_min_subset_norm_invariants(seed, n):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    m = int(rng.integers(1, n + 1))
    top = np.sort(np.abs(v))[::-1][: n - m]
    assert np.isclose(min_subset_norm(v, m) ** 2 + np.sum(top ** 2), np.sum(v ** 2))
    tail = [order_stat(v, i) for i in range(n - m + 1, n + 1)]
    assert np.isclose(min_subset_norm(v, m), np.linalg.norm(tail))


def test_dist_to_sparse_examples():
    assert dist_to_sparse(np.eye(3)[0], 1) == 0.0
    assert np.isclose(dist_to_sparse(np.ones(2) / np.sqrt(2), 1), 1 / np.sqrt(2))
    assert np.isclose(dist_to_sparse(np.ones(2) / np.sqrt(2), 1.9), 1 / np.sqrt(2))


@given(seeds, st.integers(1, 8))
def test_dist_to_sparse_brute_force(seed, n):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    s = int(rng.integers(0, n + 1))
    # the nearest s-sparse vector keeps x on its support
    brute = min(np.linalg.norm(np.delete(x, list(S))) for S in itertools.combinations(range(n), s))
    assert abs(dist_to_sparse(x, s) - brute) <= 1e-12


def test_is_incompressible():
    n = 10
    assert not is_incompressible(np.eye(n)[0], IncompParams(0.1, 0.5))
    assert is_incompressible(np.ones(n) / np.sqrt(n), IncompParams(0.1, 0.5))
    with pytest.raises(ValueError):
        is_incompressible(np.ones(n), IncompParams(0.1, 0.5))


# First grid point (step 1e-5) where dist(theta x, Z^n) < min(0.1 ||theta x||, 2),
# found by an exhaustive scan independent of lcd_vector.
LCD_DIAG = math.sqrt(2) / 1.1   # scan: 1.28565
LCD_E1 = 1 / 1.1                # scan: 0.90910


def test_lcd_diagonal_vector():
    lo, hi = lcd_vector(np.ones(2) / np.sqrt(2), LCDParams(2.0, 0.1, 10.0))
    assert lo <= LCD_DIAG <= hi
    assert hi - lo <= 1e-4


def test_lcd_basis_vector():
    lo, hi = lcd_vector(np.array([1.0, 0.0]), LCDParams(2.0, 0.1, 10.0))
    assert lo <= LCD_E1 <= hi
    assert hi - lo <= 1e-4


def test_lcd_badly_approximable_below_cap():
    # the scan finds the first violation for (1, sqrt 2)/sqrt 3 at theta = 3.29042
    x = np.array([1.0, math.sqrt(2)]) / math.sqrt(3)
    assert lcd_vector(x, LCDParams(2.0, 0.1, 3.0)) == (3.0, math.inf)
    lo, hi = lcd_vector(x, LCDParams(2.0, 0.1, 4.0))
    assert lo <= 3.29042 <= hi + 1e-5


@given(seeds)
def test_lcd_no_violation_below_bracket(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(3)
    params = LCDParams(1.0, 0.2, 5.0, 5e-3)
    lo, hi = lcd_vector(x, params)
    grid = np.arange(1, int(lo / params.grid_step) + 1) * params.grid_step
    grid = grid[grid < lo]
    assert not np.any(lcd_violates(grid, x, params))
    if math.isfinite(hi):
        assert lcd_violates(hi, x, params)[0]
        assert hi - lo <= params.grid_step


def test_lcd_params_validation():
    with pytest.raises(ValueError):
        LCDParams(1.0, 0.1, 10.0, grid_step=0.1)
    with pytest.raises(ValueError):
        LCDParams(1.0, 1.5, 10.0)
    with pytest.raises(ValueError):
        lcd_vector(np.zeros(2), LCDParams(1.0, 0.1, 1.0))


def test_lcd_subspace_span_e1():
    est = lcd_subspace_lower_estimate(np.eye(4)[:, :1], LCDParams(2.0, 0.1, 10.0), 5, seed=0)
    assert abs(est - LCD_E1) <= 1e-3


def test_lcd_subspace_monotone_in_samples(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((20, 2)))
    params = LCDParams(1.0, 0.1, 20.0)
    ests = [lcd_subspace_lower_estimate(Q, params, m, seed=3) for m in (1, 4, 16)]
    assert ests[0] >= ests[1] >= ests[2]


def test_concentration_constant():
    est = concentration_fn_estimate(np.full(200, 1.5), 0.0)
    assert est.value == 1.0


def test_concentration_gaussian():
    x = np.random.default_rng(0).standard_normal(10 ** 5)
    est = concentration_fn_estimate(x, 0.5)
    assert abs(est.value - 0.3829249225480261) <= 0.02


def test_concentration_monotone_and_ci():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((2000, 2))
    vals = [concentration_fn_estimate(x, t).value for t in (0.1, 0.3, 0.6, 1.0)]
    assert vals == sorted(vals)
    small = concentration_fn_estimate(rng.standard_normal(400), 0.5)
    big = concentration_fn_estimate(rng.standard_normal(40000), 0.5)
    assert big.ci_halfwidth < small.ci_halfwidth / 5


def test_concentration_too_few_samples():
    with pytest.raises(ValueError):
        concentration_fn_estimate(np.zeros(50), 1.0)


def test_bounds():
    n = 100
    assert np.isclose(bound_B(n, n - 1, 0), 1 / n ** 1.5)
    assert np.isclose(bound_C(n, n - 1, 0), 1 / n)
    thr, pb = bound_A(100, 99, 0.5, 1.0, 1.0)
    assert np.isclose(thr, 0.5 / 1000) and np.isclose(pb, 0.5 + math.exp(-100))
    with pytest.raises(ValueError):
        bound_B(100, 10, 1.0)
    with pytest.raises(ValueError):
        bound_A(100, 99, -1, 1, 1)


def test_wilson_interval_contains_estimate():
    lo, hi = wilson_interval(30, 100)
    assert lo < 0.3 < hi
    assert wilson_interval(0, 10)[0] == 0.0
