import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nogaps import nets


# ------------------------------------------------------------ net construction

def test_netspec_validation():
    with pytest.raises(ValueError):
        nets.NetSpec(r=2, t=1.5)
    with pytest.raises(ValueError):
        nets.NetSpec(r=1, t=0.2)  # below 2^(-2)
    with pytest.raises(ValueError):
        nets.NetSpec(r=3, t=0.5, card_constant=1.5)


def test_cardinality_exact():
    assert nets.NetSpec(r=6, t=0.5).cardinality == 16 ** 6
    assert nets.NetSpec(r=2, t=0.3, card_constant=2).cardinality == math.ceil((2 / 0.3) ** 2)
    assert nets.NetSpec(r=3, t=1.0, card_constant=4).cardinality == 64


@given(st.integers(1, 4), st.floats(0.3, 1.0), st.integers(0, 10 ** 6))
@settings(max_examples=20)
def test_net_in_shell(r, t, seed):
    spec = nets.NetSpec(r=r, t=t, card_constant=3)
    net = nets.build_hs_net(spec, seed)
    norms = np.linalg.norm(net.points, axis=1)
    assert len(net) == spec.cardinality
    assert np.all((norms >= 0.5 - 1e-12) & (norms <= 1.5 + 1e-12))


def test_net_seed_determinism():
    spec = nets.NetSpec(r=3, t=0.5, card_constant=4)
    a, b, c = (nets.build_hs_net(spec, s).points for s in (1, 1, 2))
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_net_rejects_large_r():
    with pytest.raises(ValueError):
        nets.build_hs_net(nets.NetSpec(r=13, t=1.0, card_constant=2), 0)


# ------------------------------------------------------------ coverage

def test_coverage_point_in_net(rng):
    X = rng.standard_normal(3)
    X /= np.linalg.norm(X)
    net = nets.Net(np.vstack([nets.sample_shell(rng, 50, 3), X]))
    A = rng.standard_normal((3, 3))
    rep = nets.verify_net(net, 0, None, 1e-12, pairs=[(A, X)])
    assert rep.all_covered and rep.min_dist[0] == 0


def test_coverage_crude_bound(rng):
    r = 4
    net = nets.Net(nets.sample_shell(rng, 3, r))
    rep = nets.verify_net(net, 200, 5, 3 * math.sqrt(r))
    assert rep.all_covered and rep.fraction == 1.0


def test_coverage_monotone_in_t_and_superset(rng):
    pts = nets.sample_shell(rng, 400, 3)
    small, big = nets.Net(pts[:100]), nets.Net(pts)
    ts = [0.1, 0.2, 0.4, 0.8]
    fr = [nets.verify_net(small, 300, 9, t).fraction for t in ts]
    assert fr == sorted(fr)
    for t in ts:
        assert nets.verify_net(big, 300, 9, t).fraction >= nets.verify_net(small, 300, 9, t).fraction


def test_nearest_shortcut_matches_full_scan(rng):
    net = nets.Net(nets.sample_shell(rng, 500, 3))
    rep = nets.verify_net(net, 50, 4, 0.0)  # t = 0 forces the full scan
    pairs_rng = nets.as_rng(4)
    for j in range(50):
        A, X = nets.sample_pair(pairs_rng, 3)
        exact = np.min(np.linalg.norm((X - net.points) @ A.T, axis=1))
        assert np.isclose(rep.min_dist[j], exact)


def test_build_verified_net_small():
    spec = nets.NetSpec(r=3, t=0.5, card_constant=8, retry_cap=2)
    net, rep, attempts = nets.build_verified_net(spec, 0, n_pairs=200)
    assert rep.all_covered and attempts >= 1 and net.seed == (0, attempts - 1)


def test_sample_pair_normalization(rng):
    A, X = nets.sample_pair(rng, 5)
    assert np.isclose(np.linalg.norm(A), math.sqrt(5)) and np.isclose(np.linalg.norm(X), 1)


# ------------------------------------------------------------ HS concentration

def test_hs_mean_isotropy():
    d, r, n = 6, 3, 4000
    rep = nets.hs_concentration_check(d, r, n, seed=1)
    hs2 = rep.ratios ** 2 * r * d
    band = 4 * np.std(hs2) / math.sqrt(n)
    assert abs(rep.mean_hs2 - r * d) <= band


def test_hs_full_space(rng):
    d, r = 5, 4
    M = nets.projected_matrices(3, 200, d, d, r)
    rep = nets.hs_concentration_check(d, r, 4000, seed=3, m=d)
    # orthogonal change of basis preserves the HS norm
    assert abs(rep.mean_hs2 - r * d) <= 4 * math.sqrt(2 * r * d / 4000)
    assert M.shape == (200, d, r)


def test_hs_tail_small_at_two():
    rep = nets.hs_concentration_check(8, 8, 10 ** 4, seed=0)
    assert rep.rd == 64
    assert rep.tail["2.0"] < 0.01


def test_hs_rejects_bad_d():
    with pytest.raises(ValueError):
        nets.hs_concentration_check(5, 2, 10, 0, m=4)


def test_projected_matrices_deterministic():
    a = nets.projected_matrices(11, 7, 8, 4, 2)
    b = nets.projected_matrices(11, 7, 8, 4, 2)
    c = nets.projected_matrices(11, 3, 8, 4, 2, F=None, start=4)
    assert np.array_equal(a, b) and np.array_equal(a[4:], c)


# ------------------------------------------------------------ smin tails

def test_smin_huge_shift():
    W = 1e3 * np.eye(8)[:, :4]
    curve = nets.smin_tail_experiment(8, 4, W=W, n_trials=2000, seed=0)
    assert np.all(curve.counts == 0)


def test_smin_requires_d_ge_r():
    with pytest.raises(ValueError):
        nets.smin_values(3, 4, 10, 0)


def test_smin_tail_monotone_and_stable():
    slopes = []
    for seed in range(3):
        curve = nets.smin_tail_experiment(8, 4, n_trials=20000, seed=seed)
        assert np.all(np.diff(curve.counts) >= 0)
        assert np.all((curve.ci[:, 0] <= curve.probs) & (curve.probs <= curve.ci[:, 1]))
        slopes.append(curve.slope)
    assert max(slopes) - min(slopes) <= 0.5


def test_smin_chunking_consistent():
    a = nets.smin_values(6, 3, 5000, 2)
    b = nets.smin_values(6, 3, 4096, 2)
    assert np.array_equal(a[:4096], b)


# ------------------------------------------------------------ anisotropic checks

def test_tail_energy():
    D = np.diag([3.0, 2.0, 1.0])
    assert np.isclose(nets.tail_energy(D, 1), math.sqrt(14))
    assert np.isclose(nets.tail_energy(D, 3), 1.0)
    assert nets.tail_energy(np.diag([1.0, 1.0, 0.0]), 3) == 0.0


def test_aniso_zero_energy_trivial():
    D = np.diag([1.0, 1.0, 1.0, 0.0])
    rep = nets.aniso_distance_checks(D, "first", 200, 0, p=2, h=4)
    assert rep.threshold == 0 and rep.fraction == 1.0


def test_aniso_identity_single_vector():
    m = 50
    rep = nets.aniso_distance_checks(np.eye(m), "first", 2000, 1, p=1, h=m)
    assert abs(np.mean(rep.stats) - math.sqrt(m)) < 0.1
    assert np.all(np.abs(rep.stats - math.sqrt(m)) < 5)


def test_aniso_second_type():
    D = np.diag([1.0] + [0.01] * 9)
    rep = nets.aniso_distance_checks(D, "second", 10 ** 4, 0, h=1, c=0.1)
    assert rep.fraction >= 0.95


def test_aniso_bad_kind():
    with pytest.raises(ValueError):
        nets.aniso_distance_checks(np.eye(2), "third", 1, 0)
