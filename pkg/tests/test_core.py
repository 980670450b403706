import numpy as np
import pytest
from hypothesis import given, strategies as st

from nogaps.core import (
    Ellipsoid,
    FieldTag,
    dist_to_ellipsoid,
    eigenpairs,
    field_of,
    inner,
    orthonormal_complement_basis,
    project,
    real_eigenpairs,
    real_embed,
    real_embed_ellipsoid,
    singular_values,
)
from nogaps.errors import FieldMismatch, NonOrthogonalGenerators, RankDeficient

from conftest import gauss

seeds = st.integers(0, 2 ** 32 - 1)


def test_field_tag():
    assert field_of(np.ones(2)) is FieldTag.REAL
    assert field_of(np.ones(2) * 1j) is FieldTag.COMPLEX


def test_complement_of_e1_in_plane():
    Q = orthonormal_complement_basis(np.array([[1.0], [0.0]]))
    assert Q.shape == (2, 1)
    assert np.allclose(np.abs(Q[:, 0]), [0, 1])


def test_complement_of_two_axes():
    Q = orthonormal_complement_basis(np.eye(3)[:, :2])
    assert np.allclose(np.abs(Q[:, 0]), [0, 0, 1])


@pytest.mark.parametrize("cf", [False, True])
def test_complement_random(rng, cf):
    cols = gauss(rng, (6, 2), cf)
    Q = orthonormal_complement_basis(cols)
    assert Q.shape == (6, 4)
    assert np.max(np.abs(Q.conj().T @ cols)) < 1e-10
    assert np.allclose(Q.conj().T @ Q, np.eye(4), atol=1e-10)


def test_complement_rank_deficient():
    cols = np.array([[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]])
    with pytest.raises(RankDeficient):
        orthonormal_complement_basis(cols)
    Q = orthonormal_complement_basis(cols, require_full_rank=False)
    assert Q.shape == (3, 2)


def test_complement_rejects_nonfinite():
    with pytest.raises(ValueError):
        orthonormal_complement_basis(np.array([[np.nan], [1.0]]))


@given(seeds, st.integers(2, 9), st.booleans())
def test_projection_idempotence(seed, m, cf):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, m))
    cols = gauss(rng, (m, k), cf)
    Q = orthonormal_complement_basis(cols)
    assert np.max(np.linalg.norm(project(cols, Q), axis=0)) <= 1e-10 * max(1, np.abs(cols).max())


def test_singular_values_examples():
    assert np.allclose(singular_values(np.eye(2)), [1, 1])
    assert np.allclose(singular_values(np.diag([3.0, 0.0])), [3, 0])


@given(seeds, st.booleans())
def test_singular_values_hs_identity(seed, cf):
    rng = np.random.default_rng(seed)
    M = gauss(rng, (int(rng.integers(1, 8)), int(rng.integers(1, 8))), cf)
    s = singular_values(M)
    assert np.all(np.diff(s) <= 0) and np.all(s >= 0)
    assert abs(np.sum(s ** 2) - np.linalg.norm(M) ** 2) <= 1e-9 * np.linalg.norm(M) ** 2


def test_eigenpairs_swap():
    pairs = eigenpairs(np.array([[0.0, 1.0], [1.0, 0.0]]))
    lams = sorted(p.lam for p in pairs)
    assert np.allclose(lams, [-1, 1])
    for p in pairs:
        assert np.isrealobj(p.v)
        expect = np.array([1.0, p.lam]) / np.sqrt(2)
        assert np.isclose(abs(np.dot(p.v, expect)), 1)


def test_eigenpairs_diagonal():
    pairs = eigenpairs(np.diag([2.0, 3.0]))
    for p in pairs:
        e = np.eye(2)[int(p.lam) - 2]
        assert np.isclose(abs(np.dot(p.v, e)), 1)


@pytest.mark.parametrize("cf", [False, True])
def test_eigen_residuals_random(rng, cf):
    A = gauss(rng, (20, 20), cf)
    pairs = eigenpairs(A)
    assert len(pairs) == 20
    for p in pairs:
        assert abs(np.linalg.norm(p.v) - 1) < 1e-12
        assert np.linalg.norm(A @ p.v - p.lam * p.v) <= 1e-8 * np.linalg.norm(A)


def test_real_matrix_conjugate_closure(rng):
    A = rng.standard_normal((20, 20))
    lams = np.array([complex(p.lam) for p in eigenpairs(A)])
    assert np.allclose(np.sort_complex(lams), np.sort_complex(lams.conj()))
    for p in real_eigenpairs(A):
        assert np.isrealobj(p.v)
        assert np.linalg.norm(A @ p.v - p.lam * p.v) <= 1e-8 * np.linalg.norm(A)


def test_dist_unit_disc():
    E = Ellipsoid(np.eye(2))
    assert np.isclose(dist_to_ellipsoid(np.array([2.0, 0.0]), E), 1.0, atol=1e-10)


def test_dist_semi_axis_two():
    E = Ellipsoid(np.column_stack([[2.0, 0.0], [0.0, 1.0]]))
    assert np.isclose(dist_to_ellipsoid(np.array([3.0, 0.0]), E), 1.0, atol=1e-10)


def test_dist_inside_is_zero():
    E = Ellipsoid(np.column_stack([[2.0, 0.0], [0.0, 1.0]]))
    assert dist_to_ellipsoid(np.array([0.5, 0.5]), E) == 0.0
    assert dist_to_ellipsoid(np.array([1.0, 0.1]), E, delta=3.0) == 0.0


def test_dist_delta_zero_and_empty():
    x = np.array([3.0, 4.0])
    assert dist_to_ellipsoid(x, Ellipsoid(np.eye(2)), delta=0.0) == 5.0
    assert dist_to_ellipsoid(x, Ellipsoid(np.zeros((2, 0)))) == 5.0


# Nearest points found by parametrizing the ellipse boundary (2e6 angles,
# then a scalar refinement), independently of the secular-equation solver.
ELLIPSE_ORACLE = [
    ((3.0, 2.0), [[2.0, 0.0], [0.0, 1.0]], 1.0, 1.9640493175395692),
    ((1.0, 1.0, 1.0), [[1.0, 0.5], [0.0, 1.0], [0.0, 0.0]], 1.0, 1.0107535135293384),
    ((0.3, -2.0), [[1.0, 0.2], [0.4, 0.3]], 2.0, 1.5604869157613284),
    ((5.0, 0.1), [[3.0, 0.0], [0.0, 0.0]], 1.0, 2.0024984394500787),
]


@pytest.mark.parametrize("x, G, delta, expected", ELLIPSE_ORACLE)
def test_dist_against_boundary_oracle(x, G, delta, expected):
    d = dist_to_ellipsoid(np.array(x), Ellipsoid(np.array(G)), delta)
    assert abs(d - expected) < 1e-10


def test_dist_rejects_mixed_fields():
    with pytest.raises(FieldMismatch):
        dist_to_ellipsoid(np.array([1.0, 1j]), Ellipsoid(np.eye(2)))


@given(seeds, st.booleans())
def test_dist_is_lipschitz(seed, cf):
    rng = np.random.default_rng(seed)
    m, k = int(rng.integers(1, 6)), int(rng.integers(0, 5))
    E = Ellipsoid(gauss(rng, (m, k), cf))
    x, y = 2 * gauss(rng, m, cf), 2 * gauss(rng, m, cf)
    dl = float(rng.uniform(0, 2))
    dx, dy = dist_to_ellipsoid(x, E, dl), dist_to_ellipsoid(y, E, dl)
    assert abs(dx - dy) <= np.linalg.norm(x - y) + 1e-10


@given(seeds)
def test_dist_matches_nearest_point_conditions(seed):
    # the distance is attained: some a with ||a|| <= 1 realizes it, and no
    # random feasible point does better
    rng = np.random.default_rng(seed)
    m, k = int(rng.integers(2, 6)), int(rng.integers(1, 4))
    G = rng.standard_normal((m, k))
    x = 3 * rng.standard_normal(m)
    d = dist_to_ellipsoid(x, Ellipsoid(G))
    a = rng.standard_normal((2000, k))
    a /= np.maximum(1, np.linalg.norm(a, axis=1))[:, None]
    assert np.min(np.linalg.norm(x[None, :] - a @ G.T, axis=1)) >= d - 1e-10


def test_real_embed_examples():
    assert np.allclose(real_embed(np.array([1 + 1j])), [1, 1])


@given(seeds, st.integers(1, 8))
def test_real_embed_isometry_and_inner(seed, m):
    rng = np.random.default_rng(seed)
    x, y = gauss(rng, m, True), gauss(rng, m, True)
    assert np.isclose(np.linalg.norm(real_embed(x)), np.linalg.norm(x))
    assert np.isclose(real_embed(x) @ real_embed(y), inner(x, y).real)


@given(seeds)
def test_real_embed_commutes_with_projection(seed):
    rng = np.random.default_rng(seed)
    m, k = int(rng.integers(2, 7)), int(rng.integers(1, 4))
    Q, _ = np.linalg.qr(gauss(rng, (m, min(k, m)), True))
    Y = gauss(rng, m, True)
    E = real_embed_ellipsoid(Ellipsoid(Q))
    P = E.generators
    lhs = P @ (P.T @ real_embed(Y))
    rhs = real_embed(Q @ (Q.conj().T @ Y))
    assert np.allclose(lhs, rhs, atol=1e-9)


def test_real_embed_ellipsoid_e1():
    E = real_embed_ellipsoid(Ellipsoid(np.array([[1.0 + 0j], [0.0]])))
    G = E.generators
    assert G.shape == (4, 2)
    assert np.allclose(G[:, 0], [1, 0, 0, 0]) and np.allclose(G[:, 1], [0, 0, 1, 0])
    assert np.allclose(G.T @ G, np.eye(2))


def test_real_embed_ellipsoid_needs_orthogonal():
    G = np.array([[1.0, 1.0], [0.0, 1.0]], dtype=complex)
    with pytest.raises(NonOrthogonalGenerators):
        real_embed_ellipsoid(Ellipsoid(G))


def test_real_embed_ellipsoid_distance_preserved(rng):
    Q, _ = np.linalg.qr(gauss(rng, (5, 2), True))
    E = Ellipsoid(Q * np.array([2.0, 0.5]))
    x = 3 * gauss(rng, 5, True)
    assert np.isclose(dist_to_ellipsoid(x, E), dist_to_ellipsoid(real_embed(x), real_embed_ellipsoid(E)), atol=1e-10)
