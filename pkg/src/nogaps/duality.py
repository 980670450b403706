"""Test projections, dual bases, class vectors and the Upsilon discretization.

Conventions
-----------
Sequences of vectors (U_i, V_i, W_i, ...) are stored as the columns of an
(n, N) array.  Indices in the API are 0-based, so the distinguished last
vector W_N is column ``N - 1``.  Permutations are tuples ``sigma`` with
``sigma[pos]`` the original index placed at position ``pos``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    Ellipsoid,
    as_array,
    dist_to_ellipsoid,
    inner,
    orthonormal_complement_basis,
    project,
    singular_values,
)
from .errors import (
    BudgetExceeded,
    CertificateInvalid,
    HypothesisViolated,
    LatticePointNotFound,
    PreconditionViolated,
    SingularSubmatrix,
    SingularSystem,
)

BIO_TOL = 1e-8
LOG_TOL = 1e-8


# ---------------------------------------------------------------- projections

@dataclass(frozen=True, eq=False)
class TestProjectionContext:
    A: np.ndarray
    z: complex
    N: int
    F_basis: np.ndarray
    U: np.ndarray

    __test__ = False  # keep pytest from collecting this class


def _scalar(z):
    z = complex(z)
    return z.real if z.imag == 0 else z


def build_test_projection(A, z, N) -> TestProjectionContext:
    """F = orthogonal complement of columns N+1..n of A - zI, and
    U_i = P_F(-z e_i) for i = 1..N."""
    A = as_array(A, ndim=2, name="A")
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("A must be square")
    if not 1 <= N < n:
        raise ValueError("need 1 <= N < n")
    z = _scalar(z)
    Az = A - z * np.eye(n)
    F = orthonormal_complement_basis(Az[:, N:])
    U = -z * (F @ F.conj().T[:, :N])
    return TestProjectionContext(A, z, N, F, U)


@dataclass(frozen=True, eq=False)
class DualBasisData:
    D: np.ndarray
    q: np.ndarray
    V: np.ndarray


def dual_basis(ctx: TestProjectionContext, rank_tol=1e-10) -> DualBasisData:
    """Explicit dual sequence V_i = (-conj(z)^-1 e_i) + D q_i of the U_i.

    D = conj(z)^-1 (Atilde^H - conj(z) I)^-1, where Atilde is the lower-right
    (n-N) block of A, and q_i is the conjugate of row i of the upper-right
    block.
    """
    z, N, A = ctx.z, ctx.N, ctx.A
    if z == 0:
        raise PreconditionViolated("z must be nonzero")
    n = A.shape[0]
    zc = np.conj(z)
    At = A[N:, N:]
    S = At.conj().T - zc * np.eye(n - N)
    s = singular_values(S)
    if s[-1] <= rank_tol * s[0]:
        raise SingularSubmatrix("Atilde - zI is numerically singular")
    D = np.linalg.inv(S) / zc
    q = A[:N, N:].conj().T  # column i is q_i
    V = np.zeros((n, N), dtype=np.result_type(D, q, zc))
    V[:N, :] = -np.eye(N) / zc
    V[N:, :] = D @ q
    return DualBasisData(D, q, V)


def biorthogonality_error(U, V):
    """max |<U_i, V_j> - delta_ij| with entries normalized by ||U_i|| ||V_j||."""
    G = V.conj().T @ U  # G[j, i] = <U_i, V_j>
    scale = np.outer(np.linalg.norm(V, axis=0), np.linalg.norm(U, axis=0))
    return float(np.max(np.abs(G - np.eye(G.shape[0])) / np.maximum(scale, 1e-300)))


@dataclass(frozen=True, eq=False)
class PerturbedDual:
    W: np.ndarray
    kappa: complex
    delta: float


def perturbed_dual(dual: DualBasisData, z, delta) -> PerturbedDual:
    """W_i = V_i - (conj(z)^-1/|z^-1|) delta e_i.

    The first N coordinates of W_i are kappa e_i with
    kappa = -(conj(z)^-1/|z^-1|)(|z^-1| + delta).
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    z = _scalar(z)
    if z == 0:
        raise PreconditionViolated("z must be nonzero")
    unit = (1 / np.conj(z)) / abs(1 / z)
    N = dual.V.shape[1]
    W = dual.V.copy()
    W[:N, :] -= unit * delta * np.eye(N)
    kappa = -unit * (abs(1 / z) + delta)
    return PerturbedDual(W, _scalar(kappa), float(delta))


def dual_sequence(U):
    """Dual basis Y of the columns of U inside span(U): <U_i, Y_j> = delta_ij."""
    U = as_array(U, ndim=2, name="U")
    G = U.conj().T @ U
    return U @ np.linalg.inv(G)


# -------------------------------------------------------------------- classes

@dataclass(frozen=True)
class ClassB:
    R: float
    b: tuple


@dataclass(frozen=True)
class ClassP:
    r: float
    p: tuple


def dyadic_floor(x):
    """Integer b with 2^b <= x < 2^(b+1), exact at powers of two."""
    m, e = math.frexp(x)
    return e - 1


def classify_ellipsoid(E, R) -> ClassB:
    """b_i = floor(log2(min(max(s_i, 1), R))) for the semi-axes s_i of E."""
    if R <= 1:
        raise ValueError("R must exceed 1")
    s = E.semi_axes if isinstance(E, Ellipsoid) else singular_values(E)
    b = tuple(dyadic_floor(min(max(float(si), 1.0), R)) for si in s)
    return ClassB(float(R), b)


@dataclass(frozen=True, eq=False)
class SigmaOrder:
    sigma: tuple
    d: np.ndarray


def classify_distances(order: SigmaOrder, r) -> ClassP:
    """p_i = floor(log2(min(max(d_i, r), 1)))."""
    if not 0 < r < 1:
        raise ValueError("r must lie in (0, 1)")
    p = tuple(dyadic_floor(min(max(float(di), r), 1.0)) for di in order.d)
    return ClassP(float(r), p)


def _residualize(Q, X):
    # two passes of classical Gram-Schmidt keep the residual orthogonal
    for _ in range(2):
        if Q.shape[1]:
            X = X - Q @ (Q.conj().T @ X)
    return X


def greedy_gram_schmidt(W, sigma=None, tie_tol=1e-12):
    """Greedy farthest-from-span ordering of the columns of W.

    At each step the remaining column farthest from the span of those
    already chosen is taken (smallest index on ties, up to a relative
    ``tie_tol``).  If ``sigma`` is given that order is used instead.

    Returns (sigma, d, Q, R) with Q the orthonormal Gram-Schmidt basis in
    the chosen order and R[j, i] = <W_sigma(i), Q_j> upper triangular with
    R[i, i] = d_i.
    """
    W = as_array(W, ndim=2, name="W")
    n, N = W.shape
    dtype = np.complex128 if np.iscomplexobj(W) else np.float64
    Q = np.zeros((n, 0), dtype=dtype)
    remaining = list(range(N))
    chosen, d = [], []
    for pos in range(N):
        res = _residualize(Q, W[:, remaining])
        norms = np.linalg.norm(res, axis=0)
        if sigma is None:
            top = norms.max()
            j = int(np.flatnonzero(norms >= top - tie_tol * top)[0])
        else:
            j = remaining.index(sigma[pos])
        idx = remaining.pop(j)
        chosen.append(idx)
        d.append(float(norms[j]))
        if norms[j] > 0:
            Q = np.column_stack([Q, res[:, j] / norms[j]])
        else:
            Q = np.column_stack([Q, np.zeros(n, dtype=dtype)])
    Wp = W[:, chosen]
    R = np.triu(Q.conj().T @ Wp)
    return tuple(chosen), np.array(d), Q, R


def sigma_order(W) -> SigmaOrder:
    sigma, d, _, _ = greedy_gram_schmidt(W)
    return SigmaOrder(sigma, d)


# ------------------------------------------------------------------- checkers

@dataclass(frozen=True)
class CheckResult:
    passed: bool
    slack: float
    lhs: float
    rhs: float


def w_dist_estimate_slack(W, order: SigmaOrder | None = None):
    """min_i (d_i sqrt(N-i+1) - s_i(W)) / max(1, s_i(W))."""
    order = order or sigma_order(W)
    s = singular_values(W)
    N = len(s)
    scale = np.sqrt(N - np.arange(N))
    return float(np.min((order.d * scale - s) / np.maximum(1.0, s)))


def volume_identity_gap(W, order: SigmaOrder | None = None):
    """|sum log d_i - sum log s_i(W)|, zero when prod d_i = prod s_i."""
    order = order or sigma_order(W)
    s = singular_values(W)
    return float(abs(np.sum(np.log(order.d)) - np.sum(np.log(s))))


def w_y_singular_slack(W, Y, delta):
    """min_i (s_i(Y) + delta sqrt(N) - s_i(W))."""
    N = W.shape[1]
    return float(np.min(singular_values(Y) + delta * np.sqrt(N) - singular_values(W)))


def check_geom_part1(W, class_b: ClassB, tol=LOG_TOL) -> CheckResult:
    """prod min(d_i, 1) <= (4N)^(N/2) 2^(-sum b_i), in log space.

    Needs R <= delta^-1 N^-1/2, where delta is the perturbation of W.
    """
    if not isinstance(W, PerturbedDual):
        raise TypeError("W must be a PerturbedDual")
    N = W.W.shape[1]
    if class_b.R > 1 / (W.delta * math.sqrt(N)) * (1 + 1e-12):
        raise PreconditionViolated("R exceeds 1/(delta sqrt(N))")
    d = sigma_order(W.W).d
    lhs = float(np.sum(np.log(np.minimum(d, 1.0))))
    rhs = 0.5 * N * math.log(4 * N) - math.log(2) * sum(class_b.b)
    return CheckResult(rhs - lhs >= -tol, rhs - lhs, lhs, rhs)


def check_ellipsoid_to_distance(W, class_b: ClassB, r=None, tol=LOG_TOL):
    """2^(sum p_i) 2^(sum b_i) <= (4N)^(N/2), with p built at scale r (default delta)."""
    if not isinstance(W, PerturbedDual):
        raise TypeError("W must be a PerturbedDual")
    N = W.W.shape[1]
    r = W.delta if r is None else r
    class_p = classify_distances(sigma_order(W.W), r)
    lhs = math.log(2) * (sum(class_p.p) + sum(class_b.b))
    rhs = 0.5 * N * math.log(4 * N)
    return class_p, CheckResult(rhs - lhs >= -tol, rhs - lhs, lhs, rhs)


def lemma_determ_check(B, u, theta, beta, tau, I_theta, J_beta, tol=1e-10) -> CheckResult:
    """beta sqrt(r) s_min(M') <= theta sqrt(k) s_max(M) + tau.

    F is the orthogonal complement of the columns of B outside I and J;
    M and M' are the projections onto F of the columns in I (k of them) and
    in J (r of them).  s_min(M') is the r-th singular value, zero if r
    exceeds dim F.
    """
    B = as_array(B, ndim=2, name="B")
    u = as_array(u, ndim=1, name="u")
    I, J = sorted(set(I_theta)), sorted(set(J_beta))
    fails = []
    if not beta > theta:
        fails.append("beta > theta")
    if not theta > 0:
        fails.append("theta > 0")
    if not I or not J:
        fails.append("I and J nonempty")
    if set(I) & set(J):
        fails.append("I and J disjoint")
    if np.linalg.norm(B @ u) > tau:
        fails.append("||Bu|| <= tau")
    if I and np.max(np.abs(u[I])) > theta:
        fails.append("|u_i| <= theta on I")
    if J and np.min(np.abs(u[J])) < beta:
        fails.append("|u_j| >= beta on J")
    if fails:
        raise PreconditionViolated(fails)
    outside = [j for j in range(B.shape[1]) if j not in set(I) | set(J)]
    F = orthonormal_complement_basis(B[:, outside], require_full_rank=False)
    M = project(B[:, I], F)
    Mp = project(B[:, J], F)
    k, r = len(I), len(J)
    sp = singular_values(Mp)
    smin = float(sp[r - 1]) if r <= min(Mp.shape) else 0.0
    smax = float(singular_values(M)[0])
    lhs = beta * math.sqrt(r) * smin
    rhs = theta * math.sqrt(k) * smax + tau
    scale = max(1.0, rhs)
    slack = (rhs - lhs) / scale
    return CheckResult(slack >= -tol, slack, lhs, rhs)


@dataclass(frozen=True)
class TwoConditions:
    a: bool
    b: bool
    dist_a: float
    radius_a: float
    dist_b: float
    radius_b: float


def two_conditions_check(ctx: TestProjectionContext, v, theta, beta, tau, T, tol=1e-10):
    """Test the two ellipsoid inclusions implied by a localized eigenvector.

    E' is generated by U_1..U_{N-1} and scaled by theta sqrt(N)/beta.
    (a) dist(P_F(-z e_N), E') <= tau/beta + T N theta/beta + T
    (b) dist(P_F col_N(A - zI), E') <= tau/beta + T N theta/beta
    """
    v = getattr(v, "v", v)
    v = as_array(v, ndim=1, name="v")
    A, z, N, F = ctx.A, ctx.z, ctx.N, ctx.F_basis
    n = A.shape[0]
    Az = A - z * np.eye(n)
    fails = []
    if not beta > 0:
        fails.append("beta > 0")
    if np.linalg.norm(Az @ v) > tau:
        fails.append("||(A - z)v|| <= tau")
    if N > 1 and np.max(np.abs(v[: N - 1])) > theta:
        fails.append("|v_i| <= theta for i < N")
    if abs(v[N - 1]) < beta:
        fails.append("|v_N| >= beta")
    pa = np.linalg.norm(project(A[:, :N], F), axis=0)
    if np.max(pa) > T:
        fails.append("||P_F col_l(A)|| <= T for l <= N")
    if fails:
        raise PreconditionViolated(fails)
    E = Ellipsoid(ctx.U[:, : N - 1])
    scale = theta * math.sqrt(N) / beta
    xa = ctx.U[:, N - 1]
    xb = project(Az[:, N - 1], F)
    da = dist_to_ellipsoid(xa, E, scale)
    db = dist_to_ellipsoid(xb, E, scale)
    rb = tau / beta + T * N * theta / beta
    ra = rb + T
    return TwoConditions(da <= ra * (1 + tol) + tol, db <= rb * (1 + tol) + tol, da, ra, db, rb)


# -------------------------------------------------------------------- witness

def witness_Y(U, c, w, delta, T, Y_dual=None, tol=1e-9):
    """Vector Y = sum_i a_i U_i with a = (delta c, -1), given the membership
    U_N = delta sum_{i<N} c_i U_i + T w.

    Then Y = -T w, so ||Y|| <= T, and against the dual sequence Y_l of U,
    <Y_N, Y> = -1 and sum_{l<N} |<Y_l, Y>|^2 <= delta^2.  The last two are
    verified when ``Y_dual`` is supplied.
    """
    U = as_array(U, ndim=2, name="U")
    c = as_array(c, ndim=1, name="c")
    w = as_array(w, ndim=1, name="w")
    N = U.shape[1]
    if c.shape[0] != N - 1:
        raise ValueError("c must have N-1 entries")
    if np.linalg.norm(c) > 1 + tol or np.linalg.norm(w) > 1 + tol:
        raise CertificateInvalid("need ||c|| <= 1 and ||w|| <= 1")
    target = delta * (U[:, :-1] @ c) + T * w
    if np.linalg.norm(U[:, -1] - target) > tol * max(1.0, np.linalg.norm(U[:, -1])):
        raise CertificateInvalid("U_N does not match delta*sum c_i U_i + T*w")
    a = np.concatenate([delta * c, [-1.0]])
    Y = U @ a
    if np.linalg.norm(Y) > T * (1 + tol) + tol:
        raise CertificateInvalid("||Y|| exceeds T")
    if Y_dual is not None:
        prods = np.array([inner(Y_dual[:, l], Y) for l in range(N)])
        if abs(abs(prods[-1]) - 1) > tol:
            raise CertificateInvalid("|<Y_N, Y>| != 1")
        if np.sum(np.abs(prods[:-1]) ** 2) > delta ** 2 * (1 + 1e-6):
            raise CertificateInvalid("sum |<Y_l, Y>|^2 exceeds delta^2")
    return Y


def rescale_witness(Y, W):
    """c Y with c = 1/<Y, W_N>, so that <cY, W_N> = 1."""
    p = inner(Y, W[:, -1])
    if p == 0:
        raise CertificateInvalid("<Y, W_N> vanishes")
    c = 1 / p
    return c * Y, c


# ------------------------------------------------------------------- Upsilon

@dataclass(frozen=True, eq=False)
class UpsilonCertificate:
    sigma: tuple
    J: tuple
    k: tuple
    Z: np.ndarray
    delta_prime: float
    T: float


def product_bound(N, delta_prime):
    return 2 * math.sqrt(2) * (N + 1) * delta_prime


def _is_real_field(*arrays):
    return not any(np.iscomplexobj(a) for a in arrays)


def _lattice_round(value, real_field):
    if real_field:
        return complex(round(value.real))
    return complex(round(value.real), round(value.imag))


def _on_lattice(value, delta_prime, real_field, tol):
    x = value / delta_prime
    k = _lattice_round(x, real_field)
    if real_field and abs(complex(x).imag) > tol:
        return None
    return k if abs(x - k) <= tol else None


def _lattice_value(k, real_field):
    return float(k.real) if real_field else complex(k)


def construct_Z(W, sigma, J, k, delta_prime, tol=1e-9):
    """Unique Z in span(W) with <Z, W_N> = 1, <Z, W_sigma(i)> = k_i delta' for
    positions i in J, and <Z, g_i> = 0 for the other positions, where g_i is
    the Gram-Schmidt residual of W_sigma(i) against earlier positions.

    ``J`` holds positions (0-based) and ``k`` the matching lattice values.
    """
    W = as_array(W, ndim=2, name="W")
    n, N = W.shape
    sigma = tuple(int(s) for s in sigma)
    if sorted(sigma) != list(range(N)):
        raise ValueError("sigma must be a permutation of range(N)")
    q = sigma.index(N - 1)
    J = tuple(int(j) for j in J)
    if q in J:
        raise ValueError("J may not contain the position of W_N")
    if len(k) != len(J):
        raise ValueError("k must match J")
    kmap = dict(zip(J, k))
    Ub, s, _ = np.linalg.svd(W, full_matrices=False)
    if s[-1] <= 1e-12 * s[0]:
        raise SingularSystem("W is numerically rank deficient")
    _, _, Qgs, R = greedy_gram_schmidt(W, sigma=sigma)
    G = Qgs * np.diag(R)[None, :]
    real_field = _is_real_field(W) and all(complex(v).imag == 0 for v in k)
    dtype = np.float64 if real_field else np.complex128
    H = np.zeros((n, N), dtype=dtype)
    rhs = np.zeros(N, dtype=dtype)
    for pos in range(N):
        if pos == q:
            H[:, pos], rhs[pos] = W[:, N - 1], 1.0
        elif pos in kmap:
            val = complex(kmap[pos]) * delta_prime
            H[:, pos], rhs[pos] = W[:, sigma[pos]], val.real if real_field else val
        else:
            H[:, pos] = G[:, pos]
    M = H.conj().T @ Ub  # row pos: <Ub b, h_pos> = h_pos^H Ub b
    sm = singular_values(M)
    if sm[-1] <= 1e-12 * sm[0]:
        raise SingularSystem("constraint system is singular")
    b = np.linalg.solve(M, rhs)
    Z = Ub @ b
    res = np.linalg.norm(H.conj().T @ Z - rhs)
    if res > tol * max(1.0, np.linalg.norm(rhs)):
        raise SingularSystem(f"residual {res:.2e} above tolerance")
    return Z


@dataclass(frozen=True)
class UpsilonReport:
    member: bool
    failures: tuple


def verify_upsilon(W, Z, delta_prime, T, sigma=None, tol=1e-8) -> UpsilonReport:
    """Check the membership conditions of Upsilon(W, delta', T) for Z."""
    W = as_array(W, ndim=2, name="W")
    Z = as_array(Z, ndim=1, name="Z")
    N = W.shape[1]
    sigma, _, Qgs, R = greedy_gram_schmidt(W, sigma=sigma)
    real_field = _is_real_field(W, Z)
    fails = []
    Ub, _, _ = np.linalg.svd(W, full_matrices=False)
    if np.linalg.norm(Z - project(Z, Ub)) > tol * max(1.0, np.linalg.norm(Z)):
        fails.append("Z not in span(W)")
    if np.linalg.norm(Z) > T * (1 + tol) + tol:
        fails.append("||Z|| > T")
    if abs(inner(Z, W[:, -1]) - 1) > tol:
        fails.append("<Z, W_N> != 1")
    bound = product_bound(N, delta_prime)
    for pos in range(N):
        if sigma[pos] == N - 1:
            continue
        p = inner(Z, W[:, sigma[pos]])
        if abs(p) > bound * (1 + tol) + tol:
            fails.append(f"|<Z, W'_{pos}>| above bound")
        gnorm = R[pos, pos]
        g_prod = inner(Z, Qgs[:, pos]) * gnorm
        on_lat = _on_lattice(p, delta_prime, real_field, tol * max(1.0, 1 / delta_prime))
        if on_lat is None and abs(g_prod) > tol * max(1.0, gnorm):
            fails.append(f"position {pos}: neither on lattice nor orthogonal")
    return UpsilonReport(not fails, tuple(fails))


def extract_upsilon_parameters(W, Z, delta_prime, sigma=None, tol=1e-8):
    """(sigma, J, k) such that construct_Z reproduces the Upsilon member Z.

    Positions whose product lies on the lattice are put in J; the others
    must have zero Gram-Schmidt component.
    """
    W = as_array(W, ndim=2, name="W")
    N = W.shape[1]
    sigma, _, _, _ = greedy_gram_schmidt(W, sigma=sigma)
    real_field = _is_real_field(W, Z)
    J, k = [], []
    for pos in range(N):
        if sigma[pos] == N - 1:
            continue
        kk = _on_lattice(inner(Z, W[:, sigma[pos]]), delta_prime, real_field, tol * max(1.0, 1 / delta_prime))
        if kk is not None:
            J.append(pos)
            k.append(_lattice_value(kk, real_field))
    return sigma, tuple(J), tuple(k)


def _lattice_candidates(center, radius, kmax, real_field):
    """Lattice points k (|k| < kmax) with |k - center| <= radius, nearest first."""
    cap = math.floor(kmax) if math.isfinite(kmax) else math.inf

    def span(x):
        lo, hi = max(math.ceil(x - radius), -cap), min(math.floor(x + radius), cap)
        return np.arange(lo, hi + 1) if lo <= hi else np.zeros(0)

    re = span(center.real)
    im = np.zeros(1) if real_field else span(center.imag)
    ks = (re[:, None] + 1j * im[None, :]).ravel()
    ks = ks[(np.abs(ks) < kmax) & (np.abs(ks - center) <= radius)]
    order = np.lexsort((ks.imag, ks.real, np.abs(ks - center)))
    return list(ks[order])


def upsilon_search(W, delta_prime, T, budget=10 ** 6, tol=1e-9):
    """Depth-first search of Upsilon(W, delta', T) in the sigma_W order.

    Writes Z = sum_j zeta_j Q_j in the Gram-Schmidt basis of W.  Position i
    either has zeta_i = 0 (orthogonal to the residual g_i) or puts
    <Z, W'_i> on the lattice delta'(Z + iZ), or delta' Z for real W; the
    position of W_N solves <Z, W_N> = 1.  Branches are pruned by the norm
    cap T, which makes the search exact.  Options are explored by
    increasing |zeta_i|.

    Returns the first certificate found, or None when the space is empty.
    Raises BudgetExceeded if ``budget`` nodes are visited first.
    """
    W = as_array(W, ndim=2, name="W")
    n, N = W.shape
    sigma, d, Q, R = greedy_gram_schmidt(W)
    if np.min(d) <= 1e-12 * np.max(d):
        raise SingularSystem("W is numerically rank deficient")
    real_field = _is_real_field(W)
    q = sigma.index(N - 1)
    bound = product_bound(N, delta_prime)
    kmax = bound / delta_prime
    T2 = T * T * (1 + tol)
    zeta = np.zeros(N, dtype=np.float64 if real_field else np.complex128)
    choice = [None] * N
    visits = 0

    def options(pos, used):
        v = complex(np.dot(zeta[:pos], np.conj(R[:pos, pos])))
        rem = max(T2 - used, 0.0)
        if pos == q:
            zq = (1 - v) / d[pos]
            return [(zq, None)] if abs(zq) ** 2 <= rem else []
        radius = math.sqrt(rem) * d[pos]
        opts = []
        free_k = _on_lattice(v, delta_prime, real_field, tol)
        if free_k is not None and abs(free_k) < kmax:
            opts.append((0.0, free_k))
        elif abs(v) <= bound * (1 + tol):
            opts.append((0.0, None))
        for kk in _lattice_candidates(v / delta_prime, radius / delta_prime, kmax, real_field):
            if free_k is not None and kk == free_k:
                continue
            z = (kk * delta_prime - v) / d[pos]
            opts.append((z, kk))
        return opts

    def dfs(pos, used):
        nonlocal visits
        if pos == N:
            return True
        for z, kk in options(pos, used):
            visits += 1
            if visits > budget:
                raise BudgetExceeded(f"visited {budget} nodes")
            zeta[pos] = z.real if real_field else z
            choice[pos] = kk
            if dfs(pos + 1, used + abs(z) ** 2):
                return True
        zeta[pos] = 0
        choice[pos] = None
        return False

    if not dfs(0, 0.0):
        return None
    Z = Q @ zeta
    J = tuple(p for p in range(N) if p != q and choice[p] is not None)
    k = tuple(_lattice_value(choice[p], real_field) for p in J)
    return UpsilonCertificate(sigma, J, k, Z, float(delta_prime), float(T))


def reduce_to_upsilon(W, Y, delta, delta_prime, tol=1e-9, verify_tol=1e-8):
    """Move Y into Upsilon(W, delta', T) with T = ||Y|| + sqrt(2) N delta'/delta.

    Follows the sigma_W Gram-Schmidt order.  With g_m the residual of W'_m
    and Z'' the component of the current Z along g_m:

    * at the position of W_N, Z is shifted along g_m so <Z, W_N> = 1;
    * if |<Z'', W'_m>| <= sqrt(2) delta', the component is dropped;
    * otherwise Z'' is rescaled by zeta chosen so that <Z, W'_m> lands on a
      lattice point lambda with |lambda - b| <= sqrt(2) delta' and
      |a + lambda - b| <= |a| (a = <Z'', W'_m>, b = <Z, W'_m>), which keeps
      zeta within the unit disc.

    The result is projected onto span(W) and verified.
    """
    W = as_array(W, ndim=2, name="W")
    Y = as_array(Y, ndim=1, name="Y")
    n, N = W.shape
    real_field = _is_real_field(W, Y)
    fails = []
    pN = inner(Y, W[:, -1])
    if abs(abs(pN) - 1) > tol:
        fails.append("|<Y, W_N>| = 1")
    if N > 1 and np.max(np.abs(W[:, :-1].conj().T @ Y)) > delta_prime * (1 + tol) + tol:
        fails.append("|<Y, W_i>| <= delta' for i < N")
    if N > 1:
        others = orthonormal_complement_basis(W[:, :-1], require_full_rank=False)
        dist = np.linalg.norm(project(W[:, -1], others))
    else:
        dist = np.linalg.norm(W[:, -1])
    if dist < delta * (1 - tol):
        fails.append("dist(W_N, span of others) >= delta")
    if fails:
        raise HypothesisViolated(fails)
    sigma, d, Qgs, R = greedy_gram_schmidt(W)
    q = sigma.index(N - 1)
    T = float(np.linalg.norm(Y) + math.sqrt(2) * N * delta_prime / delta)
    Z = Y / pN  # normalize the product with W_N to 1; |pN| = 1 keeps the norm
    J, k = [], []
    for m in range(N):
        g = Qgs[:, m] * d[m]
        Wm = W[:, sigma[m]]
        if m == q:
            Z = Z - (inner(Z, Wm) - 1) * g / d[m] ** 2
            continue
        c = inner(Z, g)
        Zpp = c * g / d[m] ** 2
        a = inner(Zpp, Wm)
        if abs(a) <= math.sqrt(2) * delta_prime:
            Z = Z - Zpp
            continue
        b = inner(Z, Wm)
        chosen = None
        for kk in _lattice_candidates(b / delta_prime, math.sqrt(2) * (1 + 1e-12), math.inf, real_field)[:9]:
            lam = kk * delta_prime
            if abs(a + lam - b) <= abs(a) * (1 + 1e-12):
                chosen = kk
                break
        if chosen is None:
            raise LatticePointNotFound(f"no admissible lattice point at position {m}")
        zeta = 1 + (chosen * delta_prime - b) / a
        if real_field:
            zeta = zeta.real
        Z = Z + (zeta - 1) * Zpp
        J.append(m)
        k.append(_lattice_value(chosen, real_field))
    Ub, _, _ = np.linalg.svd(W, full_matrices=False)
    Z = project(Z, Ub)
    if real_field:
        Z = np.real(Z)
    rep = verify_upsilon(W, Z, delta_prime, T, sigma=sigma, tol=verify_tol)
    if not rep.member:
        raise CertificateInvalid("; ".join(rep.failures))
    sigma, J, k = extract_upsilon_parameters(W, Z, delta_prime, sigma=sigma, tol=verify_tol)
    return UpsilonCertificate(sigma, J, k, Z, float(delta_prime), T)
