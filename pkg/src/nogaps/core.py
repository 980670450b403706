"""Field-generic dense linear algebra shared by the other modules.

Vectors and matrices are plain numpy arrays.  The field is read off the
dtype: real floating dtypes are the real field, complex dtypes the complex
field.  The inner product is linear in the first argument,
``inner(x, y) = sum_i x_i * conj(y_i)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import FieldMismatch, NoConvergence, NonOrthogonalGenerators, RankDeficient

RANK_TOL = 1e-10
ORTHO_TOL = 1e-10
EIG_RESIDUAL_TOL = 1e-8


class FieldTag(enum.Enum):
    REAL = "real"
    COMPLEX = "complex"

    @property
    def dtype(self):
        return np.float64 if self is FieldTag.REAL else np.complex128


def field_of(a) -> FieldTag:
    return FieldTag.COMPLEX if np.iscomplexobj(a) else FieldTag.REAL


def same_field(*arrays) -> FieldTag:
    """Common field of the operands, raising FieldMismatch if they differ."""
    tags = {field_of(a) for a in arrays}
    if len(tags) > 1:
        raise FieldMismatch("real and complex operands mixed")
    return tags.pop()


def as_array(a, ndim=None, name="array") -> np.ndarray:
    """Convert to a float64/complex128 array and check entries are finite."""
    a = np.asarray(a)
    if a.dtype.kind in "biuf":
        a = a.astype(np.float64, copy=False)
    elif a.dtype.kind == "c":
        a = a.astype(np.complex128, copy=False)
    else:
        raise TypeError(f"{name}: unsupported dtype {a.dtype}")
    if ndim is not None and a.ndim != ndim:
        raise ValueError(f"{name}: expected {ndim} dimensions, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name}: entries must be finite")
    return a


def inner(x, y):
    """<x, y> = sum x_i conj(y_i)."""
    return np.vdot(y, x)


def hs_norm(M) -> float:
    return float(np.linalg.norm(M))


def orthonormal_complement_basis(cols, rank_tol=RANK_TOL, require_full_rank=True):
    """Orthonormal basis of the orthogonal complement of the span of ``cols``.

    Parameters
    ----------
    cols : (m, k) array
        Spanning vectors as columns.  ``k`` may be zero, in which case the
        identity is returned.
    rank_tol : float
        Singular values below ``rank_tol * s_1`` count as zero.
    require_full_rank : bool
        If true, raise RankDeficient when the numerical rank is below ``k``.
        Otherwise the complement of the numerical span is returned.

    Returns
    -------
    (m, m - rank) array with orthonormal columns.
    """
    cols = as_array(cols, ndim=2, name="cols")
    m, k = cols.shape
    dtype = np.complex128 if np.iscomplexobj(cols) else np.float64
    if k == 0:
        return np.eye(m, dtype=dtype)
    if require_full_rank and k >= m:
        raise ValueError(f"need fewer columns than rows, got {cols.shape}")
    U, s, _ = np.linalg.svd(cols, full_matrices=True)
    if s[0] == 0.0:
        rank = 0
    else:
        rank = int(np.sum(s > rank_tol * s[0]))
    if require_full_rank and rank < k:
        raise RankDeficient(f"numerical rank {rank} < {k}")
    return U[:, rank:]


def project(x, basis):
    """Orthogonal projection of x (or of the columns of x) onto span(basis).

    ``basis`` must have orthonormal columns.
    """
    return basis @ (basis.conj().T @ x)


def singular_values(M) -> np.ndarray:
    M = as_array(M, ndim=2, name="M")
    if M.size == 0:
        return np.zeros(0)
    return np.linalg.svd(M, compute_uv=False)


@dataclass(frozen=True, eq=False)
class EigenPair:
    lam: complex
    v: np.ndarray


def align_phase(v):
    """Rotate v so that its largest-magnitude coordinate is real and positive."""
    j = int(np.argmax(np.abs(v)))
    if v[j] == 0:
        return v
    return v * (np.abs(v[j]) / v[j])


def eigenpairs(A, residual_tol=EIG_RESIDUAL_TOL):
    """All eigenpairs of a square matrix, with unit eigenvectors.

    For real A, real eigenvalues come with real eigenvectors and the complex
    ones appear in conjugate pairs.
    """
    A = as_array(A, ndim=2, name="A")
    n, n2 = A.shape
    if n != n2:
        raise ValueError("A must be square")
    try:
        w, V = np.linalg.eig(A)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    scale = hs_norm(A)
    real_input = not np.iscomplexobj(A)
    pairs = []
    for j in range(n):
        lam, v = w[j], V[:, j]
        if real_input and np.iscomplexobj(w) and lam.imag == 0.0:
            lam, v = lam.real, np.real(align_phase(v))
        if real_input and not np.iscomplexobj(w):
            lam = float(lam)
        v = v / np.linalg.norm(v)
        if np.linalg.norm(A @ v - lam * v) > residual_tol * max(scale, 1e-300):
            raise NoConvergence(f"eigenpair {j} residual above tolerance")
        pairs.append(EigenPair(lam, v))
    return pairs


def real_eigenpairs(A, imag_tol=1e-8):
    """Eigenpairs of a real matrix whose eigenvalue is real up to
    ``imag_tol * ||A||_HS``, with the eigenvector phase-aligned and made real."""
    scale = hs_norm(A)
    out = []
    for p in eigenpairs(A):
        lam = complex(p.lam)
        if abs(lam.imag) <= imag_tol * scale:
            v = np.real(align_phase(p.v)) if np.iscomplexobj(p.v) else p.v
            out.append(EigenPair(lam.real, v / np.linalg.norm(v)))
    return out


@dataclass(frozen=True, eq=False)
class Ellipsoid:
    """E = {sum_i a_i U_i : ||a||_2 <= 1} for generators U_i (columns)."""

    generators: np.ndarray
    semi_axes: np.ndarray = field(init=False, repr=False)
    axes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        G = as_array(self.generators, ndim=2, name="generators")
        object.__setattr__(self, "generators", G)
        if G.shape[1] == 0:
            object.__setattr__(self, "semi_axes", np.zeros(0))
            object.__setattr__(self, "axes", np.zeros((G.shape[0], 0), dtype=G.dtype))
            return
        P, s, _ = np.linalg.svd(G, full_matrices=False)
        object.__setattr__(self, "semi_axes", s)
        object.__setattr__(self, "axes", P)

    @classmethod
    def from_vectors(cls, vectors, dim=None):
        vectors = list(vectors)
        if not vectors:
            return cls(np.zeros((dim or 0, 0)))
        return cls(np.column_stack(vectors))

    @property
    def dim(self):
        return self.generators.shape[0]

    @property
    def field(self):
        return field_of(self.generators)


def dist_to_ellipsoid(x, E: Ellipsoid, delta=1.0, maxiter=200):
    """Euclidean distance from x to the scaled ellipsoid delta*E.

    Works in the singular frame of the generator matrix.  If the point is
    outside, the Lagrange multiplier mu of the nearest-point problem solves
    sum_i s_i^2 |y_i|^2 / (s_i^2 + mu)^2 = 1, found by Newton steps kept
    inside a shrinking bracket (bisection when a step leaves it).
    """
    x = as_array(x, ndim=1, name="x")
    if x.shape[0] != E.dim:
        raise ValueError("x and E live in different dimensions")
    same_field(x, E.generators)
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    sig = delta * E.semi_axes
    if delta == 0 or sig.size == 0 or sig[0] == 0:
        return float(np.linalg.norm(x))
    keep = sig > 1e-15 * sig[0]
    sig = sig[keep]
    P = E.axes[:, keep]
    y = P.conj().T @ x
    perp2 = max(float(np.linalg.norm(x - P @ y)) ** 2, 0.0)
    y2 = np.abs(y) ** 2
    s2 = sig ** 2
    if np.sum(y2 / s2) <= 1.0:
        return float(np.sqrt(perp2))

    def f(mu):
        return np.sum(s2 * y2 / (s2 + mu) ** 2) - 1.0

    def fprime(mu):
        return -2.0 * np.sum(s2 * y2 / (s2 + mu) ** 3)

    lo, hi = 0.0, float(sig[0] * np.sqrt(np.sum(y2)))
    mu = lo
    for _ in range(maxiter):
        fm = f(mu)
        if fm > 0:
            lo = mu
        else:
            hi = mu
        if fm == 0 or hi - lo <= 1e-15 * max(hi, 1e-300):
            break
        step = mu - fm / fprime(mu)
        mu = step if lo < step < hi else 0.5 * (lo + hi)
    r2 = np.sum(y2 * (mu / (s2 + mu)) ** 2)
    return float(np.sqrt(r2 + perp2))


def real_embed(x):
    """real(x) = Re(x) + Im(x) stacked; an isometry C^m -> R^2m."""
    x = as_array(x, name="x")
    return np.concatenate([x.real, x.imag], axis=0)


def real_embed_ellipsoid(E: Ellipsoid, ortho_tol=ORTHO_TOL) -> Ellipsoid:
    """Image of a complex ellipsoid under real_embed, generated by
    real(X_j) and real(i X_j) for each generator X_j."""
    G = E.generators
    norms = np.linalg.norm(G, axis=0)
    gram = G.conj().T @ G
    off = np.abs(gram - np.diag(np.diag(gram)))
    if off.size and np.max(off - ortho_tol * np.outer(norms, norms)) > 0:
        raise NonOrthogonalGenerators("generators are not pairwise orthogonal")
    k = G.shape[1]
    out = np.empty((2 * G.shape[0], 2 * k))
    for j in range(k):
        out[:, 2 * j] = real_embed(G[:, j].astype(np.complex128))
        out[:, 2 * j + 1] = real_embed(1j * G[:, j])
    return Ellipsoid(out)
