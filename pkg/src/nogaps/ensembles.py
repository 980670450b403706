"""Seeded random matrices and vectors, and kernel vectors of wide matrices.

Every random object is a function of ``(master_seed, trial_index)``: the
trial's generator is seeded by ``SeedSequence(master_seed,
spawn_key=(trial_index,))``, so a trial's draw never depends on which
thread ran it or on what other trials were drawn.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FieldTag, as_array
from .errors import RankDeficient

SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class EntryLaw:
    """Distribution of a single real entry (mean 0, variance 1).

    Complex entries are (X + iY)/sqrt(2) with X, Y independent copies.
    ``K`` is the declared subgaussian constant; it is recorded, not checked.
    """

    name: str
    values: tuple = ()
    probs: tuple = ()
    K: float = 1.0

    def __post_init__(self):
        if self.name not in ("gaussian", "rademacher", "uniform_scaled", "discrete"):
            raise ValueError(f"unknown law {self.name!r}")
        if self.name == "discrete":
            v = np.asarray(self.values, dtype=float)
            p = np.asarray(self.probs, dtype=float)
            if v.shape != p.shape or v.ndim != 1 or v.size == 0:
                raise ValueError("values and probs must be 1-d of equal length")
            if np.any(p < 0) or abs(p.sum() - 1) > 1e-12:
                raise ValueError("probs must be a probability vector")
            if abs(p @ v) > 1e-12 or abs(p @ v ** 2 - 1) > 1e-12:
                raise ValueError("discrete law must have mean 0 and variance 1")

    @classmethod
    def gaussian(cls):
        return cls("gaussian", K=1.0)

    @classmethod
    def rademacher(cls):
        return cls("rademacher", K=1.0)

    @classmethod
    def uniform_scaled(cls):
        return cls("uniform_scaled", K=SQRT3)

    @classmethod
    def discrete(cls, values, probs, K):
        return cls("discrete", tuple(float(v) for v in values), tuple(float(p) for p in probs), float(K))

    @classmethod
    def from_dict(cls, d):
        if isinstance(d, str):
            d = {"name": d}
        name = d["name"]
        if name not in ("gaussian", "rademacher", "uniform_scaled", "discrete"):
            raise ValueError(f"unknown entry law {name!r}")
        if name == "discrete":
            return cls.discrete(d["values"], d["probs"], d.get("K", 1.0))
        return getattr(cls, name)()

    def to_dict(self):
        d = {"name": self.name}
        if self.name == "discrete":
            d.update(values=list(self.values), probs=list(self.probs), K=self.K)
        return d

    def sample_real(self, rng, shape):
        if self.name == "gaussian":
            return rng.standard_normal(shape)
        if self.name == "rademacher":
            return 2.0 * rng.integers(0, 2, size=shape) - 1.0
        if self.name == "uniform_scaled":
            return rng.uniform(-SQRT3, SQRT3, size=shape)
        return rng.choice(np.asarray(self.values), size=shape, p=np.asarray(self.probs))

    def sample(self, rng, shape, field=FieldTag.REAL):
        if FieldTag(field) is FieldTag.REAL:
            return self.sample_real(rng, shape)
        re = self.sample_real(rng, shape)
        im = self.sample_real(rng, shape)
        return (re + 1j * im) / np.sqrt(2.0)


@dataclass(frozen=True)
class EnsembleSpec:
    rows: int
    cols: int
    law: EntryLaw = EntryLaw.gaussian()
    field: FieldTag = FieldTag.REAL
    master_seed: int = 0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("rows and cols must be positive")
        object.__setattr__(self, "field", FieldTag(self.field))
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")


def trial_rng(master_seed, trial_index) -> np.random.Generator:
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(trial_index),))
    return np.random.Generator(np.random.PCG64(ss))


def as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_matrix(spec: EnsembleSpec, trial_index: int) -> np.ndarray:
    rng = trial_rng(spec.master_seed, trial_index)
    return spec.law.sample(rng, (spec.rows, spec.cols), spec.field)


def sample_matrices(spec: EnsembleSpec, trial_indices) -> np.ndarray:
    """Stack of sample_matrix(spec, i) over the given trial indices."""
    idx = list(trial_indices)
    out = np.empty((len(idx), spec.rows, spec.cols), dtype=spec.field.dtype)
    for j, i in enumerate(idx):
        out[j] = sample_matrix(spec, i)
    return out


def sample_unit_sphere(n, field=FieldTag.REAL, seed=None) -> np.ndarray:
    """Uniform random unit vector (normalized Gaussian)."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = as_rng(seed)
    g = EntryLaw.gaussian().sample(rng, n, FieldTag(field))
    return g / np.linalg.norm(g)


def null_vector(B, rank_tol=1e-10):
    """Unit vector spanning the kernel of a full-row-rank (n-1) x n matrix.

    Accepts a single matrix or a stack of shape (..., n-1, n).  The phase is
    fixed by making the largest-magnitude coordinate real and positive.

    Uses a complete QR factorization of B^H: its last orthonormal column is
    orthogonal to every row of B.  The product of |R_ii| equals the product
    of the singular values of B, so a tiny diagonal entry flags rank loss.
    """
    B = as_array(B, name="B")
    if B.ndim < 2 or B.shape[-2] != B.shape[-1] - 1:
        raise ValueError(f"expected (n-1) x n matrices, got shape {B.shape}")
    BH = np.conj(np.swapaxes(B, -1, -2))
    Q, R = np.linalg.qr(BH, mode="complete")
    u = Q[..., :, -1]
    diag = np.abs(np.diagonal(R, axis1=-2, axis2=-1))
    if diag.shape[-1] > 0:
        scale = np.linalg.norm(B, axis=(-2, -1))
        if np.any(np.min(diag, axis=-1) <= rank_tol * np.maximum(scale, 1e-300)):
            raise RankDeficient("B does not have full row rank")
    j = np.argmax(np.abs(u), axis=-1)
    lead = np.take_along_axis(u, j[..., None], axis=-1)
    u = u * (np.abs(lead) / lead)
    if not np.iscomplexobj(B):
        u = np.real(u)
    return u
