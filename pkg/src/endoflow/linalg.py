"""Dense complex linear algebra primitives with one explicit tolerance policy.

Everything above this module is exact algebra modulo the two tolerances in
``TolerancePolicy``: ``eps_rank`` decides numerical ranks (always relative to
the largest singular/eigen value of a Gram or Hermitian matrix, never via
unpivoted elimination) and ``eps_eq`` decides operator-norm equality and
order assertions. Operators live in trace (Hilbert-Schmidt) inner product
space, which makes span and membership computations ordinary Euclidean
geometry on flattened matrices.

All values are immutable after construction and all functions are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NotAProjection, NotHermitian


@dataclass(frozen=True)
class TolerancePolicy:
    """Numerical policy: eps_rank for rank cutoffs, eps_eq for equality/order.

    Defaults leave double-precision headroom for products of ~20 matrices.
    """

    eps_rank: float = 1e-9
    eps_eq: float = 1e-8

    def __post_init__(self):
        if not (0.0 < self.eps_rank <= self.eps_eq < 1.0):
            raise ValueError(f"require 0 < eps_rank <= eps_eq < 1, "
                             f"got eps_rank={self.eps_rank}, eps_eq={self.eps_eq}")


DEFAULT_TOL = TolerancePolicy()


def as_operator(a, dim: int | None = None) -> np.ndarray:
    """Coerce to a square complex matrix with finite entries."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    if dim is not None and m.shape[0] != dim:
        raise DimensionMismatch(f"expected dimension {dim}, got {m.shape[0]}")
    if not (np.all(np.isfinite(m.real)) and np.all(np.isfinite(m.imag))):
        raise ValueError("matrix has non-finite entries")
    return m


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def opnorm(a: np.ndarray) -> float:
    """Operator (spectral) norm.

    Residual matrices in this package are overwhelmingly numerically zero;
    for those the Frobenius norm (an upper bound on the spectral norm, and
    far below every tolerance in play) is returned without an SVD.
    """
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    frob = float(np.linalg.norm(a))
    if frob <= 1e-12:
        return frob
    return float(np.linalg.norm(a, 2))


def hs_inner(a, b) -> complex:
    """Trace inner product <A,B> = tr(B* A); linear in the first argument."""
    a = as_operator(a)
    b = as_operator(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    return complex(np.vdot(b, a))  # vdot conjugates its first argument


def hs_norm(a) -> float:
    return float(np.linalg.norm(np.asarray(a)))


def hermitian_eig(a, tol: TolerancePolicy = DEFAULT_TOL):
    """Eigendecomposition of a Hermitian matrix.

    Returns (eigenvalues descending, eigenvectors as orthonormal columns in
    the matching order). Rejects inputs farther than eps_eq from Hermitian;
    the decomposition itself is taken of the Hermitian part.
    """
    a = as_operator(a)
    herm_defect = opnorm(a - dagger(a))
    if herm_defect > tol.eps_eq:
        raise NotHermitian(f"||A - A*|| = {herm_defect:.3e} exceeds eps_eq")
    w, v = np.linalg.eigh((a + dagger(a)) / 2.0)
    order = np.argsort(w)[::-1]
    return w[order], v[:, order]


def _column_stack(vectors, dim: int | None):
    """Flatten a collection of vectors/matrices into columns of one matrix."""
    cols = []
    for v in vectors:
        arr = np.asarray(v, dtype=complex).reshape(-1)
        cols.append(arr)
    if not cols:
        if dim is None:
            raise DimensionMismatch("empty input needs an explicit dim")
        return np.zeros((dim, 0), dtype=complex)
    n = cols[0].size
    if any(c.size != n for c in cols):
        raise DimensionMismatch("inputs have mixed ambient dimensions")
    if dim is not None and n != dim:
        raise DimensionMismatch(f"expected ambient dimension {dim}, got {n}")
    return np.stack(cols, axis=1)


def orthonormal_columns(mat: np.ndarray, eps_rank: float) -> np.ndarray:
    """Orthonormal basis of the column space, rank cut at eps_rank relative
    to the largest singular value."""
    if mat.shape[1] == 0:
        return mat
    u, s, _ = np.linalg.svd(mat, full_matrices=False)
    if s.size == 0 or s[0] <= 0.0:
        return np.zeros((mat.shape[0], 0), dtype=complex)
    r = int(np.sum(s > eps_rank * s[0]))
    return u[:, :r]


@dataclass(frozen=True)
class Projection:
    """Hermitian idempotent with its rank decided at construction time.

    Rank is the number of eigenvalues above 1/2, which for anything passing
    the eps_eq projection test is the honest dimension of the range.
    """

    matrix: np.ndarray
    rank: int

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @staticmethod
    def from_matrix(m, tol: TolerancePolicy = DEFAULT_TOL) -> "Projection":
        m = as_operator(m)
        herm = opnorm(m - dagger(m))
        idem = opnorm(m @ m - m)
        if herm > tol.eps_eq or idem > tol.eps_eq:
            raise NotAProjection(
                f"||P-P*||={herm:.3e}, ||P^2-P||={idem:.3e} exceed eps_eq={tol.eps_eq}")
        w = np.linalg.eigvalsh((m + dagger(m)) / 2.0)
        return Projection(matrix=m, rank=int(np.sum(w > 0.5)))

    @staticmethod
    def zero(dim: int) -> "Projection":
        return Projection(matrix=np.zeros((dim, dim), dtype=complex), rank=0)

    @staticmethod
    def identity(dim: int) -> "Projection":
        return Projection(matrix=np.eye(dim, dtype=complex), rank=dim)

    @staticmethod
    def from_range_basis(cols: np.ndarray) -> "Projection":
        """Projection onto the span of orthonormal columns."""
        if cols.shape[1] == 0:
            return Projection.zero(cols.shape[0])
        return Projection(matrix=cols @ dagger(cols), rank=cols.shape[1])

    def range_basis(self, tol: TolerancePolicy = DEFAULT_TOL) -> np.ndarray:
        """Orthonormal columns spanning the range."""
        w, v = np.linalg.eigh((self.matrix + dagger(self.matrix)) / 2.0)
        keep = w > 0.5
        return v[:, keep]

    def complement(self) -> "Projection":
        return Projection(matrix=np.eye(self.dim, dtype=complex) - self.matrix,
                          rank=self.dim - self.rank)

    def same(self, other: "Projection", tol: TolerancePolicy = DEFAULT_TOL) -> bool:
        return opnorm(self.matrix - other.matrix) <= tol.eps_eq

    def is_zero(self) -> bool:
        return self.rank == 0

    def is_full(self) -> bool:
        return self.rank == self.dim


def range_projection(vectors, dim: int | None = None,
                     tol: TolerancePolicy = DEFAULT_TOL) -> Projection:
    """Orthogonal projection onto the span of the inputs.

    Inputs may be vectors in the ambient column space or matrices treated as
    trace-inner-product vectors (they are flattened either way; the two views
    agree because tr(B*A) is the Euclidean inner product of the flattenings).
    Empty input with an explicit ``dim`` gives the zero projection.
    """
    stacked = _column_stack(vectors, dim)
    basis = orthonormal_columns(stacked, tol.eps_rank)
    return Projection.from_range_basis(basis)


def _check_projection_pair(p: Projection, q: Projection):
    if p.dim != q.dim:
        raise DimensionMismatch(f"projection dims {p.dim} and {q.dim} differ")


def projection_leq(p: Projection, q: Projection,
                   tol: TolerancePolicy = DEFAULT_TOL) -> bool:
    """Range containment p <= q, decided by ||P - QP|| <= eps_eq.

    Basis-independent; for commuting projections it agrees with PQ = QP = P.
    """
    _check_projection_pair(p, q)
    return opnorm(p.matrix - q.matrix @ p.matrix) <= tol.eps_eq


def projection_order_residual(p: Projection, q: Projection) -> float:
    """The quantity ||P - QP|| whose smallness defines p <= q."""
    _check_projection_pair(p, q)
    return opnorm(p.matrix - q.matrix @ p.matrix)


def projection_meet(p: Projection, q: Projection,
                    tol: TolerancePolicy = DEFAULT_TOL) -> Projection:
    """Projection onto range(P) ∩ range(Q), via the kernel of the stacked
    complements."""
    _check_projection_pair(p, q)
    n = p.dim
    eye = np.eye(n, dtype=complex)
    stacked = np.vstack([eye - p.matrix, eye - q.matrix])
    _, s, vh = np.linalg.svd(stacked, full_matrices=False)
    scale = s[0] if s.size and s[0] > 1.0 else 1.0
    basis = dagger(vh[s <= tol.eps_rank * scale])
    return Projection.from_range_basis(basis)


def projection_join(p: Projection, q: Projection,
                    tol: TolerancePolicy = DEFAULT_TOL) -> Projection:
    """Projection onto range(P) + range(Q)."""
    _check_projection_pair(p, q)
    cols = np.hstack([p.range_basis(tol), q.range_basis(tol)])
    return Projection.from_range_basis(orthonormal_columns(cols, tol.eps_rank))
