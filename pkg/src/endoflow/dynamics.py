"""Discrete-time semigroups of unital *-endomorphisms and their compressions.

An ``Endomorphism`` stores the acting algebra and the map's matrix in the
algebra's orthonormal basis; the semigroup is its powers. Validation checks
the three defining identities (unital, multiplicative, adjoint-preserving)
and reports the witnessing basis pair on failure.

Compression to a hereditary corner pMp exists exactly when alpha(p) >= p;
the result is a unital completely positive semigroup on the corner, with
unitality, complete positivity (Choi test over the corner's matrix units)
and the semigroup law all verified at construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import StarAlgebra, hereditary_corner, matrix_units
from .errors import (AdjointViolation, DimensionMismatch, InternalInvariantViolation,
                     MultiplicativityViolation, NotIncreasing, UnitalityViolation)
from .linalg import (DEFAULT_TOL, Projection, TolerancePolicy, as_operator, dagger,
                     opnorm, projection_leq)

_EXHAUSTIVE_PAIR_LIMIT = 64


@dataclass(frozen=True, eq=False)
class Endomorphism:
    """A validated normal unital *-endomorphism of a StarAlgebra, in basis
    coordinates. Powers are memoized; the observable contract is purity."""

    algebra: StarAlgebra
    matrix: np.ndarray  # (dim, dim): column i holds the coefficients of alpha(B_i)
    tol: TolerancePolicy = DEFAULT_TOL
    _powers: dict = field(default_factory=dict, repr=False, compare=False)
    _basis_images: dict = field(default_factory=dict, repr=False, compare=False)

    def power(self, t: int) -> np.ndarray:
        """Coefficient matrix of alpha^t."""
        if t < 0:
            raise ValueError("powers are defined for t >= 0")
        if t not in self._powers:
            if t == 0:
                self._powers[t] = np.eye(self.algebra.dim, dtype=complex)
            else:
                self._powers[t] = self.matrix @ self.power(t - 1)
        return self._powers[t]

    def basis_images(self, t: int) -> np.ndarray:
        """Stack of alpha^t applied to every basis element: (dim, N, N)."""
        if t not in self._basis_images:
            flat = self.power(t).T @ self.algebra._flat
            n = self.algebra.ambient_dim
            self._basis_images[t] = flat.reshape(-1, n, n)
        return self._basis_images[t]

    def apply(self, x, t: int = 1, check: bool = True) -> np.ndarray:
        """alpha^t(x) for x in the algebra."""
        if check:
            x = self.algebra.require_member(x, "argument of the endomorphism", self.tol)
        else:
            x = as_operator(x, self.algebra.ambient_dim)
        coeffs = self.power(t) @ self.algebra.coefficients(x)
        return self.algebra.reconstruct(coeffs)

    def __call__(self, x) -> np.ndarray:
        return self.apply(x)

    def same_map(self, other: "Endomorphism") -> bool:
        return (self.algebra is other.algebra or
                (self.algebra.ambient_dim == other.algebra.ambient_dim
                 and self.algebra.same_subspace(other.algebra, self.tol))) and \
            self.matrix.shape == other.matrix.shape and \
            float(np.max(np.abs(self.matrix - other.matrix))) <= self.tol.eps_eq


def _multiplicativity_witness(images: np.ndarray, pairs, products_of, tol_val: float):
    """Largest ||alpha(B_i B_j) - alpha(B_i) alpha(B_j)|| over the given
    index pairs. ``products_of`` maps a flat product back to coefficients."""
    worst = (0.0, None)
    for i, j in pairs:
        lhs = products_of(i, j)
        rhs = images[i] @ images[j]
        resid = opnorm(lhs - rhs)
        if resid > worst[0]:
            worst = (resid, (i, j))
    return worst


def validate_endomorphism(m: StarAlgebra, matrix,
                          tol: TolerancePolicy = DEFAULT_TOL) -> Endomorphism:
    """Check unitality, multiplicativity and adjoint-preservation of a
    candidate basis-coordinate map; raise with a witness otherwise.

    Multiplicativity is exhaustive over basis pairs up to dim 64; above
    that, a deterministic randomized certificate is used (the bilinear
    defect of a non-multiplicative map is nonzero on a random pair with
    probability one), plus an exhaustive sweep over a fixed subset.
    """
    k = m.dim
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.shape != (k, k):
        raise DimensionMismatch(f"map matrix must be {k}x{k}, got {matrix.shape}")
    alpha = Endomorphism(algebra=m, matrix=matrix, tol=tol)

    unit_image = alpha.apply(m.unit.matrix, check=False)
    resid = opnorm(unit_image - m.unit.matrix)
    if resid > tol.eps_eq:
        raise UnitalityViolation(f"alpha(unit) differs from unit by {resid:.3e}")

    images = alpha.basis_images(1)

    adj_of_images = images.conj().transpose(0, 2, 1)
    star_then_map = np.stack([alpha.apply(m.basis[i].conj().T, check=False)
                              for i in range(k)]) if k else images
    adj_resid = float(np.max(np.abs(star_then_map - adj_of_images))) if k else 0.0
    if adj_resid > tol.eps_eq:
        worst = int(np.argmax(np.abs(star_then_map - adj_of_images).max(axis=(1, 2))))
        raise AdjointViolation(
            f"alpha(B*) != alpha(B)* (residual {adj_resid:.3e})",
            witness=worst, residual=adj_resid)

    mult_tol = 10 * tol.eps_eq

    def product_image(i, j):
        return alpha.apply(m.basis[i] @ m.basis[j], check=False)

    if k <= _EXHAUSTIVE_PAIR_LIMIT:
        pairs = [(i, j) for i in range(k) for j in range(k)]
    else:
        rng = np.random.default_rng(2024)
        pairs = [(int(rng.integers(k)), int(rng.integers(k))) for _ in range(256)]
        # randomized certificate on dense combinations
        for _ in range(8):
            x = np.einsum("k,kab->ab", rng.standard_normal(k) + 1j * rng.standard_normal(k),
                          m.basis)
            y = np.einsum("k,kab->ab", rng.standard_normal(k) + 1j * rng.standard_normal(k),
                          m.basis)
            lhs = alpha.apply(x @ y, check=False)
            rhs = alpha.apply(x, check=False) @ alpha.apply(y, check=False)
            scale = max(1.0, opnorm(x) * opnorm(y))
            if opnorm(lhs - rhs) > mult_tol * scale:
                raise MultiplicativityViolation(
                    f"alpha(xy) != alpha(x)alpha(y) on a random pair "
                    f"(residual {opnorm(lhs - rhs):.3e})",
                    witness=None, residual=opnorm(lhs - rhs))
    worst_resid, worst_pair = _multiplicativity_witness(images, pairs, product_image,
                                                        mult_tol)
    if worst_resid > mult_tol:
        raise MultiplicativityViolation(
            f"alpha(B_i B_j) != alpha(B_i) alpha(B_j) at basis pair {worst_pair} "
            f"(residual {worst_resid:.3e})",
            witness=worst_pair, residual=worst_resid)
    return alpha


def is_fixed_projection(alpha: Endomorphism, p: Projection,
                        tol: TolerancePolicy | None = None) -> bool:
    """alpha(p) = p within eps_eq."""
    tol = tol or alpha.tol
    alpha.algebra.require_member(p.matrix, "projection", tol)
    return opnorm(alpha.apply(p.matrix, check=False) - p.matrix) <= tol.eps_eq


def is_increasing_projection(alpha: Endomorphism, p: Projection,
                             tol: TolerancePolicy | None = None) -> bool:
    """alpha(p) >= p; in discrete time this single step gives alpha^t(p) >= p
    for every t by monotonicity of alpha on positives."""
    tol = tol or alpha.tol
    alpha.algebra.require_member(p.matrix, "projection", tol)
    image = Projection.from_matrix(alpha.apply(p.matrix, check=False), tol)
    return projection_leq(p, image, tol)


def default_horizon(alpha: Endomorphism) -> int:
    """Twice the ambient dimension: monotone projection chains stabilize
    within N steps, the second N confirms."""
    return 2 * alpha.algebra.ambient_dim


@dataclass(frozen=True, eq=False)
class CPSemigroup:
    """Unital completely positive semigroup on a hereditary corner, given by
    coefficient matrices on the corner's basis for t = 0..horizon."""

    corner: StarAlgebra
    maps: tuple  # tuple of (corner.dim, corner.dim) arrays, maps[0] = identity
    projection: Projection

    @property
    def horizon(self) -> int:
        return len(self.maps) - 1

    def apply(self, x, t: int = 1) -> np.ndarray:
        coeffs = self.maps[t] @ self.corner.coefficients(x)
        return self.corner.reconstruct(coeffs)


def _choi_positive(phi_map: np.ndarray, corner: StarAlgebra, blocks,
                   tol: TolerancePolicy) -> float:
    """Most negative Choi eigenvalue of the map across the corner's blocks
    (0.0 means clean CP)."""
    worst = 0.0
    n = corner.ambient_dim
    for blk in blocks:
        sz = blk.size
        choi = np.zeros((sz * n, sz * n), dtype=complex)
        for i in range(sz):
            for j in range(sz):
                img = corner.reconstruct(phi_map @ corner.coefficients(blk.units[i, j]))
                choi[i * n:(i + 1) * n, j * n:(j + 1) * n] = img
        evals = np.linalg.eigvalsh((choi + dagger(choi)) / 2.0)
        worst = min(worst, float(evals[0]))
    return -worst


def compress(alpha: Endomorphism, p: Projection, horizon: int | None = None,
             tol: TolerancePolicy | None = None) -> CPSemigroup:
    """Compression phi_t(a) = p alpha^t(a) p of the semigroup to the corner
    pMp; defined exactly when p is increasing."""
    tol = tol or alpha.tol
    if horizon is None:
        horizon = default_horizon(alpha)
    if not is_increasing_projection(alpha, p, tol):
        raise NotIncreasing("alpha(p) >= p fails: the corner is not compressible")
    corner = hereditary_corner(alpha.algebra, p, tol)
    k = corner.dim
    maps = [np.eye(k, dtype=complex)]
    pm = p.matrix
    for t in range(1, horizon + 1):
        cols = np.empty((k, k), dtype=complex)
        for i in range(k):
            y = pm @ alpha.apply(corner.basis[i], t=t, check=False) @ pm
            resid = corner.membership_residual(y)
            if resid > tol.eps_eq:
                raise InternalInvariantViolation(
                    f"compressed image left the corner at t={t} (residual {resid:.3e})")
            cols[:, i] = corner.coefficients(y)
        maps.append(cols)

    unit_coeffs = corner.coefficients(p.matrix)
    for t in range(1, horizon + 1):
        resid = opnorm(corner.reconstruct(maps[t] @ unit_coeffs) - p.matrix)
        if resid > tol.eps_eq:
            raise InternalInvariantViolation(
                f"compression not unital at t={t} (residual {resid:.3e})")
    for s in range(1, horizon + 1):
        for t in range(1, horizon + 1 - s):
            resid = float(np.max(np.abs(maps[s] @ maps[t] - maps[s + t])))
            if resid > tol.eps_eq:
                raise InternalInvariantViolation(
                    f"semigroup law fails at (s,t)=({s},{t}) (residual {resid:.3e})")
    blocks = matrix_units(corner, tol)
    for t in range(1, horizon + 1):
        neg = _choi_positive(maps[t], corner, blocks, tol)
        if neg > tol.eps_eq:
            raise InternalInvariantViolation(
                f"compression not completely positive at t={t} "
                f"(Choi eigenvalue -{neg:.3e})")
    return CPSemigroup(corner=corner, maps=tuple(maps), projection=p)


@dataclass(frozen=True)
class MultiplicativityVerdict:
    """Outcome of the two independent multiplicativity tests of a
    compression, which provably agree: commutation of p with the translated
    corner, and the semigroup-of-endomorphisms identity on the corner."""

    multiplicative: bool
    commutation_residual: float
    homomorphism_residual: float
    witness: tuple | None  # (t, basis index or pair) of the largest violation


def is_multiplicative_compression(alpha: Endomorphism, p: Projection,
                                  horizon: int | None = None,
                                  tol: TolerancePolicy | None = None
                                  ) -> MultiplicativityVerdict:
    """Decide whether the compression to pMp is itself a semigroup of
    endomorphisms. Both characterizations are evaluated and must agree;
    disagreement is an internal invariant violation."""
    tol = tol or alpha.tol
    if horizon is None:
        horizon = default_horizon(alpha)
    if not is_increasing_projection(alpha, p, tol):
        raise NotIncreasing("alpha(p) >= p fails")
    if opnorm(p.matrix - alpha.algebra.unit.matrix) <= tol.eps_eq:
        # p is the unit: both characterizations are identically zero
        return MultiplicativityVerdict(multiplicative=True, commutation_residual=0.0,
                                       homomorphism_residual=0.0, witness=None)
    corner = hereditary_corner(alpha.algebra, p, tol)
    pm = p.matrix

    comm_worst = (0.0, None)
    for t in range(1, horizon + 1):
        for i in range(corner.dim):
            img = alpha.apply(corner.basis[i], t=t, check=False)
            resid = opnorm(pm @ img - img @ pm)
            if resid > comm_worst[0]:
                comm_worst = (resid, (t, i))
    commutes = comm_worst[0] <= tol.eps_eq

    phi = compress(alpha, p, horizon, tol)
    k = corner.dim
    if k <= _EXHAUSTIVE_PAIR_LIMIT:
        pairs = [(i, j) for i in range(k) for j in range(k)]
    else:
        rng = np.random.default_rng(4096)
        pairs = [(int(rng.integers(k)), int(rng.integers(k))) for _ in range(256)]
    hom_worst = (0.0, None)
    for t in range(1, horizon + 1):
        left_images = {i: phi.apply(corner.basis[i], t)
                       for i in {i for i, _ in pairs}}
        right_images = {j: phi.apply(corner.basis[j], t)
                        for j in {j for _, j in pairs}}
        for i, j in pairs:
            lhs = phi.apply(corner.basis[i] @ corner.basis[j], t)
            rhs = left_images[i] @ right_images[j]
            resid = opnorm(lhs - rhs)
            if resid > hom_worst[0]:
                hom_worst = (resid, (t, (i, j)))
    homomorphic = hom_worst[0] <= tol.eps_eq

    if commutes != homomorphic:
        raise InternalInvariantViolation(
            "multiplicativity characterizations disagree: commutation residual "
            f"{comm_worst[0]:.3e} vs homomorphism residual {hom_worst[0]:.3e}")
    witness = comm_worst[1] if comm_worst[0] >= hom_worst[0] else hom_worst[1]
    return MultiplicativityVerdict(multiplicative=commutes,
                                   commutation_residual=comm_worst[0],
                                   homomorphism_residual=hom_worst[0],
                                   witness=witness)
