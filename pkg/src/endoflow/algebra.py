"""Finite-dimensional *-algebras of N x N matrices.

A ``StarAlgebra`` is an operator subspace closed under products and adjoints,
carried as an orthonormal basis in the trace inner product. Every such
subspace is automatically semisimple (a nilpotent element x of a *-closed
algebra has x*x nilpotent positive, hence zero), so it is a finite direct
sum of full matrix blocks and always owns a unit: its support projection.

The module provides generation (span closure), commutants, centers, central
carriers, hereditary corners, the compression expectation, smallest
dominating projections inside a subalgebra, and a matrix-unit extractor for
the block decomposition. Ranks are always decided through eigenvalues of
Gram/Hermitian matrices at ``eps_rank``; equality and membership are
operator-norm tests at ``eps_eq``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (DimensionMismatch, InternalInvariantViolation, MembershipError,
                     NotAProjection)
from .linalg import (DEFAULT_TOL, Projection, TolerancePolicy, as_operator, dagger,
                     opnorm, orthonormal_columns, range_projection)

_PRODUCT_CHUNK = 1024


def _flatten(stack: np.ndarray) -> np.ndarray:
    return stack.reshape(stack.shape[0], -1)


def _orthonormal_rows(flat: np.ndarray, eps_rank: float) -> np.ndarray:
    """Orthonormal basis (as rows) of the row space of ``flat``."""
    if flat.shape[0] == 0:
        return flat
    _, s, vh = np.linalg.svd(flat, full_matrices=False)
    if s.size == 0 or s[0] <= 0.0:
        return np.zeros((0, flat.shape[1]), dtype=complex)
    r = int(np.sum(s > eps_rank * s[0]))
    return vh[:r]


@dataclass(frozen=True, eq=False)
class StarAlgebra:
    """Operator subspace of M_N(C), product- and adjoint-closed, with an
    orthonormal basis under the trace inner product and a unit projection
    (the support projection, which may be smaller than the ambient identity).
    """

    ambient_dim: int
    basis: np.ndarray            # (dim, N, N), orthonormal under hs_inner
    unit: Projection
    _flat: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_flat", _flatten(self.basis))

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def coefficients(self, x) -> np.ndarray:
        """Trace-inner-product coefficients of x against the basis."""
        x = as_operator(x, self.ambient_dim)
        return self._flat.conj() @ x.reshape(-1)

    def reconstruct(self, coeffs: np.ndarray) -> np.ndarray:
        n = self.ambient_dim
        return (coeffs @ self._flat).reshape(n, n)

    def project(self, x) -> np.ndarray:
        """Orthogonal projection of x onto the subspace."""
        return self.reconstruct(self.coefficients(x))

    def membership_residual(self, x) -> float:
        x = as_operator(x, self.ambient_dim)
        return opnorm(x - self.project(x))

    def contains(self, x, tol: TolerancePolicy = DEFAULT_TOL) -> bool:
        return self.membership_residual(x) <= tol.eps_eq

    def require_member(self, x, what: str = "operator",
                       tol: TolerancePolicy = DEFAULT_TOL) -> np.ndarray:
        x = as_operator(x, self.ambient_dim)
        resid = self.membership_residual(x)
        if resid > tol.eps_eq:
            raise MembershipError(f"{what} is not in the algebra "
                                  f"(membership residual {resid:.3e})")
        return x

    def same_subspace(self, other: "StarAlgebra",
                      tol: TolerancePolicy = DEFAULT_TOL) -> bool:
        if self.ambient_dim != other.ambient_dim or self.dim != other.dim:
            return False
        return self.contains_subspace(other, tol) and other.contains_subspace(self, tol)

    def contains_subspace(self, other: "StarAlgebra",
                          tol: TolerancePolicy = DEFAULT_TOL) -> bool:
        coeffs = other._flat @ self._flat.conj().T
        resid = other._flat - coeffs @ self._flat
        if resid.size == 0:
            return True
        # HS-norm residual per element dominates the operator-norm residual
        return float(np.max(np.linalg.norm(resid, axis=1))) <= tol.eps_eq


def _support_projection(basis: np.ndarray, tol: TolerancePolicy) -> Projection:
    """Join of the ranges of the basis elements (basis is adjoint-closed,
    so column spaces already cover row spaces)."""
    n = basis.shape[-1]
    if basis.shape[0] == 0:
        return Projection.zero(n)
    cols = np.concatenate([b for b in basis], axis=1)  # n x (dim*n)
    return Projection.from_range_basis(orthonormal_columns(cols, tol.eps_rank))


def _verify_unit(basis: np.ndarray, unit: np.ndarray, tol: TolerancePolicy):
    if basis.shape[0] == 0:
        return
    left = np.matmul(unit, basis)
    right = np.matmul(basis, unit)
    defect = max(float(np.max(np.abs(left - basis))), float(np.max(np.abs(right - basis))))
    if defect > tol.eps_eq:
        raise InternalInvariantViolation(
            f"support projection fails to act as a unit (defect {defect:.3e}); "
            "the subspace is not product/adjoint closed at this tolerance")


def algebra_from_basis(basis: np.ndarray, ambient_dim: int,
                       tol: TolerancePolicy = DEFAULT_TOL,
                       unit: Projection | None = None) -> StarAlgebra:
    """Wrap an orthonormal, product/adjoint-closed basis as a StarAlgebra.

    Computes (and verifies) the support-projection unit unless one is given.
    """
    basis = np.asarray(basis, dtype=complex).reshape(-1, ambient_dim, ambient_dim)
    if unit is None:
        unit = _support_projection(basis, tol)
        resid = float(np.linalg.norm(
            unit.matrix.reshape(-1) - (_flatten(basis).conj() @ unit.matrix.reshape(-1)) @ _flatten(basis)))
        if basis.shape[0] and resid > tol.eps_eq:
            raise InternalInvariantViolation(
                f"support projection not inside the span (residual {resid:.3e}); "
                "closure or tolerance failure")
        _verify_unit(basis, unit.matrix, tol)
    return StarAlgebra(ambient_dim=ambient_dim, basis=basis, unit=unit)


def block_algebra(block_sizes, tol: TolerancePolicy = DEFAULT_TOL) -> StarAlgebra:
    """Direct sum of full matrix blocks, with the canonical matrix-unit basis.

    Basis order: blocks in the given order, matrix units row-major inside
    each block. Matrix units are already orthonormal in the trace inner
    product.
    """
    sizes = [int(s) for s in block_sizes]
    if any(s <= 0 for s in sizes):
        raise DimensionMismatch("block sizes must be positive")
    n = sum(sizes)
    mats = []
    off = 0
    for s in sizes:
        for i in range(s):
            for j in range(s):
                m = np.zeros((n, n), dtype=complex)
                m[off + i, off + j] = 1.0
                mats.append(m)
        off += s
    return StarAlgebra(ambient_dim=n, basis=np.stack(mats), unit=Projection.identity(n))


def full_matrix_algebra(n: int, tol: TolerancePolicy = DEFAULT_TOL) -> StarAlgebra:
    return block_algebra([n], tol)


def scalar_algebra(n: int) -> StarAlgebra:
    basis = np.eye(n, dtype=complex)[None, :, :] / np.sqrt(n)
    return StarAlgebra(ambient_dim=n, basis=basis, unit=Projection.identity(n))


def _pair_products(left: np.ndarray, right: np.ndarray):
    """Yield chunks of all pairwise products left[i] @ right[j]."""
    nl, nr = left.shape[0], right.shape[0]
    if nl == 0 or nr == 0:
        return
    per_row = max(1, _PRODUCT_CHUNK // max(nr, 1))
    for start in range(0, nl, per_row):
        block = np.matmul(left[start:start + per_row][:, None], right[None, :])
        yield block.reshape(-1, left.shape[1], left.shape[2])


def _residual_directions(candidates: np.ndarray, basis_flat: np.ndarray,
                         tol: TolerancePolicy) -> np.ndarray:
    """Orthonormal directions of the candidates not already in the span."""
    flat = _flatten(candidates)
    if basis_flat.shape[0]:
        coeffs = flat @ basis_flat.conj().T
        flat = flat - coeffs @ basis_flat
    norms = np.linalg.norm(flat, axis=1)
    keep = flat[norms > tol.eps_rank]
    if keep.shape[0] == 0:
        return np.zeros((0, basis_flat.shape[1] if basis_flat.size else flat.shape[1]),
                        dtype=complex)
    return _orthonormal_rows(keep, tol.eps_rank)


def span_closure(generators, ambient_dim: int,
                 tol: TolerancePolicy = DEFAULT_TOL) -> StarAlgebra:
    """Smallest product- and adjoint-closed subspace containing the
    generators.

    Grows the span by multiplying new directions with the (adjoint-closed)
    generator set on both sides until nothing new appears. Every word in
    the generators is reached by induction on its length, and the span of
    all words is closed under products and adjoints, so the stabilized
    subspace is exactly the generated algebra; the cost is O(#generators)
    products per basis direction instead of all basis pairs. Terminates
    because the dimension strictly increases or the loop stops, capped by
    the ambient N^2.
    """
    n = ambient_dim
    mats = []
    for g in generators:
        g = as_operator(g, n)
        if opnorm(g) > 0.0:
            mats.append(g)
            mats.append(dagger(g))
    if not mats:
        return StarAlgebra(ambient_dim=n, basis=np.zeros((0, n, n), dtype=complex),
                           unit=Projection.zero(n))
    gens = np.stack(mats)
    basis_flat = _orthonormal_rows(_flatten(gens), tol.eps_rank)
    new_flat = basis_flat
    cap = n * n
    rounds = 0
    while basis_flat.shape[0] < cap and new_flat.shape[0] > 0:
        rounds += 1
        if rounds > cap + 1:
            raise InternalInvariantViolation("span closure failed to terminate")
        new = new_flat.reshape(-1, n, n)
        found = []
        for left, right in ((gens, new), (new, gens)):
            for chunk in _pair_products(left, right):
                dirs = _residual_directions(chunk, basis_flat, tol)
                if dirs.shape[0]:
                    basis_flat = np.concatenate([basis_flat, dirs], axis=0)
                    found.append(dirs)
        new_flat = np.concatenate(found, axis=0) if found else np.zeros((0, n * n), complex)
    basis = basis_flat.reshape(-1, n, n)
    return algebra_from_basis(basis, n, tol)


def _as_generator_list(source, ambient_dim: int):
    if isinstance(source, StarAlgebra):
        if source.ambient_dim != ambient_dim:
            raise DimensionMismatch("algebra ambient dimension mismatch")
        return [source.basis[i] for i in range(source.dim)]
    return [as_operator(g, ambient_dim) for g in source]


def _commutation_residuals(candidates: np.ndarray, gens: np.ndarray) -> np.ndarray:
    """Max-abs commutator residual of each candidate against each generator:
    shape (n_candidates, n_gens)."""
    xg = np.matmul(candidates[:, None], gens[None, :])
    gx = np.matmul(gens[None, :], candidates[:, None])
    return np.abs(xg - gx).max(axis=(2, 3))


def commutant(source, ambient_dim: int,
              tol: TolerancePolicy = DEFAULT_TOL) -> StarAlgebra:
    """Full commutant in B(C^N) of a generator list or StarAlgebra.

    Solves X g - g X = 0 as a linear system. For large generator sets the
    system is seeded with a few pseudo-random Hermitian combinations of the
    generators and the candidate space is verified against every generator,
    adding violated generators as constraints until the verification passes
    (same subspace, verified, cheaper).
    """
    n = ambient_dim
    gens = []
    for g in _as_generator_list(source, n):
        if opnorm(g) > 0.0:
            gens.append(g)
            gens.append(dagger(g))
    if not gens:
        return block_algebra([n], tol)
    gens = np.stack(gens)

    if gens.shape[0] <= 10:
        constraints = [gens[i] for i in range(gens.shape[0])]
    else:
        rng = np.random.default_rng(777)
        constraints = []
        for _ in range(3):
            w = rng.standard_normal(gens.shape[0])
            h = np.einsum("g,gij->ij", w, gens)
            constraints.append((h + dagger(h)) / 2.0)

    eye = np.eye(n, dtype=complex)
    for _ in range(gens.shape[0] + 4):
        rows = [np.kron(eye, a.T) - np.kron(a, eye) for a in constraints]
        system = np.vstack(rows)
        _, s, vh = np.linalg.svd(system, full_matrices=True)
        scale = max(float(s[0]) if s.size else 0.0, 1.0)
        null_mask = np.ones(vh.shape[0], dtype=bool)
        null_mask[: s.size] = s <= tol.eps_rank * scale
        cand_flat = vh[null_mask].conj()  # nullspace columns of A = U S V^H
        cands = cand_flat.reshape(-1, n, n)
        if cands.shape[0] == 0:
            break
        resid = _commutation_residuals(cands, gens)
        worst_per_gen = resid.max(axis=0)
        if float(worst_per_gen.max()) <= tol.eps_eq:
            basis = _orthonormal_rows(cand_flat, tol.eps_rank).reshape(-1, n, n)
            return algebra_from_basis(basis, n, tol, unit=Projection.identity(n))
        constraints.append(gens[int(np.argmax(worst_per_gen))])
    raise InternalInvariantViolation("commutant verification loop did not converge")


def bicommutant_check(s: StarAlgebra, tol: TolerancePolicy = DEFAULT_TOL) -> bool:
    """True iff the double commutant equals s as a subspace. Exact in finite
    dimension for algebras whose unit is the ambient identity."""
    c = commutant(s, s.ambient_dim, tol)
    cc = commutant(c, s.ambient_dim, tol)
    return cc.same_subspace(s, tol)


def subalgebra_commuting_with(s: StarAlgebra, mats,
                              tol: TolerancePolicy = DEFAULT_TOL,
                              unit: Projection | None = None) -> StarAlgebra:
    """The elements of s commuting with every matrix in ``mats``, solved in
    coefficient space over s's basis with the same generic-constraint
    acceleration and verification loop as ``commutant``."""
    n = s.ambient_dim
    k = s.dim
    gens = np.asarray(mats, dtype=complex).reshape(-1, n, n)
    gens = np.concatenate([gens, gens.conj().transpose(0, 2, 1)], axis=0) \
        if gens.shape[0] else gens
    if k == 0 or gens.shape[0] == 0:
        return s

    if gens.shape[0] <= 8:
        constraints = [gens[i] for i in range(gens.shape[0])]
    else:
        rng = np.random.default_rng(778)
        constraints = []
        for _ in range(2):
            w = rng.standard_normal(gens.shape[0])
            h = np.einsum("g,gij->ij", w, gens)
            constraints.append((h + dagger(h)) / 2.0)

    for _ in range(gens.shape[0] + 4):
        blocks = []
        for g in np.stack(constraints):
            comm = np.matmul(s.basis, g) - np.matmul(g, s.basis)
            blocks.append(_flatten(comm).T)  # (n^2, k)
        system = np.vstack(blocks)
        _, sv, vh = np.linalg.svd(system, full_matrices=True)
        scale = max(float(sv[0]) if sv.size else 0.0, 1.0)
        null_mask = np.ones(vh.shape[0], dtype=bool)
        null_mask[: sv.size] = sv <= tol.eps_rank * scale
        coeff_basis = vh[null_mask].conj()  # nullspace columns of A = U S V^H
        cands = np.einsum("ck,kij->cij", coeff_basis, s.basis)
        if cands.shape[0] == 0:
            basis = np.zeros((0, n, n), dtype=complex)
            return StarAlgebra(ambient_dim=n, basis=basis, unit=Projection.zero(n))
        resid = _commutation_residuals(cands, gens)
        worst = resid.max(axis=0)
        if float(worst.max()) <= tol.eps_eq:
            basis = _orthonormal_rows(_flatten(cands), tol.eps_rank).reshape(-1, n, n)
            return algebra_from_basis(basis, n, tol, unit=unit)
        constraints.append(gens[int(np.argmax(worst))])
    raise InternalInvariantViolation(
        "relative commutant verification loop did not converge")


def center(s: StarAlgebra, tol: TolerancePolicy = DEFAULT_TOL) -> StarAlgebra:
    """s ∩ commutant(s), solved in coefficient space over s's basis."""
    n = s.ambient_dim
    if s.dim == 0:
        return s
    if s.dim == n * n:
        return scalar_algebra(n)
    return subalgebra_commuting_with(s, s.basis, tol, unit=s.unit)


def is_factor(s: StarAlgebra, tol: TolerancePolicy = DEFAULT_TOL) -> bool:
    return center(s, tol).dim == 1


def _require_projection_in(s: StarAlgebra, p: Projection, what: str,
                           tol: TolerancePolicy):
    if not isinstance(p, Projection):
        raise NotAProjection(f"{what} must be a Projection")
    s.require_member(p.matrix, what, tol)


def central_carrier(s: StarAlgebra, p: Projection,
                    tol: TolerancePolicy = DEFAULT_TOL) -> Projection:
    """Smallest projection in the center of s dominating p: the projection
    onto the span of s·(range of p)."""
    _require_projection_in(s, p, "projection", tol)
    p_cols = p.range_basis(tol)
    moved = np.matmul(s.basis, p_cols)  # (dim, n, rank)
    cols = np.concatenate([p_cols, np.concatenate(list(moved), axis=1)], axis=1) \
        if s.dim else p_cols
    z = Projection.from_range_basis(orthonormal_columns(cols, tol.eps_rank))
    resid = s.membership_residual(z.matrix)
    comm = float(_commutation_residuals(z.matrix[None], s.basis).max()) if s.dim else 0.0
    if resid > tol.eps_eq or comm > tol.eps_eq:
        raise InternalInvariantViolation(
            f"central carrier not central in the algebra "
            f"(membership {resid:.3e}, commutation {comm:.3e})")
    from .linalg import projection_leq
    if not projection_leq(p, z, tol):
        raise InternalInvariantViolation("central carrier fails to dominate the projection")
    return z


def hereditary_corner(m: StarAlgebra, p: Projection,
                      tol: TolerancePolicy = DEFAULT_TOL) -> StarAlgebra:
    """The corner p·m·p with unit p."""
    _require_projection_in(m, p, "corner projection", tol)
    if p.is_full():
        return StarAlgebra(ambient_dim=m.ambient_dim, basis=m.basis, unit=p)
    cut = np.matmul(p.matrix, np.matmul(m.basis, p.matrix))
    basis = _orthonormal_rows(_flatten(cut), tol.eps_rank).reshape(-1, m.ambient_dim,
                                                                   m.ambient_dim)
    return StarAlgebra(ambient_dim=m.ambient_dim, basis=basis, unit=p)


def conditional_expectation(m: StarAlgebra, p: Projection, x,
                            tol: TolerancePolicy = DEFAULT_TOL) -> np.ndarray:
    """Compression x ↦ p x p of m onto the corner; the unique map that is a
    corner-bimodule morphism and carries the unit of m to p."""
    _require_projection_in(m, p, "corner projection", tol)
    x = m.require_member(x, "argument", tol)
    return p.matrix @ x @ p.matrix


def smallest_dominating_projection(b: StarAlgebra, e: Projection,
                                   tol: TolerancePolicy = DEFAULT_TOL) -> Projection:
    """Minimal projection f in b with f >= e, as the projection onto the
    span of commutant(b)·(range of e). Membership of the result in b is the
    mathematical content and is checked, not assumed."""
    if e.dim != b.ambient_dim:
        raise DimensionMismatch("projection dimension does not match the algebra")
    k = commutant(b, b.ambient_dim, tol)
    e_cols = e.range_basis(tol)
    cols = [e_cols] + [c @ e_cols for c in k.basis]
    f = Projection.from_range_basis(
        orthonormal_columns(np.concatenate(cols, axis=1), tol.eps_rank))
    resid = b.membership_residual(f.matrix)
    if resid > tol.eps_eq:
        raise MembershipError(
            f"smallest dominating projection left the algebra (residual {resid:.3e}); "
            "the algebra is not closed or the tolerance collapsed")
    from .linalg import projection_leq
    if not projection_leq(e, f, tol):
        raise InternalInvariantViolation("dominating projection fails to dominate")
    return f


@dataclass(frozen=True)
class MatrixUnitBlock:
    """One central block of a StarAlgebra: its minimal central projection,
    its abstract size n, and a full system of matrix units (n x n ambient
    matrices u[i][j] with u_ij u_kl = δ_jk u_il and Σ u_ii = the central
    projection)."""

    central_projection: Projection
    size: int
    units: np.ndarray  # (size, size, N, N)


def minimal_central_projections(s: StarAlgebra,
                                tol: TolerancePolicy = DEFAULT_TOL) -> list[Projection]:
    """The atoms of the center, via spectral projections of a generic
    Hermitian central element. Deterministic (fixed seed, bounded retries)."""
    z = center(s, tol)
    if z.dim == 0:
        return []
    rng = np.random.default_rng(12345)
    for _ in range(24):
        w = rng.standard_normal(z.dim)
        g = np.einsum("k,kij->ij", w, z.basis)
        g = (g + dagger(g)) / 2.0
        evals, evecs = np.linalg.eigh(g)
        # cluster eigenvalues by gaps; the unit's kernel contributes a 0-cluster
        # only when the unit is not the ambient identity, so restrict to range
        support = z.unit
        on_support = np.abs((evecs.conj().T @ support.matrix @ evecs).diagonal()) > 0.5
        vals = evals[on_support]
        vecs = evecs[:, on_support]
        if vals.size == 0:
            return []
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        scale = max(1.0, float(np.max(np.abs(vals))))
        splits = np.where(np.diff(vals) > 1e-5 * scale)[0]
        clusters = np.split(np.arange(vals.size), splits + 1)
        if len(clusters) != z.dim:
            continue
        projs = []
        ok = True
        for idx in clusters:
            pr = Projection.from_range_basis(orthonormal_columns(vecs[:, idx], tol.eps_rank))
            if z.membership_residual(pr.matrix) > tol.eps_eq:
                ok = False
                break
            projs.append(pr)
        if ok:
            return projs
    raise InternalInvariantViolation("could not split the center into atoms")


def matrix_units(s: StarAlgebra,
                 tol: TolerancePolicy = DEFAULT_TOL) -> list[MatrixUnitBlock]:
    """Block decomposition of s with explicit matrix units per block.

    Used for the Choi-type complete-positivity test and as an oracle for
    projection enumeration in abelian algebras.
    """
    n = s.ambient_dim
    blocks = []
    rng = np.random.default_rng(54321)
    for zp in minimal_central_projections(s, tol):
        cut = np.matmul(zp.matrix, np.matmul(s.basis, zp.matrix))
        bflat = _orthonormal_rows(_flatten(cut), tol.eps_rank)
        bdim = bflat.shape[0]
        size = int(round(np.sqrt(bdim)))
        if size * size != bdim:
            raise InternalInvariantViolation(
                f"central block dimension {bdim} is not a perfect square")
        bbasis = bflat.reshape(-1, n, n)
        units = _block_matrix_units(bbasis, zp, size, rng, tol)
        blocks.append(MatrixUnitBlock(central_projection=zp, size=size, units=units))
    return blocks


def _block_matrix_units(bbasis: np.ndarray, zp: Projection, size: int,
                        rng: np.random.Generator,
                        tol: TolerancePolicy) -> np.ndarray:
    n = bbasis.shape[-1]
    if size == 1:
        u = zp.matrix[None, None]
        return u
    flat = _flatten(bbasis)
    for _ in range(24):
        w = rng.standard_normal(bbasis.shape[0])
        g = np.einsum("k,kij->ij", w, bbasis)
        g = (g + dagger(g)) / 2.0
        evals, evecs = np.linalg.eigh(g)
        on_support = np.abs((evecs.conj().T @ zp.matrix @ evecs).diagonal()) > 0.5
        vals, vecs = evals[on_support], evecs[:, on_support]
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        scale = max(1.0, float(np.max(np.abs(vals))) if vals.size else 1.0)
        splits = np.where(np.diff(vals) > 1e-5 * scale)[0]
        clusters = np.split(np.arange(vals.size), splits + 1)
        if len(clusters) != size:
            continue
        minimals = []
        ok = True
        for idx in clusters:
            pr = orthonormal_columns(vecs[:, idx], tol.eps_rank)
            pm = pr @ dagger(pr)
            if float(np.linalg.norm(pm.reshape(-1) - (flat.conj() @ pm.reshape(-1)) @ flat)) > tol.eps_eq:
                ok = False
                break
            minimals.append(pm)
        if not ok:
            continue
        r = np.einsum("k,kij->ij", rng.standard_normal(bbasis.shape[0]), bbasis)
        isoms = [minimals[0]]
        for j in range(1, size):
            w_ = minimals[j] @ r @ minimals[0]
            lam = float(np.trace(dagger(w_) @ w_).real) / max(
                float(np.trace(minimals[0]).real), 1e-300)
            if lam <= tol.eps_rank:
                ok = False
                break
            isoms.append(w_ / np.sqrt(lam))
        if not ok:
            continue
        units = np.zeros((size, size, n, n), dtype=complex)
        for i in range(size):
            for j in range(size):
                units[i, j] = isoms[i] @ dagger(isoms[j])
        ident = sum(units[i, i] for i in range(size))
        if opnorm(ident - zp.matrix) > 10 * tol.eps_eq:
            continue
        defect = 0.0
        for i in range(size):
            for j in range(size):
                defect = max(defect, opnorm(units[i, j] @ units[j, i] - units[i, i]))
        if defect > 10 * tol.eps_eq:
            continue
        return units
    raise InternalInvariantViolation("matrix unit construction did not converge")


def enumerate_projections(s: StarAlgebra,
                          tol: TolerancePolicy = DEFAULT_TOL,
                          max_dim: int = 8) -> list[Projection]:
    """All projections of an *abelian* StarAlgebra: subset sums of its
    minimal projections. Raises for non-abelian input."""
    blocks = matrix_units(s, tol)
    if any(b.size != 1 for b in blocks):
        raise ValueError("projection enumeration requires an abelian algebra")
    if len(blocks) > max_dim:
        raise ValueError(f"too many atoms ({len(blocks)}) to enumerate")
    atoms = [b.central_projection.matrix for b in blocks]
    n = s.ambient_dim
    out = []
    for mask in range(1 << len(atoms)):
        m = np.zeros((n, n), dtype=complex)
        for i, a in enumerate(atoms):
            if mask >> i & 1:
                m = m + a
        out.append(Projection.from_matrix(m, tol))
    return out


def random_element(s: StarAlgebra, rng: np.random.Generator,
                   hermitian: bool = False) -> np.ndarray:
    """Gaussian random element of the algebra (test helper)."""
    c = rng.standard_normal(s.dim) + 1j * rng.standard_normal(s.dim)
    x = np.einsum("k,kij->ij", c, s.basis)
    if hermitian:
        x = (x + dagger(x)) / 2.0
    return x
