"""Model construction: multi-block endomorphisms, truncated tensor-chain
dilations from Kraus data, intertwiner cocycles, and seeded random models.

Kraus convention, fixed project-wide: phi(x) = sum_i L_i x L_i* with
unitality sum_i L_i L_i* = 1, validated at parse time. The Stinespring
isometry is V h = sum_i (L_i* h) (x) k_i, so V*V = 1 and
phi(x) = V*(x (x) 1)V.

The chain dilation lives on the truncated interaction space
H = ⊕_{n=0..L} H_0 (x) K^n with M the block-diagonal algebra ⊕_n B(H_n).
The one-step map keeps level 0 and sends level n-1 to level n through
Y ↦ W_n (Y (x) 1_K) W_n*, where W_n is the deterministic unitary completion
matching the vacuum embedding J_n = (.) (x) Ω^n to the Stinespring isometry:
W_n (J_{n-1} (x) 1_K) V = J_n. That identity gives the exact recursion

    J_n* (alpha(Y))_n J_n = phi( J_{n-1}* Y J_{n-1} ),

so reading the vacuum corner at level n >= t reproduces phi^t exactly for
t <= L, and p = ⊕_n J_n J_n* is increasing with alpha^t(p) increasing to 1.
Deeper times than the truncation level are not claimed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import StarAlgebra, block_algebra
from .cocycles import ProjectiveCocycle, validate_cocycle
from .dynamics import Endomorphism, is_increasing_projection, validate_endomorphism
from .errors import (DimensionMismatch, InternalInvariantViolation, SearchExhausted,
                     ValidationError)
from .linalg import (DEFAULT_TOL, Projection, TolerancePolicy, as_operator, dagger,
                     opnorm)


@dataclass(frozen=True)
class KrausMap:
    """A unital completely positive map in Kraus form."""

    operators: tuple  # tuple of (dim, dim) arrays
    dim: int

    @staticmethod
    def from_operators(ops, tol: TolerancePolicy = DEFAULT_TOL) -> "KrausMap":
        mats = tuple(as_operator(op) for op in ops)
        if not mats:
            raise ValidationError("a Kraus map needs at least one operator")
        d = mats[0].shape[0]
        if any(m.shape[0] != d for m in mats):
            raise DimensionMismatch("Kraus operators have mixed dimensions")
        unital = sum(m @ dagger(m) for m in mats)
        resid = opnorm(unital - np.eye(d))
        if resid > tol.eps_eq:
            raise ValidationError(
                f"Kraus family is not unital: ||sum L L* - 1|| = {resid:.3e}")
        return KrausMap(operators=mats, dim=d)

    @property
    def rank(self) -> int:
        return len(self.operators)

    def apply(self, x, t: int = 1) -> np.ndarray:
        """phi^t(x) by direct Kraus-sum iteration (the oracle route)."""
        y = as_operator(x, self.dim)
        for _ in range(t):
            y = sum(op @ y @ dagger(op) for op in self.operators)
        return y

    def stinespring_isometry(self) -> np.ndarray:
        """V: H_0 -> H_0 (x) K with V h = sum_i (L_i* h) (x) k_i."""
        r = self.rank
        v = np.zeros((self.dim * r, self.dim), dtype=complex)
        for i, op in enumerate(self.operators):
            k_i = np.zeros((r, 1), dtype=complex)
            k_i[i, 0] = 1.0
            v += np.kron(dagger(op), k_i)
        return v


@dataclass(frozen=True)
class ModelSpec:
    """Serializable description of a model; mirrors the JSON file format."""

    ambient_dim: int
    blocks: tuple
    endomorphism: dict  # tagged union: kind in {basis_map, block_map, kraus_chain}
    projection: np.ndarray
    horizon: int
    tolerances: TolerancePolicy | None = None


@dataclass(frozen=True, eq=False)
class BuiltModel:
    """A ModelSpec realized as live objects."""

    spec: ModelSpec
    algebra: StarAlgebra
    alpha: Endomorphism
    projection: Projection
    horizon: int
    tol: TolerancePolicy
    chain: "ChainDilation | None" = None


def _embed_block(mat: np.ndarray, offset: int, ambient: int) -> np.ndarray:
    out = np.zeros((ambient, ambient), dtype=complex)
    d = mat.shape[0]
    out[offset:offset + d, offset:offset + d] = mat
    return out


def build_block_model(block_sizes, source, unitaries=None,
                      tol: TolerancePolicy = DEFAULT_TOL):
    """Multi-block algebra M = ⊕ M_{n_i} with the endomorphism
    alpha(⊕ a_i) = ⊕ U_j a_{source(j)} U_j*.

    ``source[j]`` names the block each target block reads (any function, not
    necessarily a bijection — this is where genuinely non-surjective unital
    dynamics live); sizes must match. Returns (StarAlgebra, Endomorphism).
    """
    sizes = [int(s) for s in block_sizes]
    src = [int(j) for j in source]
    m = len(sizes)
    if len(src) != m:
        raise DimensionMismatch("source map length differs from the block count")
    if any(not 0 <= j < m for j in src):
        raise DimensionMismatch("source block index out of range")
    if any(sizes[j] != sizes[t] for t, j in enumerate(src)):
        raise DimensionMismatch("source and target block sizes differ")
    if unitaries is None:
        unitaries = [np.eye(s, dtype=complex) for s in sizes]
    unitaries = [as_operator(u, sizes[j]) for j, u in enumerate(unitaries)]
    for j, u in enumerate(unitaries):
        if opnorm(u @ dagger(u) - np.eye(sizes[j])) > tol.eps_eq:
            raise ValidationError(f"block {j} conjugator is not unitary")

    algebra = block_algebra(sizes, tol)
    n = algebra.ambient_dim
    offsets = np.concatenate([[0], np.cumsum(sizes)])[:-1]

    k = algebra.dim
    matrix = np.zeros((k, k), dtype=complex)
    idx = 0
    block_of = []
    unit_pos = []
    for b, s in enumerate(sizes):
        for i in range(s):
            for j in range(s):
                block_of.append(b)
                unit_pos.append((i, j))
                idx += 1

    for col in range(k):
        b = block_of[col]
        i, j = unit_pos[col]
        s = sizes[b]
        e = np.zeros((s, s), dtype=complex)
        e[i, j] = 1.0
        image = np.zeros((n, n), dtype=complex)
        for target in range(m):
            if src[target] == b:
                u = unitaries[target]
                image += _embed_block(u @ e @ dagger(u), int(offsets[target]), n)
        matrix[:, col] = algebra.coefficients(image)
    alpha = validate_endomorphism(algebra, matrix, tol)
    return algebra, alpha


def _complete_isometry(cols: np.ndarray, tol: TolerancePolicy) -> np.ndarray:
    """Deterministic unitary whose first columns are the given orthonormal
    columns, completed by Gram-Schmidt over the standard basis."""
    d, r = cols.shape
    q = [cols[:, i] for i in range(r)]
    for k in range(d):
        if len(q) == d:
            break
        v = np.zeros(d, dtype=complex)
        v[k] = 1.0
        for u in q:
            v = v - np.vdot(u, v) * u
        nrm = float(np.linalg.norm(v))
        if nrm > 1e-7:
            q.append(v / nrm)
    if len(q) != d:
        raise InternalInvariantViolation("column completion failed")
    return np.stack(q, axis=1)


@dataclass(frozen=True, eq=False)
class ChainDilation:
    """Truncated tensor-chain dilation of a Kraus map.

    ``embed_corner`` places a system operator x on the vacuum corner of
    every level; ``readout`` extracts the level-n vacuum compression, which
    equals phi^t(x) for n >= t after t steps of the dynamics.
    """

    kraus: KrausMap
    levels: int
    algebra: StarAlgebra
    alpha: Endomorphism
    projection: Projection
    level_dims: tuple
    level_offsets: tuple
    vacuum_isometries: tuple  # J_n: (D_n, d)

    @property
    def ambient_dim(self) -> int:
        return self.algebra.ambient_dim

    def embed_corner(self, x) -> np.ndarray:
        x = as_operator(x, self.kraus.dim)
        n = self.ambient_dim
        out = np.zeros((n, n), dtype=complex)
        for lvl in range(self.levels + 1):
            j = self.vacuum_isometries[lvl]
            off = self.level_offsets[lvl]
            dim = self.level_dims[lvl]
            out[off:off + dim, off:off + dim] = j @ x @ dagger(j)
        return out

    def readout(self, a, level: int | None = None) -> np.ndarray:
        level = self.levels if level is None else level
        a = as_operator(a, self.ambient_dim)
        j = self.vacuum_isometries[level]
        off = self.level_offsets[level]
        dim = self.level_dims[level]
        return dagger(j) @ a[off:off + dim, off:off + dim] @ j


def build_chain_dilation(kraus: KrausMap, levels: int,
                         tol: TolerancePolicy = DEFAULT_TOL,
                         contract_tol: float = 1e-8) -> ChainDilation:
    """Truncated dilation of a unital Kraus map to an endomorphism semigroup.

    The compression-recovery contract — vacuum readout of the compressed
    t-step dynamics equals phi^t for every t <= levels — is verified here
    against direct Kraus iteration and is an error if violated.
    """
    if levels < 1:
        raise ValidationError("need at least one chain level")
    d, r = kraus.dim, kraus.rank
    level_dims = [d * r ** n for n in range(levels + 1)]
    offsets = [0]
    for dim in level_dims[:-1]:
        offsets.append(offsets[-1] + dim)
    n_total = sum(level_dims)

    algebra = block_algebra(level_dims, tol)
    v = kraus.stinespring_isometry()
    if opnorm(dagger(v) @ v - np.eye(d)) > tol.eps_eq:
        raise InternalInvariantViolation("Stinespring isometry failed V*V = 1")
    probe = np.eye(d, dtype=complex)
    probe[0, 0] = 0.5  # any non-scalar works; checks V*(x (x) 1)V = phi(x)
    if opnorm(dagger(v) @ np.kron(probe, np.eye(r)) @ v - kraus.apply(probe)) > tol.eps_eq:
        raise InternalInvariantViolation("Stinespring factorization failed")

    omega = np.zeros((r, 1), dtype=complex)
    omega[0, 0] = 1.0
    vac = [np.ones((1, 1), dtype=complex)]
    for _ in range(levels):
        vac.append(np.kron(vac[-1], omega))
    isoms = [np.kron(np.eye(d, dtype=complex), vac[n]) for n in range(levels + 1)]

    step_unitaries = []
    for lvl in range(1, levels + 1):
        t_n = np.kron(isoms[lvl - 1], np.eye(r, dtype=complex)) @ v  # (D_lvl, d)
        tt = _complete_isometry(t_n, tol)
        jj = _complete_isometry(isoms[lvl], tol)
        w = jj @ dagger(tt)
        if opnorm(w @ t_n - isoms[lvl]) > tol.eps_eq:
            raise InternalInvariantViolation("chain step unitary misses the vacuum")
        step_unitaries.append(w)

    k = algebra.dim
    matrix = np.zeros((k, k), dtype=complex)
    col = 0
    for lvl in range(levels + 1):
        dim = level_dims[lvl]
        for i in range(dim):
            for j in range(dim):
                image = np.zeros((n_total, n_total), dtype=complex)
                if lvl == 0:
                    image[offsets[0] + i, offsets[0] + j] = 1.0
                if lvl < levels:
                    e = np.zeros((dim, dim), dtype=complex)
                    e[i, j] = 1.0
                    w = step_unitaries[lvl]
                    up = w @ np.kron(e, np.eye(r, dtype=complex)) @ dagger(w)
                    off = offsets[lvl + 1]
                    image[off:off + level_dims[lvl + 1],
                          off:off + level_dims[lvl + 1]] = up
                matrix[:, col] = algebra.coefficients(image)
                col += 1
    alpha = validate_endomorphism(algebra, matrix, tol)

    pmat = np.zeros((n_total, n_total), dtype=complex)
    for lvl in range(levels + 1):
        off = offsets[lvl]
        block = isoms[lvl] @ dagger(isoms[lvl])
        pmat[off:off + level_dims[lvl], off:off + level_dims[lvl]] = block
    p = Projection.from_matrix(pmat, tol)
    if not is_increasing_projection(alpha, p, tol):
        raise InternalInvariantViolation("chain vacuum projection is not increasing")

    chain = ChainDilation(kraus=kraus, levels=levels, algebra=algebra, alpha=alpha,
                          projection=p, level_dims=tuple(level_dims),
                          level_offsets=tuple(offsets),
                          vacuum_isometries=tuple(isoms))

    basis_units = [np.zeros((d, d), dtype=complex) for _ in range(d * d)]
    for i in range(d):
        for j in range(d):
            basis_units[i * d + j][i, j] = 1.0
    for t in range(1, levels + 1):
        for x in basis_units:
            evolved = alpha.apply(chain.embed_corner(x), t=t, check=False)
            compressed = pmat @ evolved @ pmat
            got = chain.readout(compressed)
            want = kraus.apply(x, t)
            if opnorm(got - want) > contract_tol:
                raise InternalInvariantViolation(
                    f"chain recovery contract violated at t={t} "
                    f"(residual {opnorm(got - want):.3e})")
    return chain


def powers_isometry_cocycle(alpha: Endomorphism, u,
                            horizon: int | None = None,
                            tol: TolerancePolicy | None = None) -> ProjectiveCocycle:
    """Cocycle q_t = u_t u_t* from an intertwining isometry u in M with
    alpha(a) u = u a and u*u = unit.

    In finite dimension such a u is automatically unitary, so the resulting
    cocycle is the trivial one; the construction and its validation are the
    point.
    """
    tol = tol or alpha.tol
    if horizon is None:
        from .dynamics import default_horizon
        horizon = default_horizon(alpha)
    m = alpha.algebra
    u = m.require_member(u, "intertwiner", tol)
    if opnorm(dagger(u) @ u - m.unit.matrix) > tol.eps_eq:
        raise ValidationError("intertwiner is not an isometry (u*u != unit)")
    images = alpha.basis_images(1)
    worst = 0.0
    for i in range(m.dim):
        worst = max(worst, opnorm(images[i] @ u - u @ m.basis[i]))
    if worst > tol.eps_eq:
        raise ValidationError(
            f"intertwining relation alpha(a)u = ua fails (residual {worst:.3e})")
    entries = []
    u_t = u.copy()
    for t in range(1, horizon + 1):
        entries.append(Projection.from_matrix(u_t @ dagger(u_t), tol))
        u_t = alpha.apply(u, t=t, check=False) @ u_t
    return validate_cocycle(alpha, entries, tol)


def _haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(g)
    phases = np.diagonal(r) / np.abs(np.diagonal(r))
    return q * phases


def _functional_graph_cycles(source) -> set:
    """Nodes lying on cycles of the reading map."""
    m = len(source)
    on_cycle = set()
    for start in range(m):
        seen = set()
        node = start
        while node not in seen:
            seen.add(node)
            node = source[node]
        cyc = node  # first repeated node: entry point of the cycle
        cycle_nodes = {cyc}
        nxt = source[cyc]
        while nxt != cyc:
            cycle_nodes.add(nxt)
            nxt = source[nxt]
        on_cycle |= cycle_nodes
    return on_cycle


def random_model(seed: int, block_sizes, style: str = "block",
                 tol: TolerancePolicy = DEFAULT_TOL,
                 kraus_dim: int = 2, kraus_rank: int = 2, levels: int = 2,
                 max_attempts: int = 32) -> ModelSpec:
    """Deterministic pseudorandom model.

    style "block": random size-compatible reading map, Haar-ish unitaries
    per block, and an increasing projection built on the reading cycles
    (holonomy eigenspaces) and propagated down the trees with random
    subprojections, verified increasing.

    style "chain": random unital Kraus map (rows of a Haar isometry) with
    the given dim/rank/levels.
    """
    rng = np.random.default_rng(seed)
    if style == "chain":
        v = _haar_unitary(kraus_dim * kraus_rank, rng)[:, :kraus_dim]
        ops = []
        for i in range(kraus_rank):
            li_star = np.zeros((kraus_dim, kraus_dim), dtype=complex)
            for a in range(kraus_dim):
                li_star[a, :] = v[a * kraus_rank + i, :]
            ops.append(dagger(li_star))
        kraus = KrausMap.from_operators(ops, tol)
        chain = build_chain_dilation(kraus, levels, tol)
        return ModelSpec(
            ambient_dim=chain.ambient_dim,
            blocks=tuple(chain.level_dims),
            endomorphism={"kind": "kraus_chain",
                          "operators": [np.asarray(o) for o in kraus.operators],
                          "levels": levels},
            projection=chain.projection.matrix,
            horizon=2 * (levels + 1),
            tolerances=tol,
        )
    if style != "block":
        raise ValidationError(f"unknown model style {style!r}")

    sizes = [int(s) for s in block_sizes]
    m = len(sizes)
    for attempt in range(max_attempts):
        source = []
        for j in range(m):
            compatible = [b for b in range(m) if sizes[b] == sizes[j]]
            source.append(int(compatible[rng.integers(len(compatible))]))
        unitaries = [_haar_unitary(s, rng) for s in sizes]
        on_cycle = _functional_graph_cycles(source)

        block_projs = [None] * m
        ok = True
        for start in sorted(on_cycle):
            if block_projs[start] is not None:
                continue
            cycle = [start]
            nxt = source[start]
            while nxt != start:
                cycle.append(nxt)
                nxt = source[nxt]
            # holonomy around the cycle, following the content flow
            hol = np.eye(sizes[start], dtype=complex)
            for node in reversed(cycle):
                hol = unitaries[node] @ hol
            evals, evecs = np.linalg.eig(hol)
            keep = rng.random(evals.size) < 0.5
            cols = evecs[:, keep]
            if cols.shape[1]:
                q, _ = np.linalg.qr(cols)
                proj = q @ dagger(q)
            else:
                proj = np.zeros((sizes[start], sizes[start]), dtype=complex)
            block_projs[start] = proj
            # propagate p_j = U_j p_{source(j)} U_j* around the cycle; the
            # holonomy eigenspace choice makes the loop close up exactly
            remaining = cycle[1:]
            changed = True
            while remaining and changed:
                changed = False
                for node in list(remaining):
                    if block_projs[source[node]] is not None:
                        u = unitaries[node]
                        block_projs[node] = u @ block_projs[source[node]] @ dagger(u)
                        remaining.remove(node)
                        changed = True
        # trees: nodes off-cycle, in topological order away from the cycles
        pending = [j for j in range(m) if block_projs[j] is None]
        while pending:
            progressed = False
            for node in list(pending):
                s = source[node]
                if block_projs[s] is not None:
                    u = unitaries[node]
                    upstream = u @ block_projs[s] @ dagger(u)
                    evals, evecs = np.linalg.eigh(upstream)
                    keep_mask = evals > 0.5
                    cols = evecs[:, keep_mask]
                    if cols.shape[1]:
                        take = rng.random(cols.shape[1]) < 0.8
                        sub = cols[:, take]
                        block_projs[node] = sub @ dagger(sub)
                    else:
                        block_projs[node] = np.zeros_like(upstream)
                    pending.remove(node)
                    progressed = True
            if not progressed:
                ok = False
                break
        if not ok:
            continue
        n = sum(sizes)
        offsets = np.concatenate([[0], np.cumsum(sizes)])[:-1]
        pmat = np.zeros((n, n), dtype=complex)
        for j in range(m):
            off = int(offsets[j])
            pmat[off:off + sizes[j], off:off + sizes[j]] = block_projs[j]
        try:
            p = Projection.from_matrix(pmat, tol)
        except Exception:
            continue
        if p.rank == 0:
            continue
        algebra, alpha = build_block_model(sizes, source, unitaries, tol)
        if not is_increasing_projection(alpha, p, tol):
            continue
        return ModelSpec(
            ambient_dim=n,
            blocks=tuple(sizes),
            endomorphism={"kind": "block_map",
                          "source": list(source),
                          "unitaries": [np.asarray(u) for u in unitaries]},
            projection=pmat,
            horizon=2 * n,
            tolerances=tol,
        )
    raise SearchExhausted(
        f"no increasing projection found for blocks {sizes} within "
        f"{max_attempts} attempts (seed {seed})")


def build_model(spec: ModelSpec, tol: TolerancePolicy | None = None) -> BuiltModel:
    """Realize a ModelSpec: construct and validate the algebra, the
    endomorphism and the base projection."""
    tol = tol or spec.tolerances or DEFAULT_TOL
    kind = spec.endomorphism.get("kind")
    chain = None
    if kind == "kraus_chain":
        kraus = KrausMap.from_operators(spec.endomorphism["operators"], tol)
        chain = build_chain_dilation(kraus, int(spec.endomorphism["levels"]), tol)
        algebra, alpha = chain.algebra, chain.alpha
        if tuple(spec.blocks) and tuple(spec.blocks) != chain.level_dims:
            raise ValidationError("blocks field disagrees with the chain levels")
    elif kind == "block_map":
        algebra, alpha = build_block_model(spec.blocks,
                                           spec.endomorphism["source"],
                                           spec.endomorphism.get("unitaries"),
                                           tol)
    elif kind == "basis_map":
        algebra = block_algebra(spec.blocks, tol)
        alpha = validate_endomorphism(algebra,
                                      np.asarray(spec.endomorphism["matrix"],
                                                 dtype=complex), tol)
    else:
        raise ValidationError(f"unknown endomorphism kind {kind!r}")
    if algebra.ambient_dim != spec.ambient_dim:
        raise ValidationError(
            f"ambient_dim {spec.ambient_dim} disagrees with the blocks "
            f"(got {algebra.ambient_dim})")
    p = Projection.from_matrix(spec.projection, tol)
    algebra.require_member(p.matrix, "model projection", tol)
    if not is_increasing_projection(alpha, p, tol):
        raise ValidationError("model projection is not increasing")
    horizon = int(spec.horizon)
    if horizon < 1:
        raise ValidationError("horizon must be at least 1")
    return BuiltModel(spec=spec, algebra=algebra, alpha=alpha, projection=p,
                      horizon=horizon, tol=tol, chain=chain)
