"""Numerical differentiation weights by exactness on a local space.

A weight row approximates ``Lv(y) ~ sum_i w_i v(x_i)`` over a set of
influence; the weights are determined by requiring the formula to be
exact for every element of a generating space.  Polynomial spaces lead to
a transposed Vandermonde system; kernel spaces with a polynomial tail
lead to the symmetric saddle system whose multiplier block is discarded.

When the exactness conditions do not pin the weights down uniquely, the
minimum-2-norm solution is returned; an inconsistent system raises with
rank diagnostics instead of silently returning a bad row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NotAnInterpolationSetError, UnsolvableExactnessError
from .geometry import InfluenceSet, NodeSet, knn
from .linalg import RANK_RTOL, numerical_rank
from .operators import IDENTITY, LAPLACIAN, SECOND_DERIVATIVE_1D, Operator  # noqa: F401 (re-export)
from .spaces import KernelSpace, PolySpace, apply_operator, poly_space_dim

# A produced row must reproduce its generating space to this relative defect.
EXACTNESS_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class StencilWeights:
    """One numerical-differentiation row: weights aligned with the influence set."""

    point: np.ndarray
    influence: InfluenceSet
    weights: np.ndarray
    residual: float


def exactness_defect(weights, basis_at_nodes, targets) -> float:
    """Max relative defect of ``sum_i w_i p_k(x_i) - t_k`` over basis index k.

    The denominator includes the magnitude sum of the weighted terms so that
    rows with large weights and heavy cancellation (second-order stencils at
    small spacing) are judged relative to their own scale.
    """
    w = np.asarray(weights, dtype=float).reshape(-1)
    b = np.atleast_2d(np.asarray(basis_at_nodes, dtype=float))
    t = np.asarray(targets, dtype=float).reshape(-1)
    lhs = w @ b
    term_scale = np.abs(w) @ np.abs(b)
    denom = np.maximum(1.0, np.maximum(np.abs(t), term_scale))
    return float(np.max(np.abs(lhs - t) / denom))


def _identity_row(op: Operator, y, infl: InfluenceSet):
    """Kronecker row when the operator is the identity and y is a stencil node."""
    if op.kind != "identity":
        return None
    hits = np.flatnonzero(np.all(infl.points == np.asarray(y, dtype=float).reshape(-1), axis=1))
    if hits.size == 0:
        return None
    w = np.zeros(infl.size)
    w[hits[0]] = 1.0
    return w


def weights_poly(op: Operator, y, infl: InfluenceSet, ps: PolySpace) -> StencilWeights:
    """Weights exact on a polynomial space.

    Square unisolvent stencils give the unique row; a stencil larger than
    the space dimension gives the minimum-2-norm row.  A target outside the
    row space of the evaluation matrix is unsolvable and raises.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    w = _identity_row(op, y, infl)
    if w is not None:
        return StencilWeights(point=y, influence=infl, weights=w, residual=0.0)
    e = np.atleast_2d(ps.eval_basis(infl.points))
    t = apply_operator(ps, op, y)
    w = None
    if e.shape[0] == ps.dim:
        try:
            w = np.linalg.solve(e.T, t)
        except np.linalg.LinAlgError:
            w = None
    if w is None:
        w, *_ = np.linalg.lstsq(e.T, t, rcond=RANK_RTOL)
    defect = exactness_defect(w, e, t)
    if defect > EXACTNESS_RTOL:
        rank_a = numerical_rank(e.T)
        rank_aug = numerical_rank(np.hstack([e.T, t[:, None]]))
        raise UnsolvableExactnessError(
            f"exactness defect {defect:.2e}: system rank {rank_a}, augmented rank {rank_aug} "
            f"({ps.dim} conditions, {infl.size} nodes)",
            rank=rank_a, n_conditions=ps.dim, defect=defect,
        )
    return StencilWeights(point=y, influence=infl, weights=w, residual=defect)


def weights_kernel(op: Operator, y, infl: InfluenceSet, ks: KernelSpace) -> StencilWeights:
    """Weights exact on a kernel space with polynomial tail (the saddle route).

    Solves ``[[K, P], [P^T, 0]] [w; lam] = [LK(y, .); Lq(y)]`` and discards
    the multipliers; exactness then holds for the moment-constrained kernel
    combinations and the whole tail.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    if not np.array_equal(ks.centers, infl.points):
        raise InvalidInputError("kernel space centers must be the influence nodes")
    w = _identity_row(op, y, infl)
    if w is not None:
        return StencilWeights(point=y, influence=infl, weights=w, residual=0.0)
    if ks.q_dim and ks.poly_block_rank < ks.q_dim:
        raise UnsolvableExactnessError(
            f"polynomial tail block has rank {ks.poly_block_rank} < {ks.q_dim}: "
            "influence nodes are not unisolvent for the tail",
            rank=ks.poly_block_rank, n_conditions=ks.q_dim,
        )
    kernel_rhs = ks.translate_operator(op, y)
    poly_rhs = apply_operator(ks.aug, op, y) if ks.aug is not None else np.zeros(0)
    try:
        sol = ks.saddle_solve(kernel_rhs, poly_rhs)
    except np.linalg.LinAlgError as exc:
        raise UnsolvableExactnessError(f"singular saddle system: {exc}") from None
    w = sol[: ks.n]
    e = np.atleast_2d(ks.eval_basis(infl.points))
    t = apply_operator(ks, op, y)
    defect = exactness_defect(w, e, t)
    if defect > EXACTNESS_RTOL:
        raise UnsolvableExactnessError(
            f"kernel exactness defect {defect:.2e} on a {infl.size}-node stencil",
            rank=numerical_rank(ks.saddle_matrix), n_conditions=ks.dim, defect=defect,
        )
    return StencilWeights(point=y, influence=infl, weights=w, residual=defect)


def verify_exactness(sw: StencilWeights, space, op: Operator) -> float:
    """Recompute the max relative exactness defect of a row over a space's basis."""
    e = np.atleast_2d(space.eval_basis(sw.influence.points))
    t = apply_operator(space, op, sw.point)
    return exactness_defect(sw.weights, e, t)


def unisolvent_influence(
    ns: NodeSet,
    center,
    degree: int,
    sublist=None,
    center_index: int | None = None,
    start: int | None = None,
    growth_cap: int = 3,
) -> tuple[InfluenceSet, PolySpace]:
    """Nearest-neighbor stencil grown until unisolvent for the polynomial space.

    Starts from ``dim P`` neighbors and adds next-nearest nodes one at a
    time; gives up at ``growth_cap * dim P``.
    """
    target = len(tuple(sublist)) if sublist is not None else poly_space_dim(ns.d, degree)
    k = int(start) if start is not None else target
    k = max(k, target)
    cap = min(growth_cap * target, ns.n)
    last_rank = 0
    while k <= cap:
        infl = knn(ns, center, k, center_index=center_index)
        scale = infl.radius if infl.radius > 0.0 else 1.0
        if sublist is not None:
            ps = PolySpace.from_exponents(ns.d, sublist, shift=infl.center, scale=scale)
        else:
            ps = PolySpace.full(ns.d, degree, shift=infl.center, scale=scale)
        last_rank = numerical_rank(np.atleast_2d(ps.eval_basis(infl.points)))
        if last_rank == ps.dim:
            return infl, ps
        k += 1
    raise NotAnInterpolationSetError(
        f"no unisolvent stencil of size <= {cap} around {np.asarray(center).tolist()}",
        rank=last_rank, dim=target, n_nodes=cap,
    )
