"""Node clouds, boundary flags, and neighbor queries.

A point is a plain float array of shape ``(d,)`` and a cloud is an
``(N, d)`` array; node indices are stable after construction.  Dirichlet
nodes are marked explicitly in ``boundary_mask`` (they are never inferred
from the point positions of a scattered cloud).

Neighbor queries run on a kd-tree but their contract is the brute-force
one: results are ordered by distance, with exact ties broken by ascending
node index, so that downstream stencils are reproducible.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import qmc

from .errors import ConstructionError, InvalidInputError

# Relative slack when re-checking kd-tree candidates against exact distances.
_TIE_MARGIN = 1e-9


def _as_bounds(bounds, d):
    """Normalize a box spec to a (d, 2) array and validate it."""
    b = np.asarray(bounds, dtype=float)
    if b.ndim == 1:
        if b.shape != (2,):
            raise InvalidInputError(f"box bounds must be (lo, hi) pairs, got shape {b.shape}")
        b = np.tile(b, (d, 1))
    if b.shape != (d, 2):
        raise InvalidInputError(f"expected bounds of shape ({d}, 2), got {b.shape}")
    if not np.all(b[:, 1] > b[:, 0]):
        raise InvalidInputError("degenerate box: every axis needs hi > lo")
    return b


def _as_point(x, d):
    p = np.asarray(x, dtype=float).reshape(-1)
    if p.shape != (d,):
        raise InvalidInputError(f"expected a point of dimension {d}, got shape {p.shape}")
    return p


@dataclass(frozen=True, eq=False)
class NodeSet:
    """Immutable discretization nodes with boundary flags and a spatial index."""

    points: np.ndarray
    boundary_mask: np.ndarray

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=float))
        if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] < 1:
            raise InvalidInputError(f"points must be a nonempty (N, d) array, got shape {pts.shape}")
        mask = np.asarray(self.boundary_mask, dtype=bool).reshape(-1)
        if mask.shape[0] != pts.shape[0]:
            raise InvalidInputError("boundary_mask length must match the number of points")
        dup = cKDTree(pts).query_pairs(0.0)
        if dup:
            i, j = sorted(dup)[0]
            raise ConstructionError(f"coincident nodes {i} and {j}")
        pts.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "boundary_mask", mask)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @cached_property
    def tree(self) -> cKDTree:
        return cKDTree(self.points)

    @cached_property
    def diameter(self) -> float:
        lo = self.points.min(axis=0)
        hi = self.points.max(axis=0)
        return float(np.linalg.norm(hi - lo))

    @property
    def interior_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_mask)

    @property
    def boundary_indices(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_mask)


@dataclass(frozen=True, eq=False)
class InfluenceSet:
    """Nodes feeding one stencil, ordered by distance from the query center.

    ``indices`` point into the owning NodeSet; exact distance ties are
    resolved by ascending index.  ``center_index`` is set when the query
    center is itself a node.
    """

    center: np.ndarray
    indices: np.ndarray
    distances: np.ndarray
    points: np.ndarray
    center_index: int | None = None

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=int).reshape(-1)
        if np.unique(idx).size != idx.size:
            raise InvalidInputError("influence indices must be distinct")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(-1))
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "distances", np.asarray(self.distances, dtype=float).reshape(-1))
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float))

    @property
    def size(self) -> int:
        return self.indices.size

    @property
    def radius(self) -> float:
        """Largest center-to-member distance (the stencil radius)."""
        return float(self.distances[-1]) if self.distances.size else 0.0


def _select(ns: NodeSet, center, candidate_idx, center_index):
    """Order candidate node indices by (exact distance, index)."""
    cand = np.asarray(candidate_idx, dtype=int)
    dist = np.linalg.norm(ns.points[cand] - center, axis=1)
    order = np.lexsort((cand, dist))
    cand = cand[order]
    dist = dist[order]
    return cand, dist


def knn(ns: NodeSet, center, k: int, center_index: int | None = None) -> InfluenceSet:
    """The k nearest nodes to a center, ties broken by ascending node index."""
    center = _as_point(center, ns.d)
    k = int(k)
    if not 1 <= k <= ns.n:
        raise InvalidInputError(f"k must satisfy 1 <= k <= {ns.n}, got {k}")
    d_tree, _ = ns.tree.query(center, k=k)
    r_k = float(np.max(np.atleast_1d(d_tree)))
    cand = ns.tree.query_ball_point(center, r_k * (1.0 + _TIE_MARGIN) + 1e-300)
    cand, dist = _select(ns, center, cand, center_index)
    return InfluenceSet(
        center=center,
        indices=cand[:k],
        distances=dist[:k],
        points=ns.points[cand[:k]],
        center_index=center_index,
    )


def range_search(ns: NodeSet, center, radius: float, center_index: int | None = None) -> InfluenceSet:
    """All nodes within ``radius`` of the center (inclusive), distance-ordered.

    An empty result is allowed and returns an empty influence set.
    """
    center = _as_point(center, ns.d)
    radius = float(radius)
    if radius <= 0.0:
        raise InvalidInputError("range_search needs a positive radius")
    cand = ns.tree.query_ball_point(center, radius * (1.0 + _TIE_MARGIN))
    cand, dist = _select(ns, center, cand, center_index)
    keep = dist <= radius
    return InfluenceSet(
        center=center,
        indices=cand[keep],
        distances=dist[keep],
        points=ns.points[cand[keep]],
        center_index=center_index,
    )


def generate_grid(d: int, n_per_axis: int, bounds) -> NodeSet:
    """Uniform tensor grid with boundary flags on the box faces.

    The first axis varies slowest, so in 2D node ``i * n + j`` sits at
    ``(lo1 + i * h1, lo2 + j * h2)``.
    """
    d = int(d)
    if d < 1:
        raise InvalidInputError("dimension must be at least 1")
    n_per_axis = int(n_per_axis)
    if n_per_axis < 2:
        raise InvalidInputError("n_per_axis must be at least 2")
    b = _as_bounds(bounds, d)
    axes = [np.linspace(b[a, 0], b[a, 1], n_per_axis) for a in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
    mask = np.zeros(pts.shape[0], dtype=bool)
    for a in range(d):
        mask |= (pts[:, a] == b[a, 0]) | (pts[:, a] == b[a, 1])
    return NodeSet(points=pts, boundary_mask=mask)


def _boundary_grid(b, d, per_axis):
    """All points of a per_axis tensor grid lying on the box boundary."""
    axes = [np.linspace(b[a, 0], b[a, 1], per_axis) for a in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
    on = np.zeros(pts.shape[0], dtype=bool)
    for a in range(d):
        on |= (pts[:, a] == b[a, 0]) | (pts[:, a] == b[a, 1])
    return pts[on]


def generate_scattered(
    d: int,
    count: int,
    bounds,
    source: str = "halton",
    seed: int = 0,
    boundary_per_side: int | None = None,
) -> NodeSet:
    """Scattered interior nodes plus an explicit boundary layer.

    ``source`` is either ``"halton"`` (low-discrepancy, unscrambled, hence
    seed-independent) or ``"random"`` (seeded generator).  Boundary nodes
    are laid out on a tensor grid of the box faces with ``boundary_per_side``
    points per axis (default: roughly matching the interior density); they
    carry the Dirichlet flag.  Runs are bitwise reproducible for fixed
    arguments.
    """
    d = int(d)
    if d < 1:
        raise InvalidInputError("dimension must be at least 1")
    count = int(count)
    if count < 1:
        raise InvalidInputError("count must be at least 1")
    b = _as_bounds(bounds, d)
    if source == "halton":
        eng = qmc.Halton(d=d, scramble=False)
        eng.fast_forward(1)  # index 0 is the box corner
        unit = eng.random(count)
    elif source == "random":
        rng = np.random.default_rng(seed)
        unit = rng.random((count, d))
    else:
        raise InvalidInputError(f"unknown scattered source {source!r}")
    interior = b[:, 0] + unit * (b[:, 1] - b[:, 0])

    if boundary_per_side is None:
        boundary_per_side = max(2, math.ceil(count ** (1.0 / d)))
    boundary = _boundary_grid(b, d, int(boundary_per_side))

    pts = np.vstack([interior, boundary])
    mask = np.zeros(pts.shape[0], dtype=bool)
    mask[count:] = True
    return NodeSet(points=pts, boundary_mask=mask)


def save_nodes(ns: NodeSet, path) -> None:
    """Write a node CSV with header ``x1,...,xd,boundary``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{a + 1}" for a in range(ns.d)] + ["boundary"])
        for p, flag in zip(ns.points, ns.boundary_mask):
            writer.writerow([repr(float(v)) for v in p] + [int(flag)])


def load_nodes(path) -> NodeSet:
    """Read a node CSV written by `save_nodes`; ragged rows are rejected."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InvalidInputError(f"empty node file {path}")
    header = rows[0]
    if len(header) < 2 or header[-1] != "boundary":
        raise InvalidInputError(f"node file {path} must end with a 'boundary' column")
    d = len(header) - 1
    expected = [f"x{a + 1}" for a in range(d)] + ["boundary"]
    if header != expected:
        raise InvalidInputError(f"node file {path} has header {header}, expected {expected}")
    pts = np.empty((len(rows) - 1, d))
    mask = np.empty(len(rows) - 1, dtype=bool)
    for i, row in enumerate(rows[1:]):
        if len(row) != d + 1:
            raise InvalidInputError(f"ragged row {i + 2} in {path}: {len(row)} fields, expected {d + 1}")
        pts[i] = [float(v) for v in row[:d]]
        flag = row[d].strip()
        if flag not in ("0", "1"):
            raise InvalidInputError(f"row {i + 2} in {path}: boundary must be 0 or 1, got {flag!r}")
        mask[i] = flag == "1"
    return NodeSet(points=pts, boundary_mask=mask)
