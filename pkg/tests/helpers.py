"""Shared builders for the test suite."""

import numpy as np

import meshfd as m

FIVE_STAR_SUBLIST = [(0, 0), (1, 0), (0, 1), (2, 0), (0, 2)]


def grid1d(n_intervals, bounds=(0.0, 1.0)):
    return m.generate_grid(1, n_intervals + 1, [bounds])


def grid2d(n_intervals, bounds=((0.0, 1.0), (0.0, 1.0))):
    return m.generate_grid(2, n_intervals + 1, bounds)


def quadratic_overlap_space_1d(n_intervals):
    """Interior-centered quadratic patches on three consecutive grid nodes."""
    ns = grid1d(n_intervals)
    space = m.build_space(ns, "interior", ("knn", 3), m.poly_patch_recipe(2))
    return ns, space


def five_star_sublist_space(n_intervals):
    """Grid patches on the 5-stars with the axis-aligned quadratic sublist."""
    ns = grid2d(n_intervals)
    h = 1.0 / n_intervals
    space = m.build_space(
        ns, "interior", ("range", 1.2 * h),
        m.poly_patch_recipe(2, sublist=FIVE_STAR_SUBLIST),
        uncovered="constant-patch",
    )
    return ns, space


def five_star_full_p2_space(n_intervals):
    """Grid 5-star patches carrying the full bivariate quadratics."""
    ns = grid2d(n_intervals)
    h = 1.0 / n_intervals
    space = m.build_space(
        ns, "interior", ("range", 1.2 * h), m.poly_patch_recipe(2),
        uncovered="constant-patch",
    )
    return ns, space


def jittered_cloud(seed, n_axis=14, jitter=0.15):
    """Quasi-uniform scattered nodes: a grid with seeded interior jitter."""
    rng = np.random.default_rng(seed)
    base = grid2d(n_axis - 1)
    pts = base.points.copy()
    h = 1.0 / (n_axis - 1)
    interior = ~base.boundary_mask
    pts[interior] += rng.uniform(-jitter * h, jitter * h, size=(int(interior.sum()), 2))
    return m.NodeSet(points=pts, boundary_mask=base.boundary_mask)


def brute_force_knn(points, center, k):
    """Oracle: sort all distances, ties by ascending index."""
    center = np.asarray(center, dtype=float)
    dist = np.linalg.norm(points - center, axis=1)
    order = np.lexsort((np.arange(len(points)), dist))
    return order[:k], dist[order[:k]]


def brute_force_range(points, center, radius):
    center = np.asarray(center, dtype=float)
    dist = np.linalg.norm(points - center, axis=1)
    idx = np.flatnonzero(dist <= radius)
    order = np.lexsort((idx, dist[idx]))
    return idx[order], dist[idx][order]


def raw_monomial_laplacian(y, exps):
    """Laplacian of raw (unshifted) monomials at y."""
    y = np.asarray(y, dtype=float)
    d = y.shape[0]
    out = []
    for a in exps:
        total = 0.0
        for axis in range(d):
            if a[axis] >= 2:
                term = a[axis] * (a[axis] - 1) * y[axis] ** (a[axis] - 2)
                for other in range(d):
                    if other != axis:
                        term *= y[other] ** a[other]
            else:
                term = 0.0
            total += term
        out.append(total)
    return np.array(out)


def dense_saddle_laplacian_weights(coords, y, alpha, aug_degree):
    """Independent oracle: raw-coordinate dense saddle solve for Laplacian weights."""
    coords = np.asarray(coords, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = coords.shape
    r = np.linalg.norm(coords[:, None, :] - coords[None, :, :], axis=2)
    exps = m.monomial_exponents(d, aug_degree)
    p = np.column_stack([np.prod(coords ** np.array(a), axis=1) for a in exps])
    q = p.shape[1]
    a = np.zeros((n + q, n + q))
    a[:n, :n] = r**alpha
    a[:n, n:] = p
    a[n:, :n] = p.T
    ry = np.linalg.norm(y - coords, axis=1)
    lap_kernel = alpha * (alpha + d - 2.0) * ry ** (alpha - 2.0)
    rhs = np.concatenate([lap_kernel, raw_monomial_laplacian(y, exps)])
    return np.linalg.solve(a, rhs)[:n]
