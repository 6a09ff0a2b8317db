"""Dense rank and null-space helpers with one shared tolerance.

Every rank decision in the toolkit goes through `numerical_rank` so that
patch unisolvency tests and the spline dimension analyzer agree on what
counts as zero.
"""

import numpy as np

# Relative singular-value cutoff used for every rank decision.
RANK_RTOL = 1e-10


def numerical_rank(a, rtol=RANK_RTOL):
    """Rank of a dense matrix: number of singular values above rtol * s_max."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.size == 0 or min(a.shape) == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rtol * s[0]))


def null_space(a, rtol=RANK_RTOL):
    """Orthonormal basis (columns) of the null space of a dense matrix.

    A matrix with no rows has the full identity as its null space.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    n_cols = a.shape[1]
    if a.shape[0] == 0 or a.size == 0:
        return np.eye(n_cols)
    _, s, vt = np.linalg.svd(a, full_matrices=True)
    if s.size == 0 or s[0] == 0.0:
        rank = 0
    else:
        rank = int(np.count_nonzero(s > rtol * s[0]))
    return vt[rank:].T.copy()
