"""Chebyshev (L-inf) neighbor search and the neighbor-count kernel behind
the MI estimator.

ksg_counts is the hot loop: for each point it finds the k-th nearest
neighbor distance in the joint space (the max of the two marginal Chebyshev
distances) and counts how many marginal points fall strictly inside that
radius. The numba kernel and the pure-numpy fallback compute identical
values bit for bit; the backend defaults to numba when available and can be
forced with the INFOPLANE_DISABLE_NUMBA environment flag or the backend
argument.
"""

import numpy as np

from ._accel import DEFAULT_BACKEND, NUMBA_AVAILABLE, njit, prange
from .errors import ShapeError


def chebyshev_knn(points, query_index, k):
    """Exact k nearest neighbors of one point under the L-inf metric.

    The query point itself is excluded; distance ties break toward the lower
    point index. Returns (distance to the k-th neighbor, the k neighbor
    indices in order).
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ShapeError(f"points must be 2-D, got shape {points.shape}")
    n = points.shape[0]
    if not 0 <= query_index < n:
        raise ValueError(f"query_index {query_index} out of range for {n} points")
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got k={k} with n={n}")
    dist = np.max(np.abs(points - points[query_index]), axis=1)
    dist[query_index] = np.inf
    order = np.lexsort((np.arange(n), dist))  # distance first, index second
    neighbors = order[:k]
    return float(dist[neighbors[-1]]), neighbors


def _validate_pair(x, y, k):
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2:
        raise ShapeError(f"ensembles must be 2-D, got shapes {x.shape} and {y.shape}")
    if x.shape[0] != y.shape[0]:
        raise ShapeError(f"ensembles must have equal sample counts, got {x.shape[0]} and {y.shape[0]}")
    n = x.shape[0]
    if not 1 <= k <= n - 1:
        raise ValueError(f"need 1 <= k <= n-1, got k={k} with n={n}")
    return x, y


@njit(parallel=True, cache=True)
def _ksg_counts_numba(x, y, k):  # pragma: no cover - measured via the dispatcher
    n = x.shape[0]
    dx_dim = x.shape[1]
    dy_dim = y.shape[1]
    eps = np.empty(n)
    nx = np.empty(n, np.int64)
    ny = np.empty(n, np.int64)
    for i in prange(n):
        dx = np.empty(n)
        dy = np.empty(n)
        dj = np.empty(n)
        for j in range(n):
            mx = 0.0
            for f in range(dx_dim):
                v = abs(x[i, f] - x[j, f])
                if v > mx:
                    mx = v
            my = 0.0
            for f in range(dy_dim):
                v = abs(y[i, f] - y[j, f])
                if v > my:
                    my = v
            dx[j] = mx
            dy[j] = my
            dj[j] = mx if mx > my else my
        dj[i] = np.inf
        e = np.partition(dj, k - 1)[k - 1]
        count_x = 0
        count_y = 0
        for j in range(n):
            if j == i:
                continue
            if dx[j] < e:
                count_x += 1
            if dy[j] < e:
                count_y += 1
        eps[i] = e
        nx[i] = count_x
        ny[i] = count_y
    return eps, nx, ny


def ksg_counts_numpy(x, y, k, block_rows=None):
    """Vectorized fallback; processes query points in row blocks to bound the
    pairwise broadcast temporaries."""
    x, y = _validate_pair(x, y, k)
    n = x.shape[0]
    if block_rows is None:
        bytes_per_row = n * max(x.shape[1], y.shape[1]) * 8
        block_rows = int(max(1, min(n, (64 << 20) // max(bytes_per_row, 1))))
    eps = np.empty(n)
    nx = np.empty(n, np.int64)
    ny = np.empty(n, np.int64)
    for start in range(0, n, block_rows):
        stop = min(start + block_rows, n)
        dx = np.abs(x[start:stop, None, :] - x[None, :, :]).max(axis=2)
        dy = np.abs(y[start:stop, None, :] - y[None, :, :]).max(axis=2)
        dj = np.maximum(dx, dy)
        rows = np.arange(stop - start)
        dj[rows, start + rows] = np.inf
        kth = np.partition(dj, k - 1, axis=1)[:, k - 1]
        eps[start:stop] = kth
        # the query point itself (marginal distance 0) is inside any kth > 0
        self_hit = (kth > 0).astype(np.int64)
        nx[start:stop] = (dx < kth[:, None]).sum(axis=1) - self_hit
        ny[start:stop] = (dy < kth[:, None]).sum(axis=1) - self_hit
    return eps, nx, ny


def ksg_counts(x, y, k, backend=None):
    """Per-point joint k-th neighbor radius and strict marginal neighbor counts.

    Returns (eps, nx, ny): eps[i] is the Chebyshev distance from joint point
    i to its k-th nearest other point, nx[i]/ny[i] count points j != i with
    marginal distance strictly below eps[i]. Both backends agree exactly.
    """
    if backend is None:
        backend = DEFAULT_BACKEND
    if backend == "numba":
        if not NUMBA_AVAILABLE:
            raise RuntimeError("numba backend requested but numba is unavailable or disabled")
        x, y = _validate_pair(x, y, k)
        return _ksg_counts_numba(x, y, int(k))
    if backend == "numpy":
        return ksg_counts_numpy(x, y, k)
    raise ValueError(f"unknown backend {backend!r}, expected 'numba' or 'numpy'")
