"""Equal-size clustering: AB-EKmeans, IMDA-EKmeans and recursive projection.

All assignment routines work on squared Euclidean distances and break ties
by lowest point index first, then lowest cluster index, so results are a
pure function of the inputs and the seed.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .exceptions import InvalidArgumentError

__all__ = [
    "EqualClustering",
    "init_centers",
    "kmeans",
    "nearest_assign",
    "ab_assign",
    "imda_assign",
    "ekmeans",
    "rpc",
    "clustering_cost",
    "cluster_sizes",
]

MAX_ITER = 100


@dataclass(frozen=True)
class EqualClustering:
    """A balanced partition of ``N`` points into ``K`` clusters.

    Attributes
    ----------
    labels : ndarray of int, shape (N,)
        Cluster index of every point, in ``[0, K)``.
    centers : ndarray, shape (K, d)
        Cluster centers (member means for the final partition).
    K : int
        Number of clusters.
    cost : float
        Sum of squared distances of points to their assigned center.
    n_iter : int
        Assignment/update rounds performed (1 for RPC).
    """

    labels: np.ndarray
    centers: np.ndarray
    K: int
    cost: float
    n_iter: int = 1

    def members(self, k):
        return np.flatnonzero(self.labels == k)

    def sizes(self):
        return np.bincount(self.labels, minlength=self.K)


def _as_points(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise InvalidArgumentError(f"expected a 2-D point matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidArgumentError("point matrix contains non-finite coordinates")
    return X


def _check_centers(X, centers):
    centers = _as_points(centers)
    if centers.shape[1] != X.shape[1]:
        raise InvalidArgumentError(
            f"centers have dimension {centers.shape[1]}, points have {X.shape[1]}"
        )
    if centers.shape[0] < 1:
        raise InvalidArgumentError("at least one center is required")
    if centers.shape[0] > X.shape[0]:
        raise InvalidArgumentError(
            f"K={centers.shape[0]} centers exceed N={X.shape[0]} points"
        )
    return centers


def sq_distances(X, centers):
    """Squared Euclidean distances, shape ``(len(X), len(centers))``."""
    d = (
        np.einsum("ij,ij->i", X, X)[:, None]
        - 2.0 * X @ centers.T
        + np.einsum("ij,ij->i", centers, centers)[None, :]
    )
    return np.maximum(d, 0.0)


def cluster_sizes(labels, K):
    return np.bincount(labels, minlength=K)


def init_centers(X, K, seed=None):
    """Pick ``K`` distinct points of ``X`` by k-means++ seeding.

    The first center is drawn uniformly; each next one with probability
    proportional to the squared distance to the closest chosen center.
    """
    X = _as_points(X)
    N = X.shape[0]
    if not isinstance(K, (int, np.integer)) or K < 1:
        raise InvalidArgumentError(f"K must be a positive integer, got {K!r}")
    if K > N:
        raise InvalidArgumentError(f"K={K} exceeds N={N}")
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(N))]
    closest = sq_distances(X, X[chosen])[:, 0]
    for _ in range(1, K):
        weights = closest.copy()
        weights[chosen] = 0.0
        total = weights.sum()
        if total > 0:
            idx = int(rng.choice(N, p=weights / total))
        else:
            # every remaining point coincides with a chosen center
            remaining = np.setdiff1d(np.arange(N), chosen)
            idx = int(rng.choice(remaining))
        chosen.append(idx)
        closest = np.minimum(closest, sq_distances(X, X[idx : idx + 1])[:, 0])
    return X[chosen].copy()


def _update_centers(X, labels, previous):
    K = previous.shape[0]
    counts = np.bincount(labels, minlength=K)
    sums = np.zeros_like(previous)
    np.add.at(sums, labels, X)
    centers = previous.copy()
    filled = counts > 0
    centers[filled] = sums[filled] / counts[filled, None]
    return centers


def nearest_assign(X, centers):
    """Unconstrained k-means assignment step (lowest index wins ties)."""
    X = _as_points(X)
    centers = _as_points(centers)
    return np.argmin(sq_distances(X, centers), axis=1)


def kmeans(X, K, seed=None, max_iter=MAX_ITER):
    """Standard Lloyd k-means from k-means++ seeds; returns the centers."""
    X = _as_points(X)
    centers = init_centers(X, K, seed)
    labels = None
    for _ in range(max_iter):
        new = np.argmin(sq_distances(X, centers), axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        centers = _update_centers(X, labels, centers)
    return centers


def _target_sizes(initial_sizes, N):
    # The N mod K largest initial clusters are allowed one extra point.
    K = len(initial_sizes)
    q, r = divmod(N, K)
    target = np.full(K, q, dtype=int)
    if r:
        order = np.lexsort((np.arange(K), -np.asarray(initial_sizes)))
        target[order[:r]] = q + 1
    return target


def ab_assign(X, centers):
    """Assign-and-Balance assignment step.

    Points first go to their nearest center.  Members of overfull clusters
    form a pool, and the globally closest (pool point, underfull center)
    pair is moved repeatedly until every cluster reaches its target size.
    A cluster stops donating once balanced and stops receiving once full.

    Returns
    -------
    labels : ndarray of int
    """
    X = _as_points(X)
    centers = _check_centers(X, centers)
    N, K = X.shape[0], centers.shape[0]
    dist = sq_distances(X, centers)
    labels = np.argmin(dist, axis=1)
    if K == 1:
        return labels
    sizes = np.bincount(labels, minlength=K)
    target = _target_sizes(sizes, N)
    surplus = sizes - target
    if not np.any(surplus > 0):
        return labels

    receivers = np.flatnonzero(surplus < 0)
    room = np.zeros(K, dtype=int)
    room[receivers] = -surplus[receivers]
    surplus = np.maximum(surplus, 0)
    pool = np.flatnonzero(surplus[labels] > 0)

    sub = np.ascontiguousarray(dist[np.ix_(pool, receivers)])
    labels = labels.astype(np.int64)
    _balance_kernel(sub, pool.astype(np.int64), receivers.astype(np.int64),
                    labels, surplus.astype(np.int64), room[receivers].astype(np.int64))
    return labels


def imda_assign(X, centers):
    """Iterative minimum-distance assignment step.

    Starting from no assignments, the globally closest (unassigned point,
    open center) pair is committed until all points are placed.  Clusters
    close at ``ceil(N/K)`` members while fewer than ``N mod K`` clusters
    hold that many, and at ``floor(N/K)`` afterwards.
    """
    X = _as_points(X)
    centers = _check_centers(X, centers)
    N, K = X.shape[0], centers.shape[0]
    dist = sq_distances(X, centers)
    if K == 1:
        return np.zeros(N, dtype=int)
    q, r = divmod(N, K)
    return _imda_kernel(dist, q, r)


# Greedy balancing kernels.  A binary min-heap keyed by (distance, point)
# holds each active point's best still-open center; entries whose center
# has since closed are re-targeted lazily when popped.

@njit(cache=True)
def _heap_less(hd, hp, a, b):
    return hd[a] < hd[b] or (hd[a] == hd[b] and hp[a] < hp[b])


@njit(cache=True)
def _heap_push(hd, hp, hr, n, d, p, r):
    i = n
    hd[i] = d
    hp[i] = p
    hr[i] = r
    while i > 0:
        parent = (i - 1) // 2
        if _heap_less(hd, hp, i, parent):
            hd[i], hd[parent] = hd[parent], hd[i]
            hp[i], hp[parent] = hp[parent], hp[i]
            hr[i], hr[parent] = hr[parent], hr[i]
            i = parent
        else:
            break
    return n + 1


@njit(cache=True)
def _heap_pop(hd, hp, hr, n):
    d, p, r = hd[0], hp[0], hr[0]
    n -= 1
    hd[0], hp[0], hr[0] = hd[n], hp[n], hr[n]
    i = 0
    while True:
        left = 2 * i + 1
        if left >= n:
            break
        child = left
        if left + 1 < n and _heap_less(hd, hp, left + 1, left):
            child = left + 1
        if _heap_less(hd, hp, child, i):
            hd[i], hd[child] = hd[child], hd[i]
            hp[i], hp[child] = hp[child], hp[i]
            hr[i], hr[child] = hr[child], hr[i]
            i = child
        else:
            break
    return d, p, r, n


@njit(cache=True)
def _best_open(row, room):
    # lowest-distance column with room left; lowest column wins ties
    best = -1
    for c in range(row.shape[0]):
        if room[c] > 0 and (best < 0 or row[c] < row[best]):
            best = c
    return best


@njit(cache=True)
def _balance_kernel(sub, pool, receivers, labels, surplus, room):
    n_rows = sub.shape[0]
    hd = np.empty(n_rows)
    hp = np.empty(n_rows, dtype=np.int64)
    hr = np.empty(n_rows, dtype=np.int64)
    target = np.empty(n_rows, dtype=np.int64)
    n = 0
    for row in range(n_rows):
        c = _best_open(sub[row], room)
        target[row] = c
        n = _heap_push(hd, hp, hr, n, sub[row, c], pool[row], row)
    remaining = surplus.sum()
    while remaining > 0 and n > 0:
        _, point, row, n = _heap_pop(hd, hp, hr, n)
        source = labels[point]
        if surplus[source] == 0:
            continue
        c = target[row]
        if room[c] == 0:
            c = _best_open(sub[row], room)
            if c >= 0:
                target[row] = c
                n = _heap_push(hd, hp, hr, n, sub[row, c], point, row)
            continue
        labels[point] = receivers[c]
        room[c] -= 1
        surplus[source] -= 1
        remaining -= 1


@njit(cache=True)
def _imda_kernel(dist, q, r):
    N, K = dist.shape
    hd = np.empty(N)
    hp = np.empty(N, dtype=np.int64)
    hr = np.empty(N, dtype=np.int64)
    target = np.empty(N, dtype=np.int64)
    room = np.full(K, q + 1 if r > 0 else q, dtype=np.int64)
    labels = np.full(N, -1, dtype=np.int64)
    at_ceiling = 0
    n = 0
    for i in range(N):
        c = _best_open(dist[i], room)
        target[i] = c
        n = _heap_push(hd, hp, hr, n, dist[i, c], i, i)
    while n > 0:
        _, i, _, n = _heap_pop(hd, hp, hr, n)
        c = target[i]
        if room[c] == 0:
            c = _best_open(dist[i], room)
            target[i] = c
            n = _heap_push(hd, hp, hr, n, dist[i, c], i, i)
            continue
        labels[i] = c
        room[c] -= 1
        if r > 0 and room[c] == 0:
            at_ceiling += 1
            if at_ceiling == r:
                # remaining clusters now close at floor(N/K)
                for j in range(K):
                    if room[j] > 0:
                        room[j] -= 1
    return labels

def clustering_cost(X, labels, centers):
    """Within-cluster sum of squared Euclidean distances ``J(C)``."""
    X = _as_points(X)
    centers = _as_points(centers)
    labels = np.asarray(labels)
    if labels.shape != (X.shape[0],):
        raise InvalidArgumentError("one label per point is required")
    if labels.size and (labels.min() < 0 or labels.max() >= centers.shape[0]):
        raise InvalidArgumentError(
            f"labels must lie in [0, {centers.shape[0]}), got range "
            f"[{labels.min()}, {labels.max()}]"
        )
    diff = X - centers[labels]
    return float(np.einsum("ij,ij->", diff, diff))


_ASSIGNERS = {"AB": ab_assign, "IMDA": imda_assign}


def ekmeans(X, K, variant="AB", max_iter=MAX_ITER, seed=None, init="kmeans", centers=None):
    """Equal-size k-means.

    Alternates a balanced assignment step (``variant`` AB or IMDA) with a
    mean update until the labels stop changing or ``max_iter`` rounds ran.

    Parameters
    ----------
    X : array_like, shape (N, d)
    K : int
    variant : {"AB", "IMDA"}
    max_iter : int
        Cap on assignment/update rounds.
    seed : int or None
        Seed for the center initialisation.
    init : {"kmeans", "kmeans++"}
        Start from converged standard k-means centers, or directly from
        k-means++ seeds.  Ignored when ``centers`` is given.
    centers : array_like, optional
        Explicit initial centers.
    """
    X = _as_points(X)
    try:
        assign = _ASSIGNERS[str(variant).upper()]
    except KeyError:
        raise InvalidArgumentError(f"unknown EKmeans variant {variant!r}") from None
    if max_iter < 1:
        raise InvalidArgumentError("max_iter must be at least 1")
    if centers is not None:
        centers = _check_centers(X, centers)
        if centers.shape[0] != K:
            raise InvalidArgumentError("explicit centers do not match K")
    elif init == "kmeans":
        centers = kmeans(X, K, seed)
    elif init == "kmeans++":
        centers = init_centers(X, K, seed)
    else:
        raise InvalidArgumentError(f"unknown init {init!r}")

    labels = None
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        new = assign(X, centers)
        centers = _update_centers(X, new, centers)
        if labels is not None and np.array_equal(new, labels):
            labels = new
            break
        labels = new
        if K == 1:
            break
    return EqualClustering(labels, centers, K, clustering_cost(X, labels, centers), n_iter)


def _split_direction(P, rng, max_draws=10):
    n = P.shape[0]
    for _ in range(max_draws):
        a, b = rng.choice(n, size=2, replace=False)
        direction = P[b] - P[a]
        if np.any(direction != 0):
            return direction
    direction = np.zeros(P.shape[1])
    direction[0] = 1.0
    return direction


def rpc(X, target_K, seed=None):
    """Recursive projection clustering.

    Every cluster is split at the median of its projections onto the line
    through two randomly drawn members, until there are ``2**l >= target_K``
    clusters.  Odd clusters put the extra point in the second half.
    """
    X = _as_points(X)
    N = X.shape[0]
    if not isinstance(target_K, (int, np.integer)) or target_K < 1:
        raise InvalidArgumentError(f"target_K must be a positive integer, got {target_K!r}")
    if target_K > N:
        raise InvalidArgumentError(f"target_K={target_K} exceeds N={N}")
    levels = int(np.ceil(np.log2(target_K))) if target_K > 1 else 0
    K = 2**levels
    if K > N:
        raise InvalidArgumentError(f"RPC needs K={K} clusters but only N={N} points")
    rng = np.random.default_rng(seed)
    groups = [np.arange(N)]
    for _ in range(levels):
        split = []
        for idx in groups:
            P = X[idx]
            if len(idx) < 2:
                raise InvalidArgumentError("cannot split a singleton cluster")
            proj = (P - P.mean(axis=0)) @ _split_direction(P, rng)
            order = np.argsort(proj, kind="stable")
            half = len(idx) // 2
            split.append(idx[order[:half]])
            split.append(idx[order[half:]])
        groups = split
    labels = np.empty(N, dtype=int)
    for k, idx in enumerate(groups):
        labels[idx] = k
    centers = np.stack([X[idx].mean(axis=0) for idx in groups])
    return EqualClustering(labels, centers, K, clustering_cost(X, labels, centers), 1)
