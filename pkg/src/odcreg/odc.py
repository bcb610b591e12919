"""Overlapping domain cover: subdomains built around equal-size clusters.

Every subdomain is one cluster (its core) topped up to exactly ``M``
points with the members of neighbouring clusters that lie closest to the
cluster's center.  With ``p = 0`` nothing is borrowed and the subdomains
are the clusters themselves.  The number of points borrowed from each neighbour is
inversely proportional to the distance between cluster centers.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.spatial import cKDTree

from .exceptions import InvalidArgumentError, InvalidConfigError

__all__ = [
    "OdcConfig",
    "Subdomain",
    "CoverDiagnostics",
    "generate_odc",
    "subdomain_stats",
    "default_ridge",
    "validate_cover",
]

MACHINE_KINDS = ("GPR", "TGP", "IWTGP")
CLUSTERING_KINDS = ("AB", "IMDA", "RPC")


@dataclass(frozen=True)
class OdcConfig:
    """Shape of an overlapping domain cover and how it is used.

    ``p`` is clamped to ``[0, 1 - 1/M]`` on construction.
    """

    M: int
    p: float = 0.0
    t: float = 1.0
    Kprime: int = 1
    machine_kind: str = "TGP"
    clustering_kind: str = "AB"

    def __post_init__(self):
        if not isinstance(self.M, (int, np.integer)) or self.M < 1:
            raise InvalidConfigError(f"M must be a positive integer, got {self.M!r}")
        if not math.isfinite(self.p):
            raise InvalidConfigError("p must be finite")
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "p", float(min(max(self.p, 0.0), 1.0 - 1.0 / self.M)))
        if not self.t >= 1:
            raise InvalidConfigError(f"t must be >= 1, got {self.t!r}")
        if not isinstance(self.Kprime, (int, np.integer)) or self.Kprime < 1:
            raise InvalidConfigError(f"Kprime must be a positive integer, got {self.Kprime!r}")
        object.__setattr__(self, "Kprime", int(self.Kprime))
        kind = str(self.machine_kind).upper()
        if kind not in MACHINE_KINDS:
            raise InvalidConfigError(f"machine_kind must be one of {MACHINE_KINDS}")
        object.__setattr__(self, "machine_kind", kind)
        ckind = str(self.clustering_kind).upper()
        if ckind not in CLUSTERING_KINDS:
            raise InvalidConfigError(f"clustering_kind must be one of {CLUSTERING_KINDS}")
        object.__setattr__(self, "clustering_kind", ckind)

    @property
    def core_size(self):
        """Nominal cluster size ``(1-p)M``."""
        return (1.0 - self.p) * self.M

    def n_clusters(self, N):
        """``K = ceil(N / ((1-p) M))``, at least 1 and at most ``N``."""
        # round before ceil so that e.g. (1-0.9)*200 does not yield 20.000000000000004
        ratio = round(N / self.core_size, 9)
        return int(min(max(math.ceil(ratio), 1), N))

    @property
    def r(self):
        """Number of neighbouring clusters overlap is drawn from."""
        if self.p == 0:
            return 0
        return int(math.ceil(round(self.t * self.p / (1.0 - self.p), 9)))

    def to_dict(self):
        return {
            "M": self.M,
            "p": self.p,
            "t": self.t,
            "Kprime": self.Kprime,
            "machine_kind": self.machine_kind,
            "clustering_kind": self.clustering_kind,
        }


@dataclass(frozen=True)
class Subdomain:
    """One member of the cover.

    Attributes
    ----------
    indices : ndarray of int, shape (M,)
        Training indices: the core first (sorted), then borrowed points in
        the order they were taken.
    core_indices : ndarray of int
        The subdomain's own cluster.
    mu : ndarray, shape (d_X,)
        Sample mean of the subdomain inputs.
    prec : ndarray, shape (d_X, d_X)
        Inverse of the ridge-regularised sample covariance.
    """

    indices: np.ndarray
    core_indices: np.ndarray
    mu: np.ndarray
    prec: np.ndarray
    borrowed_from: dict = field(default_factory=dict, compare=False)

    @property
    def overlap_indices(self):
        return self.indices[len(self.core_indices):]


def default_ridge(cov):
    """Ridge added to a sample covariance before inversion."""
    d = cov.shape[0]
    return max(1e-6 * float(np.trace(cov)) / d, 1e-10)


def subdomain_stats(X, indices, ridge=None):
    """Sample mean and regularised precision of ``X[indices]``.

    The covariance uses denominator ``len(indices)``.  ``ridge`` defaults to
    :func:`default_ridge` of that covariance.

    Returns
    -------
    mu : ndarray, shape (d,)
    prec : ndarray, shape (d, d)
        ``(cov + ridge * I)^-1``, symmetric positive definite.
    """
    P = np.asarray(X, dtype=float)[np.asarray(indices)]
    if P.ndim == 1:
        P = P[:, None]
    if P.shape[0] < 1:
        raise InvalidArgumentError("subdomain_stats needs at least one point")
    mu = P.mean(axis=0)
    centered = P - mu
    cov = centered.T @ centered / P.shape[0]
    eps = default_ridge(cov) if ridge is None else float(ridge)
    if eps <= 0:
        raise InvalidArgumentError("ridge must be positive")
    d = cov.shape[0]
    factor = cho_factor(cov + eps * np.eye(d), lower=True)
    prec = cho_solve(factor, np.eye(d))
    return mu, 0.5 * (prec + prec.T)


def _allocate(budget, dists, capacities, r):
    """Points to borrow from each neighbour, neighbours sorted by distance.

    The ``r`` nearest get shares inversely proportional to their distance
    (floor, then one extra each, nearest first, for the remainder).  Any
    share above a neighbour's size is clamped and the excess handed to the
    nearest neighbours that still have room, looking beyond ``r`` if needed.
    """
    n = len(dists)
    take = np.zeros(n, dtype=int)
    if budget == 0 or n == 0:
        return take
    r = min(max(r, 1), n)
    near = dists[:r]
    zero = near == 0
    if np.any(zero):
        weights = zero.astype(float)
    else:
        weights = 1.0 / near
    weights = weights / weights.sum()
    share = np.floor(weights * budget + 1e-9).astype(int)
    share = np.minimum(share, budget)
    extra = budget - int(share.sum())
    i = 0
    while extra > 0:
        share[i % r] += 1
        extra -= 1
        i += 1
    take[:r] = share
    overflow = int(np.maximum(take - capacities, 0).sum())
    take = np.minimum(take, capacities)
    for j in range(n):
        if overflow == 0:
            break
        extra = min(overflow, int(capacities[j] - take[j]))
        take[j] += extra
        overflow -= extra
    return take


def _nearest_members(X, members, center, count, tree=None):
    if count == 0:
        return members[:0]
    if tree is not None:
        _, local = tree.query(center, k=count)
        local = np.atleast_1d(local)
        d = np.sum((X[members[local]] - center) ** 2, axis=1)
        local = local[np.lexsort((members[local], d))]
        return members[local]
    d = np.sum((X[members] - center) ** 2, axis=1)
    order = np.lexsort((members, d))
    return members[order[:count]]


def generate_odc(X, clustering, config, ridge=None, nn_backend="brute"):
    """Build one subdomain of exactly ``config.M`` points per cluster.

    ``p = 0`` is the non-overlapping limit: each subdomain is its cluster,
    which has fewer than ``M`` points when ``M`` does not divide ``N``.

    Parameters
    ----------
    X : array_like, shape (N, d_X)
    clustering : EqualClustering
    config : OdcConfig
    ridge : float, optional
        Covariance ridge passed to :func:`subdomain_stats`.
    nn_backend : {"brute", "kdtree"}
        How the members of a neighbour closest to a center are retrieved.

    Returns
    -------
    list of Subdomain
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    N = X.shape[0]
    M = config.M
    labels = np.asarray(clustering.labels)
    if labels.shape != (N,):
        raise InvalidArgumentError("clustering does not match the point matrix")
    K = clustering.K
    members = [np.flatnonzero(labels == k) for k in range(K)]
    sizes = np.array([len(m) for m in members])
    if sizes.max() > M:
        raise InvalidConfigError(
            f"cluster of {sizes.max()} points does not fit in a subdomain of M={M}"
        )
    if M > N:
        raise InvalidConfigError(f"M={M} exceeds the N={N} available points")
    if nn_backend not in ("brute", "kdtree"):
        raise InvalidArgumentError(f"unknown nn_backend {nn_backend!r}")
    trees = {}
    centers = np.asarray(clustering.centers, dtype=float)
    r = config.r

    subdomains = []
    for k in range(K):
        core = members[k]
        budget = M - len(core) if config.p > 0 else 0
        others = np.array([j for j in range(K) if j != k], dtype=int)
        borrowed = []
        origin = {}
        if budget > 0:
            dk = np.linalg.norm(centers[others] - centers[k], axis=1)
            order = np.lexsort((others, dk))
            neighbours = others[order]
            take = _allocate(budget, dk[order], sizes[neighbours], r)
            for j, count in zip(neighbours, take):
                if count == 0:
                    continue
                tree = None
                if nn_backend == "kdtree":
                    if j not in trees:
                        trees[j] = cKDTree(X[members[j]])
                    tree = trees[j]
                picked = _nearest_members(X, members[j], centers[k], int(count), tree)
                borrowed.append(picked)
                origin[int(j)] = int(count)
        indices = np.concatenate([core] + borrowed) if borrowed else core.copy()
        mu, prec = subdomain_stats(X, indices, ridge)
        subdomains.append(Subdomain(indices, core.copy(), mu, prec, origin))
    return subdomains


@dataclass
class CoverDiagnostics:
    """Outcome of :func:`validate_cover`."""

    cover_ok: bool
    sizes_ok: bool
    disjoint_ok: bool
    unique_ok: bool
    overlap_ok: bool
    missing: list
    duplicated_core: list
    bad_sizes: list
    overlap_fractions: list
    effective_p: float

    @property
    def ok(self):
        return all(
            (self.cover_ok, self.sizes_ok, self.disjoint_ok, self.unique_ok, self.overlap_ok)
        )

    def summary(self):
        lines = [
            f"cover: {'ok' if self.cover_ok else 'missing ' + str(self.missing[:10])}",
            f"cores disjoint: {'ok' if self.disjoint_ok else 'repeated ' + str(self.duplicated_core[:10])}",
            f"sizes: {'ok' if self.sizes_ok else 'wrong ' + str(self.bad_sizes[:10])}",
            f"unique indices: {'ok' if self.unique_ok else 'FAIL'}",
            f"overlap: {'ok' if self.overlap_ok else 'FAIL'} (effective p {self.effective_p:.4f})",
        ]
        return "\n".join(lines)


def validate_cover(subdomains, N, config):
    """Check the structural properties of a cover without raising.

    Overlap fractions are compared with the effective overlap
    ``1 - (N/K)/M`` implied by the actual number of subdomains, which equals
    ``p`` when the clusters have exactly ``(1-p)M`` points, or with zero
    when ``p = 0``.  The tolerance is ``1/M``.
    """
    M = config.M
    K = len(subdomains)
    counts = np.zeros(N, dtype=int)
    bad_sizes = []
    unique_ok = True
    fractions = []
    for k, sd in enumerate(subdomains):
        core = np.asarray(sd.core_indices)
        idx = np.asarray(sd.indices)
        if len(core):
            np.add.at(counts, core[(core >= 0) & (core < N)], 1)
        if len(idx) != M:
            bad_sizes.append((k, len(idx)))
        if len(np.unique(idx)) != len(idx) or not np.all(np.isin(core, idx)):
            unique_ok = False
        fractions.append((len(idx) - len(core)) / M if M else 0.0)
    missing = np.flatnonzero(counts == 0).tolist()
    repeated = np.flatnonzero(counts > 1).tolist()
    effective_p = 1.0 - (N / K) / M if K and config.p > 0 else 0.0
    effective_p = max(effective_p, 0.0)
    overlap_ok = all(abs(f - effective_p) <= 1.0 / M + 1e-12 for f in fractions)
    return CoverDiagnostics(
        cover_ok=not missing,
        sizes_ok=not bad_sizes,
        disjoint_ok=not repeated,
        unique_ok=unique_ok,
        overlap_ok=overlap_ok,
        missing=missing,
        duplicated_core=repeated,
        bad_sizes=bad_sizes,
        overlap_fractions=fractions,
        effective_p=effective_p,
    )
