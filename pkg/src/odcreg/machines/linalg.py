"""Test-time weighted inverses ``(D A D + lam I)^-1`` for the weighted TGP."""

from dataclasses import dataclass

import numpy as np

from ..exceptions import InvalidArgumentError
from .kernels import spd_inverse

__all__ = [
    "miller_inverse",
    "weighted_inverse",
    "WeightedInverse",
    "inverse_residual",
    "probe_residual",
]


def _diag(D):
    d = np.asarray(D, dtype=float)
    if d.ndim == 2:
        if d.shape[0] != d.shape[1] or np.any(d - np.diag(np.diag(d))):
            raise InvalidArgumentError("D must be diagonal")
        d = np.diag(d).copy()
    d = np.atleast_1d(d)
    if not np.all(np.isfinite(d)) or np.any(d <= 0):
        raise InvalidArgumentError("D must have strictly positive finite diagonal entries")
    return d


def miller_inverse(A_inv, D, lam, A_inv_sq=None):
    """Rank-one-lemma expression for ``(D A D + lam I)^-1``.

    Computes ``D^-1 A^-1 D^-1 - lam D^-2 A^-2 D^-2 / (1 + lam tr(D^-1 A^-1 D^-1))``
    in O(M^2) when ``A_inv_sq`` (``A^-2``) is supplied.  Exact for a 1x1
    system or ``lam == 0``; otherwise an approximation whose quality should
    be checked with :func:`probe_residual`.

    ``D`` may be a vector of diagonal entries or a diagonal matrix.
    """
    A_inv = np.asarray(A_inv, dtype=float)
    d = _diag(D)
    if A_inv.shape != (d.size, d.size):
        raise InvalidArgumentError(f"A_inv shape {A_inv.shape} does not match D of size {d.size}")
    di = 1.0 / d
    G = di[:, None] * A_inv * di[None, :]
    if lam == 0:
        return G
    if d.size == 1:
        # the expression telescopes; this form avoids cancellation when lam >> a d^2
        return G / (1.0 + lam * G)
    if A_inv_sq is None:
        A_inv_sq = A_inv @ A_inv
    di2 = di * di
    H = di2[:, None] * np.asarray(A_inv_sq, dtype=float) * di2[None, :]
    return G - lam * H / (1.0 + lam * np.trace(G))


def _weighted(A, d, lam):
    B = d[:, None] * A * d[None, :]
    return B + lam * np.eye(d.size)


def inverse_residual(A, d, lam, B):
    """Relative Frobenius residual ``||(D A D + lam I) B - I||_F / sqrt(M)``."""
    S = _weighted(np.asarray(A, dtype=float), _diag(d), lam)
    M = S.shape[0]
    return float(np.linalg.norm(S @ B - np.eye(M)) / np.sqrt(M))


def _probe(M):
    v = np.random.default_rng(0x0DC).standard_normal(M)
    return v / np.linalg.norm(v)


def probe_residual(A, d, lam, B):
    """O(M^2) residual ``||S (B v) - v|| / ||v||`` for a fixed probe ``v``."""
    d = _diag(d)
    v = _probe(d.size)
    z = B @ v
    Sz = d * (A @ (d * z)) + lam * z
    return float(np.linalg.norm(Sz - v))


@dataclass(frozen=True)
class WeightedInverse:
    matrix: np.ndarray
    residual: float
    fallback: bool


def weighted_inverse(A, A_inv, d, lam, A_inv_sq=None, tol=1e-3):
    """Fast-path weighted inverse with direct fallback.

    The Miller expression is used when its probe residual is at most
    ``tol``; otherwise ``D A D + lam I`` is inverted by Cholesky.  The
    returned ``residual`` is always that of the fast path.
    """
    d = _diag(d)
    fast = miller_inverse(A_inv, d, lam, A_inv_sq)
    res = probe_residual(A, d, lam, fast)
    if np.isfinite(res) and res <= tol:
        return WeightedInverse(fast, res, False)
    return WeightedInverse(spd_inverse(_weighted(np.asarray(A, dtype=float), d, lam)), res, True)
