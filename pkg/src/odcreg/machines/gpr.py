"""Gaussian process regression with test-independent precomputation."""

from dataclasses import dataclass

import numpy as np

from ..exceptions import InvalidArgumentError
from .kernels import HyperParams, cross_kernel, kernel_matrix, spd_inverse

__all__ = ["GprMachine", "train_gpr", "gpr_predict", "as_training_pair", "as_query"]


def as_training_pair(X, Y):
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise InvalidArgumentError(f"incompatible training shapes {X.shape} and {Y.shape}")
    if X.shape[0] == 0:
        raise InvalidArgumentError("a machine needs at least one training point")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise InvalidArgumentError("training data must be finite")
    return X, Y


def as_query(x, d_X):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (d_X,):
        raise InvalidArgumentError(f"query has shape {x.shape}, expected ({d_X},)")
    return x


@dataclass(frozen=True)
class GprMachine:
    """Precomputed GPR.  Output dimensions sharing a noise level share one inverse.

    ``inv[noise_slot[j]]`` is ``(K + sigma_j^2 I)^-1`` and ``alpha[:, j]`` is
    that inverse applied to output column ``j``.
    """

    indices: np.ndarray
    X_D: np.ndarray
    inv: np.ndarray
    noise_slot: np.ndarray
    alpha: np.ndarray
    hyper: HyperParams

    kind = "GPR"

    @property
    def M(self):
        return self.X_D.shape[0]

    @property
    def d_Y(self):
        return self.alpha.shape[1]

    def inverse(self, j):
        return self.inv[self.noise_slot[j]]

    def predict(self, x, return_var=False):
        return gpr_predict(self, x, return_var=return_var)


def train_gpr(X_D, Y_D, hyper=None, indices=None):
    hyper = hyper or HyperParams()
    X_D, Y_D = as_training_pair(X_D, Y_D)
    M, d_Y = Y_D.shape
    K = kernel_matrix(X_D, hyper.rho_x2, hyper.squared)
    noise = hyper.noise(d_Y)
    levels, slot = np.unique(noise, return_inverse=True)
    inv = np.stack([spd_inverse(K + s * np.eye(M)) for s in levels])
    alpha = np.empty((M, d_Y))
    for j in range(d_Y):
        alpha[:, j] = inv[slot[j]] @ Y_D[:, j]
    idx = np.arange(M) if indices is None else np.asarray(indices, dtype=np.int64)
    return GprMachine(idx, X_D, inv, slot.astype(np.int64), alpha, hyper)


def gpr_predict(m, x, return_var=True):
    """Posterior mean (and variance, clamped at zero) at one query."""
    x = as_query(x, m.X_D.shape[1])
    k = cross_kernel(x, m.X_D, m.hyper.rho_x2, m.hyper.squared)[0]
    mean = k @ m.alpha
    if not return_var:
        return mean
    quad = np.array([k @ m.inv[s] @ k for s in range(m.inv.shape[0])])
    var = np.maximum(1.0 - quad[m.noise_slot], 0.0)
    return mean, var
