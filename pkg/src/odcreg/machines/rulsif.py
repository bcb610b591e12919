"""Relative density-ratio weights by regularised least squares."""

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import solve
from scipy.spatial.distance import pdist

from ..exceptions import InvalidArgumentError
from .kernels import cross_kernel

__all__ = ["RulsifConfig", "rulsif_theta", "rulsif_weights", "rulsif_score", "rulsif_select"]


@dataclass(frozen=True)
class RulsifConfig:
    alpha: float = 0.5
    tau2: float = 5.0
    nu: float = 0.1

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise InvalidArgumentError(f"alpha must lie in [0, 1], got {self.alpha!r}")
        if not (np.isfinite(self.tau2) and self.tau2 > 0):
            raise InvalidArgumentError(f"tau2 must be > 0, got {self.tau2!r}")
        if not (np.isfinite(self.nu) and self.nu > 0):
            raise InvalidArgumentError(f"nu must be > 0, got {self.nu!r}")

    def to_dict(self):
        return {"alpha": self.alpha, "tau2": self.tau2, "nu": self.nu}


def _points(A, name):
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2 or A.shape[0] < 1:
        raise InvalidArgumentError(f"{name} needs at least one row")
    return A


def _system(X_tr, X_te, cfg):
    K_te = cross_kernel(X_te, X_te, cfg.tau2)
    K_tr = cross_kernel(X_tr, X_te, cfg.tau2)
    H = (1.0 - cfg.alpha) / X_te.shape[0] * (K_te.T @ K_te)
    H += cfg.alpha / X_tr.shape[0] * (K_tr.T @ K_tr)
    h = K_te.mean(axis=0)
    return H, h, K_tr


def rulsif_theta(X_tr, X_te, cfg=None, return_system=False):
    """Coefficients over the test centres and clamped weights at training points.

    Returns ``(theta, weights)``, plus ``(H, h)`` when ``return_system``.
    """
    cfg = cfg or RulsifConfig()
    X_tr = _points(X_tr, "X_tr")
    X_te = _points(X_te, "X_te")
    if X_tr.shape[1] != X_te.shape[1]:
        raise InvalidArgumentError("train and test inputs differ in dimension")
    H, h, K_tr = _system(X_tr, X_te, cfg)
    theta = solve(H + cfg.nu * np.eye(H.shape[0]), h, assume_a="pos")
    weights = np.maximum(K_tr @ theta, 0.0)
    if return_system:
        return theta, weights, H, h
    return theta, weights


def rulsif_weights(X_eval, X_te, theta, tau2):
    return np.maximum(cross_kernel(_points(X_eval, "X_eval"), X_te, tau2) @ theta, 0.0)


def rulsif_score(X_tr, X_te, theta, X_centres, cfg):
    """Held-out squared-loss criterion; lower is better."""
    w_te = cross_kernel(X_te, X_centres, cfg.tau2) @ theta
    w_tr = cross_kernel(X_tr, X_centres, cfg.tau2) @ theta
    return float(
        (1.0 - cfg.alpha) / 2.0 * np.mean(w_te**2)
        + cfg.alpha / 2.0 * np.mean(w_tr**2)
        - np.mean(w_te)
    )


def rulsif_select(X_tr, X_te, cfg=None, tau2_grid=None, nu_grid=(1e-3, 1e-2, 1e-1, 1.0),
                  n_folds=5, seed=0):
    """Grid search over ``tau2`` and ``nu`` by k-fold held-out criterion.

    ``alpha`` is kept from ``cfg``.  Returns the best configuration.
    """
    cfg = cfg or RulsifConfig()
    X_tr = _points(X_tr, "X_tr")
    X_te = _points(X_te, "X_te")
    if tau2_grid is None:
        scale = float(np.median(pdist(X_te))) if X_te.shape[0] > 1 else 0.0
        tau2_grid = scale * np.array([0.25, 0.5, 1.0, 2.0, 4.0]) if scale > 0 else [cfg.tau2]
    folds = min(n_folds, X_te.shape[0], X_tr.shape[0])
    if folds < 2:
        return cfg
    rng = np.random.default_rng(seed)
    te_fold = rng.permutation(X_te.shape[0]) % folds
    tr_fold = rng.permutation(X_tr.shape[0]) % folds
    best, best_score = cfg, np.inf
    for tau2 in tau2_grid:
        for nu in nu_grid:
            trial = replace(cfg, tau2=float(tau2), nu=float(nu))
            score = 0.0
            for f in range(folds):
                te_fit, te_out = X_te[te_fold != f], X_te[te_fold == f]
                tr_fit, tr_out = X_tr[tr_fold != f], X_tr[tr_fold == f]
                theta, _ = rulsif_theta(tr_fit, te_fit, trial)
                score += rulsif_score(tr_out, te_out, theta, te_fit, trial)
            if score < best_score:
                best, best_score = trial, score
    return best
