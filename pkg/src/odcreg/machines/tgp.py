"""Twin Gaussian processes and the importance-weighted variant."""

from dataclasses import dataclass

import numpy as np

from ..exceptions import InvalidArgumentError
from .gpr import as_query, as_training_pair
from .kernels import HyperParams, cross_kernel, kernel_matrix, spd_inverse
from .linalg import weighted_inverse
from .optimize import minimize_lbfgs

__all__ = [
    "TgpMachine",
    "IwtgpMachine",
    "WeightedTgp",
    "TgpPrediction",
    "train_tgp",
    "train_iwtgp",
    "tgp_objective",
    "tgp_eta",
    "tgp_predict",
    "iwtgp_predict",
    "objective_terms",
    "WEIGHT_FLOOR",
]

WEIGHT_FLOOR = 1e-8


def objective_terms(y, Y_D, u, eta, By, denom, squared=False):
    """Value and gradient of ``1 - 2 k(y).u - eta log(1 - k(y).By.k(y))``.

    Returns ``(inf, 0)`` when the log argument is not positive.
    """
    diff = y[None, :] - Y_D
    d2 = np.einsum("ij,ij->i", diff, diff)
    if squared:
        ky = np.exp(-d2 / denom)
    else:
        dist = np.sqrt(d2)
        ky = np.exp(-dist / denom)
    Bk = By @ ky
    s = 1.0 - ky @ Bk
    if not (s > 0) or not np.isfinite(s):
        return np.inf, np.zeros_like(y)
    value = 1.0 - 2.0 * (ky @ u) - eta * np.log(s)
    dfdk = -2.0 * u + (2.0 * eta / s) * Bk
    if squared:
        coef = dfdk * ky * (2.0 / denom)
    else:
        # subgradient 0 where y coincides with a training output
        with np.errstate(divide="ignore", invalid="ignore"):
            coef = np.where(dist > 0, dfdk * ky / (denom * dist), 0.0)
    grad = -(coef @ diff)
    return float(value), grad


@dataclass(frozen=True)
class TgpPrediction:
    y: np.ndarray
    value: float
    nit: int
    converged: bool
    degenerate: bool


def _run(terms_of, init, max_iter, gtol):
    res = minimize_lbfgs(terms_of, init, max_iter=max_iter, gtol=gtol)
    return TgpPrediction(res.x, res.fun, res.nit, res.converged, res.degenerate)


class _TgpCore:
    """Shared query logic given effective input/output inverses."""

    def _setup(self, x, Bx):
        x = as_query(x, self.X_D.shape[1])
        kx = cross_kernel(x, self.X_D, self.hyper.rho_x2, self.hyper.squared)[0]
        u = Bx @ kx
        eta_raw = 1.0 - kx @ u
        return kx, u, eta_raw

    def _init(self, kx, init):
        if init is None:
            return self.Y_D[int(np.argmax(kx))].copy()
        init = np.atleast_1d(np.asarray(init, dtype=float))
        if init.shape != (self.Y_D.shape[1],) or not np.all(np.isfinite(init)):
            raise InvalidArgumentError("init must be a finite vector of output dimension")
        return init

    def _solve(self, x, Bx, By, init, max_iter, gtol, full_output):
        kx, u, eta = self._setup(x, Bx)
        eta = max(eta, 0.0)
        y0 = self._init(kx, init)
        hp = self.hyper

        def fun(y):
            return objective_terms(y, self.Y_D, u, eta, By, hp.rho_y2, hp.squared)

        out = _run(fun, y0, max_iter, gtol)
        return out if full_output else out.y


@dataclass(frozen=True)
class TgpMachine(_TgpCore):
    indices: np.ndarray
    X_D: np.ndarray
    Y_D: np.ndarray
    Kx_inv: np.ndarray
    Ky_inv: np.ndarray
    hyper: HyperParams

    kind = "TGP"

    @property
    def M(self):
        return self.X_D.shape[0]

    def predict(self, x, init=None, max_iter=100, gtol=1e-6, full_output=False):
        return tgp_predict(self, x, init, max_iter, gtol, full_output)


def train_tgp(X_D, Y_D, hyper=None, indices=None):
    hyper = hyper or HyperParams()
    X_D, Y_D = as_training_pair(X_D, Y_D)
    M = X_D.shape[0]
    Kx = kernel_matrix(X_D, hyper.rho_x2, hyper.squared)
    Ky = kernel_matrix(Y_D, hyper.rho_y2, hyper.squared)
    Kx_inv = spd_inverse(Kx + hyper.lambda_x * np.eye(M))
    Ky_inv = spd_inverse(Ky + hyper.lambda_y * np.eye(M))
    idx = np.arange(M) if indices is None else np.asarray(indices, dtype=np.int64)
    return TgpMachine(idx, X_D, Y_D, Kx_inv, Ky_inv, hyper)


def tgp_eta(m, x):
    """``1 - k(x).(K_X + lambda_X I)^-1 k(x)`` before any clamping."""
    return float(m._setup(x, m.Kx_inv)[2])


def tgp_objective(m, x, y):
    """Objective value and gradient at a candidate output ``y``."""
    _, u, eta = m._setup(x, m.Kx_inv)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return objective_terms(y, m.Y_D, u, max(eta, 0.0), m.Ky_inv, m.hyper.rho_y2, m.hyper.squared)


def tgp_predict(m, x, init=None, max_iter=100, gtol=1e-6, full_output=False):
    """Minimise the objective from ``init`` (default: output of the nearest input)."""
    return m._solve(x, m.Kx_inv, m.Ky_inv, init, max_iter, gtol, full_output)


@dataclass(frozen=True)
class IwtgpMachine:
    """Raw kernel matrices and their jittered inverses for the weighted TGP.

    ``Kx_inv_sq``/``Ky_inv_sq`` hold the squared inverses so the fast
    weighted inverse needs no O(M^3) work at test time.  ``Kx_inv_reg`` and
    ``Ky_inv_reg`` are the unweighted regularised inverses, the exact answer
    for unit weights.
    """

    indices: np.ndarray
    X_D: np.ndarray
    Y_D: np.ndarray
    Kx: np.ndarray
    Ky: np.ndarray
    Kx_inv_raw: np.ndarray
    Ky_inv_raw: np.ndarray
    Kx_inv_sq: np.ndarray
    Ky_inv_sq: np.ndarray
    Kx_inv_reg: np.ndarray
    Ky_inv_reg: np.ndarray
    jitter: float
    hyper: HyperParams

    kind = "IWTGP"

    @property
    def M(self):
        return self.X_D.shape[0]

    def weighted(self, W, tol=1e-3):
        return WeightedTgp.build(self, W, tol)

    def predict(self, x, W=None, init=None, max_iter=100, gtol=1e-6, full_output=False):
        return iwtgp_predict(self, W, x, init, max_iter, gtol, full_output)


def train_iwtgp(X_D, Y_D, hyper=None, indices=None, jitter=None):
    hyper = hyper or HyperParams()
    X_D, Y_D = as_training_pair(X_D, Y_D)
    M = X_D.shape[0]
    jitter = 1e-8 * M if jitter is None else float(jitter)
    Kx = kernel_matrix(X_D, hyper.rho_x2, hyper.squared)
    Ky = kernel_matrix(Y_D, hyper.rho_y2, hyper.squared)
    Kx_inv = spd_inverse(Kx + jitter * np.eye(M))
    Ky_inv = spd_inverse(Ky + jitter * np.eye(M))
    idx = np.arange(M) if indices is None else np.asarray(indices, dtype=np.int64)
    Kx_reg = spd_inverse(Kx + hyper.lambda_x * np.eye(M))
    Ky_reg = spd_inverse(Ky + hyper.lambda_y * np.eye(M))
    return IwtgpMachine(idx, X_D, Y_D, Kx, Ky, Kx_inv, Ky_inv,
                        Kx_inv @ Kx_inv, Ky_inv @ Ky_inv, Kx_reg, Ky_reg, jitter, hyper)


@dataclass(frozen=True)
class WeightedTgp(_TgpCore):
    """An IWTGP machine specialised to one weight vector (one test batch)."""

    X_D: np.ndarray
    Y_D: np.ndarray
    Bx: np.ndarray
    By: np.ndarray
    hyper: HyperParams
    residual_x: float
    residual_y: float
    fallback_x: bool
    fallback_y: bool

    @classmethod
    def build(cls, m, W, tol=1e-3):
        if W is None:
            W = np.ones(m.M)
        W = np.maximum(np.asarray(W, dtype=float).ravel(), WEIGHT_FLOOR)
        if W.shape != (m.M,):
            raise InvalidArgumentError(f"weights have shape {W.shape}, expected ({m.M},)")
        hp = m.hyper
        if np.all(W == 1.0):
            return cls(m.X_D, m.Y_D, m.Kx_inv_reg, m.Ky_inv_reg, hp, 0.0, 0.0, False, False)
        d = np.sqrt(W)
        wx = weighted_inverse(m.Kx, m.Kx_inv_raw, d, hp.lambda_x, m.Kx_inv_sq, tol)
        wy = weighted_inverse(m.Ky, m.Ky_inv_raw, d, hp.lambda_y, m.Ky_inv_sq, tol)
        Bx = d[:, None] * wx.matrix * d[None, :]
        By = d[:, None] * wy.matrix * d[None, :]
        return cls(m.X_D, m.Y_D, Bx, By, hp, wx.residual, wy.residual, wx.fallback, wy.fallback)

    def predict(self, x, init=None, max_iter=100, gtol=1e-6, full_output=False):
        return self._solve(x, self.Bx, self.By, init, max_iter, gtol, full_output)


def iwtgp_predict(m, W, x, init=None, max_iter=100, gtol=1e-6, full_output=False, tol=1e-3):
    """Weighted TGP prediction; ``W`` is the per-training-point weight vector."""
    w = m if isinstance(m, WeightedTgp) else WeightedTgp.build(m, W, tol)
    return w.predict(x, init, max_iter, gtol, full_output)
