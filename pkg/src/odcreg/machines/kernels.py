"""Exponential kernels and hyperparameter sets.

The kernel is ``exp(-||a - b|| / denom)`` with the plain (unsquared)
Euclidean norm; ``squared=True`` switches to ``exp(-||a - b||^2 / denom)``.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.spatial.distance import cdist

from ..exceptions import InvalidArgumentError, SingularMatrixError

__all__ = [
    "HyperParams",
    "PRESETS",
    "preset",
    "se_kernel",
    "kernel_matrix",
    "cross_kernel",
    "spd_inverse",
]


@dataclass(frozen=True)
class HyperParams:
    """Kernel machine hyperparameters.

    ``rho_x2`` and ``rho_y2`` are the full kernel denominators ``2 rho^2``.
    ``sigma_n2`` is a scalar or one noise variance per output dimension;
    it only matters for GPR.
    """

    rho_x2: float = 5.0
    rho_y2: float = 5000.0
    lambda_x: float = 1e-4
    lambda_y: float = 1e-4
    sigma_n2: object = 1e-4
    squared: bool = False

    def __post_init__(self):
        for name in ("rho_x2", "rho_y2"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise InvalidArgumentError(f"{name} must be finite and > 0, got {v!r}")
        for name in ("lambda_x", "lambda_y"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise InvalidArgumentError(f"{name} must be finite and >= 0, got {v!r}")
        s = np.atleast_1d(np.asarray(self.sigma_n2, dtype=float))
        if s.ndim != 1 or not np.all(np.isfinite(s)) or np.any(s < 0):
            raise InvalidArgumentError("sigma_n2 must be finite and >= 0")
        if s.size == 1:
            object.__setattr__(self, "sigma_n2", float(s[0]))
        else:
            object.__setattr__(self, "sigma_n2", tuple(float(v) for v in s))

    def noise(self, d_Y):
        s = np.atleast_1d(np.asarray(self.sigma_n2, dtype=float))
        if s.size == 1:
            return np.full(d_Y, s[0])
        if s.size != d_Y:
            raise InvalidArgumentError(
                f"sigma_n2 has {s.size} entries but outputs have {d_Y} dimensions"
            )
        return s

    def to_dict(self):
        s = self.sigma_n2
        return {
            "rho_x2": self.rho_x2,
            "rho_y2": self.rho_y2,
            "lambda_x": self.lambda_x,
            "lambda_y": self.lambda_y,
            "sigma_n2": list(s) if isinstance(s, tuple) else s,
            "squared": self.squared,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def with_(self, **changes):
        return replace(self, **changes)


# Values learnt by cross-validation on the pose datasets.  GPR noise is not
# published, so it defaults to the TGP input regulariser.
PRESETS = {
    "poser": HyperParams(5.0, 5000.0, 1e-4, 1e-4, 1e-4),
    "humaneva": HyperParams(5.0, 500000.0, 1e-3, 1e-3, 1e-3),
    "human36m": HyperParams(5.0, 500000.0, 1e-3, 1e-3, 1e-3),
    # matched to the output scale of the bundled synthetic manifold data
    "synthetic": HyperParams(5.0, 5.0, 1e-3, 1e-3, 1e-3),
}


def preset(name):
    try:
        return PRESETS[name.lower()]
    except KeyError:
        raise InvalidArgumentError(
            f"unknown hyperparameter preset {name!r}; choose from {sorted(PRESETS)}"
        ) from None


def _check_denom(denom):
    if not denom > 0:
        raise InvalidArgumentError(f"kernel denominator must be > 0, got {denom!r}")


def se_kernel(a, b, denom, squared=False):
    """Kernel value between two vectors."""
    _check_denom(denom)
    diff = np.atleast_1d(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    d2 = float(diff @ diff)
    return float(np.exp(-(d2 if squared else np.sqrt(d2)) / denom))


def cross_kernel(A, B, denom, squared=False):
    """Kernel matrix between the rows of ``A`` and the rows of ``B``."""
    _check_denom(denom)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    D = cdist(A, B, "sqeuclidean" if squared else "euclidean")
    return np.exp(-D / denom)


def kernel_matrix(P, denom, squared=False):
    """Symmetric kernel matrix of the rows of ``P`` (unit diagonal)."""
    K = cross_kernel(P, P, denom, squared)
    K = 0.5 * (K + K.T)
    np.fill_diagonal(K, 1.0)
    return K


def spd_inverse(A):
    """Inverse of a symmetric positive definite matrix via Cholesky.

    Raises
    ------
    SingularMatrixError
        If the Cholesky factorisation breaks down.
    """
    A = np.asarray(A, dtype=float)
    try:
        factor = cho_factor(A, lower=True, check_finite=True)
    except (LinAlgError, ValueError) as exc:
        raise SingularMatrixError(f"matrix is not positive definite: {exc}") from None
    inv = cho_solve(factor, np.eye(A.shape[0]))
    return 0.5 * (inv + inv.T)
