"""Machine-kind dispatch and the nearest-neighbour / full-data baselines."""

import numpy as np

from ..exceptions import InvalidArgumentError
from .gpr import gpr_predict, train_gpr
from .kernels import HyperParams
from .rulsif import RulsifConfig, rulsif_theta
from .tgp import WEIGHT_FLOOR, WeightedTgp, tgp_predict, train_iwtgp, train_tgp

__all__ = [
    "MACHINE_KINDS",
    "train_machine",
    "machine_predict",
    "nearest_indices",
    "nn_local_predict",
    "full_predict",
]

MACHINE_KINDS = ("GPR", "TGP", "IWTGP")

_TRAINERS = {"GPR": train_gpr, "TGP": train_tgp, "IWTGP": train_iwtgp}


def _kind(kind):
    k = str(kind).upper()
    if k not in _TRAINERS:
        raise InvalidArgumentError(f"unknown machine kind {kind!r}; choose from {MACHINE_KINDS}")
    return k


def train_machine(kind, X_D, Y_D, hyper=None, indices=None):
    return _TRAINERS[_kind(kind)](X_D, Y_D, hyper or HyperParams(), indices=indices)


def machine_predict(machine, x, weights=None):
    """Point prediction of any machine: the GPR mean or the TGP minimiser.

    ``weights`` is either a weight vector or a prepared ``WeightedTgp`` and
    only applies to IWTGP machines.
    """
    kind = machine.kind
    if kind == "GPR":
        return gpr_predict(machine, x, return_var=False)
    if kind == "TGP":
        return tgp_predict(machine, x)
    if not isinstance(weights, WeightedTgp):
        weights = machine.weighted(weights)
    return weights.predict(x)


def nearest_indices(X, x, M):
    """Indices of the ``M`` rows of ``X`` closest to ``x`` (ties by index)."""
    X = np.asarray(X, dtype=float)
    if not 1 <= M <= X.shape[0]:
        raise InvalidArgumentError(f"M={M} must lie in [1, {X.shape[0]}]")
    d = np.einsum("ij,ij->i", X - x, X - x)
    if M < X.shape[0]:
        cand = np.argpartition(d, M - 1)[:M]
        cut = d[cand].max()
        cand = np.flatnonzero(d <= cut)
    else:
        cand = np.arange(X.shape[0])
    order = np.lexsort((cand, d[cand]))
    return cand[order[:M]]


def nn_local_predict(X, Y, x, M, kind="TGP", hyper=None, X_test=None, rulsif=None):
    """Fit a fresh machine on the ``M`` nearest training inputs and predict.

    For IWTGP the importance weights are fitted against ``X_test`` (or the
    query alone when no batch is given).
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    x = np.atleast_1d(np.asarray(x, dtype=float))
    idx = nearest_indices(X, x, M)
    machine = train_machine(kind, X[idx], Y[idx], hyper, indices=idx)
    weights = None
    if machine.kind == "IWTGP":
        batch = x[None, :] if X_test is None else X_test
        cfg = rulsif or RulsifConfig(tau2=machine.hyper.rho_x2)
        _, w = rulsif_theta(X[idx], batch, cfg)
        weights = np.maximum(w, WEIGHT_FLOOR)
    return machine_predict(machine, x, weights)


def full_predict(X, Y, X_query, kind="TGP", hyper=None):
    """Predictions of one machine trained on the whole dataset."""
    machine = train_machine(kind, X, Y, hyper)
    Xq = np.atleast_2d(np.asarray(X_query, dtype=float))
    weights = None
    if machine.kind == "IWTGP":
        weights = machine.weighted(None)
    return np.stack([machine_predict(machine, q, weights) for q in Xq])
