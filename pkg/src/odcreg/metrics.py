"""Pose-style error measures."""

import numpy as np

from .exceptions import InvalidArgumentError

__all__ = ["angle_error", "euclid_error", "mean_error", "METRICS"]


def _pair(yhat, ystar):
    a = np.asarray(yhat, dtype=float)
    b = np.asarray(ystar, dtype=float)
    if a.shape != b.shape or a.ndim not in (1, 2):
        raise InvalidArgumentError(f"prediction shape {a.shape} does not match target {b.shape}")
    return a, b


def angle_error(yhat, ystar):
    """Mean wrapped absolute angle difference in degrees, each term in [0, 180].

    1-D inputs give a float; 2-D inputs give one value per row.
    """
    a, b = _pair(yhat, ystar)
    d = np.mod(np.abs(a - b), 360.0)
    wrapped = np.minimum(d, 360.0 - d)
    out = wrapped.mean(axis=-1)
    return float(out) if a.ndim == 1 else out


def euclid_error(yhat, ystar, L=None):
    """Mean Euclidean distance over ``L`` equal coordinate blocks (joints).

    ``L`` defaults to one block per three coordinates.
    """
    a, b = _pair(yhat, ystar)
    d_Y = a.shape[-1]
    if L is None:
        L = d_Y // 3 if d_Y % 3 == 0 else 1
    if L < 1 or d_Y % L:
        raise InvalidArgumentError(f"output dimension {d_Y} is not divisible into {L} joints")
    blocks = (a - b).reshape(a.shape[:-1] + (L, d_Y // L))
    out = np.sqrt((blocks**2).sum(axis=-1)).mean(axis=-1)
    return float(out) if a.ndim == 1 else out


METRICS = {"angle_deg": angle_error, "euclidean": euclid_error}


def mean_error(metric, Yhat, Ystar, L=None):
    """Average per-query error for ``metric`` in ``METRICS``."""
    if metric not in METRICS:
        raise InvalidArgumentError(f"unknown metric {metric!r}; choose from {sorted(METRICS)}")
    Yhat = np.atleast_2d(Yhat)
    Ystar = np.atleast_2d(Ystar)
    if metric == "euclidean":
        return float(np.mean(euclid_error(Yhat, Ystar, L)))
    return float(np.mean(angle_error(Yhat, Ystar)))
