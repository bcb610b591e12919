"""Training an ODC model and predicting with its closest local machines."""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .clustering import ekmeans, rpc
from .exceptions import InvalidArgumentError, InvalidConfigError
from .machines import HyperParams, RulsifConfig, machine_predict, rulsif_theta, train_machine
from .machines.tgp import WEIGHT_FLOOR
from .odc import OdcConfig, generate_odc

__all__ = [
    "OdcModel",
    "fit_odc",
    "cluster_for",
    "rank_subdomains",
    "combine_predictions",
    "combination_weights",
    "odc_predict",
    "predict_batch",
    "subdomain_weights",
]


@dataclass(frozen=True)
class OdcModel:
    """Cover, per-subdomain machines and the metadata needed to predict.

    ``meta`` holds ``N``, ``d_X``, ``d_Y``, optional column names and the
    training timings ``t_c`` (clustering) and ``t_p`` (cover generation and
    machine precomputation), in seconds.
    """

    config: OdcConfig
    subdomains: list
    machines: list
    hyper: HyperParams
    meta: dict
    rulsif: RulsifConfig = None
    _mus: np.ndarray = field(default=None, repr=False, compare=False)
    _precs: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if len(self.subdomains) != len(self.machines):
            raise InvalidArgumentError("one machine per subdomain is required")
        if not self.subdomains:
            raise InvalidArgumentError("a model needs at least one subdomain")
        object.__setattr__(self, "_mus", np.stack([s.mu for s in self.subdomains]))
        object.__setattr__(self, "_precs", np.stack([s.prec for s in self.subdomains]))
        if self.rulsif is None:
            object.__setattr__(self, "rulsif", RulsifConfig(tau2=self.hyper.rho_x2))

    @property
    def K(self):
        return len(self.subdomains)

    @property
    def d_X(self):
        return self._mus.shape[1]

    @property
    def kind(self):
        return self.config.machine_kind


def cluster_for(X, config, seed=None):
    """Equal-size clustering with the number of clusters the config implies."""
    K = config.n_clusters(X.shape[0])
    if config.clustering_kind == "RPC":
        return rpc(X, K, seed=seed)
    return ekmeans(X, K, variant=config.clustering_kind, seed=seed)


def fit_odc(X, Y, config, hyper=None, seed=None, ridge=None, nn_backend="brute", n_jobs=1,
            clustering=None, rulsif=None, feature_names=None, output_names=None):
    """Build the cover, then precompute one machine per subdomain."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.shape[0] != Y.shape[0]:
        raise InvalidArgumentError(f"{X.shape[0]} inputs but {Y.shape[0]} outputs")
    if config.M > X.shape[0]:
        raise InvalidConfigError(f"M={config.M} exceeds N={X.shape[0]}")
    hyper = hyper or HyperParams()

    t0 = time.perf_counter()
    if clustering is None:
        clustering = cluster_for(X, config, seed)
    t_c = time.perf_counter() - t0

    t0 = time.perf_counter()
    subdomains = generate_odc(X, clustering, config, ridge=ridge, nn_backend=nn_backend)

    def fit(sd):
        return train_machine(config.machine_kind, X[sd.indices], Y[sd.indices], hyper, sd.indices)

    if n_jobs == 1:
        machines = [fit(sd) for sd in subdomains]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs if n_jobs > 0 else None) as pool:
            machines = list(pool.map(fit, subdomains))
    t_p = time.perf_counter() - t0

    meta = {
        "N": int(X.shape[0]),
        "d_X": int(X.shape[1]),
        "d_Y": int(Y.shape[1]),
        "feature_names": list(feature_names) if feature_names is not None else None,
        "output_names": list(output_names) if output_names is not None else None,
        "t_c": t_c,
        "t_p": t_p,
        "seed": None if seed is None else int(seed),
    }
    return OdcModel(config, subdomains, machines, hyper, meta, rulsif)


def _query(model, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (model.d_X,):
        raise InvalidArgumentError(f"query has shape {x.shape}, expected ({model.d_X},)")
    return x


def rank_subdomains(model, x):
    """All subdomains ordered by ``(x - mu)' prec (x - mu)``, ties by index.

    Returns ``(order, distances)`` with ``distances`` sorted ascending.
    """
    x = _query(model, x)
    diff = x[None, :] - model._mus
    q = np.einsum("kd,kde,ke->k", diff, model._precs, diff)
    q = np.maximum(q, 0.0)
    order = np.argsort(q, kind="stable")
    return order, q[order]


def combination_weights(dists):
    """Normalised inverse-distance weights; uniform over exact hits."""
    d = np.asarray(dists, dtype=float)
    zero = d == 0
    if zero.any():
        return zero / zero.sum()
    L = 1.0 / d
    return L / L.sum()


def combine_predictions(preds, dists):
    preds = np.asarray(preds, dtype=float)
    if preds.ndim == 1:
        preds = preds[:, None]
    if preds.shape[0] == 1:
        return preds[0].copy()
    return combination_weights(dists) @ preds


def _kprime(model, Kprime):
    Kp = model.config.Kprime if Kprime is None else int(Kprime)
    if not 1 <= Kp <= model.K:
        raise InvalidConfigError(f"K'={Kp} must lie in [1, K={model.K}]")
    return Kp


def subdomain_weights(model, k, X_test):
    """Clamped importance weights of subdomain ``k``'s points for a test batch."""
    m = model.machines[k]
    _, w = rulsif_theta(m.X_D, X_test, model.rulsif)
    return np.maximum(w, WEIGHT_FLOOR)


class _WeightCache:
    # lazily specialise IWTGP machines to one test batch
    def __init__(self, model, X_test):
        self.model = model
        self.X_test = X_test
        self.done = {}

    def get(self, k):
        if k not in self.done:
            w = subdomain_weights(self.model, k, self.X_test)
            self.done[k] = self.model.machines[k].weighted(w)
        return self.done[k]


def _predict_one(model, x, Kp, cache):
    order, dists = rank_subdomains(model, x)
    top = order[:Kp]
    preds = []
    for k in top:
        weights = cache.get(k) if cache is not None else None
        preds.append(machine_predict(model.machines[k], x, weights))
    return combine_predictions(preds, dists[:Kp])


def odc_predict(model, x, Kprime=None, X_batch=None):
    """Prediction for one query.

    For IWTGP the importance weights are fitted against ``X_batch``, or the
    query alone if no batch is given.
    """
    x = _query(model, x)
    Kp = _kprime(model, Kprime)
    cache = None
    if model.kind == "IWTGP":
        cache = _WeightCache(model, x[None, :] if X_batch is None else np.asarray(X_batch, float))
    return _predict_one(model, x, Kp, cache)


def predict_batch(model, X_test, Kprime=None, n_jobs=1):
    """Predictions for every row of ``X_test``.

    IWTGP weights are fitted once per (subdomain, batch).  ``n_jobs`` other
    than 1 spreads queries over a thread pool; results do not depend on it.
    """
    X_test = np.atleast_2d(np.asarray(X_test, dtype=float))
    if X_test.shape[1] != model.d_X:
        raise InvalidArgumentError(f"test inputs have {X_test.shape[1]} columns, expected {model.d_X}")
    Kp = _kprime(model, Kprime)
    cache = None
    if model.kind == "IWTGP":
        cache = _WeightCache(model, X_test)
        needed = set()
        for x in X_test:
            needed.update(rank_subdomains(model, x)[0][:Kp].tolist())
        for k in sorted(needed):
            cache.get(k)
    if n_jobs == 1:
        out = [_predict_one(model, x, Kp, cache) for x in X_test]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs if n_jobs > 0 else None) as pool:
            out = list(pool.map(lambda x: _predict_one(model, x, Kp, cache), X_test))
    return np.stack(out) if out else np.empty((0, model.meta["d_Y"]))
