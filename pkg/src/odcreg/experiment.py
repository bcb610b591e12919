"""Parameter sweeps and the speedup benchmark behind the command line."""

import csv
import io as _io
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .exceptions import InvalidArgumentError, InvalidConfigError, OdcError
from .io import load_dataset, synth_dataset, train_test_split
from .machines import HyperParams, nn_local_predict, preset, train_machine
from .machines.local import machine_predict
from .metrics import METRICS, mean_error
from .odc import CLUSTERING_KINDS, MACHINE_KINDS, OdcConfig
from .predict import fit_odc, predict_batch

__all__ = [
    "ExperimentConfig",
    "Report",
    "REPORT_COLUMNS",
    "BENCH_COLUMNS",
    "load_data",
    "resolve_hyper",
    "run_experiment",
    "speedup_bench",
    "loglog_slope",
]

REPORT_COLUMNS = (
    "mode", "machine", "clustering", "M", "p", "t", "Kprime", "K",
    "error", "t_c", "t_p", "predict_time", "skip_reason",
)
BENCH_COLUMNS = ("M", "K", "odc_per_query", "nn_per_query", "ratio", "n_odc", "n_nn")
MODES = ("odc", "nn", "full")


@dataclass
class ExperimentConfig:
    """Everything a sweep or benchmark needs.

    Data comes from ``features``/``outputs`` CSV files or, when ``synth`` is
    set (``"manifold"`` or ``"blobs"``), from the synthetic generator.  The
    test split is ``test_features``/``test_outputs`` if given, otherwise a
    random ``test_size`` share of the data.
    """

    features: str = None
    outputs: str = None
    test_features: str = None
    test_outputs: str = None
    synth: str = None
    N: int = 2000
    d_X: int = 10
    d_Y: int = 3
    noise: float = 0.05
    test_size: float = 0.1
    machine_kind: str = "TGP"
    clustering_kind: str = "AB"
    hyper: object = None
    M: list = field(default_factory=lambda: [200])
    p: list = field(default_factory=lambda: [0.0])
    t: list = field(default_factory=lambda: [1.0])
    Kprime: list = field(default_factory=lambda: [1])
    modes: list = field(default_factory=lambda: ["odc"])
    seed: int = 0
    n_jobs: int = 1
    deterministic: bool = False
    report: str = None
    format: str = "csv"
    metric: str = "euclidean"
    joints: int = None
    model: str = None
    bench_queries: int = 200
    warmup: int = 3
    nn_queries: int = None

    def __post_init__(self):
        try:
            self.M = [int(v) for v in _as_list(self.M)]
            self.p = [float(v) for v in _as_list(self.p)]
            self.t = [float(v) for v in _as_list(self.t)]
            self.Kprime = [int(v) for v in _as_list(self.Kprime)]
            self.modes = [str(v).lower() for v in _as_list(self.modes)]
        except (TypeError, ValueError) as exc:
            raise InvalidConfigError(f"bad sweep value: {exc}") from None
        self.machine_kind = str(self.machine_kind).upper()
        self.clustering_kind = str(self.clustering_kind).upper()
        problems = []
        if self.machine_kind not in MACHINE_KINDS:
            problems.append(f"machine_kind must be one of {MACHINE_KINDS}")
        if self.clustering_kind not in CLUSTERING_KINDS:
            problems.append(f"clustering_kind must be one of {CLUSTERING_KINDS}")
        problems += [f"M={v} must be >= 1" for v in self.M if v < 1]
        problems += [f"p={v} must lie in [0, 1)" for v in self.p if not 0 <= v < 1]
        problems += [f"t={v} must be >= 1" for v in self.t if not v >= 1]
        problems += [f"Kprime={v} must be >= 1" for v in self.Kprime if v < 1]
        problems += [f"unknown mode {v!r}" for v in self.modes if v not in MODES]
        if self.metric not in METRICS:
            problems.append(f"metric must be one of {sorted(METRICS)}")
        if self.format not in ("csv", "json"):
            problems.append("format must be 'csv' or 'json'")
        if self.synth is None and not (self.features and self.outputs):
            problems.append("give features and outputs paths, or a synth kind")
        if self.synth is not None and self.synth not in ("manifold", "blobs"):
            problems.append("synth must be 'manifold' or 'blobs'")
        if (self.test_features is None) != (self.test_outputs is None):
            problems.append("test_features and test_outputs go together")
        if self.n_jobs == 0:
            problems.append("n_jobs must be nonzero")
        if problems:
            raise InvalidConfigError("; ".join(problems))
        if self.deterministic:
            self.n_jobs = 1

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise InvalidConfigError(f"unknown config fields: {', '.join(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        try:
            with open(path, encoding="utf-8") as fh:
                d = json.load(fh)
        except OSError as exc:
            raise InvalidConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise InvalidConfigError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(d, dict):
            raise InvalidConfigError("config must be a JSON object")
        return cls.from_dict(d)

    def to_dict(self):
        d = asdict(self)
        if isinstance(self.hyper, HyperParams):
            d["hyper"] = self.hyper.to_dict()
        return d


def _as_list(v):
    if v is None:
        return []
    if isinstance(v, (list, tuple)):
        return list(v)
    return [v]


def resolve_hyper(cfg):
    h = cfg.hyper
    try:
        if h is None:
            return preset("synthetic" if cfg.synth else "poser")
        if isinstance(h, HyperParams):
            return h
        if isinstance(h, str):
            return preset(h)
        if isinstance(h, dict):
            base = h.get("preset")
            rest = {k: v for k, v in h.items() if k != "preset"}
            return (preset(base) if base else HyperParams()).with_(**rest)
    except (InvalidArgumentError, TypeError) as exc:
        raise InvalidConfigError(f"bad hyper: {exc}") from None
    raise InvalidConfigError(f"hyper must be a preset name or an object, got {h!r}")


def load_data(cfg):
    """``(train, test)`` datasets for a config."""
    if cfg.synth:
        ds = synth_dataset(cfg.synth, cfg.N, cfg.d_X, cfg.d_Y, cfg.noise, cfg.seed)
    else:
        ds = load_dataset(cfg.features, cfg.outputs)
    if cfg.test_features:
        test = load_dataset(cfg.test_features, cfg.test_outputs)
        if test.d_X != ds.d_X or test.d_Y != ds.d_Y:
            raise InvalidArgumentError("test files do not match the training dimensions")
        return ds, test
    return train_test_split(ds, cfg.test_size, seed=cfg.seed)


@dataclass
class Report:
    columns: tuple
    rows: list

    def to_csv(self, stream=None):
        out = stream or _io.StringIO()
        w = csv.DictWriter(out, fieldnames=list(self.columns), lineterminator="\n")
        w.writeheader()
        for row in self.rows:
            w.writerow({k: _fmt(row.get(k)) for k in self.columns})
        return out.getvalue() if stream is None else None

    def to_json(self):
        return json.dumps({"columns": list(self.columns), "rows": self.rows}, indent=2)

    def write(self, path, fmt="csv"):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if fmt == "json":
                fh.write(self.to_json() + "\n")
            else:
                self.to_csv(fh)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def _row(mode, cfg, **kw):
    row = dict.fromkeys(REPORT_COLUMNS)
    row.update(mode=mode, machine=cfg.machine_kind, clustering=cfg.clustering_kind)
    row.update(kw)
    return row


def _error(cfg, P, Y):
    return mean_error(cfg.metric, P, Y, cfg.joints)


def _nn_predictions(train, X_test, M, kind, hyper):
    return np.stack([nn_local_predict(train.X, train.Y, x, M, kind, hyper, X_test=X_test)
                     for x in X_test])


def run_experiment(cfg, data=None, progress=None):
    """Run every sweep cell of ``cfg`` and return a :class:`Report`.

    One model is trained per ``(M, p, t)`` and reused across ``Kprime``.
    Cells that cannot be built are kept as rows with ``skip_reason`` set.
    """
    hyper = resolve_hyper(cfg)
    train, test = data if data is not None else load_data(cfg)
    rows = []
    for mode in cfg.modes:
        if mode == "odc":
            rows += _odc_rows(cfg, hyper, train, test, progress)
        elif mode == "nn":
            for M in cfg.M:
                row = _row("nn", cfg, M=M)
                try:
                    t0 = time.perf_counter()
                    P = _nn_predictions(train, test.X, M, cfg.machine_kind, hyper)
                    row.update(predict_time=time.perf_counter() - t0, error=_error(cfg, P, test.Y))
                except (OdcError, np.linalg.LinAlgError) as exc:
                    row.update(skip_reason=str(exc))
                rows.append(row)
                if progress:
                    progress(row)
        else:
            row = _row("full", cfg, M=train.N, K=1)
            try:
                t0 = time.perf_counter()
                machine = train_machine(cfg.machine_kind, train.X, train.Y, hyper)
                row.update(t_p=time.perf_counter() - t0)
                weights = machine.weighted(None) if machine.kind == "IWTGP" else None
                t0 = time.perf_counter()
                P = np.stack([machine_predict(machine, x, weights) for x in test.X])
                row.update(predict_time=time.perf_counter() - t0, error=_error(cfg, P, test.Y))
            except (OdcError, np.linalg.LinAlgError) as exc:
                row.update(skip_reason=str(exc))
            rows.append(row)
            if progress:
                progress(row)
    return Report(REPORT_COLUMNS, rows)


def _odc_rows(cfg, hyper, train, test, progress):
    rows = []
    for M in cfg.M:
        for p in cfg.p:
            for t in cfg.t:
                model, reason = None, None
                try:
                    oc = OdcConfig(M=M, p=p, t=t, Kprime=1, machine_kind=cfg.machine_kind,
                                   clustering_kind=cfg.clustering_kind)
                    model = fit_odc(train.X, train.Y, oc, hyper, seed=cfg.seed, n_jobs=cfg.n_jobs)
                except (OdcError, np.linalg.LinAlgError) as exc:
                    reason = str(exc)
                for Kp in cfg.Kprime:
                    row = _row("odc", cfg, M=M, p=p, t=t, Kprime=Kp)
                    if model is None:
                        row.update(skip_reason=reason)
                    else:
                        row.update(K=model.K, t_c=model.meta["t_c"], t_p=model.meta["t_p"])
                        try:
                            t0 = time.perf_counter()
                            P = predict_batch(model, test.X, Kprime=Kp, n_jobs=cfg.n_jobs)
                            row.update(predict_time=time.perf_counter() - t0,
                                       error=_error(cfg, P, test.Y))
                        except (OdcError, np.linalg.LinAlgError) as exc:
                            row.update(skip_reason=str(exc))
                    rows.append(row)
                    if progress:
                        progress(row)
    return rows


def loglog_slope(xs, ys):
    """Least-squares slope of ``log y`` against ``log x``."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 2 or np.any(xs <= 0) or np.any(ys <= 0):
        return math.nan
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def speedup_bench(cfg, data=None, progress=None):
    """Per-query prediction time of ODC versus the NN scheme for each ``M``.

    ODC uses the first ``p``/``t`` of the config with precomputed machines;
    the NN scheme fits a fresh machine per query.  The first ``warmup``
    queries of each path are run but not timed.  ``nn_queries`` caps the
    number of timed NN queries (default: all ``bench_queries``).

    Returns ``(Report, slopes)`` where ``slopes`` has the log-log cost
    slopes of both schemes over ``M``.
    """
    hyper = resolve_hyper(cfg)
    train, test = data if data is not None else load_data(cfg)
    queries = test.X[: cfg.bench_queries]
    if queries.shape[0] == 0:
        raise InvalidConfigError("benchmark needs at least one test query")
    n_nn = min(cfg.nn_queries or queries.shape[0], queries.shape[0])
    warm = min(cfg.warmup, queries.shape[0])
    rows = []
    for M in cfg.M:
        row = dict.fromkeys(BENCH_COLUMNS)
        row["M"] = M
        oc = OdcConfig(M=M, p=cfg.p[0] if cfg.p else 0.0, t=cfg.t[0] if cfg.t else 1.0,
                       machine_kind=cfg.machine_kind, clustering_kind=cfg.clustering_kind)
        model = fit_odc(train.X, train.Y, oc, hyper, seed=cfg.seed)
        row["K"] = model.K
        predict_batch(model, queries[:warm])
        t0 = time.perf_counter()
        predict_batch(model, queries)
        row["odc_per_query"] = (time.perf_counter() - t0) / queries.shape[0]
        for x in queries[:warm]:
            nn_local_predict(train.X, train.Y, x, M, cfg.machine_kind, hyper, X_test=queries)
        t0 = time.perf_counter()
        for x in queries[:n_nn]:
            nn_local_predict(train.X, train.Y, x, M, cfg.machine_kind, hyper, X_test=queries)
        row["nn_per_query"] = (time.perf_counter() - t0) / n_nn
        row["ratio"] = row["nn_per_query"] / row["odc_per_query"]
        row["n_odc"], row["n_nn"] = int(queries.shape[0]), int(n_nn)
        rows.append(row)
        if progress:
            progress(row)
    Ms = [r["M"] for r in rows]
    slopes = {
        "odc": loglog_slope(Ms, [r["odc_per_query"] for r in rows]),
        "nn": loglog_slope(Ms, [r["nn_per_query"] for r in rows]),
    }
    return Report(BENCH_COLUMNS, rows), slopes

