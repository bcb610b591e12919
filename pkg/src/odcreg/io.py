"""Dataset files and the binary model archive.

Archive layout (all integers little-endian)::

    b"ODCM" | uint32 version | uint64 manifest length | manifest JSON | blocks

The manifest lists every block with its dtype, shape, offset (relative to
the end of the manifest), byte length and SHA-256 digest.
"""

import csv
import hashlib
import json
import math
import struct
from dataclasses import dataclass, fields

import numpy as np

from .exceptions import (
    CorruptModelError,
    FormatError,
    IncompatibleVersionError,
    InvalidArgumentError,
)
from .machines import GprMachine, HyperParams, IwtgpMachine, RulsifConfig, TgpMachine
from .odc import OdcConfig, Subdomain
from .predict import OdcModel

__all__ = [
    "Dataset",
    "read_matrix",
    "load_dataset",
    "save_dataset",
    "train_test_split",
    "ManifoldGenerator",
    "synth_dataset",
    "save_model",
    "load_model",
    "read_manifest",
    "FORMAT_VERSION",
]

MAGIC = b"ODCM"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQ")
_MACHINE_TYPES = {"GPR": GprMachine, "TGP": TgpMachine, "IWTGP": IwtgpMachine}


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    Y: np.ndarray
    feature_names: list = None
    output_names: list = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        Y = np.asarray(self.Y, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if Y.ndim == 1:
            Y = Y[:, None]
        if X.ndim != 2 or Y.ndim != 2:
            raise InvalidArgumentError("X and Y must be matrices")
        if X.shape[0] != Y.shape[0]:
            raise InvalidArgumentError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise InvalidArgumentError("dataset entries must be finite")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def N(self):
        return self.X.shape[0]

    @property
    def d_X(self):
        return self.X.shape[1]

    @property
    def d_Y(self):
        return self.Y.shape[1]

    def subset(self, idx):
        return Dataset(self.X[idx], self.Y[idx], self.feature_names, self.output_names)


def _parse_float(cell):
    try:
        return float(cell)
    except ValueError:
        return None


def read_matrix(path):
    """Read a numeric CSV with an optional header line.

    The first line is a header when none of its cells parse as numbers.
    Returns ``(matrix, names, first_data_line)``.

    Raises
    ------
    FormatError
        On ragged rows, non-numeric or non-finite cells, or an empty file,
        with the offending line and column.
    """
    path = str(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot open file: {exc.strerror}", path) from None
    with fh:
        lines = [(i + 1, row) for i, row in enumerate(csv.reader(fh)) if row and any(c.strip() for c in row)]
    if not lines:
        raise FormatError("file contains no data", path)
    names = None
    first_line, first = lines[0]
    if all(_parse_float(c) is None for c in first):
        names = [c.strip() for c in first]
        lines = lines[1:]
        if not lines:
            raise FormatError("file has a header but no data rows", path, first_line)
    width = len(names) if names is not None else len(lines[0][1])
    out = np.empty((len(lines), width))
    for r, (lineno, row) in enumerate(lines):
        if len(row) != width:
            raise FormatError(f"expected {width} columns, found {len(row)}", path, lineno)
        for c, cell in enumerate(row):
            v = _parse_float(cell)
            if v is None:
                raise FormatError(f"non-numeric cell {cell.strip()!r}", path, lineno, c + 1)
            if not math.isfinite(v):
                raise FormatError(f"non-finite value {cell.strip()!r}", path, lineno, c + 1)
            out[r, c] = v
    return out, names, lines[0][0]


def load_dataset(features_path, outputs_path):
    X, fnames, x0 = read_matrix(features_path)
    Y, onames, y0 = read_matrix(outputs_path)
    if X.shape[0] != Y.shape[0]:
        n = min(X.shape[0], Y.shape[0])
        longer, start = (features_path, x0) if X.shape[0] > Y.shape[0] else (outputs_path, y0)
        raise FormatError(
            f"features have {X.shape[0]} rows but outputs have {Y.shape[0]} rows; "
            f"first unmatched row is line {start + n}",
            longer,
            start + n,
        )
    return Dataset(X, Y, fnames, onames)


def save_dataset(ds, features_path, outputs_path):
    for path, M, names, prefix in (
        (features_path, ds.X, ds.feature_names, "f"),
        (outputs_path, ds.Y, ds.output_names, "y"),
    ):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(names or [f"{prefix}{j}" for j in range(M.shape[1])])
            for row in M:
                w.writerow([repr(float(v)) for v in row])


def train_test_split(ds, test_size, seed=None):
    """Random split; ``test_size`` is a count or a fraction in (0, 1)."""
    n_test = int(round(test_size * ds.N)) if 0 < test_size < 1 else int(test_size)
    if not 0 <= n_test < ds.N:
        raise InvalidArgumentError(f"test size {test_size!r} leaves no training data")
    perm = np.random.default_rng(seed).permutation(ds.N)
    return ds.subset(np.sort(perm[n_test:])), ds.subset(np.sort(perm[:n_test]))


class ManifoldGenerator:
    """A smooth closed-form curve ``s -> x(s)`` in R^d_X with smooth targets ``y(s)``.

    Every coordinate is a sum of three sinusoids of the latent ``s`` in
    ``[0, 1]`` with random frequencies, phases and amplitudes.
    """

    def __init__(self, d_X, d_Y, seed=None, n_terms=3, y_scale=10.0):
        rng = np.random.default_rng(seed)
        self.d_X, self.d_Y = d_X, d_Y
        self._x = self._draw(rng, d_X, n_terms)
        self._y = self._draw(rng, d_Y, n_terms)
        self.y_scale = y_scale

    @staticmethod
    def _draw(rng, d, n):
        amp = rng.uniform(0.5, 1.5, (d, n)) / np.sqrt(n)
        freq = rng.uniform(0.5, 2.0, (d, n))
        phase = rng.uniform(0, 2 * np.pi, (d, n))
        return amp, freq, phase

    @staticmethod
    def _eval(params, s):
        amp, freq, phase = params
        arg = 2 * np.pi * s[:, None, None] * freq[None] + phase[None]
        return (amp[None] * np.sin(arg)).sum(axis=-1)

    def inputs(self, s):
        return self._eval(self._x, np.atleast_1d(np.asarray(s, dtype=float)))

    def targets(self, s):
        return self.y_scale * self._eval(self._y, np.atleast_1d(np.asarray(s, dtype=float)))


def synth_dataset(kind="manifold", N=1000, d_X=10, d_Y=3, noise=0.05, seed=None, n_blobs=5):
    """Deterministic synthetic regression data.

    ``manifold``: inputs on a smooth 1-D curve, targets smooth in the curve
    parameter, both with Gaussian noise of standard deviation ``noise``
    (targets scaled by the target amplitude).  ``blobs``: Gaussian clusters
    whose targets follow a cluster-specific linear map.
    """
    if N < 1:
        raise InvalidArgumentError("N must be at least 1")
    rng = np.random.default_rng(seed)
    if kind == "manifold":
        gen = ManifoldGenerator(d_X, d_Y, seed=rng.integers(2**63))
        s = rng.uniform(0.0, 1.0, N)
        X = gen.inputs(s) + noise * rng.standard_normal((N, d_X))
        Y = gen.targets(s) + noise * gen.y_scale * rng.standard_normal((N, d_Y))
    elif kind == "blobs":
        centers = rng.uniform(-10, 10, (n_blobs, d_X))
        maps = rng.normal(size=(n_blobs, d_X, d_Y))
        offsets = rng.normal(scale=5.0, size=(n_blobs, d_Y))
        label = rng.integers(n_blobs, size=N)
        X = centers[label] + rng.standard_normal((N, d_X))
        Y = np.einsum("nd,nde->ne", X - centers[label], maps[label]) + offsets[label]
        Y += noise * rng.standard_normal((N, d_Y))
    else:
        raise InvalidArgumentError(f"unknown synthetic kind {kind!r}; use 'manifold' or 'blobs'")
    return Dataset(X, Y, [f"x{j}" for j in range(d_X)], [f"y{j}" for j in range(d_Y)])


# --- model archive ---------------------------------------------------------


def _encode(arr):
    arr = np.asarray(arr)
    if arr.dtype.kind in "iub":
        arr = arr.astype("<i8")
    else:
        arr = arr.astype("<f8")
    return np.ascontiguousarray(arr)


def save_model(model, path):
    """Write ``model`` to ``path`` as a versioned archive."""
    blocks = []
    payload = []
    offset = 0

    def add(name, arr):
        nonlocal offset
        a = _encode(arr)
        raw = a.tobytes()
        blocks.append({
            "name": name,
            "dtype": a.dtype.str,
            "shape": list(a.shape),
            "offset": offset,
            "nbytes": len(raw),
            "sha256": hashlib.sha256(raw).hexdigest(),
        })
        payload.append(raw)
        offset += len(raw)

    subs = []
    for k, (sd, m) in enumerate(zip(model.subdomains, model.machines)):
        add(f"sd{k}/indices", sd.indices)
        add(f"sd{k}/core_indices", sd.core_indices)
        add(f"sd{k}/mu", sd.mu)
        add(f"sd{k}/prec", sd.prec)
        scalars = {}
        for f in fields(m):
            v = getattr(m, f.name)
            if isinstance(v, np.ndarray):
                add(f"m{k}/{f.name}", v)
            elif not isinstance(v, HyperParams):
                scalars[f.name] = v
        subs.append({
            "borrowed_from": {str(j): c for j, c in sd.borrowed_from.items()},
            "machine_kind": m.kind,
            "machine_scalars": scalars,
        })
    manifest = {
        "format": "ODCM",
        "version": FORMAT_VERSION,
        "config": model.config.to_dict(),
        "hyper": model.hyper.to_dict(),
        "rulsif": model.rulsif.to_dict(),
        "meta": model.meta,
        "K": model.K,
        "subdomains": subs,
        "blocks": blocks,
    }
    text = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, len(text)))
        fh.write(text)
        for raw in payload:
            fh.write(raw)


def _read_header(fh, path):
    head = fh.read(_HEADER.size)
    if len(head) < _HEADER.size:
        raise CorruptModelError(f"{path}: file too short to be a model archive")
    magic, version, length = _HEADER.unpack(head)
    if magic != MAGIC:
        raise CorruptModelError(f"{path}: not a model archive (bad magic)")
    if version != FORMAT_VERSION:
        raise IncompatibleVersionError(
            f"{path}: archive version {version} is not supported (expected {FORMAT_VERSION})"
        )
    text = fh.read(length)
    if len(text) < length:
        raise CorruptModelError(f"{path}: truncated manifest")
    try:
        manifest = json.loads(text.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptModelError(f"{path}: unreadable manifest ({exc})") from None
    if manifest.get("version") != version:
        raise CorruptModelError(f"{path}: manifest version disagrees with header")
    return manifest


def read_manifest(path):
    """The archive manifest, without reading any matrix block."""
    with open(path, "rb") as fh:
        return _read_header(fh, path)


def load_model(path):
    """Load an archive written by :func:`save_model`.

    Raises
    ------
    CorruptModelError
        Truncation, bad magic, malformed manifest or checksum mismatch.
    IncompatibleVersionError
        Archive written by an unsupported format version.
    """
    with open(path, "rb") as fh:
        manifest = _read_header(fh, path)
        data = fh.read()
    arrays = {}
    try:
        for b in manifest["blocks"]:
            start, n = int(b["offset"]), int(b["nbytes"])
            raw = data[start:start + n]
            if len(raw) != n:
                raise CorruptModelError(f"{path}: block {b['name']} is truncated")
            if hashlib.sha256(raw).hexdigest() != b["sha256"]:
                raise CorruptModelError(f"{path}: checksum mismatch in block {b['name']}")
            arr = np.frombuffer(raw, dtype=np.dtype(b["dtype"])).reshape(b["shape"]).copy()
            arrays[b["name"]] = arr
        hyper = HyperParams.from_dict(manifest["hyper"])
        config = OdcConfig(**manifest["config"])
        subdomains, machines = [], []
        for k, info in enumerate(manifest["subdomains"]):
            subdomains.append(Subdomain(
                arrays[f"sd{k}/indices"],
                arrays[f"sd{k}/core_indices"],
                arrays[f"sd{k}/mu"],
                arrays[f"sd{k}/prec"],
                {int(j): c for j, c in info["borrowed_from"].items()},
            ))
            cls = _MACHINE_TYPES[info["machine_kind"]]
            kwargs = {}
            for f in fields(cls):
                if f.name == "hyper":
                    kwargs[f.name] = hyper
                elif f.name in info["machine_scalars"]:
                    kwargs[f.name] = info["machine_scalars"][f.name]
                else:
                    kwargs[f.name] = arrays[f"m{k}/{f.name}"]
            machines.append(cls(**kwargs))
        return OdcModel(config, subdomains, machines, hyper, manifest["meta"],
                        RulsifConfig(**manifest["rulsif"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptModelError(f"{path}: inconsistent archive contents ({exc!r})") from None
