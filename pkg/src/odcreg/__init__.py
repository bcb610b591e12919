"""Scalable local kernel regression on an overlapping domain cover.

Typical use::

    from odcreg import OdcConfig, fit_odc, predict_batch, synth_dataset

    ds = synth_dataset("manifold", N=2000, seed=0)
    model = fit_odc(ds.X, ds.Y, OdcConfig(M=200, p=0.6, machine_kind="TGP"))
    Y_hat = predict_batch(model, ds.X[:10])
"""

from .clustering import EqualClustering, clustering_cost, ekmeans, rpc
from .exceptions import (
    CorruptModelError,
    FormatError,
    IncompatibleVersionError,
    InvalidArgumentError,
    InvalidConfigError,
    OdcError,
    SingularMatrixError,
)
from .io import Dataset, load_dataset, load_model, read_manifest, save_model, synth_dataset
from .machines import PRESETS, HyperParams, RulsifConfig, preset
from .metrics import angle_error, euclid_error
from .odc import OdcConfig, Subdomain, generate_odc, validate_cover
from .predict import OdcModel, fit_odc, odc_predict, predict_batch, rank_subdomains

__version__ = "0.1.0"

__all__ = [
    "EqualClustering", "clustering_cost", "ekmeans", "rpc",
    "CorruptModelError", "FormatError", "IncompatibleVersionError", "InvalidArgumentError",
    "InvalidConfigError", "OdcError", "SingularMatrixError",
    "Dataset", "load_dataset", "load_model", "read_manifest", "save_model", "synth_dataset",
    "PRESETS", "HyperParams", "RulsifConfig", "preset",
    "angle_error", "euclid_error",
    "OdcConfig", "Subdomain", "generate_odc", "validate_cover",
    "OdcModel", "fit_odc", "odc_predict", "predict_batch", "rank_subdomains",
]
