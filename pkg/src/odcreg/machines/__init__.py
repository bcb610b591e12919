"""Local kernel machines for structured regression on one subdomain."""

from .gpr import GprMachine, gpr_predict, train_gpr
from .kernels import PRESETS, HyperParams, cross_kernel, kernel_matrix, preset, se_kernel, spd_inverse
from .linalg import WeightedInverse, inverse_residual, miller_inverse, probe_residual, weighted_inverse
from .local import (
    MACHINE_KINDS,
    full_predict,
    machine_predict,
    nearest_indices,
    nn_local_predict,
    train_machine,
)
from .optimize import MinimizeResult, minimize_lbfgs
from .rulsif import RulsifConfig, rulsif_select, rulsif_theta, rulsif_weights
from .tgp import (
    WEIGHT_FLOOR,
    IwtgpMachine,
    TgpMachine,
    TgpPrediction,
    WeightedTgp,
    iwtgp_predict,
    tgp_eta,
    tgp_objective,
    tgp_predict,
    train_iwtgp,
    train_tgp,
)

__all__ = [
    "GprMachine", "gpr_predict", "train_gpr",
    "PRESETS", "HyperParams", "cross_kernel", "kernel_matrix", "preset", "se_kernel", "spd_inverse",
    "WeightedInverse", "inverse_residual", "miller_inverse", "probe_residual", "weighted_inverse",
    "MACHINE_KINDS", "full_predict", "machine_predict", "nearest_indices", "nn_local_predict",
    "train_machine",
    "MinimizeResult", "minimize_lbfgs",
    "RulsifConfig", "rulsif_select", "rulsif_theta", "rulsif_weights",
    "WEIGHT_FLOOR", "IwtgpMachine", "TgpMachine", "TgpPrediction", "WeightedTgp",
    "iwtgp_predict", "tgp_eta", "tgp_objective", "tgp_predict", "train_iwtgp", "train_tgp",
]
