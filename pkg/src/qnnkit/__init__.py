"""Wide quantum neural networks at desk scale.

Layered parametric circuits with light-cone-pruned exact simulation,
parameter-shift gradients, neural-tangent-kernel estimation, closed-form
linearized training dynamics, Gaussian-process checks at initialization and
during training, and noisy gradient descent with a variance schedule.
"""

__version__ = "0.1.0"

from .circuits import (
    CircuitSpec,
    Dataset,
    LayerSpec,
    Observable,
    ParamVector,
    append_mean_zero_layer,
    builtin_family,
    layer_qubit_index,
    layer_qubit_unindex,
    validate_circuit,
)
from .lightcone import LightConeIndex, PrunedCircuit, build_lightcones, cardinality_report, prune
from .localsim import ModelValue, Simulator, calibrate_normalization, eval_local, eval_model, sample_model
from .gradients import (
    GradientVector,
    NTKMatrix,
    analytic_ntk_mc,
    empirical_ntk,
    grad_parameter_shift,
    grad_sampled,
    ntk_bounds_check,
)
from .training import TrainConfig, TrainTrace, diagnostics, loss_mse, train_flow, train_gd, train_noisy_gd
from .linearized import (
    GPPosterior,
    LinearizedSolution,
    build_linearized,
    gp_empirical_check,
    gp_posterior,
    lin_solution_continuous,
    lin_solution_discrete,
)

__all__ = [
    "CircuitSpec",
    "Dataset",
    "LayerSpec",
    "Observable",
    "ParamVector",
    "append_mean_zero_layer",
    "builtin_family",
    "layer_qubit_index",
    "layer_qubit_unindex",
    "validate_circuit",
    "LightConeIndex",
    "PrunedCircuit",
    "build_lightcones",
    "cardinality_report",
    "prune",
    "ModelValue",
    "Simulator",
    "calibrate_normalization",
    "eval_local",
    "eval_model",
    "sample_model",
    "GradientVector",
    "NTKMatrix",
    "analytic_ntk_mc",
    "empirical_ntk",
    "grad_parameter_shift",
    "grad_sampled",
    "ntk_bounds_check",
    "TrainConfig",
    "TrainTrace",
    "diagnostics",
    "loss_mse",
    "train_flow",
    "train_gd",
    "train_noisy_gd",
    "GPPosterior",
    "LinearizedSolution",
    "build_linearized",
    "gp_empirical_check",
    "gp_posterior",
    "lin_solution_continuous",
    "lin_solution_discrete",
]
