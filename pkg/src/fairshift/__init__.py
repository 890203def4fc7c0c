"""Group-fair training that stays fair under distribution shift.

The package bundles a small hand-rolled MLP with exact gradients, a loss
stack whose robustness term takes the worst case over an L_p ball of weight
perturbations, discrete optimal-transport machinery certifying the
shift/perturbation equivalences the method rests on, a biased-sampling shift
generator, and a seeded experiment harness with a CLI.
"""

from .data import Dataset, SchemaConfig, ToySpec, load_csv, load_dataset, make_toy, save_dataset, split_by_column
from .losses import (
    LossBreakdown,
    PerturbationConfig,
    TrainConfig,
    TrainResult,
    clf_loss,
    default_rho,
    dp_loss,
    dual_norm_epsilon,
    group_mean_gradient,
    rfr_gradient,
    rfr_terms,
    train,
)
from .metrics import BoundReport, FairnessReport, check_bound, evaluate, fairness_metrics, soft_dp
from .network import GradientVector, ModelParams, OptimizerState, adam_step, forward, init_adam, init_params, perturb
from .shiftgen import PCAProjection, ShiftConfig, biased_sample, first_pc
from .transport import (
    DiscreteDistribution,
    PerturbationLaw,
    TransportPlan,
    check_loss_equivalence,
    check_weight_equivalence,
    scalar_inequality_holds,
    perturbation_law,
    solve_ot,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
