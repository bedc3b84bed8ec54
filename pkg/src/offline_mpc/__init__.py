"""Offline learning of parameterized MPC schemes from logged transitions.

The toolkit fits a neural value function to transition data by temporal-
difference regression, then fits an MPC scheme's quadratic stage cost (and
optionally its model parameters) by supervised regression so that planning
through the scheme reproduces the data's value structure. Learned schemes
are evaluated closed-loop against analytic and nominal baselines across a
model-mismatch sweep.
"""

__version__ = "0.1.0"

from .core import (
    Dataset,
    DatasetMeta,
    DiscountedReturn,
    NumericalError,
    Transition,
    discounted_return,
    load_dataset,
    save_dataset,
)
from .datagen import BehaviorPolicy, generate
from .envs import (
    CartpolePlant,
    LinearPlant,
    ModelMismatch,
    PendulumPlant,
    make_plant,
    nominal_model,
)
from .eval_harness import (
    EvalReport,
    SweepConfig,
    relative_performance,
    rollout,
    sweep,
)
from .lqr_oracle import DiscountedLqr, finite_horizon_dp, policy_evaluation, solve_riccati
from .mpc import (
    GeneralQuadraticCost,
    LinearModel,
    ParameterizedMpc,
    QuadraticStageCost,
    QuadraticTerminalCost,
    SmoothedNormTerminalCost,
    ZeroTerminalCost,
    load_mpc,
    modified_cost_mpc,
    modified_stage_cost,
    save_mpc,
    verify_value_equivalence,
)
from .offline_learner import LearnConfig, learn, loss_and_grad, residual
from .value_net import (
    MlpValueFunction,
    QuadraticValueFunction,
    TdFitConfig,
    fit_td,
    fit_td_arrays,
)

__all__ = [
    "BehaviorPolicy",
    "CartpolePlant",
    "Dataset",
    "DatasetMeta",
    "DiscountedLqr",
    "DiscountedReturn",
    "EvalReport",
    "GeneralQuadraticCost",
    "LearnConfig",
    "LinearModel",
    "LinearPlant",
    "MlpValueFunction",
    "QuadraticValueFunction",
    "ModelMismatch",
    "NumericalError",
    "ParameterizedMpc",
    "PendulumPlant",
    "QuadraticStageCost",
    "QuadraticTerminalCost",
    "SmoothedNormTerminalCost",
    "SweepConfig",
    "TdFitConfig",
    "Transition",
    "ZeroTerminalCost",
    "discounted_return",
    "finite_horizon_dp",
    "fit_td",
    "fit_td_arrays",
    "generate",
    "learn",
    "load_dataset",
    "load_mpc",
    "loss_and_grad",
    "make_plant",
    "modified_cost_mpc",
    "modified_stage_cost",
    "nominal_model",
    "policy_evaluation",
    "relative_performance",
    "residual",
    "rollout",
    "save_dataset",
    "save_mpc",
    "solve_riccati",
    "sweep",
    "verify_value_equivalence",
]
