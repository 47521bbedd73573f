"""Hopfield networks as deep equilibrium models.

Continuous Hopfield networks (CHN) and hierarchical associative memories
(HAM) expressed as fixed-point problems, with synchronous and even-odd
update schemes, Picard and Anderson solvers, recurrent backprop training,
and an experiment harness for convergence-speed comparisons.
"""

from .checkpoint import load_checkpoint, save_checkpoint
from .data import Dataset, batches, fetch_mnist, load_idx, load_mnist, one_hot, parse_idx
from .evenodd import (
    EvenOddOperator,
    build_even_odd,
    eo_fused_step_ham,
    eo_init,
    eo_step_chn,
    eo_step_ham,
)
from .experiments import (
    ExperimentConfig,
    MetricsReport,
    SchemeRunner,
    SimReport,
    TrainingDiverged,
    detect_two_cycle,
    evaluate_model,
    run_compare,
    run_eval,
    run_sync_redundancy_sim,
    run_trace,
    run_train,
    train_model,
)
from .network import (
    CHN,
    HAM,
    Architecture,
    ModelParams,
    StateVector,
    chn_deq_map,
    chn_velocity,
    energy_chn,
    energy_ham,
    ham_deq_map,
    ham_velocity,
    input_drive,
)
from .nonlin import Nonlinearity, identity, shifted_sigmoid
from .sigma import ham_sigma_map, sigma, sigma_inverse, verify_sigma_bijective
from .solvers import (
    ANDERSON,
    PICARD,
    BatchSolveResult,
    FixedPointResult,
    SolverConfig,
    anderson_solve,
    picard_solve,
    relative_residual,
    solve_batch,
)
from .training import (
    MadamState,
    ParamGrads,
    TrainConfig,
    deq_vjp,
    lr_schedule,
    madam_init,
    madam_step,
    mse_loss,
    param_vjp,
    recurrent_backprop,
    xavier_init,
)

__version__ = "0.1.0"

__all__ = [
    "ANDERSON",
    "Architecture",
    "BatchSolveResult",
    "CHN",
    "Dataset",
    "EvenOddOperator",
    "ExperimentConfig",
    "FixedPointResult",
    "HAM",
    "MadamState",
    "MetricsReport",
    "ModelParams",
    "Nonlinearity",
    "PICARD",
    "ParamGrads",
    "SchemeRunner",
    "SimReport",
    "SolverConfig",
    "StateVector",
    "TrainConfig",
    "TrainingDiverged",
    "anderson_solve",
    "batches",
    "build_even_odd",
    "chn_deq_map",
    "chn_velocity",
    "deq_vjp",
    "detect_two_cycle",
    "energy_chn",
    "energy_ham",
    "eo_fused_step_ham",
    "eo_init",
    "eo_step_chn",
    "eo_step_ham",
    "evaluate_model",
    "fetch_mnist",
    "ham_deq_map",
    "ham_sigma_map",
    "ham_velocity",
    "identity",
    "input_drive",
    "load_checkpoint",
    "load_idx",
    "load_mnist",
    "lr_schedule",
    "madam_init",
    "madam_step",
    "mse_loss",
    "one_hot",
    "param_vjp",
    "parse_idx",
    "picard_solve",
    "recurrent_backprop",
    "relative_residual",
    "run_compare",
    "run_eval",
    "run_sync_redundancy_sim",
    "run_trace",
    "run_train",
    "save_checkpoint",
    "shifted_sigmoid",
    "sigma",
    "sigma_inverse",
    "solve_batch",
    "train_model",
    "verify_sigma_bijective",
    "xavier_init",
]
