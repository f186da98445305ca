"""Energy natural gradient training for PINN and deep Ritz networks."""

from .linalg import EigDecomposition, pinv_solve, project_range, sym_eig
from .network import (
    Architecture,
    Jet,
    ParamVector,
    evaluate_jet,
    init_params,
    load_params,
    pushforward,
    save_params,
)
from .optim import AdamConfig, LineSearchGrid, OptimizerConfig, TrainRecord, train
from .problems import Heat1D, Poisson2D, RitzNonlinear1D, make_problem
from .runner import ExperimentConfig, emit_field_csv, run_experiment, summarize

__all__ = [
    "EigDecomposition", "pinv_solve", "project_range", "sym_eig",
    "Architecture", "ParamVector", "Jet", "init_params", "evaluate_jet",
    "pushforward", "save_params", "load_params",
    "AdamConfig", "LineSearchGrid", "OptimizerConfig", "TrainRecord", "train",
    "Poisson2D", "Heat1D", "RitzNonlinear1D", "make_problem",
    "ExperimentConfig", "run_experiment", "summarize", "emit_field_csv",
]
