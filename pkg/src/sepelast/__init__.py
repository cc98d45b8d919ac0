"""Separable neural fields and energy minimization for 3D linear elastostatics.

The package trains displacement (and optionally stress) fields for small-
deformation elasticity on box-shaped domains, either by minimizing the total
potential energy on a fixed quadrature grid or by driving the momentum-balance
residual to zero on resampled collocation points. Fields are represented
pointwise (one MLP over (x, y, z)) or separably (per-axis networks whose
outputs merge as a low-rank tensor product), and everything is differentiated
with the in-package tape/dual engine on plain numpy arrays.
"""

__version__ = "0.1.0"

from .autodiff import (
    Dual,
    NonFiniteError,
    Tape,
    Var,
    check_gradient,
    forward_derivative,
    grad,
    value_and_grad,
)
from .mechanics import (
    MaterialSpec,
    ScaleSpec,
    lame_constants,
    nondim_forward,
    strain,
    stress,
    von_mises,
)
from .models import (
    MlpSpec,
    NetBundle,
    SeparableSpec,
    init_separable,
    load_checkpoint,
    save_checkpoint,
    spinn_eval_grid,
    spinn_eval_points,
)
from .quadrature import BoxDomain, angle_domain, simpson_weights, tensor_quadrature
from .losses import ConfigurationError, LossBreakdown, total_loss
from .training import (
    RunSettings,
    build_objective,
    read_metrics,
    relative_l2,
    time_to_accuracy,
    train,
    write_metrics,
    write_timing,
)
from .problems import (
    angle_problem,
    beam_problem,
    euler_bernoulli_tip_deflection,
    export_prediction,
    get_problem,
    ingest_reference,
    make_evaluator,
    predict_at,
)
from .reporting import aggregate_across_seeds, report_lines, write_report

__all__ = [
    "Dual",
    "NonFiniteError",
    "Tape",
    "Var",
    "check_gradient",
    "forward_derivative",
    "grad",
    "value_and_grad",
    "MaterialSpec",
    "ScaleSpec",
    "lame_constants",
    "nondim_forward",
    "strain",
    "stress",
    "von_mises",
    "MlpSpec",
    "NetBundle",
    "SeparableSpec",
    "init_separable",
    "load_checkpoint",
    "save_checkpoint",
    "spinn_eval_grid",
    "spinn_eval_points",
    "BoxDomain",
    "angle_domain",
    "simpson_weights",
    "tensor_quadrature",
    "ConfigurationError",
    "LossBreakdown",
    "total_loss",
    "RunSettings",
    "build_objective",
    "read_metrics",
    "relative_l2",
    "time_to_accuracy",
    "train",
    "write_metrics",
    "write_timing",
    "angle_problem",
    "beam_problem",
    "euler_bernoulli_tip_deflection",
    "export_prediction",
    "get_problem",
    "ingest_reference",
    "make_evaluator",
    "predict_at",
    "aggregate_across_seeds",
    "report_lines",
    "write_report",
    "__version__",
]
