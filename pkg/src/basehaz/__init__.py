"""Kernel estimation of the Cox baseline hazard with adaptive bandwidth selection.

The pipeline has three stages: fit the regression parameter by an
L1-penalized Cox partial likelihood, smooth the increments of the cumulative
baseline estimator with a kernel, and pick the bandwidth either by the
comparison-based criterion or by cross-validation. A simulation harness
measures both selectors by mean integrated squared error.
"""

from .bandwidth import BandwidthGrid, GLSelection, a_of_h, make_grid, select_cv, select_gl, v_hat
from .baseline import (
    DEFAULT_GRID_POINTS,
    CurveEstimate,
    JumpRepresentation,
    breslow,
    convolve_kernels,
    double_smooth,
    evaluation_grid,
    jump_representation,
    kernel_baseline,
    l2_dist_sq,
)
from .data import (
    ColumnSchema,
    DataError,
    RiskSetIndex,
    SurvivalSample,
    bar_y,
    load_csv,
    risk_weighted_sums,
    s_n,
    write_csv,
)
from .kernels import KernelSpec, biweight, epanechnikov, kernel_by_name, uniform
from .lasso import (
    CoxFit,
    OptimizerOptions,
    ScreeningResult,
    default_gamma_grid,
    fit_lasso,
    kkt_residual,
    partial_loglik,
    partial_loglik_gradient,
    score_screen,
    select_gamma,
)
from .simulate import (
    MiseReport,
    RepResult,
    RunSettings,
    SimDesign,
    SimulatedSample,
    baseline_hazard,
    default_beta0,
    generate,
    ise_stand,
    ise_total,
    mean_lifetime,
    run_experiment,
    run_replication,
)

__version__ = "0.1.0"

__all__ = [
    "BandwidthGrid",
    "ColumnSchema",
    "CoxFit",
    "CurveEstimate",
    "DataError",
    "DEFAULT_GRID_POINTS",
    "GLSelection",
    "JumpRepresentation",
    "KernelSpec",
    "MiseReport",
    "OptimizerOptions",
    "RepResult",
    "RiskSetIndex",
    "RunSettings",
    "ScreeningResult",
    "SimDesign",
    "SimulatedSample",
    "SurvivalSample",
    "a_of_h",
    "bar_y",
    "baseline_hazard",
    "biweight",
    "breslow",
    "convolve_kernels",
    "default_beta0",
    "default_gamma_grid",
    "double_smooth",
    "epanechnikov",
    "evaluation_grid",
    "fit_lasso",
    "generate",
    "ise_stand",
    "ise_total",
    "jump_representation",
    "kernel_baseline",
    "kernel_by_name",
    "kkt_residual",
    "l2_dist_sq",
    "load_csv",
    "make_grid",
    "mean_lifetime",
    "partial_loglik",
    "partial_loglik_gradient",
    "risk_weighted_sums",
    "run_experiment",
    "run_replication",
    "s_n",
    "score_screen",
    "select_cv",
    "select_gamma",
    "select_gl",
    "uniform",
    "v_hat",
    "write_csv",
]
