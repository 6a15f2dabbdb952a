"""Kriging with additive covariance kernels.

Additive kernels K(x, y) = sum_i K_i(x_i, y_i) give Gaussian-process
models whose posterior mean is a sum of univariate submodels, one per
input dimension, at the cost of exact Gram-matrix singularities on
axis-aligned designs.  This package provides the kernels, the fitting
and prediction machinery, per-dimension submodel extraction with proper
centering, singularity diagnostics, maximum-likelihood estimation, and
the benchmark experiments that motivate the additive class in growing
dimension.
"""

__version__ = "0.1.0"

from .design import (
    RNG_ALGORITHM,
    Design,
    DesignKind,
    DoeConfig,
    generate,
    load_design,
    save_design,
)
from .kernels import (
    KernelFamily,
    KernelSpec,
    StructureError,
    cross_cov,
    cross_cov_dim,
    eval_kernel,
    eval_univariate,
    gram_matrix,
)
from .kriging import (
    GpModel,
    NumericalError,
    OrdinaryTrend,
    RankReport,
    SimpleTrend,
    SingularDesignError,
    cholesky_with_jitter,
    detect_rank_deficiency,
    fit,
    load_model,
    predict_mean,
    predict_var,
    save_model,
)
from .likelihood import (
    FitConfig,
    FitError,
    FitResult,
    log_likelihood,
    mle_fit,
    save_trace,
)
from .submodels import (
    SubmodelCurve,
    centered_submodel,
    save_curve,
    submodel_mean,
    submodel_var,
)
from .benchmarks import (
    EffectOverlay,
    ExperimentRecord,
    GFunction,
    derive_seed,
    main_effect_overlay,
    p_criterion,
    q2,
    run_add_vs_sep,
    run_gfun_benchmark,
    run_p_collapse,
    save_records,
    solve_a1,
)
from .estimator import KrigingRegressor

__all__ = [
    "__version__",
    "RNG_ALGORITHM",
    "Design",
    "DesignKind",
    "DoeConfig",
    "generate",
    "load_design",
    "save_design",
    "KernelFamily",
    "KernelSpec",
    "StructureError",
    "cross_cov",
    "cross_cov_dim",
    "eval_kernel",
    "eval_univariate",
    "gram_matrix",
    "GpModel",
    "NumericalError",
    "OrdinaryTrend",
    "RankReport",
    "SimpleTrend",
    "SingularDesignError",
    "cholesky_with_jitter",
    "detect_rank_deficiency",
    "fit",
    "load_model",
    "predict_mean",
    "predict_var",
    "save_model",
    "FitConfig",
    "FitError",
    "FitResult",
    "log_likelihood",
    "mle_fit",
    "save_trace",
    "SubmodelCurve",
    "centered_submodel",
    "save_curve",
    "submodel_mean",
    "submodel_var",
    "EffectOverlay",
    "ExperimentRecord",
    "GFunction",
    "derive_seed",
    "main_effect_overlay",
    "p_criterion",
    "q2",
    "run_add_vs_sep",
    "run_gfun_benchmark",
    "run_p_collapse",
    "save_records",
    "solve_a1",
    "KrigingRegressor",
]
