"""Pre-integration along active-subspace directions for randomized quasi-Monte Carlo."""

from .activesub import Rotation, estimate_C, fd_gradient, gpca_dimred, rotation_from_C
from .errors import (
    ConfigurationError,
    DefinitenessError,
    DegenerateInputError,
    EvaluationError,
    MonotonicityError,
    NumericalError,
    PreintegrateError,
)
from .finance import (
    BasketParams,
    FactorMatrix,
    MarketParams,
    asian_integrands,
    basket_factors,
    basket_integrand,
    geometric_asian_price,
    load_params,
    pca_factor,
    standard_factor,
)
from .gaussmap import GaussianSampler, gauss_hermite, norm_cdf, norm_cdf_upper, norm_inv_cdf, norm_pdf
from .harness import MethodSpec, Problem, ground_truth, rmse_sweep, run_method, timing_run
from .linalg import cholesky_lower, householder_completion, power_leading, sym_eigen
from .lowdisc import PointSet, generate_sobol, is_net, scramble, scrambled_sobol
from .preint import (
    KinkIntegrand,
    PreintegratedIntegrand,
    ThresholdSolve,
    assemble_qmc_integrand,
    preintegrate,
    preintegrate_call,
    preintegrate_linear_kink,
    solve_threshold,
)
from .sensitivity import QuadraticForm, jansen_tau_coordinate, jansen_tau_projection, mean_dimension

__version__ = "0.1.0"
