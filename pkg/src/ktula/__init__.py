"""Tamed unadjusted Langevin sampling and non-convex optimization toolkit.

Potentials with certified growth constants, the taming map and its verified
inequalities, reproducible multi-chain tamed/plain Langevin runners (compiled
kernel with a pure-numpy fallback), the full analytic constants calculator
with step-size and iteration prescriptions, quadrature reference oracles, and
sampling diagnostics.
"""

__version__ = "0.1.0"

from ._kernels import backend_name, have_compiled
from .bounds import (BoundInputs, BoundReport, ConstantInit, GaussianInit,
                     Prescription, TableInit, log_density_gradient_constants,
                     moment_constants, prescribe, second_moment_bound,
                     convergence_constants)
from .diagnostics import (ErrorCurve, RateFit, discrete_kl, empirical_moment,
                          excess_risk, fit_rate, grid_kl_1d, sliced_w2,
                          wasserstein1_1d)
from .errors import (ConfigurationError, DimensionError, DivergenceError,
                     EvalOverflowError, ExtentError, FitError, KtulaError,
                     MomentOrderError, ParameterError, UsageError)
from .potentials import (NeuralNetObjectiveSpec, PotentialModel,
                         RegularityConstants, eval_grad, eval_hessian, eval_u,
                         load_matrix_csv, load_nn_dataset_csv,
                         make_double_well, make_neural_net_objective,
                         make_quadratic, nn_regularity_constants,
                         spectral_norm, synthetic_nn_spec)
from .reference import (ReferenceTarget, gaussian_init_kl, grid_minimize,
                        quadrature_target_1d, reference_chain)
from .sampler import (ChainConfig, SampleBatch, build_model, ktula_step,
                      run_chains, ula_step)
from .sweep import sweep_error_curve
from .taming import (TamingParams, TamingReport, drift_lipschitz_l0,
                     lambda_max, tamed_drift, tamed_drift_batch,
                     tamed_drift_jacobian, verify_taming_properties)
