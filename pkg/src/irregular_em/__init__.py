"""Euler-Maruyama strong-convergence lab for SDEs with irregular coefficients."""
from .coefficients import (ClassAFn, DiffusionSpec, DriftSpec, GALLERY, HoelderFn, SdeProblem,
                           gallery_problem, truncate_drift, verify_regularity)
from .error_stats import (ErrorEstimate, RateDescriptor, RateFit, fit_rate, gamma_sup_error,
                          strong_error, strong_errors, theoretical_rate)
from .harness import (ConfigError, ExperimentConfig, PRESETS, load_config, preset,
                      run_experiment, selftest)
from .simulate import (class_a_increment_stat, coupled_errors, em_path, modulus_stat,
                       sample_grid)
from .transform import build_transform, martingale_diagnostic, phi, phi_inverse
from .yamada_watanabe import YwParams, yw_phi

__version__ = "0.1.0"
