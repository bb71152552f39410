"""Generalized parameter-shift rules for trigonometric expectation functions.

The package synthesizes derivative rules of the form
``f'(theta) = sum_p c_p f(theta + shift_p)`` for functions whose frequency
content is a known (or merely bounded) set of beat frequencies, verifies
them against an exact simulated oracle, and benchmarks deterministic and
stochastic estimators under a two-valued shot-noise model.
"""
from .spectrum import (FrequencySet, bandwidth, equispaced, from_eigenvalues,
                       positive_part, shared_bandwidth, shared_spectrum)
from .specfun import (MeasurementModel, SpectralFunction, eval_function,
                      exact_derivative, random_spectral_function,
                      sample_measurement)
from .linsys import (LinearSystem, ShiftRule, apply_rule, assemble,
                     dft_coefficients, feasible, shift_grid, solve_l2, verify)
from .l1opt import lp_solve, solve_l1, solve_tv
from .analytic import (KernelSpec, approx_bandwidth_system, equispaced_rule,
                       eta_coefficient, kernel_lambda, kernel_weights,
                       sine_integral, triangle_truncated_rule, triangle_weight,
                       trigamma, zigzag_cdf, zigzag_density)
from .stochastic import (GradientEstimate, ShotPlan, StochasticRule,
                         allocate_shots, deterministic_estimate,
                         equispaced_stochastic_estimate, from_shift_rule,
                         group_shifts, kernel_estimate, sample_discrete,
                         sample_inverse_cdf, split_signed, stochastic_estimate,
                         triangle_estimate, zigzag_estimate)
from .applications import (JCParams, SharedZModel, chain_rule_baseline,
                           jc_bandwidth, jc_eigenvalues, jc_expectation,
                           jc_function, shared_z_model, xy_function,
                           xy_spectrum)
from .rng import make_rng

__version__ = "0.1.0"
