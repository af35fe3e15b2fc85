"""Null controllability of a heat equation driven through a wave equation.

Modules
-------
spectral    diagonal modal systems, exact integration for piecewise-linear inputs
minimality  Gram matrices and strong-minimality evidence for exponential families
synthesis   smooth null-steering controls from the exponential moment problem
volterra    second-kind convolution equations that recover the upstream control
heatwave    the heat-wave interconnection on [0, pi] and the end-to-end pipeline
cli         configuration files and the ``interconnect`` command
"""
from .heatwave import (FunctionSpec, InterconnectReport, InterconnectSpec,
                       Tolerances, build_heat_system, classify_case, observe,
                       run_pipeline, simulate_wave, sine_coefficients, wave_kernel)
from .minimality import (DirichletCheck, ExponentialFamily, GramRangeError,
                         MinimalityReport, augmented_family, dirichlet_hypothesis,
                         gram_matrix, strong_minimality_constant)
from .spectral import (GridFunction, ModalTrajectory, SpectralSystem, TimeGrid,
                       control_moments, evolve_modal, moment_targets, terminal_norm)
from .synthesis import (MomentProblem, SmoothControl, build_moment_problem,
                        solve_moment_problem, verify_smooth_null)
from .volterra import (CaseClassification, CaseTag, ConvolutionKernel,
                       DistributionalControl, SecondKindProblem, resolvent_series,
                       solve_interconnection, solve_second_kind_direct)

__version__ = "0.1.0"
