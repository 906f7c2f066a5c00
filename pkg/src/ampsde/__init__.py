"""Spectral Galerkin toolkit for slow/fast SPDEs with quadratic nonlinearities.

Computes the explicit coefficients of the reduced one-dimensional amplitude
equation, simulates both the full rescaled system and the reduced SDE with
shareable noise streams, and runs the Monte Carlo experiments that verify
the reduction (averaging scaling, quadratic-variation matching, coupled and
weak error decay, noise-induced stabilization).
"""

from .version import __version__
from .core import (
    ModelSpec,
    SpectralField,
    EffectiveCovariance,
    ValidationReport,
    validate_spec,
    sobolev_norm,
    project_slow,
    project_fast,
    effective_covariance,
)
from .tensor import (
    BilinearTensor,
    TensorReport,
    burgers_tensor,
    apply,
    validate_tensor,
    rescale_basis,
    tensor_to_text,
    tensor_from_text,
)
from .coefficients import (
    AmplitudeCoefficients,
    StratonovichCoefficients,
    NoiseInteraction,
    compute_coefficients,
    noise_interaction,
    to_stratonovich,
    from_stratonovich,
    lyapunov_exponent,
    burgers_white_noise_additive_series,
    coefficient_report,
    coefficients_from_report,
)
from .noise import (
    NoiseStream,
    OUState,
    ou_stationary_sample,
    ou_step,
    integrated_ou_moment_oracle,
    averaging_statistics,
)
from .amplitude import (
    AmplitudeState,
    AmplitudePath,
    CouplingLayout,
    amplitude_step,
    simulate_amplitude,
    simulate_amplitude_stratonovich,
)
from .solver import (
    SpdeState,
    PathRecord,
    spde_step,
    simulate_full,
    reconstruct_ansatz,
)
from .report import ExperimentReport, rate_regression
