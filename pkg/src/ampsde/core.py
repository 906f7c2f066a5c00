"""Model data for the spectral slow/fast toolkit.

A model is a diagonal linear operator with eigenvalues ``lambda_1 = 0 <
lambda_2 <= lambda_3 <= ...`` (the single neutral mode spans the slow
subspace), a diagonal noise spectrum ``q_k`` acting only on the fast modes,
a linear instability parameter ``nu`` and a regularity index ``alpha``.
Everything is expressed in the eigenbasis, so fields are plain coefficient
vectors.  Mode indices are 1-based everywhere in the public API (index 1 is
the slow mode); internally index ``k`` lives at array position ``k - 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ModelSpec",
    "SpectralField",
    "EffectiveCovariance",
    "ValidationReport",
    "validate_spec",
    "sobolev_norm",
    "project_slow",
    "project_fast",
    "effective_covariance",
]


def _readonly(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ModelSpec:
    """Diagonal model data: eigenvalues, noise spectrum, drift and regularity.

    Parameters
    ----------
    eigenvalues : array_like
        ``lambda_k`` for k = 1..N, nondecreasing, ``lambda_1 = 0``.
    noise_amplitudes : array_like
        ``q_k`` for k = 1..N; ``q_1 = 0`` (no direct forcing of the slow mode).
    nu : float
        Linear instability parameter multiplying the rescaled drift.
    alpha : float
        Regularity index of the working norm, in [0, 2).  Defaults to 0
        (plain L2-type norm).
    basis_scales : array_like, optional
        Per-mode normalization constants ``c_k`` when the basis is not
        orthonormal; defaults to all ones.
    """

    eigenvalues: np.ndarray
    noise_amplitudes: np.ndarray
    nu: float
    alpha: float = 0.0
    basis_scales: np.ndarray = None

    def __post_init__(self):
        object.__setattr__(self, "eigenvalues", _readonly(self.eigenvalues))
        object.__setattr__(self, "noise_amplitudes", _readonly(self.noise_amplitudes))
        scales = self.basis_scales
        if scales is None:
            scales = np.ones_like(self.eigenvalues)
        object.__setattr__(self, "basis_scales", _readonly(scales))
        if self.eigenvalues.ndim != 1 or self.eigenvalues.size == 0:
            raise ValueError("eigenvalues must be a nonempty 1-d sequence")
        if self.noise_amplitudes.shape != self.eigenvalues.shape:
            raise ValueError("noise_amplitudes length must match eigenvalues")
        if self.basis_scales.shape != self.eigenvalues.shape:
            raise ValueError("basis_scales length must match eigenvalues")

    @property
    def n_modes(self) -> int:
        """Truncation N (number of retained modes)."""
        return int(self.eigenvalues.size)


@dataclass(frozen=True)
class SpectralField:
    """Coefficient vector of a field in the eigenbasis (1-based mode index)."""

    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _readonly(self.coeffs))
        if self.coeffs.ndim != 1:
            raise ValueError("a spectral field is a 1-d coefficient vector")

    @property
    def n_modes(self) -> int:
        return int(self.coeffs.size)

    @property
    def slow_amplitude(self) -> float:
        """Coefficient of the slow mode, X = <x, e_1>."""
        return float(self.coeffs[0])

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.coeffs - other.coeffs)


@dataclass(frozen=True)
class EffectiveCovariance:
    """Diagonal stationary covariance of the fast modes, entry k = q_k^2/(2 lambda_k)."""

    diag: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "diag", _readonly(self.diag))


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of a model-spec check.

    ``violations`` is empty iff every invariant holds.  ``noise_regularity_sum``
    is the partial sum of q_k^2 lambda_k^(alpha-1) over the fast modes, reported
    so truncation-refinement studies can watch it stay bounded across N.
    """

    violations: list = field(default_factory=list)
    noise_regularity_sum: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_spec(spec: ModelSpec) -> ValidationReport:
    """Check the model invariants; violations are data, not exceptions.

    Checks: lambda_1 = 0 with all later eigenvalues strictly positive and
    nondecreasing, q_1 = 0 with all amplitudes nonnegative, alpha in [0, 2),
    and strictly positive basis scales.
    """
    lam = spec.eigenvalues
    q = spec.noise_amplitudes
    violations = []
    if lam[0] != 0.0:
        violations.append(f"lambda_1 = {lam[0]!r}, expected lambda_1 = 0")
    for k in range(2, spec.n_modes + 1):
        if lam[k - 1] <= 0.0:
            violations.append(f"lambda_{k} = {lam[k - 1]!r} is not strictly positive")
    if np.any(np.diff(lam) < 0.0):
        violations.append("eigenvalues are not nondecreasing")
    if q[0] != 0.0:
        violations.append(f"q_1 = {q[0]!r}, expected q_1 = 0 (no slow-mode forcing)")
    if np.any(q < 0.0):
        violations.append("noise amplitudes must be nonnegative")
    if not (0.0 <= spec.alpha < 2.0):
        violations.append(f"alpha = {spec.alpha!r} outside [0, 2)")
    if np.any(spec.basis_scales <= 0.0):
        violations.append("basis scales must be strictly positive")

    tail = 0.0
    if spec.n_modes > 1 and not violations:
        tail = math.fsum(
            q[k] ** 2 * lam[k] ** (spec.alpha - 1.0) for k in range(1, spec.n_modes)
        )
    return ValidationReport(violations=violations, noise_regularity_sum=tail)


def require_valid(spec: ModelSpec) -> None:
    """Raise ValueError when a spec-valid precondition fails."""
    report = validate_spec(spec)
    if not report.ok:
        raise ValueError("invalid model spec: " + "; ".join(report.violations))


def _check_length(field_: SpectralField, spec: ModelSpec) -> None:
    if field_.n_modes != spec.n_modes:
        raise ValueError(
            f"field has {field_.n_modes} modes but the spec has {spec.n_modes}"
        )


def sobolev_norm(field_: SpectralField, spec: ModelSpec, alpha: float = None) -> float:
    """Weighted norm sqrt(sum_k (1 + lambda_k)^alpha coeffs_k^2).

    ``alpha`` defaults to the spec's regularity index; alpha = 0 reduces to
    the Euclidean norm of the coefficients.
    """
    _check_length(field_, spec)
    if alpha is None:
        alpha = spec.alpha
    w = (1.0 + spec.eigenvalues) ** alpha
    return float(np.sqrt(np.dot(w, field_.coeffs**2)))


def project_slow(field_: SpectralField) -> SpectralField:
    """Projection onto the slow (kernel) mode: zero all coefficients but the first."""
    out = np.zeros_like(field_.coeffs)
    out[0] = field_.coeffs[0]
    return SpectralField(out)


def project_fast(field_: SpectralField) -> SpectralField:
    """Complementary projection: zero the slow coefficient, keep the rest."""
    out = np.array(field_.coeffs)
    out[0] = 0.0
    return SpectralField(out)


def effective_covariance(spec: ModelSpec) -> EffectiveCovariance:
    """Stationary covariance of the fast linear modes, q_k^2/(2 lambda_k) for k >= 2.

    Entry 1 is zero: the slow mode carries no direct noise.  Requires a valid
    spec (lambda_k > 0 for k >= 2 guards the division).
    """
    require_valid(spec)
    diag = np.zeros(spec.n_modes)
    lam = spec.eigenvalues
    q = spec.noise_amplitudes
    diag[1:] = q[1:] ** 2 / (2.0 * lam[1:])
    return EffectiveCovariance(diag)
