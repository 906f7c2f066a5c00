"""Amplitude-equation coefficients from the model data and the bilinear tensor.

After averaging out the fast modes, the slow amplitude a(t) solves the Ito
equation

    da = (nu_tilde a - eta_tilde a^3) dt + sqrt(sigma_b + sigma_a a^2) dB.

The four coefficients are explicit series over the fast indices (all sums
start at 2; the slow eigenvalue 0 never reaches a denominator):

    nu_tilde = nu + sum_k 2 B[k,1,1]^2 q_k^2 / lambda_k^2
                  + sum_{k,l} B[k,1,1] B[l,l,k] q_l^2 / (lambda_k lambda_l)
                  + sum_{k,l} 2 B[k,l,1] B[k,1,l] q_k^2
                              / ((lambda_k + lambda_l) lambda_k)
    eta_tilde = - sum_k 2 B[k,1,1] B[1,1,k] / lambda_k
    sigma_a   = sum_k 4 B[k,1,1]^2 q_k^2 / lambda_k^2
    sigma_b   = sum_{k,m} 2 B[k,m,1]^2 q_k^2 q_m^2
                          / ((lambda_k + lambda_m)^2 lambda_k)

The noise enters the slow mode through the vector gamma and the operator
Gamma,

    gamma_k    = 2 B[k,1,1] q_k / lambda_k
    Gamma[m,k] = 2 q_m B[k,m,1] / (lambda_k + lambda_m)      (k, m >= 2),

whose squared norm and weighted trace reproduce sigma_a and sigma_b; both
routes are kept as a cross-check.  Every series reports the magnitude of its
last retained shell plus a power-law remainder estimate as a tail diagnostic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .core import ModelSpec, EffectiveCovariance, effective_covariance, require_valid
from .tensor import BilinearTensor, require_valid_tensor

__all__ = [
    "AmplitudeCoefficients",
    "StratonovichCoefficients",
    "CoefficientBreakdown",
    "NoiseInteraction",
    "compute_coefficients",
    "noise_interaction",
    "to_stratonovich",
    "from_stratonovich",
    "lyapunov_exponent",
    "burgers_white_noise_additive_series",
    "coefficient_report",
    "coefficients_from_report",
]


def _tail_estimate(shell_prev: float, shell_last: float, n: int) -> float:
    """Remainder estimate for a positive series from its last two boundary shells.

    Fits a local power law to the shell decay and extrapolates the remainder,
    doubled as a safety margin; a non-decaying tail falls back to the crude
    bound shell * n.
    """
    if shell_last == 0.0:
        return 0.0
    if n < 3 or shell_prev <= shell_last:
        return shell_last * n
    p = math.log(shell_prev / shell_last) / math.log(n / (n - 1.0))
    if p <= 1.0:
        return shell_last * n
    return 2.0 * shell_last * n / (p - 1.0)


def _sum_with_tail(terms, n: int):
    """fsum of (max_index, value) terms plus the tail estimate at truncation ``n``.

    The shells are the term groups whose largest index sits on the truncation
    boundary; a series that terminates strictly inside the truncation has
    empty shells and reports a zero tail.
    """
    if not terms:
        return 0.0, 0.0
    total = math.fsum(value for _, value in terms)
    shell_last = math.fsum(abs(v) for idx, v in terms if idx == n)
    shell_prev = math.fsum(abs(v) for idx, v in terms if idx == n - 1)
    return total, _tail_estimate(shell_prev, shell_last, n)


@dataclass(frozen=True)
class CoefficientBreakdown:
    """Per-term diagnostics for the linear drift plus series tail estimates.

    The three drift sums: ``nu_ito_correction`` (equal to sigma_a / 2, the
    Ito-Stratonovich shift), ``nu_diagonal_coupling`` (diagonal fast
    self-interaction fed back through the slow mode) and
    ``nu_pair_coupling`` (off-diagonal pair interactions).  ``tails`` maps
    each coefficient name to its truncation-remainder estimate.
    """

    nu_linear: float
    nu_ito_correction: float
    nu_diagonal_coupling: float
    nu_pair_coupling: float
    tails: dict


@dataclass(frozen=True)
class AmplitudeCoefficients:
    """Ito-form amplitude equation coefficients (nu_tilde, eta_tilde, sigma_a, sigma_b)."""

    nu_tilde: float
    eta_tilde: float
    sigma_a: float
    sigma_b: float
    breakdown: CoefficientBreakdown = None

    def as_dict(self) -> dict:
        out = {
            "nu_tilde": self.nu_tilde,
            "eta_tilde": self.eta_tilde,
            "sigma_a": self.sigma_a,
            "sigma_b": self.sigma_b,
            "nu_strat": to_stratonovich(self).nu_strat,
        }
        if self.breakdown is not None:
            out["nu_linear"] = self.breakdown.nu_linear
            out["nu_ito_correction"] = self.breakdown.nu_ito_correction
            out["nu_diagonal_coupling"] = self.breakdown.nu_diagonal_coupling
            out["nu_pair_coupling"] = self.breakdown.nu_pair_coupling
            for name, value in sorted(self.breakdown.tails.items()):
                out[f"tail_{name}"] = value
        return out


@dataclass(frozen=True)
class StratonovichCoefficients:
    """Same diffusion data with the drift in Stratonovich form."""

    nu_strat: float
    eta_tilde: float
    sigma_a: float
    sigma_b: float
    breakdown: CoefficientBreakdown = None


def compute_coefficients(
    spec: ModelSpec, tensor: BilinearTensor, validate: bool = True
) -> AmplitudeCoefficients:
    """Evaluate the four coefficient series as exact finite sums over the truncation.

    Requires a valid spec and an admissible tensor of matching dimension
    (disable with ``validate=False`` for deliberately broken inputs in tests).
    All four series and the per-term drift breakdown come with tail estimates.
    """
    if validate:
        require_valid(spec)
        require_valid_tensor(tensor)
    if tensor.n_modes != spec.n_modes:
        raise ValueError("tensor and spec dimensions differ")
    n = spec.n_modes
    lam = spec.eigenvalues
    q = spec.noise_amplitudes

    def b(k, l, m):
        return tensor.entry(k, l, m)

    # Slices touched by the series; the fast-index sums all start at 2.
    b_k11 = {k: b(k, 1, 1) for k in range(2, n + 1) if b(k, 1, 1) != 0.0}

    ito_terms = [
        (k, 2.0 * v * v * q[k - 1] ** 2 / lam[k - 1] ** 2) for k, v in b_k11.items()
    ]
    sigma_a_terms = [(k, 2.0 * t) for k, t in ito_terms]

    eta_terms = [
        (k, -2.0 * v * b(1, 1, k) / lam[k - 1])
        for k, v in b_k11.items()
        if b(1, 1, k) != 0.0
    ]

    # Diagonal coupling: needs B[l,l,k] entries; scan the stored diagonal.
    diag_terms = []
    for (k1, l1, m1), value in tensor.items():
        if k1 == l1 and k1 >= 2 and m1 >= 2 and m1 in b_k11:
            l, k = k1, m1
            diag_terms.append(
                (max(k, l), b_k11[k] * value * q[l - 1] ** 2 / (lam[k - 1] * lam[l - 1]))
            )

    # Pair coupling and the additive-noise series both run over the stored
    # entries with output index 1 (those are the B[k,l,1] with k,l >= 2).
    pair_terms = []
    sigma_b_terms = []
    for (k1, l1, m1), value in tensor.items():
        if m1 != 1 or k1 < 2:
            continue
        for k, l in {(k1, l1), (l1, k1)}:
            if q[k - 1] != 0.0:
                blk = b(k, 1, l)
                if blk != 0.0:
                    pair_terms.append(
                        (
                            max(k, l),
                            2.0
                            * value
                            * blk
                            * q[k - 1] ** 2
                            / ((lam[k - 1] + lam[l - 1]) * lam[k - 1]),
                        )
                    )
            if q[k - 1] != 0.0 and q[l - 1] != 0.0:
                sigma_b_terms.append(
                    (
                        max(k, l),
                        2.0
                        * value**2
                        * q[k - 1] ** 2
                        * q[l - 1] ** 2
                        / ((lam[k - 1] + lam[l - 1]) ** 2 * lam[k - 1]),
                    )
                )

    ito_sum, ito_tail = _sum_with_tail(ito_terms, n)
    diag_sum, diag_tail = _sum_with_tail(diag_terms, n)
    pair_sum, pair_tail = _sum_with_tail(pair_terms, n)
    eta, eta_tail = _sum_with_tail(eta_terms, n)
    sigma_a, sigma_a_tail = _sum_with_tail(sigma_a_terms, n)
    sigma_b, sigma_b_tail = _sum_with_tail(sigma_b_terms, n)

    breakdown = CoefficientBreakdown(
        nu_linear=float(spec.nu),
        nu_ito_correction=ito_sum,
        nu_diagonal_coupling=diag_sum,
        nu_pair_coupling=pair_sum,
        tails={
            "nu_tilde": ito_tail + diag_tail + pair_tail,
            "eta_tilde": eta_tail,
            "sigma_a": sigma_a_tail,
            "sigma_b": sigma_b_tail,
        },
    )
    return AmplitudeCoefficients(
        nu_tilde=float(spec.nu) + ito_sum + diag_sum + pair_sum,
        eta_tilde=eta,
        sigma_a=sigma_a,
        sigma_b=sigma_b,
        breakdown=breakdown,
    )


class NoiseInteraction:
    """Slow-mode noise couplings: the vector gamma and the sparse operator Gamma.

    ``gamma[k-1] = 2 B[k,1,1] q_k / lambda_k`` carries the multiplicative
    channel (norm squared equals sigma_a); ``coupling[(m, k)] =
    2 q_m B[k,m,1] / (lambda_k + lambda_m)`` carries the additive channel,
    whose trace against the effective covariance equals sigma_b.
    """

    def __init__(self, gamma: np.ndarray, coupling: dict, n_modes: int):
        gamma = np.asarray(gamma, dtype=float)
        gamma.setflags(write=False)
        self.gamma = gamma
        self.coupling = dict(sorted(coupling.items()))
        self.n_modes = int(n_modes)
        self._matrix = None

    def gamma_norm_sq(self) -> float:
        return math.fsum(g * g for g in self.gamma)

    def trace_covariance(self, qhat: EffectiveCovariance) -> float:
        """tr(Gamma Qhat Gamma*): independent route to the additive variance."""
        return math.fsum(
            value * value * qhat.diag[k - 1] for (m, k), value in self.coupling.items()
        )

    def matrix(self) -> sp.csr_matrix:
        """Gamma as a CSR matrix (0-based), for batched products Gamma @ z."""
        if self._matrix is None:
            if self.coupling:
                rows = np.array([m - 1 for (m, _k) in self.coupling], dtype=np.intp)
                cols = np.array([k - 1 for (_m, k) in self.coupling], dtype=np.intp)
                vals = np.array(list(self.coupling.values()), dtype=float)
            else:
                rows = cols = np.zeros(0, dtype=np.intp)
                vals = np.zeros(0)
            self._matrix = sp.csr_matrix(
                (vals, (rows, cols)), shape=(self.n_modes, self.n_modes)
            )
        return self._matrix

    def qv_rate(self, x, z: np.ndarray) -> np.ndarray:
        """||gamma x + Gamma z||^2 for scalar/vector x and (N,)/(N, batch) z."""
        vec = self.gamma[:, None] * np.atleast_1d(x)[None, :] + self.matrix().dot(
            z if z.ndim == 2 else z[:, None]
        )
        return np.einsum("ij,ij->j", vec, vec)


def noise_interaction(
    spec: ModelSpec, tensor: BilinearTensor, validate: bool = True
) -> NoiseInteraction:
    """Assemble gamma and Gamma for a valid (spec, tensor) pair."""
    if validate:
        require_valid(spec)
        require_valid_tensor(tensor)
    if tensor.n_modes != spec.n_modes:
        raise ValueError("tensor and spec dimensions differ")
    n = spec.n_modes
    lam = spec.eigenvalues
    q = spec.noise_amplitudes
    gamma = np.zeros(n)
    for k in range(2, n + 1):
        if q[k - 1] != 0.0:
            gamma[k - 1] = 2.0 * tensor.entry(k, 1, 1) * q[k - 1] / lam[k - 1]
    coupling = {}
    for (k1, l1, m1), value in tensor.items():
        if m1 != 1 or k1 < 2:
            continue
        for k, m in {(k1, l1), (l1, k1)}:
            if q[m - 1] != 0.0:
                coupling[(m, k)] = (
                    2.0 * q[m - 1] * value / (lam[k - 1] + lam[m - 1])
                )
    return NoiseInteraction(gamma, coupling, n)


def to_stratonovich(coeffs: AmplitudeCoefficients) -> StratonovichCoefficients:
    """Drift shift to Stratonovich form: nu_strat = nu_tilde - sigma_a / 2.

    The diffusion g(a) = sqrt(sigma_b + sigma_a a^2) has Ito correction
    g g' / 2 = sigma_a a / 2, a purely linear drift contribution.
    """
    return StratonovichCoefficients(
        nu_strat=coeffs.nu_tilde - coeffs.sigma_a / 2.0,
        eta_tilde=coeffs.eta_tilde,
        sigma_a=coeffs.sigma_a,
        sigma_b=coeffs.sigma_b,
        breakdown=coeffs.breakdown,
    )


def from_stratonovich(strat: StratonovichCoefficients) -> AmplitudeCoefficients:
    """Inverse drift shift; round trip with :func:`to_stratonovich` is the identity."""
    return AmplitudeCoefficients(
        nu_tilde=strat.nu_strat + strat.sigma_a / 2.0,
        eta_tilde=strat.eta_tilde,
        sigma_a=strat.sigma_a,
        sigma_b=strat.sigma_b,
        breakdown=strat.breakdown,
    )


def lyapunov_exponent(coeffs: AmplitudeCoefficients) -> float:
    """Almost-sure exponent of the linearization at 0 for purely multiplicative noise.

    Only defined when sigma_b = 0 (otherwise 0 is not a fixed point); equals
    nu_tilde - sigma_a / 2, the Stratonovich drift.
    """
    if coeffs.sigma_b != 0.0:
        raise ValueError("exponent formula needs sigma_b = 0")
    return coeffs.nu_tilde - coeffs.sigma_a / 2.0


def burgers_white_noise_additive_series(sigma: float, n_modes: int):
    """Additive-noise variance for the white-forced Burgers model, c_b sigma^4.

    Closed series in the unnormalized (plain sine) convention:

        sigma_b = sigma^4 / (2 pi^2) * sum_{k >= 2}
                  1 / ((lambda_k + lambda_{k+1}) (k^2 - 1) (k^2 + 2k))

    with lambda_k + lambda_{k+1} = 2k^2 + 2k - 1.  Evaluated as a finite sum
    over neighbor pairs inside the truncation; returns (value, tail estimate).
    The tail estimate is a geometric-domination bound on the k^-8 remainder.
    """
    if n_modes < 3:
        return 0.0, 0.0
    terms = []
    for k in range(2, n_modes):  # pair (k, k+1) must fit inside the truncation
        terms.append(
            (k + 1, 1.0 / ((2.0 * k * k + 2.0 * k - 1.0) * (k * k - 1.0) * (k * k + 2.0 * k)))
        )
    total, tail = _sum_with_tail(terms, n_modes)
    scale = sigma**4 / (2.0 * math.pi**2)
    return scale * total, scale * tail


def coefficient_report(spec: ModelSpec, tensor: BilinearTensor) -> dict:
    """Flat key/value coefficient document (series values plus operator cross-checks)."""
    coeffs = compute_coefficients(spec, tensor)
    ni = noise_interaction(spec, tensor)
    out = coeffs.as_dict()
    out["gamma_norm_sq"] = ni.gamma_norm_sq()
    out["coupling_trace"] = ni.trace_covariance(effective_covariance(spec))
    return out


def coefficients_from_report(document: dict) -> AmplitudeCoefficients:
    """Rebuild coefficients from a flat key/value report document.

    Accepts any mapping carrying nu_tilde, eta_tilde, sigma_a and sigma_b
    (the format written by the CLI's coefficient report), so amplitude
    simulations can run from a saved report without the model data.
    """
    try:
        return AmplitudeCoefficients(
            nu_tilde=float(document["nu_tilde"]),
            eta_tilde=float(document["eta_tilde"]),
            sigma_a=float(document["sigma_a"]),
            sigma_b=float(document["sigma_b"]),
        )
    except KeyError as missing:
        raise ValueError(f"coefficient report is missing {missing}") from None
