"""Fast built-in checks wired to the ``selftest`` subcommand.

One line per check; every check is a distilled version of the library's
hand-derivable identities and exactness guarantees, sized to run in a few
seconds.  The heavier scaling experiments live in the acceptance test suite.
"""

from __future__ import annotations

import math

import numpy as np

from .amplitude import simulate_amplitude
from .coefficients import (
    burgers_white_noise_additive_series,
    compute_coefficients,
    noise_interaction,
    to_stratonovich,
    from_stratonovich,
)
from .core import ModelSpec, SpectralField, effective_covariance, project_fast, project_slow
from .noise import NoiseStream, integrated_ou_moment_oracle, ou_step_weights, stationary_std
from .report import regression_selftest
from .solver import simulate_full, spde_batch
from .tensor import BilinearTensor, burgers_tensor, rescale_basis, validate_tensor

__all__ = ["run_selftest"]


def _burgers_spec(n, sigma, nu=1.0, white=False):
    k = np.arange(1, n + 1)
    q = np.zeros(n)
    if white:
        q[1:] = sigma * math.sqrt(2.0 / math.pi)
    else:
        q[1] = sigma
    return ModelSpec(eigenvalues=k**2 - 1.0, noise_amplitudes=q, nu=nu)


def check_single_mode_coefficients():
    sigma = 1.5
    coeffs = compute_coefficients(_burgers_spec(64, sigma), burgers_tensor(64, normalized=False))
    assert abs(coeffs.eta_tilde - 1.0 / 12.0) <= 1e-12
    assert abs(coeffs.sigma_a - sigma**2 / 36.0) <= 1e-12
    assert coeffs.sigma_b == 0.0
    assert abs(coeffs.nu_tilde - 1.0 - sigma**2 / 72.0 + sigma**2 / 88.0) <= 1e-12


def check_white_noise_coefficients():
    sigma = 1.0
    spec = _burgers_spec(128, sigma, white=True)
    coeffs = compute_coefficients(spec, burgers_tensor(128, normalized=False))
    assert abs(coeffs.sigma_a - sigma**2 / (18.0 * math.pi)) <= 1e-12
    series, _ = burgers_white_noise_additive_series(sigma, 128)
    assert abs(coeffs.sigma_b - series) <= 1e-12


def check_operator_series_equivalence():
    spec = _burgers_spec(32, 0.8, white=True)
    tensor = burgers_tensor(32, normalized=False)
    coeffs = compute_coefficients(spec, tensor)
    ni = noise_interaction(spec, tensor)
    assert abs(ni.gamma_norm_sq() - coeffs.sigma_a) <= 1e-12
    assert abs(ni.trace_covariance(effective_covariance(spec)) - coeffs.sigma_b) <= 1e-12


def check_rescaling_round_trip():
    rng = np.random.Generator(np.random.Philox(99))
    tensor = burgers_tensor(12)
    q = np.zeros(12)
    q[1:] = rng.uniform(0.1, 1.0, 11)
    c = rng.uniform(0.5, 2.0, 12)
    t2, q2 = rescale_basis(tensor, q, c)
    t3, q3 = rescale_basis(t2, q2, 1.0 / c)
    assert np.allclose(q3, q, rtol=1e-13)
    for key, value in tensor.items():
        assert abs(t3.entry(*key) - value) <= 1e-13 * max(1.0, abs(value))


def check_projections_and_norm():
    f = SpectralField([3.0, 4.0, 1.0])
    total = project_slow(f) + project_fast(f)
    assert np.array_equal(total.coeffs, f.coeffs)
    spec = _burgers_spec(3, 0.0)
    from .core import sobolev_norm

    assert sobolev_norm(SpectralField([3.0, 4.0, 0.0]), spec, alpha=0.0) == 5.0


def check_tensor_validator():
    assert validate_tensor(burgers_tensor(16)).ok
    assert not validate_tensor(burgers_tensor(8).with_entry(2, 2, 1, 0.5)).ok
    assert not validate_tensor(BilinearTensor({(1, 2, 1): 1.0, (2, 1, 1): 2.0}, 4)).ok


def check_ou_stationary_moments():
    spec = _burgers_spec(3, 1.0)
    batch = 20000
    sd = stationary_std(spec)
    z = sd[1] * NoiseStream(13, 0).normals(batch)
    target = sd[1] ** 2
    assert abs(z.var() - target) <= 4.0 * target * math.sqrt(2.0 / batch)


def check_ou_exact_decay():
    spec = _burgers_spec(3, 0.0)
    decay, lw, lp = ou_step_weights(spec, 1.0, 1.0)
    assert abs(decay[1] - math.exp(-3.0)) <= 1e-15
    assert lw[1] == 0.0 and lp[1] == 0.0


def check_integral_moment_oracle():
    spec = _burgers_spec(4, 1.2)
    eps, t = 0.5, 1.0
    oracle = integrated_ou_moment_oracle(spec, 2, eps, 0.0, t)
    r = np.linspace(0.0, t, 1500)
    cov = (spec.noise_amplitudes[1] ** 2 / 6.0) * np.exp(
        -3.0 * np.abs(r[:, None] - r[None, :]) / eps**2
    )
    brute = float(np.trapezoid(np.trapezoid(cov, r, axis=1), r))
    assert abs(oracle - brute) <= 2e-3 * brute


def check_solver_exact_linear_decay():
    spec = _burgers_spec(4, 0.0, nu=0.0)
    record = simulate_full(
        spec, BilinearTensor({}, 4), 0.5, 0.25, 0.05,
        SpectralField([0.0, 1.0, 0.0, 0.5]), NoiseStream(0, 0), kappa=3.0,
        record_every=1, snapshots=True,
    )
    expected = np.array([0.0, 1.0, 0.0, 0.5]) * np.exp(
        -spec.eigenvalues * record.times[-1] / 0.25
    )
    assert np.allclose(record.v_snapshots[-1], expected, rtol=1e-12, atol=1e-15)


def check_solver_tracks_cubic_ode():
    eps = 0.15
    spec = _burgers_spec(12, 0.0, nu=1.0)
    tensor = burgers_tensor(12, normalized=False)
    v0 = np.zeros(12)
    v0[0] = 1.0
    record = simulate_full(
        spec, tensor, eps, 0.5, eps**2 / 8.0, SpectralField(v0), NoiseStream(0, 0),
        kappa=3.0,
    )
    # reference: tight explicit midpoint integration of a' = a - a^3/12
    a, dt = 1.0, 1e-4
    for _ in range(int(round(0.5 / dt))):
        half = a + 0.5 * dt * (a - a**3 / 12.0)
        a = a + dt * (half - half**3 / 12.0)
    assert abs(record.X[-1] - a) <= eps


def check_amplitude_fixed_point_and_symmetry():
    from .coefficients import AmplitudeCoefficients

    c = AmplitudeCoefficients(nu_tilde=1.0, eta_tilde=1.0 / 12.0, sigma_a=0.0, sigma_b=0.0)
    path = simulate_amplitude(c, 1.0, 12.0, 1e-3, np.zeros(12000))
    assert abs(path.a[-1] - math.sqrt(12.0)) <= 1e-5
    c2 = AmplitudeCoefficients(nu_tilde=0.5, eta_tilde=0.2, sigma_a=0.4, sigma_b=0.0)
    inc = math.sqrt(1e-3) * NoiseStream(3, 0).normals(500)
    up = simulate_amplitude(c2, 1.0, 0.5, 1e-3, inc)
    down = simulate_amplitude(c2, -1.0, 0.5, 1e-3, -inc)
    assert np.array_equal(np.abs(up.a), np.abs(down.a))


def check_stratonovich_round_trip():
    coeffs = compute_coefficients(_burgers_spec(16, 1.0), burgers_tensor(16, normalized=False))
    assert from_stratonovich(to_stratonovich(coeffs)) == coeffs


def check_engine_determinism():
    spec = _burgers_spec(8, 1.0)
    tensor = burgers_tensor(8, normalized=False)
    kwargs = dict(
        spec=spec, tensor=tensor, epsilon=0.3, h=0.3**2 / 8.0, steps=40, x0=1.0,
        kappa=3.0, seed=7,
    )
    a = spde_batch(0, 6, **kwargs)
    b = spde_batch(0, 6, **kwargs)
    c1 = spde_batch(0, 3, **kwargs)
    c2 = spde_batch(3, 6, **kwargs)
    assert np.array_equal(a["X_final"], b["X_final"])
    assert np.array_equal(a["X_final"], np.concatenate([c1["X_final"], c2["X_final"]]))


CHECKS = [
    ("regression_selftest", regression_selftest),
    ("single_mode_coefficients", check_single_mode_coefficients),
    ("white_noise_coefficients", check_white_noise_coefficients),
    ("operator_series_equivalence", check_operator_series_equivalence),
    ("rescaling_round_trip", check_rescaling_round_trip),
    ("projections_and_norm", check_projections_and_norm),
    ("tensor_validator", check_tensor_validator),
    ("ou_stationary_moments", check_ou_stationary_moments),
    ("ou_exact_decay", check_ou_exact_decay),
    ("integral_moment_oracle", check_integral_moment_oracle),
    ("solver_exact_linear_decay", check_solver_exact_linear_decay),
    ("solver_tracks_cubic_ode", check_solver_tracks_cubic_ode),
    ("amplitude_fixed_point_and_symmetry", check_amplitude_fixed_point_and_symmetry),
    ("stratonovich_round_trip", check_stratonovich_round_trip),
    ("engine_determinism", check_engine_determinism),
]


def run_selftest(out=print) -> bool:
    ok = True
    for name, check in CHECKS:
        try:
            check()
        except Exception as exc:  # report and keep going
            ok = False
            out(f"FAIL {name}: {exc!r}")
        else:
            out(f"ok   {name}")
    out("selftest " + ("PASSED" if ok else "FAILED"))
    return ok
