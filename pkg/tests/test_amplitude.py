import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from ampsde import (
    AmplitudeCoefficients,
    AmplitudeState,
    CouplingLayout,
    NoiseStream,
    amplitude_step,
    simulate_amplitude,
    simulate_amplitude_stratonovich,
    to_stratonovich,
)
from ampsde.amplitude import amplitude_batch


def coeffs_of(nu=1.0, eta=1.0 / 12.0, sigma_a=0.0, sigma_b=0.0):
    return AmplitudeCoefficients(
        nu_tilde=nu, eta_tilde=eta, sigma_a=sigma_a, sigma_b=sigma_b
    )


def test_deterministic_path_converges_to_fixed_point():
    # a' = a - a^3/12 has stable fixed points at +-sqrt(12)
    path = simulate_amplitude(coeffs_of(), 1.0, t_final=20.0, h=1e-3, driver=np.zeros(20000))
    assert path.a[-1] == pytest.approx(math.sqrt(12.0), abs=1e-6)


def test_zero_is_invariant_without_additive_noise():
    path = simulate_amplitude(
        coeffs_of(sigma_a=0.5), 0.0, t_final=1.0, h=1e-3, driver=NoiseStream(0, 0)
    )
    assert np.all(path.a == 0.0)


def test_linear_decay_accuracy():
    path = simulate_amplitude(
        coeffs_of(nu=-1.0, eta=0.0), 1.0, t_final=1.0, h=1e-4, driver=np.zeros(10000)
    )
    assert abs(path.a[-1] - math.exp(-1.0)) <= 1e-3


def test_tracks_high_accuracy_ode_solution():
    nu, eta = 0.8, 1.0 / 12.0
    sol = solve_ivp(
        lambda t, y: nu * y - eta * y**3, (0.0, 3.0), [0.5], rtol=1e-12, atol=1e-14,
        dense_output=True,
    )
    path = simulate_amplitude(coeffs_of(nu=nu, eta=eta), 0.5, 3.0, 1e-4, np.zeros(30000))
    assert path.a[-1] == pytest.approx(float(sol.sol(3.0)[0]), abs=5e-4)


def test_step_state_round_trip():
    state = AmplitudeState(t=0.0, a=1.0, coeffs=coeffs_of(sigma_a=0.1))
    out = amplitude_step(state, 0.01, 0.05)
    assert out.t == pytest.approx(0.01)
    expected = 1.0 + (1.0 - 1.0 / 12.0) * 0.01 + math.sqrt(0.1) * 0.05
    assert out.a == pytest.approx(expected, rel=1e-15)


def test_step_rejects_nonfinite_state():
    state = AmplitudeState(t=0.0, a=math.inf, coeffs=coeffs_of())
    with pytest.raises(ValueError):
        amplitude_step(state, 0.01, 0.0)


def test_sign_symmetry_is_bit_exact():
    c = coeffs_of(nu=0.7, eta=0.3, sigma_a=0.8, sigma_b=0.0)
    inc = math.sqrt(1e-3) * NoiseStream(4, 0).normals(1000)
    up = simulate_amplitude(c, 1.3, 1.0, 1e-3, inc)
    down = simulate_amplitude(c, -1.3, 1.0, 1e-3, -inc)
    assert np.array_equal(np.abs(up.a), np.abs(down.a))


def test_milstein_sign_symmetry_and_toggle():
    c = coeffs_of(nu=0.2, eta=0.1, sigma_a=0.5, sigma_b=0.0)
    inc = math.sqrt(1e-3) * NoiseStream(5, 0).normals(500)
    up = simulate_amplitude(c, 0.9, 0.5, 1e-3, inc, milstein=True)
    down = simulate_amplitude(c, -0.9, 0.5, 1e-3, -inc, milstein=True)
    assert np.array_equal(np.abs(up.a), np.abs(down.a))
    plain = simulate_amplitude(c, 0.9, 0.5, 1e-3, inc)
    assert not np.array_equal(plain.a, up.a)


def test_coupling_layout_reads_wiener_row():
    c = coeffs_of(sigma_a=0.3)
    layout = CouplingLayout(n_modes=6, mode=2, sign=-1.0)
    path = simulate_amplitude(c, 1.0, 0.1, 0.01, NoiseStream(7, 3), coupling=layout)
    blocks = NoiseStream(7, 3).path_normals(10, 6)
    manual = simulate_amplitude(
        c, 1.0, 0.1, 0.01, -math.sqrt(0.01) * blocks[:, 0, 1]
    )
    assert np.array_equal(path.a, manual.a)


def test_supplied_increments_consumed_in_order():
    c = coeffs_of(sigma_a=0.2, sigma_b=0.1)
    inc = math.sqrt(0.01) * NoiseStream(8, 0).normals(10)
    p1 = simulate_amplitude(c, 0.4, 0.1, 0.01, inc)
    p2 = simulate_amplitude(c, 0.4, 0.1, 0.01, inc.copy())
    assert np.array_equal(p1.a, p2.a)
    with pytest.raises(ValueError):
        simulate_amplitude(c, 0.4, 1.0, 0.01, inc)  # too few increments


def test_ito_stratonovich_consistency():
    """Ito EM and Stratonovich Heun (shifted drift) agree in law as h -> 0."""
    c = coeffs_of(nu=1.0, eta=1.0 / 12.0, sigma_a=0.15, sigma_b=0.3)
    strat = to_stratonovich(c)
    batch, t_final = 4000, 1.0
    means = {}
    for h in (1e-2, 1e-3):
        steps = int(round(t_final / h))
        ito = amplitude_batch(
            0, batch, nu=c.nu_tilde, eta=c.eta_tilde, sigma_a=c.sigma_a,
            sigma_b=c.sigma_b, a0=1.0, h=h, steps=steps, seed=100, lane=0,
        )["a_final"]
        heun = amplitude_batch(
            0, batch, nu=strat.nu_strat, eta=strat.eta_tilde, sigma_a=strat.sigma_a,
            sigma_b=strat.sigma_b, a0=1.0, h=h, steps=steps, seed=200, lane=1 << 20,
            scheme="heun_stratonovich",
        )["a_final"]
        m_i, s_i = float(np.mean(ito**2)), float(np.std(ito**2) / math.sqrt(batch))
        m_h, s_h = float(np.mean(heun**2)), float(np.std(heun**2) / math.sqrt(batch))
        means[h] = (m_i, m_h, math.hypot(s_i, s_h))
    m_i, m_h, se = means[1e-3]
    assert abs(m_i - m_h) <= 4.0 * se


def _em_vector(a, h, dB, nu, eta, sigma_a, sigma_b, milstein=False):
    out = a + (nu * a - eta * a**3) * h + np.sqrt(sigma_b + sigma_a * a * a) * dB
    if milstein:
        out = out + 0.5 * sigma_a * a * (dB**2 - h)
    return out


def test_strong_order_against_shared_fine_reference():
    nu, eta, sigma_a, sigma_b = 0.5, 1.0 / 12.0, 0.2, 0.25
    batch, t_final, refine = 400, 1.0, 64
    errors = []
    ladder = [4e-3, 2e-3, 1e-3]
    for idx, h in enumerate(ladder):
        steps = int(round(t_final / h))
        h_fine = h / refine
        rng = NoiseStream(300, idx)
        coarse = np.full(batch, 1.0)
        fine = np.full(batch, 1.0)
        for _ in range(steps):
            sub = math.sqrt(h_fine) * rng.normals((refine, batch))
            for j in range(refine):
                fine = _em_vector(fine, h_fine, sub[j], nu, eta, sigma_a, sigma_b)
            coarse = _em_vector(coarse, h, sub.sum(axis=0), nu, eta, sigma_a, sigma_b)
        errors.append(float(np.mean(np.abs(coarse - fine))))
    from ampsde import rate_regression

    fit = rate_regression(ladder, errors)
    assert fit.slope >= 0.4


def test_milstein_beats_euler_on_multiplicative_noise():
    # sigma_b = 0 and eta = 0 make the equation exactly solvable (geometric)
    nu, sigma_a = 0.5, 0.4
    h, t_final, batch = 1e-2, 1.0, 2000
    steps = int(round(t_final / h))
    inc = math.sqrt(h) * NoiseStream(400, 0).normals((steps, batch))
    em = np.full(batch, 1.0)
    mil = np.full(batch, 1.0)
    for i in range(steps):
        em = _em_vector(em, h, inc[i], nu, 0.0, sigma_a, 0.0)
        mil = _em_vector(mil, h, inc[i], nu, 0.0, sigma_a, 0.0, milstein=True)
    exact = np.exp((nu - sigma_a / 2.0) * t_final + math.sqrt(sigma_a) * inc.sum(axis=0))
    assert np.mean(np.abs(mil - exact)) < 0.5 * np.mean(np.abs(em - exact))


def test_stratonovich_path_variant_runs():
    strat = to_stratonovich(coeffs_of(sigma_a=0.1, sigma_b=0.2))
    path = simulate_amplitude_stratonovich(strat, 1.0, 0.5, 1e-3, NoiseStream(9, 0))
    assert path.times[-1] == pytest.approx(0.5)
    assert np.all(np.isfinite(path.a))


def test_additive_noise_stationary_second_moment_reported():
    # regression baseline: with sigma_b > 0 the long-run E a^2 is finite and positive
    out = amplitude_batch(
        0, 2000, nu=1.0, eta=1.0 / 12.0, sigma_a=0.0177, sigma_b=2.16e-4,
        a0=1.0, h=2e-3, steps=5000, seed=77,
    )
    m2 = float(np.mean(out["a_final"] ** 2))
    assert np.isfinite(m2) and m2 > 0.0
    # stays near the deterministic fixed point's square (12 nu/eta scale)
    assert 6.0 < m2 < 20.0
