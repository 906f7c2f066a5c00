"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Criteria 1-4 are exact coefficient checks, 5-10 statistical experiments at
their calibrated default configurations (shared with the CLI), 11 the
byte-determinism contract.  Each test enforces the stated tolerance and the
stated runtime budget.
"""

import json
import math
import time

import numpy as np

from ampsde import (
    ModelSpec,
    NoiseStream,
    burgers_tensor,
    burgers_white_noise_additive_series,
    compute_coefficients,
    effective_covariance,
    noise_interaction,
    rescale_basis,
)
from ampsde.config import default_config, run_experiment
from ampsde.noise import ou_step_weights, stationary_std

from conftest import burgers_spec, random_spec, random_tensor


def _report(criterion, ok, detail, elapsed, budget):
    status = "PASS" if ok else "FAIL"
    print(f"criterion {criterion}: {status} ({detail}; {elapsed:.1f}s of {budget:.0f}s budget)")
    assert ok, f"criterion {criterion}: {detail}"
    assert elapsed < budget, f"criterion {criterion} exceeded runtime budget"


def test_criterion_1_single_mode_coefficients():
    t0 = time.monotonic()
    worst = 0.0
    tensor = burgers_tensor(64, normalized=False)
    for sigma in (0.5, 1.0, 2.0):
        spec = burgers_spec(64, sigma=sigma, nu=1.0)
        c = compute_coefficients(spec, tensor)
        worst = max(
            worst,
            abs(c.eta_tilde - 1.0 / 12.0),
            abs(c.sigma_a - sigma**2 / 36.0),
            abs(c.sigma_b),
            abs((c.nu_tilde - spec.nu) - (sigma**2 / 72.0 - sigma**2 / 88.0)),
        )
    elapsed = time.monotonic() - t0
    _report(1, worst <= 1e-12, f"single-mode coefficient error {worst:.2e} <= 1e-12", elapsed, 1.0)


def test_criterion_2_white_noise_coefficients():
    t0 = time.monotonic()
    sigma, n = 1.0, 256
    spec = burgers_spec(n, sigma=sigma, white=True)
    c = compute_coefficients(spec, burgers_tensor(n, normalized=False))
    err_a = abs(c.sigma_a - sigma**2 / (18.0 * math.pi))
    series, tail = burgers_white_noise_additive_series(sigma, n)
    err_b = abs(c.sigma_b - series)
    ok = err_a <= 1e-12 and err_b <= 1e-10 and tail < 1e-10
    elapsed = time.monotonic() - t0
    _report(
        2, ok,
        f"sigma_a err {err_a:.2e}, two-route sigma_b gap {err_b:.2e}, tail {tail:.2e}",
        elapsed, 5.0,
    )


def test_criterion_3_rescaling_covariance(rng):
    t0 = time.monotonic()
    worst = 0.0
    for trial in range(20):
        n = int(rng.integers(6, 17))
        spec = random_spec(rng, n, sparsity=0.3)
        tensor = random_tensor(rng, n)
        base = compute_coefficients(spec, tensor)
        c = rng.uniform(0.5, 2.0, n)
        if trial % 2 == 0:
            c[0] = 1.0
        t2, q2 = rescale_basis(tensor, spec.noise_amplitudes, c)
        spec2 = ModelSpec(
            eigenvalues=spec.eigenvalues, noise_amplitudes=q2, nu=spec.nu,
            basis_scales=c,
        )
        scaled = compute_coefficients(spec2, t2)
        worst = max(
            worst,
            abs(scaled.nu_tilde - base.nu_tilde),
            abs(scaled.sigma_a - base.sigma_a),
            abs(scaled.eta_tilde - c[0] ** 2 * base.eta_tilde),
            abs(scaled.sigma_b - base.sigma_b / c[0] ** 2),
        )
    elapsed = time.monotonic() - t0
    _report(3, worst <= 1e-12, f"20 trials, worst transform error {worst:.2e}", elapsed, 5.0)


def test_criterion_4_operator_series_equivalence(rng):
    t0 = time.monotonic()
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(4, 17))
        spec = random_spec(rng, n, sparsity=0.3)
        tensor = random_tensor(rng, n)
        coeffs = compute_coefficients(spec, tensor)
        ni = noise_interaction(spec, tensor)
        qhat = effective_covariance(spec)
        worst = max(
            worst,
            abs(ni.gamma_norm_sq() - coeffs.sigma_a),
            abs(ni.trace_covariance(qhat) - coeffs.sigma_b),
        )
    elapsed = time.monotonic() - t0
    _report(4, worst <= 1e-12, f"20 specs, worst route gap {worst:.2e}", elapsed, 5.0)


def test_criterion_5_ou_statistics():
    t0 = time.monotonic()
    batch = 100_000
    spec = burgers_spec(4, sigma=1.0)  # q_2 = 1, lambda_2 = 3
    eps, tau = 0.3, 0.02
    sd = stationary_std(spec)
    target_var = sd[1] ** 2
    stream = NoiseStream(505, 0)
    z0 = sd[1] * stream.normals(batch)
    decay, lw, lp = ou_step_weights(spec, tau, eps)
    block = stream.normals((2, batch))
    z1 = decay[1] * z0 + lw[1] * block[0] + lp[1] * block[1]

    var_est = float(z0.var())
    var_se = target_var * math.sqrt(2.0 / batch)
    rho = math.exp(-spec.eigenvalues[1] * tau / eps**2)
    cov_target = target_var * rho
    cov_est = float(np.mean(z0 * z1))
    cov_se = target_var * math.sqrt((1.0 + rho**2) / batch)

    ok = abs(var_est - target_var) <= 4.0 * var_se and abs(cov_est - cov_target) <= 4.0 * cov_se
    elapsed = time.monotonic() - t0
    _report(
        5, ok,
        f"variance dev {abs(var_est - target_var) / var_se:.2f} se, "
        f"lag-cov dev {abs(cov_est - cov_target) / cov_se:.2f} se",
        elapsed, 30.0,
    )


def test_criterion_6_averaging_scaling():
    t0 = time.monotonic()
    report = run_experiment(default_config("averaging"))
    slopes = {s["name"]: s["slope"] for s in report.slopes}
    ok = report.passed and all(abs(s - 2.0) <= 0.3 for s in slopes.values())
    elapsed = time.monotonic() - t0
    detail = ", ".join(f"{k}={v:.2f}" for k, v in slopes.items())
    _report(6, ok, f"slopes {detail} within 2.0 +- 0.3", elapsed, 120.0)


def test_criterion_7_qv_discrepancy():
    t0 = time.monotonic()
    report = run_experiment(default_config("qv"))
    slope = next(s["slope"] for s in report.slopes if s["name"] == "sup_qv")
    ok = report.passed and slope >= 0.35
    elapsed = time.monotonic() - t0
    _report(7, ok, f"sup|f-g| slope {slope:.2f} >= 0.35", elapsed, 300.0)


def test_criterion_8_coupled_pathwise_error():
    t0 = time.monotonic()
    config = default_config("coupled")
    assert config.run["batch"] >= 200 and config.model["n"] == 32
    report = run_experiment(config)
    sups = [c["sup_xa_mean"] for c in report.cells]
    censor = max(c["censor_fraction"] for c in report.cells)
    slope = next(s["slope"] for s in report.slopes if s["name"] == "sup_xa")
    ok = (
        report.passed
        and all(b < a for a, b in zip(sups, sups[1:]))
        and slope >= 0.2
        and censor < 0.01
    )
    elapsed = time.monotonic() - t0
    _report(
        8, ok,
        f"sup errors {['%.3f' % s for s in sups]} decreasing, slope {slope:.2f} >= 0.2, "
        f"censoring {censor:.3f}",
        elapsed, 600.0,
    )


def test_criterion_9_weak_error():
    t0 = time.monotonic()
    report = run_experiment(default_config("weak"))
    gaps = [c["m2_t1_gap"] for c in report.cells]
    ok = report.passed and all(b < a for a, b in zip(gaps, gaps[1:]))
    elapsed = time.monotonic() - t0
    _report(
        9, ok, f"|E X^2(1) - E a^2(1)| = {['%.4f' % g for g in gaps]} strictly decreasing",
        elapsed, 600.0,
    )


def test_criterion_10_stabilization_threshold():
    t0 = time.monotonic()
    report = run_experiment(default_config("stabilization"))
    cells = {c["sigma_sq"]: c for c in report.cells}
    amp_dev = {
        s2: abs(cells[s2]["amp_exponent_mean"] - cells[s2]["predicted"])
        for s2 in (44.0, 88.0, 132.0, 176.0)
    }
    signs_ok = all(
        cells[s2]["spde_sign_ok"] for s2 in (44.0, 176.0)
    )
    ok = report.passed and all(d <= 0.2 for d in amp_dev.values()) and signs_ok
    elapsed = time.monotonic() - t0
    detail = ", ".join(f"{int(k)}:{v:.3f}" for k, v in amp_dev.items())
    _report(10, ok, f"amplitude exponent deviations {{{detail}}} <= 0.2, signs agree", elapsed, 600.0)


def test_criterion_11_determinism(tmp_path):
    t0 = time.monotonic()
    config = default_config("averaging", out_dir=str(tmp_path))
    data = config.as_dict()
    data["run"]["batch"] = 300

    def run_and_read(workers):
        from ampsde.config import RunConfig

        report = run_experiment(RunConfig.from_dict(data), workers=workers)
        paths = report.write(tmp_path)
        return {p.name: p.read_bytes() for p in paths}

    first = run_and_read(1)
    second = run_and_read(1)
    parallel = run_and_read(3)
    ok = first == second == parallel
    elapsed = time.monotonic() - t0
    _report(
        11, ok,
        f"{len(first)} report files byte-identical across reruns and worker counts",
        elapsed, 120.0,
    )
    payload = json.loads(first["averaging_report.json"])
    assert payload["config"]["run"]["seed"] == data["run"]["seed"]
