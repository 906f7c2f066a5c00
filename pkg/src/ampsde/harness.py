"""Monte Carlo experiments verifying the slow-mode reduction.

Four experiment families:

* coupled: pathwise error sup |X - a| between the full system's slow
  amplitude and the amplitude equation driven by the shared noise (only
  licensed when the additive variance vanishes, where the amplitude Brownian
  motion is a rescaled version of the driving noise).
* weak: moment discrepancies E phi(X(t)) vs E phi(a(t)) with independent
  randomness on the two sides (covers the additive-noise case).
* qv: quadratic-variation matching, sup_t |f - g| for
  f = int ||gamma X + Gamma z||^2 and g = int (sigma_a X^2 + sigma_b),
  plus the zero-amplitude variant int (||Gamma z||^2 - sigma_b).
* stabilization: top exponent of |X| and |a| against the prediction
  nu - sigma^2/88 for single-mode forcing of the Burgers model.

Every experiment is reproducible bit-for-bit from (seed, config) and
independent of the worker count: replica r is a pure function of (seed, r),
chunks have fixed size, and reductions use exact summation in replica order.
All ladder cells share replica streams (common random numbers), which the
fixed-step h rule makes exact: the same per-replica draws drive every cell.
"""

from __future__ import annotations

import math

import numpy as np

from .amplitude import amplitude_batch
from .coefficients import compute_coefficients, lyapunov_exponent, noise_interaction
from .core import ModelSpec, require_valid
from .noise import averaging_statistics  # noqa: F401  (same experiment surface)
from .report import ExperimentReport, mean_se, rate_regression, regression_selftest
from .solver import spde_batch, _chunk_size_for
from .tensor import BilinearTensor, burgers_tensor, require_valid_tensor
from .util import run_replica_chunks

__all__ = [
    "coupled_error_experiment",
    "weak_error_experiment",
    "qv_discrepancy_experiment",
    "stabilization_experiment",
    "rate_regression",
    "burgers_single_mode_spec",
]

AMPLITUDE_LANE = 1 << 40  # replica-id offset keeping amplitude-side streams disjoint


def burgers_single_mode_spec(n_modes, sigma, nu, mode=2, alpha=0.0) -> ModelSpec:
    """Burgers eigenvalues k^2 - 1 with amplitude ``sigma`` on sin(mode x)."""
    k = np.arange(1, n_modes + 1)
    q = np.zeros(n_modes)
    q[mode - 1] = sigma
    return ModelSpec(eigenvalues=k**2 - 1.0, noise_amplitudes=q, nu=nu, alpha=alpha)


def _resolve_ladder(eps_ladder):
    ladder = [float(e) for e in eps_ladder]
    if len(ladder) != len(set(ladder)) or min(ladder) <= 0.0:
        raise ValueError("epsilon ladder must be distinct positive values")
    return sorted(ladder, reverse=True)


def _resolve_h(h, ladder):
    if h is None:
        h = min(ladder) ** 2 / 8.0
    h = float(h)
    for eps in ladder:
        if h > eps**2 / 4.0:
            raise ValueError(f"h = {h} violates h <= eps^2/4 at eps = {eps}")
    return h


def _reduce_cell(out, names):
    """Censor-aware reduction: means/SEs over replicas that ran to completion."""
    bad = out["censored"] | out["tau_hit"]
    keep = ~bad
    cell = {
        "n_total": int(bad.size),
        "n_censored": int(np.count_nonzero(bad)),
        "censor_fraction": float(np.count_nonzero(bad)) / bad.size,
    }
    for name in names:
        mean, se = mean_se(out[name][keep])
        cell[f"{name}_mean"] = mean
        cell[f"{name}_se"] = se
    return cell


def _strictly_decreasing(values) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))


def coupled_error_experiment(
    eps_ladder,
    sigma: float,
    nu: float,
    t_final: float,
    batch: int,
    n_modes: int = 32,
    seed: int = 0,
    kappa: float = 3.0,
    h: float = None,
    x0: float = 1.0,
    record_every: int = 10,
    workers: int = 1,
    config_echo: dict = None,
) -> ExperimentReport:
    """Pathwise coupled error for single-mode forcing of the Burgers model.

    For each epsilon the full system and the amplitude equation consume the
    same Wiener increments (the amplitude martingale is the normalized slow
    coupling <gamma, dW>, legitimate because sigma_b = 0 here).  Reports
    E sup_{t <= min(T, tau*)} |X - a| per epsilon with the fitted decay
    slope, plus the fast-reference gap and the reconstruction residual in
    original variables.  Pass: strictly decreasing sup error, slope >= 0.2,
    censoring < 1% per cell.
    """
    regression_selftest()
    ladder = _resolve_ladder(eps_ladder)
    h = _resolve_h(h, ladder)
    if batch < 100:
        raise ValueError("coupled experiment needs batch >= 100")
    spec = burgers_single_mode_spec(n_modes, sigma, nu)
    tensor = burgers_tensor(n_modes, normalized=False)
    coeffs = compute_coefficients(spec, tensor)
    if coeffs.sigma_b != 0.0:
        raise ValueError("pathwise coupling requires a configuration with sigma_b = 0")
    ni = noise_interaction(spec, tensor)
    steps = int(round(t_final / h))
    chunk = _chunk_size_for(steps, n_modes)

    cells = []
    for eps in ladder:
        out = run_replica_chunks(
            spde_batch, batch, chunk, workers,
            spec=spec, tensor=tensor, epsilon=eps, h=h, steps=steps, x0=x0,
            kappa=kappa, seed=seed, record_every=record_every, coeffs=coeffs,
            gamma=ni.gamma, track_pair_error=True,
        )
        cell = {"eps": eps, "h": h, "batch": batch}
        cell.update(_reduce_cell(out, ["sup_xa", "sup_fast_gap", "sup_ansatz"]))
        cells.append(cell)

    sup_means = [cell["sup_xa_mean"] for cell in cells]
    slopes = []
    passed = all(cell["censor_fraction"] < 0.01 for cell in cells)
    passed = passed and _strictly_decreasing(sup_means)
    for name, target in (("sup_xa", 0.2), ("sup_fast_gap", None), ("sup_ansatz", None)):
        values = [cell[f"{name}_mean"] for cell in cells]
        fit = rate_regression(ladder, values)
        entry = {"name": name, **fit.as_dict()}
        if target is not None:
            entry["threshold"] = target
            entry["ok"] = fit.slope >= target
            passed = passed and entry["ok"]
        slopes.append(entry)

    return ExperimentReport(
        experiment="coupled",
        config=config_echo
        or {
            "eps": ladder, "sigma": sigma, "nu": nu, "t_final": t_final,
            "batch": batch, "n_modes": n_modes, "seed": seed, "kappa": kappa,
            "h": h, "x0": x0,
        },
        grid={"eps": ladder},
        cells=cells,
        slopes=slopes,
        passed=passed,
    )


def weak_error_experiment(
    eps_ladder,
    spec: ModelSpec,
    tensor: BilinearTensor,
    t_final: float,
    batch: int,
    probe_times=(1.0,),
    amp_batch: int = 1 << 15,
    amp_h: float = 1e-3,
    n_modes: int = None,
    seed: int = 0,
    kappa: float = 3.0,
    h: float = None,
    x0: float = 1.0,
    workers: int = 1,
    config_echo: dict = None,
) -> ExperimentReport:
    """Moment discrepancies between the slow amplitude and the reduced SDE.

    Compares E phi(X(t)) against E phi(a(t)) for phi in {identity, square,
    fourth power} at the probe times, with independent randomness on the two
    sides (the amplitude lane lives in a disjoint replica-id range).  The
    amplitude side has no epsilon dependence and is computed once.  Pass:
    |E X^2 - E a^2| at the final probe strictly decreasing down the ladder,
    censoring < 1%.
    """
    regression_selftest()
    require_valid(spec)
    require_valid_tensor(tensor)
    ladder = _resolve_ladder(eps_ladder)
    h = _resolve_h(h, ladder)
    if batch < 100:
        raise ValueError("weak experiment needs batch >= 100")
    probe_times = [float(t) for t in probe_times]
    if any(t < 0.0 or t > t_final for t in probe_times):
        raise ValueError("probe times must lie in [0, t_final]")
    coeffs = compute_coefficients(spec, tensor)
    ni = noise_interaction(spec, tensor)
    steps = int(round(t_final / h))
    probe_steps = [int(round(t / h)) for t in probe_times]
    chunk = _chunk_size_for(steps, spec.n_modes)

    # amplitude lane: epsilon-free limit law, one batch
    amp_steps = int(round(t_final / amp_h))
    amp_probe_steps = [int(round(t / amp_h)) for t in probe_times]
    amp = run_replica_chunks(
        amplitude_batch, amp_batch, 1 << 14, workers,
        nu=coeffs.nu_tilde, eta=coeffs.eta_tilde, sigma_a=coeffs.sigma_a,
        sigma_b=coeffs.sigma_b, a0=x0, h=amp_h, steps=amp_steps, seed=seed,
        lane=AMPLITUDE_LANE, probe_steps=[max(s, 1) for s in amp_probe_steps],
    )
    amp_keep = ~amp["censored"]
    amp_moments = []
    for j, t in enumerate(probe_times):
        if amp_probe_steps[j] == 0:
            a_vals = np.full(int(np.count_nonzero(amp_keep)), float(x0))
        else:
            a_vals = amp["a_probes"][amp_keep, j]
        amp_moments.append(
            {phi: mean_se(a_vals**p) for phi, p in (("m1", 1), ("m2", 2), ("m4", 4))}
        )

    cells = []
    for eps in ladder:
        out = run_replica_chunks(
            spde_batch, batch, chunk, workers,
            spec=spec, tensor=tensor, epsilon=eps, h=h, steps=steps, x0=x0,
            kappa=kappa, seed=seed, probe_steps=[max(s, 1) for s in probe_steps],
        )
        bad = out["censored"] | out["tau_hit"]
        keep = ~bad
        cell = {
            "eps": eps, "h": h, "batch": batch,
            "n_censored": int(np.count_nonzero(bad)),
            "censor_fraction": float(np.count_nonzero(bad)) / bad.size,
        }
        for j, t in enumerate(probe_times):
            if probe_steps[j] == 0:
                x_vals = np.full(int(np.count_nonzero(keep)), float(x0))
            else:
                x_vals = out["X_probes"][keep, j]
            for phi, p in (("m1", 1), ("m2", 2), ("m4", 4)):
                mean, se = mean_se(x_vals**p)
                a_mean, a_se = amp_moments[j][phi]
                cell[f"{phi}_t{t:g}_x"] = mean
                cell[f"{phi}_t{t:g}_a"] = a_mean
                cell[f"{phi}_t{t:g}_gap"] = abs(mean - a_mean)
                cell[f"{phi}_t{t:g}_se"] = math.hypot(se, a_se)
        cells.append(cell)

    final_t = probe_times[-1]
    gaps = [cell[f"m2_t{final_t:g}_gap"] for cell in cells]
    passed = all(cell["censor_fraction"] < 0.01 for cell in cells)
    passed = passed and _strictly_decreasing(gaps)
    slopes = []
    if min(gaps) > 0.0:
        fit = rate_regression(ladder, gaps)
        slopes.append({"name": f"m2_t{final_t:g}_gap", **fit.as_dict()})

    return ExperimentReport(
        experiment="weak",
        config=config_echo
        or {
            "eps": ladder, "t_final": t_final, "batch": batch,
            "amp_batch": amp_batch, "probe_times": probe_times, "seed": seed,
            "kappa": kappa, "h": h, "amp_h": amp_h, "x0": x0,
        },
        grid={"eps": ladder, "probe_times": probe_times},
        cells=cells,
        slopes=slopes,
        passed=passed,
        notes=["amplitude lane uses disjoint replica ids; moments at t=0 are exact"],
    )


def qv_discrepancy_experiment(
    eps_ladder,
    spec: ModelSpec,
    tensor: BilinearTensor,
    t_final: float,
    batch: int,
    seed: int = 0,
    kappa: float = 3.0,
    h: float = None,
    x0: float = 1.0,
    record_every: int = 10,
    workers: int = 1,
    config_echo: dict = None,
) -> ExperimentReport:
    """Quadratic-variation matching along simulated (X, z) paths.

    Accumulates f(t) = int ||gamma X + Gamma z||^2 ds and g(t) =
    int (sigma_a X^2 + sigma_b) ds every step (z stationary, driven by the
    same noise as the full system) and reports E sup_t |f - g| per epsilon
    with its decay slope (pass: slope >= 0.35, censoring < 1%).  The
    zero-amplitude statistic sup_t |int (||Gamma z||^2 - sigma_b)| is
    reported alongside with its own slope.
    """
    regression_selftest()
    require_valid(spec)
    require_valid_tensor(tensor)
    ladder = _resolve_ladder(eps_ladder)
    h = _resolve_h(h, ladder)
    if batch < 100:
        raise ValueError("qv experiment needs batch >= 100")
    coeffs = compute_coefficients(spec, tensor)
    ni = noise_interaction(spec, tensor)
    steps = int(round(t_final / h))
    chunk = _chunk_size_for(steps, spec.n_modes)

    cells = []
    for eps in ladder:
        out = run_replica_chunks(
            spde_batch, batch, chunk, workers,
            spec=spec, tensor=tensor, epsilon=eps, h=h, steps=steps, x0=x0,
            kappa=kappa, seed=seed, record_every=record_every, qv=ni,
            stationary_z=True,
        )
        cell = {"eps": eps, "h": h, "batch": batch}
        cell.update(_reduce_cell(out, ["sup_qv", "sup_qv0"]))
        cells.append(cell)

    passed = all(cell["censor_fraction"] < 0.01 for cell in cells)
    slopes = []
    for name, target in (("sup_qv", 0.35), ("sup_qv0", None)):
        values = [cell[f"{name}_mean"] for cell in cells]
        if min(values) <= 0.0:  # degenerate (e.g. unforced) configuration
            slopes.append({"name": name, "slope": None, "ok": False})
            if target is not None:
                passed = False
            continue
        fit = rate_regression(ladder, values)
        entry = {"name": name, **fit.as_dict()}
        if target is not None:
            entry["threshold"] = target
            entry["ok"] = fit.slope >= target
            passed = passed and entry["ok"]
        slopes.append(entry)

    return ExperimentReport(
        experiment="qv",
        config=config_echo
        or {
            "eps": ladder, "t_final": t_final, "batch": batch, "seed": seed,
            "kappa": kappa, "h": h, "x0": x0,
        },
        grid={"eps": ladder},
        cells=cells,
        slopes=slopes,
        passed=passed,
    )


def stabilization_experiment(
    sigma_sq_grid,
    nu: float,
    epsilon: float,
    t_final: float,
    batch: int,
    spde_sigma_sq=(44.0, 176.0),
    spde_batch_size: int = 64,
    n_modes: int = 32,
    a0: float = 1e-8,
    amp_h: float = 5e-4,
    burn_fraction: float = 0.2,
    seed: int = 0,
    kappa: float = 3.0,
    h: float = None,
    workers: int = 1,
    config_echo: dict = None,
) -> ExperimentReport:
    """Noise-induced stabilization of the single-mode-forced Burgers model.

    For each sigma^2 on the grid, estimates the top exponent of |a| from
    amplitude paths started near the origin (log |a(T)/a(t_burn)| over the
    elapsed window, burn-in t_burn = T/5) against the prediction
    nu - sigma^2/88, and, on the subgrid ``spde_sigma_sq``, the same
    exponent for |X| from full-system paths at the given epsilon.  Pass:
    every amplitude estimate within +-0.2 of the prediction, full-system
    exponent signs agreeing with the prediction, and a sign change flagged
    across the grid when the prediction crosses zero.
    """
    regression_selftest()
    sigma_sq_grid = [float(s) for s in sigma_sq_grid]
    if any(s < 0 for s in sigma_sq_grid):
        raise ValueError("sigma^2 grid must be nonnegative")
    spde_sigma_sq = [float(s) for s in spde_sigma_sq]
    if any(s not in sigma_sq_grid for s in spde_sigma_sq):
        raise ValueError("spde_sigma_sq must be a subset of the sigma^2 grid")
    if h is None:
        h = epsilon**2 / 8.0
    if h > epsilon**2 / 4.0:
        raise ValueError("h violates h <= eps^2/4")
    burn_time = burn_fraction * t_final
    window = t_final - burn_time

    amp_steps = int(round(t_final / amp_h))
    amp_burn = int(round(burn_time / amp_h))
    steps = int(round(t_final / h))
    burn_step = int(round(burn_time / h))
    chunk = _chunk_size_for(steps, n_modes)

    cells = []
    passed = True
    for s2 in sigma_sq_grid:
        sigma = math.sqrt(s2)
        spec = burgers_single_mode_spec(n_modes, sigma, nu)
        tensor = burgers_tensor(n_modes, normalized=False)
        coeffs = compute_coefficients(spec, tensor)
        # linearized exponent nu_tilde - sigma_a/2, which reduces to nu - sigma^2/88
        predicted = lyapunov_exponent(coeffs)
        amp = run_replica_chunks(
            amplitude_batch, batch, 1 << 13, workers,
            nu=coeffs.nu_tilde, eta=coeffs.eta_tilde, sigma_a=coeffs.sigma_a,
            sigma_b=coeffs.sigma_b, a0=a0, h=amp_h, steps=amp_steps, seed=seed,
            lane=AMPLITUDE_LANE, burn_step=amp_burn,
        )
        keep = ~amp["censored"] & (np.abs(amp["a_burn"]) > 0.0)
        rates = (
            np.log(np.abs(amp["a_final"][keep])) - np.log(np.abs(amp["a_burn"][keep]))
        ) / window
        amp_mean, amp_se = mean_se(rates)
        cell = {
            "sigma_sq": s2,
            "predicted": predicted,
            "amp_exponent_mean": amp_mean,
            "amp_exponent_se": amp_se,
            "amp_batch": batch,
            "amp_censor_fraction": float(np.count_nonzero(~keep)) / batch,
            "amp_ok": abs(amp_mean - predicted) <= 0.2,
        }
        passed = passed and cell["amp_ok"] and cell["amp_censor_fraction"] < 0.01

        if s2 in spde_sigma_sq:
            out = run_replica_chunks(
                spde_batch, spde_batch_size, chunk, workers,
                spec=spec, tensor=tensor, epsilon=epsilon, h=h, steps=steps,
                x0=a0, kappa=kappa, seed=seed, burn_step=burn_step,
            )
            bad = out["censored"] | out["tau_hit"]
            keep = ~bad & (np.abs(out["X_burn"]) > 0.0)
            xrates = (
                np.log(np.abs(out["X_final"][keep]))
                - np.log(np.abs(out["X_burn"][keep]))
            ) / window
            x_mean, x_se = mean_se(xrates)
            cell["spde_exponent_mean"] = x_mean
            cell["spde_exponent_se"] = x_se
            cell["spde_batch"] = spde_batch_size
            cell["spde_censor_fraction"] = float(np.count_nonzero(bad)) / bad.size
            cell["spde_sign_ok"] = (
                math.copysign(1.0, x_mean) == math.copysign(1.0, predicted)
                if predicted != 0.0
                else True
            )
            passed = passed and cell["spde_sign_ok"] and cell["spde_censor_fraction"] < 0.01
        cells.append(cell)

    estimates = [cell["amp_exponent_mean"] for cell in cells]
    sign_change = any(a * b < 0.0 for a, b in zip(estimates, estimates[1:]))
    predicted_change = any(
        a * b < 0.0
        for a, b in zip(
            [c["predicted"] for c in cells], [c["predicted"] for c in cells][1:]
        )
    )
    if predicted_change:
        passed = passed and sign_change

    return ExperimentReport(
        experiment="stabilization",
        config=config_echo
        or {
            "sigma_sq": sigma_sq_grid, "nu": nu, "eps": epsilon,
            "t_final": t_final, "batch": batch, "spde_sigma_sq": spde_sigma_sq,
            "spde_batch": spde_batch_size, "n_modes": n_modes, "a0": a0,
            "amp_h": amp_h, "seed": seed, "kappa": kappa, "h": h,
        },
        grid={"sigma_sq": sigma_sq_grid},
        cells=cells,
        slopes=[],
        passed=passed,
        notes=[f"sign_change_detected: {sign_change}"],
    )
