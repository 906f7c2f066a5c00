"""Reproducible noise streams and exact sampling of the fast linear modes.

Streams are counter-based (Philox) and keyed by (seed, replica_id): the same
key reproduces the same draws bit-for-bit on any machine and worker layout,
and distinct replica ids give independent streams.

Every fast-mode step consumes one (2, N) standard-normal block.  Row 0 holds
the Wiener-increment directions (the increment of mode k over a step h is
sqrt(h) * block[0, k-1]); row 1 completes the exact conditional law of the
linear update.  Writing the update as

    z_k <- exp(-lambda_k h / eps^2) z_k + load_w xi_w + load_p xi_p

with the loadings of :func:`ou_step_weights` makes the step exact in law for
any h while keeping the underlying Wiener increments available to coupled
consumers (the full solver and the amplitude integrator share row 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ModelSpec, SpectralField, require_valid
from .report import ExperimentReport, mean_se, rate_regression, regression_selftest
from .util import run_replica_chunks

__all__ = [
    "NoiseStream",
    "OUState",
    "ou_step_weights",
    "ou_stationary_sample",
    "ou_step",
    "integrated_ou_moment_oracle",
    "averaging_statistics",
]


class NoiseStream:
    """Counter-based random stream, reproducible from (seed, replica_id)."""

    def __init__(self, seed: int, replica_id: int = 0):
        self.seed = int(seed)
        self.replica_id = int(replica_id)
        key = np.random.SeedSequence([self.seed, self.replica_id])
        self._gen = np.random.Generator(np.random.Philox(key))

    def normals(self, shape) -> np.ndarray:
        return self._gen.standard_normal(shape)

    def step_block(self, n_modes: int) -> np.ndarray:
        """One (2, n_modes) block: Wiener directions and their completion."""
        return self._gen.standard_normal((2, n_modes))

    def path_normals(self, steps: int, n_modes: int) -> np.ndarray:
        """(steps, 2, n_modes) blocks; identical to ``steps`` sequential step blocks."""
        return self._gen.standard_normal((steps, 2, n_modes))


@dataclass(frozen=True)
class OUState:
    """Fast-mode state at slow time t; the slow coefficient is always zero."""

    t: float
    z: SpectralField
    epsilon: float


def stationary_std(spec: ModelSpec) -> np.ndarray:
    """Per-mode stationary standard deviation, sqrt(q_k^2 / (2 lambda_k)), zero on mode 1."""
    sd = np.zeros(spec.n_modes)
    lam = spec.eigenvalues
    q = spec.noise_amplitudes
    sd[1:] = q[1:] / np.sqrt(2.0 * lam[1:])
    return sd


def ou_step_weights(spec: ModelSpec, h: float, epsilon: float):
    """Exact per-mode update loadings for one step of size h.

    Returns (decay, load_w, load_p): the conditional update is
    decay * z + load_w * xi_w + load_p * xi_p, with conditional variance
    q^2 (1 - decay^2) / (2 lambda) and covariance against the mode's Wiener
    increment equal to sqrt(h) * load_w.
    """
    if h <= 0.0:
        raise ValueError("step size must be positive")
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    lam = spec.eigenvalues
    q = spec.noise_amplitudes
    theta = lam * h / epsilon**2
    decay = np.exp(-theta)
    fast = lam > 0.0
    var = np.empty_like(lam)
    cov = np.empty_like(lam)
    with np.errstate(divide="ignore", invalid="ignore"):
        var[fast] = q[fast] ** 2 * (-np.expm1(-2.0 * theta[fast])) / (2.0 * lam[fast])
        cov[fast] = q[fast] * epsilon * (-np.expm1(-theta[fast])) / lam[fast]
    var[~fast] = q[~fast] ** 2 * h / epsilon**2
    cov[~fast] = q[~fast] * h / epsilon
    load_w = cov / math.sqrt(h)
    load_p = np.sqrt(np.maximum(var - load_w**2, 0.0))
    return decay, load_w, load_p


def ou_stationary_sample(spec: ModelSpec, epsilon: float, stream: NoiseStream) -> OUState:
    """Draw the fast modes from their stationary law (variance q_k^2 / (2 lambda_k)).

    The stationary law does not depend on epsilon; epsilon is carried on the
    state for subsequent stepping and must be positive.
    """
    require_valid(spec)
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    z = stationary_std(spec) * stream.normals(spec.n_modes)
    return OUState(t=0.0, z=SpectralField(z), epsilon=epsilon)


def ou_step(state: OUState, h: float, spec: ModelSpec, stream: NoiseStream) -> OUState:
    """Advance the fast modes by h, exactly in law, consuming one step block."""
    decay, load_w, load_p = ou_step_weights(spec, h, state.epsilon)
    block = stream.step_block(spec.n_modes)
    # grouping matches the full solver's update so that coupled runs with the
    # same stream agree bit-for-bit when the drift terms vanish
    eta = load_w * block[0] + load_p * block[1]
    z = decay * state.z.coeffs + eta
    return OUState(t=state.t + h, z=SpectralField(z), epsilon=state.epsilon)


def integrated_ou_moment_oracle(
    spec: ModelSpec, k: int, epsilon: float, s: float, t: float
) -> float:
    """Exact second moment of the time integral of a stationary fast mode.

    E (int_s^t z_k dr)^2
        = (q_k^2 eps^2 / lambda_k^2) [ (t-s) - (eps^2/lambda_k)(1 - e^{-lambda_k (t-s)/eps^2}) ]

    obtained by integrating the exponential autocovariance twice.  Used as
    the independent oracle for the averaging statistics.
    """
    if k < 2 or k > spec.n_modes:
        raise ValueError("fast-mode index must satisfy 2 <= k <= N")
    if t <= s:
        raise ValueError("need t > s")
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    lam = float(spec.eigenvalues[k - 1])
    q = float(spec.noise_amplitudes[k - 1])
    dt = t - s
    relax = epsilon**2 / lam
    return (q**2 * epsilon**2 / lam**2) * (dt - relax * (-math.expm1(-dt / relax)))


def _averaging_chunk(lo, hi, *, spec, epsilon, h, steps, seed, indices, qhat_diag):
    """Per-replica averaging integrals for replicas [lo, hi) at one epsilon."""
    n = spec.n_modes
    k, l, m = (idx - 1 for idx in indices)
    decay, load_w, load_p = ou_step_weights(spec, h, epsilon)
    sd = stationary_std(spec)
    count = hi - lo
    i1 = np.zeros(count)
    i2 = np.zeros(count)
    i3 = np.zeros(count)
    z = np.empty((n, count))
    blocks = np.empty((steps, 2, n, count))
    for j, replica in enumerate(range(lo, hi)):
        stream = NoiseStream(seed, replica)
        z[:, j] = sd * stream.normals(n)
        blocks[..., j] = stream.path_normals(steps, n)
    centered = qhat_diag[k] if k == l else 0.0
    f1 = z[k]
    f2 = z[k] * z[l] - centered
    f3 = z[k] * z[l] * z[m]
    for i in range(steps):
        z = decay[:, None] * z + load_w[:, None] * blocks[i, 0] + load_p[:, None] * blocks[i, 1]
        g1 = z[k]
        g2 = z[k] * z[l] - centered
        g3 = z[k] * z[l] * z[m]
        i1 += 0.5 * h * (f1 + g1)
        i2 += 0.5 * h * (f2 + g2)
        i3 += 0.5 * h * (f3 + g3)
        f1, f2, f3 = g1, g2, g3
    return {"sq1": i1**2, "sq2": i2**2, "sq3": i3**2}


def averaging_statistics(
    spec: ModelSpec,
    eps_ladder,
    t_final: float,
    seed: int,
    batch: int,
    indices=(2, 3, 4),
    h: float = None,
    workers: int = 1,
    config_echo: dict = None,
) -> ExperimentReport:
    """Scaling test for the time-averaged fast-mode statistics.

    For each epsilon, estimates over ``batch`` stationary replicas the
    squared integrals of z_k, of the covariance-centered pair z_k z_l, and
    of the triple z_k z_l z_m over [0, t_final]; all three should shrink
    like eps^2.  Reports per-cell means with standard errors and the fitted
    log-log slopes (target 2.0 +- 0.3).
    """
    require_valid(spec)
    regression_selftest()
    if batch < 100:
        raise ValueError("averaging statistics need a batch of at least 100")
    eps_ladder = [float(e) for e in eps_ladder]
    if len(set(eps_ladder)) != len(eps_ladder) or min(eps_ladder) <= 0:
        raise ValueError("epsilon ladder must be distinct positive values")
    k, l, m = indices
    if min(k, l, m) < 2 or max(k, l, m) > spec.n_modes:
        raise ValueError("averaging indices must be fast modes (>= 2, <= N)")
    qhat = np.zeros(spec.n_modes)
    qhat[1:] = spec.noise_amplitudes[1:] ** 2 / (2.0 * spec.eigenvalues[1:])

    cells = []
    for eps in eps_ladder:
        # per-cell h proportional to eps^2 keeps the relative quadrature bias
        # of the fast product integrals constant across the ladder, so the
        # fitted slopes are unbiased
        h_cell = eps**2 / 8.0 if h is None else float(h)
        steps = int(round(t_final / h_cell))
        out = run_replica_chunks(
            _averaging_chunk,
            batch,
            chunk_size=256,
            workers=workers,
            spec=spec,
            epsilon=eps,
            h=h_cell,
            steps=steps,
            seed=seed,
            indices=(k, l, m),
            qhat_diag=qhat,
        )
        cell = {"eps": eps, "batch": batch, "h": h_cell}
        for name in ("sq1", "sq2", "sq3"):
            mean, se = mean_se(out[name])
            cell[f"{name}_mean"] = mean
            cell[f"{name}_se"] = se
        cell["sq1_oracle"] = integrated_ou_moment_oracle(spec, k, eps, 0.0, t_final)
        cells.append(cell)

    slopes = []
    passed = True
    labels = {
        "sq1": "mode_integral",
        "sq2": "centered_pair_integral",
        "sq3": "triple_integral",
    }
    for name, label in labels.items():
        values = [cell[f"{name}_mean"] for cell in cells]
        if min(values) <= 0.0:
            slopes.append({"name": label, "slope": None, "ok": False})
            passed = False
            continue
        fit = rate_regression(eps_ladder, values)
        ok = abs(fit.slope - 2.0) <= 0.3
        passed = passed and ok
        slopes.append({"name": label, "target": 2.0, "tol": 0.3, "ok": ok, **fit.as_dict()})

    return ExperimentReport(
        experiment="averaging",
        config=config_echo
        or {
            "eps": eps_ladder,
            "t_final": t_final,
            "batch": batch,
            "seed": seed,
            "indices": list(indices),
            "h": h,
        },
        grid={"eps": eps_ladder},
        cells=cells,
        slopes=slopes,
        passed=passed,
    )
