"""Exponential-Euler integrator for the rescaled slow/fast system.

The state v solves

    dv = (-eps^-2 L v + nu v + eps^-1 B(v, v)) dt + eps^-1 Q dW

and is advanced mode-wise with exact linear propagation, the nonlinear and
nu-drift frozen over the step behind the exact integrating factor, and the
exact conditional noise integral:

    v_k <- e^{-lambda_k h/eps^2} v_k + phi_k(h) (nu v_k + [B(v,v)]_k / eps) + noise_k
    phi_k(h) = (1 - e^{-lambda_k h/eps^2}) eps^2 / lambda_k   (h at lambda = 0).

With B = 0 this degenerates to the exact fast-mode sampler.  The frozen
nonlinearity costs O(h/eps^2) per unit slow time, hence the accuracy
constraint h <= eps^2/4 (default h = eps^2/8).

A stopping norm threshold is monitored at every step: the first time the
alpha-norm of v reaches eps^-kappa the state is flagged and the recorded
path truncates there.  An identically-driven fast linear reference path z is
carried along for the reduction diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    ModelSpec,
    SpectralField,
    effective_covariance,
    project_fast,
    require_valid,
    sobolev_norm,
)
from .coefficients import noise_interaction
from .noise import NoiseStream, ou_step_weights, stationary_std
from .tensor import BilinearTensor, require_valid_tensor

__all__ = [
    "SpdeState",
    "PathRecord",
    "AnsatzResidual",
    "spde_step",
    "simulate_full",
    "reconstruct_ansatz",
]


def stop_threshold(epsilon: float, kappa: float) -> float:
    """eps^-kappa, saturating to inf when it overflows the float range."""
    try:
        return epsilon ** (-kappa)
    except OverflowError:
        return math.inf


def solver_step_weights(spec: ModelSpec, h: float, epsilon: float):
    """(decay, phi, load_w, load_p) for one exponential-Euler step."""
    decay, load_w, load_p = ou_step_weights(spec, h, epsilon)
    lam = spec.eigenvalues
    phi = np.full_like(lam, h)
    fast = lam > 0.0
    phi[fast] = (1.0 - decay[fast]) * epsilon**2 / lam[fast]
    return decay, phi, load_w, load_p


@dataclass(frozen=True)
class SpdeState:
    """Solver state: full field v at slow time t, with the stopping flag.

    ``tau_star_hit`` turns true at the first step where the alpha-norm of v
    reaches eps^-kappa and stays true.
    """

    t: float
    v: SpectralField
    epsilon: float
    kappa: float = 0.1
    tau_star_hit: bool = False


def spde_step(
    state: SpdeState, h: float, spec: ModelSpec, tensor: BilinearTensor,
    stream: NoiseStream,
) -> SpdeState:
    """Advance one step; consumes one (2, N) block from the stream.

    Raises if called on a stopped state; the caller owns the stopping check.
    """
    if state.tau_star_hit:
        raise RuntimeError("state is past the stopping threshold")
    if h <= 0.0:
        raise ValueError("step size must be positive")
    decay, phi, load_w, load_p = solver_step_weights(spec, h, state.epsilon)
    block = stream.step_block(spec.n_modes)
    v = state.v.coeffs
    drift = spec.nu * v + tensor.apply_batch(v, v) / state.epsilon
    v_new = decay * v + phi * drift + load_w * block[0] + load_p * block[1]
    field = SpectralField(v_new)
    hit = sobolev_norm(field, spec) >= stop_threshold(state.epsilon, state.kappa)
    return SpdeState(
        t=state.t + h, v=field, epsilon=state.epsilon, kappa=state.kappa,
        tau_star_hit=bool(hit),
    )


@dataclass(frozen=True)
class PathRecord:
    """Recorded trajectory of a full-system run.

    Series live on the record grid (every ``record_every`` steps, plus t = 0
    and the stopping/final sample).  ``X`` is the slow amplitude, ``fast_norm``
    the alpha-norm of the fast part, ``ou_residual_norm`` the alpha-norm gap
    to the identically-driven fast linear reference z.  ``coupling_increments``
    are the per-step normalized slow-coupling Brownian increments (populated
    when the multiplicative coupling vector is nonzero), ``wiener_increments``
    the raw per-step mode increments when requested.
    """

    times: np.ndarray
    X: np.ndarray
    fast_norm: np.ndarray
    ou_residual_norm: np.ndarray
    tau_star: float
    tau_star_hit: bool
    censored: bool
    epsilon: float
    kappa: float
    coupling_increments: np.ndarray = None
    wiener_increments: np.ndarray = None
    v_snapshots: np.ndarray = None
    z_snapshots: np.ndarray = None

    @property
    def max_ou_residual(self) -> float:
        return float(np.max(self.ou_residual_norm))


def simulate_full(
    spec: ModelSpec,
    tensor: BilinearTensor,
    epsilon: float,
    t_final: float,
    h: float,
    v0: SpectralField,
    stream: NoiseStream,
    kappa: float = 0.1,
    record_every: int = 10,
    snapshots: bool = False,
    record_increments: bool = False,
) -> PathRecord:
    """Integrate to min(t_final, stopping time) recording the slow amplitude.

    The fast linear reference z starts from the fast part of v0 and consumes
    the identical noise.  Requires h <= eps^2/4.  A nonfinite state aborts the
    replica, which is returned truncated and flagged as censored.
    """
    require_valid(spec)
    require_valid_tensor(tensor)
    if epsilon <= 0.0 or not (0.0 < h <= epsilon**2 / 4.0):
        raise ValueError("need epsilon > 0 and 0 < h <= epsilon^2 / 4")
    if v0.n_modes != spec.n_modes:
        raise ValueError("initial field dimension mismatch")

    steps = int(round(t_final / h))
    decay, phi, load_w, load_p = solver_step_weights(spec, h, epsilon)
    weights = (1.0 + spec.eigenvalues) ** spec.alpha
    threshold = stop_threshold(epsilon, kappa)

    ni = noise_interaction(spec, tensor)
    gamma = ni.gamma
    gamma_norm = math.sqrt(ni.gamma_norm_sq())

    v = np.array(v0.coeffs)
    z = project_fast(v0).coeffs.copy()

    def fast_norm_of(arr):
        with np.errstate(over="ignore"):
            out = weights * arr**2
        return math.sqrt(max(np.sum(out[1:]), 0.0))

    times = [0.0]
    xs = [float(v[0])]
    fast_norms = [fast_norm_of(v)]
    residuals = [math.sqrt(max(np.sum(weights[1:] * (v[1:] - z[1:]) ** 2), 0.0))]
    v_snaps = [v.copy()] if snapshots else None
    z_snaps = [z.copy()] if snapshots else None
    coupling = []
    increments = [] if record_increments else None

    tau_star = t_final
    tau_hit = False
    censored = False
    sqrt_h = math.sqrt(h)

    guard_on = math.isfinite(threshold)
    for i in range(steps):
        block = stream.step_block(spec.n_modes)
        with np.errstate(over="ignore", invalid="ignore"):
            eta = load_w * block[0] + load_p * block[1]
            drift = spec.nu * v + tensor.apply_batch(v, v) / epsilon
            v = decay * v + phi * drift + eta
            z = decay * z + eta
        if record_increments:
            increments.append(sqrt_h * block[0])
        if gamma_norm > 0.0:
            coupling.append(sqrt_h * float(gamma @ block[0]) / gamma_norm)
        t = (i + 1) * h

        if not np.all(np.isfinite(v)):
            censored = True
            tau_star = t
            break
        with np.errstate(over="ignore"):
            norm = math.sqrt(np.sum(weights * v**2))
        record_now = (i + 1) % record_every == 0 or i == steps - 1
        if guard_on and norm >= threshold:
            tau_hit = True
            tau_star = t
            record_now = True
        if record_now:
            times.append(t)
            xs.append(float(v[0]))
            fast_norms.append(fast_norm_of(v))
            residuals.append(
                math.sqrt(max(np.sum(weights[1:] * (v[1:] - z[1:]) ** 2), 0.0))
            )
            if snapshots:
                v_snaps.append(v.copy())
                z_snaps.append(z.copy())
        if tau_hit:
            break

    return PathRecord(
        times=np.asarray(times),
        X=np.asarray(xs),
        fast_norm=np.asarray(fast_norms),
        ou_residual_norm=np.asarray(residuals),
        tau_star=tau_star,
        tau_star_hit=tau_hit,
        censored=censored,
        epsilon=epsilon,
        kappa=kappa,
        coupling_increments=np.asarray(coupling) if coupling else None,
        wiener_increments=np.asarray(increments) if record_increments else None,
        v_snapshots=np.asarray(v_snaps) if snapshots else None,
        z_snapshots=np.asarray(z_snaps) if snapshots else None,
    )


@dataclass(frozen=True)
class AnsatzResidual:
    """Residual of the slow-mode reconstruction in original (unrescaled) variables."""

    times: np.ndarray  # original time, t = s / eps^2
    norms: np.ndarray

    @property
    def sup(self) -> float:
        return float(np.max(self.norms))


def reconstruct_ansatz(record: PathRecord, spec: ModelSpec, a_path) -> AnsatzResidual:
    """Residual norm series of u - eps a(eps^2 t) e_1 - eps R(t) on the record grid.

    ``a_path`` must be sampled on the record's grid.  In the eigenbasis the
    residual at slow time s is (X(s) - a(s)) e_1 + (fast part - z)(s), whose
    alpha-norm combines the recorded slow gap and fast-reference gap; the
    original-variable field carries the overall factor eps.
    """
    a_path = np.asarray(a_path, dtype=float)
    if a_path.shape != record.times.shape:
        raise ValueError("amplitude path is not sampled on the record grid")
    slow_gap = record.X - a_path
    norms = record.epsilon * np.hypot(slow_gap, record.ou_residual_norm)
    return AnsatzResidual(times=record.times / record.epsilon**2, norms=norms)


# ---------------------------------------------------------------------------
# Batched engine used by the Monte Carlo experiments.  One replica = one
# column; each replica's noise is a pure function of (seed, replica_id), so
# results are independent of chunking and worker count.
# ---------------------------------------------------------------------------


def _chunk_size_for(steps: int, n_modes: int, budget_bytes: int = 192 * 2**20) -> int:
    per_replica = steps * 2 * n_modes * 8
    return max(1, min(256, budget_bytes // max(per_replica, 1)))


def spde_batch(
    lo: int,
    hi: int,
    *,
    spec: ModelSpec,
    tensor: BilinearTensor,
    epsilon: float,
    h: float,
    steps: int,
    x0: float,
    kappa: float,
    seed: int,
    record_every: int = 10,
    coeffs=None,
    gamma: np.ndarray = None,
    stationary_z: bool = False,
    track_pair_error: bool = False,
    qv: "object" = None,
    probe_steps=(),
    burn_step: int = None,
) -> dict:
    """Advance replicas [lo, hi) and return per-replica summary arrays.

    Always returns ``tau_hit``, ``censored`` and ``X_final``.  With ``coeffs``
    and ``gamma`` an amplitude path is advanced in lockstep from the shared
    Wiener row and the running record-grid sup of |X - a|, the fast-reference
    gap and the reconstruction residual are tracked (``track_pair_error``).
    With ``qv`` (a NoiseInteraction) the quadratic-variation gap and its
    zero-amplitude variant are accumulated every step.  ``probe_steps``
    collects X at chosen steps; ``burn_step`` additionally collects X there
    for exponent estimation.
    """
    n = spec.n_modes
    count = hi - lo
    decay, phi, load_w, load_p = solver_step_weights(spec, h, epsilon)
    weights = (1.0 + spec.eigenvalues) ** spec.alpha
    threshold = stop_threshold(epsilon, kappa)
    sqrt_h = math.sqrt(h)
    with_amp = coeffs is not None

    sd = stationary_std(spec)
    v = np.zeros((n, count))
    v[0] = x0
    z = np.zeros((n, count))
    blocks = np.empty((steps, 2, n, count))
    for j, replica in enumerate(range(lo, hi)):
        stream = NoiseStream(seed, replica)
        if stationary_z:
            z[:, j] = sd * stream.normals(n)
        blocks[..., j] = stream.path_normals(steps, n)

    if with_amp:
        a = np.full(count, float(x0))
        nu_t, eta_t = coeffs.nu_tilde, coeffs.eta_tilde
    alive = np.ones(count, dtype=bool)
    tau_hit = np.zeros(count, dtype=bool)
    censored = np.zeros(count, dtype=bool)
    sup_xa = np.zeros(count)
    sup_fast_gap = np.zeros(count)
    sup_ansatz = np.zeros(count)
    if qv is not None:
        qv_mat = qv.matrix()
        qv_gamma = qv.gamma
        sigma_a = math.fsum(g * g for g in qv_gamma)
        sigma_b = qv.trace_covariance(effective_covariance(spec))
        f_acc = np.zeros(count)
        g_acc = np.zeros(count)
        f0_acc = np.zeros(count)
        g0_acc = np.zeros(count)
        sup_qv = np.zeros(count)
        sup_qv0 = np.zeros(count)
    probe_steps = tuple(probe_steps)
    probes = np.zeros((len(probe_steps), count))
    x_burn = np.zeros(count)

    guard_on = math.isfinite(threshold)
    for i in range(steps):
        xi_w = blocks[i, 0]
        xi_p = blocks[i, 1]
        if qv is not None:
            # left-endpoint accumulation of the two quadratic variations
            cross = qv_mat.dot(z)
            vec = qv_gamma[:, None] * v[0][None, :] + cross
            rate_f = np.einsum("ij,ij->j", vec, vec)
            rate_f0 = np.einsum("ij,ij->j", cross, cross)
            f_acc = np.where(alive, f_acc + h * rate_f, f_acc)
            g_acc = np.where(alive, g_acc + h * (sigma_a * v[0] ** 2 + sigma_b), g_acc)
            f0_acc = np.where(alive, f0_acc + h * rate_f0, f0_acc)
            g0_acc = np.where(alive, g0_acc + h * sigma_b, g0_acc)
        with np.errstate(over="ignore", invalid="ignore"):
            eta = load_w[:, None] * xi_w + load_p[:, None] * xi_p
            drift = spec.nu * v + tensor.apply_batch(v, v) / epsilon
            v_new = decay[:, None] * v + phi[:, None] * drift + eta
            z_new = decay[:, None] * z + eta
            if with_amp:
                dmart = sqrt_h * (gamma @ xi_w)
                a_new = a + (nu_t * a - eta_t * a**3) * h + a * dmart

        finite = np.isfinite(v_new).all(axis=0)
        if with_amp:
            finite &= np.isfinite(a_new)
        with np.errstate(over="ignore"):
            norm = np.sqrt(np.einsum("i,ij->j", weights, v_new**2))
        trip = finite & (norm >= threshold) if guard_on else np.zeros_like(finite)

        upd = alive & finite
        v = np.where(upd[None, :], v_new, v)
        z = np.where(upd[None, :], z_new, z)
        if with_amp:
            a = np.where(upd, a_new, a)
        censored |= alive & ~finite
        tau_hit |= alive & trip
        alive &= finite & ~trip

        if (i + 1) % record_every == 0 or i == steps - 1:
            if track_pair_error:
                gap = np.abs(v[0] - a)
                fast_gap = np.sqrt(
                    np.einsum("i,ij->j", weights[1:], (v[1:] - z[1:]) ** 2)
                )
                sup_xa = np.where(upd, np.maximum(sup_xa, gap), sup_xa)
                sup_fast_gap = np.where(
                    upd, np.maximum(sup_fast_gap, fast_gap), sup_fast_gap
                )
                sup_ansatz = np.where(
                    upd,
                    np.maximum(sup_ansatz, epsilon * np.hypot(gap, fast_gap)),
                    sup_ansatz,
                )
            if qv is not None:
                sup_qv = np.where(upd, np.maximum(sup_qv, np.abs(f_acc - g_acc)), sup_qv)
                sup_qv0 = np.where(
                    upd, np.maximum(sup_qv0, np.abs(f0_acc - g0_acc)), sup_qv0
                )
        for p, pstep in enumerate(probe_steps):
            if i + 1 == pstep:
                probes[p] = v[0]
        if burn_step is not None and i + 1 == burn_step:
            x_burn = v[0].copy()

    out = {
        "tau_hit": tau_hit,
        "censored": censored,
        "X_final": v[0].copy(),
    }
    if track_pair_error:
        out["sup_xa"] = sup_xa
        out["sup_fast_gap"] = sup_fast_gap
        out["sup_ansatz"] = sup_ansatz
    if with_amp:
        out["a_final"] = a.copy()
    if qv is not None:
        out["sup_qv"] = sup_qv
        out["sup_qv0"] = sup_qv0
    if probe_steps:
        out["X_probes"] = probes.T  # (replica, probe) so chunks concatenate on axis 0
    if burn_step is not None:
        out["X_burn"] = x_burn
    return out
