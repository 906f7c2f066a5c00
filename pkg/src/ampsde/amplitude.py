"""One-dimensional amplitude SDE integrators.

The Ito-form equation

    da = (nu_tilde a - eta_tilde a^3) dt + sqrt(sigma_b + sigma_a a^2) dB

is integrated with Euler-Maruyama (Milstein correction opt-in).  When
sigma_b = 0 the diffusion degenerates to sqrt(sigma_a) |a| and 0 is
dynamically invariant; no reflection or absorption logic is needed.

Drivers: a :class:`~ampsde.noise.NoiseStream` (draws one increment per
step), or an explicit array of Brownian increments (consumed in order, for
pathwise coupling against the full solver).  With a stream plus a
``coupling`` layout the integrator consumes full (2, N) step blocks exactly
like the solver does and reads its increment off the Wiener row, so both
integrators see bit-identical mode increments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coefficients import AmplitudeCoefficients, StratonovichCoefficients
from .noise import NoiseStream

__all__ = [
    "AmplitudeState",
    "AmplitudePath",
    "CouplingLayout",
    "amplitude_step",
    "simulate_amplitude",
    "simulate_amplitude_stratonovich",
]


@dataclass(frozen=True)
class AmplitudeState:
    t: float
    a: float
    coeffs: AmplitudeCoefficients


@dataclass(frozen=True)
class CouplingLayout:
    """How to read the amplitude increment out of a solver-shaped step block.

    ``n_modes`` is the block width, ``mode`` the 1-based Wiener component to
    consume, ``sign`` the orientation of the slow-coupling vector on that
    component.
    """

    n_modes: int
    mode: int
    sign: float = 1.0


def _draw_increment(driver, h: float, coupling: CouplingLayout = None) -> float:
    if isinstance(driver, NoiseStream):
        if coupling is None:
            return math.sqrt(h) * float(driver.normals(()))
        block = driver.step_block(coupling.n_modes)
        return coupling.sign * math.sqrt(h) * float(block[0, coupling.mode - 1])
    return float(driver)


def _em_update(a, h, dB, nu_t, eta_t, sigma_a, sigma_b, milstein):
    drift = (nu_t * a - eta_t * a**3) * h
    diffusion = np.sqrt(sigma_b + sigma_a * a * a) * dB
    out = a + drift + diffusion
    if milstein:
        out = out + 0.5 * sigma_a * a * (dB * dB - h)
    return out


def amplitude_step(
    state: AmplitudeState, h: float, driver, milstein: bool = False,
    coupling: CouplingLayout = None,
) -> AmplitudeState:
    """One Euler-Maruyama step; ``driver`` is a stream or the increment itself."""
    if h <= 0.0:
        raise ValueError("step size must be positive")
    if not math.isfinite(state.a):
        raise ValueError("nonfinite amplitude state")
    c = state.coeffs
    dB = _draw_increment(driver, h, coupling)
    a = float(
        _em_update(state.a, h, dB, c.nu_tilde, c.eta_tilde, c.sigma_a, c.sigma_b, milstein)
    )
    return AmplitudeState(t=state.t + h, a=a, coeffs=c)


@dataclass(frozen=True)
class AmplitudePath:
    times: np.ndarray
    a: np.ndarray


def _resolve_driver(driver, steps, h, coupling):
    """Materialize the per-step increments for a full simulation."""
    if isinstance(driver, NoiseStream):
        if coupling is None:
            return math.sqrt(h) * driver.normals(steps)
        blocks = driver.path_normals(steps, coupling.n_modes)
        return coupling.sign * math.sqrt(h) * blocks[:, 0, coupling.mode - 1]
    increments = np.asarray(driver, dtype=float)
    if increments.size < steps:
        raise ValueError(f"driver supplies {increments.size} increments, need {steps}")
    return increments[:steps]


def simulate_amplitude(
    coeffs: AmplitudeCoefficients,
    a0: float,
    t_final: float,
    h: float,
    driver,
    milstein: bool = False,
    record_every: int = 1,
    coupling: CouplingLayout = None,
) -> AmplitudePath:
    """Integrate the amplitude equation on a uniform grid.

    Supplied increments are consumed in order (bit-deterministic); the
    recorded path always contains t = 0 and the final time.
    """
    if h <= 0.0 or t_final <= 0.0:
        raise ValueError("need positive step and final time")
    steps = int(round(t_final / h))
    dB = _resolve_driver(driver, steps, h, coupling)
    times = [0.0]
    path = [float(a0)]
    a = float(a0)
    for i in range(steps):
        a = float(
            _em_update(
                a, h, dB[i], coeffs.nu_tilde, coeffs.eta_tilde,
                coeffs.sigma_a, coeffs.sigma_b, milstein,
            )
        )
        if not math.isfinite(a):
            raise ValueError(f"nonfinite amplitude at step {i + 1}")
        if (i + 1) % record_every == 0 or i == steps - 1:
            times.append((i + 1) * h)
            path.append(a)
    return AmplitudePath(times=np.asarray(times), a=np.asarray(path))


def amplitude_batch(
    lo: int,
    hi: int,
    *,
    nu: float,
    eta: float,
    sigma_a: float,
    sigma_b: float,
    a0: float,
    h: float,
    steps: int,
    seed: int,
    lane: int = 0,
    scheme: str = "euler",
    probe_steps=(),
    burn_step: int = None,
) -> dict:
    """Vectorized amplitude paths for replicas [lo, hi); one column per replica.

    Replica r draws its whole increment path from stream (seed, lane + r), so
    results are independent of chunking.  ``scheme`` is "euler", "milstein",
    or "heun_stratonovich" (in which case ``nu`` is the Stratonovich drift).
    Returns final values plus optional probe/burn snapshots; nonfinite
    replicas are flagged as censored and frozen.
    """
    count = hi - lo
    dB = np.empty((steps, count))
    for j, replica in enumerate(range(lo, hi)):
        dB[:, j] = math.sqrt(h) * NoiseStream(seed, lane + replica).normals(steps)
    a = np.full(count, float(a0))
    alive = np.ones(count, dtype=bool)
    probe_steps = tuple(probe_steps)
    probes = np.zeros((len(probe_steps), count))
    a_burn = np.zeros(count)

    def g(x):
        return np.sqrt(sigma_b + sigma_a * x * x)

    for i in range(steps):
        if scheme == "heun_stratonovich":
            drift = nu * a - eta * a**3
            pred = a + drift * h + g(a) * dB[i]
            a_new = a + 0.5 * (drift + nu * pred - eta * pred**3) * h + 0.5 * (
                g(a) + g(pred)
            ) * dB[i]
        else:
            a_new = a + (nu * a - eta * a**3) * h + g(a) * dB[i]
            if scheme == "milstein":
                a_new = a_new + 0.5 * sigma_a * a * (dB[i] ** 2 - h)
        finite = np.isfinite(a_new)
        a = np.where(alive & finite, a_new, a)
        alive &= finite
        for p, pstep in enumerate(probe_steps):
            if i + 1 == pstep:
                probes[p] = a
        if burn_step is not None and i + 1 == burn_step:
            a_burn = a.copy()

    out = {"a_final": a, "censored": ~alive}
    if probe_steps:
        out["a_probes"] = probes.T
    if burn_step is not None:
        out["a_burn"] = a_burn
    return out


def simulate_amplitude_stratonovich(
    strat: StratonovichCoefficients,
    a0: float,
    t_final: float,
    h: float,
    driver,
    record_every: int = 1,
) -> AmplitudePath:
    """Heun (midpoint) integration of the Stratonovich form of the equation.

    Used to cross-check the drift conversion: with nu_strat = nu_tilde -
    sigma_a/2 this path matches the Ito integration in law as h -> 0.
    """
    if h <= 0.0 or t_final <= 0.0:
        raise ValueError("need positive step and final time")
    steps = int(round(t_final / h))
    dB = _resolve_driver(driver, steps, h, None)

    def drift(a):
        return strat.nu_strat * a - strat.eta_tilde * a**3

    def diffusion(a):
        return math.sqrt(strat.sigma_b + strat.sigma_a * a * a)

    times = [0.0]
    path = [float(a0)]
    a = float(a0)
    for i in range(steps):
        pred = a + drift(a) * h + diffusion(a) * dB[i]
        a = a + 0.5 * (drift(a) + drift(pred)) * h + 0.5 * (
            diffusion(a) + diffusion(pred)
        ) * dB[i]
        if not math.isfinite(a):
            raise ValueError(f"nonfinite amplitude at step {i + 1}")
        if (i + 1) % record_every == 0 or i == steps - 1:
            times.append((i + 1) * h)
            path.append(a)
    return AmplitudePath(times=np.asarray(times), a=np.asarray(path))
