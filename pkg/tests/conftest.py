"""Shared builders for randomized model specs and admissible tensors."""

import numpy as np
import pytest

from ampsde import BilinearTensor, ModelSpec


def burgers_spec(n, sigma=1.0, mode=2, nu=1.0, alpha=0.0, white=False, normalized=False):
    """Burgers eigenvalues lambda_k = k^2 - 1 with single-mode or white forcing.

    Single-mode forcing puts amplitude sigma on sin(mode x); white forcing
    puts q_k = sigma on every orthonormal fast mode.  Amplitudes are
    expressed in the basis selected by ``normalized``.
    """
    k = np.arange(1, n + 1)
    lam = k**2 - 1.0
    q = np.zeros(n)
    scale = np.sqrt(np.pi / 2.0)  # per-mode normalization of sin(kx)
    if white:
        q[1:] = sigma if normalized else sigma * np.sqrt(2.0 / np.pi)
    else:
        q[mode - 1] = sigma * scale if normalized else sigma
    return ModelSpec(eigenvalues=lam, noise_amplitudes=q, nu=nu, alpha=alpha)


def random_spec(rng, n, alpha=0.0, sparsity=0.5):
    lam = np.concatenate([[0.0], np.cumsum(rng.uniform(0.3, 2.0, n - 1)) + 0.5])
    q = rng.uniform(0.1, 1.5, n)
    q[0] = 0.0
    q[rng.uniform(size=n) < sparsity] = 0.0
    q[0] = 0.0
    return ModelSpec(eigenvalues=lam, noise_amplitudes=q, nu=rng.uniform(-1, 1), alpha=alpha)


def random_tensor(rng, n, fill=0.25):
    """Random admissible tensor: symmetric by construction, B[k,k,1] = 0."""
    entries = {}
    for k in range(1, n + 1):
        for l in range(k, n + 1):
            for m in range(1, n + 1):
                if k == l and m == 1:
                    continue
                if rng.uniform() < fill:
                    entries[(k, l, m)] = rng.normal()
    return BilinearTensor(entries, n)


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
