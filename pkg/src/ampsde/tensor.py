"""Sparse symmetric representation of the quadratic nonlinearity.

The bilinear map is stored through its coefficients ``B[k, l, m] =
<B(e_k, e_l), e_m>``.  Only the half with ``k <= l`` is kept; reads
symmetrize, so symmetry in the first two slots holds structurally.  The
admissibility conditions on the nonlinearity are (i) that symmetry and
(ii) centering, ``B[k, k, 1] = 0`` for every k: the diagonal quadratic
self-interaction must not force the slow mode directly.

The Burgers instance on [0, pi] with Dirichlet conditions is built from the
convolution identity for the derivative of a product of sines.  With the
orthonormal basis e_k = sqrt(2/pi) sin(kx) the entries are

    B[k, l, m] = (|k+l| delta(k+l, m) - |k-l| delta(|k-l|, m)) / (2 sqrt(2 pi))

and the sin(kx) (unnormalized) variant follows from the basis-rescaling rule
``B -> B * c_k c_l / c_m`` with c_k = sqrt(pi/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .core import SpectralField

__all__ = [
    "BilinearTensor",
    "TensorReport",
    "burgers_tensor",
    "apply",
    "validate_tensor",
    "rescale_basis",
    "tensor_to_text",
    "tensor_from_text",
]


def _canonical(k: int, l: int, m: int):
    return (k, l, m) if k <= l else (l, k, m)


class BilinearTensor:
    """Sparse symmetric tensor of a bilinear map on the first N modes.

    ``entries`` maps 1-based index triples (k, l, m) to values; any input
    ordering of the first two indices is accepted and canonicalized to
    k <= l.  Conflicting values for (k, l, m) and (l, k, m) are recorded as
    symmetry defects and surfaced by :func:`validate_tensor` rather than
    silently merged.
    """

    def __init__(self, entries, n_modes: int):
        if n_modes < 1:
            raise ValueError("n_modes must be positive")
        seen = {}
        defects = []
        for (k, l, m), value in entries.items():
            if not (1 <= k <= n_modes and 1 <= l <= n_modes and 1 <= m <= n_modes):
                raise ValueError(f"tensor key {(k, l, m)} outside 1..{n_modes}")
            value = float(value)
            key = _canonical(k, l, m)
            if key in seen and seen[key] != value:
                defects.append(((k, l, m), seen[key], value))
                continue
            seen[key] = value
        self._entries = dict(sorted((k, v) for k, v in seen.items() if v != 0.0))
        self.n_modes = int(n_modes)
        self.symmetry_defects = tuple(defects)
        self._contraction = None

    def entry(self, k: int, l: int, m: int) -> float:
        """Symmetrized read of B[k, l, m]; absent keys are zero."""
        return self._entries.get(_canonical(k, l, m), 0.0)

    def items(self):
        """Stored (canonical k <= l) entries as ((k, l, m), value) pairs."""
        return self._entries.items()

    @property
    def n_stored(self) -> int:
        return len(self._entries)

    def with_entry(self, k: int, l: int, m: int, value: float) -> "BilinearTensor":
        """New tensor with one raw entry overridden (no canonicalization of input order)."""
        raw = dict(self._entries)
        raw[(k, l, m)] = float(value)
        return BilinearTensor(raw, self.n_modes)

    def _contraction_arrays(self):
        # Half-stored COO plus a CSR matrix scattering symmetrized pair
        # products into output modes; built once, reused by apply.  Each
        # stored (k <= l) entry consumes u_k v_l + u_l v_k (halved on the
        # diagonal), so the contraction is bit-exactly symmetric in (u, v).
        if self._contraction is None:
            ki, li, mi, vals = [], [], [], []
            for (k, l, m), value in self._entries.items():
                ki.append(k - 1)
                li.append(l - 1)
                mi.append(m - 1)
                vals.append(0.5 * value if k == l else value)
            ki = np.asarray(ki, dtype=np.intp)
            li = np.asarray(li, dtype=np.intp)
            mi = np.asarray(mi, dtype=np.intp)
            vals = np.asarray(vals, dtype=float)
            nnz = vals.size
            scatter = sp.csr_matrix(
                (vals, (mi, np.arange(nnz, dtype=np.intp))),
                shape=(self.n_modes, max(nnz, 1)),
            )
            self._contraction = (ki, li, scatter)
        return self._contraction

    def apply_batch(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Contraction w_m = sum_{k,l} B[k,l,m] u_k v_l on (N,) or (N, batch) arrays."""
        if u.shape != v.shape or u.shape[0] != self.n_modes:
            raise ValueError("operand shapes must agree with the tensor dimension")
        ki, li, scatter = self._contraction_arrays()
        if ki.size == 0:
            return np.zeros_like(u)
        pair = u[ki] * v[li] + u[li] * v[ki]
        return scatter.dot(pair)


def apply(tensor: BilinearTensor, u: SpectralField, v: SpectralField) -> SpectralField:
    """Apply the bilinear map to two fields; symmetric in its arguments."""
    if u.n_modes != tensor.n_modes or v.n_modes != tensor.n_modes:
        raise ValueError("field dimensions must match the tensor")
    return SpectralField(tensor.apply_batch(u.coeffs, v.coeffs))


@dataclass(frozen=True)
class TensorReport:
    """Admissibility report; empty ``violations`` means the tensor is usable."""

    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_tensor(tensor: BilinearTensor) -> TensorReport:
    """Check symmetry and the slow-mode centering B[k, k, 1] = 0 for all k."""
    violations = []
    for (ka, la, ma), va, vb in tensor.symmetry_defects:
        violations.append(
            f"asymmetric pair at ({ka}, {la}, {ma}): {va!r} vs {vb!r} for the swapped slots"
        )
    for k in range(1, tensor.n_modes + 1):
        value = tensor.entry(k, k, 1)
        if value != 0.0:
            violations.append(
                f"slow projection of the diagonal is forced: B[{k}, {k}, 1] = {value!r}"
            )
    return TensorReport(violations=violations)


def require_valid_tensor(tensor: BilinearTensor) -> None:
    report = validate_tensor(tensor)
    if not report.ok:
        raise ValueError("invalid bilinear tensor: " + "; ".join(report.violations))


def burgers_tensor(n_modes: int, normalized: bool = True) -> BilinearTensor:
    """Bilinear tensor of u u_x (as half the derivative of u^2) in the sine basis.

    ``normalized=True`` uses the orthonormal modes sqrt(2/pi) sin(kx);
    ``normalized=False`` rescales to plain sin(kx) amplitudes (all scales
    sqrt(pi/2)), the convention in which the slow-mode cubic coefficient is
    1/12.
    """
    if n_modes < 2:
        raise ValueError("burgers_tensor needs at least 2 modes")
    coef = 1.0 / (2.0 * math.sqrt(2.0 * math.pi))
    if not normalized:
        coef *= math.sqrt(math.pi / 2.0)  # c_k c_l / c_m with all scales equal
    entries = {}
    for k in range(1, n_modes + 1):
        for l in range(k, n_modes + 1):
            m = k + l
            if m <= n_modes:
                entries[(k, l, m)] = coef * m
            m = l - k
            if m >= 1:
                entries[(k, l, m)] = -coef * m
    return BilinearTensor(entries, n_modes)


def rescale_basis(tensor: BilinearTensor, q, c):
    """Transform tensor and noise amplitudes to the basis with scales ``c``.

    Entries map to B[k,l,m] * c_k c_l / c_m and amplitudes to q_k / c_k.
    Returns the transformed (tensor, noise amplitudes).
    """
    c = np.asarray(c, dtype=float)
    q = np.asarray(q, dtype=float)
    if c.shape != (tensor.n_modes,) or q.shape != (tensor.n_modes,):
        raise ValueError("q and c must have one entry per mode")
    if np.any(c <= 0.0):
        raise ValueError("basis scales must be strictly positive")
    entries = {
        (k, l, m): value * c[k - 1] * c[l - 1] / c[m - 1]
        for (k, l, m), value in tensor.items()
    }
    return BilinearTensor(entries, tensor.n_modes), q / c


def tensor_to_text(tensor: BilinearTensor) -> str:
    """Serialize as one "k l m value" line per stored entry (1-based indices)."""
    lines = [f"{k} {l} {m} {value!r}" for (k, l, m), value in tensor.items()]
    return "\n".join(lines) + ("\n" if lines else "")


def tensor_from_text(text: str, n_modes: int) -> BilinearTensor:
    """Parse the "k l m value" triple-list format; blank lines are ignored."""
    entries = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"line {lineno}: expected 'k l m value', got {line!r}")
        k, l, m = (int(p) for p in parts[:3])
        entries[(k, l, m)] = float(parts[3])
    return BilinearTensor(entries, n_modes)
