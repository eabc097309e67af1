"""Dense complex-matrix primitives shared by every other module.

Matrices are plain ``numpy`` complex arrays. The hot loops (Kronecker
products, bipartite partial traces, trace inner products) dispatch to the
compiled kernel when it was built, otherwise to the numpy fallback.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ._backend import BACKEND, kernel

__all__ = [
    "BACKEND",
    "FEASIBILITY_TOL",
    "IDENTITY_TOL",
    "RANK_CUTOFF",
    "DimensionError",
    "NotHermitianError",
    "NotPSDError",
    "kron",
    "kron_all",
    "partial_trace",
    "hermitian_eig",
    "is_hermitian",
    "is_psd",
    "psd_power",
    "trace_product",
    "dagger",
]

FEASIBILITY_TOL = 1e-9
IDENTITY_TOL = 1e-12
# relative to the largest eigenvalue
RANK_CUTOFF = 1e-10


class DimensionError(ValueError):
    pass


class NotHermitianError(ValueError):
    pass


class NotPSDError(ValueError):
    pass


def _as_square(m) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    return m


def dagger(m) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def kron(a, b) -> np.ndarray:
    """Kronecker product; the left factor indexes the coarse blocks."""
    return kernel.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def kron_all(*mats) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = kron(out, m)
    return out


def trace_product(a, b) -> complex:
    """tr(a b)."""
    return kernel.trace_product(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def partial_trace(m, dims: Sequence[int], keep) -> np.ndarray:
    """Reduce ``m`` on the tensor factors listed in ``keep``.

    ``dims`` gives the factor dimensions in order; kept factors stay in
    their original relative order. An empty ``keep`` returns the 1x1 trace.
    """
    m = _as_square(m)
    dims = [int(d) for d in dims]
    if any(d < 1 for d in dims) or int(np.prod(dims)) != m.shape[0]:
        raise DimensionError(f"dims {dims} inconsistent with matrix dimension {m.shape[0]}")
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise DimensionError(f"keep indices {keep} out of range for {len(dims)} factors")
    traced = [i for i in range(len(dims)) if i not in keep]
    dk = int(np.prod([dims[i] for i in keep])) if keep else 1
    dt = int(np.prod([dims[i] for i in traced])) if traced else 1
    if keep == list(range(len(keep))):
        # kept factors already lead; no permutation needed
        grouped = m
    else:
        n = len(dims)
        order = keep + traced
        t = m.reshape(dims + dims).transpose(order + [n + i for i in order])
        grouped = np.ascontiguousarray(t).reshape(dk * dt, dk * dt)
    return kernel.ptrace_pair(grouped, dk, dt, True)


def is_hermitian(m, tol: float = IDENTITY_TOL) -> bool:
    m = _as_square(m)
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= tol)


def _require_hermitian(m, tol):
    m = _as_square(m)
    err = np.max(np.abs(m - m.conj().T), initial=0.0)
    if err > tol:
        raise NotHermitianError(f"matrix is not Hermitian (max |M - M^dag| = {err:.3e})")
    return m


def hermitian_eig(m, tol: float = IDENTITY_TOL):
    """Eigen-decomposition of a Hermitian matrix, eigenvalues descending.

    Returns ``(values, vectors)`` with orthonormal eigenvectors as columns.
    """
    m = _require_hermitian(m, tol)
    herm = (m + m.conj().T) / 2
    vals, vecs = np.linalg.eigh(herm)
    return vals[::-1].copy(), vecs[:, ::-1].copy()


def is_psd(m, tol: float = FEASIBILITY_TOL, herm_tol: float = IDENTITY_TOL) -> bool:
    """True iff the smallest eigenvalue is at least ``-tol``."""
    m = _require_hermitian(m, herm_tol)
    if m.shape[0] == 0:
        return True
    return bool(np.linalg.eigvalsh((m + m.conj().T) / 2)[0] >= -tol)


def psd_power(m, p: float, tol: float = FEASIBILITY_TOL, cutoff: float = RANK_CUTOFF) -> np.ndarray:
    """Apply ``lambda -> lambda**p`` on the support of a PSD matrix.

    Eigenvalues below ``cutoff * max_eigenvalue`` are treated as zero and
    map to zero, which gives pseudo-inverse semantics for negative ``p``.
    """
    vals, vecs = hermitian_eig(m)
    if vals.size and vals[-1] < -tol:
        raise NotPSDError(f"matrix has eigenvalue {vals[-1]:.3e} < -{tol}")
    top = vals[0] if vals.size else 0.0
    if top <= 0:
        return np.zeros_like(vecs)
    support = vals >= cutoff * top
    powered = np.zeros_like(vals)
    powered[support] = vals[support] ** p
    return (vecs * powered) @ vecs.conj().T
