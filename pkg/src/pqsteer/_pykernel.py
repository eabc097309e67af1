"""Numpy implementations of the hot kernels.

Mirrors ``_ckernel`` function for function; used when the compiled
extension is unavailable or ``PQSTEER_BACKEND=python`` is set.
"""
import numpy as np

NAME = "python"


def kron(a, b):
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def trace_product(a, b):
    """tr(a @ b) without forming the product."""
    return complex(np.einsum("ij,ji->", a, b))


def batched_trace_product(a, b):
    """Sum over k of tr(a[k] @ b[k]) for stacks of square matrices."""
    return complex(np.einsum("kij,kji->", a, b))


def ptrace_pair(m, da, db, keep_first):
    t = np.asarray(m, dtype=complex).reshape(da, db, da, db)
    if keep_first:
        return np.einsum("ijkj->ik", t)
    return np.einsum("ijil->jl", t)


def correlator_max(coeffs):
    """Exact max of sum_zw c[z,w] s_z t_w over all s, t in {-1,+1}.

    Enumerates every joint assignment; no best-response shortcut.
    """
    c = np.asarray(coeffs, dtype=float)
    nz, nw = c.shape
    s = _sign_table(nz)
    t = _sign_table(nw)
    values = s @ c @ t.T
    return float(values.max())


def _sign_table(n):
    idx = np.arange(2 ** n)[:, None]
    bits = (idx >> np.arange(n)[None, :]) & 1
    return 1.0 - 2.0 * bits
