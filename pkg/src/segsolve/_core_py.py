"""Numpy implementations of the hot kernels.

Fallback used when the compiled extension is unavailable (see
``segsolve.backend``).  All functions act on the interior block of the
extended lattice: ``istart`` is the index of the block origin in the extended
array and ``steps`` holds integer lattice offsets, one row per stencil point.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solveh_banded

NAME = "python"


def apply_integral(ext, istart, ishape, steps, weight):
    """Ball-integral coupling: weighted lattice sum over the stencil."""
    out = np.zeros(ishape)
    if ext.ndim == 1:
        (i0,), (n,) = istart, ishape
        for (s,) in steps.tolist():
            out += ext[i0 + s : i0 + s + n]
    else:
        (i0, j0), (ni, nj) = istart, ishape
        for s0, s1 in steps.tolist():
            out += ext[i0 + s0 : i0 + s0 + ni, j0 + s1 : j0 + s1 + nj]
    out *= weight
    return out


def apply_sup(ext, istart, ishape, steps):
    """Ball-sup coupling: max over the stencil."""
    out = np.full(ishape, -np.inf)
    if ext.ndim == 1:
        (i0,), (n,) = istart, ishape
        for (s,) in steps.tolist():
            np.maximum(out, ext[i0 + s : i0 + s + n], out=out)
    else:
        (i0, j0), (ni, nj) = istart, ishape
        for s0, s1 in steps.tolist():
            np.maximum(out, ext[i0 + s0 : i0 + s0 + ni, j0 + s1 : j0 + s1 + nj], out=out)
    return out


def screened_matvec(x, c, h):
    """Apply (-lap + diag(c)) to an interior block with zero Dirichlet halo."""
    inv_h2 = 1.0 / (h * h)
    d = x.ndim
    y = (2.0 * d * inv_h2) * x + c * x
    if d == 1:
        y[1:] -= inv_h2 * x[:-1]
        y[:-1] -= inv_h2 * x[1:]
    else:
        y[1:, :] -= inv_h2 * x[:-1, :]
        y[:-1, :] -= inv_h2 * x[1:, :]
        y[:, 1:] -= inv_h2 * x[:, :-1]
        y[:, :-1] -= inv_h2 * x[:, 1:]
    return y


def thomas_spd(diag, off, rhs):
    """Solve the SPD tridiagonal system with constant off-diagonal ``off``."""
    n = diag.shape[0]
    ab = np.zeros((2, n))
    ab[0, 1:] = off
    ab[1, :] = diag
    return solveh_banded(ab, rhs, lower=False)
