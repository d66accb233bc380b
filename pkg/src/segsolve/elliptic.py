"""Dirichlet linear solves on the lattice.

Discrete Laplacian, harmonic extension of collar data, and the screened
problem lap(u) = c(x) u with nonnegative coefficient.  The system matrix
(-lap + diag c) on the interior unknowns is a symmetric M-matrix, so solves
preserve nonnegativity and obey the discrete comparison principle.

Solvers: ``thomas`` (1D tridiagonal, the default in 1D; cancellation-free on
M-matrix systems, so exponentially small tails keep componentwise relative
accuracy), ``cg`` (Jacobi-preconditioned conjugate gradients, default in 2D),
``splu`` (2D sparse direct), and a dense direct oracle for cross-checks up to
4000 unknowns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .domain import COLLAR, Domain

DEFAULT_TOL = 1e-10
_MAX_DENSE = 4000


@dataclass
class LinearSolveReport:
    method: str
    iterations: int
    relative_residual: float


class SolverError(RuntimeError):
    """Linear or nonlinear solve failed; carries the last report."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


def discrete_laplacian(u: np.ndarray, dom: Domain) -> np.ndarray:
    """(2d+1)-point Laplacian at interior nodes; zero elsewhere."""
    inv_h2 = 1.0 / (dom.h * dom.h)
    block = dom.interior_slices
    acc = -2.0 * dom.d * u[block]
    for a in range(dom.d):
        for step in (-1, +1):
            sl = list(block)
            s = sl[a]
            sl[a] = slice(s.start + step, s.stop + step)
            acc = acc + u[tuple(sl)]
    out = dom.new_field()
    out[block] = acc * inv_h2
    return out


def dirichlet_flux_sum(u: np.ndarray, dom: Domain) -> float:
    """Telescoped boundary flux: sum over interior of lap(u) times h^d.

    Interior-interior stencil legs cancel, leaving the collar-facing legs,
    so this equals the discrete outward-flux sum through the boundary.
    """
    block = dom.interior_slices
    total = 0.0
    for a in range(dom.d):
        for step in (-1, +1):
            sl = list(block)
            s = sl[a]
            sl[a] = slice(s.start + step, s.stop + step)
            sl = tuple(sl)
            is_collar = dom.classification[sl] == COLLAR
            if is_collar.any():
                total += float((u[sl] - u[block])[is_collar].sum())
    return total * dom.h ** (dom.d - 2)


def _collar_rhs_block(collar_values: np.ndarray, dom: Domain) -> np.ndarray:
    """Dirichlet contributions of the collar neighbours, as an interior block."""
    inv_h2 = 1.0 / (dom.h * dom.h)
    block = dom.interior_slices
    rhs = np.zeros(dom.interior_shape)
    for a in range(dom.d):
        for step in (-1, +1):
            sl = list(block)
            s = sl[a]
            sl[a] = slice(s.start + step, s.stop + step)
            sl = tuple(sl)
            is_collar = dom.classification[sl] == COLLAR
            if is_collar.any():
                rhs += np.where(is_collar, collar_values[sl], 0.0) * inv_h2
    return rhs


def _embed(block: np.ndarray, collar_values: np.ndarray, dom: Domain) -> np.ndarray:
    out = dom.new_field()
    out[dom.collar_mask] = collar_values[dom.collar_mask]
    out[dom.interior_slices] = block
    return out


def _solve_cg(cblock, rhs, dom, tol, max_iter=None):
    n = rhs.size
    if max_iter is None:
        max_iter = 20 * n + 200
    bnorm = float(np.linalg.norm(rhs))
    if bnorm == 0.0:
        return np.zeros_like(rhs), 0, 0.0
    x = np.zeros_like(rhs)
    r = rhs.copy()
    minv = 1.0 / (2.0 * dom.d / (dom.h * dom.h) + cblock)
    z = r * minv
    p = z.copy()
    rz = float((r * z).sum())
    for it in range(1, max_iter + 1):
        ap = backend.screened_matvec(p, cblock, dom.h)
        alpha = rz / float((p * ap).sum())
        x += alpha * p
        r -= alpha * ap
        rnorm = float(np.linalg.norm(r))
        if rnorm <= tol * bnorm:
            return x, it, rnorm / bnorm
        z = r * minv
        rz_new = float((r * z).sum())
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(
        f"cg did not converge in {max_iter} iterations "
        f"(relative residual {rnorm / bnorm:.3e})",
        LinearSolveReport("cg", max_iter, rnorm / bnorm),
    )


def _solve_thomas(cblock, rhs, dom):
    inv_h2 = 1.0 / (dom.h * dom.h)
    diag = 2.0 * inv_h2 + cblock
    return backend.thomas_spd(diag, -inv_h2, rhs)


def _assemble_sparse(cblock, dom):
    from scipy import sparse

    inv_h2 = 1.0 / (dom.h * dom.h)
    shape = dom.interior_shape
    n = int(np.prod(shape))
    idx = np.arange(n).reshape(shape)
    rows = [np.arange(n)]
    cols = [np.arange(n)]
    data = [2.0 * dom.d * inv_h2 + cblock.ravel()]
    for a in range(dom.d):
        lo = [slice(None)] * dom.d
        hi = [slice(None)] * dom.d
        lo[a] = slice(None, -1)
        hi[a] = slice(1, None)
        r = idx[tuple(lo)].ravel()
        c2 = idx[tuple(hi)].ravel()
        rows += [r, c2]
        cols += [c2, r]
        off = np.full(r.size, -inv_h2)
        data += [off, off]
    mat = sparse.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    return mat.tocsc()


def _solve_splu(cblock, rhs, dom):
    from scipy.sparse.linalg import splu

    lu = splu(_assemble_sparse(cblock, dom))
    return lu.solve(rhs.ravel()).reshape(dom.interior_shape)


def _relative_residual(cblock, x, rhs, dom) -> float:
    bnorm = float(np.linalg.norm(rhs))
    if bnorm == 0.0:
        return 0.0
    r = rhs - backend.screened_matvec(x, cblock, dom.h)
    return float(np.linalg.norm(r)) / bnorm


def screened_solve(
    c: np.ndarray,
    collar_values: np.ndarray,
    dom: Domain,
    tol: float = DEFAULT_TOL,
    method: str = "auto",
    source: np.ndarray | None = None,
) -> tuple[np.ndarray, LinearSolveReport]:
    """Solve lap(u) = c u - source at interior nodes with collar Dirichlet data.

    c must be nonnegative on the interior.  Returns the full-lattice field
    (interior solution, collar data, zero outside) and a solve report.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    cblock = np.ascontiguousarray(c[dom.interior_slices])
    if cblock.min(initial=0.0) < 0:
        raise ValueError("screened coefficient must be nonnegative")
    rhs = _collar_rhs_block(collar_values, dom)
    if source is not None:
        rhs = rhs + source[dom.interior_slices]
    if method == "auto":
        method = "thomas" if dom.d == 1 else "cg"
    if method == "thomas":
        if dom.d != 1:
            raise ValueError("thomas solver is 1D only")
        x = _solve_thomas(cblock, rhs, dom)
        report = LinearSolveReport("thomas", 1, _relative_residual(cblock, x, rhs, dom))
    elif method == "cg":
        x, its, rel = _solve_cg(cblock, rhs, dom, tol)
        report = LinearSolveReport("cg", its, rel)
    elif method == "splu":
        x = _solve_splu(cblock, rhs, dom)
        report = LinearSolveReport("splu", 1, _relative_residual(cblock, x, rhs, dom))
    else:
        raise ValueError(f"unknown method {method!r}")
    return _embed(x, collar_values, dom), report


def harmonic_extension(
    collar_values: np.ndarray,
    dom: Domain,
    tol: float = DEFAULT_TOL,
    method: str = "auto",
) -> np.ndarray:
    """Discretely harmonic interior field matching the collar data."""
    u, _ = screened_solve(dom.new_field(), collar_values, dom, tol=tol, method=method)
    return u


def screened_solve_dense(
    c: np.ndarray, collar_values: np.ndarray, dom: Domain, source: np.ndarray | None = None
) -> np.ndarray:
    """Dense direct oracle for the screened solve (n <= 4000 unknowns)."""
    n = dom.interior_count
    if n > _MAX_DENSE:
        raise ValueError(f"dense oracle limited to {_MAX_DENSE} unknowns, got {n}")
    cblock = c[dom.interior_slices]
    mat = _assemble_sparse(cblock, dom).toarray()
    rhs = _collar_rhs_block(collar_values, dom)
    if source is not None:
        rhs = rhs + source[dom.interior_slices]
    x = np.linalg.solve(mat, rhs.ravel()).reshape(dom.interior_shape)
    return _embed(x, collar_values, dom)
