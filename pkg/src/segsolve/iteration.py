"""Constructive solver for the coupled competition system.

Alternates screened solves with the nonlocal coefficient frozen at the
previous family; all species advance together from the same frozen state
(Jacobi across species), which makes the even iterates an upper family and
the odd iterates a lower family squeezing the solution between them.  The
returned solution is the average of the final even/odd pair.  A damped
fixed-point solver provides independent solution candidates from arbitrary
positive starts, which is how uniqueness is cross-checked.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .domain import BoundaryData, Domain
from .elliptic import (
    DEFAULT_TOL,
    SolverError,
    dirichlet_flux_sum,
    discrete_laplacian,
    harmonic_extension,
    screened_solve,
)
from .kernels import KernelSpec, coupling_block, interaction_coefficient

DEFAULT_TOL_OUTER = 1e-8
DEFAULT_HISTORY_CAP = 64


def worker_count() -> int:
    """Worker cap from SEGSOLVE_THREADS (default 1: serial, deterministic)."""
    raw = os.environ.get("SEGSOLVE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(n, 1)


def _map_species(fn, m: int) -> list:
    workers = min(worker_count(), m)
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, range(m)))
    return [fn(i) for i in range(m)]


@dataclass
class IterationState:
    """Current and recent iterates of the per-species family."""

    k: int
    fields: np.ndarray  # (m, *shape) iterate k
    prev: np.ndarray | None = None  # iterate k-1
    prev2: np.ndarray | None = None  # iterate k-2
    gaps: list = field(default_factory=list)  # max_i |u^k - u^(k-2)|_inf per k
    history: list = field(default_factory=list)  # [(k, fields)] capped
    stats: list = field(default_factory=list)  # (k, species, gap, min, max, flux)
    monotone_log: list = field(default_factory=list)  # (k, magnitude) gap increases
    history_cap: int = DEFAULT_HISTORY_CAP


@dataclass
class AuditViolation:
    kind: str  # "even-chain" | "odd-chain" | "odd-above-even"
    k_first: int
    k_second: int
    species: int
    node: tuple
    magnitude: float


@dataclass
class AuditReport:
    slack: float
    comparisons: int
    total_violations: int
    max_violation: float
    violations: list  # capped listing of AuditViolation


@dataclass
class Solution:
    """Converged per-species fields plus convergence bookkeeping."""

    fields: np.ndarray
    eps: float
    kernel_variant: str
    outer_iterations: int
    final_gap: float
    residual: float
    residual_bound: float
    method: str
    uniqueness_note: str
    upper: np.ndarray | None = None
    lower: np.ndarray | None = None
    gap_history: list = field(default_factory=list)
    stats: list = field(default_factory=list)
    audit: AuditReport | None = None


def _uniqueness_note(variant: str) -> str:
    if variant == "integral":
        return "sandwich guarantee applies"
    return "exploratory: sup kernel has no uniqueness guarantee"


def _record_stats(state: IterationState, dom: Domain, species_gaps) -> None:
    blk = dom.interior_slices
    for i in range(state.fields.shape[0]):
        gap_i = species_gaps[i] if species_gaps is not None else float("nan")
        u = state.fields[i]
        state.stats.append(
            (
                state.k,
                i,
                gap_i,
                float(u[blk].min()),
                float(u[blk].max()),
                dirichlet_flux_sum(u, dom),
            )
        )


def _push_history(state: IterationState) -> None:
    state.history.append((state.k, state.fields.copy()))
    if len(state.history) > state.history_cap:
        del state.history[:-4]


def initial_state(
    bd: BoundaryData,
    dom: Domain,
    lin_tol: float = DEFAULT_TOL,
    method: str = "auto",
    history_cap: int = DEFAULT_HISTORY_CAP,
) -> IterationState:
    """Family of harmonic extensions of the boundary data (iterate zero)."""
    fields = np.stack(
        _map_species(
            lambda i: harmonic_extension(bd.species(i), dom, tol=lin_tol, method=method),
            bd.m,
        )
    )
    state = IterationState(k=0, fields=fields, history_cap=history_cap)
    _push_history(state)
    _record_stats(state, dom, None)
    return state


def picard_step(
    state: IterationState,
    eps: float,
    dom: Domain,
    ks: KernelSpec,
    bd: BoundaryData,
    lin_tol: float = DEFAULT_TOL,
    method: str = "auto",
) -> IterationState:
    """One frozen-coefficient sweep: every species solves against iterate k."""
    frozen = state.fields

    def solve_one(i):
        c = interaction_coefficient(frozen, i, eps, dom, ks)
        u, _ = screened_solve(c, bd.species(i), dom, tol=lin_tol, method=method)
        return u

    fields = np.stack(_map_species(solve_one, frozen.shape[0]))
    _check_positive(fields, dom, lin_tol)

    new = IterationState(
        k=state.k + 1,
        fields=fields,
        prev=state.fields,
        prev2=state.prev,
        gaps=list(state.gaps),
        history=list(state.history),
        stats=list(state.stats),
        monotone_log=list(state.monotone_log),
        history_cap=state.history_cap,
    )
    species_gaps = None
    if new.prev2 is not None:
        blk = dom.interior_slices
        species_gaps = [
            float(np.abs(fields[i][blk] - new.prev2[i][blk]).max())
            for i in range(fields.shape[0])
        ]
        g = max(species_gaps)
        new.gaps.append(g)
        # the same-parity gap should shrink once the interleaving settles
        if len(new.gaps) >= 4 and g > new.gaps[-3] * (1 + 1e-12) + 1e-15:
            new.monotone_log.append((new.k, g - new.gaps[-3]))
    _push_history(new)
    _record_stats(new, dom, species_gaps)
    return new


def _check_positive(fields: np.ndarray, dom: Domain, lin_tol: float) -> None:
    scale = max(float(fields.max(initial=0.0)), 1.0)
    floor = float(fields.min())
    if floor < -1e6 * lin_tol * scale:
        raise SolverError(
            f"iterate lost positivity (min {floor:.3e}); M-matrix solve violated"
        )


def nonlinear_residual(fields: np.ndarray, eps: float, dom: Domain, ks: KernelSpec) -> float:
    """Sup-norm defect of the coupled system at the given family."""
    blk = dom.interior_slices
    worst = 0.0
    for i in range(fields.shape[0]):
        lap = discrete_laplacian(fields[i], dom)[blk]
        c = coupling_block(fields, i, eps, dom, ks)
        worst = max(worst, float(np.abs(lap - c * fields[i][blk]).max()))
    return worst


def _coupling_lipschitz(ks: KernelSpec) -> float:
    """Sup-norm Lipschitz constant of the coupling: ball volume or one."""
    if ks.variant == "integral":
        return len(ks.offsets) * ks.offsets.weight
    return 1.0


def _linear_residual_scale(bd: BoundaryData, dom: Domain, lin_tol: float) -> float:
    return max(lin_tol, 1e-15) * max(bd.max_value, 1.0) * 2.0 * dom.d / dom.h**2


def run_monotone(
    eps: float,
    dom: Domain,
    bd: BoundaryData,
    ks: KernelSpec,
    tol_outer: float = DEFAULT_TOL_OUTER,
    lin_tol: float = DEFAULT_TOL,
    max_outer: int = 512,
    min_outer: int = 0,
    history_cap: int = DEFAULT_HISTORY_CAP,
    audit: bool = True,
    audit_slack: float | None = None,
    method: str = "auto",
) -> Solution:
    """Run the interleaving scheme until the even/odd families meet.

    Terminates when the even iterate and its odd successor differ by less
    than ``tol_outer`` in the sup norm (after at least ``min_outer`` steps)
    and returns the average of that pair.  The reported nonlinear residual is
    checked against an a-posteriori bound built from the last same-parity
    gap, the coupling Lipschitz constant and the linear-solve tolerance.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    state = initial_state(bd, dom, lin_tol=lin_tol, method=method, history_cap=history_cap)
    blk = dom.interior_slices
    gap = float("inf")
    converged = False
    while state.k < max_outer:
        state = picard_step(state, eps, dom, ks, bd, lin_tol=lin_tol, method=method)
        if state.k % 2 == 1:
            gap = float(np.abs(state.fields[(slice(None),) + blk] - state.prev[(slice(None),) + blk]).max())
            if gap < tol_outer and state.k >= min_outer:
                converged = True
                break
    if not converged:
        raise SolverError(
            f"monotone iteration did not meet tol_outer={tol_outer} within "
            f"{max_outer} steps (last even/odd gap {gap:.3e}); "
            f"same-parity gap history tail: {[f'{g:.3e}' for g in state.gaps[-6:]]}"
        )

    upper = state.prev  # even family
    lower = state.fields  # odd family
    avg = 0.5 * (upper + lower)
    residual = nonlinear_residual(avg, eps, dom, ks)
    odd_gap = state.gaps[-1] if state.gaps else gap
    bound = 50.0 * (
        bd.max_value * (bd.m - 1) * _coupling_lipschitz(ks) * max(odd_gap, gap) / eps
        + _linear_residual_scale(bd, dom, lin_tol)
    )
    if residual > bound:
        raise SolverError(
            f"nonlinear residual {residual:.3e} exceeds its bound {bound:.3e}"
        )
    slack = audit_slack if audit_slack is not None else 10.0 * tol_outer
    report = audit_interleaving(state.history, slack, dom) if audit else None
    return Solution(
        fields=avg,
        eps=eps,
        kernel_variant=ks.variant,
        outer_iterations=state.k,
        final_gap=gap,
        residual=residual,
        residual_bound=bound,
        method="monotone",
        uniqueness_note=_uniqueness_note(ks.variant),
        upper=upper,
        lower=lower,
        gap_history=list(state.gaps),
        stats=list(state.stats),
        audit=report,
    )


def audit_interleaving(
    history: list, slack: float, dom: Domain, max_listed: int = 1000
) -> AuditReport:
    """Verify the stored iterates interleave: evens fall, odds rise, odds stay
    below every stored even.  Violations beyond ``slack`` are reported with
    location and magnitude; the audit never raises.
    """
    if len(history) < 4:
        raise ValueError("interleaving audit needs at least 4 stored iterates")
    blk = dom.interior_slices
    evens = [(k, f) for k, f in history if k % 2 == 0]
    odds = [(k, f) for k, f in history if k % 2 == 1]
    m = history[0][1].shape[0]
    violations: list[AuditViolation] = []
    comparisons = 0
    max_violation = 0.0

    def scan(kind, k_a, k_b, diff_field, species):
        # diff_field > slack marks a violation
        nonlocal comparisons, max_violation
        comparisons += 1
        worst = float(diff_field.max())
        if worst > slack:
            max_violation = max(max_violation, worst)
            flat = int(np.argmax(diff_field))
            node = np.unravel_index(flat, diff_field.shape)
            coord = tuple(
                float(dom.axis_coords(a)[node[a] + dom.interior_start[a]])
                for a in range(dom.d)
            )
            if len(violations) < max_listed:
                violations.append(
                    AuditViolation(kind, k_a, k_b, species, coord, worst)
                )
            return 1
        return 0

    total = 0
    for (ka, fa), (kb, fb) in zip(evens, evens[1:]):
        for i in range(m):
            total += scan("even-chain", ka, kb, fb[i][blk] - fa[i][blk], i)
    for (ka, fa), (kb, fb) in zip(odds, odds[1:]):
        for i in range(m):
            total += scan("odd-chain", ka, kb, fa[i][blk] - fb[i][blk], i)
    for ko, fo in odds:
        for ke, fe in evens:
            for i in range(m):
                total += scan("odd-above-even", ko, ke, fo[i][blk] - fe[i][blk], i)
    return AuditReport(
        slack=slack,
        comparisons=comparisons,
        total_violations=total,
        max_violation=max_violation,
        violations=violations,
    )


def solve_fixed_point(
    eps: float,
    dom: Domain,
    bd: BoundaryData,
    ks: KernelSpec,
    init: np.ndarray,
    damping: float = 0.5,
    tol: float = 1e-9,
    lin_tol: float = DEFAULT_TOL,
    max_iter: int = 2048,
    method: str = "auto",
) -> Solution:
    """Damped successive substitution from an arbitrary positive start.

    Serves as the independent solution candidate for the uniqueness check:
    whatever admissible start it is given, it must land on the same solution
    as the interleaving scheme.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    fields = np.array(init, dtype=float, copy=True)
    if fields.shape != (bd.m,) + dom.shape:
        raise ValueError(f"init must have shape {(bd.m,) + dom.shape}")
    if float(fields.min()) < -1e-12:
        raise ValueError("init must be nonnegative")
    scale = max(bd.max_value, 1.0)
    collar_gap = float(
        np.abs(fields[:, dom.collar_mask] - bd.values[:, dom.collar_mask]).max()
    )
    if collar_gap > 1e-9 * scale:
        raise ValueError(
            f"init collar values differ from the boundary data by {collar_gap:.3e}"
        )

    blk = (slice(None),) + dom.interior_slices
    delta0 = None
    delta = float("inf")
    deltas = []
    for it in range(1, max_iter + 1):
        def solve_one(i):
            c = interaction_coefficient(fields, i, eps, dom, ks)
            u, _ = screened_solve(c, bd.species(i), dom, tol=lin_tol, method=method)
            return u

        stepped = np.stack(_map_species(solve_one, bd.m))
        new = (1.0 - damping) * fields + damping * stepped
        delta = float(np.abs(new[blk] - fields[blk]).max())
        deltas.append(delta)
        fields = new
        if delta0 is None:
            delta0 = delta
        if delta < tol:
            break
        if not np.isfinite(delta) or delta > 1e3 * max(delta0, scale):
            raise SolverError(
                f"fixed-point iteration diverged at step {it} (delta {delta:.3e})"
            )
    else:
        raise SolverError(
            f"fixed-point iteration did not reach tol={tol} in {max_iter} steps; "
            f"delta tail: {[f'{d:.3e}' for d in deltas[-6:]]}"
        )

    residual = nonlinear_residual(fields, eps, dom, ks)
    bound = 50.0 * (
        (2.0 * dom.d / dom.h**2 + _max_coupling(fields, eps, dom, ks)) * delta / damping
        + _linear_residual_scale(bd, dom, lin_tol)
    )
    if residual > bound:
        raise SolverError(
            f"fixed-point residual {residual:.3e} exceeds its bound {bound:.3e}"
        )
    return Solution(
        fields=fields,
        eps=eps,
        kernel_variant=ks.variant,
        outer_iterations=it,
        final_gap=delta,
        residual=residual,
        residual_bound=bound,
        method="fixed_point",
        uniqueness_note=_uniqueness_note(ks.variant),
        gap_history=deltas,
    )


def _max_coupling(fields, eps, dom, ks) -> float:
    worst = 0.0
    for i in range(fields.shape[0]):
        worst = max(worst, float(coupling_block(fields, i, eps, dom, ks).max(initial=0.0)))
    return worst


def sandwich_check(solution: Solution, candidate: np.ndarray, dom: Domain, slack: float) -> float:
    """Worst violation of lower - slack <= candidate <= upper + slack."""
    if solution.upper is None or solution.lower is None:
        raise ValueError("sandwich check needs a solution from the interleaving scheme")
    blk = (slice(None),) + dom.interior_slices
    over = float((candidate[blk] - solution.upper[blk]).max())
    under = float((solution.lower[blk] - candidate[blk]).max())
    return max(over - slack, under - slack, 0.0)
