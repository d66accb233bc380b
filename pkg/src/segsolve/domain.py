"""Discrete geometry: box domain, Dirichlet collar, ball stencils.

The solver lattice covers an open box plus a collar of exterior nodes within
unit distance of its boundary.  Species boundary data lives on the collar and
the nonlocal coupling reads from it, so the collar must cover the unit ball
around every interior node; this is asserted exhaustively at construction.
Nodes exactly on the box faces belong to the collar (Dirichlet side).

Every field over the domain is stored as a plain float array of shape
``Domain.shape`` (the extended lattice); outside nodes hold inert zeros.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

INTERIOR = 0
COLLAR = 1
OUTSIDE = 2

_REL_TOL = 1e-9


class GeometryError(ValueError):
    """Inconsistent domain geometry (spacing, commensurability, collar)."""


class SeparationError(ValueError):
    """Boundary supports closer than the kernel radius."""

    def __init__(self, violations):
        self.violations = violations
        lines = ", ".join(
            f"(i={i}, j={j}, node={tuple(round(c, 12) for c in node)}, dist={dist:.6g})"
            for i, j, node, dist in violations[:5]
        )
        more = "" if len(violations) <= 5 else f" and {len(violations) - 5} more"
        super().__init__(f"separation violated: {lines}{more}")


@dataclass(frozen=True, eq=False)
class OffsetSet:
    """Lattice offsets of the discrete ball |delta| <= radius."""

    steps: np.ndarray = field(repr=False)  # (S, d) int64, lexicographically sorted
    h: float
    radius: float
    d: int

    @property
    def weight(self) -> float:
        return self.h**self.d

    def __len__(self) -> int:
        return self.steps.shape[0]


@dataclass(frozen=True, eq=False)
class Domain:
    """Uniform lattice over a box with its unit Dirichlet collar."""

    d: int
    lower: tuple
    upper: tuple
    h: float
    n_cells: tuple  # box cells per axis
    collar_cells: int
    shape: tuple  # extended lattice nodes per axis
    classification: np.ndarray = field(repr=False)
    interior_mask: np.ndarray = field(repr=False)
    collar_mask: np.ndarray = field(repr=False)
    closed_box_mask: np.ndarray = field(repr=False)

    @property
    def interior_start(self) -> tuple:
        return (self.collar_cells + 1,) * self.d

    @property
    def interior_shape(self) -> tuple:
        return tuple(n - 1 for n in self.n_cells)

    @property
    def interior_slices(self) -> tuple:
        return tuple(
            slice(self.collar_cells + 1, self.collar_cells + n) for n in self.n_cells
        )

    @property
    def interior_count(self) -> int:
        return int(np.prod(self.interior_shape))

    def axis_coords(self, axis: int) -> np.ndarray:
        return self.lower[axis] + (np.arange(self.shape[axis]) - self.collar_cells) * self.h

    def node_coords(self) -> np.ndarray:
        """Coordinates of every extended-lattice node, shape (*shape, d)."""
        grids = np.meshgrid(*(self.axis_coords(a) for a in range(self.d)), indexing="ij")
        return np.stack(grids, axis=-1)

    def mask_coords(self, mask: np.ndarray) -> np.ndarray:
        """Coordinates of the nodes selected by a boolean mask, shape (n, d)."""
        return self.node_coords()[mask]

    def boundary_faces(self):
        """Per-face index pairs for one-sided normal differences.

        Yields (axis, side, face_index, inner_index) with ``side`` +-1 and the
        indices as tuples of arrays addressing the face nodes on the box
        boundary and their interior neighbours one cell inward.  Box corners
        and edges carry no interior neighbour and are skipped.
        """
        c, n = self.collar_cells, self.n_cells
        for axis in range(self.d):
            for side, plane in ((-1, c), (+1, c + n[axis])):
                idx_face = []
                idx_in = []
                for a in range(self.d):
                    if a == axis:
                        idx_face.append(np.full(1, plane))
                        idx_in.append(np.full(1, plane - side))
                    else:
                        rng = np.arange(c + 1, c + n[a])
                        idx_face.append(rng)
                        idx_in.append(rng)
                face = tuple(g.ravel() for g in np.meshgrid(*idx_face, indexing="ij"))
                inner = tuple(g.ravel() for g in np.meshgrid(*idx_in, indexing="ij"))
                yield axis, side, face, inner

    def new_field(self) -> np.ndarray:
        return np.zeros(self.shape)


def ball_offsets(h: float, radius: float = 1.0, d: int = 1) -> OffsetSet:
    """Lattice offsets with Euclidean norm <= radius, plus cell weight h**d."""
    if h <= 0:
        raise GeometryError("spacing h must be positive")
    if radius <= 0:
        raise GeometryError("kernel radius must be positive")
    if d not in (1, 2):
        raise GeometryError("only d in {1, 2} supported")
    if radius < h * (1 - _REL_TOL):
        raise GeometryError(f"radius {radius} under-resolved by spacing {h}")
    m = int(np.floor(radius / h + _REL_TOL))
    rng = np.arange(-m, m + 1)
    if d == 1:
        steps = rng[:, None]
    else:
        gi, gj = np.meshgrid(rng, rng, indexing="ij")
        steps = np.stack([gi.ravel(), gj.ravel()], axis=1)
    norm2 = (steps.astype(float) ** 2).sum(axis=1) * h * h
    steps = steps[norm2 <= radius * radius * (1 + _REL_TOL)]
    order = np.lexsort(steps.T[::-1])
    steps = np.ascontiguousarray(steps[order], dtype=np.int64)
    offs = OffsetSet(steps=steps, h=float(h), radius=float(radius), d=d)
    _check_offsets(offs)
    return offs


def _check_offsets(offs: OffsetSet) -> None:
    rows = {tuple(r) for r in offs.steps.tolist()}
    if (0,) * offs.d not in rows:
        raise GeometryError("offset set must contain the zero offset")
    if any(tuple(-x for x in r) not in rows for r in rows):
        raise GeometryError("offset set must be symmetric under negation")


def build_domain(corners, h: float, d: int | None = None) -> Domain:
    """Build the classified lattice for the open box ``corners=(lower, upper)``.

    Requires h <= 1/4 (so the unit collar is resolvable) and box sides that
    are integer multiples of h.  The collar extends floor((1 + h/2)/h) cells
    beyond each face, which covers distance one exactly whenever 1/h is an
    integer and never exceeds 1 + h/2.
    """
    lower, upper = corners
    lower = tuple(float(x) for x in np.atleast_1d(lower))
    upper = tuple(float(x) for x in np.atleast_1d(upper))
    if d is None:
        d = len(lower)
    if d not in (1, 2):
        raise GeometryError("only d in {1, 2} supported")
    if len(lower) != d or len(upper) != d:
        raise GeometryError(f"corner length does not match d={d}")
    if h <= 0:
        raise GeometryError("spacing h must be positive")
    if h > 0.25 + _REL_TOL:
        raise GeometryError(f"collar under-resolved: h={h} exceeds 1/4")

    n_cells = []
    for a in range(d):
        side = upper[a] - lower[a]
        if side <= 0:
            raise GeometryError(f"degenerate box on axis {a}")
        ratio = side / h
        n = round(ratio)
        if n < 2 or abs(ratio - n) > _REL_TOL * max(1.0, ratio):
            raise GeometryError(
                f"box side {side} on axis {a} is not an integer multiple of h={h}"
            )
        n_cells.append(int(n))
    n_cells = tuple(n_cells)

    collar_cells = int(np.floor((1.0 + 0.5 * h) / h + _REL_TOL))
    shape = tuple(n + 2 * collar_cells + 1 for n in n_cells)

    # classification from integer overhang: per-axis cells outside the box
    overhang2 = np.zeros(shape)
    inside_open = np.ones(shape, dtype=bool)
    inside_closed = np.ones(shape, dtype=bool)
    for a in range(d):
        idx = np.arange(shape[a])
        over = np.maximum(collar_cells - idx, idx - (collar_cells + n_cells[a]))
        over = np.maximum(over, 0)
        sl = [None] * d
        sl[a] = slice(None)
        overhang2 = overhang2 + (over.astype(float) ** 2)[tuple(sl)]
        inside_open &= ((idx > collar_cells) & (idx < collar_cells + n_cells[a]))[tuple(sl)]
        inside_closed &= ((idx >= collar_cells) & (idx <= collar_cells + n_cells[a]))[
            tuple(sl)
        ]

    dist = h * np.sqrt(overhang2)
    classification = np.full(shape, OUTSIDE, dtype=np.int8)
    classification[dist <= 1.0 + 0.5 * h + _REL_TOL] = COLLAR
    classification[inside_open] = INTERIOR

    dom = Domain(
        d=d,
        lower=lower,
        upper=upper,
        h=float(h),
        n_cells=n_cells,
        collar_cells=collar_cells,
        shape=shape,
        classification=classification,
        interior_mask=classification == INTERIOR,
        collar_mask=classification == COLLAR,
        closed_box_mask=inside_closed,
    )
    _assert_collar_cover(dom)
    return dom


def _assert_collar_cover(dom: Domain) -> None:
    """Exhaustive check: every unit-ball offset from interior lands in-lattice."""
    offs = ball_offsets(dom.h, 1.0, dom.d)
    start, ishape = dom.interior_start, dom.interior_shape
    for step in offs.steps.tolist():
        sl = tuple(slice(s0 + st, s0 + st + n) for s0, st, n in zip(start, step, ishape))
        if (dom.classification[sl] == OUTSIDE).any():
            raise GeometryError(
                f"collar does not cover offset {tuple(step)}; domain construction bug"
            )


@dataclass(frozen=True, eq=False)
class BoundaryData:
    """Per-species collar values; zero off the profile supports."""

    values: np.ndarray = field(repr=False)  # (m, *shape), nonzero only on collar
    m: int
    support_distances: np.ndarray = field(repr=False)  # (m, m), inf off-diagonal when empty

    @property
    def max_value(self) -> float:
        return float(self.values.max(initial=0.0))

    def species(self, i: int) -> np.ndarray:
        return self.values[i]


def make_boundary_data(
    profiles: Sequence[Callable[..., np.ndarray]], dom: Domain
) -> BoundaryData:
    """Sample nonnegative collar profiles and verify support separation.

    Each profile is called with the per-axis coordinate arrays of the collar
    nodes and must return nonnegative values; off the collar everything is
    zero.  Supports of distinct species must stay at distance greater than
    the unit kernel radius, otherwise a SeparationError lists the offending
    (i, j, node) triples.
    """
    m = len(profiles)
    coords = dom.node_coords()
    collar_pts = coords[dom.collar_mask]
    values = np.zeros((m,) + dom.shape)
    for i, prof in enumerate(profiles):
        vals = np.asarray(prof(*(collar_pts[:, a] for a in range(dom.d))), dtype=float)
        vals = np.broadcast_to(vals, collar_pts.shape[:1]).copy()
        bad = vals < -1e-12
        if bad.any():
            where = collar_pts[bad][0]
            raise ValueError(
                f"profile {i} negative at collar node {tuple(where.tolist())}"
            )
        np.maximum(vals, 0.0, out=vals)
        values[i][dom.collar_mask] = vals

    supports = [collar_pts[values[i][dom.collar_mask] > 0.0] for i in range(m)]
    dists = np.full((m, m), np.inf)
    violations = []
    for i in range(m):
        for j in range(i + 1, m):
            if len(supports[i]) == 0 or len(supports[j]) == 0:
                continue
            diff = supports[i][:, None, :] - supports[j][None, :, :]
            pair = np.sqrt((diff**2).sum(axis=-1))
            kmin = np.unravel_index(np.argmin(pair), pair.shape)
            dmin = float(pair[kmin])
            dists[i, j] = dists[j, i] = dmin
            if dmin <= 1.0 + 1e-12:
                violations.append((i, j, tuple(supports[i][kmin[0]].tolist()), dmin))
    if violations:
        raise SeparationError(violations)
    return BoundaryData(values=values, m=m, support_distances=dists)
