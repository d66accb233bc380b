"""Nonlocal ball couplings between species.

Two variants of the coupling H(u): the ball integral (lattice sum times the
cell volume) and the ball sup (max over the stencil).  Both are monotone in
the field, which is what every comparison argument downstream rests on; the
integral variant is additionally linear and has an exactly symmetric lattice
kernel because the offset set is symmetric under negation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import backend
from .domain import OUTSIDE, Domain, OffsetSet, ball_offsets

VARIANTS = ("integral", "sup")


class KernelCoverageError(RuntimeError):
    """A stencil read would leave the collar: the domain cannot support it."""


@dataclass(frozen=True, eq=False)
class KernelSpec:
    variant: str
    radius: float
    offsets: OffsetSet


def make_kernel(dom: Domain, variant: str = "integral", radius: float = 1.0) -> KernelSpec:
    """Build a kernel for the domain, checking the collar covers its stencil."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown kernel variant {variant!r}; expected {VARIANTS}")
    offs = ball_offsets(dom.h, radius, dom.d)
    _assert_coverage(dom, offs)
    return KernelSpec(variant=variant, radius=float(radius), offsets=offs)


def _assert_coverage(dom: Domain, offs: OffsetSet) -> None:
    start, ishape = dom.interior_start, dom.interior_shape
    for step in offs.steps.tolist():
        sl = tuple(slice(s0 + st, s0 + st + n) for s0, st, n in zip(start, step, ishape))
        try:
            block = dom.classification[sl]
        except IndexError:
            block = None
        if block is None or block.shape != tuple(ishape) or (block == OUTSIDE).any():
            raise KernelCoverageError(
                f"stencil offset {tuple(step)} reads outside the collar; "
                f"radius {offs.radius} is not covered by the unit collar"
            )


def apply_kernel(u: np.ndarray, dom: Domain, spec: KernelSpec) -> np.ndarray:
    """Evaluate H(u) at every interior node; zero elsewhere."""
    if spec.variant == "integral":
        block = backend.apply_integral(
            u, dom.interior_start, dom.interior_shape, spec.offsets.steps, spec.offsets.weight
        )
    else:
        block = backend.apply_sup(u, dom.interior_start, dom.interior_shape, spec.offsets.steps)
    out = dom.new_field()
    out[dom.interior_slices] = block
    return out


def coupling_block(fields: np.ndarray, i: int, eps: float, dom: Domain, spec: KernelSpec) -> np.ndarray:
    """Interior-block coefficient (1/eps) * sum_{j != i} H(u_j)."""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    acc = np.zeros(dom.interior_shape)
    for j in range(fields.shape[0]):
        if j == i:
            continue
        if spec.variant == "integral":
            acc += backend.apply_integral(
                fields[j], dom.interior_start, dom.interior_shape,
                spec.offsets.steps, spec.offsets.weight,
            )
        else:
            acc += backend.apply_sup(
                fields[j], dom.interior_start, dom.interior_shape, spec.offsets.steps
            )
    acc /= eps
    return acc


def interaction_coefficient(
    fields: np.ndarray, i: int, eps: float, dom: Domain, spec: KernelSpec
) -> np.ndarray:
    """Competition coefficient c_i = (1/eps) sum_{j != i} H(u_j) as a field."""
    out = dom.new_field()
    out[dom.interior_slices] = coupling_block(fields, i, eps, dom, spec)
    return out
