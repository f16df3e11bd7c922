"""Fractional partial derivatives, gradients and divergences on box grids.

Every operator applies a 1D operator from :mod:`fracvar.frac1d` to each grid
line of one axis. On a box all lines along an axis share the same segment,
so one matrix serves the whole axis.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from fracvar.domain import BoxDomain, SpatialField, apply_along_axis, spatial_weights
from fracvar.frac1d import (
    Direction,
    FracOrder,
    Scheme,
    as_order,
    caputo_matrix,
    gamma_fn,
    gl_matrix,
)
from fracvar.report import CheckReport

VectorField = list[SpatialField]


class Kind(str, enum.Enum):
    RL = "RL"
    CAPUTO = "Caputo"


@dataclass(frozen=True)
class FracVecKind:
    kind: Kind = Kind.CAPUTO
    direction: Direction = Direction.FORWARD

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "direction", Direction(self.direction))


CAPUTO_FORWARD = FracVecKind(Kind.CAPUTO, Direction.FORWARD)
CAPUTO_BACKWARD = FracVecKind(Kind.CAPUTO, Direction.BACKWARD)
RL_FORWARD = FracVecKind(Kind.RL, Direction.FORWARD)
RL_BACKWARD = FracVecKind(Kind.RL, Direction.BACKWARD)


def _face(ndim: int, axis: int, index: int) -> tuple:
    sl: list = [slice(None)] * ndim
    sl[axis] = index
    return tuple(sl)


def partial_frac_values(values: np.ndarray, domain: BoxDomain, axis: int,
                        alpha: float | FracOrder, kind: FracVecKind,
                        scheme: Scheme | str = Scheme.L1,
                        offset: int = 0) -> np.ndarray:
    """Array version of :func:`partial_frac`; ``offset`` shifts the spatial
    axes (e.g. 1 for arrays with a leading time axis)."""
    alpha = as_order(alpha)
    scheme = Scheme(scheme)
    n, h = domain.n[axis], domain.spacing[axis]
    ax = axis + offset

    if kind.kind == Kind.CAPUTO:
        if scheme == Scheme.L1_PLUS_BOUNDARY:
            scheme = Scheme.L1
        return apply_along_axis(caputo_matrix(n, h, alpha, kind.direction, scheme),
                                values, ax)

    origin = 0 if kind.direction == Direction.FORWARD else n
    face = values[_face(values.ndim, ax, origin)]
    if scheme == Scheme.GL:
        out = apply_along_axis(gl_matrix(n, h, alpha, kind.direction), values, ax)
    else:
        out = apply_along_axis(caputo_matrix(n, h, alpha, kind.direction, Scheme.L1),
                               values, ax)
        dist = h * np.arange(n + 1, dtype=np.float64)
        if kind.direction == Direction.BACKWARD:
            dist = dist[::-1]
        with np.errstate(divide="ignore"):
            kernel = dist ** (-alpha) / gamma_fn(1.0 - alpha)
        kernel[origin] = 0.0
        shape = [1] * values.ndim
        shape[ax] = n + 1
        out = out + kernel.reshape(shape) * np.expand_dims(face, ax)

    # singular originating face: flag where the data does not vanish
    scale = max(1.0, float(np.max(np.abs(values)))) if values.size else 1.0
    nonzero = np.abs(face) > 1.0e-13 * scale
    out[_face(out.ndim, ax, origin)] = np.where(
        nonzero, np.copysign(math.inf, face), 0.0)
    return out


def partial_frac(field: SpatialField, axis: int, alpha: float | FracOrder,
                 kind: FracVecKind = CAPUTO_FORWARD,
                 scheme: Scheme | str = Scheme.L1) -> SpatialField:
    """Fractional partial derivative along ``axis``.

    RL outputs carry signed infinities on the originating face wherever the
    field does not vanish there.
    """
    field.domain._check_axis(axis)
    values = partial_frac_values(field.values, field.domain, axis, alpha, kind, scheme)
    return SpatialField(field.domain, values)


def frac_gradient(field: SpatialField, alpha: float | FracOrder,
                  kind: FracVecKind = CAPUTO_FORWARD,
                  scheme: Scheme | str = Scheme.L1) -> VectorField:
    return [partial_frac(field, i, alpha, kind, scheme)
            for i in range(field.domain.dim)]


def frac_divergence(vfield: Sequence[SpatialField], alpha: float | FracOrder,
                    kind: FracVecKind = RL_FORWARD,
                    scheme: Scheme | str = Scheme.L1) -> SpatialField:
    domain = _common_domain(vfield)
    total = np.zeros(domain.shape)
    for i, comp in enumerate(vfield):
        total = total + partial_frac(comp, i, alpha, kind, scheme).values
    return SpatialField(domain, total)


def componentwise(gamma: Sequence[float], vfield: Sequence[SpatialField]) -> VectorField:
    """``gamma x v = (gamma_1 v_1, ..., gamma_d v_d)``."""
    domain = _common_domain(vfield)
    if len(gamma) != domain.dim:
        raise ValueError("gamma must have one entry per axis")
    return [SpatialField(domain, float(g) * comp.values) for g, comp in zip(gamma, vfield)]


def _common_domain(vfield: Sequence[SpatialField]) -> BoxDomain:
    if not vfield:
        raise ValueError("empty vector field")
    domain = vfield[0].domain
    if any(comp.domain != domain for comp in vfield):
        raise ValueError("vector field components live on different grids")
    if len(vfield) != domain.dim:
        raise ValueError(f"expected {domain.dim} components, got {len(vfield)}")
    return domain


# {{{ classical operators

def forward_difference_matrix(n: int, h: float) -> np.ndarray:
    """``(u_{j+1} - u_j) / h`` for ``j < n``; the last row is zero."""
    mat = (np.eye(n + 1, k=1) - np.eye(n + 1)) / h
    mat[-1, :] = 0.0
    return mat


def backward_difference_matrix(n: int, h: float) -> np.ndarray:
    """``(w_j - w_{j-1}) / h`` with ``w_{-1} = 0`` (zero extension)."""
    return (np.eye(n + 1) - np.eye(n + 1, k=-1)) / h


def centered_difference_matrix(n: int, h: float) -> np.ndarray:
    """Second-order first derivative, one-sided second order at the ends."""
    mat = (np.eye(n + 1, k=1) - np.eye(n + 1, k=-1)) / (2.0 * h)
    mat[0, :3] = np.array([-3.0, 4.0, -1.0]) / (2.0 * h)
    mat[-1, -3:] = np.array([1.0, -4.0, 3.0]) / (2.0 * h)
    return mat


_GRAD_SCHEMES = {"forward_diff": forward_difference_matrix,
                 "centered": centered_difference_matrix}
_DIV_SCHEMES = {"backward_diff": backward_difference_matrix,
                "centered": centered_difference_matrix}


def classical_grad(field: SpatialField, scheme: str = "forward_diff") -> VectorField:
    make = _GRAD_SCHEMES[scheme]
    domain = field.domain
    return [SpatialField(domain, apply_along_axis(
        make(domain.n[i], domain.spacing[i]), field.values, i))
        for i in range(domain.dim)]


def classical_div(vfield: Sequence[SpatialField], scheme: str = "backward_diff") -> SpatialField:
    make = _DIV_SCHEMES[scheme]
    domain = _common_domain(vfield)
    total = np.zeros(domain.shape)
    for i, comp in enumerate(vfield):
        total = total + apply_along_axis(
            make(domain.n[i], domain.spacing[i]), comp.values, i)
    return SpatialField(domain, total)


# }}}


# {{{ lemma checks

def half_div_grad_matrix(n: int, h: float, scheme: Scheme | str = Scheme.GL) -> np.ndarray:
    """1D matrix of the forward RL half derivative composed with the forward
    Caputo half derivative."""
    scheme = Scheme(scheme)
    inner = caputo_matrix(n, h, 0.5, Direction.FORWARD, scheme)
    if scheme == Scheme.GL:
        outer = gl_matrix(n, h, 0.5, Direction.FORWARD)
    else:
        # the inner output vanishes at the origin, so RL = Caputo here
        outer = caputo_matrix(n, h, 0.5, Direction.FORWARD, Scheme.L1)
    return outer @ inner


def check_div_grad(field: SpatialField, gamma: Sequence[float]) -> CheckReport:
    """Compare ``div^{1/2}(gamma x cgrad^{1/2} u)`` with ``gamma . grad u``.

    The L1 variant is compared with centered differences at interior nodes,
    the GL variant with backward differences, which it reproduces exactly.
    """
    domain = field.domain
    gamma = [float(g) for g in gamma]
    interior = domain.interior_mask()
    norms = {}
    for scheme, classical in ((Scheme.L1, "centered"), (Scheme.GL, "backward")):
        grad = frac_gradient(field, 0.5, CAPUTO_FORWARD, scheme)
        div = frac_divergence(componentwise(gamma, grad), 0.5, RL_FORWARD, scheme)
        if classical == "centered":
            ref = classical_grad(field, "centered")
        else:
            ref = [SpatialField(domain, apply_along_axis(
                backward_difference_matrix(domain.n[i], domain.spacing[i]),
                field.values, i)) for i in range(domain.dim)]
        directional = sum(g * r.values for g, r in zip(gamma, ref))
        gap = np.abs(div.values - directional)[interior]
        norms[scheme.value] = float(np.max(gap)) if gap.size else 0.0
        if scheme == Scheme.GL:
            norms["GL_scale"] = float(np.max(np.abs(directional[interior])))

    tol = 1.0e-12 * max(1.0, norms["GL_scale"])
    return CheckReport(
        name="div_grad", grid_sizes=list(domain.n),
        norms={"L1_sup": norms["L1"], "GL_sup": norms["GL"]},
        passed=norms["GL"] <= tol,
        details={"gl_tolerance": tol})


def check_green_riemann(u: SpatialField, v: Sequence[SpatialField],
                        alpha: float | FracOrder = 0.5,
                        tol: float | None = None) -> CheckReport:
    """``int v . cgrad_-^alpha u = int div_+^alpha(v) u`` for ``u`` vanishing on
    the boundary (trapezoid rule, flagged RL nodes excluded)."""
    if not u.dirichlet_zero:
        raise ValueError("u must be a dirichlet_zero field")
    domain = _common_domain(v)
    if u.domain != domain:
        raise ValueError("u and v live on different grids")
    w = spatial_weights(domain, "trapezoid")

    grad = frac_gradient(u, alpha, CAPUTO_BACKWARD, Scheme.L1)
    lhs = float(np.sum(w * sum(vi.values * gi.values for vi, gi in zip(v, grad))))

    div = frac_divergence(v, alpha, RL_FORWARD, Scheme.L1_PLUS_BOUNDARY).values
    flagged = ~np.isfinite(div)
    rhs = float(np.sum(w * np.where(flagged, 0.0, div) * u.values))
    gap = abs(lhs - rhs)
    return CheckReport(
        name="green_riemann", grid_sizes=list(domain.n),
        norms={"lhs": lhs, "rhs": rhs, "abs_diff": gap},
        passed=True if tol is None else gap <= tol,
        details={"excluded_measure": float(np.sum(w[flagged]))})


# }}}
