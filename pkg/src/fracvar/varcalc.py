r"""Asymmetric fractional action and its Euler-Lagrange residuals.

A state is a pair ``U = (u_+, u_-)`` of space-time fields. The Lagrangian
``L(t, x, y, v, w, z)`` is evaluated on the slots

.. math::

    y = u_+ + u_-, \quad
    v = {}^cD_+^\alpha u_+ - {}^cD_-^\alpha u_-, \quad
    w = {}^c\nabla^\alpha u_+ - {}^c\bar\nabla^\alpha u_-, \quad
    z = \nabla u_+ + \nabla u_-,

with time-fractional operators acting along ``t`` at fixed ``x`` and space
operators along each axis at fixed ``t``. The classical gradient is a forward
difference.

Every slot is a linear map of ``U`` given by 1D matrices applied along one
axis. The residuals use, as outer operators, the transposes of these
matrices with respect to the quadrature weights,
``A^* p = W^{-1} A^T W p``. This makes
``sum(W * residual * h) == dAction(U; h)`` an identity of the discrete
problem, up to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from fracvar.domain import (
    BoundaryClass,
    BoxDomain,
    Rule,
    SpaceTimeField,
    apply_along_axis,
    quadrature_weights_1d,
    space_time_mesh,
)
from fracvar.frac1d import Direction, FracOrder, Scheme, TimeGrid, as_order, caputo_matrix
from fracvar.fracfield import forward_difference_matrix
from fracvar.report import CheckReport

SlotFn = Callable[..., np.ndarray]


@dataclass(frozen=True)
class Lagrangian:
    """``L(t, x, y, v, w, z)`` with its slot partial derivatives.

    All callables are vectorised: ``t``, ``y`` and ``v`` are arrays of one
    shape ``S``, ``x``, ``w`` and ``z`` have shape ``(d, *S)``. ``dw`` and
    ``dz`` return ``(d, *S)`` arrays.
    """

    eval: SlotFn
    dy: SlotFn
    dv: SlotFn
    dw: SlotFn
    dz: SlotFn
    name: str = "lagrangian"

    def verify_partials(self, dim: int, seed: int = 0, samples: int = 64,
                        step: float = 1.0e-5) -> float:
        """Largest relative error between the declared partials and central
        differences of ``eval`` at random slot values."""
        rng = np.random.default_rng(seed)
        t = rng.uniform(0.0, 1.0, samples)
        x = rng.uniform(0.0, 1.0, (dim, samples))
        y, v = rng.normal(size=(2, samples))
        w, z = rng.normal(size=(2, dim, samples))
        args = dict(t=t, x=x, y=y, v=v, w=w, z=z)

        def fd(slot: str, comp: int | None) -> np.ndarray:
            plus, minus = dict(args), dict(args)
            if comp is None:
                plus[slot] = args[slot] + step
                minus[slot] = args[slot] - step
            else:
                plus[slot] = args[slot].copy()
                minus[slot] = args[slot].copy()
                plus[slot][comp] += step
                minus[slot][comp] -= step
            return (self.eval(**plus) - self.eval(**minus)) / (2.0 * step)

        worst = 0.0
        pairs = [("y", None, self.dy(**args)), ("v", None, self.dv(**args))]
        dw, dz = self.dw(**args), self.dz(**args)
        pairs += [("w", i, dw[i]) for i in range(dim)]
        pairs += [("z", i, dz[i]) for i in range(dim)]
        for slot, comp, exact in pairs:
            approx = fd(slot, comp)
            scale = np.maximum(np.abs(exact), 1.0)
            worst = max(worst, float(np.max(np.abs(approx - exact) / scale)))
        return worst


@dataclass(frozen=True)
class AsymmetricState:
    u_plus: SpaceTimeField
    u_minus: SpaceTimeField

    def __post_init__(self) -> None:
        if not self.u_plus.same_grid(self.u_minus):
            raise ValueError("u_plus and u_minus must share grids")

    @classmethod
    def causal(cls, u_plus: SpaceTimeField) -> AsymmetricState:
        """``(u_plus, 0)``."""
        zero = SpaceTimeField.zeros(u_plus.tgrid, u_plus.domain, BoundaryClass.NONE)
        return cls(u_plus, zero)

    @property
    def tgrid(self) -> TimeGrid:
        return self.u_plus.tgrid

    @property
    def domain(self) -> BoxDomain:
        return self.u_plus.domain


@dataclass(frozen=True)
class SlotFields:
    y: SpaceTimeField
    v: SpaceTimeField
    w: list[SpaceTimeField]
    z: list[SpaceTimeField]


# {{{ discrete operators

@dataclass
class Discretization:
    """Matrices and quadrature weights shared by the action and residuals.

    ``time_rule`` defaults to left rectangles for GL (rectangle nodes then
    coincide with the convolution support) and to trapezoids for L1.
    ``space_rule`` defaults to left rectangles, which turns the forward
    difference and its weighted adjoint into the standard symmetric
    diffusion stencil.
    """

    tgrid: TimeGrid
    domain: BoxDomain
    alpha: float
    scheme: Scheme
    time_rule: Rule
    space_rule: Rule
    time_plus: np.ndarray = field(init=False, repr=False)
    time_minus: np.ndarray = field(init=False, repr=False)
    space_plus: list[np.ndarray] = field(init=False, repr=False)
    space_minus: list[np.ndarray] = field(init=False, repr=False)
    grad: list[np.ndarray] = field(init=False, repr=False)
    time_weights: np.ndarray = field(init=False, repr=False)
    space_weights: list[np.ndarray] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        tg, dom = self.tgrid, self.domain
        self.time_plus = caputo_matrix(tg.n, tg.h, self.alpha, Direction.FORWARD, self.scheme)
        self.time_minus = caputo_matrix(tg.n, tg.h, self.alpha, Direction.BACKWARD, self.scheme)
        self.space_plus, self.space_minus, self.grad, self.space_weights = [], [], [], []
        for i in range(dom.dim):
            n, h = dom.n[i], dom.spacing[i]
            self.space_plus.append(
                caputo_matrix(n, h, self.alpha, Direction.FORWARD, self.scheme))
            self.space_minus.append(
                caputo_matrix(n, h, self.alpha, Direction.BACKWARD, self.scheme))
            self.grad.append(forward_difference_matrix(n, h))
            self.space_weights.append(quadrature_weights_1d(n, h, self.space_rule))
        self.time_weights = quadrature_weights_1d(tg.n, tg.h, self.time_rule)

    @property
    def dim(self) -> int:
        return self.domain.dim

    def weights(self) -> np.ndarray:
        w = self.time_weights
        for wi in self.space_weights:
            w = np.multiply.outer(w, wi)
        return w

    def extended_time_weights(self) -> np.ndarray:
        """Time weights with the last node given a full cell."""
        w = self.time_weights.copy()
        w[-1] = self.tgrid.h
        return w

    def causal_outer_matrix(self) -> np.ndarray:
        """Weighted adjoint of the backward time operator, valid up to ``t = b``.

        The backward matrix is built one ghost step past ``b`` so that its
        columns ``0..n`` carry no end correction; rows ``1..n-1`` coincide
        with the adjoint used by :func:`el_residual_pair`.
        """
        tg = self.tgrid
        ext = caputo_matrix(tg.n + 1, tg.h, self.alpha, Direction.BACKWARD, self.scheme)
        w = self.extended_time_weights()
        return w[None, :] * ext[:tg.n + 1, :tg.n + 1].T / w[:, None]

    # operators on arrays of shape (nt + 1, *spatial)

    def time_op(self, mat: np.ndarray, values: np.ndarray) -> np.ndarray:
        return apply_along_axis(mat, values, 0)

    def space_op(self, mat: np.ndarray, values: np.ndarray, axis: int) -> np.ndarray:
        return apply_along_axis(mat, values, axis + 1)

    def time_adjoint(self, mat: np.ndarray, values: np.ndarray,
                     weights: np.ndarray | None = None) -> np.ndarray:
        w = self.time_weights if weights is None else weights
        return _weighted_adjoint(mat, values, w, 0)

    def space_adjoint(self, mat: np.ndarray, values: np.ndarray, axis: int) -> np.ndarray:
        return _weighted_adjoint(mat, values, self.space_weights[axis], axis + 1)

    def interior_mask(self, include_final: bool = False) -> np.ndarray:
        mask = np.zeros((self.tgrid.n + 1, *self.domain.shape), dtype=bool)
        stop = self.tgrid.n + 1 if include_final else self.tgrid.n
        mask[1:stop] = self.domain.interior_mask()
        return mask


def _weighted_adjoint(mat: np.ndarray, values: np.ndarray, weights: np.ndarray,
                      axis: int) -> np.ndarray:
    shape = [1] * values.ndim
    shape[axis] = weights.size
    w = weights.reshape(shape)
    out = apply_along_axis(mat.T, w * values, axis)
    return np.divide(out, w, out=np.zeros_like(out), where=w > 0.0)


def discretization(tgrid: TimeGrid, domain: BoxDomain, alpha: float | FracOrder = 0.5,
                   scheme: Scheme | str = Scheme.GL,
                   time_rule: Rule | str | None = None,
                   space_rule: Rule | str = Rule.LEFT_RECTANGLE) -> Discretization:
    scheme = Scheme(scheme)
    if scheme not in (Scheme.L1, Scheme.GL):
        raise ValueError(f"slot operators need scheme L1 or GL, got {scheme.value!r}")
    if time_rule is None:
        time_rule = Rule.LEFT_RECTANGLE if scheme == Scheme.GL else Rule.TRAPEZOID
    return Discretization(tgrid, domain, as_order(alpha), scheme,
                          Rule(time_rule), Rule(space_rule))


# }}}


# {{{ slots, action and residuals

@dataclass
class _Slots:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    v: np.ndarray
    w: np.ndarray
    z: np.ndarray

    def args(self) -> dict[str, np.ndarray]:
        return dict(t=self.t, x=self.x, y=self.y, v=self.v, w=self.w, z=self.z)


def _slot_arrays(disc: Discretization, up: np.ndarray, um: np.ndarray) -> _Slots:
    t, *x = space_time_mesh(disc.tgrid, disc.domain)
    y = up + um
    v = disc.time_op(disc.time_plus, up) - disc.time_op(disc.time_minus, um)
    w = np.stack([disc.space_op(disc.space_plus[i], up, i)
                  - disc.space_op(disc.space_minus[i], um, i) for i in range(disc.dim)])
    z = np.stack([disc.space_op(disc.grad[i], up + um, i) for i in range(disc.dim)])
    return _Slots(t, np.stack(x), y, v, w, z)


def _check_state(U: AsymmetricState, disc: Discretization) -> None:
    if U.tgrid != disc.tgrid or U.domain != disc.domain:
        raise ValueError("state grids do not match the discretization")


def _resolve(U: AsymmetricState, alpha, scheme, time_rule, space_rule,
             disc: Discretization | None) -> Discretization:
    if disc is None:
        disc = discretization(U.tgrid, U.domain, alpha, scheme, time_rule, space_rule)
    _check_state(U, disc)
    return disc


def assemble_slots(U: AsymmetricState, alpha: float | FracOrder = 0.5,
                   scheme: Scheme | str = Scheme.GL) -> SlotFields:
    disc = _resolve(U, alpha, scheme, None, Rule.LEFT_RECTANGLE, None)
    s = _slot_arrays(disc, U.u_plus.values, U.u_minus.values)

    def wrap(values: np.ndarray) -> SpaceTimeField:
        return SpaceTimeField(disc.tgrid, disc.domain, values)

    return SlotFields(wrap(s.y), wrap(s.v), [wrap(c) for c in s.w], [wrap(c) for c in s.z])


def action(L: Lagrangian, U: AsymmetricState, alpha: float | FracOrder = 0.5,
           scheme: Scheme | str = Scheme.GL, time_rule: Rule | str | None = None,
           space_rule: Rule | str = Rule.LEFT_RECTANGLE,
           disc: Discretization | None = None) -> float:
    """Space-time quadrature of ``L`` evaluated on the slots of ``U``."""
    disc = _resolve(U, alpha, scheme, time_rule, space_rule, disc)
    s = _slot_arrays(disc, U.u_plus.values, U.u_minus.values)
    integrand = np.asarray(L.eval(**s.args()), dtype=np.float64)
    w = disc.weights()
    if not np.all(np.isfinite(integrand[w > 0.0])):
        raise ValueError("Lagrangian is not finite at a quadrature node")
    return float(np.sum(w * np.where(w > 0.0, integrand, 0.0)))


def _check_direction(H: AsymmetricState) -> None:
    for comp in (H.u_plus, H.u_minus):
        if comp.boundary_class != BoundaryClass.SPACETIME_ZERO:
            raise ValueError("variation components must be spacetime_zero fields")


def action_derivative(L: Lagrangian, U: AsymmetricState, H: AsymmetricState,
                      alpha: float | FracOrder = 0.5, scheme: Scheme | str = Scheme.GL,
                      time_rule: Rule | str | None = None,
                      space_rule: Rule | str = Rule.LEFT_RECTANGLE,
                      disc: Discretization | None = None) -> float:
    """First variation of the action at ``U`` in direction ``H``, before any
    integration by parts."""
    disc = _resolve(U, alpha, scheme, time_rule, space_rule, disc)
    _check_direction(H)
    _check_state(H, disc)
    s = _slot_arrays(disc, U.u_plus.values, U.u_minus.values)
    ds = _slot_arrays(disc, H.u_plus.values, H.u_minus.values)
    args = s.args()
    integrand = (L.dy(**args) * ds.y + L.dv(**args) * ds.v
                 + np.sum(L.dw(**args) * ds.w, axis=0)
                 + np.sum(L.dz(**args) * ds.z, axis=0))
    w = disc.weights()
    return float(np.sum(w * np.where(w > 0.0, integrand, 0.0)))


def _partials(L: Lagrangian, disc: Discretization, U: AsymmetricState):
    s = _slot_arrays(disc, U.u_plus.values, U.u_minus.values)
    args = s.args()
    return L.dy(**args), L.dv(**args), L.dw(**args), L.dz(**args)


def _residual_minus(disc: Discretization, py, pv, pw, pz,
                    time_outer: np.ndarray | None = None) -> np.ndarray:
    if time_outer is None:
        res = py - disc.time_adjoint(disc.time_minus, pv)
    else:
        res = py - disc.time_op(time_outer, pv)
    for i in range(disc.dim):
        res = res - disc.space_adjoint(disc.space_minus[i], pw[i], i)
        res = res + disc.space_adjoint(disc.grad[i], pz[i], i)
    return res


def _residual_plus(disc: Discretization, py, pv, pw, pz) -> np.ndarray:
    res = py + disc.time_adjoint(disc.time_plus, pv)
    for i in range(disc.dim):
        res = res + disc.space_adjoint(disc.space_plus[i], pw[i], i)
        res = res + disc.space_adjoint(disc.grad[i], pz[i], i)
    return res


def el_residual_pair(L: Lagrangian, U: AsymmetricState, alpha: float | FracOrder = 0.5,
                     scheme: Scheme | str = Scheme.GL,
                     time_rule: Rule | str | None = None,
                     space_rule: Rule | str = Rule.LEFT_RECTANGLE,
                     disc: Discretization | None = None
                     ) -> tuple[SpaceTimeField, SpaceTimeField]:
    """Residuals of the two Euler-Lagrange equations at interior nodes.

    ``plus`` pairs with variations of ``u_+`` and ``minus`` with variations
    of ``u_-``; each is the weighted gradient of the discrete action. The
    residuals are zero off the interior.
    """
    disc = _resolve(U, alpha, scheme, time_rule, space_rule, disc)
    py, pv, pw, pz = _partials(L, disc, U)
    mask = disc.interior_mask()
    plus = np.where(mask, _residual_plus(disc, py, pv, pw, pz), 0.0)
    minus = np.where(mask, _residual_minus(disc, py, pv, pw, pz), 0.0)
    cls = BoundaryClass.SPACETIME_ZERO
    return (SpaceTimeField(disc.tgrid, disc.domain, plus, cls),
            SpaceTimeField(disc.tgrid, disc.domain, minus, cls))


def restricted_el_residual(L: Lagrangian, u_plus: SpaceTimeField,
                           alpha: float | FracOrder = 0.5,
                           scheme: Scheme | str = Scheme.GL,
                           time_rule: Rule | str | None = None,
                           space_rule: Rule | str = Rule.LEFT_RECTANGLE,
                           disc: Discretization | None = None) -> SpaceTimeField:
    """Causal Euler-Lagrange residual at ``U = (u_plus, 0)``.

    Equal to the ``minus`` residual of :func:`el_residual_pair` on interior
    nodes (up to rounding), and also defined on the final time slice, where
    the outer time operator comes from :meth:`Discretization.causal_outer_matrix`.
    """
    U = AsymmetricState.causal(u_plus)
    disc = _resolve(U, alpha, scheme, time_rule, space_rule, disc)
    py, pv, pw, pz = _partials(L, disc, U)
    res = _residual_minus(disc, py, pv, pw, pz, disc.causal_outer_matrix())
    mask = disc.interior_mask(include_final=True)
    return SpaceTimeField(disc.tgrid, disc.domain, np.where(mask, res, 0.0),
                          BoundaryClass.SPACE_ZERO)


def inner(disc: Discretization, a: SpaceTimeField, b: SpaceTimeField) -> float:
    return float(np.sum(disc.weights() * a.values * b.values))


# }}}


# {{{ checks

def random_direction(tgrid: TimeGrid, domain: BoxDomain,
                     rng: np.random.Generator) -> SpaceTimeField:
    values = rng.standard_normal((tgrid.n + 1, *domain.shape))
    values[0] = 0.0
    values[-1] = 0.0
    values[:, domain.boundary_mask()] = 0.0
    return SpaceTimeField(tgrid, domain, values, BoundaryClass.SPACETIME_ZERO)


def gradient_check(L: Lagrangian, U: AsymmetricState, alpha: float | FracOrder = 0.5,
                   scheme: Scheme | str = Scheme.GL, n_directions: int = 20,
                   seed: int = 0, eps: float = 1.0e-4, tol: float = 1.0e-9,
                   time_rule: Rule | str | None = None,
                   space_rule: Rule | str = Rule.LEFT_RECTANGLE) -> CheckReport:
    """Compare ``<residuals, H>`` with central differences of the action
    along seeded random variations ``H``."""
    if n_directions < 1:
        raise ValueError("n_directions must be at least 1")
    disc = _resolve(U, alpha, scheme, time_rule, space_rule, None)
    plus, minus = el_residual_pair(L, U, disc=disc)
    rng = np.random.default_rng(seed)

    worst = 0.0
    rows = []
    for _ in range(n_directions):
        hp = random_direction(disc.tgrid, disc.domain, rng)
        hm = random_direction(disc.tgrid, disc.domain, rng)
        analytic = inner(disc, plus, hp) + inner(disc, minus, hm)
        up = AsymmetricState(
            U.u_plus.with_values(U.u_plus.values + eps * hp.values, BoundaryClass.NONE),
            U.u_minus.with_values(U.u_minus.values + eps * hm.values, BoundaryClass.NONE))
        um = AsymmetricState(
            U.u_plus.with_values(U.u_plus.values - eps * hp.values, BoundaryClass.NONE),
            U.u_minus.with_values(U.u_minus.values - eps * hm.values, BoundaryClass.NONE))
        fd = (action(L, up, disc=disc) - action(L, um, disc=disc)) / (2.0 * eps)
        scale = max(abs(analytic), abs(fd))
        rel = 0.0 if scale == 0.0 else abs(analytic - fd) / scale
        worst = max(worst, rel)
        rows.append({"analytic": analytic, "finite_difference": fd, "rel_error": rel})

    return CheckReport(
        name="gradient_check", grid_sizes=[disc.tgrid.n, *disc.domain.n],
        norms={"max_rel_error": worst}, passed=worst <= tol,
        details={"seed": seed, "eps": eps, "n_directions": n_directions,
                 "scheme": disc.scheme.value, "time_rule": disc.time_rule.value,
                 "space_rule": disc.space_rule.value, "directions": rows})


# }}}
