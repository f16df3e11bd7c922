from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracvar.cdsolve import CDCoefficients, cd_lagrangian
from fracvar.domain import BoundaryClass, BoxDomain, Rule, SpaceTimeField
from fracvar.frac1d import Direction, Scheme, TimeGrid, caputo_matrix
from fracvar.fracfield import backward_difference_matrix
from fracvar.varcalc import (
    AsymmetricState,
    Lagrangian,
    action,
    action_derivative,
    assemble_slots,
    discretization,
    el_residual_pair,
    gradient_check,
    inner,
    random_direction,
    restricted_el_residual,
)


def quartic_lagrangian() -> Lagrangian:
    """Non-quadratic test Lagrangian with x and t dependence."""
    def L(t, x, y, v, w, z):
        return (np.sin(t) * y + 0.25 * y ** 4 + 0.5 * v ** 2 * (1 + x[0])
                + np.sum(np.cos(w), axis=0) + 0.5 * np.sum(z ** 2, axis=0) * y)
    return Lagrangian(
        eval=L,
        dy=lambda t, x, y, v, w, z: np.sin(t) + y ** 3 + 0.5 * np.sum(z ** 2, axis=0),
        dv=lambda t, x, y, v, w, z: v * (1 + x[0]),
        dw=lambda t, x, y, v, w, z: -np.sin(w),
        dz=lambda t, x, y, v, w, z: z * y,
        name="quartic")


def cd_coefficients(dim: int) -> CDCoefficients:
    if dim == 1:
        return CDCoefficients([1.0], [[0.1]], 0.5,
                              source=lambda t, x: np.exp(-t) * np.sin(np.pi * x))
    return CDCoefficients([1.0, 0.5], [[0.1, 0.02], [0.02, 0.05]], 0.5,
                          source=lambda t, x, y: np.cos(t) * x * y)


def grids(dim: int, nt: int = 12, nx: int = 10) -> tuple[TimeGrid, BoxDomain]:
    return TimeGrid(0.0, 1.0, nt), BoxDomain((0.0,) * dim, (1.0,) * dim, (nx,) * dim)


def random_state(tg, dom, seed=0) -> AsymmetricState:
    rng = np.random.default_rng(seed)
    shape = (tg.n + 1, *dom.shape)
    return AsymmetricState(SpaceTimeField(tg, dom, rng.standard_normal(shape)),
                           SpaceTimeField(tg, dom, 0.3 * rng.standard_normal(shape)))


# {{{ the CD Lagrangian

@pytest.mark.parametrize("dim", [1, 2])
def test_cd_partials_match_finite_differences(dim):
    assert cd_lagrangian(cd_coefficients(dim)).verify_partials(dim) <= 1e-8


def test_quartic_partials_match_finite_differences():
    assert quartic_lagrangian().verify_partials(2) <= 1e-7


def test_cd_lagrangian_examples():
    L = cd_lagrangian(CDCoefficients([1.0, 2.0], 0.1 * np.eye(2), 0.0))
    zero = np.zeros(1)
    args = dict(t=zero, x=np.zeros((2, 1)), y=zero, v=zero, w=np.zeros((2, 1)),
                z=np.zeros((2, 1)))
    assert L.eval(**args)[0] == 0.0 and L.dy(**args)[0] == 0.0
    np.testing.assert_array_equal(L.dw(**{**args, "w": np.ones((2, 1))})[:, 0], [1.0, 2.0])
    np.testing.assert_allclose(L.dz(**{**args, "z": np.array([[1.0], [0.0]])})[:, 0],
                               [-0.1, 0.0])


# }}}


# {{{ slots

def test_causal_slots():
    tg, dom = grids(1)
    u = SpaceTimeField.from_function(tg, dom, lambda t, x: t * np.sin(np.pi * x),
                                     BoundaryClass.SPACE_ZERO)
    s = assemble_slots(AsymmetricState.causal(u), 0.5, Scheme.GL)
    np.testing.assert_array_equal(s.y.values, u.values)
    T = caputo_matrix(tg.n, tg.h, 0.5, Direction.FORWARD, Scheme.GL)
    np.testing.assert_allclose(s.v.values, T @ u.values, atol=1e-13)


def test_discretization_rejects_boundary_scheme():
    tg, dom = grids(1)
    with pytest.raises(ValueError):
        discretization(tg, dom, 0.5, Scheme.L1_PLUS_BOUNDARY)


def test_default_time_rules():
    tg, dom = grids(1)
    assert discretization(tg, dom, 0.5, Scheme.GL).time_rule == Rule.LEFT_RECTANGLE
    assert discretization(tg, dom, 0.5, Scheme.L1).time_rule == Rule.TRAPEZOID


# }}}


# {{{ duality and gradient checks

@settings(max_examples=12, deadline=None)
@given(st.sampled_from([1, 2]), st.sampled_from([Scheme.GL, Scheme.L1]),
       st.sampled_from([Rule.LEFT_RECTANGLE, Rule.TRAPEZOID]), st.integers(0, 1000))
def test_residual_duality(dim, scheme, space_rule, seed):
    tg, dom = grids(dim, 8, 6)
    U = random_state(tg, dom, seed)
    rng = np.random.default_rng(seed + 1)
    H = AsymmetricState(random_direction(tg, dom, rng), random_direction(tg, dom, rng))
    for L in (cd_lagrangian(cd_coefficients(dim)), quartic_lagrangian()):
        disc = discretization(tg, dom, 0.5, scheme, space_rule=space_rule)
        plus, minus = el_residual_pair(L, U, disc=disc)
        lhs = inner(disc, plus, H.u_plus) + inner(disc, minus, H.u_minus)
        rhs = action_derivative(L, U, H, disc=disc)
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))


@pytest.mark.parametrize("scheme", [Scheme.GL, Scheme.L1])
@pytest.mark.parametrize("dim", [1, 2])
def test_gradient_check_quadratic(dim, scheme):
    tg, dom = grids(dim)
    report = gradient_check(cd_lagrangian(cd_coefficients(dim)), random_state(tg, dom),
                            0.5, scheme, n_directions=20, seed=3)
    assert report.passed and report.norms["max_rel_error"] <= 1e-9


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
def test_gradient_check_quartic(alpha):
    tg, dom = grids(2, 8, 6)
    report = gradient_check(quartic_lagrangian(), random_state(tg, dom), alpha, Scheme.GL,
                            n_directions=20, seed=1, eps=2e-5, tol=1e-5)
    assert report.passed, report.norms


def test_gradient_check_is_deterministic():
    tg, dom = grids(1)
    L = cd_lagrangian(cd_coefficients(1))
    a = gradient_check(L, random_state(tg, dom), seed=7)
    b = gradient_check(L, random_state(tg, dom), seed=7)
    assert a.details["directions"] == b.details["directions"]


def test_gradient_check_rejects_zero_directions():
    tg, dom = grids(1)
    with pytest.raises(ValueError):
        gradient_check(cd_lagrangian(cd_coefficients(1)), random_state(tg, dom), n_directions=0)


def test_variations_must_vanish_on_spacetime_boundary():
    tg, dom = grids(1)
    U = random_state(tg, dom)
    with pytest.raises(ValueError):
        action_derivative(cd_lagrangian(cd_coefficients(1)), U, U)


def test_action_rejects_non_finite_lagrangian():
    tg, dom = grids(1)
    L = Lagrangian(eval=lambda t, x, y, v, w, z: np.log(y - 10.0),
                   dy=lambda **k: 0, dv=lambda **k: 0, dw=lambda **k: 0, dz=lambda **k: 0)
    with np.errstate(invalid="ignore"), pytest.raises(ValueError):
        action(L, random_state(tg, dom))


# }}}


# {{{ residual structure

def test_classical_reduction():
    """A Lagrangian without fractional slots gives dy L - div_b dz L."""
    def L(t, x, y, v, w, z):
        return np.sin(x[0]) * y - 0.5 * y ** 2 - 0.5 * (1 + t) * np.sum(z ** 2, axis=0)
    lag = Lagrangian(
        eval=L,
        dy=lambda t, x, y, v, w, z: np.sin(x[0]) - y,
        dv=lambda t, x, y, v, w, z: np.zeros_like(v),
        dw=lambda t, x, y, v, w, z: np.zeros_like(w),
        dz=lambda t, x, y, v, w, z: -(1 + t) * z)
    tg, dom = grids(1, 8, 16)
    u = SpaceTimeField.from_function(tg, dom, lambda t, x: np.cos(t) * np.sin(np.pi * x),
                                     BoundaryClass.SPACE_ZERO)
    res = restricted_el_residual(lag, u).values
    t, x = np.meshgrid(tg.nodes, dom.axis_nodes(0), indexing="ij")
    fwd = (np.roll(u.values, -1, axis=1) - u.values) / dom.spacing[0]
    fwd[:, -1] = 0.0
    pz = -(1 + t) * fwd
    div_b = pz @ backward_difference_matrix(dom.n[0], dom.spacing[0]).T
    expected = np.sin(x) - u.values - div_b
    interior = np.s_[1:, 1:-1]
    np.testing.assert_allclose(res[interior], expected[interior], rtol=0, atol=1e-12)


@pytest.mark.parametrize("scheme", [Scheme.GL, Scheme.L1])
@pytest.mark.parametrize("dim", [1, 2])
def test_restricted_matches_pair_on_interior(dim, scheme):
    tg, dom = grids(dim)
    u = random_state(tg, dom).u_plus
    u = u.with_values(np.where(dom.interior_mask(), u.values, 0.0), BoundaryClass.SPACE_ZERO)
    L = cd_lagrangian(cd_coefficients(dim))
    restricted = restricted_el_residual(L, u, scheme=scheme).values
    _, minus = el_residual_pair(L, AsymmetricState.causal(u), scheme=scheme)
    interior = np.s_[1:-1]
    scale = np.max(np.abs(minus.values))
    np.testing.assert_allclose(restricted[interior], minus.values[interior],
                               rtol=0, atol=1e-13 * scale)
    assert np.any(restricted[-1] != 0.0)


def test_pure_time_reduction_is_backward_euler():
    beta = 0.5
    c = CDCoefficients([0.0], [[0.0]], beta, source=lambda t, x: np.cos(t) + 0 * x)
    tg, dom = grids(1, 32, 4)
    u = SpaceTimeField.from_function(
        tg, dom, lambda t, x: np.exp(-t) + t ** 2 + x, BoundaryClass.SPACE_ZERO)
    res = restricted_el_residual(cd_lagrangian(c), u, scheme=Scheme.GL).values
    vals, f = u.values, np.cos(tg.nodes)[:, None]
    be = (vals[1:] - vals[:-1]) / tg.h + beta * vals[1:] - f[1:]
    np.testing.assert_allclose(res[1:, 1:-1], -be[:, 1:-1], rtol=0, atol=1e-12)


# }}}
