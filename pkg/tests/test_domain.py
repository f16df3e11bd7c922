from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from fracvar.domain import (
    BoundaryClass,
    BoxDomain,
    Rule,
    SpaceTimeField,
    SpatialField,
    apply_along_axis,
    field_to_csv,
    integrate,
    line_extract,
    line_insert,
    quadrature_weights_1d,
    read_field_csv,
    write_field_csv,
)
from fracvar.frac1d import Samples1D, TimeGrid


def test_box_validation():
    with pytest.raises(ValueError):
        BoxDomain((0.0,), (1.0, 2.0), (4,))
    with pytest.raises(ValueError):
        BoxDomain((1.0,), (0.0,), (4,))
    with pytest.raises(ValueError):
        BoxDomain((0.0,), (1.0,), (2,))


def test_box_equality_and_geometry():
    a = BoxDomain((0, 0), (1, 2), (4, 8))
    b = BoxDomain((0.0, 0.0), (1.0, 2.0), (4, 8))
    assert a == b and hash(a) == hash(b)
    assert a.shape == (5, 9)
    assert a.spacing == (0.25, 0.25)
    assert a.boundary_mask().sum() == 5 * 9 - 3 * 7
    assert a.interior_mask().sum() == 3 * 7


def test_spatial_field_dirichlet_mask():
    dom = BoxDomain((0.0,), (1.0,), (8,))
    u = SpatialField.from_function(dom, lambda x: 1.0 + x, dirichlet_zero=True)
    assert u.values[0] == 0.0 and u.values[-1] == 0.0


def test_spacetime_boundary_classes():
    tg, dom = TimeGrid(0.0, 1.0, 4), BoxDomain((0.0,), (1.0,), (4,))
    ones = np.ones((5, 5))
    SpaceTimeField(tg, dom, ones)
    with pytest.raises(ValueError):
        SpaceTimeField(tg, dom, ones, BoundaryClass.SPACE_ZERO)
    inner = ones.copy()
    inner[:, [0, -1]] = 0.0
    SpaceTimeField(tg, dom, inner, BoundaryClass.SPACE_ZERO)
    with pytest.raises(ValueError):
        SpaceTimeField(tg, dom, inner, BoundaryClass.SPACETIME_ZERO)
    with pytest.raises(ValueError):
        SpaceTimeField(tg, dom, np.ones((4, 5)))


def test_from_function_masks_by_class():
    tg, dom = TimeGrid(0.0, 1.0, 4), BoxDomain((0.0,), (1.0,), (4,))
    f = SpaceTimeField.from_function(tg, dom, lambda t, x: 1.0 + t + x,
                                     BoundaryClass.SPACETIME_ZERO)
    assert np.all(f.values[0] == 0) and np.all(f.values[-1] == 0)
    assert np.all(f.values[:, [0, -1]] == 0)
    assert np.all(f.values[1:-1, 1:-1] > 0)


@given(st.integers(3, 40), st.floats(0.01, 3.0))
def test_trapezoid_exact_on_linear(n, length):
    h = length / n
    x = h * np.arange(n + 1)
    w = quadrature_weights_1d(n, h, Rule.TRAPEZOID)
    assert np.sum(w * (2.0 + 3.0 * x)) == pytest.approx(2.0 * length + 1.5 * length ** 2,
                                                        rel=1e-12)


def test_left_rectangle_drops_last_node():
    w = quadrature_weights_1d(4, 0.25, Rule.LEFT_RECTANGLE)
    np.testing.assert_array_equal(w, [0.25, 0.25, 0.25, 0.25, 0.0])


def test_integrate_bilinear():
    tg, dom = TimeGrid(0.0, 2.0, 8), BoxDomain((0.0, 0.0), (1.0, 3.0), (4, 6))
    f = SpaceTimeField.from_function(tg, dom, lambda t, x, y: t * x * y)
    assert integrate(f) == pytest.approx(2.0 * 0.5 * 4.5, rel=1e-13)


def test_integrate_rejects_non_finite():
    dom = BoxDomain((0.0,), (1.0,), (4,))
    with pytest.raises(ValueError):
        integrate(SpatialField(dom, np.array([np.inf, 0, 0, 0, 0])))


@settings(max_examples=25)
@given(st.integers(0, 2), st.integers(0, 1))
def test_line_round_trip(k, axis):
    dom = BoxDomain((0.0, 0.0), (1.0, 1.0), (4, 5))
    u = SpatialField.from_function(dom, lambda x, y: np.sin(3 * x + 5 * y))
    base = [k + 1, k + 1]
    line = line_extract(u, axis, base)
    assert isinstance(line, Samples1D) and line.values.size == dom.n[axis] + 1
    back = line_insert(u, axis, base, line)
    np.testing.assert_array_equal(back.values, u.values)


def test_line_insert_respects_dirichlet():
    dom = BoxDomain((0.0, 0.0), (1.0, 1.0), (4, 4))
    u = SpatialField.zeros(dom)
    bad = Samples1D(dom.axis_grid(0), np.ones(5))
    with pytest.raises(ValueError):
        line_insert(u, 0, [0, 2], bad)


@settings(max_examples=25)
@given(st.integers(0, 2), st.integers(0, 2**31 - 1))
def test_apply_along_axis_matches_loop(axis, seed):
    rng = np.random.default_rng(seed)
    values = rng.standard_normal((4, 5, 6))
    mat = rng.standard_normal((values.shape[axis],) * 2)
    out = apply_along_axis(mat, values, axis)
    ref = np.apply_along_axis(lambda v: mat @ v, axis, values)
    np.testing.assert_allclose(out, ref, rtol=1e-13, atol=1e-13)


@settings(max_examples=30, deadline=None)
@given(hnp.arrays(np.float64, (3, 4, 4),
                  elements=st.floats(allow_nan=False, allow_infinity=False, width=64)))
def test_csv_round_trip_is_bit_exact(tmp_path_factory, values):
    tg, dom = TimeGrid(0.0, 0.3, 2), BoxDomain((0.0, -1.0), (0.7, 1.0), (3, 3))
    field = SpaceTimeField(tg, dom, values)
    path = tmp_path_factory.mktemp("csv") / "f.csv"
    write_field_csv(field, path)
    back = read_field_csv(path)
    assert back.same_grid(field)
    np.testing.assert_array_equal(back.values, field.values)


def test_csv_format():
    tg, dom = TimeGrid(0.0, 1.0, 2), BoxDomain((0.0,), (1.0,), (3,))
    text = field_to_csv(SpaceTimeField.zeros(tg, dom, BoundaryClass.NONE))
    lines = text.split("\n")
    assert lines[0] == "t,x1,value"
    assert "\r" not in text and len(lines) == 1 + 3 * 4 + 1


def test_csv_reader_rejects_bad_input(tmp_path):
    tg, dom = TimeGrid(0.0, 1.0, 2), BoxDomain((0.0,), (1.0,), (3,))
    good = field_to_csv(SpaceTimeField.zeros(tg, dom, BoundaryClass.NONE)).split("\n")
    cases = {
        "header": ["time,x1,value", *good[1:]],
        "order": [good[0], good[2], good[1], *good[3:]],
        "missing": good[:-2],
    }
    for name, lines in cases.items():
        p = tmp_path / f"{name}.csv"
        p.write_text("\n".join(lines))
        with pytest.raises(ValueError):
            read_field_csv(p)
    nonuniform = good[:]
    nonuniform[2] = nonuniform[2].replace("0.33333333333333331", "0.3", 1)
    p = tmp_path / "nonuniform.csv"
    p.write_text("\n".join(nonuniform))
    with pytest.raises(ValueError):
        read_field_csv(p)
