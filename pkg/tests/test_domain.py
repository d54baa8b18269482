import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lakevortex.bathymetry import (
    Constant,
    Exponential,
    LinearSlope,
    PiecewiseConstant,
    Sampled,
    bathymetry_from_dict,
    sample_bathymetry,
)
from lakevortex.errors import BathymetryError, ClearanceError, DomainError
from lakevortex.fieldio import read_field, write_field
from lakevortex.geometry import Circle, Polygon, Rectangle
from lakevortex.grid import BOUNDARY, EXTERIOR, INTERIOR, Domain, build_grid, island_loops, point_loop

E = math.e


@pytest.fixture(scope="module")
def square4():
    return build_grid(Domain(Rectangle(0, 1, 0, 1)), 0.25)


@pytest.fixture(scope="module")
def annulus_grid():
    return build_grid(Domain(Circle(0, 0, E), [Circle(0, 0, 1)]), E / 64)


def test_unit_square_counts(square4):
    assert (square4.kind == INTERIOR).sum() == 9
    assert (square4.kind == BOUNDARY).sum() == 16


def test_annulus_single_loop(annulus_grid):
    loops = island_loops(annulus_grid)
    assert annulus_grid.g == 1 and len(loops) == 1
    assert loops[0].winding_number((0, 0)) == 1
    assert loops[0].winding_number((2.5, 0)) == 0


def test_overlapping_islands_rejected():
    with pytest.raises(DomainError):
        Domain(Rectangle(-2, 2, -2, 2), [Circle(0, 0, 0.5), Circle(0.6, 0, 0.5)])


def test_small_island_rejected_with_index():
    dom = Domain(Rectangle(-2, 2, -2, 2), [Circle(-1, 0, 0.5), Circle(1, 0, 0.05)])
    with pytest.raises(DomainError) as e:
        build_grid(dom, 0.05)
    assert e.value.island == 2


def test_point_loop_winding():
    g = build_grid(Domain(Rectangle(0, 1, 0, 1)), 1 / 64)
    lp = point_loop(g, (0.5, 0.5), 4 * g.h)
    assert lp.winding_number((0.5, 0.5)) == 1
    assert lp.winding_number((0.1, 0.1)) == 0


def test_point_loop_near_boundary_rejected():
    g = build_grid(Domain(Rectangle(0, 1, 0, 1)), 1 / 64)
    with pytest.raises(ClearanceError):
        point_loop(g, (0.5, 1.5 * g.h), 4 * g.h)


def test_loop_closedness_on_exact_gradient(annulus_grid):
    # increments of a potential along each closed corner circuit telescope to zero
    phi = lambda x, y: np.sin(x) * np.cos(2 * y) + x * y
    lp = island_loops(annulus_grid)[0]
    for poly in lp.cycles:
        v = phi(poly[:, 0], poly[:, 1])
        assert abs(np.diff(np.concatenate([v, v[:1]])).sum()) < 1e-12


def test_classification_deterministic_and_order_free():
    a = Domain(Rectangle(-2, 2, -2, 2), [Circle(-0.8, 0, 0.4), Circle(0.8, 0.3, 0.5)])
    b = Domain(Rectangle(-2, 2, -2, 2), [Circle(0.8, 0.3, 0.5), Circle(-0.8, 0, 0.4)])
    ga, ga2, gb = build_grid(a, 4 / 64), build_grid(a, 4 / 64), build_grid(b, 4 / 64)
    assert np.array_equal(ga.kind, ga2.kind)
    assert np.array_equal(ga.kind, gb.kind)
    # labels are permuted with the island order
    swap = np.where(gb.label == 1, 2, np.where(gb.label == 2, 1, gb.label))
    assert np.array_equal(ga.label, swap)


def test_interior_nodes_have_valid_neighbours(annulus_grid):
    k = annulus_grid.kind
    j, i = np.nonzero(k == INTERIOR)
    for dj, di in ((0, 1), (0, -1), (1, 0), (-1, 0)):
        assert np.all(k[j + dj, i + di] != EXTERIOR)


def test_nodes_on_curve_are_boundary():
    g = build_grid(Domain(Rectangle(0, 1, 0, 1)), 0.125)
    X, Y = g.mesh()
    on = (np.isclose(X, 0) | np.isclose(X, 1) | np.isclose(Y, 0) | np.isclose(Y, 1)) & (X >= -1e-12) & (X <= 1 + 1e-12) & (Y >= -1e-12) & (Y <= 1 + 1e-12)
    assert np.all(g.kind[on] == BOUNDARY)


def test_bathymetry_examples():
    assert LinearSlope(1.0)(0.0, 2.0) == pytest.approx(2.0)
    assert Exponential(1.0, 1.0, 0.0, 1.0)(0.0, 2.0) == pytest.approx(E, rel=1e-15)
    ex = Exponential(1.0, 0.7, 0.2, 1.3)
    assert ex(0.0, 1.3 - 1e-12) == pytest.approx(ex(0.0, 1.3 + 1e-12), rel=1e-10)


def test_constant_zero_depth_rejected(square4):
    with pytest.raises(BathymetryError) as e:
        sample_bathymetry(Constant(0.0), square4)
    assert e.value.node is not None


def test_sampled_reproduces_nodes(tmp_path):
    g = build_grid(Domain(Rectangle(0, 1, 0, 1)), 1 / 16)
    X, Y = g.mesh()
    vals = 1 + X**2 + 0.5 * np.sin(3 * Y)
    path = tmp_path / "b.txt"
    write_field(path, vals, g.h, g.x0, g.y0)
    back, h, x0, y0 = read_field(path)
    bathy = Sampled(back, h, x0, y0)
    got = sample_bathymetry(bathy, g)
    used = g.kind != EXTERIOR
    assert np.allclose(got[used], vals[used], rtol=0, atol=1e-11)
    via = bathymetry_from_dict({"type": "sampled", "path": "b.txt"}, str(tmp_path))
    assert np.allclose(via(X, Y), back)


def test_piecewise_constant_regions():
    b = PiecewiseConstant(((Circle(0, 0, 1), 3.0),), 1.0)
    assert b(0.0, 0.0) == 3.0 and b(1.0, 0.0) == 3.0 and b(2.0, 0.0) == 1.0


@settings(max_examples=60, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_rectangle_polygon_insideness_agree(x, y):
    r = Rectangle(-1, 2, -1.5, 1)
    p = Polygon(((-1, -1.5), (2, -1.5), (2, 1), (-1, 1)))
    assert bool(r.contains(x, y)) == bool(p.contains(x, y))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_bilinear_weights_partition_unity(x, y):
    g = build_grid(Domain(Rectangle(0, 1, 0, 1)), 1 / 16)
    ids, w = g.bilinear_stencil((x, y))
    assert w.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.all(w >= -1e-15)
    X, Y = g.mesh()
    # bilinear interpolation reproduces affine fields
    assert g.interpolate(2 * X - 3 * Y + 1, (x, y)) == pytest.approx(2 * x - 3 * y + 1, abs=1e-12)
