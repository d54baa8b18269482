import math
import warnings

import numpy as np
import pytest
import scipy.sparse.linalg as spl
from hypothesis import given, settings
from hypothesis import strategies as st

from lakevortex.bathymetry import Constant, Exponential, LinearSlope, sample_bathymetry
from lakevortex.elliptic import (
    SmoothGreen,
    assemble_lb,
    born_dyson_solve,
    compare_near_diagonal,
    disk_green,
    green_column,
    green_columns,
    green_tilde_column,
    phi0,
    richardson_self,
    singular_template,
    solve_dirichlet,
)
from lakevortex.errors import ClearanceError, ConvergenceError, DivergenceError, InputError
from lakevortex.geometry import Circle, Rectangle
from lakevortex.grid import INTERIOR, Domain, build_grid


@pytest.fixture(scope="module")
def sq65():
    return build_grid(Domain(Rectangle(0, 1, 0, 1)), 1 / 64)


@pytest.fixture(scope="module")
def exp_op(sq65):
    return assemble_lb(sq65, Exponential(1.0, 1.0, 0.0, 2.0))


def test_operator_symmetric_positive(exp_op):
    A = exp_op.A
    assert abs(A - A.T).max() < 1e-9 * abs(A).max()
    lam = spl.eigsh(A, k=1, sigma=0, which="LM", return_eigenvectors=False)
    assert lam[0] > 0


def test_constant_b_scales_operator(sq65):
    a1 = assemble_lb(sq65, Constant(1.0)).A
    a4 = assemble_lb(sq65, Constant(4.0)).A
    assert abs(a1 - 4 * a4).max() < 1e-10 * abs(a1).max()


def test_solver_methods_agree():
    g = build_grid(Domain(Circle(0, 0, 1)), 1 / 12)
    X, Y = g.mesh()
    f = np.cos(X) + Y
    u = {}
    for m in ("direct", "dense", "cg"):
        u[m] = solve_dirichlet(assemble_lb(g, Exponential(1, 0.5, 0, 3), method=m), f, tol=1e-12)
    assert np.nanmax(np.abs(u["direct"] - u["dense"])) < 1e-10
    assert np.nanmax(np.abs(u["direct"] - u["cg"])) < 1e-8


def test_cg_iteration_cap_raises():
    g = build_grid(Domain(Rectangle(0, 1, 0, 1)), 1 / 64)
    op = assemble_lb(g, Constant(1.0), method="cg")
    from lakevortex import elliptic

    old = elliptic.CG_MAXITER_FACTOR
    try:
        elliptic.CG_MAXITER_FACTOR = 1e-3
        with pytest.raises(ConvergenceError):
            solve_dirichlet(op, np.ones((g.ny, g.nx)), tol=1e-12)
    finally:
        elliptic.CG_MAXITER_FACTOR = old


def test_tolerance_range_checked(exp_op, sq65):
    with pytest.raises(InputError):
        solve_dirichlet(exp_op, np.zeros((sq65.ny, sq65.nx)), tol=1e-3)


def test_second_order_with_curved_boundary():
    # cut-cell Dirichlet data keeps O(h^2) on the disk; a staircase would give O(h)
    errs = {"quad": [], "harm": []}
    for n in (17, 65):
        g = build_grid(Domain(Circle(0, 0, 1)), 2 / (n - 1))
        X, Y = g.mesh()
        op = assemble_lb(g, Constant(1.0))
        m = g.kind == INTERIOR
        u = solve_dirichlet(op, np.full(X.shape, -4.0), boundary=lambda x, y: x * x + y * y)
        v = solve_dirichlet(op, np.zeros(X.shape), boundary=lambda x, y: np.exp(x) * np.sin(y))
        errs["quad"].append(np.max(np.abs(u - (X**2 + Y**2))[m]))
        errs["harm"].append(np.max(np.abs(v - np.exp(X) * np.sin(Y))[m]))
    for e in errs.values():
        assert e[0] / e[1] >= 8


def test_green_column_nonnegative_and_cached(exp_op):
    G = green_column(exp_op, (0.4, 0.55))
    assert G.min() >= -1e-14
    assert green_column(exp_op, (0.4, 0.55)) is G
    with pytest.raises(ValueError):
        G[0, 0] = 1.0
    batch = green_columns(exp_op, [(0.4, 0.55), (0.61, 0.3)])
    assert batch[0] is G
    assert np.allclose(batch[1], green_column(exp_op, (0.61, 0.3), cache=False), atol=1e-14)


def test_green_source_near_boundary_rejected(exp_op):
    with pytest.raises(ClearanceError):
        green_column(exp_op, (0.5, 0.01))
    with pytest.raises(ClearanceError):
        green_column(exp_op, (1.5, 0.5))


def test_disk_green_closed_form_symmetry():
    # frozen closed-form values: -ln|z|/2pi at the centre source
    assert disk_green((0.5, 0.0), (0.0, 0.0)) == pytest.approx(math.log(2) / (2 * math.pi), rel=1e-14)
    a, b = (0.3, -0.2), (-0.1, 0.45)
    assert disk_green(a, b) == pytest.approx(disk_green(b, a), rel=1e-13)
    assert abs(disk_green((1.0, 0.0), b)) < 1e-15


def test_green_tilde_identity_exact_for_constant(sq65):
    op = assemble_lb(sq65, Constant(2.5))
    z = (0.37, 0.61)
    assert np.max(np.abs(green_column(op, z) - 2.5 * green_tilde_column(op, z))) < 1e-12


def test_weighted_symmetry_consistent_form(exp_op, sq65):
    # b(y) G~(x, y) = b(x) G~(y, x), since b(y) G~(., y) = G_b(., y) is symmetric
    b = Exponential(1.0, 1.0, 0.0, 2.0)
    x, y = (0.3, 0.35), (0.7, 0.68)
    gxy = sq65.interpolate(green_tilde_column(exp_op, y), x)
    gyx = sq65.interpolate(green_tilde_column(exp_op, x), y)
    lhs, rhs = float(b(*y)) * gxy, float(b(*x)) * gyx
    assert abs(lhs - rhs) / abs(lhs) < 0.01


def test_inverse_weight_symmetry_form_fails_for_variable_b(exp_op, sq65):
    # weights 1/b instead of b: holds only when b is constant
    b = Exponential(1.0, 1.0, 0.0, 2.0)
    x, y = (0.3, 0.35), (0.7, 0.68)
    gxy = sq65.interpolate(green_tilde_column(exp_op, y), x)
    gyx = sq65.interpolate(green_tilde_column(exp_op, x), y)
    lhs, rhs = gxy / float(b(*y)), gyx / float(b(*x))
    assert abs(lhs - rhs) / abs(lhs) > 0.3
    op_c = assemble_lb(sq65, Constant(1.7))
    gxy = sq65.interpolate(green_tilde_column(op_c, y), x)
    gyx = sq65.interpolate(green_tilde_column(op_c, x), y)
    assert abs(gxy - gyx) / gxy < 1e-12


def test_templates():
    b = LinearSlope(1.0)
    z, w = (0.0, 1.0), (0.1, 1.2)
    r = math.hypot(0.1, 0.2)
    assert singular_template(b, z, w, "log") == pytest.approx(phi0(r))
    assert singular_template(b, z, w, "dekeyser") == pytest.approx(math.sqrt(1.2) * phi0(r))
    assert singular_template(b, z, w, "caowan") == pytest.approx(1.1 * phi0(0.5 * (1 + math.sqrt(1.2)) * r))
    c = Constant(3.0)
    # the two b-weighted templates coincide for constant depth up to a constant shift
    d = singular_template(c, z, w, "dekeyser") - singular_template(c, z, w, "caowan")
    assert d == pytest.approx(3.0 * math.log(math.sqrt(3.0)) / (2 * math.pi))
    with pytest.raises(InputError):
        singular_template(b, z, z)
    with pytest.raises(InputError):
        singular_template(b, z, w, "nope")


def test_richardson_self_term():
    assert richardson_self(Constant(1.0), (0.3, 0.2), 0.01) == 0.0
    v = richardson_self(LinearSlope(1.0), (0.0, 2.0), 0.05)
    assert v == pytest.approx(math.log(20) * math.log(2) / (2 * math.pi))
    with pytest.raises(InputError):
        richardson_self(Constant(1.0), (0, 0), 0.0)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        richardson_self(Constant(1.0), (0, 0), 2.0)
    assert rec


def test_near_diagonal_report_constant_b():
    g = build_grid(Domain(Circle(0, 0, 1)), 2 / 64)
    op = assemble_lb(g, Constant(1.0))
    rep = compare_near_diagonal(op, Constant(1.0), (0.0, 0.0), [0.2, 0.3, 0.4, 0.99])
    assert rep["skipped"] == [0.99]
    # remainder G - phi0 tends to the Robin value (0 at the disk centre) with no log term
    lg = rep["variants"]["log"]
    assert abs(lg["c1"]) < 0.01 and abs(lg["c0"]) < 0.01
    assert max(abs(v) for v in rep["variants"]["dekeyser"]["remainder"]) < 1e-14
    with pytest.raises(InputError):
        compare_near_diagonal(op, Constant(1.0), (0.0, 0.0), [g.h])


def test_born_dyson_constant_exact_and_divergence(sq65):
    g = build_grid(Domain(Rectangle(0, 1, 0, 1)), 1 / 32)
    X, Y = g.mesh()
    used = g.kind != 0
    f = np.where(used, 1.0, np.nan)
    u, res = born_dyson_solve(g, np.where(used, 3.0, np.nan), f, 2)
    u_ref = solve_dirichlet(assemble_lb(g, Constant(1 / 3.0)), f)
    assert np.max(np.abs(u - u_ref)[used]) < 1e-12
    assert max(res) < 1e-12
    with pytest.raises(DivergenceError):
        born_dyson_solve(g, np.where(used, np.exp(20 * X), np.nan), f, 8)
    with pytest.raises(InputError):
        born_dyson_solve(g, np.where(used, 1.0, np.nan), f, -1)


def test_smooth_green_matches_discrete_column():
    g = build_grid(Domain(Rectangle(-1, 1, -1, 1)), 2 / 96)
    bathy = Exponential(1.0, 0.5, 0.0, 3.0)
    op = assemble_lb(g, bathy)
    sg = SmoothGreen(op, bathy)
    src, tgt = (0.1, -0.05), (0.45, 0.3)
    num = g.interpolate(green_column(op, src), tgt)
    assert sg.green(tgt, src) == pytest.approx(num, rel=5e-3)
    assert sg.green_sym(tgt, src) == pytest.approx(sg.green_sym(src, tgt), rel=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.2, 0.8), st.floats(0.2, 0.8), st.floats(0.2, 0.8), st.floats(0.2, 0.8))
def test_discrete_green_symmetry_property(x1, y1, x2, y2):
    g = build_grid(Domain(Rectangle(0, 1, 0, 1)), 1 / 32)
    op = _exp_op(g)
    a = g.interpolate(green_column(op, (x2, y2), cache=False), (x1, y1))
    b = g.interpolate(green_column(op, (x1, y1), cache=False), (x2, y2))
    assert abs(a - b) <= 1e-11 * max(abs(a), 1e-3)


_OPS = {}


def _exp_op(g):
    if "e" not in _OPS:
        _OPS["e"] = assemble_lb(g, Exponential(1.0, 0.8, 0.0, 5.0))
    return _OPS["e"]


def test_sample_used_by_operator(sq65):
    b = sample_bathymetry(Exponential(1.0, 1.0, 0.0, 2.0), sq65)
    op = assemble_lb(sq65, b)
    assert op.A.shape == (sq65.n, sq65.n)
