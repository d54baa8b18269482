"""Invariant and oracle suite shared by ``lakevortex verify`` and the tests.

Each check returns ``{"criterion", "name", "passed", "measured", "limits"}``
with plain floats only (no timings), so reports are byte-reproducible.
"""

from __future__ import annotations

import json
import math
from functools import lru_cache

import numpy as np

from .bathymetry import Constant, Exponential, LinearSlope
from .dynamics import SimulationContext, VortexSystem, default_dt, hamiltonian_velocities, simulate, vortex_velocities
from .elliptic import (
    DEFAULT_TOL,
    assemble_lb,
    born_dyson_solve,
    disk_green,
    green_column,
    green_tilde_column,
    solve_dirichlet,
)
from .geometry import Circle, Rectangle
from .grid import INTERIOR, Domain, build_grid, point_loop
from .harmonic import circulation, dual_form_circulations, harmonic_measures, orthogonality_check, underbraced_identity_check
from .rings import (
    RingSystem,
    RipPairState,
    dyson_green,
    ring_simulate,
    ring_velocities,
    rip_pair_simulate,
    single_ring_speed,
)

E = math.e


def _f(x):
    return float(x)


def _result(criterion, name, passed, measured, limits):
    return {"criterion": criterion, "name": name, "passed": bool(passed), "measured": measured, "limits": limits}


# reference domains

def annulus(shift=0.0):
    return Domain(Circle(0, shift, E), [Circle(0, shift, 1)])


def two_islands(shift=0.0):
    return Domain(Rectangle(-2, 2, -2 + shift, 2 + shift), [Circle(-0.8, shift, 0.4), Circle(0.8, 0.3 + shift, 0.5)])


@lru_cache(maxsize=None)
def _grid(name, n, shift=0.0):
    if name == "annulus":
        return build_grid(annulus(shift), 2 * E / (n - 1))
    if name == "two_islands":
        return build_grid(two_islands(shift), 4 / (n - 1))
    if name == "square":
        return build_grid(Domain(Rectangle(0, 1, shift, 1 + shift)), 1 / (n - 1))
    if name == "disk":
        return build_grid(Domain(Circle(0, 0, 1)), 2 / (n - 1))
    raise KeyError(name)


@lru_cache(maxsize=None)
def _op(name, n, bathy, shift=0.0):
    g = _grid(name, n, shift)
    return assemble_lb(g, bathy)


@lru_cache(maxsize=None)
def _measures(name, n, bathy, shift=0.0):
    return harmonic_measures(_op(name, n, bathy, shift))


def clear_caches():
    for f in (_grid, _op, _measures):
        f.cache_clear()


# elliptic

def check_convergence():
    errs = []
    for n in (33, 65, 129):
        g = _grid("square", n)
        X, Y = g.mesh()
        u = solve_dirichlet(_op("square", n, Constant(1.0)), 2 * np.pi**2 * np.sin(np.pi * X) * np.sin(np.pi * Y))
        m = g.kind == INTERIOR
        errs.append(float(np.max(np.abs(u - np.sin(np.pi * X) * np.sin(np.pi * Y))[m])))
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    ok = all(3 <= r <= 5 for r in ratios)
    return _result(1, "manufactured-solution convergence", ok, {"errors": errs, "ratios": ratios}, {"ratio": [3, 5]})


def check_disk_green(n=129):
    g = _grid("disk", n)
    op = _op("disk", n, Constant(1.0))
    X, Y = g.mesh()
    R = np.hypot(X, Y)
    worst = {}
    for src in ((0.0, 0.0), (0.3, 0.2)):
        G = green_column(op, src)
        m = (g.kind == INTERIOR) & (1 - R >= 4 * g.h) & (np.hypot(X - src[0], Y - src[1]) >= 4 * g.h)
        ex = np.array([disk_green((x, y), src) for x, y in zip(X[m], Y[m])])
        worst[f"{src[0]:g},{src[1]:g}"] = _f(np.max(np.abs(G[m] - ex) / np.abs(ex)))
    ok = max(worst.values()) <= 0.01
    return _result(2, "disk Green oracle", ok, {"max_rel_error": worst}, {"max_rel_error": 0.01})


def _pair_values(op, x, y, tilde=False):
    """(G(x, y), G(y, x)) where G(., y) is the column with source y."""
    col = green_tilde_column if tilde else green_column
    Gx, Gy = col(op, x), col(op, y)
    return op.grid.interpolate(Gy, x), op.grid.interpolate(Gx, y)


def check_green_symmetry(n=129, tol=DEFAULT_TOL):
    out, ok = {}, True
    pts = [((0.31, 0.42), (0.68, 0.57)), ((0.22, 0.23), (0.52, 0.81))]
    for label, bathy in (("exponential", Exponential(1.0, 1.0, 0.0, 2.0)), ("constant", Constant(2.0))):
        op = _op("square", n, bathy)
        g = op.grid
        sym, ident, rel28, lit28 = 0.0, 0.0, 0.0, 0.0
        for x, y in pts:
            gxy, gyx = _pair_values(op, x, y)
            sym = max(sym, abs(gxy - gyx) / abs(gxy))
            G = green_column(op, y)
            Gt = green_tilde_column(op, y)
            by = float(bathy(*y))
            m = g.kind == INTERIOR
            ident = max(ident, float(np.max(np.abs(G - by * Gt)[m]) / np.max(np.abs(G[m]))))
            txy, tyx = _pair_values(op, x, y, tilde=True)
            bx = float(bathy(*x))
            rel28 = max(rel28, abs(by * txy - bx * tyx) / abs(by * txy))
            lit28 = max(lit28, abs(txy / by - tyx / bx) / abs(txy / by))
        ident_lim = 1e-12 if label == "constant" else 0.01
        good = sym <= 10 * tol and ident <= ident_lim and rel28 <= ident_lim
        ok = ok and good
        out[label] = {"symmetry": sym, "identity": ident, "weighted_symmetry": rel28, "weighted_symmetry_inverse_weight": lit28}
    limits = {"symmetry": 10 * tol, "identity": {"exponential": 0.01, "constant": 1e-12}}
    return _result(3, "Green symmetry and G_b = b(y) G~", ok, out, limits)


def check_circulation_one(n=129):
    src = (0.5, 1.5)
    out, ok = {}, True
    for label, bathy in (("constant", Constant(1.0)), ("linear_slope", LinearSlope(1.0)), ("exponential", Exponential(1.0, 1.0, 0.0, 3.0))):
        op = _op("square", n, bathy, 1.0)
        G = green_column(op, src)
        vals = []
        for k in (4, 8):
            vals.append(circulation(G, point_loop(op.grid, src, k * op.grid.h), op))
        ok = ok and all(abs(v - 1) <= 0.02 for v in vals)
        out[label] = vals
    return _result(4, "circulation-one law", ok, out, {"abs_error": 0.02})


def check_harmonic_measures(n=129):
    g = _grid("annulus", n)
    hd = _measures("annulus", n, Constant(1.0))
    X, Y = g.mesh()
    m = g.kind == INTERIOR
    R = np.where(m, np.hypot(X, Y), 1.0)
    err = _f(np.max(np.abs(hd.measures[0] - (1 - np.log(R)))[m]))
    worst_sum = 0.0
    for name, nn in (("annulus", n), ("two_islands", n)):
        gg = _grid(name, nn)
        d = _measures(name, nn, Constant(1.0))
        ids = gg.interior_flat
        pick = np.random.default_rng(0).choice(ids, size=100, replace=False)
        tot = d.outer.ravel()[pick] + sum(mm.ravel()[pick] for mm in d.measures)
        worst_sum = max(worst_sum, _f(np.max(np.abs(tot - 1))))
    ok = err <= 0.02 and worst_sum <= 1e-8
    return _result(5, "harmonic measures", ok, {"annulus_max_error": err, "partition_of_unity": worst_sum}, {"annulus": 0.02, "partition": 1e-8})


def check_capacity(n=129):
    hd = _measures("annulus", n, Constant(1.0))
    p11 = _f(hd.P[0, 0])
    rel = abs(p11 / (2 * np.pi) - 1)
    mins = {}
    for name, shift, bathy in (
        ("annulus", 0.0, Constant(1.0)),
        ("two_islands", 0.0, Constant(1.0)),
        ("annulus", 4.0, LinearSlope(1.0)),
        ("two_islands", 4.0, LinearSlope(1.0)),
    ):
        P = _measures(name, n, bathy, shift).P
        mins[f"{name}:{bathy.to_dict()['type']}"] = _f(np.min(np.linalg.eigvalsh(P)))
    P1 = _measures("two_islands", n, Constant(1.0)).P
    P3 = _measures("two_islands", n, Constant(3.0)).P
    scale = _f(np.max(np.abs(P3 * 3 - P1)) / np.max(np.abs(P1)))
    ok = rel <= 0.03 and min(mins.values()) > 0 and scale <= 1e-12
    return _result(6, "capacity matrix", ok, {"P11": p11, "P11_rel_error": rel, "min_eigenvalue": mins, "scaling_error": scale},
                   {"P11_rel_error": 0.03, "scaling_error": 1e-12})


def check_duality():
    errs = []
    for n in (129, 257):
        D = dual_form_circulations(_measures("two_islands", n, Constant(1.0)))
        errs.append(_f(np.max(np.abs(D - np.eye(2)))))
    # at round-off the error cannot shrink further; accept that floor
    improves = errs[1] <= errs[0] / 1.5 or errs[1] <= 1e-8
    ok = errs[0] <= 0.05 and improves
    return _result(7, "dual-form duality", ok, {"D_minus_I_129": errs[0], "D_minus_I_257": errs[1]}, {"max": 0.05, "improvement": 1.5, "floor": 1e-8})


def check_underbraced(n=129):
    out, ok = {}, True
    cases = (
        ("annulus", 0.0, Constant(1.0), (math.sqrt(E), 0.0)),
        ("annulus", 4.0, LinearSlope(1.0), (math.sqrt(E), 4.0)),
        ("two_islands", 0.0, Constant(1.0), (0.0, -1.0)),
        ("two_islands", 4.0, LinearSlope(1.0), (0.0, 3.0)),
    )
    for name, shift, bathy, src in cases:
        op = _op(name, n, bathy, shift)
        rows = underbraced_identity_check(op, _measures(name, n, bathy, shift), src)
        worst = max(r["rel_error"] for r in rows)
        out[f"{name}:{bathy.to_dict()['type']}"] = _f(worst)
        ok = ok and worst <= 0.03
    return _result(8, "underbraced identity", ok, {"max_rel_error": out}, {"max_rel_error": 0.03})


def check_orthogonality(n=129):
    out = {}
    for name, shift, bathy, src in (
        ("annulus", 0.0, Constant(1.0), (math.sqrt(E), 0.0)),
        ("two_islands", 4.0, LinearSlope(1.0), (0.3, 3.2)),
    ):
        op = _op(name, n, bathy, shift)
        out[f"{name}:{bathy.to_dict()['type']}"] = _f(orthogonality_check(green_column(op, src), _measures(name, n, bathy, shift)))
    ok = max(out.values()) <= 1e-3
    return _result(9, "orthogonality", ok, {"normalized_inner_product": out}, {"max": 1e-3})


# dynamics

MODE_CASES = {
    "square_pair": (lambda: Domain(Rectangle(-1, 1, -1, 1)), 2 / 128, Constant(1.0), [(-0.05, 0), (0.05, 0)], [1, -1], None),
    "disk_three": (lambda: Domain(Circle(0, 0, 1)), 2 / 128, Constant(1.0), [(0.05, 0), (-0.05, 0.03), (0, -0.06)], [1, -0.6, 0.8], None),
    "exponential_pair": (lambda: Domain(Rectangle(-1, 1, -1, 1)), 2 / 128, Exponential(1, 0.3, 0, 10), [(-0.05, 0.1), (0.05, 0.1)], [1, -1], None),
    "slope_pair": (lambda: Domain(Rectangle(-1, 1, 2, 4)), 2 / 128, LinearSlope(1.0), [(-0.05, 3), (0.05, 3)], [1, -1], None),
    "two_islands_pair": (lambda: two_islands(), 4 / 128, Constant(1.0), [(0, -1.0), (0.1, -1.0)], [1, 1], [0.5, -0.3]),
}


def mode_disagreement(name):
    make, h, bathy, z, gam, p = MODE_CASES[name]
    ctx = SimulationContext(build_grid(make(), h), bathy, p=p)
    s = VortexSystem(z, gam, [0.05] * len(z))
    vf = vortex_velocities(s, ctx)
    vh = hamiltonian_velocities(s, ctx)
    return _f(np.max(np.abs(vf - vh)) / np.max(np.abs(vf)))


def pair_rotation_drift(nper=30, periods=10):
    """H drift of a co-rotating pair in the unit disk (Hamiltonian mode)."""
    g = build_grid(Domain(Circle(0, 0, 1)), 1 / 16)
    ctx = SimulationContext(g, Constant(1.0), mode="hamiltonian", fd_step=g.h / 8)
    s = VortexSystem([(0.3, 0.1), (-0.1, 0.1)], [1, 0.5], [0.01, 0.01])
    period = 2 * np.pi * 2 * np.pi * 0.3**2 / 1.5
    out = []
    for dt in (period / nper, period / (2 * nper)):
        tr = simulate(s, ctx, dt, periods * period, sample_every=2, circulations=False)
        out.append(tr.h_drift())
    return out


def check_dynamics():
    dis = {k: mode_disagreement(k) for k in MODE_CASES}
    d1, d2 = pair_rotation_drift()
    ratio = d1 / d2
    ok = max(dis.values()) <= 0.02 and d1 <= 1e-5 and 8 <= ratio <= 32
    return _result(10, "dynamics cross-validation", ok,
                   {"mode_rel_difference": dis, "H_drift": [d1, d2], "drift_ratio": ratio},
                   {"mode_rel_difference": 0.02, "H_drift": 1e-5, "drift_ratio": [8, 32]})


def check_rip():
    inv = []
    ev = []
    for dt in (0.005, 0.0025):
        tr = rip_pair_simulate(RipPairState(1.0, 1.0, 2.0, 2.0), dt, 2.0)
        ev.append(tr.event_time)
        inv.append(tr.invariant_drift())
    half = rip_pair_simulate(RipPairState(1.0, 1.0, 2.0, 0.5), 0.005, 10.0)
    inv.append(half.invariant_drift())
    x_at_4 = half.x_at_y(4.0)
    lin = rip_pair_simulate(RipPairState(1.0, 1.0, 2.0, 0.0), 0.01, 3.0)
    p0 = max(abs(lin.x[-1] - 1.0), abs(lin.y[-1] - 4.0))
    stab = abs(ev[1] - ev[0]) / abs(ev[1])
    ok = max(inv) <= 1e-8 and stab <= 1e-4 and p0 <= 1e-12 and abs(x_at_4 - 0.5) <= 1e-6
    return _result(11, "rip-pair toy model", ok,
                   {"invariant_drift": max(inv), "event_times": ev, "event_rel_change": stab, "p0_error": p0, "x_at_y4": x_at_4},
                   {"invariant_drift": 1e-8, "event_rel_change": 1e-4, "p0_error": 1e-12})


def check_rings():
    r = RingSystem([0.0], [1.0], [1.0], [0.05])
    exact = single_ring_speed(1.0, 1.0, 0.05)
    steps = [0.0125, 0.00625]
    errs = [abs(ring_velocities(r, d)[0, 0] - exact) for d in steps]
    order = math.log2(errs[0] / errs[1])
    pair = RingSystem([0.0, 0.5], [1.0, 1.0], [1.0, 1.0], [0.05, 0.05])
    tr = ring_simulate(pair, 0.02, 50.0)
    rep = tr.report()
    ok = 3.5 <= order <= 4.5 and rep["radii_crossings"] >= 2 and rep["impulse_rel_drift"] <= 1e-4 and not rep["early_halt"]
    return _result(12, "ring oracle", ok,
                   {"fd_errors": errs, "fd_order": order, "radii_crossings": rep["radii_crossings"], "impulse_rel_drift": rep["impulse_rel_drift"]},
                   {"fd_order": [3.5, 4.5], "radii_crossings": 2, "impulse_rel_drift": 1e-4})


def ring_lake_values(n=97):
    h = 6 / (n - 1)
    g = build_grid(Domain(Rectangle(-3, 3, h, 6 + h)), h)
    op = assemble_lb(g, LinearSlope(1.0))
    z1, z2 = (-0.25, 1.0), (0.25, 1.0)
    gb = 0.5 * (g.interpolate(green_column(op, z1), z2) + g.interpolate(green_column(op, z2), z1))
    return gb, dyson_green(*z1, *z2)


def check_ring_lake():
    gb, dy = ring_lake_values()
    rel = abs(gb / dy - 1)
    return _result(13, "ring/lake consistency", rel <= 0.05, {"G_b": gb, "dyson": dy, "rel_error": rel}, {"rel_error": 0.05})


def beach_run(h=1 / 32, richardson_b_factor=False, T=8.0):
    """Opposite pair on b = y, offshore along +y, in a tall box standing in for the half-plane."""
    g = build_grid(Domain(Rectangle(-2, 2, 0.5, 8.5)), h)
    ctx = SimulationContext(g, LinearSlope(1.0), richardson_b_factor=richardson_b_factor)
    s = VortexSystem([(-0.3, 1.5), (0.3, 1.5)], [1.0, -1.0], [0.02, 0.02])
    return simulate(s, ctx, default_dt(s, g), T, circulations=False)


def _beach_stats(tr):
    xy = tr.xy()
    y = xy[:, :, 1]
    ax = np.abs(xy[:, :, 0])
    rising = bool(np.all(np.diff(y, axis=0) > 0))
    closing = bool(np.all(np.diff(ax, axis=0) < 0))
    mirror = _f(np.max(np.abs(xy[:, 0, 0] + xy[:, 1, 0]) + np.abs(xy[:, 0, 1] - xy[:, 1, 1])))
    return {"samples": len(tr.times), "halted": tr.halted, "y_increasing": rising, "abs_x_decreasing": closing,
            "mirror_error": mirror, "final_y": _f(y[-1, 0]), "final_abs_x": _f(ax[-1, 0])}


def check_beach():
    # self-propulsion without the 1/b factor, the form the toy model integrates
    main = _beach_stats(beach_run())
    # with the 1/b factor the approach stalls offshore; reported, not asserted
    alt = _beach_stats(beach_run(h=1 / 16, richardson_b_factor=True))
    ok = main["y_increasing"] and main["abs_x_decreasing"] and main["mirror_error"] <= 1e-8 and main["halted"]
    return _result(14, "sloping-beach pair", ok, {"richardson_without_b": main, "richardson_with_b": alt}, {"mirror_error": 1e-8})


def check_born_dyson(n=65):
    g = _grid("square", n)
    X, Y = g.mesh()
    used = g.kind != 0
    f = np.where(used, 1.0, np.nan)
    a = np.where(used, 1 + 0.05 * np.sin(np.pi * X) * np.sin(np.pi * Y), np.nan)
    _, res = born_dyson_solve(g, a, f, 1)
    _, res_c = born_dyson_solve(g, np.where(used, 2.0, np.nan), f, 0)
    ratio = res[1] / res[0]
    # constant a: order 0 already solves the discrete problem
    scale = float(np.sqrt(np.sum(f[g.kind == INTERIOR] ** 2) * g.h**2))
    const = res_c[0] / scale
    ok = ratio <= 0.1 and const <= 1e-10
    return _result(15, "Born-Dyson", ok, {"residuals": res, "ratio": ratio, "constant_a_rel_residual": const}, {"ratio": 0.1, "constant_a": 1e-10})


CHECKS = {
    1: check_convergence,
    2: check_disk_green,
    3: check_green_symmetry,
    4: check_circulation_one,
    5: check_harmonic_measures,
    6: check_capacity,
    7: check_duality,
    8: check_underbraced,
    9: check_orthogonality,
    10: check_dynamics,
    11: check_rip,
    12: check_rings,
    13: check_ring_lake,
    14: check_beach,
    15: check_born_dyson,
}


def run_suite(criteria=None):
    keys = sorted(CHECKS) if criteria is None else sorted(set(criteria))
    unknown = [k for k in keys if k not in CHECKS]
    if unknown:
        from .errors import InputError

        raise InputError(f"unknown criteria {unknown}; available {sorted(CHECKS)}")
    results = [CHECKS[k]() for k in keys]
    return {"passed": all(r["passed"] for r in results), "checks": results}


def report_json(report):
    return json.dumps(report, indent=2, sort_keys=True) + "\n"
