import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lakevortex.errors import InputError
from lakevortex.rings import (
    RingSystem,
    RipPairState,
    _self_term,
    dyson_green,
    dyson_green_elliptic,
    ring_hamiltonian,
    ring_simulate,
    ring_velocities,
    rip_event_time,
    rip_pair_simulate,
    single_ring_speed,
)

# frozen from mpmath at 30 digits (see _mp_dyson)
DYSON_0102 = 0.1389665494816703


def _mp_dyson(x, y, xp, yp):
    mpmath.mp.dps = 30
    c = (x - xp) ** 2 + y * y + yp * yp
    f = lambda t: mpmath.cos(t) / mpmath.sqrt(c - 2 * y * yp * mpmath.cos(t))
    return float(y * yp / (4 * mpmath.pi) * mpmath.quad(f, [0, mpmath.pi, 2 * mpmath.pi]))


def test_dyson_frozen_value():
    assert _mp_dyson(0, 1, 0, 2) == pytest.approx(DYSON_0102, rel=1e-14)
    assert dyson_green(0, 1, 0, 2) == pytest.approx(DYSON_0102, rel=1e-12)
    assert float(dyson_green_elliptic(0, 1, 0, 2)) == pytest.approx(DYSON_0102, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(-2, 2), st.floats(0.1, 3), st.floats(-2, 2), st.floats(0.1, 3))
def test_kernels_agree_and_symmetric(x, y, xp, yp):
    if math.hypot(x - xp, y - yp) < 0.05:
        return
    q = dyson_green(x, y, xp, yp)
    e = float(dyson_green_elliptic(x, y, xp, yp))
    assert e == pytest.approx(q, rel=1e-8)
    assert dyson_green(xp, yp, x, y) == pytest.approx(q, rel=1e-10)
    assert q > 0


def test_dyson_limits():
    # vanishes like y'^2 as the second ring shrinks to the axis
    a, b = dyson_green(0, 1, 0.5, 1e-3), dyson_green(0, 1, 0.5, 5e-4)
    assert a / b == pytest.approx(4.0, rel=1e-3)
    vals = [dyson_green(0, 1, d, 1) for d in (0.5, 1.0, 2.0, 4.0)]
    assert all(u > v for u, v in zip(vals, vals[1:]))
    with pytest.raises(InputError):
        dyson_green(0, 0, 1, 1)
    with pytest.raises(InputError):
        dyson_green(0, 1, 0, 1)


def test_self_term_vanishes_at_critical_core():
    # the zero lies outside eps < y/2, so the term itself is checked, not a RingSystem
    y = 1.3
    assert _self_term(2.0, y, 8 * y * math.exp(-1.75)) == pytest.approx(0.0, abs=1e-14)
    r = RingSystem([0.0], [y], [2.0], [0.05])
    assert ring_hamiltonian(r) == pytest.approx(4 / (4 * math.pi) * y * (math.log(8 * y / 0.05) - 1.75), rel=1e-14)


def test_single_ring_velocity_and_fd_order():
    r = RingSystem([0.0], [1.0], [1.0], [0.05])
    v = ring_velocities(r)[0]
    assert v[0] == pytest.approx(single_ring_speed(1.0, 1.0, 0.05), rel=1e-8)
    assert abs(v[1]) < 1e-12
    with pytest.raises(InputError):
        ring_velocities(r, fd_step=0.05)


def test_relabel_invariance():
    r = RingSystem([0.0, 0.5, -0.3], [1.0, 1.2, 0.7], [1.0, -0.4, 0.8], [0.05, 0.04, 0.03])
    perm = [2, 0, 1]
    q = RingSystem(r.x[perm], r.y[perm], r.gammas[perm], r.eps[perm])
    assert ring_hamiltonian(q) == pytest.approx(ring_hamiltonian(r), rel=1e-13)
    assert np.allclose(ring_velocities(q), ring_velocities(r)[perm], atol=1e-10)
    assert ring_hamiltonian(r, "quad") == pytest.approx(ring_hamiltonian(r), rel=1e-9)


def test_ring_system_validation():
    with pytest.raises(InputError):
        RingSystem([0.0], [-1.0], [1.0], [0.05])
    with pytest.raises(InputError):
        RingSystem([0.0], [1.0], [1.0], [0.6])
    with pytest.raises(InputError):
        RingSystem([0.0, 0.0], [1.0, 1.0], [1.0, 1.0], [0.05, 0.05])
    with pytest.raises(InputError):
        ring_hamiltonian(RingSystem([0.0], [1.0], [1.0], [0.05]), kernel="nope")


def test_leapfrogging_pair(tmp_path):
    tr = ring_simulate(RingSystem([0.0, 0.5], [1.0, 1.0], [1.0, 1.0], [0.05, 0.05]), 0.02, 20.0, sample_every=5)
    rep = tr.report()
    assert not rep["early_halt"]
    assert rep["radii_crossings"] >= 2
    assert rep["impulse_rel_drift"] < 1e-6
    assert rep["H_rel_drift"] < 1e-4
    path = tmp_path / "r.csv"
    tr.write_csv(path)
    assert path.read_text().splitlines()[0] == "t,x_1,y_1,x_2,y_2,H"


def test_head_on_pair_spreads_and_halts():
    # opposite rings approaching each other: radii grow, then the run stops when the cores touch
    tr = ring_simulate(RingSystem([-0.5, 0.5], [1.0, 1.0], [1.0, -1.0], [0.05, 0.05]), 0.01, 5.0)
    y = np.asarray(tr.y)[:, 0]
    assert np.all(np.diff(y) > 0)
    assert tr.halted and "collided" in tr.halt_reason


def test_rip_invariant_and_event():
    s = RipPairState(1.0, 1.0, 2.0, 2.0)
    assert rip_event_time(s) == pytest.approx(1.0)
    tr = rip_pair_simulate(s, 0.005, 2.0)
    assert tr.invariant_drift() < 1e-8
    assert tr.event_time == pytest.approx(1.0, abs=2e-3)
    assert rip_event_time(RipPairState(1.0, 1.0, 2.0, 0.5)) is None


def test_rip_p_zero_and_half():
    lin = rip_pair_simulate(RipPairState(1.0, 1.0, 2.0, 0.0), 0.01, 3.0)
    assert lin.x[-1] == pytest.approx(1.0, abs=1e-12) and lin.y[-1] == pytest.approx(4.0, abs=1e-12)
    half = rip_pair_simulate(RipPairState(1.0, 1.0, 2.0, 0.5), 0.005, 10.0)
    # x y^(1/2) = 1
    assert half.x_at_y(4.0) == pytest.approx(0.5, abs=1e-6)
    assert half.event_time is None


def test_rip_errors(tmp_path):
    with pytest.raises(InputError):
        rip_pair_simulate(RipPairState(1.0, 1.0, 2.0, 2.0), 0.0, 1.0)
    with pytest.raises(InputError):
        RipPairState(-1.0, 1.0, 2.0, 2.0)
    with pytest.raises(InputError):
        RipPairState(1.0, 1.0, 2.0, -0.1)
    tr = rip_pair_simulate(RipPairState(1.0, 1.0, 2.0, 2.0), 0.01, 2.0)
    p = tmp_path / "rip.csv"
    tr.write_csv(p)
    assert p.read_text().splitlines()[0] == "t,x,y,I,event_time"
