import math

import numpy as np
import pytest

from lakevortex.bathymetry import Constant, LinearSlope
from lakevortex.dynamics import (
    SimulationContext,
    VortexSystem,
    default_dt,
    hamiltonian,
    island_circulations,
    simulate,
    step_rk4,
    total_stream,
    vortex_velocities,
)
from lakevortex.elliptic import green_column
from lakevortex.errors import InputError
from lakevortex.geometry import Circle, Rectangle
from lakevortex.grid import Domain, build_grid
from lakevortex.verify import mode_disagreement, two_islands


@pytest.fixture(scope="module")
def square():
    return SimulationContext(build_grid(Domain(Rectangle(-1, 1, -1, 1)), 2 / 64), Constant(1.0))


@pytest.fixture(scope="module")
def disk():
    return SimulationContext(build_grid(Domain(Circle(0, 0, 1)), 2 / 64), Constant(1.0))


@pytest.fixture(scope="module")
def islands():
    return SimulationContext(build_grid(two_islands(), 4 / 96), Constant(1.0), p=[0.5, -0.3])


def test_vortex_system_validation():
    with pytest.raises(InputError):
        VortexSystem([(0, 0), (1, 1)], [1.0], [0.1, 0.1])
    with pytest.raises(InputError):
        VortexSystem([(0, 0)], [0.0], [0.1])
    with pytest.raises(InputError):
        VortexSystem([(0, 0)], [1.0], [0.0])
    with pytest.raises(InputError):
        VortexSystem([(0.2, 0.1), (0.2, 0.1)], [1.0, 2.0], [0.1, 0.1])


def test_single_centred_vortex_is_fixed(disk):
    s = VortexSystem([(0.0, 0.0)], [1.0], [0.02])
    # constant depth, no islands: self term and harmonic part vanish
    assert hamiltonian(s, disk) == pytest.approx(0.0, abs=1e-14)
    assert np.max(np.abs(vortex_velocities(s, disk))) < 1e-8
    t = s
    for _ in range(100):
        t = step_rk4(t, disk, 0.01)
    assert np.max(np.abs(t.positions)) < 1e-8


def test_pair_term_is_green_value(square):
    a, b = (-0.2, 0.1), (0.25, -0.05)
    single = hamiltonian(VortexSystem([a], [1.0], [0.01]), square) + hamiltonian(VortexSystem([b], [-2.0], [0.01]), square)
    pair = hamiltonian(VortexSystem([a, b], [1.0, -2.0], [0.01, 0.01]), square)
    g = square.grid
    G = g.interpolate(green_column(square.op, b), a)
    assert pair - single == pytest.approx(-2.0 * G, rel=5e-3)


def test_permutation_equivariance(square):
    s = VortexSystem([(-0.2, 0.1), (0.3, 0.2), (0.0, -0.3)], [1.0, -0.5, 0.8], [0.01, 0.02, 0.03])
    v = vortex_velocities(s, square)
    perm = [2, 0, 1]
    vp = vortex_velocities(s.permuted(perm), square)
    assert np.allclose(vp, v[perm], atol=1e-12)
    assert hamiltonian(s.permuted(perm), square) == pytest.approx(hamiltonian(s, square), rel=1e-12)


def test_opposite_pair_translates_at_point_vortex_speed(square):
    d = 0.1
    s = VortexSystem([(-d / 2, 0.0), (d / 2, 0.0)], [1.0, -1.0], [0.01, 0.01])
    v = vortex_velocities(s, square)
    speed = 1.0 / (2 * math.pi * d)
    assert np.allclose(v[0], v[1], atol=1e-10)
    assert abs(v[0, 0]) < 1e-10
    # walls slow the pair slightly
    assert abs(v[0, 1]) == pytest.approx(speed, rel=0.05)


def test_mirror_symmetry(square):
    s = VortexSystem([(-0.15, 0.2), (0.15, 0.2)], [1.0, -1.0], [0.01, 0.01])
    v = vortex_velocities(s, square)
    assert abs(v[0, 0] + v[1, 0]) < 1e-10 and abs(v[0, 1] - v[1, 1]) < 1e-10


def test_positive_vortex_runs_up_a_right_wall(square):
    # counterclockwise vortex: its negative image beyond x = 1 drives it along +y
    v = vortex_velocities(VortexSystem([(0.8, 0.0)], [1.0], [0.01]), square)[0]
    assert v[1] > 0 and abs(v[0]) < 1e-3 * abs(v[1])


def test_stream_fields(square):
    g = square.grid
    assert np.nanmax(np.abs(total_stream(VortexSystem(np.zeros((0, 2)), [], []), square))) == 0.0
    z = (0.125, -0.25)
    psi = total_stream(VortexSystem([z], [1.5], [0.01]), square)
    assert np.nanmax(np.abs(psi - 1.5 * green_column(square.op, z))) < 1e-12


def test_island_circulations_equal_prescribed(islands):
    s = VortexSystem([(0.0, -1.2), (0.1, 1.2)], [1.0, -0.7], [0.01, 0.01])
    circ = island_circulations(s, islands)
    assert circ == pytest.approx([0.5, -0.3], rel=0.05)


def test_simulate_csv_and_steps(square, tmp_path):
    s = VortexSystem([(-0.05, 0.0), (0.05, 0.0)], [1.0, 1.0], [0.01, 0.01])
    tr = simulate(s, square, 0.03, 0.1, circulations=False)
    assert tr.times[-1] == pytest.approx(0.1, abs=1e-15)
    assert len(tr.times) == 5
    path = tmp_path / "t.csv"
    tr.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x_1,y_1,x_2,y_2,H,T_har"
    assert len(lines) == 6
    with pytest.raises(InputError):
        simulate(s, square, 0.0, 1.0)
    with pytest.raises(InputError):
        simulate(s, square, 0.5, 0.1)


def test_early_halt_at_wall(square):
    s = VortexSystem([(-0.05, 0.5), (0.05, 0.5)], [1.0, -1.0], [0.01, 0.01])
    tr = simulate(s, square, 0.02, 2.0, circulations=False)
    assert tr.halted and tr.times[-1] < 2.0
    assert tr.halt_reason


def test_default_dt(square):
    s = VortexSystem([(0.0, 0.0)], [2.0], [0.01])
    g = square.grid
    assert default_dt(s, g) == pytest.approx(g.h * 2 * math.pi * 1.0 / 8.0)


def test_linear_slope_self_propulsion_direction():
    # on b = y a lone positive vortex drifts along +x, shallow side on its right
    ctx = SimulationContext(build_grid(Domain(Rectangle(-1, 1, 2, 4)), 2 / 64), LinearSlope(1.0))
    v = vortex_velocities(VortexSystem([(0.0, 3.0)], [1.0], [0.05]), ctx)[0]
    assert v[0] > 0 and abs(v[1]) < 0.1 * v[0]


def test_modes_agree_on_square_pair():
    assert mode_disagreement("square_pair") < 0.02
