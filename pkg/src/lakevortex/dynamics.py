"""Point-vortex dynamics over variable depth (lake model).

Phase space carries the weighted form sum_j gamma_j b(z_j) dx_j ^ dy_j, so
gamma_j b_j xdot_j = dH/dy_j and gamma_j b_j ydot_j = -dH/dx_j.

Green function values come from ``SmoothGreen`` (analytic singular part plus
a solved smooth remainder), which keeps H and the velocities smooth in the
vortex positions. ``total_stream`` builds the plain discrete stream field used
for circulation diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .bathymetry import sample_bathymetry
from .elliptic import DEFAULT_TOL, SmoothGreen, assemble_lb, green_columns, phi0
from .errors import ClearanceError, InputError, SimulationError
from .harmonic import b_vector, circulation, harmonic_energy, harmonic_measures, harmonic_stream

FMT = "%.12e"


@dataclass(frozen=True)
class VortexSystem:
    positions: np.ndarray
    gammas: np.ndarray
    eps: np.ndarray

    def __post_init__(self):
        pos = np.array(self.positions, float).reshape(-1, 2)
        gam = np.array(self.gammas, float).reshape(-1)
        eps = np.array(self.eps, float).reshape(-1)
        if gam.shape[0] != pos.shape[0] or eps.shape[0] != pos.shape[0]:
            raise InputError("positions, gammas and eps must have the same length")
        if np.any(gam == 0) or not np.all(np.isfinite(gam)):
            raise InputError("vortex strengths must be finite and nonzero")
        if np.any(~(eps > 0)):
            raise InputError("core radii must be positive")
        for k in range(len(pos)):
            for l in range(k + 1, len(pos)):
                if np.all(pos[k] == pos[l]):
                    raise InputError(f"vortices {k + 1} and {l + 1} coincide")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "gammas", gam)
        object.__setattr__(self, "eps", eps)

    @property
    def n(self):
        return len(self.gammas)

    def moved(self, positions):
        return replace(self, positions=np.asarray(positions, float).reshape(-1, 2))

    def permuted(self, perm):
        perm = np.asarray(perm)
        return VortexSystem(self.positions[perm], self.gammas[perm], self.eps[perm])


class SimulationContext:
    """Everything fixed during a run: grid, operator, measures, flags."""

    def __init__(
        self,
        grid,
        bathy,
        p=None,
        variant="dekeyser",
        tol=DEFAULT_TOL,
        mode="field",
        richardson_b_factor=True,
        include_regular_self=False,
        fd_step=None,
        method="direct",
        threads=1,
    ):
        if variant not in ("log", "caowan", "dekeyser"):
            raise InputError(f"unknown template variant {variant!r}")
        if mode not in ("field", "hamiltonian"):
            raise InputError(f"unknown desingularization mode {mode!r}")
        self.grid = grid
        self.bathy = bathy
        self.b = sample_bathymetry(bathy, grid)
        self.op = assemble_lb(grid, self.b, bathy=bathy, method=method)
        self.data = harmonic_measures(self.op, tol=tol)
        p = np.zeros(grid.g) if p is None else np.asarray(p, float)
        if p.shape != (grid.g,):
            raise InputError(f"circulations: expected {grid.g} values, got {p.size}")
        self.p = p
        self.variant = variant
        self.tol = tol
        self.mode = mode
        self.richardson_b_factor = richardson_b_factor
        self.include_regular_self = include_regular_self
        self.fd_step = grid.h / 2 if fd_step is None else fd_step
        self.threads = threads
        self.green = SmoothGreen(self.op, bathy)

    @property
    def h(self):
        return self.grid.h

    def quantize(self, z):
        q = self.h / 16
        return (round(z[0] / q) * q, round(z[1] / q) * q)


def check_state(state: VortexSystem, ctx: SimulationContext, floor=2.0):
    for k, z in enumerate(state.positions):
        ctx.grid.check_clearance(z, floor * ctx.h, f"vortex {k + 1}")


def min_pair_distance(state):
    pos = state.positions
    best = np.inf
    for k in range(len(pos)):
        for l in range(k + 1, len(pos)):
            best = min(best, float(np.hypot(*(pos[k] - pos[l]))))
    return best


def min_clearance(state, ctx):
    if state.n == 0:
        return np.inf
    return float(np.min(ctx.grid.domain.clearance(state.positions[:, 0], state.positions[:, 1])))


def total_stream(state: VortexSystem, ctx: SimulationContext):
    """Discrete psi = sum_k gamma_k G_b(., z_k) + psi_circ on the grid."""
    check_state(state, ctx)
    g = ctx.grid
    psi = np.zeros((g.ny, g.nx))
    if state.n:
        cols = green_columns(ctx.op, [ctx.quantize(z) for z in state.positions], tol=ctx.tol)
        for gam, col in zip(state.gammas, cols):
            psi = psi + gam * col
    B = b_vector(ctx.p, state, ctx.data)
    return psi + harmonic_stream(B, ctx.data)


def island_circulations(state, ctx, psi=None):
    psi = total_stream(state, ctx) if psi is None else psi
    return [circulation(psi, lp, ctx.op) for lp in ctx.data.loops]


def _b(ctx, z):
    return float(ctx.bathy(z[0], z[1]))


def _d4(f, d):
    """Fourth-order central difference f'(0)."""
    return (8 * (f(d) - f(-d)) - (f(2 * d) - f(-2 * d))) / (12 * d)


def _grad_log_b(ctx, z, d):
    lb = lambda x, y: math.log(float(ctx.bathy(x, y)))
    return _d4(lambda t: lb(z[0] + t, z[1]), d), _d4(lambda t: lb(z[0], z[1] + t), d)


def rich(ctx, z, eps):
    return math.log(1.0 / eps) * math.log(_b(ctx, z)) / (2 * math.pi)


def _b_vec(state, ctx):
    return b_vector(ctx.p, state, ctx.data, interp="spline")


def _hamiltonian(state, ctx, splines):
    pos, gam = state.positions, state.gammas
    sg = ctx.green
    H = 0.0
    n = state.n
    for j in range(n):
        for k in range(j + 1, n):
            H += gam[j] * gam[k] * sg.green_sym(pos[j], pos[k], splines[j], splines[k])
    for j in range(n):
        H += 0.5 * gam[j] ** 2 * rich(ctx, pos[j], state.eps[j])
        if ctx.include_regular_self:
            H += 0.5 * gam[j] ** 2 * float(splines[j].ev(pos[j][1], pos[j][0]))
    H += harmonic_energy(_b_vec(state, ctx), ctx.data)
    return float(H)


def hamiltonian(state: VortexSystem, ctx: SimulationContext):
    """H = pair interactions + Richardson self terms + 0.5 B Q B^T."""
    check_state(state, ctx)
    splines = ctx.green.regular(state.positions, tol=ctx.tol) if state.n else []
    return _hamiltonian(state, ctx, splines)


def _self_velocity_factor(ctx, z):
    b = _b(ctx, z)
    return b if ctx.richardson_b_factor else 1.0


def vortex_velocities(state: VortexSystem, ctx: SimulationContext, mode=None):
    mode = mode or ctx.mode
    if mode == "hamiltonian":
        return hamiltonian_velocities(state, ctx)
    check_state(state, ctx)
    n = state.n
    if n == 0:
        return np.zeros((0, 2))
    pos, gam = state.positions, state.gammas
    sg = ctx.green
    splines = sg.regular(pos, tol=ctx.tol)
    data = ctx.data
    C = _b_vec(state, ctx) @ data.Q if data.g else np.zeros(0)
    step = ctx.h / 4
    vel = np.zeros((n, 2))
    for j in range(n):
        zj = pos[j]

        def psi(z):
            v = 0.0
            for k in range(n):
                if k != j:
                    v += gam[k] * (sg.singular(z, pos[k]) + splines[k].ev(z[1], z[0]))
            v += gam[j] * splines[j].ev(z[1], z[0])
            if ctx.variant != "dekeyser":
                v += gam[j] * _template_offset(ctx, z, zj)
            for c, l in zip(C, range(1, data.g + 1)):
                v += c * data.interp(l, z, "spline")
            return float(v)

        dpx = _d4(lambda t: psi((zj[0] + t, zj[1])), step)
        dpy = _d4(lambda t: psi((zj[0], zj[1] + t)), step)
        bj = _b(ctx, zj)
        gx, gy = _grad_log_b(ctx, zj, step)
        coef = gam[j] * math.log(1.0 / state.eps[j]) / (4 * math.pi * _self_velocity_factor(ctx, zj))
        vel[j] = (dpy / bj + coef * gy, -dpx / bj - coef * gx)
    if not np.all(np.isfinite(vel)):
        bad = int(np.argwhere(~np.isfinite(vel))[0][0])
        raise SimulationError(f"non-finite velocity for vortex {bad + 1}", last_state=state, vortex=bad + 1)
    return vel


def _template_offset(ctx, z, zeta):
    """S_dekeyser - S_variant (smooth near zeta for the caowan variant)."""
    r = math.hypot(z[0] - zeta[0], z[1] - zeta[1])
    bz, bs = _b(ctx, z), _b(ctx, zeta)
    dk = math.sqrt(bz * bs) * phi0(r)
    if ctx.variant == "log":
        return dk - phi0(r)
    return dk - 0.5 * (bz + bs) * phi0(0.5 * (math.sqrt(bz) + math.sqrt(bs)) * r)


def hamiltonian_velocities(state: VortexSystem, ctx: SimulationContext, fd_step=None):
    """Velocities from fourth-order central differences of ``hamiltonian``."""
    d = ctx.fd_step if fd_step is None else fd_step
    h = ctx.h
    if not (h / 8 * (1 - 1e-12) <= d <= h * (1 + 1e-12)):
        raise InputError(f"fd_step must lie in [h/8, h] = [{h / 8:g}, {h:g}], got {d:g}")
    check_state(state, ctx)
    n = state.n
    pos = state.positions
    shifts = (-2, -1, 1, 2)
    moved = []
    for j in range(n):
        for c in range(2):
            for s in shifts:
                z = pos[j].copy()
                z[c] += s * d
                moved.append(z)
    sg = ctx.green
    base = sg.regular(pos, tol=ctx.tol)
    if n:
        for z in moved:
            ctx.grid.check_clearance(z, 2 * h, "perturbed vortex")
        pert = sg.regular(moved, tol=ctx.tol, check=False)
    gam = state.gammas
    data = ctx.data
    B0 = _b_vec(state, ctx)
    grads = np.zeros((n, 2))
    for j in range(n):
        # only the terms of H that depend on z_j; the rest cancels in the differences
        P = np.asarray(moved[8 * j : 8 * j + 8])
        spl = pert[8 * j : 8 * j + 8]
        E = np.zeros(8)
        for k in range(n):
            if k == j:
                continue
            rk = base[k].ev(P[:, 1], P[:, 0])
            rj = np.array([float(s_.ev(pos[k][1], pos[k][0])) for s_ in spl])
            E += gam[j] * gam[k] * (sg.singular(P, pos[k]) + 0.5 * (rk + rj))
        lb = np.log(np.asarray(ctx.bathy(P[:, 0], P[:, 1]), float))
        E += 0.5 * gam[j] ** 2 * math.log(1.0 / state.eps[j]) * lb / (2 * math.pi)
        if ctx.include_regular_self:
            E += 0.5 * gam[j] ** 2 * np.array([float(s_.ev(p_[1], p_[0])) for s_, p_ in zip(spl, P)])
        if data.g:
            m0 = np.array([data.interp(l, pos[j], "spline") for l in range(1, data.g + 1)])
            for m in range(8):
                mm = np.array([data.interp(l, P[m], "spline") for l in range(1, data.g + 1)])
                E[m] += harmonic_energy(B0 + gam[j] * (mm - m0), data)
        for c in range(2):
            Hs = E[4 * c : 4 * c + 4]
            grads[j, c] = (8 * (Hs[2] - Hs[1]) - (Hs[3] - Hs[0])) / (12 * d)
    vel = np.zeros((n, 2))
    for j in range(n):
        w = state.gammas[j] * _b(ctx, pos[j])
        vel[j] = (grads[j, 1] / w, -grads[j, 0] / w)
    return vel


def step_rk4(state: VortexSystem, ctx: SimulationContext, dt, mode=None):
    f = lambda s: vortex_velocities(s, ctx, mode)
    p = state.positions
    k1 = f(state)
    k2 = f(state.moved(p + 0.5 * dt * k1))
    k3 = f(state.moved(p + 0.5 * dt * k2))
    k4 = f(state.moved(p + dt * k3))
    return state.moved(p + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    positions: list = field(default_factory=list)
    H: list = field(default_factory=list)
    T_har: list = field(default_factory=list)
    B: list = field(default_factory=list)
    circulations: list = field(default_factory=list)
    min_pair: list = field(default_factory=list)
    min_clear: list = field(default_factory=list)
    halted: bool = False
    halt_reason: str = ""

    def record(self, t, state, ctx, circulations=True):
        self.times.append(float(t))
        self.positions.append(state.positions.copy())
        self.H.append(hamiltonian(state, ctx))
        B = _b_vec(state, ctx)
        self.B.append(B)
        self.T_har.append(harmonic_energy(B, ctx.data))
        self.circulations.append(island_circulations(state, ctx) if circulations and ctx.grid.g else [])
        self.min_pair.append(min_pair_distance(state))
        self.min_clear.append(min_clearance(state, ctx))

    def xy(self):
        return np.asarray(self.positions)

    def h_drift(self):
        H = np.asarray(self.H)
        return float(np.max(np.abs(H - H[0])) / abs(H[0]))

    def write_csv(self, path):
        n = self.positions[0].shape[0] if self.positions else 0
        g = len(self.B[0]) if self.B else 0
        head = ["t"] + [f"{a}_{k}" for k in range(1, n + 1) for a in ("x", "y")] + ["H", "T_har"]
        head += [f"B_{l}" for l in range(1, g + 1)]
        with open(path, "w") as fh:
            fh.write(",".join(head) + "\n")
            for k, t in enumerate(self.times):
                row = [t, *self.positions[k].ravel(), self.H[k], self.T_har[k], *self.B[k]]
                fh.write(",".join(FMT % v for v in row) + "\n")

    def report(self):
        last = len(self.times) - 1
        return {
            "samples": len(self.times),
            "t_final": self.times[last],
            "early_halt": self.halted,
            "halt_reason": self.halt_reason,
            "H_initial": self.H[0],
            "H_final": self.H[last],
            "H_rel_drift": self.h_drift(),
            "T_har_final": self.T_har[last],
            "B_final": [float(v) for v in self.B[last]],
            "circulations_final": [float(v) for v in self.circulations[last]],
            "min_pair_distance": float(np.min(self.min_pair)),
            "min_clearance": float(np.min(self.min_clear)),
            "final_positions": self.positions[last].tolist(),
        }


def simulate(state: VortexSystem, ctx: SimulationContext, dt, T, sample_every=1, mode=None, circulations=True):
    """RK4 run with diagnostics every ``sample_every`` steps.

    Stops early (flagged) when a vortex comes within 2h of a boundary or of
    another vortex.
    """
    if not dt > 0:
        raise InputError("dt must be positive")
    if T < dt * (1 - 1e-12):
        raise InputError("T must be at least dt")
    # whole number of equal steps ending exactly at T
    nsteps = max(1, math.ceil(T / dt - 1e-9))
    dt = T / nsteps
    floor = 2 * ctx.h
    traj = Trajectory()
    check_state(state, ctx)
    traj.record(0.0, state, ctx, circulations)
    for k in range(1, nsteps + 1):
        try:
            new = step_rk4(state, ctx, dt, mode)
        except ClearanceError as e:
            traj.halted, traj.halt_reason = True, str(e)
            break
        if not np.all(np.isfinite(new.positions)):
            raise SimulationError(f"non-finite positions at step {k}", last_state=state)
        state = new
        if min_clearance(state, ctx) < floor or (state.n > 1 and min_pair_distance(state) < floor):
            traj.halted = True
            traj.halt_reason = "clearance floor reached"
            try:
                traj.record(k * dt, state, ctx, circulations)
            except ClearanceError:
                pass
            break
        if k % sample_every == 0 or k == nsteps:
            traj.record(k * dt, state, ctx, circulations)
    return traj


def default_dt(state: VortexSystem, grid):
    """dt = h / (4 max|gamma| / (2 pi min_clearance))."""
    c = float(np.min(grid.domain.clearance(state.positions[:, 0], state.positions[:, 1])))
    return grid.h / (4 * np.max(np.abs(state.gammas)) / (2 * np.pi * c))
