"""Coaxial vortex rings (the b = y case) and the sloping-beach rip-pair ODE.

Rings live in the meridian half-plane: x is the axial position and y > 0 the
ring radius. The phase-space form is sum_j gamma_j y_j dx_j ^ dy_j.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.special import ellipe, ellipk

from .errors import InputError

SELF_CONST = 7.0 / 4.0
FMT = "%.12e"


def dyson_green(x, y, xp, yp, quad_tol=1e-10):
    """(y y' / 4 pi) * integral over [0, 2 pi] of cos t / sqrt(...) by adaptive quadrature."""
    if y <= 0 or yp <= 0:
        raise InputError("ring radii must be positive")
    if x == xp and y == yp:
        raise InputError("dyson_green is singular at coincident points")
    dx2 = (x - xp) ** 2 + y * y + yp * yp
    f = lambda t: math.cos(t) / math.sqrt(dx2 - 2 * y * yp * math.cos(t))
    # integrand symmetric under t -> 2 pi - t
    val, _ = quad(f, 0.0, math.pi, epsabs=0.0, epsrel=quad_tol, limit=500)
    return y * yp / (4 * math.pi) * 2 * val


def dyson_green_elliptic(x, y, xp, yp):
    """Same kernel through complete elliptic integrals (vectorised)."""
    x, y, xp, yp = (np.asarray(v, float) for v in (x, y, xp, yp))
    m = 4 * y * yp / ((x - xp) ** 2 + (y + yp) ** 2)
    k = np.sqrt(m)
    return np.sqrt(y * yp) / (2 * np.pi) * ((2 / k - k) * ellipk(m) - 2 / k * ellipe(m))


def _kernel(kind):
    if kind == "elliptic":
        return dyson_green_elliptic
    if kind == "quad":
        return np.vectorize(dyson_green, otypes=[float])
    raise InputError(f"unknown ring kernel {kind!r}")


@dataclass(frozen=True)
class RingSystem:
    x: np.ndarray
    y: np.ndarray
    gammas: np.ndarray
    eps: np.ndarray

    def __post_init__(self):
        arrs = [np.array(v, float).reshape(-1) for v in (self.x, self.y, self.gammas, self.eps)]
        if len({a.size for a in arrs}) != 1:
            raise InputError("ring arrays must have equal length")
        x, y, g, e = arrs
        if np.any(y <= 0):
            raise InputError("ring radii must be positive")
        if np.any(e <= 0) or np.any(e >= y / 2):
            raise InputError("ring cores must satisfy 0 < eps < y/2")
        for k in range(x.size):
            for l in range(k + 1, x.size):
                if x[k] == x[l] and y[k] == y[l]:
                    raise InputError(f"rings {k + 1} and {l + 1} coincide")
        for name, a in zip(("x", "y", "gammas", "eps"), arrs):
            object.__setattr__(self, name, a)

    @property
    def n(self):
        return self.x.size

    def moved(self, x, y):
        return RingSystem(x, y, self.gammas, self.eps)

    def impulse(self):
        return float(np.sum(self.gammas * self.y**2))


def _self_term(gam, y, eps):
    return gam**2 / (4 * np.pi) * y * (np.log(8 * y / eps) - SELF_CONST)


def ring_hamiltonian(rings: RingSystem, kernel="elliptic"):
    """Self terms plus (1/2 pi) times the interaction summed over ordered pairs."""
    G = _kernel(kernel)
    H = float(np.sum(_self_term(rings.gammas, rings.y, rings.eps)))
    for i in range(rings.n):
        for j in range(rings.n):
            if i != j:
                H += rings.gammas[i] * rings.gammas[j] * float(G(rings.x[i], rings.y[i], rings.x[j], rings.y[j])) / (2 * np.pi)
    return H


def single_ring_speed(gamma, y, eps):
    """Axial speed from the self term: (gamma / 4 pi y) [ln(8y/eps) - 3/4]."""
    return gamma / (4 * np.pi * y) * (np.log(8 * y / eps) - 0.75)


def ring_velocities(rings: RingSystem, fd_step=None, kernel="elliptic"):
    """Fourth-order central differences of H through gamma_j y_j (xdot, ydot) = (H_y, -H_x)."""
    emin = float(np.min(rings.eps))
    d = emin / 8 if fd_step is None else fd_step
    if not 0 < d <= emin / 4 * (1 + 1e-12):
        raise InputError(f"fd_step must lie in (0, min eps / 4 = {emin / 4:g}]")
    G = _kernel(kernel)
    x, y, gam, eps = rings.x, rings.y, rings.gammas, rings.eps
    shifts = np.array([-2.0, -1.0, 1.0, 2.0])
    vel = np.zeros((rings.n, 2))
    for j in range(rings.n):
        grad = []
        for c in range(2):
            xj = x[j] + (shifts * d if c == 0 else 0.0)
            yj = y[j] + (shifts * d if c == 1 else 0.0)
            # terms of H involving ring j; both orders of every pair
            E = _self_term(gam[j], yj, eps[j]) * np.ones(4)
            for k in range(rings.n):
                if k != j:
                    E = E + gam[j] * gam[k] * (G(xj, yj, x[k], y[k]) + G(x[k], y[k], xj, yj)) / (2 * np.pi)
            grad.append((8 * (E[2] - E[1]) - (E[3] - E[0])) / (12 * d))
        w = gam[j] * y[j]
        vel[j] = (grad[1] / w, -grad[0] / w)
    return vel


@dataclass
class RingTrajectory:
    times: list = field(default_factory=list)
    x: list = field(default_factory=list)
    y: list = field(default_factory=list)
    H: list = field(default_factory=list)
    impulse: list = field(default_factory=list)
    halted: bool = False
    halt_reason: str = ""
    impulse_scale: float = 1.0

    def record(self, t, rings, kernel):
        self.times.append(float(t))
        self.x.append(rings.x.copy())
        self.y.append(rings.y.copy())
        self.H.append(ring_hamiltonian(rings, kernel))
        self.impulse.append(rings.impulse())

    def radii_crossings(self, a=0, b=1):
        d = np.asarray(self.y)[:, a] - np.asarray(self.y)[:, b]
        s = np.sign(d)
        s = s[s != 0]
        return int(np.sum(s[1:] != s[:-1]))

    def write_csv(self, path):
        n = len(self.x[0])
        head = ["t"] + [f"{a}_{k}" for k in range(1, n + 1) for a in ("x", "y")] + ["H"]
        with open(path, "w") as fh:
            fh.write(",".join(head) + "\n")
            for k, t in enumerate(self.times):
                xy = np.column_stack([self.x[k], self.y[k]]).ravel()
                fh.write(",".join(FMT % v for v in [t, *xy, self.H[k]]) + "\n")

    def report(self):
        H = np.asarray(self.H)
        P = np.asarray(self.impulse)
        return {
            "samples": len(self.times),
            "t_final": self.times[-1],
            "early_halt": self.halted,
            "halt_reason": self.halt_reason,
            "H_rel_drift": float(np.max(np.abs(H - H[0])) / abs(H[0])),
            "impulse_rel_drift": float(np.max(np.abs(P - P[0])) / self.impulse_scale),
            "radii_crossings": self.radii_crossings() if len(self.x[0]) >= 2 else 0,
            "final_x": [float(v) for v in self.x[-1]],
            "final_y": [float(v) for v in self.y[-1]],
        }


def _ring_halt(rings):
    if np.any(rings.y <= rings.eps):
        return "ring radius reached its core size"
    for i in range(rings.n):
        for j in range(i + 1, rings.n):
            if math.hypot(rings.x[i] - rings.x[j], rings.y[i] - rings.y[j]) < max(rings.eps[i], rings.eps[j]):
                return f"rings {i + 1} and {j + 1} collided"
    return ""


def ring_simulate(rings: RingSystem, dt, T, sample_every=1, fd_step=None, kernel="elliptic"):
    if not dt > 0:
        raise InputError("dt must be positive")
    nsteps = max(1, math.ceil(T / dt - 1e-9))
    dt = T / nsteps
    traj = RingTrajectory()
    traj.impulse_scale = abs(rings.impulse()) or float(np.sum(np.abs(rings.gammas) * rings.y**2))
    traj.record(0.0, rings, kernel)
    f = lambda r: ring_velocities(r, fd_step, kernel)
    for k in range(1, nsteps + 1):
        p = np.column_stack([rings.x, rings.y])
        try:
            k1 = f(rings)
            k2 = f(rings.moved(*(p + 0.5 * dt * k1).T))
            k3 = f(rings.moved(*(p + 0.5 * dt * k2).T))
            k4 = f(rings.moved(*(p + dt * k3).T))
            new = p + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            rings = rings.moved(*new.T)
        except InputError as e:
            traj.halted, traj.halt_reason = True, str(e)
            break
        reason = _ring_halt(rings)
        if reason:
            traj.halted, traj.halt_reason = True, reason
            traj.record(k * dt, rings, kernel)
            break
        if k % sample_every == 0 or k == nsteps:
            traj.record(k * dt, rings, kernel)
    return traj


@dataclass(frozen=True)
class RipPairState:
    x: float
    y: float
    gamma: float
    p: float

    def __post_init__(self):
        if not (self.x > 0 and self.y > 0):
            raise InputError("rip pair needs x > 0 and y > 0")
        if self.p < 0:
            raise InputError("p must be non-negative")

    def invariant(self):
        return self.x * self.y**self.p


def rip_rhs(x, y, gamma, p):
    return -p * gamma / (2 * y), gamma / (2 * x)


@dataclass
class RipTrajectory:
    times: list = field(default_factory=list)
    x: list = field(default_factory=list)
    y: list = field(default_factory=list)
    I: list = field(default_factory=list)
    event_time: float | None = None

    def invariant_drift(self):
        I = np.asarray(self.I)
        return float(np.max(np.abs(I - I[0])) / abs(I[0]))

    def x_at_y(self, yq):
        ys = np.asarray(self.y)
        k = int(np.searchsorted(ys, yq))
        if k == 0 or k >= len(ys):
            raise InputError(f"y = {yq:g} not reached")
        t = (yq - ys[k - 1]) / (ys[k] - ys[k - 1])
        return float(self.x[k - 1] + t * (self.x[k] - self.x[k - 1]))

    def write_csv(self, path):
        ev = "nan" if self.event_time is None else FMT % self.event_time
        with open(path, "w") as fh:
            fh.write("t,x,y,I,event_time\n")
            for t, x, y, I in zip(self.times, self.x, self.y, self.I):
                fh.write(",".join(FMT % v for v in (t, x, y, I)) + "," + ev + "\n")

    def report(self):
        return {
            "samples": len(self.times),
            "t_final": self.times[-1],
            "event_time": self.event_time,
            "invariant_rel_drift": self.invariant_drift(),
            "final_x": self.x[-1],
            "final_y": self.y[-1],
        }


def rip_pair_simulate(state: RipPairState, dt, T, event_frac=1e-6, sample_every=1):
    """RK4 with steps shrunk in proportion to the local time scale.

    The step is dt times min(1, tau / tau_0) where tau = min(x/|xdot|, y/|ydot|),
    so halving dt halves every step and the blow-up (x -> 0 with y -> inf,
    which occurs at finite time only for p > 1) is resolved. The event time is
    the linear interpolate of the first crossing of x = event_frac * x(0).
    """
    if not dt > 0:
        raise InputError("dt must be positive")
    g, p = state.gamma, state.p
    x, y = float(state.x), float(state.y)
    x0 = x
    thresh = event_frac * x0

    def tau(x, y):
        fx, fy = rip_rhs(x, y, g, p)
        a = x / abs(fx) if fx != 0 else math.inf
        b = y / abs(fy) if fy != 0 else math.inf
        return min(a, b)

    tau0 = tau(x, y)
    traj = RipTrajectory()
    t = 0.0
    traj.times.append(t), traj.x.append(x), traj.y.append(y), traj.I.append(x * y**p)
    k = 0
    while t < T * (1 - 1e-14):
        hs = min(dt * min(1.0, tau(x, y) / tau0), T - t)
        k1 = rip_rhs(x, y, g, p)
        k2 = rip_rhs(x + 0.5 * hs * k1[0], y + 0.5 * hs * k1[1], g, p)
        k3 = rip_rhs(x + 0.5 * hs * k2[0], y + 0.5 * hs * k2[1], g, p)
        k4 = rip_rhs(x + hs * k3[0], y + hs * k3[1], g, p)
        xn = x + hs / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        yn = y + hs / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        if not (math.isfinite(xn) and math.isfinite(yn)):
            raise InputError("rip pair integration produced non-finite values")
        if xn < thresh:
            traj.event_time = t + hs * (x - thresh) / (x - xn)
            t += hs
            x, y = xn, yn
            traj.times.append(t), traj.x.append(x), traj.y.append(y), traj.I.append(x * y**p if x > 0 else 0.0)
            break
        t += hs
        x, y = xn, yn
        k += 1
        if k % sample_every == 0 or t >= T * (1 - 1e-14):
            traj.times.append(t), traj.x.append(x), traj.y.append(y), traj.I.append(x * y**p)
    return traj


def rip_event_time(state: RipPairState):
    """Closed-form blow-up time for p > 1, None otherwise."""
    if state.p <= 1:
        return None
    return 2 * state.invariant() * state.y ** (1 - state.p) / ((state.p - 1) * state.gamma)
