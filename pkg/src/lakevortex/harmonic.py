"""b-harmonic measures, capacity matrix and circulations.

Circulations are flux sums across the dual edges of a DiscreteLoop:
sum over edges of a_pq (psi_p - psi_q), i.e. the midpoint rule for
-(1/b) dpsi/dn. With velocity (1/b) grad-perp psi, grad-perp = (d_y, -d_x),
this is the counter-clockwise circulation, so a unit positive vortex inside
the loop gives +1.

Sign note: the counter-clockwise circulation of G_b(., z0) around island l
equals -m_l(z0), hence the island circulation of the full stream is
B_l - sum_j gamma_j m_l(z_j) and the reduction vector is
B = p + sum_j gamma_j m_l(z_j).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .elliptic import DEFAULT_TOL, CubicField, _solve_interior, green_column
from .errors import InputError, NumericalError
from .grid import INTERIOR, island_loops


@dataclass(eq=False)
class HarmonicData:
    op: object = field(repr=False)
    measures: list  # node fields m_1..m_g
    outer: np.ndarray | None = field(default=None, repr=False)  # m_0
    P: np.ndarray | None = None
    Q: np.ndarray | None = None
    loops: list = field(default_factory=list, repr=False)
    _splines: list | None = field(default=None, repr=False)

    @property
    def g(self):
        return len(self.measures)

    @property
    def grid(self):
        return self.op.grid

    def cut_data(self, l):
        """Cut-point values of measure l (1-based)."""
        return (self.grid.cut_label == l).astype(float)

    def interp(self, l, z, method="bilinear"):
        if method == "bilinear":
            return self.grid.interpolate(self.measures[l - 1], z)
        if self._splines is None:
            g = self.grid
            self._splines = [CubicField(g, m) for m in self.measures]
        return float(self._splines[l - 1].ev(z[1], z[0]))


def harmonic_measures(op, tol=DEFAULT_TOL, with_outer=True) -> HarmonicData:
    """Solve L_b m_l = 0 with m_l = 1 on island l and 0 on every other curve."""
    grid = op.grid
    g = grid.g
    if g == 0:
        return HarmonicData(op, [], None, np.zeros((0, 0)), np.zeros((0, 0)), [])
    ncurve = g + 1
    cols = range(0 if with_outer else 1, ncurve)
    R = np.column_stack([op.boundary_rhs(np.eye(ncurve)[c][grid.cut_label]) for c in cols])
    U, _, _ = _solve_interior(op, R, tol, None)
    fields = [op.to_field(U[:, k], np.eye(ncurve)[c]) for k, c in enumerate(cols)]
    outer = fields.pop(0) if with_outer else None
    data = HarmonicData(op, fields, outer)
    data.loops = island_loops(grid)
    data.P = capacity_matrix(data)
    data.Q = np.linalg.inv(data.P)
    return data


def capacity_matrix(data: HarmonicData, b=None):
    """P_kl as the discrete energy of the measures (same faces as assembly).

    ``b`` is accepted for symmetry with the operator; the weights already
    live on ``data.op``.
    """
    op = data.op
    g = data.g
    P = np.zeros((g, g))
    for k in range(g):
        for l in range(k, g):
            P[k, l] = P[l, k] = op.energy(data.measures[k], data.measures[l], data.cut_data(k + 1), data.cut_data(l + 1))
    if g:
        try:
            scipy.linalg.cholesky(P)
        except np.linalg.LinAlgError as e:
            raise NumericalError("capacity matrix is not positive definite") from e
    return P


def _face_weights(op, p, q):
    bf = op.b.ravel()
    return 2.0 / (bf[p] + bf[q])


def circulation(psi, loop, op):
    """Counter-clockwise circulation of (1/b) grad-perp psi around ``loop``."""
    grid = op.grid
    kind = grid.kind.ravel()
    if (kind[loop.p] != INTERIOR).any() or (kind[loop.q] != INTERIOR).any():
        raise InputError("loop touches non-interior nodes")
    pf = np.asarray(psi, float).ravel()
    if not (np.all(np.isfinite(pf[loop.p])) and np.all(np.isfinite(pf[loop.q]))):
        raise InputError("loop touches unsolved nodes")
    return float(np.sum(_face_weights(op, loop.p, loop.q) * (pf[loop.p] - pf[loop.q])))


def dual_form_circulations(data: HarmonicData, loops=None):
    """D_ij = circulation of phi_i = sum_l Q_il m_l around island j."""
    loops = data.loops if loops is None else loops
    g = data.g
    if g == 0:
        return np.zeros((0, 0))
    C = np.array([[circulation(m, lp, data.op) for lp in loops] for m in data.measures])
    return data.Q @ C


def b_vector(p, vortices, data: HarmonicData, interp="bilinear"):
    """B_l = p_l + sum_j gamma_j m_l(z_j) (counter-clockwise convention)."""
    p = np.asarray(p, float)
    if p.shape != (data.g,):
        raise InputError(f"need {data.g} circulations, got {p.size}")
    B = p.copy()
    if data.g == 0:
        return B
    for z, gam in zip(vortices.positions, vortices.gammas):
        if not data.grid.domain.contains(z[0], z[1]):
            raise InputError(f"vortex ({z[0]:g}, {z[1]:g}) is outside the domain")
        for l in range(1, data.g + 1):
            B[l - 1] += gam * data.interp(l, z, interp)
    return B


def harmonic_stream(B, data: HarmonicData):
    B = np.asarray(B, float)
    g = data.grid
    psi = np.zeros((g.ny, g.nx))
    if data.g == 0:
        return psi
    C = B @ data.Q
    for c, m in zip(C, data.measures):
        psi = psi + c * m
    return psi


def harmonic_energy(B, data: HarmonicData):
    B = np.asarray(B, float)
    if data.g == 0:
        return 0.0
    return float(0.5 * B @ data.Q @ B)


def underbraced_identity_check(op, data: HarmonicData, source, tol=DEFAULT_TOL):
    """Relative error of -circ(G_b(., source), island l) against m_l(source)."""
    op.grid.check_clearance(source, 4 * op.grid.h, "source")
    G = green_column(op, source, tol=tol)
    out = []
    for l, loop in enumerate(data.loops, start=1):
        lhs = -circulation(G, loop, op)
        m = data.interp(l, source)
        out.append({"island": l, "circulation": lhs, "measure": m, "rel_error": abs(lhs - m) / abs(m)})
    return out


def orthogonality_check(psi_vort, data: HarmonicData, b=None):
    """Max over l of the normalised energy inner product <psi, m_l>."""
    op = data.op
    grid = op.grid
    pf = np.asarray(psi_vort, float)
    bnd = grid.kind == 1
    if np.any(np.abs(pf[bnd]) > 0):
        raise InputError("orthogonality_check needs a stream vanishing on the boundary")
    epp = op.energy(pf, pf)
    if epp == 0 or data.g == 0:
        return 0.0
    worst = 0.0
    for l, m in enumerate(data.measures, start=1):
        cl = data.cut_data(l)
        num = op.energy(pf, m, None, cl)
        den = np.sqrt(epp * op.energy(m, m, cl, cl))
        worst = max(worst, abs(num) / den)
    return float(worst)
