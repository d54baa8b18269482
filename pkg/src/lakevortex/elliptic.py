"""Dirichlet problems for L_b = -div((1/b) grad) on a Grid.

The five-point operator uses the harmonic mean of a = 1/b on every face.
Links that cross the boundary curve use the crossing fraction theta: the
Dirichlet value sits at the crossing point and only the diagonal (and the
right-hand side) change, which keeps the matrix symmetric positive definite
and the boundary treatment second order.
"""

from __future__ import annotations

import math
import threading
import warnings
from collections import OrderedDict

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import ndimage

from .bathymetry import sample_bathymetry
from .errors import BathymetryError, ClearanceError, ConvergenceError, DivergenceError, InputError
from .grid import INTERIOR

DEFAULT_TOL = 1e-10
DENSE_MAX = 33 * 33
CG_MAXITER_FACTOR = 20  # iteration cap per unknown
VARIANTS = ("log", "caowan", "dekeyser")


class GreenTable:
    """Source point -> solved column. Insertions are serialised."""

    def __init__(self, tol=DEFAULT_TOL, stencil="bilinear"):
        self.tol = tol
        self.stencil = stencil
        self._data = {}
        self._lock = threading.Lock()

    def get(self, key):
        return self._data.get(key)

    def put(self, key, value):
        with self._lock:
            return self._data.setdefault(key, value)

    def __len__(self):
        return len(self._data)


class DiscreteOperator:
    """Sparse L_b restricted to interior nodes, Dirichlet data eliminated."""

    def __init__(self, grid, b, bathy=None, method="direct"):
        self.grid = grid
        self.bathy = bathy
        self.method = method
        b = np.asarray(b, float)
        self.b = b
        used = grid.kind != 0
        if not (b[used] > 0).all():
            j, i = np.argwhere(used & ~(b > 0))[0]
            raise BathymetryError(f"non-positive b={b[j, i]:g} at node (i={i}, j={j})", node=(int(i), int(j)))
        h2 = grid.h**2
        bf = b.ravel()
        n = grid.n
        idx = grid.index.ravel()

        self.face_a = 2.0 / (bf[grid.face_p] + bf[grid.face_q])
        th = grid.cut_theta
        self.b_cut = (1 - th) * bf[grid.cut_p] + th * bf[grid.cut_q]
        self.cut_a = 2.0 / (bf[grid.cut_p] + self.b_cut)
        self.cut_w = self.cut_a / th

        ip, iq = idx[grid.face_p], idx[grid.face_q]
        diag = np.zeros(n)
        np.add.at(diag, ip, self.face_a)
        np.add.at(diag, iq, self.face_a)
        np.add.at(diag, idx[grid.cut_p], self.cut_w)
        rows = np.concatenate([ip, iq, np.arange(n)])
        cols = np.concatenate([iq, ip, np.arange(n)])
        vals = np.concatenate([-self.face_a, -self.face_a, diag]) / h2
        self.A = sp.csc_matrix((vals, (rows, cols)), shape=(n, n))
        self.A.sum_duplicates()
        self.table = GreenTable()
        self._lu = None
        self._dense = None
        self._lock = threading.Lock()

    @property
    def n(self):
        return self.grid.n

    def factor(self):
        with self._lock:
            if self._lu is None:
                self._lu = spla.splu(self.A)
        return self._lu

    def boundary_rhs(self, g_cut):
        """RHS contribution of Dirichlet values given at the cut points."""
        r = np.zeros(self.n)
        np.add.at(r, self.grid.index.ravel()[self.grid.cut_p], self.cut_w * np.asarray(g_cut, float))
        return r / self.grid.h**2

    def cut_values(self, boundary):
        """Dirichlet values at cut points from per-label values or a callable."""
        g = self.grid
        if boundary is None:
            return np.zeros(len(g.cut_p))
        if callable(boundary):
            return np.asarray(boundary(g.cut_xy[:, 0], g.cut_xy[:, 1]), float) * np.ones(len(g.cut_p))
        vals = np.asarray(boundary, float)
        if vals.shape != (g.g + 1,):
            raise InputError(f"boundary values need one entry per curve ({g.g + 1}), got {vals.shape}")
        return vals[g.cut_label]

    def node_values(self, boundary):
        g = self.grid
        if boundary is None:
            return np.zeros((g.ny, g.nx))
        if callable(boundary):
            X, Y = g.mesh()
            return np.asarray(boundary(X, Y), float) * np.ones((g.ny, g.nx))
        vals = np.asarray(boundary, float)
        return np.where(g.label >= 0, vals[np.maximum(g.label, 0)], 0.0)

    def to_field(self, u, boundary=None):
        fld = self.node_values(boundary)
        fld.ravel()[self.grid.interior_flat] = u
        return fld

    def interior(self, fld):
        return np.asarray(fld, float).ravel()[self.grid.interior_flat]

    def energy(self, u, v, gu=None, gv=None):
        """Discrete Dirichlet energy sum a |grad|^2 (face form), bilinear in u, v.

        u, v are node fields; gu, gv their values at the cut points.
        """
        g = self.grid
        uf = np.asarray(u, float).ravel()
        vf = np.asarray(v, float).ravel()
        gu = np.zeros(len(g.cut_p)) if gu is None else gu
        gv = np.zeros(len(g.cut_p)) if gv is None else gv
        e = np.dot(self.face_a, (uf[g.face_p] - uf[g.face_q]) * (vf[g.face_p] - vf[g.face_q]))
        e += np.dot(self.cut_w, (uf[g.cut_p] - gu) * (vf[g.cut_p] - gv))
        return float(e)

    def apply(self, u, g_cut=None):
        """L_h u at interior nodes for a node field u with cut-point values g_cut."""
        r = self.A @ self.interior(u)
        if g_cut is not None:
            r = r - self.boundary_rhs(g_cut)
        return r


def assemble_lb(grid, b, bathy=None, method="direct") -> DiscreteOperator:
    """Operator from a nodal b field (or a bathymetry callable)."""
    if callable(b):
        bathy = b
        b = sample_bathymetry(b, grid)
    return DiscreteOperator(grid, b, bathy=bathy, method=method)


def _solve_interior(op, r, tol, method):
    """Returns (u, iterations, relative residual); r may be (n,) or (n, k)."""
    method = method or op.method
    nr = np.linalg.norm(r, axis=0)
    if np.all(nr == 0):
        return np.zeros_like(r), 0, 0.0
    if method == "dense" or (method == "auto" and op.n <= DENSE_MAX):
        if op._dense is None:
            op._dense = scipy.linalg.cho_factor(op.A.toarray())
        u = scipy.linalg.cho_solve(op._dense, r)
        its = 1
    elif method in ("direct", "auto"):
        u = op.factor().solve(r)
        its = 1
    elif method == "cg":
        if r.ndim == 2:
            cols = [_solve_interior(op, r[:, k], tol, method) for k in range(r.shape[1])]
            return np.column_stack([c[0] for c in cols]), max(c[1] for c in cols), max(c[2] for c in cols)
        count = [0]

        def cb(_):
            count[0] += 1

        M = sp.diags(1.0 / op.A.diagonal())
        u, info = spla.cg(op.A, r, rtol=tol, atol=0.0, maxiter=max(1, int(CG_MAXITER_FACTOR * op.n)), M=M, callback=cb)
        res = float(np.linalg.norm(op.A @ u - r) / nr)
        if info != 0 or res > tol * 10:
            raise ConvergenceError(
                f"conjugate gradient did not converge in {count[0]} iterations (residual {res:.3e})",
                residual=res,
                iterations=count[0],
            )
        its = count[0]
    else:
        raise InputError(f"unknown solver method {method!r}")
    res = np.linalg.norm(op.A @ u - r, axis=0) / np.where(nr > 0, nr, 1.0)
    res = float(np.max(res))
    if not np.all(np.isfinite(u)):
        raise ConvergenceError("solver produced non-finite values", residual=res, iterations=its)
    if res > max(tol, 1e-12) * 1e3:
        raise ConvergenceError(f"direct solve residual {res:.3e} exceeds tolerance", residual=res, iterations=its)
    return u, its, res


def solve_dirichlet(op, rhs, tol=DEFAULT_TOL, boundary=None, method=None, return_info=False):
    """Solve L_b u = rhs with Dirichlet data ``boundary``.

    ``rhs`` is a node field or an interior vector. ``boundary`` is None (zero
    data), one value per curve (outer first, then islands) or a callable
    g(x, y). Returns the node field; non-interior nodes carry the data.
    """
    if not 0 < tol <= 1e-4:
        raise InputError(f"solver tolerance must be in (0, 1e-4], got {tol}")
    rhs = np.asarray(rhs, float)
    r = op.interior(rhs) if rhs.ndim == 2 else rhs.copy()
    if r.shape != (op.n,) or not np.all(np.isfinite(r)):
        raise InputError("rhs must be finite with one value per interior node")
    if boundary is not None:
        r = r + op.boundary_rhs(op.cut_values(boundary))
    u, its, res = _solve_interior(op, r, tol, method)
    fld = op.to_field(u, boundary)
    if return_info:
        return fld, {"iterations": int(its), "residual": res, "tol": tol}
    return fld


def spread_delta(grid, z):
    """Unit-mass bilinear delta at z as an interior vector (weights / h^2)."""
    ids, w = grid.bilinear_stencil(z)
    if (grid.kind.ravel()[ids] != INTERIOR).any():
        raise ClearanceError(f"source ({z[0]:g}, {z[1]:g}) is not surrounded by interior nodes")
    r = np.zeros(grid.n)
    np.add.at(r, grid.index.ravel()[ids], w / grid.h**2)
    return r


def _check_source(op, source, clearance):
    op.grid.check_clearance(source, clearance * op.grid.h, "source")


def green_column(op, source, tol=DEFAULT_TOL, clearance=2.0, cache=True):
    """G_b(., source) as a node field (zero on all non-interior nodes)."""
    source = (float(source[0]), float(source[1]))
    if cache:
        hit = op.table.get(source)
        if hit is not None:
            return hit
    _check_source(op, source, clearance)
    fld = solve_dirichlet(op, spread_delta(op.grid, source), tol=tol)
    fld.setflags(write=False)
    return op.table.put(source, fld) if cache else fld


def green_columns(op, sources, tol=DEFAULT_TOL, clearance=2.0):
    """Several columns with one batched solve; cached like green_column."""
    out = [op.table.get((float(s[0]), float(s[1]))) for s in sources]
    todo = [k for k, f in enumerate(out) if f is None]
    if todo:
        for k in todo:
            _check_source(op, sources[k], clearance)
        R = np.column_stack([spread_delta(op.grid, sources[k]) for k in todo])
        U, _, _ = _solve_interior(op, R, tol, None)
        for c, k in enumerate(todo):
            fld = op.to_field(U[:, c])
            fld.setflags(write=False)
            out[k] = op.table.put((float(sources[k][0]), float(sources[k][1])), fld)
    return out


def green_tilde_column(op, source, tol=DEFAULT_TOL, clearance=2.0):
    """Column of the Green function of b L_b: solves L_b G~ = delta / b."""
    _check_source(op, source, clearance)
    r = spread_delta(op.grid, source) / op.interior(op.b)
    return solve_dirichlet(op, r, tol=tol)


def phi0(r):
    return -np.log(r) / (2 * np.pi)


def disk_green(z, zeta, center=(0.0, 0.0), radius=1.0):
    """Closed-form Dirichlet Green function of -Laplace on a disk."""
    zc = complex(*center)
    w = (complex(z[0], z[1]) - zc) / radius
    s = (complex(zeta[0], zeta[1]) - zc) / radius
    return -np.log(abs((w - s) / (1 - w * np.conj(s)))) / (2 * np.pi)


def singular_template(bathy, z, zeta, variant="dekeyser", green_d=None):
    """Near-diagonal template for G_b(z, zeta).

    ``green_d`` is the b = 1 Dirichlet Green function used by the dekeyser
    variant; without it the free-space log kernel stands in.
    """
    r = float(np.hypot(z[0] - zeta[0], z[1] - zeta[1]))
    if r == 0:
        raise InputError("singular template is undefined at z = zeta")
    bz = float(bathy(z[0], z[1]))
    bs = float(bathy(zeta[0], zeta[1]))
    if variant == "log":
        return phi0(r)
    if variant == "caowan":
        return 0.5 * (bz + bs) * phi0(0.5 * (np.sqrt(bz) + np.sqrt(bs)) * r)
    if variant == "dekeyser":
        gd = phi0(r) if green_d is None else green_d(z, zeta)
        return np.sqrt(bz * bs) * gd
    raise InputError(f"unknown template variant {variant!r}")


def richardson_self(bathy, z, eps):
    if not eps > 0:
        raise InputError(f"core radius must be positive, got {eps}")
    if eps >= 1:
        warnings.warn("core radius >= 1: ln(1/eps) changes sign", RuntimeWarning, stacklevel=2)
    bz = float(bathy(z[0], z[1]))
    if not bz > 0:
        raise BathymetryError(f"b(z) = {bz:g} is not positive")
    return np.log(1.0 / eps) * np.log(bz) / (2 * np.pi)


def compare_near_diagonal(op, bathy, source, separations, tol=DEFAULT_TOL):
    """Numeric G_b minus each template on rings around ``source``.

    Returns {"separations", "variants": {name: {"remainder", "c1", "c0"}},
    "skipped"}. The dekeyser variant uses the numeric b = 1 Green function on
    the same grid.
    """
    grid = op.grid
    col = green_column(op, source, tol=tol)
    op1 = DiscreteOperator(grid, np.where(grid.kind != 0, 1.0, np.nan), method=op.method)
    col1 = green_column(op1, source, tol=tol)
    angles = np.arange(8) * np.pi / 4
    seps, skipped = [], []
    rem = {v: [] for v in VARIANTS}
    for s in separations:
        if s < 4 * grid.h * (1 - 1e-9):
            raise InputError(f"separation {s:g} below 4h")
        pts = [(source[0] + s * np.cos(a), source[1] + s * np.sin(a)) for a in angles]
        if min(grid.clearance(p) for p in pts) < 2 * grid.h or not all(grid.domain.contains(*p) for p in pts):
            skipped.append(float(s))
            continue
        seps.append(float(s))
        for v in VARIANTS:
            vals = []
            for p in pts:
                gd = (lambda z, zeta, p=p: grid.interpolate(col1, p)) if v == "dekeyser" else None
                vals.append(grid.interpolate(col, p) - singular_template(bathy, p, source, v, green_d=gd))
            rem[v].append(float(np.mean(vals)))
    out = {"separations": seps, "skipped": skipped, "variants": {}}
    for v in VARIANTS:
        r = np.asarray(rem[v])
        if len(r) >= 2:
            M = np.column_stack([np.log(1.0 / np.asarray(seps)), np.ones(len(seps))])
            (c1, c0), *_ = np.linalg.lstsq(M, r, rcond=None)
        else:
            c1, c0 = np.nan, np.nan
        out["variants"][v] = {"remainder": r.tolist(), "c1": float(c1), "c0": float(c0)}
    return out


def _gradient_dirichlet(grid, u):
    """Central-difference gradient at interior nodes of a field vanishing on the boundary.

    Near the boundary the zero value is taken at the crossing point, giving a
    three-point non-uniform difference.
    """
    h = grid.h
    uf = np.asarray(u, float).ravel()
    ids = grid.interior_flat
    uP = uf[ids]
    dist = {d: np.full(len(ids), h) for d in ((1, 0), (-1, 0), (0, 1), (0, -1))}
    val = {}
    for di, dj in dist:
        val[(di, dj)] = uf[ids + di + dj * grid.nx]
    idx = grid.index.ravel()
    for p, q, th in zip(grid.cut_p, grid.cut_q, grid.cut_theta):
        d = q - p
        key = (1, 0) if d == 1 else (-1, 0) if d == -1 else (0, 1) if d == grid.nx else (0, -1)
        k = idx[p]
        dist[key][k] = th * h
        val[key][k] = 0.0
    out = []
    for plus, minus in (((1, 0), (-1, 0)), ((0, 1), (0, -1))):
        hp, hm = dist[plus], dist[minus]
        up, um = val[plus], val[minus]
        out.append((hm**2 * up - hp**2 * um + (hp**2 - hm**2) * uP) / (hm * hp * (hm + hp)))
    return out[0], out[1]


def born_dyson_solve(grid, a, f, order, tol=DEFAULT_TOL):
    """Partial Born series psi_k = sum_{i<=k} B^i phi0 for -div(a grad psi) = f.

    phi0 solves -Laplace phi0 = f / a; B psi = (-Laplace)^{-1}(grad log a . grad psi).
    Returns (psi field, residuals per order) with residuals measured against
    the harmonic-mean operator of b = 1/a in the discrete L2 norm.
    """
    if order < 0:
        raise InputError("order must be >= 0")
    a = np.asarray(a, float)
    f = np.asarray(f, float)
    used = grid.kind != 0
    if not (a[used] > 0).all():
        raise InputError("a must be positive on the grid")
    lap = DiscreteOperator(grid, np.where(used, 1.0, np.nan))
    la = DiscreteOperator(grid, np.where(used, 1.0 / np.where(used, a, 1.0), np.nan))
    ai = lap.interior(a)
    fi = lap.interior(f)
    # log a is known on boundary nodes too, so plain central differences
    loga = np.log(np.where(used, a, 1.0)).ravel()
    ids = grid.interior_flat
    nx = grid.nx
    la_x = (loga[ids + 1] - loga[ids - 1]) / (2 * grid.h)
    la_y = (loga[ids + nx] - loga[ids - nx]) / (2 * grid.h)

    def solve(r):
        return _solve_interior(lap, r, tol, None)[0]

    def residual(u):
        return float(np.sqrt(np.sum((la.A @ u - fi) ** 2) * grid.h**2))

    term = solve(fi / ai)
    psi = term.copy()
    res = [residual(psi)]
    for _ in range(order):
        gx, gy = _gradient_dirichlet(grid, lap.to_field(term))
        term = solve(la_x * gx + la_y * gy)
        psi = psi + term
        res.append(residual(psi))
        # mild growth is the floor set by the discretisation mismatch; doubling is divergence
        best = min(res[:-1])
        if res[-1] > 2 * best and best > 1e-12 * max(1.0, np.linalg.norm(fi) * grid.h):
            raise DivergenceError(
                f"Born-Dyson residual grew from {best:.3e} to {res[-1]:.3e}; the scattering operator norm is likely >= 1"
            )
    return lap.to_field(psi), res


class CubicField:
    """Interpolating cubic B-spline of a node field; ``ev(y, x)`` like scipy splines."""

    def __init__(self, grid, fld):
        self.x0, self.y0, self.h = grid.x0, grid.y0, grid.h
        self.coef = ndimage.spline_filter(np.asarray(fld, float), order=3, mode="mirror")

    def ev(self, y, x):
        y = np.atleast_1d(np.asarray(y, float))
        x = np.atleast_1d(np.asarray(x, float))
        c = np.vstack([(y - self.y0) / self.h, (x - self.x0) / self.h])
        v = ndimage.map_coordinates(self.coef, c, order=3, mode="mirror", prefilter=False)
        return v[0] if v.size == 1 else v


def mollified_phi0(r, rho):
    """Disk-averaged log kernel: equal to phi0 outside rho, smooth inside."""
    r = np.asarray(r, float)
    inner = -(np.log(rho) - (rho**2 - r**2) / (2 * rho**2)) / (2 * np.pi)
    with np.errstate(divide="ignore"):
        outer = phi0(np.maximum(r, 1e-300))
    return np.where(r < rho, inner, outer)


class SmoothGreen:
    """Green function as an analytic singular part plus a smooth solved remainder.

    G(z, zeta) = S(z, zeta) + R_zeta(z) with
    S = -sqrt(b(z) b(zeta)) ln|z - zeta| / (2 pi). Writing s = sqrt(b), the
    remainder solves L_b R = s(zeta) Phi(x - zeta) q(x), q = -L_h s, with
    R = -S on the boundary. R is interpolated with a cubic spline, so G
    and its gradients are smooth in both arguments.
    """

    def __init__(self, op, bathy=None, rho=None, cache_size=512):
        self.op = op
        self.bathy = bathy if bathy is not None else op.bathy
        if self.bathy is None:
            raise InputError("SmoothGreen needs a bathymetry callable")
        g = op.grid
        self.rho = g.h if rho is None else rho
        X, Y = g.mesh()
        self._outside = np.flatnonzero(g.kind.ravel() != INTERIOR)
        self._ox, self._oy = X.ravel()[self._outside], Y.ravel()[self._outside]
        bn = np.asarray(self.bathy(X, Y), float)
        bmin = np.nanmin(op.b[g.kind != 0])
        self._s_out = np.sqrt(np.where(bn > 0, bn, bmin)).ravel()[self._outside]
        s_nodes = np.sqrt(np.where(g.kind != 0, op.b, 1.0))
        s_cut = np.sqrt(op.b_cut)
        self.q = -op.apply(s_nodes, s_cut)
        self._ipts = g.node_xy(g.interior_flat)
        self._b_cut = np.asarray(self.bathy(g.cut_xy[:, 0], g.cut_xy[:, 1]), float)
        self._cache = OrderedDict()
        self._size = cache_size
        self._lock = threading.Lock()

    def singular(self, z, zeta):
        if len(np.shape(z)) == 1:
            bz = float(self.bathy(z[0], z[1]))
            bs = float(self.bathy(zeta[0], zeta[1]))
            return -math.sqrt(bz * bs) * math.log(math.hypot(z[0] - zeta[0], z[1] - zeta[1])) / (2 * math.pi)
        z = np.asarray(z, float)
        bz = np.asarray(self.bathy(z[..., 0], z[..., 1]), float)
        bs = float(self.bathy(zeta[0], zeta[1]))
        r = np.hypot(z[..., 0] - zeta[0], z[..., 1] - zeta[1])
        return np.sqrt(bz * bs) * phi0(r)

    def _rhs(self, zeta):
        op = self.op
        g = op.grid
        ss = np.sqrt(float(self.bathy(zeta[0], zeta[1])))
        r = np.hypot(self._ipts[:, 0] - zeta[0], self._ipts[:, 1] - zeta[1])
        rhs = ss * mollified_phi0(r, self.rho) * self.q
        rc = np.hypot(g.cut_xy[:, 0] - zeta[0], g.cut_xy[:, 1] - zeta[1])
        gcut = -np.sqrt(self._b_cut) * ss * phi0(rc)
        return rhs + op.boundary_rhs(gcut)

    def _finish(self, zeta, u):
        op = self.op
        g = op.grid
        ss = np.sqrt(float(self.bathy(zeta[0], zeta[1])))
        fld = np.empty(g.nx * g.ny)
        rn = np.hypot(self._ox - zeta[0], self._oy - zeta[1])
        fld[self._outside] = -self._s_out * ss * phi0(np.maximum(rn, 1e-300))
        fld[g.interior_flat] = u
        return CubicField(g, fld.reshape(g.ny, g.nx))

    def regular(self, zetas, tol=DEFAULT_TOL, check=True):
        """Splines of R for each source (list in, list out)."""
        keys = [(float(z[0]), float(z[1])) for z in zetas]
        out = [None] * len(keys)
        with self._lock:
            for k, key in enumerate(keys):
                if key in self._cache:
                    self._cache.move_to_end(key)
                    out[k] = self._cache[key]
        todo = sorted({key for k, key in enumerate(keys) if out[k] is None})
        if todo:
            for key in todo if check else ():
                self.op.grid.check_clearance(key, 2 * self.op.grid.h, "source")
            R = np.column_stack([self._rhs(key) for key in todo])
            U, _, _ = _solve_interior(self.op, R, tol, None)
            fresh = {key: self._finish(key, U[:, c]) for c, key in enumerate(todo)}
            with self._lock:
                for key, spl in fresh.items():
                    self._cache[key] = spl
                    self._cache.move_to_end(key)
                while len(self._cache) > self._size:
                    self._cache.popitem(last=False)
            for k, key in enumerate(keys):
                if out[k] is None:
                    out[k] = fresh[key]
        return out

    def green(self, z, zeta, spline=None):
        spline = spline if spline is not None else self.regular([zeta])[0]
        return float(self.singular(z, zeta) + spline.ev(z[1], z[0]))

    def green_sym(self, z1, z2, s1=None, s2=None):
        """0.5 [G(z1; z2) + G(z2; z1)]."""
        if s1 is None or s2 is None:
            s1, s2 = self.regular([z1, z2])
        return 0.5 * (self.green(z1, z2, s2) + self.green(z2, z1, s1))

