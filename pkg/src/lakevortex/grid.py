"""Domains, Cartesian grids and discrete loops.

Node kinds: 0 exterior, 1 Dirichlet boundary, 2 interior. A node is interior
when it lies strictly inside the fluid region. A non-interior node is a
boundary node when it sits on a curve or is a 4-neighbour of an interior
node. Every non-interior node also carries a ``label``: 0 for the outer
region, l >= 1 for island l.

Links from an interior node to a non-interior neighbour are "cut links";
each stores the fraction theta in (0, 1] of the link at which the boundary
curve is crossed, so the operator can place the Dirichlet value on the
curve instead of on the staircase node.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ClearanceError, DomainError, InputError
from .geometry import Rectangle, curve_inside, curves_overlap

EXTERIOR, BOUNDARY, INTERIOR = 0, 1, 2
THETA_MIN = 1e-3

# (di, dj) for the four stencil neighbours
DIRECTIONS = ((1, 0), (-1, 0), (0, 1), (0, -1))


class Domain:
    """Outer curve with ``g`` islands strictly inside it."""

    def __init__(self, outer, islands=()):
        self.outer = outer
        self.islands = tuple(islands)
        for k, isl in enumerate(self.islands, start=1):
            if isl.area <= 0:
                raise DomainError(f"island {k} encloses no area", island=k)
            if not curve_inside(isl, outer):
                raise DomainError(f"island {k} is not strictly inside the outer boundary", island=k)
        for k in range(len(self.islands)):
            for l in range(k + 1, len(self.islands)):
                if curves_overlap(self.islands[k], self.islands[l]):
                    raise DomainError(f"islands {k + 1} and {l + 1} overlap", island=k + 1)

    @property
    def g(self):
        return len(self.islands)

    def curves(self):
        return (self.outer,) + self.islands

    def contains(self, x, y):
        """Strictly inside the fluid region."""
        inside = self.outer.contains(x, y)
        for isl in self.islands:
            inside &= ~(isl.contains(x, y) | isl.on_curve(x, y))
        return inside

    def region_label(self, x, y):
        """l if (x, y) is inside or on island l, else 0."""
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        lab = np.zeros(np.broadcast(x, y).shape, int)
        for k, isl in enumerate(self.islands, start=1):
            lab = np.where(isl.contains(x, y) | isl.on_curve(x, y), k, lab)
        return lab

    def clearance(self, x, y):
        """Distance to the nearest boundary curve."""
        d = self.outer.distance(x, y)
        for isl in self.islands:
            d = np.minimum(d, isl.distance(x, y))
        return d

    def to_dict(self):
        return {"outer": self.outer.to_dict(), "islands": [c.to_dict() for c in self.islands]}

    def __repr__(self):
        return f"Domain(outer={self.outer!r}, islands={list(self.islands)!r})"


@dataclass(frozen=True, eq=False)
class Grid:
    domain: Domain
    h: float
    x0: float
    y0: float
    nx: int
    ny: int
    kind: np.ndarray  # (ny, nx) int8
    label: np.ndarray  # (ny, nx) int, -1 on interior nodes
    index: np.ndarray  # (ny, nx) int, -1 off the interior
    # interior-interior faces, each stored once (flat node ids)
    face_p: np.ndarray = field(repr=False)
    face_q: np.ndarray = field(repr=False)
    # cut links: interior node, non-interior neighbour, crossing fraction, curve label
    cut_p: np.ndarray = field(repr=False)
    cut_q: np.ndarray = field(repr=False)
    cut_theta: np.ndarray = field(repr=False)
    cut_label: np.ndarray = field(repr=False)
    cut_xy: np.ndarray = field(repr=False)

    @property
    def n(self):
        return int((self.kind == INTERIOR).sum())

    @property
    def g(self):
        return self.domain.g

    @property
    def xs(self):
        return self.x0 + self.h * np.arange(self.nx)

    @property
    def ys(self):
        return self.y0 + self.h * np.arange(self.ny)

    def mesh(self):
        return np.meshgrid(self.xs, self.ys)

    @property
    def interior_flat(self):
        """Flat node ids of interior nodes in linear-index order."""
        return np.flatnonzero(self.index.ravel() >= 0)

    def node_xy(self, flat):
        j, i = np.divmod(np.asarray(flat), self.nx)
        return np.column_stack([self.x0 + i * self.h, self.y0 + j * self.h])

    def locate(self, z):
        """Cell (i, j) containing z and the local coordinates (tx, ty)."""
        fx = (z[0] - self.x0) / self.h
        fy = (z[1] - self.y0) / self.h
        i = int(np.floor(fx))
        j = int(np.floor(fy))
        if not (0 <= i < self.nx - 1 and 0 <= j < self.ny - 1):
            raise InputError(f"point ({z[0]:g}, {z[1]:g}) lies outside the grid")
        return i, j, fx - i, fy - j

    def bilinear_stencil(self, z):
        """Flat node ids and bilinear weights of the 4 nodes around z."""
        i, j, tx, ty = self.locate(z)
        ids = np.array([j * self.nx + i, j * self.nx + i + 1, (j + 1) * self.nx + i, (j + 1) * self.nx + i + 1])
        w = np.array([(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty])
        return ids, w

    def interpolate(self, fld, z):
        ids, w = self.bilinear_stencil(z)
        return float(np.dot(np.asarray(fld).ravel()[ids], w))

    def clearance(self, z):
        return float(self.domain.clearance(z[0], z[1]))

    def check_clearance(self, z, min_clear, what="point"):
        if not bool(self.domain.contains(z[0], z[1])):
            raise ClearanceError(f"{what} ({z[0]:g}, {z[1]:g}) is not inside the domain")
        c = self.clearance(z)
        if c < min_clear:
            raise ClearanceError(
                f"{what} ({z[0]:g}, {z[1]:g}) has clearance {c:.4g} from the boundary, need >= {min_clear:.4g}"
            )


def build_grid(domain: Domain, h: float, pad: int | None = None) -> Grid:
    if not h > 0:
        raise InputError(f"grid spacing must be positive, got {h}")
    for k, isl in enumerate(domain.islands, start=1):
        x0, x1, y0, y1 = isl.bbox
        if min(x1 - x0, y1 - y0) < 4 * h * (1 - 1e-9):
            raise DomainError(f"island {k} spans fewer than 4 cells at h={h:g}", island=k)

    xmin, xmax, ymin, ymax = domain.outer.bbox
    if pad is None:
        pad = 0 if isinstance(domain.outer, Rectangle) else 1
    mx = int(np.floor((xmax - xmin) / h + 1e-9))
    my = int(np.floor((ymax - ymin) / h + 1e-9))
    nx = mx + 1 + 2 * pad
    ny = my + 1 + 2 * pad
    x0 = xmin - pad * h
    y0 = ymin - pad * h
    X, Y = np.meshgrid(x0 + h * np.arange(nx), y0 + h * np.arange(ny))

    inside = domain.contains(X, Y)
    on_curve = np.zeros_like(inside)
    for c in domain.curves():
        on_curve |= c.on_curve(X, Y)
    adj = np.zeros_like(inside)
    adj[:, 1:] |= inside[:, :-1]
    adj[:, :-1] |= inside[:, 1:]
    adj[1:, :] |= inside[:-1, :]
    adj[:-1, :] |= inside[1:, :]
    if inside[0, :].any() or inside[-1, :].any() or inside[:, 0].any() or inside[:, -1].any():
        raise DomainError("interior nodes reach the grid edge; increase padding")

    kind = np.zeros((ny, nx), np.int8)
    kind[~inside & (on_curve | adj)] = BOUNDARY
    kind[inside] = INTERIOR
    label = np.where(inside, -1, domain.region_label(X, Y))

    for k in range(1, domain.g + 1):
        nodes = (kind == BOUNDARY) & (label == k)
        _, ncomp = ndimage.label(nodes, structure=np.ones((3, 3)))
        if ncomp != 1:
            raise DomainError(f"boundary nodes of island {k} do not form one discrete curve at h={h:g}", island=k)

    index = -np.ones((ny, nx), int)
    index[inside] = np.arange(int(inside.sum()))
    flat = np.arange(nx * ny).reshape(ny, nx)

    # interior-interior faces (+x and +y neighbours only)
    fx = inside[:, :-1] & inside[:, 1:]
    fy = inside[:-1, :] & inside[1:, :]
    face_p = np.concatenate([flat[:, :-1][fx], flat[:-1, :][fy]])
    face_q = np.concatenate([flat[:, 1:][fx], flat[1:, :][fy]])

    cut_p, cut_q, cut_theta, cut_label, cut_xy = [], [], [], [], []
    curves = domain.curves()
    for di, dj in DIRECTIONS:
        src = np.zeros_like(inside)
        tgt = np.roll(np.roll(~inside, -dj, axis=0), -di, axis=1)
        src[max(0, -dj) : ny - max(0, dj), max(0, -di) : nx - max(0, di)] = True
        sel = inside & tgt & src
        for j, i in np.argwhere(sel):
            jq, iq = j + dj, i + di
            lab = int(label[jq, iq])
            p = (X[j, i], Y[j, i])
            q = (X[jq, iq], Y[jq, iq])
            curve = curves[lab]
            if on_curve[jq, iq] and curve.on_curve(q[0], q[1]):
                theta = 1.0
            else:
                theta = curve.crossing(p, q)
                if theta is None:
                    theta = 1.0
            if theta > 1 - 1e-9:
                theta = 1.0
            theta = max(theta, THETA_MIN)
            cut_p.append(flat[j, i])
            cut_q.append(flat[jq, iq])
            cut_theta.append(theta)
            cut_label.append(lab)
            cut_xy.append((p[0] + theta * (q[0] - p[0]), p[1] + theta * (q[1] - p[1])))

    order = np.lexsort((np.asarray(cut_q), np.asarray(cut_p))) if cut_p else np.array([], int)
    cut_xy = np.asarray(cut_xy, float).reshape(-1, 2)
    return Grid(
        domain=domain,
        h=float(h),
        x0=float(x0),
        y0=float(y0),
        nx=nx,
        ny=ny,
        kind=kind,
        label=label,
        index=index,
        face_p=face_p,
        face_q=face_q,
        cut_p=np.asarray(cut_p, int)[order],
        cut_q=np.asarray(cut_q, int)[order],
        cut_theta=np.asarray(cut_theta, float)[order],
        cut_label=np.asarray(cut_label, int)[order],
        cut_xy=cut_xy[order],
    )


@dataclass(frozen=True, eq=False)
class DiscreteLoop:
    """Closed counter-clockwise circuit of dual edges.

    Each edge crosses one grid link from an enclosed node ``p`` to an
    outside node ``q``; its midpoint is the link midpoint and the tangent is
    the outward link direction rotated by +90 degrees.
    """

    grid: Grid = field(repr=False)
    p: np.ndarray
    q: np.ndarray
    midpoint: np.ndarray
    tangent: np.ndarray
    cycles: tuple  # closed corner polylines, each (m, 2)
    target: str = ""

    def __len__(self):
        return len(self.p)

    def winding_number(self, z):
        w = 0.0
        for poly in self.cycles:
            d = poly - np.asarray(z, float)
            ang = np.arctan2(d[:, 1], d[:, 0])
            dang = np.diff(np.concatenate([ang, ang[:1]]))
            dang = (dang + np.pi) % (2 * np.pi) - np.pi
            w += dang.sum() / (2 * np.pi)
        return int(round(w))


def _loop_from_set(grid: Grid, S: np.ndarray, target: str) -> DiscreteLoop:
    S = ndimage.binary_fill_holes(S)
    ny, nx = S.shape
    flat = np.arange(nx * ny).reshape(ny, nx)
    ps, qs, dirs = [], [], []
    for di, dj in DIRECTIONS:
        for j, i in np.argwhere(S):
            jq, iq = j + dj, i + di
            if not (0 <= jq < ny and 0 <= iq < nx):
                raise ClearanceError(f"loop {target} reaches the grid edge")
            if not S[jq, iq]:
                ps.append(flat[j, i])
                qs.append(flat[jq, iq])
                dirs.append((di, dj))
    ps = np.asarray(ps)
    qs = np.asarray(qs)
    for ids in (ps, qs):
        if (grid.kind.ravel()[ids] != INTERIOR).any():
            raise ClearanceError(f"loop {target} touches non-interior nodes")

    # trace on the doubled lattice: node (i, j) -> (2i, 2j)
    edges = {}
    for k, (pid, (di, dj)) in enumerate(zip(ps, dirs)):
        j, i = divmod(int(pid), nx)
        mid = (2 * i + di, 2 * j + dj)
        t = (-dj, di)
        a = (mid[0] - t[0], mid[1] - t[1])
        edges.setdefault(a, []).append(k)
    used = np.zeros(len(ps), bool)
    order, cycles = [], []

    def edge_info(k):
        j, i = divmod(int(ps[k]), nx)
        di, dj = dirs[k]
        mid = (2 * i + di, 2 * j + dj)
        t = (-dj, di)
        return (mid[0] - t[0], mid[1] - t[1]), (mid[0] + t[0], mid[1] + t[1]), t

    for start in range(len(ps)):
        if used[start]:
            continue
        k = start
        corners = []
        while not used[k]:
            used[k] = True
            order.append(k)
            a, b, t = edge_info(k)
            corners.append(a)
            cands = [c for c in edges.get(b, []) if not used[c]]
            if not cands:
                break
            left = (-t[1], t[0])
            right = (t[1], -t[0])

            def rank(c):
                tc = edge_info(c)[2]
                return 0 if tc == left else (1 if tc == t else (2 if tc == right else 3))

            k = min(cands, key=rank)
        c = np.asarray(corners, float)
        cycles.append(np.column_stack([grid.x0 + 0.5 * grid.h * c[:, 0], grid.y0 + 0.5 * grid.h * c[:, 1]]))
    order = np.asarray(order)
    d = np.asarray(dirs, float)[order]
    tangent = np.column_stack([-d[:, 1], d[:, 0]])
    pxy = grid.node_xy(ps[order])
    midpoint = pxy + 0.5 * grid.h * d
    return DiscreteLoop(grid, ps[order], qs[order], midpoint, tangent, tuple(cycles), target)


def island_loops(grid: Grid, offset: int = 1) -> list:
    """One loop per island, ``offset`` node layers outside the island's boundary nodes."""
    loops = []
    st = np.ones((3, 3), bool)
    for k in range(1, grid.g + 1):
        core = (grid.kind != INTERIOR) & (grid.label == k)
        S = ndimage.binary_dilation(ndimage.binary_fill_holes(core), structure=st, iterations=offset)
        loops.append(_loop_from_set(grid, S, f"island {k}"))
    return loops


def point_loop(grid: Grid, z, radius: float) -> DiscreteLoop:
    """Loop enclosing the interior nodes within ``radius`` of z."""
    need = radius + 2 * grid.h
    grid.check_clearance(z, need, "loop centre")
    X, Y = grid.mesh()
    S = (grid.kind == INTERIOR) & (np.hypot(X - z[0], Y - z[1]) <= radius)
    if not S.any():
        raise InputError("loop radius too small to enclose any node")
    return _loop_from_set(grid, S, f"point ({z[0]:g}, {z[1]:g})")
