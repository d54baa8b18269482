"""Closed planar curves used as domain boundaries and bathymetry regions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

# relative tolerance for "exactly on the curve"
ON_CURVE_RTOL = 1e-10


def _segment_distance(px, py, ax, ay, bx, by):
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    t = np.clip(((px - ax) * dx + (py - ay) * dy) / L2, 0.0, 1.0)
    return np.hypot(px - (ax + t * dx), py - (ay + t * dy))


@dataclass(frozen=True)
class Circle:
    cx: float
    cy: float
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError(f"circle radius must be positive, got {self.radius}")

    @property
    def bbox(self):
        r = self.radius
        return (self.cx - r, self.cx + r, self.cy - r, self.cy + r)

    @property
    def area(self):
        return np.pi * self.radius**2

    @property
    def scale(self):
        return self.radius

    def interior_point(self):
        return (self.cx, self.cy)

    def _rho(self, x, y):
        return np.hypot(np.asarray(x, float) - self.cx, np.asarray(y, float) - self.cy)

    def on_curve(self, x, y):
        return np.abs(self._rho(x, y) - self.radius) <= ON_CURVE_RTOL * self.scale

    def contains(self, x, y):
        """Strictly inside; points on the circle are excluded."""
        return (self._rho(x, y) < self.radius) & ~self.on_curve(x, y)

    def distance(self, x, y):
        return np.abs(self._rho(x, y) - self.radius)

    def crossing(self, p, q):
        """Smallest parameter t in [0, 1] with p + t (q - p) on the circle."""
        px, py = p[0] - self.cx, p[1] - self.cy
        dx, dy = q[0] - p[0], q[1] - p[1]
        a = dx * dx + dy * dy
        b = 2.0 * (px * dx + py * dy)
        c = px * px + py * py - self.radius**2
        disc = b * b - 4 * a * c
        if disc < 0:
            return None
        sq = np.sqrt(disc)
        roots = sorted([(-b - sq) / (2 * a), (-b + sq) / (2 * a)])
        for t in roots:
            if -1e-12 <= t <= 1 + 1e-9:
                return float(min(max(t, 0.0), 1.0))
        return None

    def polyline(self, n=512):
        th = np.linspace(0, 2 * np.pi, n, endpoint=False)
        return np.column_stack([self.cx + self.radius * np.cos(th), self.cy + self.radius * np.sin(th)])

    def to_dict(self):
        return {"type": "circle", "center": [self.cx, self.cy], "radius": self.radius}


@dataclass(frozen=True)
class Polygon:
    """Simple polygon; vertex orientation is irrelevant."""

    vertices: tuple

    def __post_init__(self):
        v = np.asarray(self.vertices, float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise DomainError("polygon needs at least 3 (x, y) vertices")
        object.__setattr__(self, "vertices", tuple(map(tuple, v.tolist())))
        if abs(self.area) == 0:
            raise DomainError("polygon encloses zero area")

    @property
    def _v(self):
        return np.asarray(self.vertices, float)

    @property
    def bbox(self):
        v = self._v
        return (v[:, 0].min(), v[:, 0].max(), v[:, 1].min(), v[:, 1].max())

    @property
    def area(self):
        v = self._v
        x, y = v[:, 0], v[:, 1]
        return abs(0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    @property
    def scale(self):
        x0, x1, y0, y1 = self.bbox
        return max(x1 - x0, y1 - y0)

    def interior_point(self):
        v = self._v
        c = v.mean(axis=0)
        if self.contains(c[0], c[1]):
            return (float(c[0]), float(c[1]))
        # fall back to a scan along the horizontal line through the centroid
        x0, x1, y0, y1 = self.bbox
        for frac in np.linspace(0.05, 0.95, 91):
            for yy in (c[1], y0 + frac * (y1 - y0)):
                xs = np.linspace(x0, x1, 401)
                inside = self.contains(xs, np.full_like(xs, yy))
                if inside.any():
                    return (float(xs[inside][len(xs[inside]) // 2]), float(yy))
        raise DomainError("could not locate a polygon interior point")

    def distance(self, x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        v = self._v
        d = np.full(np.broadcast(x, y).shape, np.inf)
        for a, b in zip(v, np.roll(v, -1, axis=0)):
            d = np.minimum(d, _segment_distance(x, y, a[0], a[1], b[0], b[1]))
        return d

    def on_curve(self, x, y):
        return self.distance(x, y) <= ON_CURVE_RTOL * self.scale

    def contains(self, x, y):
        """Even-odd ray casting; points on an edge are excluded."""
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        v = self._v
        inside = np.zeros(np.broadcast(x, y).shape, bool)
        for a, b in zip(v, np.roll(v, -1, axis=0)):
            cond = (a[1] > y) != (b[1] > y)
            with np.errstate(divide="ignore", invalid="ignore"):
                xint = a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1])
            inside ^= cond & (x < xint)
        return inside & ~self.on_curve(x, y)

    def crossing(self, p, q):
        v = self._v
        d = np.array([q[0] - p[0], q[1] - p[1]])
        best = None
        for a, b in zip(v, np.roll(v, -1, axis=0)):
            e = b - a
            den = d[0] * (-e[1]) - d[1] * (-e[0])
            if abs(den) < 1e-300:
                continue
            rx, ry = a[0] - p[0], a[1] - p[1]
            t = (rx * (-e[1]) - ry * (-e[0])) / den
            s = (d[0] * ry - d[1] * rx) / den
            if -1e-12 <= t <= 1 + 1e-9 and -1e-12 <= s <= 1 + 1e-12:
                t = min(max(t, 0.0), 1.0)
                best = t if best is None else min(best, t)
        return best

    def polyline(self, n=None):
        v = self._v
        pts = []
        for a, b in zip(v, np.roll(v, -1, axis=0)):
            for s in np.linspace(0, 1, 16, endpoint=False):
                pts.append(a + s * (b - a))
        return np.asarray(pts)

    def to_dict(self):
        return {"type": "polygon", "vertices": [list(p) for p in self.vertices]}


class Rectangle(Polygon):
    def __init__(self, xmin, xmax, ymin, ymax):
        if not (xmax > xmin and ymax > ymin):
            raise DomainError("rectangle needs xmax > xmin and ymax > ymin")
        super().__init__(((xmin, ymin), (xmax, ymin), (xmax, ymax), (xmin, ymax)))
        object.__setattr__(self, "limits", (float(xmin), float(xmax), float(ymin), float(ymax)))

    @property
    def bbox(self):
        return self.limits

    def contains(self, x, y):
        x0, x1, y0, y1 = self.limits
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        return (x > x0) & (x < x1) & (y > y0) & (y < y1) & ~self.on_curve(x, y)

    def distance(self, x, y):
        x0, x1, y0, y1 = self.limits
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        inside = (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)
        din = np.minimum(np.minimum(x - x0, x1 - x), np.minimum(y - y0, y1 - y))
        dx = np.maximum(np.maximum(x0 - x, 0), x - x1)
        dy = np.maximum(np.maximum(y0 - y, 0), y - y1)
        return np.where(inside, din, np.hypot(dx, dy))

    def __repr__(self):
        return "Rectangle(%g, %g, %g, %g)" % self.limits

    def to_dict(self):
        x0, x1, y0, y1 = self.limits
        return {"type": "rectangle", "xmin": x0, "xmax": x1, "ymin": y0, "ymax": y1}


def curve_from_dict(d):
    kind = d["type"]
    if kind == "circle":
        return Circle(float(d["center"][0]), float(d["center"][1]), float(d["radius"]))
    if kind == "rectangle":
        return Rectangle(d["xmin"], d["xmax"], d["ymin"], d["ymax"])
    if kind == "polygon":
        return Polygon(tuple(map(tuple, d["vertices"])))
    raise DomainError(f"unknown curve type {kind!r}")


def curves_overlap(c1, c2):
    """True if the two closed curves intersect or one contains the other."""
    p1, p2 = c1.polyline(), c2.polyline()
    if c2.contains(p1[:, 0], p1[:, 1]).any() or c2.on_curve(p1[:, 0], p1[:, 1]).any():
        return True
    if c1.contains(p2[:, 0], p2[:, 1]).any() or c1.on_curve(p2[:, 0], p2[:, 1]).any():
        return True
    return False


def curve_inside(inner, outer):
    """True if ``inner`` lies strictly inside ``outer`` without touching it."""
    p = inner.polyline()
    return bool(outer.contains(p[:, 0], p[:, 1]).all()) and not bool(
        inner.contains(*np.asarray(outer.polyline()).T).any()
    )
