"""Depth profiles b(x, y).

Every profile is a callable ``b(x, y)`` (numpy-vectorised) plus a
``to_dict`` for configs. ``sample_bathymetry`` evaluates one on a grid and
enforces positivity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BathymetryError, InputError
from .geometry import curve_from_dict


@dataclass(frozen=True)
class Constant:
    b0: float

    def __call__(self, x, y):
        return np.full(np.broadcast(np.asarray(x, float), np.asarray(y, float)).shape, float(self.b0))

    def to_dict(self):
        return {"type": "constant", "b0": self.b0}


@dataclass(frozen=True)
class LinearSlope:
    """Uniform beach b = alpha * y (y offshore)."""

    alpha: float

    def __call__(self, x, y):
        x = np.asarray(x, float)
        return self.alpha * np.asarray(y, float) + 0.0 * x

    def to_dict(self):
        return {"type": "linear_slope", "alpha": self.alpha}


@dataclass(frozen=True)
class Exponential:
    """b1 exp(s (y - ell)) below y0, continued as a constant above it."""

    b1: float
    s: float
    ell: float
    y0: float

    def __call__(self, x, y):
        x = np.asarray(x, float)
        y = np.minimum(np.asarray(y, float), self.y0)
        return self.b1 * np.exp(self.s * (y - self.ell)) + 0.0 * x

    def to_dict(self):
        return {"type": "exponential", "b1": self.b1, "s": self.s, "ell": self.ell, "y0": self.y0}


@dataclass(frozen=True)
class PiecewiseConstant:
    """Depth kappa_l inside each region curve, ``background`` elsewhere.

    Region curves must be disjoint; nodes on a region curve take the
    region depth.
    """

    regions: tuple  # of (curve, depth)
    background: float

    def __call__(self, x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        out = np.full(np.broadcast(x, y).shape, float(self.background))
        for curve, depth in self.regions:
            mask = curve.contains(x, y) | curve.on_curve(x, y)
            out = np.where(mask, depth, out)
        return out

    def to_dict(self):
        return {
            "type": "piecewise_constant",
            "background": self.background,
            "regions": [{"curve": c.to_dict(), "depth": d} for c, d in self.regions],
        }


@dataclass(frozen=True)
class Sampled:
    """Bilinear interpolation of nodal values on a uniform grid."""

    values: np.ndarray = field(compare=False)
    h: float
    x0: float
    y0: float
    path: str | None = None

    def __post_init__(self):
        v = np.asarray(self.values, float)
        if v.ndim != 2 or min(v.shape) < 2:
            raise InputError("sampled bathymetry needs a 2-D array with at least 2x2 nodes")
        object.__setattr__(self, "values", v)

    def __call__(self, x, y):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        ny, nx = self.values.shape
        fx = (x - self.x0) / self.h
        fy = (y - self.y0) / self.h
        # snap coordinates that sit on a sample node up to rounding
        fx = np.where(np.abs(fx - np.round(fx)) < 1e-9, np.round(fx), fx)
        fy = np.where(np.abs(fy - np.round(fy)) < 1e-9, np.round(fy), fy)
        if np.any(fx < 0) or np.any(fx > nx - 1) or np.any(fy < 0) or np.any(fy > ny - 1):
            raise BathymetryError("point outside the sampled bathymetry extent")
        i = np.clip(np.floor(fx).astype(int), 0, nx - 2)
        j = np.clip(np.floor(fy).astype(int), 0, ny - 2)
        tx = fx - i
        ty = fy - j
        v = self.values
        return (
            v[j, i] * (1 - tx) * (1 - ty)
            + v[j, i + 1] * tx * (1 - ty)
            + v[j + 1, i] * (1 - tx) * ty
            + v[j + 1, i + 1] * tx * ty
        )

    def to_dict(self):
        if self.path is None:
            raise InputError("sampled bathymetry without a file path cannot be serialised")
        return {"type": "sampled", "path": self.path}


def bathymetry_from_dict(d, base_dir="."):
    kind = d["type"]
    if kind == "constant":
        return Constant(float(d["b0"]))
    if kind == "linear_slope":
        return LinearSlope(float(d["alpha"]))
    if kind == "exponential":
        return Exponential(float(d["b1"]), float(d["s"]), float(d["ell"]), float(d["y0"]))
    if kind == "piecewise_constant":
        regions = tuple((curve_from_dict(r["curve"]), float(r["depth"])) for r in d["regions"])
        return PiecewiseConstant(regions, float(d["background"]))
    if kind == "sampled":
        import os

        from .fieldio import read_field

        path = d["path"]
        full = path if os.path.isabs(path) else os.path.join(base_dir, path)
        values, h, x0, y0 = read_field(full)
        return Sampled(values, h, x0, y0, path=path)
    raise InputError(f"unknown bathymetry type {kind!r}")


def sample_bathymetry(bathy, grid):
    """Nodal depth on every grid node that takes part in the operator.

    Exterior nodes are returned as NaN. Raises if any interior or boundary
    node has b <= 0.
    """
    X, Y = grid.mesh()
    b = np.asarray(bathy(X, Y), float)
    used = grid.kind != 0
    bad = used & ~(b > 0)
    if bad.any():
        j, i = np.argwhere(bad)[0]
        raise BathymetryError(
            f"bathymetry must be positive: b={b[j, i]:g} at node (i={i}, j={j}), "
            f"x={X[j, i]:g}, y={Y[j, i]:g}",
            node=(int(i), int(j)),
        )
    return np.where(used, b, np.nan)
