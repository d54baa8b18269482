"""Scenario configuration (JSON, strict).

Unknown keys are rejected and every error carries the JSON path of the
offending value, e.g. ``vortices[1].eps``.
"""

from __future__ import annotations

import json
import os
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, ValidationError, model_validator

from .bathymetry import bathymetry_from_dict
from .errors import ConfigError, InputError
from .geometry import curve_from_dict
from .grid import Domain, build_grid


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class CircleSpec(Strict):
    type: Literal["circle"]
    center: tuple[float, float]
    radius: PositiveFloat


class RectangleSpec(Strict):
    type: Literal["rectangle"]
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    @model_validator(mode="after")
    def _order(self):
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise ValueError("rectangle needs xmin < xmax and ymin < ymax")
        return self


class PolygonSpec(Strict):
    type: Literal["polygon"]
    vertices: list[tuple[float, float]] = Field(min_length=3)


Curve = Annotated[Union[CircleSpec, RectangleSpec, PolygonSpec], Field(discriminator="type")]


class DomainSpec(Strict):
    outer: Curve
    islands: list[Curve] = []


class ConstantB(Strict):
    type: Literal["constant"]
    b0: PositiveFloat


class LinearSlopeB(Strict):
    type: Literal["linear_slope"]
    alpha: PositiveFloat


class ExponentialB(Strict):
    type: Literal["exponential"]
    b1: PositiveFloat
    s: float
    ell: float = 0.0
    y0: float


class Region(Strict):
    curve: Curve
    depth: PositiveFloat


class PiecewiseB(Strict):
    type: Literal["piecewise_constant"]
    regions: list[Region]
    background: PositiveFloat


class SampledB(Strict):
    type: Literal["sampled"]
    path: str


Bathy = Annotated[Union[ConstantB, LinearSlopeB, ExponentialB, PiecewiseB, SampledB], Field(discriminator="type")]


class GridSpec(Strict):
    h: Optional[PositiveFloat] = None
    nx: Optional[int] = Field(default=None, ge=5)

    @model_validator(mode="after")
    def _one(self):
        if (self.h is None) == (self.nx is None):
            raise ValueError("give exactly one of h or nx")
        return self


class VortexSpec(Strict):
    x: float
    y: float
    gamma: float
    eps: PositiveFloat

    @model_validator(mode="after")
    def _nonzero(self):
        if self.gamma == 0:
            raise ValueError("gamma must be nonzero")
        return self


class SolverSpec(Strict):
    tol: float = Field(default=1e-10, gt=0, le=1e-4)
    template: Literal["log", "caowan", "dekeyser"] = "dekeyser"
    mode: Literal["field", "hamiltonian"] = "field"
    richardson_b_factor: bool = True
    include_regular_self: bool = False
    method: Literal["direct", "dense", "cg", "auto"] = "direct"
    fd_step: Optional[PositiveFloat] = None


class IntegratorSpec(Strict):
    dt: Optional[PositiveFloat] = None
    T: PositiveFloat = 1.0
    sample_every: PositiveInt = 1


class OutputSpec(Strict):
    directory: str = "out"
    formats: list[Literal["csv", "json", "field"]] = ["csv", "json", "field"]


class GreenSpec(Strict):
    source: tuple[float, float]
    separations: list[PositiveFloat] = []
    tilde: bool = False


class RingSpec(Strict):
    x: float
    y: PositiveFloat
    gamma: float
    eps: PositiveFloat


class RingsSpec(Strict):
    rings: list[RingSpec] = Field(min_length=1)
    dt: PositiveFloat = 0.02
    T: PositiveFloat = 50.0
    sample_every: PositiveInt = 1
    fd_step: Optional[PositiveFloat] = None
    kernel: Literal["elliptic", "quad"] = "elliptic"


class RipSpec(Strict):
    x: PositiveFloat
    y: PositiveFloat
    gamma: float
    p: float = Field(ge=0)
    dt: PositiveFloat = 0.005
    T: PositiveFloat = 2.0
    sample_every: PositiveInt = 1


class VerifySpec(Strict):
    criteria: Optional[list[int]] = None


class ScenarioConfig(Strict):
    domain: Optional[DomainSpec] = None
    bathymetry: Optional[Bathy] = None
    grid: Optional[GridSpec] = None
    vortices: list[VortexSpec] = []
    circulations: list[float] = []
    solver: SolverSpec = SolverSpec()
    integrator: IntegratorSpec = IntegratorSpec()
    output: OutputSpec = OutputSpec()
    green: Optional[GreenSpec] = None
    rings: Optional[RingsSpec] = None
    riptoy: Optional[RipSpec] = None
    verify: Optional[VerifySpec] = None

    @model_validator(mode="after")
    def _consistency(self):
        if self.domain is None:
            if self.vortices or self.circulations:
                raise ConfigError("vortices and circulations need a domain block", "domain")
            return self
        dom = domain_of(self)
        if len(self.circulations) != dom.g:
            raise ConfigError(
                f"circulations has {len(self.circulations)} entries but the domain has {dom.g} islands", "circulations"
            )
        for k, v in enumerate(self.vortices):
            if not dom.contains(v.x, v.y):
                raise ConfigError(f"({v.x:g}, {v.y:g}) is outside the domain", f"vortices[{k}]")
        if self.vortices and self.grid is not None and self.integrator.dt is None:
            # fill the CFL-like default so the parsed config is explicit
            dt = default_dt_for(self)
            object.__setattr__(self, "integrator", self.integrator.model_copy(update={"dt": dt}))
        return self


def _loc(loc):
    out = ""
    for part in loc:
        if isinstance(part, int):
            out += f"[{part}]"
        elif part in ("circle", "rectangle", "polygon", "constant", "linear_slope", "exponential", "piecewise_constant", "sampled"):
            continue  # union tag, not a user key
        else:
            out += ("." if out else "") + str(part)
    return out or "$"


def parse_config(text) -> ScenarioConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e}", "$") from None
    try:
        return ScenarioConfig.model_validate(raw)
    except ValidationError as e:
        err = e.errors()[0]
        orig = err.get("ctx", {}).get("error")
        if isinstance(orig, ConfigError):
            raise orig from None
        msg = err["msg"].removeprefix("Value error, ")
        raise ConfigError(msg, _loc(err["loc"])) from None


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def dump_config(cfg: ScenarioConfig) -> str:
    return json.dumps(cfg.model_dump(mode="json", exclude_none=True), indent=2, sort_keys=True)


def domain_of(cfg: ScenarioConfig) -> Domain:
    if cfg.domain is None:
        raise ConfigError("missing block", "domain")
    d = cfg.domain
    try:
        return Domain(curve_from_dict(d.outer.model_dump()), [curve_from_dict(c.model_dump()) for c in d.islands])
    except InputError as e:
        raise ConfigError(str(e), "domain") from None


def grid_spacing(cfg: ScenarioConfig) -> float:
    if cfg.grid is None:
        raise ConfigError("missing block", "grid")
    if cfg.grid.h is not None:
        return cfg.grid.h
    x0, x1, _, _ = domain_of(cfg).outer.bbox
    return (x1 - x0) / (cfg.grid.nx - 1)


def default_dt_for(cfg: ScenarioConfig) -> float:
    """dt = h / (4 max|gamma| / (2 pi min_clearance))."""
    dom = domain_of(cfg)
    c = min(float(dom.clearance(v.x, v.y)) for v in cfg.vortices)
    gmax = max(abs(v.gamma) for v in cfg.vortices)
    return grid_spacing(cfg) / (4 * gmax / (2 * np.pi * c))


def grid_of(cfg: ScenarioConfig):
    return build_grid(domain_of(cfg), grid_spacing(cfg))


def bathymetry_of(cfg: ScenarioConfig, base_dir="."):
    if cfg.bathymetry is None:
        raise ConfigError("missing block", "bathymetry")
    return bathymetry_from_dict(cfg.bathymetry.model_dump(), base_dir)


def vortices_of(cfg: ScenarioConfig):
    from .dynamics import VortexSystem

    v = cfg.vortices
    return VortexSystem(np.array([[a.x, a.y] for a in v]).reshape(-1, 2), [a.gamma for a in v], [a.eps for a in v])


def context_of(cfg: ScenarioConfig, base_dir=".", threads=1):
    from .dynamics import SimulationContext

    s = cfg.solver
    return SimulationContext(
        grid_of(cfg),
        bathymetry_of(cfg, base_dir),
        p=cfg.circulations,
        variant=s.template,
        tol=s.tol,
        mode=s.mode,
        richardson_b_factor=s.richardson_b_factor,
        include_regular_self=s.include_regular_self,
        fd_step=s.fd_step,
        method=s.method,
        threads=threads,
    )


def config_dir(path) -> str:
    return os.path.dirname(os.path.abspath(path))
