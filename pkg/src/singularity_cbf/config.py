"""YAML scenario configuration.

A config file names one scenario and may override any default of the modules
it touches.  Unknown keys are rejected at every level and all problems are
reported together.  Example::

    scenario: ArmSpike
    cbf: true
    sim: {dt: 0.001, t_end: 10.0}
    arm: {epsilon: 0.1, Kp: 2.0}
"""
from __future__ import annotations

from pathlib import Path
from typing import List, Literal, Optional, Tuple

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .arm import ArmParameters, ArmScenario
from .cbf import ClassKFunction
from .dynamics import SimulatorConfig
from .errors import ConfigurationError
from .magnetic import AgentParams, CoilConfig, MagneticRig
from .suture import CirclePath, SingularMapConfig, SutureConfig, stitch_path

SCENARIOS = ("ArmSpike", "MagneticSuture", "SingularMap")


class ConfigErrors(ConfigurationError):
    """All validation problems found in one config file."""

    def __init__(self, errors: List[str], source=None):
        self.errors = list(errors)
        where = f"{source}: " if source else ""
        super().__init__(where + "; ".join(self.errors))


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


Pos = Field(gt=0)


class AlphaSection(_Strict):
    kind: Literal["linear", "quadratic"] = "linear"
    gamma: float = Pos


class SimSection(_Strict):
    dt: float = Field(1e-3, gt=0)
    t_end: Optional[float] = Field(None, gt=0)
    integrator: Literal["euler", "rk4"] = "rk4"

    @field_validator("integrator", mode="before")
    @classmethod
    def _lower(cls, v):
        return v.lower() if isinstance(v, str) else v


class ArmSection(_Strict):
    l1: float = Field(1.0, gt=0)
    l2: float = Field(1.0, gt=0)
    Kp: float = Field(2.0, gt=0)
    epsilon: float = Field(0.1, gt=0)
    q0: Tuple[float, float] = (float(np.pi / 4), float(np.pi / 2))
    waypoints: List[Tuple[float, float]] = [(float(np.sqrt(2.0)), float(np.sqrt(2.0))), (0.5, 1.2)]
    switch_times: List[float] = [5.0]
    alpha: AlphaSection = AlphaSection(kind="linear", gamma=1.0)
    gradient: Literal["analytic", "fd"] = "analytic"


class RigSection(_Strict):
    n_coils: int = Field(4, ge=3)
    coil_radius: float = Field(0.04, gt=0)          # m
    coil_moment: float = Field(1.0, gt=0)           # A m^2 per A
    coil_phase: float = 0.0
    positions: Optional[List[Tuple[float, float]]] = None   # m, overrides the ring
    moments: Optional[List[Tuple[float, float]]] = None
    m0: float = Field(AgentParams.m0, gt=0)
    c_t: float = Field(AgentParams.c_t, gt=0)
    c_r: float = Field(AgentParams.c_r, gt=0)
    current_limit: float = Field(4.0, gt=0)
    workspace_radius: float = Field(17.5, gt=0)    # mm

    @model_validator(mode="after")
    def _explicit_layout(self):
        if (self.positions is None) != (self.moments is None):
            raise ValueError("positions and moments must be given together")
        if self.positions is not None and len(self.positions) != len(self.moments):
            raise ValueError("need one moment per coil position")
        return self


class MapSection(_Strict):
    x_range: Tuple[float, float] = (-17.5, 17.5)
    y_range: Tuple[float, float] = (-17.5, 17.5)
    theta_range: Tuple[float, float] = (float(-np.pi), float(np.pi))
    counts: Tuple[int, int, int] = (40, 40, 60)
    threshold: float = Field(SingularMapConfig.threshold, gt=0)
    theta_cover: Tuple[float, float] = (float(-2 * np.pi), float(2 * np.pi))

    @field_validator("counts")
    @classmethod
    def _counts(cls, v):
        if min(v) < 2:
            raise ValueError("every axis needs at least 2 grid nodes")
        return v

    @field_validator("x_range", "y_range", "theta_range", "theta_cover")
    @classmethod
    def _range(cls, v):
        if not v[1] > v[0]:
            raise ValueError("range must be increasing")
        return v


class StitchSection(_Strict):
    n_stitches: int = Field(3, ge=1)
    incision_length: float = Field(10.0, gt=0)
    bite: float = Field(5.0, gt=0)
    speed: float = Field(3.0, gt=0)
    theta_ref: float = 0.15


class CircleSection(_Strict):
    radius: float = Field(8.0, gt=0)
    period: float = Field(20.0, gt=0)
    theta_ref: float = 0.6
    turns: float = Field(1.0, gt=0)


class SutureSection(_Strict):
    path: Literal["stitch", "circle"] = "stitch"
    obstacles: bool = True
    W: Tuple[float, float, float] = (100.0, 100.0, 1.0)
    gamma_reg: float = Field(1e-6, gt=0)
    K_track: Tuple[float, float, float] = (4.0, 4.0, 2.0)
    alpha: AlphaSection = AlphaSection(kind="quadratic", gamma=1000.0)
    delta: Optional[float] = Field(None, gt=0)
    horizon: float = Field(0.2, gt=0)
    x0: Optional[Tuple[float, float, float]] = None
    stitch: StitchSection = StitchSection()
    circle: CircleSection = CircleSection()

    @field_validator("W", "K_track")
    @classmethod
    def _positive(cls, v):
        if min(v) <= 0:
            raise ValueError("entries must be positive")
        return v


class ScenarioConfig(_Strict):
    scenario: Literal["ArmSpike", "MagneticSuture", "SingularMap"]
    cbf: bool = True
    seed: int = 0
    output_dir: Optional[str] = None
    diagnostics: bool = False       # per-step filter diagnostics as JSON lines
    max_infeasible: int = Field(0, ge=0)   # QP failures tolerated before the run counts as failed
    plots: bool = True
    sim: SimSection = SimSection()
    arm: ArmSection = ArmSection()
    rig: RigSection = RigSection()
    map: MapSection = MapSection()
    suture: SutureSection = SutureSection()
    source: Optional[str] = Field(None, exclude=True)

    # -- builders for the domain objects ---------------------------------

    def arm_parameters(self) -> ArmParameters:
        a = self.arm
        return ArmParameters(a.l1, a.l2, a.Kp, a.epsilon)

    def arm_scenario(self, cbf: Optional[bool] = None) -> ArmScenario:
        a = self.arm
        return ArmScenario(
            waypoints=tuple(tuple(w) for w in a.waypoints),
            switch_times=tuple(a.switch_times),
            cbf_enabled=self.cbf if cbf is None else cbf,
            q0=tuple(a.q0),
            alpha=ClassKFunction(a.alpha.kind, a.alpha.gamma),
            gradient=a.gradient,
        )

    def rig_model(self) -> MagneticRig:
        r = self.rig
        if r.positions is not None:
            coils = CoilConfig(np.array(r.positions), np.array(r.moments))
        else:
            coils = CoilConfig.ring(r.n_coils, r.coil_radius, r.coil_moment, r.coil_phase)
        return MagneticRig(coils, AgentParams(r.m0, r.c_t, r.c_r), r.workspace_radius, r.current_limit)

    def map_config(self) -> SingularMapConfig:
        m = self.map
        return SingularMapConfig(tuple(m.x_range), tuple(m.y_range), tuple(m.theta_range),
                                 tuple(m.counts), m.threshold, tuple(m.theta_cover))

    def suture_config(self, cbf: Optional[bool] = None) -> SutureConfig:
        s = self.suture
        return SutureConfig(tuple(s.W), s.gamma_reg, tuple(s.K_track),
                            ClassKFunction(s.alpha.kind, s.alpha.gamma), s.delta, s.horizon,
                            self.cbf if cbf is None else cbf)

    def path(self):
        s = self.suture
        if s.path == "circle":
            c = s.circle
            return CirclePath(c.radius, c.period, c.theta_ref, c.turns)
        st = s.stitch
        return stitch_path(st.n_stitches, st.incision_length, st.bite, st.speed, st.theta_ref)

    def sim_config(self) -> SimulatorConfig:
        if self.sim.t_end is not None:
            t_end = self.sim.t_end
        elif self.scenario == "ArmSpike":
            t_end = 10.0
        else:
            t_end = self.path().duration
        return SimulatorConfig(self.sim.dt, t_end, self.sim.integrator)


def _format_pydantic(exc: ValidationError) -> List[str]:
    out = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        if err["type"] == "extra_forbidden":
            out.append(f"unknown key '{loc}'")
        else:
            out.append(f"{loc}: {err['msg']}")
    return out


def _domain_checks(cfg: ScenarioConfig) -> List[str]:
    """Invariants owned by the domain modules, run only for the sections in use."""
    errors = []
    checks = {"sim": cfg.sim_config}
    if cfg.scenario == "ArmSpike":
        checks["arm"] = lambda: cfg.arm_scenario().validate(cfg.arm_parameters())
    else:
        checks["rig"] = cfg.rig_model
        checks["map"] = cfg.map_config
    if cfg.scenario == "MagneticSuture":
        checks["suture"] = lambda: (cfg.suture_config(), cfg.path())
    for key, fn in checks.items():
        try:
            fn()
        except (ConfigurationError, ValueError) as exc:
            errors.append(f"{key}: {exc}")
    if cfg.scenario != "ArmSpike" and not errors:
        rig = cfg.rig_model()
        inside = np.hypot(rig.coils.positions[:, 0], rig.coils.positions[:, 1]) * 1e3 <= rig.workspace_radius_mm
        if inside.any():
            errors.append("rig: coils must sit outside the workspace disk")
    return errors


def config_from_dict(data, source=None) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigErrors(["top level must be a mapping"], source)
    try:
        cfg = ScenarioConfig.model_validate({**data, "source": source})
    except ValidationError as exc:
        raise ConfigErrors(_format_pydantic(exc), source) from None
    errors = _domain_checks(cfg)
    if errors:
        raise ConfigErrors(errors, source)
    return cfg


def parse_config(path) -> ScenarioConfig:
    """Load and validate a YAML config; raises ConfigErrors listing every problem."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigErrors([f"cannot read config: {exc}"], str(path)) from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigErrors([f"invalid YAML: {exc}"], str(path)) from None
    return config_from_dict(data if data is not None else {}, str(path))
