"""YAML scenario files: schema, validation with line references, and object builders.

Every physical quantity carries its unit in the key name: ``_m`` metres,
``_s`` seconds, ``_w`` watts, ``_hz`` hertz, ``_db`` / ``_dbm`` decibels.
Angles are radians. Unknown keys are rejected.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import comms
from .channel import (
    Breakpoint,
    BuildingLayout,
    CompositeChannel,
    FadingProcess,
    Floor,
    Grid2D,
    PathLossParams,
    RadioMap,
    RadioMapChannel,
    Wall,
    sample_shadowing_field,
)
from .energy import MotorElectricParams, distance_energy, electric_energy_ddr, square_norm_energy
from .motion import models
from .motion.dynamics import DdrDynParams
from .motion.kinematics import DdrParams, TomrParams
from .planner import CaTPProblem, ConstraintSpec, ObjectiveSpec, SolverConfig
from .seeding import stream_seed

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    """Raised with every schema problem found in a scenario file."""

    def __init__(self, path, errors):
        self.path = str(path)
        self.errors = list(errors)
        lines = "\n".join(f"  - {e}" for e in self.errors)
        super().__init__(f"{self.path}: invalid scenario\n{lines}")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# --- robot -----------------------------------------------------------------

class IntegratorBlock(_Strict):
    method: Literal["rk4", "euler"] = "rk4"
    substeps: int = Field(1, ge=1)


class RobotBlock(_Strict):
    model: Literal["single_integrator", "double_integrator", "unicycle", "ddr_kinematic", "tomr_kinematic", "ddr_dynamic"]
    dim: int = Field(2, ge=1, le=3)
    allow_reverse: bool = False
    wheel_radius_m: Optional[float] = None
    half_axle_m: Optional[float] = None
    center_distance_m: Optional[float] = None
    A: Optional[list[list[float]]] = None
    B: Optional[list[list[float]]] = None
    initial_state: list[float]
    integrator: IntegratorBlock = IntegratorBlock()


# --- channel ---------------------------------------------------------------

class BreakpointBlock(_Strict):
    alpha1: float
    alpha2: float
    distance_m: float


class PathLossBlock(_Strict):
    K0: float = 1.0
    d0_m: float = 1.0
    alpha: float = 2.0
    breakpoint: Optional[BreakpointBlock] = None
    continuous: bool = False


class WallBlock(_Strict):
    start_m: list[float]
    end_m: list[float]
    attenuation_db: float


class FloorBlock(_Strict):
    z_m: float
    attenuation_db: float


class GridBlock(_Strict):
    origin_m: list[float]
    spacing_m: float
    shape: list[int]


class ShadowingBlock(_Strict):
    mu_db: float = 0.0
    sigma_db: float = Field(ge=0)
    beta_m: float = Field(gt=0)
    grid: GridBlock


class FadingBlock(_Strict):
    kind: Literal["rayleigh", "rician"] = "rayleigh"
    rician_k: float = Field(0.0, ge=0)
    wavelength_m: float = Field(gt=0)
    coherence_time_s: float = math.inf
    n_scatterers: int = Field(2048, ge=16)

    @model_validator(mode="after")
    def _k_matches_kind(self):
        if self.kind == "rayleigh" and self.rician_k != 0:
            raise ValueError("rayleigh fading takes rician_k = 0")
        if self.kind == "rician" and not self.rician_k > 0:
            raise ValueError("rician fading needs rician_k > 0")
        return self


class RadioMapSource(_Strict):
    path: str
    layer: str = "mean_gain_db"


class ChannelBlock(_Strict):
    peer_m: list[float]
    path_loss: Optional[PathLossBlock] = PathLossBlock()
    near_field: Literal["error", "clamp"] = "error"
    walls: list[WallBlock] = []
    floors: list[FloorBlock] = []
    shadowing: Optional[ShadowingBlock] = None
    fading: Optional[FadingBlock] = None
    radio_map: Optional[RadioMapSource] = None


# --- communications --------------------------------------------------------

class PolicyBlock(_Strict):
    kind: Literal["constant", "adaptive"] = "constant"
    power_w: float = Field(1.0, gt=0)
    p_ref_w: float = Field(1.0, gt=0)
    p_max_w: float = Field(math.inf, gt=0)


class RateBlock(_Strict):
    kind: Literal["shannon", "table"] = "shannon"
    bandwidth_hz: float = Field(1.0, gt=0)
    thresholds_db: list[float] = []
    rates_bps: list[float] = []


class CommsBlock(_Strict):
    noise_power_w: float = Field(gt=0)
    policy: PolicyBlock = PolicyBlock()
    rate: RateBlock = RateBlock()
    receiver_power_w: float = Field(0.0, ge=0)
    rssi_step_db: float = Field(1.0, gt=0)
    rssi_floor_dbm: float = -100.0


# --- energy, problem, solver ----------------------------------------------

class EnergyBlock(_Strict):
    kind: Literal["square_norm", "electric_ddr", "distance"] = "square_norm"
    k1: float = 1.0
    k2: float = 0.0
    k_j_per_m: float = 1.0


class ObjectiveBlock(_Strict):
    kind: Literal["min_total_energy", "weighted", "ratio", "constant"] = "min_total_energy"
    theta: float = Field(0.5, ge=0, le=1)
    comm_metric: Literal["comm_energy", "neg_bits"] = "neg_bits"
    E_ref: Optional[float] = None
    f_ref: Optional[float] = None
    eps_E: float = 1e-9


class ConstraintBlock(_Strict):
    kind: Literal["workspace", "closed_trajectory", "terminal_state", "control_bound", "smoothness",
                  "min_expected_bits", "snr_chance"]
    name: str = ""
    mode: Literal["hard", "penalty", "slack"] = "hard"
    mu1: float = 1e3
    mu2: float = 10.0
    k_s: float = 1.0
    slack_max: float = 10.0
    tolerance: float = 0.0
    scale: float = 1.0
    indices: Optional[list[int]] = None
    target: Optional[list[float]] = None
    lower_m: Optional[list[float]] = None
    upper_m: Optional[list[float]] = None
    bound: Optional[float] = None
    order: int = 1
    n_bits: Optional[float] = None
    gamma0: Optional[float] = None
    gamma0_db: Optional[float] = None
    epsilon: Optional[float] = None


class SolverBlock(_Strict):
    population: int = Field(64, ge=2)
    elite_fraction: float = Field(0.1, gt=0, le=1)
    iterations: int = Field(50, ge=1)
    smoothing: float = Field(0.7, gt=0, le=1)
    init_std_fraction: float = Field(0.5, gt=0)
    std_floor_fraction: float = Field(1e-6, ge=0)
    refine: bool = False
    refine_max_evaluations: int = Field(2000, ge=1)
    alphabet: Optional[list[float]] = None
    T_grid_s: Optional[list[float]] = None
    power_grid_w: Optional[list[float]] = None


class ControlsBlock(_Strict):
    profile: Literal["schedule", "zero", "constant"] = "zero"
    value: Optional[list[float]] = None
    schedule: Optional[list[list[float]]] = None


class ProblemBlock(_Strict):
    horizon_s: float = Field(gt=0)
    horizon_bounds_s: Optional[list[float]] = None
    intervals: int = Field(ge=2)
    control_lower: Union[float, list[float]] = -1.0
    control_upper: Union[float, list[float]] = 1.0
    power_bounds_w: Optional[list[float]] = None
    objective: ObjectiveBlock = ObjectiveBlock()
    include_comm_energy: bool = True
    mc_samples: int = Field(256, ge=1)
    constraints: list[ConstraintBlock] = []
    solver: SolverBlock = SolverBlock()
    controls: ControlsBlock = ControlsBlock()


class ChannelMapBlock(_Strict):
    lower_m: list[float]
    upper_m: list[float]
    spacing_m: float = Field(gt=0)
    max_cells: int = Field(250_000, ge=1)
    time_s: float = 0.0


class ValidateBlock(_Strict):
    shadowing_sigma_db: float = Field(4.0, ge=0)
    shadowing_beta_m: float = Field(10.0, gt=0)
    shadowing_size: int = Field(512, ge=16)
    wavelength_m: float = Field(0.125, gt=0)
    check_wavelength_m: Optional[float] = None
    fading_samples: int = Field(100_000, ge=1000)
    rician_k: list[float] = [1.0, 5.0, 10.0]
    mc_samples: int = Field(100_000, ge=1000)


class OutputBlock(_Strict):
    trajectory_csv: str = "trajectory.csv"
    report: str = "report.json"
    timing: str = "timing.json"
    history: Optional[str] = None
    radio_map: str = "radiomap.txt"


class Scenario(_Strict):
    schema_version: Literal[1] = 1
    name: str = "scenario"
    seed: int = Field(0, ge=0, lt=2**64)
    robot: RobotBlock
    channel: Optional[ChannelBlock] = None
    comms: Optional[CommsBlock] = None
    energy: EnergyBlock = EnergyBlock()
    problem: ProblemBlock
    channel_map: Optional[ChannelMapBlock] = None
    validate_: ValidateBlock = Field(ValidateBlock(), alias="validate")
    output: OutputBlock = OutputBlock()

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    @field_validator("name")
    @classmethod
    def _plain_name(cls, v):
        if not v or any(ch.isspace() for ch in v):
            raise ValueError("name must be non-empty without whitespace")
        return v


# --- loading -------------------------------------------------------------

@dataclass(frozen=True)
class LoadedScenario:
    spec: Scenario
    path: str
    text: str

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()

    def with_seed(self, seed: int | None) -> "LoadedScenario":
        if seed is None:
            return self
        return LoadedScenario(self.spec.model_copy(update={"seed": int(seed)}), self.path, self.text)


def _line_of(root, loc):
    """Line number (1-based) of the YAML node at a pydantic error location, or None."""
    node = root
    line = None if node is None else node.start_mark.line + 1
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            match = next((v for k, v in node.value if k.value == key), None)
            if match is None:
                break
            node = match
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
        else:
            break
        line = node.start_mark.line + 1
    return line


def _format_errors(exc: ValidationError, root):
    out = []
    for err in exc.errors():
        loc = tuple(err["loc"])
        where = ".".join(str(k) for k in loc) or "<root>"
        line = _line_of(root, loc)
        prefix = f"line {line}: " if line else ""
        if err["type"] == "extra_forbidden":
            out.append(f"{prefix}unknown key '{loc[-1]}' at {where}")
        elif err["type"] == "missing":
            out.append(f"{prefix}missing required key '{loc[-1]}' at {where}")
        else:
            out.append(f"{prefix}{where}: {err['msg']}")
    return out


def parse_scenario(text: str, path="<string>") -> LoadedScenario:
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(path, [f"YAML parse error: {exc}"]) from exc
    if not isinstance(data, dict):
        raise ScenarioError(path, ["top level must be a mapping"])
    try:
        spec = Scenario.model_validate(data)
    except ValidationError as exc:
        raise ScenarioError(path, _format_errors(exc, root)) from exc
    loaded = LoadedScenario(spec, str(path), text)
    # building checks the physical invariants held by the dataclasses themselves
    try:
        build_all(loaded)
    except ScenarioError:
        raise
    except (ValueError, TypeError) as exc:
        raise ScenarioError(path, [f"invariant violation: {exc}"]) from exc
    return loaded


def load_scenario(path) -> LoadedScenario:
    p = Path(path)
    if not p.is_file():
        raise ScenarioError(path, ["file not found"])
    return parse_scenario(p.read_text(), p)


# --- builders ----------------------------------------------------------

def _seed_int(master: int, stream: str) -> int:
    return int(stream_seed(master, stream).generate_state(1, dtype=np.uint64)[0])


def build_model(robot: RobotBlock):
    def need(*names):
        missing = [n for n in names if getattr(robot, n) is None]
        if missing:
            raise ScenarioError("robot", [f"model {robot.model} needs {', '.join(missing)}"])

    if robot.model == "single_integrator":
        return models.single_integrator(robot.dim)
    if robot.model == "double_integrator":
        return models.double_integrator(robot.dim)
    if robot.model == "unicycle":
        return models.unicycle(robot.allow_reverse)
    if robot.model == "ddr_kinematic":
        need("wheel_radius_m", "half_axle_m")
        return models.ddr_kinematic(DdrParams(robot.wheel_radius_m, robot.half_axle_m))
    if robot.model == "tomr_kinematic":
        need("wheel_radius_m", "center_distance_m")
        return models.tomr_kinematic(TomrParams(robot.wheel_radius_m, robot.center_distance_m))
    need("wheel_radius_m", "half_axle_m", "A", "B")
    wheels = DdrParams(robot.wheel_radius_m, robot.half_axle_m)
    Tq = DdrDynParams.wheel_map(wheels.wheel_radius, wheels.half_axle)
    return models.ddr_dynamic(DdrDynParams(np.array(robot.A), np.array(robot.B), Tq))


def build_channel(spec: Scenario):
    ch = spec.channel
    if ch is None:
        return None
    if ch.radio_map is not None:
        return RadioMapChannel(RadioMap.read(ch.radio_map.path), ch.radio_map.layer)
    pl = None
    if ch.path_loss is not None:
        b = ch.path_loss.breakpoint
        pl = PathLossParams(
            ch.path_loss.K0, ch.path_loss.d0_m, ch.path_loss.alpha,
            None if b is None else Breakpoint(b.alpha1, b.alpha2, b.distance_m), ch.path_loss.continuous,
        )
    layout = None
    if ch.walls or ch.floors:
        layout = BuildingLayout(
            tuple(Wall(tuple(w.start_m), tuple(w.end_m), w.attenuation_db) for w in ch.walls),
            tuple(Floor(f.z_m, f.attenuation_db) for f in ch.floors),
        )
    shadowing = None
    if ch.shadowing is not None:
        s = ch.shadowing
        grid = Grid2D(tuple(s.grid.origin_m), s.grid.spacing_m, tuple(s.grid.shape))
        shadowing = sample_shadowing_field(grid, s.mu_db, s.sigma_db, s.beta_m, stream_seed(spec.seed, "shadowing"))
    fading = None
    if ch.fading is not None:
        f = ch.fading
        fading = FadingProcess(
            f.wavelength_m, _seed_int(spec.seed, "fading"), None, f.rician_k, f.coherence_time_s,
            "sos", f.n_scatterers,
        )
    return CompositeChannel(pl, layout, shadowing, fading, ch.near_field)


def build_budget(spec: Scenario):
    c = spec.comms
    if c is None:
        return None
    policy = comms.TransmissionPolicy(c.policy.kind, c.policy.power_w, c.policy.p_ref_w, c.policy.p_max_w)
    rate = comms.RateCurve(c.rate.kind, c.rate.bandwidth_hz, tuple(c.rate.thresholds_db), tuple(c.rate.rates_bps))
    return comms.LinkBudget(c.noise_power_w, policy, rate, c.rssi_step_db, c.rssi_floor_dbm, c.receiver_power_w)


def build_motion_energy(spec: Scenario, model):
    e = spec.energy
    if e.kind == "square_norm":
        return None
    if e.kind == "distance":
        k, pos = e.k_j_per_m, model.position_indices
        return lambda traj: distance_energy(traj, k, position_indices=pos)
    if model.name != "ddr_dynamic":
        raise ScenarioError("energy", ["electric_ddr energy needs the ddr_dynamic robot model"])
    params, Tq = MotorElectricParams(e.k1, e.k2), model.params.Tq
    return lambda traj: electric_energy_ddr(traj, params, Tq)


def build_constraint(c: ConstraintBlock) -> ConstraintSpec:
    if c.gamma0 is not None and c.gamma0_db is not None:
        raise ScenarioError("constraints", [f"{c.kind}: give gamma0 or gamma0_db, not both"])
    gamma0 = c.gamma0 if c.gamma0_db is None else 10.0 ** (c.gamma0_db / 10.0)
    tup = lambda v: None if v is None else tuple(v)  # noqa: E731
    return ConstraintSpec(
        kind=c.kind, mode=c.mode, mu1=c.mu1, mu2=c.mu2, k_s=c.k_s, slack_max=c.slack_max,
        tolerance=c.tolerance, scale=c.scale, name=c.name, indices=tup(c.indices), target=tup(c.target),
        lower=tup(c.lower_m), upper=tup(c.upper_m), bound=c.bound, order=c.order, n_bits=c.n_bits,
        gamma0=gamma0, epsilon=c.epsilon,
    )


def build_problem(spec: Scenario, channel=None, model=None) -> CaTPProblem:
    model = model or build_model(spec.robot)
    pb = spec.problem
    o = pb.objective
    return CaTPProblem(
        model=model,
        x0=np.array(spec.robot.initial_state, dtype=float),
        N=pb.intervals,
        T=pb.horizon_s,
        control_lower=np.asarray(pb.control_lower, dtype=float),
        control_upper=np.asarray(pb.control_upper, dtype=float),
        objective=ObjectiveSpec(o.kind, o.theta, o.comm_metric, o.E_ref, o.f_ref, o.eps_E),
        constraints=tuple(build_constraint(c) for c in pb.constraints),
        channel=channel,
        peer=tuple(spec.channel.peer_m) if spec.channel is not None else (0.0, 0.0),
        budget=build_budget(spec),
        motion_energy=build_motion_energy(spec, model),
        T_bounds=None if pb.horizon_bounds_s is None else tuple(pb.horizon_bounds_s),
        power_bounds=None if pb.power_bounds_w is None else tuple(pb.power_bounds_w),
        include_comm_energy=pb.include_comm_energy,
        mc_samples=pb.mc_samples,
        substeps=spec.robot.integrator.substeps,
        method=spec.robot.integrator.method,
        seed=spec.seed,
    )


def build_solver_config(spec: Scenario, record_history=False) -> SolverConfig:
    s = spec.problem.solver
    tup = lambda v: None if v is None else tuple(v)  # noqa: E731
    return SolverConfig(
        population=s.population, elite_fraction=s.elite_fraction, iterations=s.iterations,
        smoothing=s.smoothing, init_std_fraction=s.init_std_fraction, std_floor_fraction=s.std_floor_fraction,
        refine=s.refine, refine_max_evaluations=s.refine_max_evaluations, record_history=record_history,
        alphabet=tup(s.alphabet), T_grid=tup(s.T_grid_s), power_grid=tup(s.power_grid_w),
    )


def build_controls(spec: Scenario, model) -> np.ndarray:
    c, N, m = spec.problem.controls, spec.problem.intervals, model.control_dim
    if c.profile == "zero":
        return np.zeros((N, m))
    if c.profile == "constant":
        if c.value is None or len(c.value) != m:
            raise ScenarioError("controls", [f"constant profile needs value with {m} entries"])
        return np.tile(np.asarray(c.value, dtype=float), (N, 1))
    sched = np.asarray(c.schedule if c.schedule is not None else [], dtype=float)
    if sched.shape != (N, m):
        raise ScenarioError("controls", [f"schedule must have shape ({N}, {m}), got {sched.shape}"])
    return sched


def build_all(loaded: LoadedScenario):
    spec = loaded.spec
    model = build_model(spec.robot)
    if len(spec.robot.initial_state) != model.state_dim:
        raise ScenarioError(loaded.path, [
            f"robot.initial_state has {len(spec.robot.initial_state)} entries, {model.name} needs {model.state_dim}"
            f" ({', '.join(model.state_labels)})"
        ])
    if (spec.channel is None) != (spec.comms is None):
        raise ScenarioError(loaded.path, ["channel and comms blocks must be given together"])
    channel = build_channel(spec)
    problem = build_problem(spec, channel, model)
    controls = build_controls(spec, model)
    return model, channel, problem, controls
