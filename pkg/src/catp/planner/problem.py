"""Problem definition, decision-vector layout and batched evaluation.

A decision vector stacks, in this order:

1. the control schedule, ``N`` rows of ``m`` controls flattened row-major;
2. the horizon ``T`` when it is a decision variable;
3. the transmit power when it is a decision variable;
4. one slack variable per constraint in slack mode (with ``k_s > 0``).

Constraint residuals follow the ``g <= 0`` convention, in the constraint's
natural units. Penalty and slack terms act on ``g / scale`` so that a single
(mu1, mu2) schedule makes sense for constraints of very different magnitude.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .. import comms
from ..energy import square_norm_energy
from ..motion.integrate import IntegrationError, Trajectory, rollout
from ..motion.models import MotionModel
from ..seeding import stream_rng

PENALTY_EXP_CAP = 690.0
PENALTY_CEILING = 1e300

CONSTRAINT_KINDS = (
    "workspace",
    "closed_trajectory",
    "terminal_state",
    "control_bound",
    "smoothness",
    "min_expected_bits",
    "snr_chance",
    "custom",
)


class DegenerateObjectiveError(ValueError):
    pass


class MissingSlackError(KeyError):
    pass


def penalize(g, mu1, mu2):
    """Exponential penalty ``mu1 exp(mu2 g)``, capped to stay finite."""
    if not (mu1 > 0 and mu2 > 0):
        raise ValueError("penalty weights mu1, mu2 must be > 0")
    g = np.asarray(g, dtype=float)
    with np.errstate(over="ignore"):
        return np.minimum(mu1 * np.exp(np.minimum(mu2 * g, PENALTY_EXP_CAP)), PENALTY_CEILING)


def apply_slack(g, slack, k_s):
    """Relax ``g <= 0`` to ``g - s <= 0``; returns the new residual and the cost ``k_s s^2``."""
    if slack is None:
        raise MissingSlackError("slack-mode constraint has no slack entry in the decision vector")
    s = np.asarray(slack, dtype=float)
    if np.any(s < 0):
        raise ValueError("slack variables must be >= 0")
    return np.asarray(g) - s, k_s * s**2


@dataclass(frozen=True)
class ConstraintSpec:
    kind: str
    mode: str = "hard"
    mu1: float = 1e3
    mu2: float = 10.0
    k_s: float = 1.0
    slack_max: float = 10.0
    # residual values up to ``tolerance`` count as satisfied
    tolerance: float = 0.0
    # penalty / slack act on g / scale
    scale: float = 1.0
    name: str = ""
    indices: tuple | None = None
    target: tuple | None = None
    lower: tuple | None = None
    upper: tuple | None = None
    bound: float | None = None
    order: int = 1
    n_bits: float | None = None
    gamma0: float | None = None
    epsilon: float | None = None
    func: Callable | None = None

    def __post_init__(self):
        if self.kind not in CONSTRAINT_KINDS:
            raise ValueError(f"ConstraintSpec: unknown kind {self.kind!r}")
        if self.mode not in ("hard", "penalty", "slack"):
            raise ValueError(f"ConstraintSpec: unknown mode {self.mode!r}")
        if self.mode == "penalty" and not (self.mu1 > 0 and self.mu2 > 0):
            raise ValueError("ConstraintSpec: mu1 and mu2 must be > 0")
        if self.mode == "slack" and self.k_s < 0:
            raise ValueError("ConstraintSpec: k_s must be >= 0")
        if not self.scale > 0:
            raise ValueError("ConstraintSpec: scale must be > 0")
        if self.tolerance < 0:
            raise ValueError("ConstraintSpec: tolerance must be >= 0")
        needs = {
            "workspace": ("lower", "upper"),
            "terminal_state": ("target",),
            "control_bound": ("bound",),
            "smoothness": ("bound",),
            "min_expected_bits": ("n_bits",),
            "snr_chance": ("gamma0", "epsilon"),
            "custom": ("func",),
        }.get(self.kind, ())
        missing = [n for n in needs if getattr(self, n) is None]
        if missing:
            raise ValueError(f"ConstraintSpec: {self.kind} constraint needs {', '.join(missing)}")
        if self.kind == "snr_chance" and not (0 <= self.epsilon <= 1 and self.gamma0 > 0):
            raise ValueError("ConstraintSpec: need gamma0 > 0 and epsilon in [0, 1]")
        if self.kind == "smoothness" and self.order < 1:
            raise ValueError("ConstraintSpec: smoothness order must be >= 1")
        if not self.name:
            object.__setattr__(self, "name", self.kind)

    @property
    def has_slack_variable(self) -> bool:
        # k_s = 0 leaves the slack unpriced; it is treated as a hard constraint instead
        return self.mode == "slack" and self.k_s > 0

    @property
    def is_hard(self) -> bool:
        return self.mode == "hard" or (self.mode == "slack" and self.k_s == 0)


@dataclass(frozen=True)
class ObjectiveSpec:
    """``min_total_energy``, ``weighted``, ``ratio`` or ``constant``.

    ``weighted`` minimises ``theta E/E_ref + (1 - theta) f/f_ref`` where the
    communication term ``f`` is ``comm_energy`` or ``neg_bits``. ``ratio``
    maximises ``bits / E``, i.e. minimises its negative.
    """

    kind: str = "min_total_energy"
    theta: float = 0.5
    comm_metric: str = "neg_bits"
    E_ref: float | None = None
    f_ref: float | None = None
    eps_E: float = 1e-9

    def __post_init__(self):
        if self.kind not in ("min_total_energy", "weighted", "ratio", "constant"):
            raise ValueError(f"ObjectiveSpec: unknown kind {self.kind!r}")
        if not 0 <= self.theta <= 1:
            raise ValueError("ObjectiveSpec: theta must be in [0, 1]")
        if self.comm_metric not in ("comm_energy", "neg_bits"):
            raise ValueError(f"ObjectiveSpec: unknown comm_metric {self.comm_metric!r}")


@dataclass(frozen=True)
class CaTPProblem:
    model: MotionModel
    x0: np.ndarray
    N: int
    T: float
    control_lower: np.ndarray
    control_upper: np.ndarray
    objective: ObjectiveSpec = ObjectiveSpec()
    constraints: tuple = ()
    channel: object = None
    peer: object = (0.0, 0.0)
    budget: comms.LinkBudget | None = None
    motion_energy: Callable | None = None
    T_bounds: tuple | None = None
    power_bounds: tuple | None = None
    include_comm_energy: bool = True
    mc_samples: int = 256
    substeps: int = 1
    method: str = "rk4"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float))
        m = self.model.control_dim
        lo = np.broadcast_to(np.asarray(self.control_lower, dtype=float), (m,)).copy()
        hi = np.broadcast_to(np.asarray(self.control_upper, dtype=float), (m,)).copy()
        object.__setattr__(self, "control_lower", lo)
        object.__setattr__(self, "control_upper", hi)
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if self.N < 2:
            raise ValueError("CaTPProblem: need N >= 2 intervals")
        if self.x0.shape != (self.model.state_dim,):
            raise ValueError(f"CaTPProblem: x0 must have {self.model.state_dim} entries")
        if np.any(lo > hi):
            raise ValueError("CaTPProblem: control_lower must not exceed control_upper")
        if not self.T > 0:
            raise ValueError("CaTPProblem: T must be > 0")
        if self.T_bounds is not None and not 0 < self.T_bounds[0] <= self.T_bounds[1]:
            raise ValueError("CaTPProblem: T_bounds must satisfy 0 < lo <= hi")
        if self.power_bounds is not None:
            if self.budget is None or self.budget.policy.kind != "constant":
                raise ValueError("CaTPProblem: a transmit-power decision needs a constant-power link budget")
            if not 0 < self.power_bounds[0] <= self.power_bounds[1]:
                raise ValueError("CaTPProblem: power_bounds must satisfy 0 < lo <= hi")
        needs_link = self.objective.kind in ("ratio",) or (
            self.objective.kind == "weighted" and self.objective.theta < 1
        )
        needs_link = needs_link or any(c.kind in ("min_expected_bits", "snr_chance") for c in self.constraints)
        if needs_link and (self.channel is None or self.budget is None):
            raise ValueError("CaTPProblem: communication terms need both a channel and a link budget")
        if self.objective.kind == "constant" and not self.constraints:
            raise ValueError("CaTPProblem: a constant objective needs at least one constraint")

    @property
    def control_dim(self) -> int:
        return self.model.control_dim

    @property
    def slack_constraints(self):
        return [i for i, c in enumerate(self.constraints) if c.has_slack_variable]

    @property
    def layout(self) -> dict:
        n_u = self.N * self.control_dim
        pos = n_u
        out = {"controls": slice(0, n_u)}
        if self.T_bounds is not None:
            out["T"] = pos
            pos += 1
        if self.power_bounds is not None:
            out["power"] = pos
            pos += 1
        out["slacks"] = slice(pos, pos + len(self.slack_constraints))
        out["size"] = pos + len(self.slack_constraints)
        return out

    @property
    def dimension(self) -> int:
        return self.layout["size"]

    def bounds(self):
        lay = self.layout
        lo = [np.tile(self.control_lower, self.N)]
        hi = [np.tile(self.control_upper, self.N)]
        if "T" in lay:
            lo.append([self.T_bounds[0]])
            hi.append([self.T_bounds[1]])
        if "power" in lay:
            lo.append([self.power_bounds[0]])
            hi.append([self.power_bounds[1]])
        for i in self.slack_constraints:
            lo.append([0.0])
            hi.append([self.constraints[i].slack_max])
        return np.concatenate(lo).astype(float), np.concatenate(hi).astype(float)

    def initial_decision(self):
        lo, hi = self.bounds()
        mid = 0.5 * (lo + hi)
        mid[self.layout["slacks"]] = 0.0
        return mid

    def with_constraints(self, constraints) -> "CaTPProblem":
        return replace(self, constraints=tuple(constraints))


@dataclass
class BatchEvaluation:
    cost: np.ndarray
    violation: np.ndarray
    objective: np.ndarray
    motion_energy: np.ndarray
    comm_energy: np.ndarray
    bits: np.ndarray
    bits_stderr: np.ndarray
    penalty: np.ndarray
    slack_cost: np.ndarray
    residuals: np.ndarray  # (B, n_constraints), natural units
    effective: np.ndarray  # (B, n_constraints), after slack, scaled
    degenerate: np.ndarray
    errors: list = field(default_factory=list)


@dataclass
class _Decoded:
    controls: np.ndarray
    T: np.ndarray
    power: np.ndarray | None
    slacks: np.ndarray


class Evaluator:
    """Turns decision vectors into costs, breakdowns and constraint residuals."""

    def __init__(self, problem: CaTPProblem):
        self.problem = problem
        self._E_ref = problem.objective.E_ref
        self._f_ref = problem.objective.f_ref
        if problem.objective.kind == "weighted" and (self._E_ref is None or self._f_ref is None):
            ref = self._raw(problem.initial_decision()[None, :])
            if self._E_ref is None:
                self._E_ref = _nonzero(float(ref["motion"][0]))
            if self._f_ref is None:
                self._f_ref = _nonzero(abs(float(self._comm_metric(ref)[0])))

    @property
    def references(self):
        return self._E_ref, self._f_ref

    def decode(self, decisions) -> _Decoded:
        p = self.problem
        d = np.atleast_2d(np.asarray(decisions, dtype=float))
        if d.shape[-1] != p.dimension:
            raise ValueError(f"decision vector has {d.shape[-1]} entries, layout needs {p.dimension}")
        lay = p.layout
        controls = d[:, lay["controls"]].reshape(len(d), p.N, p.control_dim)
        T = d[:, lay["T"]] if "T" in lay else np.full(len(d), float(p.T))
        power = d[:, lay["power"]] if "power" in lay else None
        return _Decoded(controls, T, power, d[:, lay["slacks"]])

    def simulate(self, controls, T: float) -> Trajectory:
        p = self.problem
        dt = T / p.N
        states, sat = rollout(p.model, p.x0, controls, dt, method=p.method, substeps=p.substeps)
        if p.model.input_limits is not None:
            controls = np.clip(controls, *p.model.input_limits)
        return Trajectory(0.0, dt, states, controls, sat, p.model.name)

    def trajectory(self, decision) -> Trajectory:
        dec = self.decode(decision)
        traj = self.simulate(dec.controls, float(dec.T[0]))
        return Trajectory(traj.t0, traj.dt, traj.states[0], traj.controls[0], traj.saturated[0], traj.model_name)

    def _budget(self, power):
        b = self.problem.budget
        return b if power is None else b.with_power(float(power))

    def _mc_rng(self):
        return stream_rng(self.problem.seed, "mc")

    def _motion_energy(self, traj):
        fn = self.problem.motion_energy
        if fn is None:
            return square_norm_energy(traj.controls, traj.dt)
        return np.asarray(fn(traj), dtype=float)

    def _raw_group(self, controls, T, power, slacks):
        """Evaluate candidates sharing one horizon and one transmit power."""
        p = self.problem
        traj = self.simulate(controls, T)
        B = len(controls)
        out = {"traj": traj, "motion": np.broadcast_to(self._motion_energy(traj), (B,)).astype(float)}
        budget = self._budget(power) if p.budget is not None else None
        need_bits = p.objective.kind == "ratio" or (
            p.objective.kind == "weighted" and p.objective.comm_metric == "neg_bits"
        ) or any(c.kind == "min_expected_bits" for c in p.constraints)
        pos = p.model.position_indices
        if budget is not None and p.channel is not None:
            e, _ = comms.expected_comm_energy(traj, p.channel, budget, p.peer, p.mc_samples, self._mc_rng(), pos)
            out["comm"] = np.broadcast_to(e, (B,)).astype(float)
        elif budget is not None and budget.policy.kind == "constant":
            out["comm"] = np.full(B, (budget.policy.power + budget.receiver_power) * traj.duration)
        else:
            out["comm"] = np.zeros(B)
        if need_bits:
            bits, se = comms.expected_bits(traj, p.channel, budget, p.peer, p.mc_samples, self._mc_rng(), pos)
            out["bits"], out["bits_se"] = np.broadcast_to(bits, (B,)).astype(float), np.broadcast_to(se, (B,)).astype(float)
        else:
            out["bits"], out["bits_se"] = np.zeros(B), np.zeros(B)
        out["residuals"] = self._residuals(traj, budget, out["bits"])
        return out

    def _raw(self, decisions):
        dec = self.decode(decisions)
        B = len(dec.T)
        # a power decision is strictly positive, so -1 marks "fixed by the budget"
        powers = dec.power if dec.power is not None else np.full(B, -1.0)
        keys = np.stack([dec.T, powers], axis=-1)
        uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        parts = {}
        for gi, (T, pw) in enumerate(uniq):
            sel = np.nonzero(inverse == gi)[0]
            res = self._raw_group(dec.controls[sel], float(T), None if pw < 0 else pw, dec.slacks[sel])
            for key in ("motion", "comm", "bits", "bits_se", "residuals"):
                arr = res[key]
                if key not in parts:
                    parts[key] = np.zeros((B,) + arr.shape[1:])
                parts[key][sel] = arr
        parts["slacks"] = dec.slacks
        return parts

    def _residuals(self, traj: Trajectory, budget, bits):
        p = self.problem
        B = traj.states.shape[0]
        out = np.zeros((B, len(p.constraints)))
        pos_idx = list(p.model.position_indices)
        for j, c in enumerate(p.constraints):
            idx = list(c.indices) if c.indices is not None else None
            if c.kind == "workspace":
                idx = idx or pos_idx
                x = traj.states[..., idx]
                lo, hi = np.asarray(c.lower, float), np.asarray(c.upper, float)
                out[:, j] = np.max(np.maximum(lo - x, x - hi).max(axis=-1), axis=-1)
            elif c.kind == "closed_trajectory":
                idx = idx or pos_idx
                out[:, j] = np.linalg.norm(traj.states[:, -1, idx] - traj.states[:, 0, idx], axis=-1)
            elif c.kind == "terminal_state":
                idx = idx or pos_idx
                out[:, j] = np.linalg.norm(traj.states[:, -1, idx] - np.asarray(c.target, float), axis=-1)
            elif c.kind == "control_bound":
                out[:, j] = np.max(np.abs(traj.controls), axis=(-1, -2)) - c.bound
            elif c.kind == "smoothness":
                idx = idx or pos_idx
                x = traj.states[..., idx]
                deriv = np.diff(x, n=c.order, axis=-2) / traj.dt**c.order
                out[:, j] = np.max(np.abs(deriv), axis=(-1, -2)) - c.bound
            elif c.kind == "min_expected_bits":
                out[:, j] = c.n_bits - bits
            elif c.kind == "snr_chance":
                pp, qq = comms.link_positions(traj, p.peer, p.model.position_indices)
                prob = comms.snr_success_probability(p.channel, budget, pp, qq, c.gamma0)
                out[:, j] = np.max((1.0 - c.epsilon) - prob, axis=-1)
            elif c.kind == "custom":
                out[:, j] = np.broadcast_to(np.asarray(c.func(traj, p), dtype=float), (B,))
        return out

    def _comm_metric(self, raw):
        if self.problem.objective.comm_metric == "comm_energy":
            return raw["comm"]
        return -raw["bits"]

    def evaluate(self, decisions) -> BatchEvaluation:
        """Batched evaluation; candidates whose simulation fails get infinite cost."""
        d = np.atleast_2d(np.asarray(decisions, dtype=float))
        try:
            raw = self._raw(d)
            errors = []
        except _CANDIDATE_ERRORS:
            raw, errors = self._raw_one_by_one(d)
        return self._assemble(raw, errors)

    def evaluate_strict(self, decisions) -> BatchEvaluation:
        """Like :meth:`evaluate` but lets simulation errors propagate."""
        return self._assemble(self._raw(np.atleast_2d(np.asarray(decisions, dtype=float))), [])

    def _raw_one_by_one(self, d):
        rows, errors = [], []
        for i, row in enumerate(d):
            try:
                rows.append(self._raw(row[None, :]))
            except _CANDIDATE_ERRORS as exc:
                errors.append((i, repr(exc)))
                rows.append(None)
        template = next((r for r in rows if r is not None), None)
        n_c = len(self.problem.constraints)
        raw = {
            "motion": np.full(len(d), np.inf),
            "comm": np.full(len(d), np.inf),
            "bits": np.zeros(len(d)),
            "bits_se": np.zeros(len(d)),
            "residuals": np.full((len(d), n_c), np.inf),
            "slacks": self.decode(d).slacks,
        }
        if template is not None:
            for i, r in enumerate(rows):
                if r is not None:
                    for key in ("motion", "comm", "bits", "bits_se", "residuals"):
                        raw[key][i] = r[key][0]
        raw["failed"] = np.array([r is None for r in rows])
        return raw, errors

    def _assemble(self, raw, errors) -> BatchEvaluation:
        p = self.problem
        obj = p.objective
        motion, comm_e, bits = raw["motion"], raw["comm"], raw["bits"]
        B = len(motion)
        degenerate = np.zeros(B, dtype=bool)
        with np.errstate(invalid="ignore", divide="ignore"):
            if obj.kind == "min_total_energy":
                objective = motion + comm_e if p.include_comm_energy else motion.copy()
            elif obj.kind == "weighted":
                E_ref, f_ref = self.references
                objective = obj.theta * motion / E_ref + (1 - obj.theta) * self._comm_metric(raw) / f_ref
            elif obj.kind == "ratio":
                degenerate = motion < obj.eps_E
                objective = np.where(degenerate, np.inf, -bits / np.where(degenerate, 1.0, motion))
            else:
                objective = np.zeros(B)

        residuals = raw["residuals"]
        effective = np.zeros_like(residuals)
        penalty = np.zeros(B)
        slack_cost = np.zeros(B)
        violation = np.zeros(B)
        slack_pos = {ci: k for k, ci in enumerate(p.slack_constraints)}
        for j, c in enumerate(p.constraints):
            g = residuals[:, j]
            scaled = (g - c.tolerance) / c.scale
            if c.mode == "penalty":
                penalty = penalty + penalize(scaled, c.mu1, c.mu2)
                effective[:, j] = scaled
            elif c.has_slack_variable:
                eff, cost = apply_slack(scaled, raw["slacks"][:, slack_pos[j]], c.k_s)
                effective[:, j] = eff
                slack_cost = slack_cost + cost
                violation = violation + np.maximum(eff, 0.0)
            else:
                effective[:, j] = scaled
                violation = violation + np.maximum(scaled, 0.0)
        violation = np.where(np.isnan(violation), np.inf, violation)
        cost = objective + penalty + slack_cost
        failed = raw.get("failed")
        if failed is not None:
            cost = np.where(failed, np.inf, cost)
            violation = np.where(failed, np.inf, violation)
        cost = np.where(np.isnan(cost), np.inf, cost)
        return BatchEvaluation(
            cost=cost,
            violation=violation,
            objective=objective,
            motion_energy=motion,
            comm_energy=comm_e,
            bits=bits,
            bits_stderr=raw["bits_se"],
            penalty=penalty,
            slack_cost=slack_cost,
            residuals=residuals,
            effective=effective,
            degenerate=degenerate,
            errors=errors,
        )


def _nonzero(v):
    return v if v != 0 and math.isfinite(v) else 1.0


def _candidate_errors():
    from ..channel.fields import OutsideFieldError
    from ..channel.pathloss import RangeError
    from ..motion._util import SingularityError

    return (IntegrationError, OutsideFieldError, RangeError, SingularityError, FloatingPointError)


_CANDIDATE_ERRORS = _candidate_errors()


def evaluate_objective(decision, problem: CaTPProblem, evaluator: Evaluator | None = None):
    """Cost and breakdown of a single decision vector; simulation errors propagate."""
    ev = (evaluator or Evaluator(problem)).evaluate_strict(np.asarray(decision, dtype=float)[None, :])
    if problem.objective.kind == "ratio" and ev.degenerate[0]:
        raise DegenerateObjectiveError(
            f"ratio objective is undefined: motion energy {ev.motion_energy[0]:.3g} J is below eps_E"
        )
    return float(ev.cost[0]), breakdown(ev, 0)


def evaluate_constraints(decision, problem: CaTPProblem, evaluator: Evaluator | None = None):
    ev = (evaluator or Evaluator(problem)).evaluate_strict(np.asarray(decision, dtype=float)[None, :])
    return {c.name: float(ev.residuals[0, j]) for j, c in enumerate(problem.constraints)}


def breakdown(ev: BatchEvaluation, i: int) -> dict:
    return {
        "cost": float(ev.cost[i]),
        "objective": float(ev.objective[i]),
        "motion_energy": float(ev.motion_energy[i]),
        "comm_energy": float(ev.comm_energy[i]),
        "expected_bits": float(ev.bits[i]),
        "expected_bits_stderr": float(ev.bits_stderr[i]),
        "penalty": float(ev.penalty[i]),
        "slack_cost": float(ev.slack_cost[i]),
    }
