"""Cross-entropy search over decision vectors, plus an exhaustive oracle.

Candidates are ranked feasibility first: by total hard-constraint violation,
then by cost, then by the decision vector itself (lexicographically) so that
ties resolve the same way on every run.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from ..motion.integrate import Trajectory
from ..seeding import stream_rng
from .problem import BatchEvaluation, CaTPProblem, Evaluator, breakdown

BRUTE_FORCE_LIMIT = 10_000_000


class SearchSpaceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    population: int = 64
    elite_fraction: float = 0.1
    iterations: int = 50
    # weight of the new elite statistics in the smoothed update
    smoothing: float = 0.7
    init_std_fraction: float = 0.5
    # standard deviations never shrink below this fraction of each bound range
    std_floor_fraction: float = 1e-6
    refine: bool = False
    refine_max_evaluations: int = 2000
    record_history: bool = False
    # categorical mode: sample controls from a finite alphabet instead
    alphabet: tuple | None = None
    T_grid: tuple | None = None
    power_grid: tuple | None = None
    probability_floor: float = 1e-3
    # restart from uniform once every entry's top symbol reaches this probability (None disables)
    restart_threshold: float | None = 0.99
    polish: bool = True

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("SolverConfig: population must be >= 2")
        if not 0 < self.elite_fraction <= 1:
            raise ValueError("SolverConfig: elite_fraction must be in (0, 1]")
        if self.iterations < 1:
            raise ValueError("SolverConfig: iterations must be >= 1")
        if not 0 < self.smoothing <= 1:
            raise ValueError("SolverConfig: smoothing must be in (0, 1]")
        if self.init_std_fraction <= 0 or self.std_floor_fraction < 0:
            raise ValueError("SolverConfig: std fractions must be positive")

    @property
    def n_elite(self) -> int:
        return max(1, int(math.ceil(self.elite_fraction * self.population)))


@dataclass
class Solution:
    decision: np.ndarray
    trajectory: Trajectory
    cost: float
    breakdown: dict
    feasibility: list
    feasible: bool
    status: str
    diagnostics: dict = field(default_factory=dict)
    history: list | None = None

    @property
    def violation(self) -> float:
        return float(sum(row["violation"] for row in self.feasibility if row["hard"]))


def rank_order(violation, cost, decisions):
    """Indices sorted by (violation, cost, decision entries in order)."""
    d = np.asarray(decisions)
    keys = [d[:, j] for j in range(d.shape[1] - 1, -1, -1)] + [np.asarray(cost), np.asarray(violation)]
    return np.lexsort(keys)


def _better(a, b) -> bool:
    """Strict ranking comparison of (violation, cost, decision) tuples."""
    if a[0] != b[0]:
        return a[0] < b[0]
    if a[1] != b[1]:
        return a[1] < b[1]
    return tuple(a[2]) < tuple(b[2])


def feasibility_table(problem: CaTPProblem, ev: BatchEvaluation, i: int, decision) -> list:
    rows = []
    slack_pos = {ci: k for k, ci in enumerate(problem.slack_constraints)}
    slacks = np.asarray(decision)[problem.layout["slacks"]]
    for j, c in enumerate(problem.constraints):
        g = float(ev.residuals[i, j])
        slack = float(slacks[slack_pos[j]]) if j in slack_pos else 0.0
        # a slack relaxes the scaled residual, so convert it back to natural units
        allowed = c.tolerance + slack * c.scale
        satisfied = bool(g <= allowed)
        rows.append({
            "name": c.name,
            "kind": c.kind,
            "mode": c.mode,
            "hard": c.is_hard,
            "residual": g,
            "slack": slack,
            "satisfied": satisfied,
            "violation": 0.0 if satisfied else (math.inf if not math.isfinite(g) else g - allowed),
        })
    return rows


def make_solution(problem, evaluator, ev, i, decision, diagnostics, history=None) -> Solution:
    decision = np.asarray(decision, dtype=float).copy()
    table = feasibility_table(problem, ev, i, decision)
    finite = bool(np.isfinite(ev.cost[i]))
    feasible = finite and all(row["satisfied"] for row in table if row["hard"])
    try:
        traj = evaluator.trajectory(decision)
    except Exception:  # noqa: BLE001 - the failure is already reflected by an infinite cost
        traj = None
    return Solution(
        decision=decision,
        trajectory=traj,
        cost=float(ev.cost[i]),
        breakdown=breakdown(ev, i),
        feasibility=table,
        feasible=feasible,
        status="feasible" if feasible else "infeasible",
        diagnostics=diagnostics,
        history=history,
    )


class _Tracker:
    """Keeps the best candidate ever evaluated."""

    def __init__(self):
        self.key = None
        self.decision = None
        self.evaluations = 0
        self.restarts = 0

    def update(self, decisions, ev: BatchEvaluation):
        self.evaluations += len(decisions)
        order = rank_order(ev.violation, ev.cost, decisions)
        i = order[0]
        key = (float(ev.violation[i]), float(ev.cost[i]), decisions[i])
        if self.key is None or _better(key, self.key):
            self.key = key
            self.decision = np.array(decisions[i], dtype=float)
        return order


def solve(problem: CaTPProblem, config: SolverConfig | None = None, seed: int | None = None,
          initial=None) -> Solution:
    """Minimise the problem's cost with the cross-entropy method.

    ``seed`` defaults to the problem seed. Only the solver stream derives from
    it, so the Monte-Carlo channel draws stay fixed whatever the solver does.
    ``initial`` centres the continuous search on a warm-start decision.
    """
    config = config or SolverConfig()
    seed = problem.seed if seed is None else int(seed)
    start = time.perf_counter()
    evaluator = Evaluator(problem)
    rng = stream_rng(seed, "solver")
    if config.alphabet is not None:
        if initial is not None:
            raise ValueError("warm starts apply to continuous search only")
        tracker, history, iterations = _categorical_search(problem, evaluator, config, rng)
    else:
        init = None if initial is None else np.asarray(initial, dtype=float)
        tracker, history, iterations = _gaussian_search(problem, evaluator, config, rng, init)
    refined = 0
    if config.refine and config.alphabet is None:
        refined = _refine(problem, evaluator, tracker, config)
    best = tracker.decision
    ev = evaluator.evaluate(best[None, :])
    diagnostics = {
        "solver": "cem-categorical" if config.alphabet is not None else "cem",
        "iterations": iterations,
        "evaluations": tracker.evaluations,
        "refine_evaluations": refined,
        "restarts": tracker.restarts,
        "seed": seed,
        "population": config.population,
        "elite": config.n_elite,
        "wall_time_s": time.perf_counter() - start,
    }
    return make_solution(problem, evaluator, ev, 0, best, diagnostics, history if config.record_history else None)


def _gaussian_search(problem, evaluator, config, rng, initial):
    lo, hi = problem.bounds()
    span = hi - lo
    mean = problem.initial_decision() if initial is None else np.clip(initial, lo, hi)
    std = config.init_std_fraction * span
    floor = config.std_floor_fraction * span
    tracker = _Tracker()
    history = []
    if initial is not None:
        # the warm start itself competes with the samples
        tracker.update(mean[None, :], evaluator.evaluate(mean[None, :]))
    for it in range(config.iterations):
        samples = np.clip(mean + std * rng.standard_normal((config.population, len(mean))), lo, hi)
        ev = evaluator.evaluate(samples)
        order = tracker.update(samples, ev)
        elite = samples[order[: config.n_elite]]
        a = config.smoothing
        mean = a * elite.mean(axis=0) + (1 - a) * mean
        std = np.maximum(a * elite.std(axis=0) + (1 - a) * std, floor)
        if config.record_history:
            history.append(_history_row(it, tracker, ev, order, config, mean, std))
    return tracker, history, config.iterations


def _history_row(it, tracker, ev, order, config, mean, spread):
    elite = order[: config.n_elite]
    return {
        "iteration": it,
        "best_cost": tracker.key[1],
        "best_violation": tracker.key[0],
        "elite_cost_mean": float(np.mean(ev.cost[elite])),
        "elite_violation_mean": float(np.mean(ev.violation[elite])),
        "spread": float(np.mean(spread)),
        "mean": [float(v) for v in np.ravel(mean)],
    }


def _refine(problem, evaluator, tracker, config) -> int:
    """Bounded Nelder-Mead polish of the best candidate; returns the evaluation count."""
    lo, hi = problem.bounds()
    free = hi > lo
    if not np.any(free):
        return 0
    base = tracker.decision.copy()
    before = tracker.evaluations

    def merit(z):
        d = base.copy()
        d[free] = np.clip(z, lo[free], hi[free])
        ev = evaluator.evaluate(d[None, :])
        tracker.update(d[None, :], ev)
        v, c = float(ev.violation[0]), float(ev.cost[0])
        if not math.isfinite(c):
            return 1e300
        # violations dominate any finite cost difference
        return c + 1e9 * v

    span = (hi - lo)[free]
    x0 = base[free]
    simplex = [x0]
    for k in range(len(x0)):
        step = np.zeros_like(x0)
        direction = 1.0 if x0[k] + 0.05 * span[k] <= hi[free][k] else -1.0
        step[k] = direction * 0.05 * span[k]
        simplex.append(x0 + step)
    minimize(
        merit, x0, method="Nelder-Mead", bounds=list(zip(lo[free], hi[free])),
        options={"maxfev": config.refine_max_evaluations, "xatol": 1e-10, "fatol": 1e-12,
                 "initial_simplex": np.array(simplex), "adaptive": True},
    )
    return tracker.evaluations - before


def _categorical_axes(problem: CaTPProblem, config: SolverConfig):
    if problem.slack_constraints:
        raise ValueError("categorical search does not enumerate slack variables")
    lay = problem.layout
    per_control = _alphabet_per_control(config.alphabet, problem.control_dim)
    axes = [per_control[k % problem.control_dim] for k in range(problem.N * problem.control_dim)]
    if "T" in lay:
        if config.T_grid is None:
            raise ValueError("a free horizon needs T_grid in categorical mode")
        axes.append(np.asarray(config.T_grid, dtype=float))
    if "power" in lay:
        if config.power_grid is None:
            raise ValueError("a free transmit power needs power_grid in categorical mode")
        axes.append(np.asarray(config.power_grid, dtype=float))
    return axes


def _alphabet_per_control(alphabet, m):
    arr = [np.asarray(a, dtype=float) for a in alphabet] if np.ndim(alphabet[0]) else None
    if arr is None:
        arr = [np.asarray(alphabet, dtype=float)] * m
    if len(arr) != m:
        raise ValueError(f"alphabet lists {len(arr)} control symbol sets, model has {m} controls")
    return [np.unique(a) for a in arr]


def _categorical_search(problem, evaluator, config, rng):
    axes = _categorical_axes(problem, config)
    sizes = [len(a) for a in axes]
    probs = [np.full(s, 1.0 / s) for s in sizes]
    tracker = _Tracker()
    history = []
    for it in range(config.iterations):
        idx = np.stack([rng.choice(s, size=config.population, p=p) for s, p in zip(sizes, probs)], axis=1)
        samples = np.stack([axes[k][idx[:, k]] for k in range(len(axes))], axis=1)
        ev = evaluator.evaluate(samples)
        order = tracker.update(samples, ev)
        # duplicates of one candidate would otherwise fill the elite set and freeze the distribution
        _, first = np.unique(idx[order], axis=0, return_index=True)
        elite = idx[order[np.sort(first)[: config.n_elite]]]
        a = config.smoothing
        for k, s in enumerate(sizes):
            freq = np.bincount(elite[:, k], minlength=s) / len(elite)
            p = a * freq + (1 - a) * probs[k]
            p = np.maximum(p, config.probability_floor)
            probs[k] = p / p.sum()
        if config.restart_threshold and min(p.max() for p in probs) >= config.restart_threshold:
            # every entry has settled on one symbol; spend the remaining budget on a fresh start
            probs = [np.full(s, 1.0 / s) for s in sizes]
            tracker.restarts += 1
        if config.record_history:
            history.append(_history_row(it, tracker, ev, order, config, [p.argmax() for p in probs],
                                        [1 - p.max() for p in probs]))
    if config.polish:
        _coordinate_polish(evaluator, tracker, axes)
    return tracker, history, config.iterations


def _coordinate_polish(evaluator, tracker, axes):
    """Cycle through the entries, trying every symbol, until no single change helps."""
    improved = True
    while improved:
        improved = False
        for k, values in enumerate(axes):
            cand = np.repeat(tracker.decision[None, :], len(values), axis=0)
            cand[:, k] = values
            before = tracker.key
            tracker.update(cand, evaluator.evaluate(cand))
            if tracker.key is not before and _better(tracker.key, before):
                improved = True


def brute_force_solve(problem: CaTPProblem, control_alphabet, *, T_grid=None, power_grid=None,
                      max_candidates: int = BRUTE_FORCE_LIMIT, chunk_size: int = 4096) -> Solution:
    """Exact argmin over every quantised decision vector.

    The ranking is the solver's (violation, cost, decision), so both report
    the same optimum when they search the same space.
    """
    cfg = SolverConfig(alphabet=tuple(np.atleast_1d(control_alphabet).tolist()) if np.ndim(control_alphabet) == 1
                       else tuple(tuple(a) for a in control_alphabet),
                       T_grid=T_grid, power_grid=power_grid)
    axes = _categorical_axes(problem, cfg)
    total = math.prod(len(a) for a in axes)
    if total > max_candidates:
        raise SearchSpaceTooLarge(f"{total} candidates exceed the enumeration budget of {max_candidates}")
    start = time.perf_counter()
    evaluator = Evaluator(problem)
    tracker = _Tracker()
    product = itertools.product(*axes)
    while True:
        block = list(itertools.islice(product, chunk_size))
        if not block:
            break
        cand = np.asarray(block, dtype=float)
        tracker.update(cand, evaluator.evaluate(cand))
    ev = evaluator.evaluate(tracker.decision[None, :])
    diagnostics = {
        "solver": "brute-force",
        "iterations": 1,
        "evaluations": tracker.evaluations,
        "seed": problem.seed,
        "wall_time_s": time.perf_counter() - start,
    }
    return make_solution(problem, evaluator, ev, 0, tracker.decision, diagnostics)
