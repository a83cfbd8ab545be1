"""CGDA execution strategies over the SST back-end and the simulated worlds.

FTE, IE and IET plan entirely in mental simulation and then move the live
arm through the whole trajectory. OET alternates perception, localization,
one short evolution burst and a single motor execution.
"""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, SchemaError
from .evolution import (
    EvolutionConfig,
    Population,
    evaluate_population,
    evolve,
    initialize_population,
    scale_budget,
)
from .model import FeatureTrajectory, ObservedTrajectory
from .recognition import discrepancy, feature_weights, goal_discrepancy
from .simenv import World, motor_execution, sensor_perception, simulate

log = logging.getLogger(__name__)

STRATEGIES = ("fte", "ie", "iet", "oet")
REPORT_SCHEMA = "cgda.report/1"
GOAL = "goal"


@dataclass(frozen=True)
class StrategyConfig:
    name: str = "oet"
    otc: int = 50
    goal_epsilon: float = 0.02
    norm_order: float = 2
    normalize: bool = True
    warm_start: bool = True
    seed: int = 0
    evolution: EvolutionConfig = field(default_factory=EvolutionConfig)

    def __post_init__(self):
        object.__setattr__(self, "name", self.name.lower())
        if self.name not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}, got {self.name!r}")
        if self.otc < 1:
            raise ConfigError("otc must be >= 1")
        if self.goal_epsilon <= 0:
            raise ConfigError("goal_epsilon must be positive")

    def to_dict(self) -> dict:
        """Strategy block only; the evolution block is serialized separately."""
        return {
            "name": self.name,
            "otc": self.otc,
            "goal_epsilon": self.goal_epsilon,
            "norm_order": self.norm_order,
            "normalize": self.normalize,
            "warm_start": self.warm_start,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict, evolution: EvolutionConfig | None = None) -> "StrategyConfig":
        data = dict(data or {})
        if "strategy" in data and "name" not in data:
            data["name"] = data.pop("strategy")
        unknown = set(data) - {"name", "otc", "goal_epsilon", "norm_order", "normalize", "warm_start", "seed"}
        if unknown:
            raise ConfigError(f"unknown strategy keys: {sorted(unknown)}")
        return cls(**data, evolution=evolution or EvolutionConfig())


@dataclass
class ExecutionReport:
    strategy: str
    seed: int
    n_goals: int
    genome_len: int
    total_evaluations: int
    final_discrepancy: float  # best fitness of the last evolution run
    trajectory_discrepancy: float  # DTW of the executed feature trace against the action
    goal_reached: bool
    termination_reason: str
    motor_trajectory: list
    feature_trace: list  # [{"t": sim seconds, "values": [...]}, ...] after each motor event
    goal_trace: list
    final_features: list
    peak_force: Optional[float] = None
    replay_steps: int = 0
    initializations: int = 1
    motor_executions: int = 0
    config: dict = field(default_factory=dict)
    action: dict = field(default_factory=dict)  # the generalized action the run imitated
    # wall-clock measurements; excluded from the determinism guarantee
    rit_series: list = field(default_factory=list)
    planning_latency: float = 0.0
    wall_time: float = 0.0

    @property
    def mean_rit(self) -> float:
        """Mean wait between motor executions, the first measured from run start."""
        intervals = [self.planning_latency, *self.rit_series]
        return float(np.mean(intervals))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k in ("rit_series", "planning_latency", "wall_time"):
            d.pop(k)
        d["schema"] = REPORT_SCHEMA
        return d

    @classmethod
    def from_dict(cls, data: dict, timing: dict | None = None) -> "ExecutionReport":
        data = dict(data)
        schema = data.pop("schema", None)
        if schema != REPORT_SCHEMA:
            raise SchemaError(f"report schema {schema!r}, expected {REPORT_SCHEMA!r}")
        names = {f.name for f in dataclasses.fields(cls)}
        missing = names - set(data) - {"rit_series", "planning_latency", "wall_time", "action",
                                      "peak_force", "replay_steps", "initializations",
                                      "motor_executions", "config"}
        if missing:
            raise SchemaError(f"report missing fields {sorted(missing)}")
        unknown = set(data) - names
        if unknown:
            raise SchemaError(f"report has unknown fields {sorted(unknown)}")
        timing = dict(timing or {})
        for k in ("rit_series", "planning_latency", "wall_time"):
            if k in timing:
                data[k] = timing[k]
        return cls(**data)

    def timing_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "rit_series": list(self.rit_series),
            "planning_latency": self.planning_latency,
            "mean_rit": self.mean_rit,
            "wall_time": self.wall_time,
        }


def localize(p, action: FeatureTrajectory, j_prev: int, norm_order=2, weights=None) -> int:
    """Index in ``[j_prev, n-1]`` of the goal nearest to ``p``; ties go to the lowest index."""
    n = action.n
    if not 0 <= j_prev <= n - 1:
        raise ConfigError(f"j_prev={j_prev} outside [0, {n - 1}]")
    w = np.ones(action.m) if weights is None else np.asarray(weights, dtype=float)
    diff = w[:, None] * (np.asarray(p, dtype=float)[:, None] - action.values[:, j_prev:])
    dist = np.linalg.norm(diff, ord=norm_order, axis=0)
    return j_prev + int(np.argmin(dist))


def measure_rit(event_log) -> list[float]:
    """Differences between the wall-clock starts of consecutive motor executions."""
    starts: dict[int, float] = {}
    for ev in event_log:
        starts.setdefault(ev.execution, ev.wall)
    times = [starts[k] for k in sorted(starts)]
    return [b - a for a, b in zip(times, times[1:])]


class _Run:
    """Bookkeeping shared by the strategy runners."""

    def __init__(self, action: FeatureTrajectory, world: World, cfg: StrategyConfig):
        sensor_perception(world, action.feature_names)
        self.action = action
        self.world = world
        self.cfg = cfg
        self.w = feature_weights(action, cfg.normalize)
        self.rng = np.random.default_rng(cfg.seed)
        self.t0 = time.perf_counter()
        self.start_event = len(world.event_log)
        self.feature_trace: list = []
        self.goal_trace: list = []
        self.replay_steps = 0
        self.initializations = 0
        self.pop: Optional[Population] = None
        self.last_fitness: Optional[float] = None
        self.peak_start = getattr(world.env, "peak_force", None)
        if self.peak_start is not None:
            world.env.peak_force = 0.0

    def population(self, genome_len: int, fitness, fresh: bool = False) -> Population:
        """Initialize once, then re-evaluate the persistent population for a new target.

        ``fresh`` draws a new population instead (cold start); the evaluation
        count carries over.
        """
        if self.pop is not None and fresh:
            evals, trace = self.pop.eval_count, self.pop.trace
            self.pop = initialize_population(self.cfg.evolution, genome_len, self.rng)
            self.pop.eval_count, self.pop.trace = evals, trace
            evaluate_population(self.pop, fitness)
            self.initializations += 1
        elif self.pop is None:
            self.pop = initialize_population(self.cfg.evolution, genome_len, self.rng, fitness)
            self.initializations += 1
        else:
            evaluate_population(self.pop, fitness)
        return self.pop

    def execute(self, joints, execution: int) -> None:
        motor_execution(self.world, joints, execution=execution)
        self.feature_trace.append({"t": self.world.clock, "values": self.world.features().tolist()})

    def observed(self) -> ObservedTrajectory:
        if not self.feature_trace:
            cols = self.world.features()[:, None]
        else:
            cols = np.array([f["values"] for f in self.feature_trace]).T
        return ObservedTrajectory(self.action.t_min, cols)

    def report(self, genome_len: int, reason: str) -> ExecutionReport:
        final = self.world.features()
        last_goal = goal_discrepancy(final, self.action.goal(self.action.n - 1), self.w)
        f = self.last_fitness if self.last_fitness is not None else last_goal
        reached = last_goal <= self.cfg.goal_epsilon
        events = self.world.event_log[self.start_event:]
        rit = measure_rit(events)
        latency = events[0].wall - self.t0 if events else time.perf_counter() - self.t0
        executions = len({e.execution for e in events})
        peak = getattr(self.world.env, "peak_force", None)
        return ExecutionReport(
            strategy=self.cfg.name,
            seed=self.cfg.seed,
            n_goals=self.action.n,
            genome_len=genome_len,
            total_evaluations=self.pop.eval_count if self.pop else 0,
            final_discrepancy=float(f),
            trajectory_discrepancy=discrepancy(self.observed(), self.action, self.w),
            goal_reached=bool(reached),
            termination_reason=GOAL if reached else reason,
            motor_trajectory=[e.joints for e in events],
            feature_trace=self.feature_trace,
            goal_trace=self.goal_trace,
            final_features=final.tolist(),
            peak_force=peak,
            replay_steps=self.replay_steps,
            initializations=self.initializations,
            motor_executions=executions,
            config={
                "strategy": self.cfg.to_dict(),
                "evolution": self.cfg.evolution.to_dict(),
                "weights": self.w.tolist(),
            },
            action=self.action.to_dict(),
            rit_series=rit,
            planning_latency=latency,
            wall_time=time.perf_counter() - self.t0,
        )


def _features_after(world: World, waypoints) -> np.ndarray:
    return simulate(world.snapshot(), waypoints)[:, -1]


def run_fte(action: FeatureTrajectory, world: World, cfg: StrategyConfig) -> ExecutionReport:
    run = _Run(action, world, cfg)
    n, dof = action.n, world.arm.dof

    def fitness(genes):
        traj = ObservedTrajectory(action.t_min, simulate(world.snapshot(), genes.reshape(n, dof)))
        return discrepancy(traj, action, run.w)

    pop = run.population(dof * n, fitness)
    reason, _ = evolve(pop, fitness)
    run.last_fitness = pop.best_fitness
    log.info("fte: %s after %d evaluations, f=%.4g", reason, pop.eval_count, pop.best_fitness)
    for q in pop.best().genes.reshape(n, dof):
        run.execute(q, execution=0)
    run.goal_trace = list(range(n))
    return run.report(dof * n, reason)


def _run_per_goal(action, world, cfg, replay: bool) -> ExecutionReport:
    run = _Run(action, world, cfg)
    n, dof = action.n, world.arm.dof
    budget = scale_budget(cfg.evolution, n)
    plan: list[np.ndarray] = []
    reason = None
    for j in range(n):
        goal = action.goal(j)
        prefix = list(plan) if replay else []

        def fitness(genes, prefix=prefix, goal=goal):
            snap = world.snapshot()
            if prefix:
                simulate(snap, prefix)
                run.replay_steps += len(prefix)
            simulate(snap, [genes])
            return goal_discrepancy(snap.features(), goal, run.w)

        pop = run.population(dof, fitness)
        reason, _ = evolve(pop, fitness, budget)
        run.last_fitness = pop.best_fitness
        plan.append(pop.best().genes.copy())
    for q in plan:
        run.execute(q, execution=0)
    run.goal_trace = list(range(n))
    return run.report(dof, reason)


def run_ie(action: FeatureTrajectory, world: World, cfg: StrategyConfig) -> ExecutionReport:
    """Each goal's joint position is evolved from the initial state alone."""
    return _run_per_goal(action, world, cfg, replay=False)


def run_iet(action: FeatureTrajectory, world: World, cfg: StrategyConfig) -> ExecutionReport:
    """Each goal's joint position is evolved after replaying the positions already chosen."""
    return _run_per_goal(action, world, cfg, replay=True)


def run_oet(action: FeatureTrajectory, world: World, cfg: StrategyConfig, perturbations=None) -> ExecutionReport:
    """Online loop: perceive, localize, evolve the next goal briefly, move once.

    ``perturbations`` is an object with ``apply_due(world, elapsed, motor_count)``
    (see :class:`cgda.scenario.PerturbationSchedule`).
    """
    run = _Run(action, world, cfg)
    n, dof = action.n, world.arm.dof
    budget = scale_budget(cfg.evolution, cfg.otc)
    last = action.goal(n - 1)
    j_prev = 0
    motor = 0
    reason = "budget"
    for it in range(cfg.otc + 1):
        if perturbations is not None:
            perturbations.apply_due(world, time.perf_counter() - run.t0, motor)
        p = sensor_perception(world, action.feature_names).values
        j = localize(p, action, j_prev, cfg.norm_order, run.w)
        run.goal_trace.append(j)
        j_prev = j
        if j == n - 1 and goal_discrepancy(p, last, run.w) <= cfg.goal_epsilon:
            reason = GOAL
            break
        if it == cfg.otc:
            break
        goal = action.goal(min(j + 1, n - 1))

        def fitness(genes, goal=goal):
            return goal_discrepancy(_features_after(world, [genes]), goal, run.w)

        pop = run.population(dof, fitness, fresh=not cfg.warm_start)
        evolve(pop, fitness, budget)
        run.last_fitness = pop.best_fitness
        run.execute(pop.best().genes, execution=motor)
        motor += 1
    log.info("oet: %s after %d motor executions, %d evaluations", reason, motor, run.pop.eval_count if run.pop else 0)
    return run.report(dof, reason)


RUNNERS = {"fte": run_fte, "ie": run_ie, "iet": run_iet, "oet": run_oet}


def run_strategy(action, world, cfg: StrategyConfig, perturbations=None) -> ExecutionReport:
    if cfg.name == "oet":
        return run_oet(action, world, cfg, perturbations)
    return RUNNERS[cfg.name](action, world, cfg)
