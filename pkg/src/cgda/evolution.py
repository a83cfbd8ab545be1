"""Steady State Tournament (SST) evolution over bounded real-valued genomes.

One *generation* is ``pop_size`` tournament replacements, each costing one
fitness evaluation, followed by one termination check. Fitness is minimized.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, FitnessError, InvalidArgument

FitnessFn = Callable[[np.ndarray], float]

CONVERGED = "converged"
BUDGET = "budget"
STALLED = "stalled"


@dataclass(frozen=True)
class EvolutionConfig:
    pop_size: int = 10
    tournament_size: int = 3
    mutation_prob: float = 0.6
    bounds: tuple[float, float] = (-15.0, 100.0)
    tc: int = 300
    tcf: int = 75
    fitness_epsilon: float = 1e-6
    # operator parameters; not given by the method, kept for auditability
    blend_alpha: float = 0.5
    mutation_sigma_frac: float = 0.1

    def __post_init__(self):
        lo, hi = self.bounds
        object.__setattr__(self, "bounds", (float(lo), float(hi)))
        if self.pop_size < 2:
            raise ConfigError("pop_size must be >= 2")
        if not 2 <= self.tournament_size <= self.pop_size:
            raise ConfigError("tournament_size must be in [2, pop_size]")
        if not 0.0 <= self.mutation_prob <= 1.0:
            raise ConfigError("mutation_prob must be in [0, 1]")
        if not lo < hi:
            raise ConfigError(f"bounds must satisfy lo < hi, got {self.bounds}")
        if self.tc < 1 or self.tcf < 1:
            raise ConfigError("tc and tcf must be >= 1")

    @property
    def mutation_sigma(self) -> float:
        lo, hi = self.bounds
        return self.mutation_sigma_frac * (hi - lo)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["bounds"] = list(self.bounds)
        return d

    @classmethod
    def from_dict(cls, data: dict | None) -> "EvolutionConfig":
        data = dict(data or {})
        data.pop("seed", None)
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown evolution keys: {sorted(unknown)}")
        if "bounds" in data:
            data["bounds"] = tuple(data["bounds"])
        return cls(**data)


def scale_budget(cfg: EvolutionConfig, divisor: int) -> EvolutionConfig:
    """Divide ``tc`` and ``tcf`` by an outer-loop count (floored, at least 1)."""
    if divisor < 1:
        raise InvalidArgument("divisor must be >= 1")
    return dataclasses.replace(
        cfg, tc=max(1, cfg.tc // divisor), tcf=max(1, cfg.tcf // divisor)
    )


@dataclass
class Individual:
    genes: np.ndarray
    fitness: Optional[float] = None


@dataclass
class Population:
    individuals: list[Individual]
    rng: np.random.Generator
    cfg: EvolutionConfig
    eval_count: int = 0
    trace: list[float] = field(default_factory=list)

    @property
    def genome_len(self) -> int:
        return len(self.individuals[0].genes)

    def best(self) -> Individual:
        # first minimum wins ties
        return min(self.individuals, key=lambda ind: ind.fitness)

    @property
    def best_fitness(self) -> float:
        return self.best().fitness


def _evaluate(pop: Population, fitness_fn: FitnessFn, genes: np.ndarray) -> float:
    try:
        f = float(fitness_fn(genes))
    except Exception as exc:
        raise FitnessError(
            f"fitness evaluation #{pop.eval_count + 1} failed for genes {np.round(genes, 4).tolist()}: {exc}"
        ) from exc
    pop.eval_count += 1
    pop.trace.append(f)
    return f


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def initialize_population(
    cfg: EvolutionConfig, genome_len: int, seed, fitness_fn: FitnessFn | None = None
) -> Population:
    if genome_len < 1:
        raise InvalidArgument("genome_len must be >= 1")
    rng = make_rng(seed)
    lo, hi = cfg.bounds
    inds = [Individual(rng.uniform(lo, hi, size=genome_len)) for _ in range(cfg.pop_size)]
    pop = Population(inds, rng, cfg)
    if fitness_fn is not None:
        evaluate_population(pop, fitness_fn)
    return pop


def evaluate_population(pop: Population, fitness_fn: FitnessFn) -> None:
    """(Re)evaluate every individual; costs ``pop_size`` evaluations."""
    for ind in pop.individuals:
        ind.fitness = _evaluate(pop, fitness_fn, ind.genes)


def blend(a: np.ndarray, b: np.ndarray, u, bounds) -> np.ndarray:
    return np.clip(a + u * (b - a), bounds[0], bounds[1])


def crossover(a: Individual, b: Individual, rng: np.random.Generator, cfg: EvolutionConfig) -> Individual:
    """BLX-alpha blend: each gene at ``a + u (b - a)``, ``u ~ U[-alpha, 1 + alpha]``."""
    if a.genes.shape != b.genes.shape:
        raise InvalidArgument("crossover parents differ in genome length")
    u = rng.uniform(-cfg.blend_alpha, 1.0 + cfg.blend_alpha, size=a.genes.shape)
    return Individual(blend(a.genes, b.genes, u, cfg.bounds))


def mutate(ind: Individual, cfg: EvolutionConfig, rng: np.random.Generator) -> Individual:
    """With probability ``mutation_prob`` add Gaussian noise to one random gene."""
    if rng.random() >= cfg.mutation_prob:
        return Individual(ind.genes.copy())
    genes = ind.genes.copy()
    k = rng.integers(len(genes))
    genes[k] = np.clip(genes[k] + rng.normal(0.0, cfg.mutation_sigma), *cfg.bounds)
    return Individual(genes)


def run_generation(pop: Population, fitness_fn: FitnessFn) -> Population:
    cfg = pop.cfg
    rng = pop.rng
    for _ in range(cfg.pop_size):
        picks = rng.choice(cfg.pop_size, size=cfg.tournament_size, replace=False)
        ranked = sorted(picks, key=lambda i: pop.individuals[i].fitness)
        best, second, worst = ranked[0], ranked[1], ranked[-1]
        child = mutate(crossover(pop.individuals[best], pop.individuals[second], rng, cfg), cfg, rng)
        child.fitness = _evaluate(pop, fitness_fn, child.genes)
        pop.individuals[worst] = child
    return pop


@dataclass
class TerminationState:
    generations_done: int = 0
    generations_without_improvement: int = 0
    best_fitness: float = math.inf

    def update(self, best: float) -> None:
        self.generations_done += 1
        if best < self.best_fitness:
            self.best_fitness = best
            self.generations_without_improvement = 0
        else:
            self.generations_without_improvement += 1


def check_termination(state: TerminationState, cfg: EvolutionConfig) -> Optional[str]:
    """Return a stop reason, or ``None`` to keep evolving."""
    if state.best_fitness <= cfg.fitness_epsilon:
        return CONVERGED
    if state.generations_done >= cfg.tc:
        return BUDGET
    if state.generations_without_improvement >= cfg.tcf:
        return STALLED
    return None


def evolve(pop: Population, fitness_fn: FitnessFn, cfg: EvolutionConfig | None = None) -> tuple[str, TerminationState]:
    """Run generations until a termination condition fires.

    ``cfg`` overrides the termination budget (e.g. a scaled copy); the
    operators always use the population's own config.
    """
    cfg = cfg or pop.cfg
    state = TerminationState(best_fitness=pop.best_fitness)
    reason = check_termination(state, cfg)
    while reason is None:
        run_generation(pop, fitness_fn)
        state.update(pop.best_fitness)
        reason = check_termination(state, cfg)
    return reason, state
