"""Meta-heuristic search over VMD parameters.

Both optimizers minimise a black-box objective over a box and report the
best-so-far fitness after every iteration/generation.  :func:`pso_optimize`
and :func:`ga_optimize` bind them to the (K, alpha) envelope-entropy search;
:func:`particle_swarm` and :func:`genetic_algorithm` are the generic engines.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .entropy import EnvelopeEntropyConfig, envelope_entropy
from .signal import as_samples
from .vmd import VMDParams, vmd_decompose

logger = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], float]


@dataclass(frozen=True)
class SearchSpace:
    k_range: tuple[int, int] = (3, 10)
    alpha_range: tuple[float, float] = (10.0, 2000.0)

    def __post_init__(self):
        k_lo, k_hi = self.k_range
        a_lo, a_hi = self.alpha_range
        if k_lo < 1 or k_hi < k_lo:
            raise ValueError(f"invalid k_range {self.k_range}")
        if a_lo <= 0 or a_hi < a_lo:
            raise ValueError(f"invalid alpha_range {self.alpha_range}")

    @property
    def bounds(self) -> np.ndarray:
        return np.array([self.k_range, self.alpha_range], dtype=np.float64)

    def clamp_k(self, k: float) -> int:
        return int(min(max(round(k), self.k_range[0]), self.k_range[1]))


@dataclass(frozen=True)
class PSOConfig:
    """Swarm settings.

    ``inertia`` is ``("linear", w_start, w_end)`` or ``("constant", w)``.
    Particles leaving the box are clamped onto it and the velocity on that
    dimension is zeroed; velocities are otherwise unbounded.
    """

    particles: int = 20
    max_iterations: int = 100
    inertia: tuple = ("linear", 0.9, 0.4)
    cognitive_coeff: float = 2.05
    social_coeff: float = 2.05
    seed: int = 0

    def __post_init__(self):
        if self.particles < 2:
            raise ValueError(f"need at least 2 particles, got {self.particles}")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if self.cognitive_coeff <= 0 or self.social_coeff <= 0:
            raise ValueError("learning coefficients must be > 0")
        kind = self.inertia[0]
        if kind == "linear" and len(self.inertia) == 3:
            return
        if kind == "constant" and len(self.inertia) == 2:
            return
        raise ValueError(f"bad inertia spec {self.inertia!r}")

    def inertia_at(self, iteration: int) -> float:
        if self.inertia[0] == "constant":
            return float(self.inertia[1])
        _, w0, w1 = self.inertia
        span = max(self.max_iterations - 1, 1)
        return w0 + (w1 - w0) * iteration / span


@dataclass(frozen=True)
class GAConfig:
    population: int = 20
    generations: int = 100
    tournament_size: int = 2
    crossover_rate: float = 0.9
    mutation_rate: float = 0.1
    mutation_scale: float = 0.1  # sigma as a fraction of each dimension's range
    elitism: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.population < 2:
            raise ValueError(f"need a population of at least 2, got {self.population}")
        if not 0 <= self.elitism < self.population:
            raise ValueError("elitism must be in [0, population)")


@dataclass
class SwarmState:
    positions: np.ndarray
    velocities: np.ndarray
    personal_best_positions: np.ndarray
    personal_best_fitness: np.ndarray
    global_best_position: np.ndarray
    global_best_fitness: float
    iteration: int
    rng_seed: int


@dataclass
class OptimizeResult:
    best_position: np.ndarray
    best_fitness: float
    history: list[float]
    evaluations: int
    state: SwarmState | None = None
    best_K: int | None = None
    best_alpha: float | None = None
    trace: list = field(default_factory=list)

    def converged_at(self, tol: float = 1e-6) -> int:
        """First iteration (1-based) whose best fitness is within ``tol`` of the final one."""
        final = self.history[-1]
        for i, h in enumerate(self.history):
            if h <= final + tol:
                return i + 1
        return len(self.history)


def _safe_eval(objective: Objective, x: np.ndarray) -> float:
    try:
        val = float(objective(x))
    except Exception as exc:  # a failed particle must not stop the search
        logger.warning("objective failed at %s: %s", x, exc)
        return math.inf
    return val if not math.isnan(val) else math.inf


def _argmin(values: np.ndarray) -> int:
    # np.argmin returns the lowest index among ties, which is the tie-break we want
    return int(np.argmin(values))


def particle_swarm(objective: Objective, bounds, config: PSOConfig) -> OptimizeResult:
    """Minimise ``objective`` over the box ``bounds`` (shape (d, 2))."""
    bounds = np.asarray(bounds, dtype=np.float64)
    lo, hi = bounds[:, 0], bounds[:, 1]
    span = hi - lo
    rng = np.random.default_rng(config.seed)
    P, d = config.particles, len(bounds)

    x = lo + rng.random((P, d)) * span
    v = (rng.random((P, d)) - 0.5) * 0.2 * span
    fit = np.array([_safe_eval(objective, xi) for xi in x])
    evaluations = P
    pbest, pbest_fit = x.copy(), fit.copy()
    g = _argmin(pbest_fit)
    gbest, gbest_fit = pbest[g].copy(), float(pbest_fit[g])

    history = []
    for it in range(config.max_iterations):
        w = config.inertia_at(it)
        r1 = rng.random((P, d))
        r2 = rng.random((P, d))
        v = w * v + config.cognitive_coeff * r1 * (pbest - x) + config.social_coeff * r2 * (gbest - x)
        x = x + v
        out = (x < lo) | (x > hi)
        x = np.clip(x, lo, hi)
        v[out] = 0.0

        fit = np.array([_safe_eval(objective, xi) for xi in x])
        evaluations += P
        improved = fit < pbest_fit
        pbest[improved] = x[improved]
        pbest_fit[improved] = fit[improved]
        g = _argmin(pbest_fit)
        if pbest_fit[g] < gbest_fit:
            gbest, gbest_fit = pbest[g].copy(), float(pbest_fit[g])
        history.append(gbest_fit)

    state = SwarmState(x, v, pbest, pbest_fit, gbest, gbest_fit, config.max_iterations, config.seed)
    return OptimizeResult(gbest, gbest_fit, history, evaluations, state=state)


def genetic_algorithm(objective: Objective, bounds, config: GAConfig) -> OptimizeResult:
    """Generational real-coded GA: binary tournament, uniform crossover,
    Gaussian mutation, elitism."""
    bounds = np.asarray(bounds, dtype=np.float64)
    lo, hi = bounds[:, 0], bounds[:, 1]
    sigma = config.mutation_scale * (hi - lo)
    rng = np.random.default_rng(config.seed)
    N, d = config.population, len(bounds)

    pop = lo + rng.random((N, d)) * (hi - lo)
    fit = np.array([_safe_eval(objective, p) for p in pop])
    evaluations = N
    b = _argmin(fit)
    best, best_fit = pop[b].copy(), float(fit[b])

    def tournament():
        idx = rng.integers(0, N, size=config.tournament_size)
        return pop[idx[_argmin(fit[idx])]]

    history = []
    for _ in range(config.generations):
        elite = pop[np.argsort(fit, kind="stable")[: config.elitism]]
        children = []
        while len(children) < N - config.elitism:
            a, c = tournament(), tournament()
            if rng.random() < config.crossover_rate:
                mask = rng.random(d) < 0.5
                a, c = np.where(mask, a, c), np.where(mask, c, a)
            children.extend([a.copy(), c.copy()])
        children = np.array(children[: N - config.elitism])
        mutate = rng.random(children.shape) < config.mutation_rate
        children = children + mutate * rng.normal(0.0, 1.0, children.shape) * sigma
        children = np.clip(children, lo, hi)

        child_fit = np.array([_safe_eval(objective, p) for p in children])
        evaluations += len(children)
        elite_fit = np.sort(fit, kind="stable")[: config.elitism]
        pop = np.vstack([elite, children])
        fit = np.concatenate([elite_fit, child_fit])
        b = _argmin(fit)
        if fit[b] < best_fit:
            best, best_fit = pop[b].copy(), float(fit[b])
        history.append(best_fit)

    return OptimizeResult(best, best_fit, history, evaluations)


# -- (K, alpha) search ------------------------------------------------------

FITNESS_VMD = dict(tau=0.0, tolerance=1e-7, max_iterations=500, dc_mode=False)


class VMDEntropyFitness:
    """Envelope entropy of the VMD modes for a given (K, alpha), memoised.

    The cache key is (K, alpha rounded to 1e-6).
    """

    def __init__(self, signal, entropy_config: EnvelopeEntropyConfig | None = None, vmd_options=None):
        self.signal = as_samples(signal)
        self.entropy_config = entropy_config or EnvelopeEntropyConfig()
        self.vmd_options = {**FITNESS_VMD, **(vmd_options or {})}
        self.cache: dict[tuple[int, float], float] = {}
        self.calls = 0

    def __call__(self, K: int, alpha: float) -> float:
        key = (int(K), round(float(alpha), 6))
        self.calls += 1
        if key not in self.cache:
            imfs = vmd_decompose(self.signal, VMDParams(K=key[0], alpha=key[1], **self.vmd_options))
            self.cache[key] = envelope_entropy(imfs, self.entropy_config)
        return self.cache[key]


def _bind(signal, space: SearchSpace, fitness, trace: list):
    if fitness is None:
        fitness = VMDEntropyFitness(signal)

    def objective(pos: np.ndarray) -> float:
        K = space.clamp_k(pos[0])
        alpha = float(pos[1])
        trace.append((K, alpha))
        return fitness(K, alpha)

    return objective


def _finish(result: OptimizeResult, space: SearchSpace, trace: list) -> OptimizeResult:
    result.best_K = space.clamp_k(result.best_position[0])
    result.best_alpha = float(result.best_position[1])
    result.trace = trace
    return result


def pso_optimize(signal, space: SearchSpace | None = None, config: PSOConfig | None = None,
                 fitness=None) -> OptimizeResult:
    """PSO over (K, alpha); ``fitness(K, alpha)`` defaults to VMD envelope entropy.

    K is searched as a continuous coordinate and rounded when evaluated.
    """
    space = space or SearchSpace()
    trace: list = []
    result = particle_swarm(_bind(signal, space, fitness, trace), space.bounds, config or PSOConfig())
    return _finish(result, space, trace)


def ga_optimize(signal, space: SearchSpace | None = None, config: GAConfig | None = None,
                fitness=None) -> OptimizeResult:
    space = space or SearchSpace()
    trace: list = []
    result = genetic_algorithm(_bind(signal, space, fitness, trace), space.bounds, config or GAConfig())
    return _finish(result, space, trace)


def write_history_csv(path, history: Sequence[float]) -> None:
    lines = ["iteration,best_fitness"] + [f"{i + 1},{h!r}" for i, h in enumerate(history)]
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def read_history_csv(path) -> list[float]:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "iteration,best_fitness":
            raise ValueError(f"{path}: unexpected header {header!r}")
        return [float(line.split(",")[1]) for line in fh if line.strip()]
