"""Latency-constrained genetic search over supernet paths.

Fitness is evaluated by a caller-supplied function (mini-val AP.50 of the
sliced path in the pipeline); feasibility is a hard latency budget.
Infeasible genomes are never admitted to a population.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .genome import ArchGenome, SearchSpace, from_genes, gene_choices, sample_uniform_path, to_genes


class InfeasibleConstraint(RuntimeError):
    pass


def init_population(size: int, feasible: Callable[[ArchGenome], bool], rng: np.random.Generator,
                    space: SearchSpace = SearchSpace(), max_attempts: Optional[int] = None) -> list:
    """``size`` feasible genomes drawn uniformly, re-sampling rejected draws."""
    max_attempts = max_attempts if max_attempts is not None else 100 * size
    pop, attempts = [], 0
    while len(pop) < size:
        if attempts >= max_attempts:
            raise InfeasibleConstraint(f"found {len(pop)} of {size} feasible genomes in {attempts} draws")
        attempts += 1
        g = sample_uniform_path(rng, None, space)
        if feasible(g):
            pop.append(g)
    return pop


def crossover(a: ArchGenome, b: ArchGenome, rng: np.random.Generator, space: SearchSpace = SearchSpace()):
    """Single-point crossover of the 5-gene vectors."""
    ga, gb = to_genes(a, space), to_genes(b, space)
    point = int(rng.integers(1, len(ga)))
    return from_genes(ga[:point] + gb[point:], space)


def mutate(g: ArchGenome, p: float, rng: np.random.Generator, space: SearchSpace = SearchSpace()):
    genes = to_genes(g, space)
    choices = gene_choices(space)
    for k in range(len(genes)):
        if rng.random() < p:
            genes[k] = choices[k][int(rng.integers(len(choices[k])))]
    return from_genes(genes, space)


def rank(population, fitnesses):
    """Indices sorted by fitness descending; earlier entries win ties."""
    return sorted(range(len(population)), key=lambda i: (-fitnesses[i], i))


def evolve_step(population, fitnesses, rng: np.random.Generator, top_k: int = 10, mutation_p: float = 0.1,
                feasible: Callable[[ArchGenome], bool] = lambda g: True, space: SearchSpace = SearchSpace(),
                max_redraws: int = 100) -> list:
    """Keep the ``top_k`` fittest, refill with mutated crossovers of random retained pairs."""
    if len(population) != len(fitnesses):
        raise ValueError("one fitness per genome required")
    order = rank(population, fitnesses)
    elite = [population[i] for i in order[:top_k]]
    if top_k >= len(population):
        return list(population)
    children = []
    while len(elite) + len(children) < len(population):
        for _ in range(max_redraws):
            i, j = rng.integers(len(elite), size=2)
            child = mutate(crossover(elite[i], elite[j], rng, space), mutation_p, rng, space)
            if feasible(child):
                break
        else:
            child = elite[int(i)]  # redraw budget exhausted: clone a feasible parent
        children.append(child)
    return elite + children


@dataclass
class EvolutionResult:
    best: ArchGenome
    best_fitness: float
    history: list = field(default_factory=list)  # dicts: generation, genome, fitness, latency_ms
    best_per_generation: list = field(default_factory=list)


def run_evolution(fitness: Callable[[ArchGenome], float], latency: Callable[[ArchGenome], float], budget_ms: float,
                  rng: np.random.Generator, pop_size: int = 50, iters: int = 50, top_k: int = 10,
                  mutation_p: float = 0.1, space: SearchSpace = SearchSpace(),
                  progress: Optional[Callable[[dict], None]] = None) -> EvolutionResult:
    """Evolve for ``iters`` generations after the initial one; every evaluated genome is logged."""
    lat_cache, fit_cache = {}, {}

    def lat(g):
        key = str(g)
        if key not in lat_cache:
            lat_cache[key] = float(latency(g))
        return lat_cache[key]

    def feasible(g):
        return lat(g) <= budget_ms

    def fit(g):
        key = str(g)
        if key not in fit_cache:
            fit_cache[key] = float(fitness(g))
        return fit_cache[key]

    history, best_curve = [], []
    pop = init_population(pop_size, feasible, rng, space)
    best, best_fit = None, -np.inf
    for gen in range(iters + 1):
        fits = [fit(g) for g in pop]
        for g, f in zip(pop, fits):
            history.append({"generation": gen, "genome": str(g), "fitness": f, "latency_ms": lat(g)})
        top = rank(pop, fits)[0]
        if fits[top] > best_fit:
            best, best_fit = pop[top], fits[top]
        best_curve.append(best_fit)
        if progress:
            progress({"generation": gen, "best": str(best), "best_fitness": best_fit})
        if gen < iters:
            pop = evolve_step(pop, fits, rng, top_k, mutation_p, feasible, space)
    return EvolutionResult(best, best_fit, history, best_curve)


def write_history(path, history):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["generation", "genome", "fitness", "latency_ms"], lineterminator="\n")
        w.writeheader()
        for row in history:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
