"""Supernet training, channel slicing and latency-constrained evolution."""
from .evolution import (
    EvolutionResult,
    InfeasibleConstraint,
    crossover,
    evolve_step,
    init_population,
    mutate,
    run_evolution,
    write_history,
)
from .genome import ArchGenome, SearchSpace, from_genes, sample_uniform_path, to_genes
from .latency import LatencyReport, flops_latency, measure_latency, path_flops
from .supernet import (
    Supernet,
    SupernetSchedule,
    active_widths,
    genome_detector,
    train_supernet,
    width_introduction_order,
)

__all__ = [
    "ArchGenome", "EvolutionResult", "InfeasibleConstraint", "LatencyReport", "SearchSpace", "Supernet",
    "SupernetSchedule", "active_widths", "crossover", "evolve_step", "flops_latency", "from_genes",
    "genome_detector", "init_population", "measure_latency", "mutate", "path_flops", "run_evolution",
    "sample_uniform_path", "to_genes", "train_supernet", "width_introduction_order", "write_history",
]
