"""Wall-clock latency of sliced paths plus a closed-form FLOP count."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..autodiff import Tensor, count_flops
from .genome import ArchGenome

WARMUP_RUNS = 3
# deterministic stand-in for measured latency: milliseconds per GFLOP
DEFAULT_MS_PER_GFLOP = 20.0


@dataclass(frozen=True)
class LatencyReport:
    genome: str
    median_ms: float
    p90_ms: float
    flops: int
    runs: int
    resolution_warning: bool = False


def path_flops(supernet, genome: ArchGenome, input_size: int = 64) -> int:
    """Conv multiply-adds (x2) of one forward on a single image."""
    det, params = supernet.path(genome)
    x = Tensor(np.zeros((1, 3, input_size, input_size), dtype=np.float32))
    with count_flops() as counter:
        det.forward(params, x)
    return int(counter.total)


def measure_latency(genome: ArchGenome, supernet, input_size: int = 64, n_runs: int = 21) -> LatencyReport:
    """Median and 90th percentile over ``n_runs - 3`` timed forwards (the first 3 are discarded)."""
    if n_runs < 11:
        raise ValueError("need at least 11 runs")
    det, params = supernet.path(genome)
    x = Tensor(np.random.default_rng(0).standard_normal((1, 3, input_size, input_size)).astype(np.float32))
    # materialise the slices once so timing covers compute only
    fixed = {k: Tensor(np.ascontiguousarray(params[k].data)) for k in params}
    times = []
    for _ in range(n_runs):
        t0 = time.perf_counter()
        det.forward(fixed, x)
        times.append(time.perf_counter() - t0)
    timed = np.asarray(times[WARMUP_RUNS:]) * 1e3
    res = time.get_clock_info("perf_counter").resolution * 1e3
    median = float(np.median(timed))
    return LatencyReport(str(genome), median, float(np.percentile(timed, 90)),
                         path_flops(supernet, genome, input_size), len(timed), median < 100 * res)


def flops_latency(flops: int, ms_per_gflop: float = DEFAULT_MS_PER_GFLOP) -> float:
    return flops / 1e9 * ms_per_gflop
