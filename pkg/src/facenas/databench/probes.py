"""Small-budget probing experiments on single-level aggregation and enhancement.

Both probes train a detector from scratch per configuration and report
mini-val AP.50. The pairwise aggregation probe fills an L x L matrix whose
entry (i, j) aggregates pyramid level ``levels[i]`` with level ``levels[j]``:
the diagonal is the plain baseline, ``j > i`` (a coarser source) is a
top-down link and ``j < i`` a bottom-up one.
"""
from __future__ import annotations

import csv
from typing import Callable, Optional

import numpy as np

from ..autodiff import add
from ..cells import FeatureMap, FeDag, fe_cell_forward, resize_to
from ..cells.fe import fe_dag_specs
from ..detector import Detector
from ..detector.train import TrainSchedule, evaluate, train_detector
from ..nn import conv, conv_specs
from ..rng import make_rng

# reference enhancement modules expressed as FE DAGs (every node reads the input)
REFERENCE_MODULES = {
    "aspp": FeDag([0, 0, 0, 0], ["1x1", "3x3", "3x3_r2", "3x3_r3"]),
    "rfe": FeDag([0, 0, 0, 0], ["1x3", "3x1", "1x5", "5x1"]),
}


class PairNeck:
    """Aggregates one target level with one source level; other levels pass through."""

    def __init__(self, target: int, source: int, channels: int):
        self.target, self.source, self.channels = target, source, channels

    def specs(self):
        c = self.channels
        # same identity-at-start initialisation as an aggregation cell
        return conv_specs("probe.pre", c, c, 3, 3, init="zeros") + conv_specs("probe.post", c, c, 3, 3, init="dirac")

    def forward(self, p, pyramid, ctx=None):
        by_level = {fm.level: fm for fm in pyramid}
        src = resize_to(by_level[self.source], self.target).tensor
        mixed = add(by_level[self.target].tensor, conv(p, "probe.pre", src))
        out = FeatureMap(conv(p, "probe.post", mixed), self.target)
        return [out if fm.level == self.target else fm for fm in pyramid]


class ModuleNeck:
    """Applies one enhancement DAG at a single level."""

    def __init__(self, level: int, dag: FeDag, channels: int):
        self.level, self.dag, self.channels = level, dag, channels

    def specs(self):
        return fe_dag_specs("probe.fe", self.channels, self.dag)

    def forward(self, p, pyramid, ctx=None):
        return [FeatureMap(fe_cell_forward(fm.tensor, p, "probe.fe", self.dag.num_nodes, mode="discrete",
                                           dag=self.dag), fm.level) if fm.level == self.level else fm
                for fm in pyramid]


def _train_and_score(neck, train_ds, val_ds, schedule, seed, tag, width, config):
    det = Detector(config, neck=neck, width=width)
    rng = make_rng(seed, "probe", tag)
    params = det.init_params(rng)
    try:
        train_detector(det, params, train_ds, schedule, rng)
    except FloatingPointError as exc:
        return float("nan"), str(exc)
    return evaluate(det, params, val_ds).ap50, None


def adjacent_pairs(n: int):
    return [(i, i + 1) for i in range(n - 1)] + [(i + 1, i) for i in range(n - 1)]


def probe_fa_pairwise(train_ds, val_ds, schedule: TrainSchedule, seed: int = 0, pairs=None, width: int = 16,
                      config=None, progress: Optional[Callable[[dict], None]] = None):
    """(matrix, errors). ``pairs`` limits the off-diagonal runs (default: all); skipped cells are NaN."""
    det_levels = list((config.levels if config else Detector().config.levels))
    n = len(det_levels)
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j] if pairs is None else list(pairs)
    matrix = np.full((n, n), np.nan)
    errors = {}
    base, err = _train_and_score(None, train_ds, val_ds, schedule, seed, "baseline", width, config)
    if err:
        errors["baseline"] = err
    np.fill_diagonal(matrix, base)
    if progress:
        progress({"cell": "baseline", "ap50": base})
    for i, j in pairs:
        neck = PairNeck(det_levels[i], det_levels[j], width)
        ap, err = _train_and_score(neck, train_ds, val_ds, schedule, seed, f"P{det_levels[i]}<-P{det_levels[j]}",
                                   width, config)
        matrix[i, j] = ap
        if err:
            errors[(i, j)] = err
        if progress:
            progress({"cell": f"P{det_levels[i]}<-P{det_levels[j]}", "ap50": ap})
    return matrix, errors


def direction_means(matrix):
    """Mean AP.50 over adjacent top-down (i, i+1) and adjacent bottom-up (i+1, i) cells."""
    n = matrix.shape[0]
    td = [matrix[i, i + 1] for i in range(n - 1)]
    bu = [matrix[i + 1, i] for i in range(n - 1)]
    return float(np.nanmean(td)), float(np.nanmean(bu))


def probe_fe_levels(train_ds, val_ds, schedule: TrainSchedule, modules=("none", "aspp", "rfe"), levels=None,
                    seed: int = 0, width: int = 16, config=None, progress=None):
    """{module: {level: AP.50}}; the "none" row repeats the shared baseline."""
    levels = list(levels or (config.levels if config else Detector().config.levels))
    base, _ = _train_and_score(None, train_ds, val_ds, schedule, seed, "baseline", width, config)
    table = {}
    for m in modules:
        row = {}
        for lvl in levels:
            if m == "none":
                row[lvl] = base
                continue
            if m not in REFERENCE_MODULES:
                raise ValueError(f"unknown probe module {m!r} (known: none, {', '.join(REFERENCE_MODULES)})")
            ap, _ = _train_and_score(ModuleNeck(lvl, REFERENCE_MODULES[m], width), train_ds, val_ds, schedule,
                                     seed, f"{m}@P{lvl}", width, config)
            row[lvl] = ap
            if progress:
                progress({"module": m, "level": lvl, "ap50": ap})
        table[m] = row
    return table


def write_matrix_csv(path, matrix, levels):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["target\\source"] + [f"P{l}" for l in levels])
        for i, l in enumerate(levels):
            w.writerow([f"P{l}"] + [repr(float(v)) for v in matrix[i]])


def write_table_csv(path, table):
    levels = sorted({l for row in table.values() for l in row})
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["module"] + [f"P{l}" for l in levels])
        for m, row in table.items():
            w.writerow([m] + [repr(float(row[l])) for l in levels])
