"""Seeded search runs, best-of-seeds selection, cascade/joint comparison and FE-position sweep."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..cells import DiscreteArch, DiscreteNeck, SearchNeck
from ..detector import Detector, DetectorConfig
from ..detector.train import TrainSchedule, evaluate, train_detector
from ..rng import make_rng
from .bilevel import SearchDiverged, SearchSchedule, bilevel_epoch, make_search_state, split_dataset


@dataclass
class SeedResult:
    seed: int
    arch: Optional[DiscreteArch]
    minival_ap50: float
    minival_ap: float
    log: list
    error: Optional[str] = None


@dataclass
class SearchResult:
    target: str
    fe_position: Optional[str]
    best: DiscreteArch
    best_seed: int
    runs: list = field(default_factory=list)


def inherited_detector(state, arch: DiscreteArch):
    """Discrete detector for ``arch`` reusing the search network's tensors by name."""
    src = state.detector
    det = Detector(src.config, backbone=src.backbone.name, neck=DiscreteNeck(arch, src.width),
                   width=src.width, head_depth=src.head_depth)
    params = {s.name: state.params[s.name] for s in det.specs()}
    return det, params


def search_once(target: str, dataset, schedule: SearchSchedule, seed: int, fe_position="middle",
                width=16, opset="full", config: Optional[DetectorConfig] = None, num_nodes=4,
                split_seed: Optional[int] = None, log_path=None, progress=None, fa_kernel=3) -> SeedResult:
    """One seeded search: train, discretize, and score the discrete arch with inherited weights on mini-val."""
    rng = make_rng(seed, "search", target, fe_position or "none")
    split = split_dataset(len(dataset), seed if split_seed is None else split_seed)
    neck = SearchNeck(config.levels if config else DetectorConfig().levels, width, target=target,
                      fe_position=fe_position, num_nodes=num_nodes, opset=opset, fa_kernel=fa_kernel)
    state = make_search_state(neck, schedule, rng, config)
    mini = dataset.subset(split.mini_val)
    meta = {"target": target, "seed": seed, "fe_position": neck.fe_position or "none"}
    arch = None
    try:
        for epoch in range(schedule.epochs):
            rec = bilevel_epoch(state, dataset, split, schedule, epoch)
            arch = neck.discretize(state.params, meta)
            det, params = inherited_detector(state, arch)
            report = evaluate(det, params, mini)
            rec.update(minival_ap50=report.ap50, minival_ap=report.ap, arch=arch.to_dict())
            if progress:
                progress(rec)
    except SearchDiverged as exc:
        return SeedResult(seed, None, float("nan"), float("nan"), state.log, str(exc))
    finally:
        if log_path is not None:
            write_log(log_path, state.log)
    last = state.log[-1]
    arch.meta.update(minival_ap50=last["minival_ap50"], minival_ap=last["minival_ap"])
    return SeedResult(seed, arch, last["minival_ap50"], last["minival_ap"], state.log)


def write_log(path, records):
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")


def select_best(runs) -> SeedResult:
    """Highest mini-val AP.50 among non-diverged runs (first seed wins ties)."""
    ok = [r for r in runs if r.arch is not None and np.isfinite(r.minival_ap50)]
    if not ok:
        raise SearchDiverged("every search seed diverged: " + "; ".join(r.error or "" for r in runs))
    return max(ok, key=lambda r: (r.minival_ap50, -runs.index(r)))


def run_search(target: str, dataset, schedule: SearchSchedule, fe_position="middle", out_dir=None,
               **kw) -> SearchResult:
    """Search once per seed in ``schedule.seeds`` and keep the best discrete architecture."""
    runs = []
    for seed in schedule.seeds:
        log_path = None if out_dir is None else os.path.join(out_dir, f"search_{target}_seed{seed}.log.jsonl")
        runs.append(search_once(target, dataset, schedule, seed, fe_position=fe_position, log_path=log_path, **kw))
    best = select_best(runs)
    if out_dir is not None:
        best.arch.save(os.path.join(out_dir, f"arch_{target}.json"))
    return SearchResult(target, fe_position, best.arch, best.seed, runs)


def combine_cascade(fa_arch: DiscreteArch, fe_arch: DiscreteArch, fe_position="middle") -> DiscreteArch:
    """Stack separately searched FA and FE results into one AutoFAE architecture."""
    return DiscreteArch(levels=list(fa_arch.levels), fa=fa_arch.fa, fe=fe_arch.fe, fe_position=fe_position,
                        num_nodes=fe_arch.num_nodes, opset=fe_arch.opset, stack=["FAE"],
                        meta={"target": "cascade"}, fa_kernel=fa_arch.fa_kernel).validate()


def score_arch(arch: DiscreteArch, train_ds, val_ds, schedule: TrainSchedule, seed: int, width=16,
               config: Optional[DetectorConfig] = None, backbone="B0", head_depth=2,
               beta_mode="trained"):
    """Train ``arch`` from scratch on ``train_ds`` and report on ``val_ds``."""
    neck = DiscreteNeck(arch, width) if arch is not None else None
    det = Detector(config, backbone=backbone, neck=neck, width=width, head_depth=head_depth)
    rng = make_rng(seed, "score")
    params = det.init_params(rng)
    if neck is not None and beta_mode == "init":
        for name in neck.initial_values("trained"):
            params[name].data[...] = 1.0
    train_detector(det, params, train_ds, schedule, rng)
    return evaluate(det, params, val_ds)


def compare_joint_cascade(dataset, search_schedule: SearchSchedule, train_schedule: TrainSchedule,
                          width=16, progress=None):
    """Per seed: joint search vs cascade (FA search, FE search, stacked), both retrained on the
    weight-train split and scored on mini-val. Returns rows of dicts."""
    rows = []
    for seed in search_schedule.seeds:
        joint = search_once("joint", dataset, search_schedule, seed, width=width)
        fa = search_once("fa", dataset, search_schedule, seed, width=width)
        fe = search_once("fe", dataset, search_schedule, seed, width=width)
        split = split_dataset(len(dataset), seed)
        tr, mv = dataset.subset(split.weight_train), dataset.subset(split.mini_val)
        cascade = combine_cascade(fa.arch, fe.arch)
        rj = score_arch(joint.arch, tr, mv, train_schedule, seed, width)
        rc = score_arch(cascade, tr, mv, train_schedule, seed, width)
        row = {"seed": seed, "joint_ap50": rj.ap50, "cascade_ap50": rc.ap50, "joint_ap": rj.ap, "cascade_ap": rc.ap}
        rows.append(row)
        if progress:
            progress(row)
    return rows


def compare_fe_positions(dataset, schedule: SearchSchedule, out_dir=None, **kw):
    """Joint search at each FE position; rows sorted by mini-val AP.50 (best first)."""
    rows = []
    for pos in ("before", "middle", "after"):
        sub = None
        if out_dir is not None:
            sub = os.path.join(out_dir, pos)
            os.makedirs(sub, exist_ok=True)
        res = run_search("joint", dataset, schedule, fe_position=pos, out_dir=sub, **kw)
        best = next(r for r in res.runs if r.seed == res.best_seed)
        rows.append({"fe_position": pos, "minival_ap50": best.minival_ap50, "minival_ap": best.minival_ap,
                     "seed": res.best_seed})
    rows.sort(key=lambda r: -r["minival_ap50"])
    for rank, r in enumerate(rows, 1):
        r["rank"] = rank
    return rows
