"""Artifact-level steps shared by the command line and the end-to-end runs.

A :class:`RunConfig` bundles every setting in one INI file. Each step reads
and writes plain files (datasets, architecture JSON, weight checkpoints with a
JSON model card, evaluation reports), so any step can be replayed alone.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Optional


from .autodiff import Tensor
from .autodiff.checkpoint import load_checkpoint, save_checkpoint
from .cells import DiscreteArch, DiscreteNeck
from .config import ConfigError, from_section, read_config, to_section, write_config
from .databench import EvalReport, SceneSpec, generate, save_dataset, subset_floors
from .detector import Detector, DetectorConfig
from .detector.train import TrainSchedule, evaluate, train_detector
from .rng import make_rng, sub_seed
from .scale import (
    ArchGenome,
    SearchSpace,
    Supernet,
    SupernetSchedule,
    flops_latency,
    measure_latency,
    path_flops,
    run_evolution,
)
from .scale.latency import DEFAULT_MS_PER_GFLOP
from .scale.supernet import genome_detector
from .search import SearchSchedule, run_search


@dataclass
class RunSettings:
    seed: int = 0
    jobs: int = 1


@dataclass
class DataSettings:
    n_train: int = 2000
    n_val: int = 500


@dataclass
class SearchSettings:
    target: str = "joint"
    width: int = 16
    opset: str = "full"
    num_nodes: int = 4
    fe_position: str = "middle"
    fa_kernel: int = 3


@dataclass
class ModelSettings:
    backbone: str = "B0"
    width: int = 16
    head_depth: int = 2


@dataclass
class EvolutionSettings:
    pop_size: int = 50
    iters: int = 20
    top_k: int = 10
    mutation_p: float = 0.1
    budget_ms: float = 5.0
    latency: str = "flops"  # flops | measured
    ms_per_gflop: float = DEFAULT_MS_PER_GFLOP
    n_runs: int = 21
    n_minival: int = 100

    def __post_init__(self):
        if self.latency not in ("flops", "measured"):
            raise ValueError(f"latency must be 'flops' or 'measured', not {self.latency!r}")


def default_train_schedule():
    return TrainSchedule(epochs=16, batch_size=16, lr=0.02, warmup_steps=250)


def default_search_schedule():
    return SearchSchedule(epochs=16, freeze_epochs=8, batch_size=16, weight_lr=0.02, warmup_steps=100)


SECTIONS = {
    "run": RunSettings,
    "scene": SceneSpec,
    "data": DataSettings,
    "search": SearchSettings,
    "search_schedule": SearchSchedule,
    "model": ModelSettings,
    "train_schedule": TrainSchedule,
    "detector": DetectorConfig,
    "space": SearchSpace,
    "supernet": SupernetSchedule,
    "evolution": EvolutionSettings,
}


@dataclass
class RunConfig:
    run: RunSettings = field(default_factory=RunSettings)
    scene: SceneSpec = field(default_factory=SceneSpec)
    data: DataSettings = field(default_factory=DataSettings)
    search: SearchSettings = field(default_factory=SearchSettings)
    search_schedule: SearchSchedule = field(default_factory=default_search_schedule)
    model: ModelSettings = field(default_factory=ModelSettings)
    train_schedule: TrainSchedule = field(default_factory=default_train_schedule)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    space: SearchSpace = field(default_factory=SearchSpace)
    supernet: SupernetSchedule = field(default_factory=SupernetSchedule)
    evolution: EvolutionSettings = field(default_factory=EvolutionSettings)

    def save(self, path):
        write_config(path, {name: to_section(getattr(self, name)) for name in SECTIONS})

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_sections(read_config(path))

    @classmethod
    def from_sections(cls, sections: dict) -> "RunConfig":
        unknown = set(sections) - set(SECTIONS)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        base = cls()
        values = {}
        for name, kind in SECTIONS.items():
            merged = {**to_section(getattr(base, name)), **sections.get(name, {})}
            values[name] = from_section(kind, merged)
        return cls(**values)

    def replace(self, section: str, **kw) -> "RunConfig":
        """Copy with fields of one section overridden."""
        return dataclasses.replace(self, **{section: dataclasses.replace(getattr(self, section), **kw)})

    def scene_for(self, split: str) -> SceneSpec:
        return dataclasses.replace(self.scene, seed=sub_seed(self.run.seed, "data", split))

    def search_seeds(self) -> tuple:
        return tuple(sub_seed(self.run.seed, "search", s) % 2 ** 31 for s in self.search_schedule.seeds)


# data


def gen_data(spec: SceneSpec, n: int, out_dir, jobs: int = 1):
    ds = generate(spec, n, jobs=jobs)
    save_dataset(ds, out_dir, spec)
    return ds


def dataset_floors(root, fallback: Optional[SceneSpec] = None):
    """Scale-subset floors from the generator settings stored with a dataset."""
    with open(os.path.join(root, "annotations.json")) as fh:
        spec = json.load(fh).get("spec")
    if spec is None:
        return subset_floors(fallback or SceneSpec())
    spec["scale_range"] = tuple(spec["scale_range"])
    spec["aspect_range"] = tuple(spec["aspect_range"])
    return subset_floors(SceneSpec(**spec))


# models


def model_card(det: Detector, arch: Optional[DiscreteArch], genome: Optional[ArchGenome] = None) -> dict:
    stack = det.neck.stack if isinstance(det.neck, DiscreteNeck) else []
    return {"backbone": det.backbone.name, "width": det.width, "head_depth": det.head_depth, "stack": stack,
            "arch": None if arch is None else arch.to_dict(), "genome": None if genome is None else str(genome),
            "detector": to_section(det.config)}


def detector_from_card(card: dict) -> Detector:
    config = from_section(DetectorConfig, card["detector"])
    neck = None
    if card["arch"] is not None:
        neck = DiscreteNeck(DiscreteArch.from_dict(card["arch"]), card["width"], stack=card["stack"] or None)
    return Detector(config, backbone=card["backbone"], neck=neck, width=card["width"], head_depth=card["head_depth"])


def save_model(path, det: Detector, params, arch=None, genome=None):
    """Weights at ``path`` and the model card at ``path + '.json'``."""
    save_checkpoint(path, params)
    with open(str(path) + ".json", "w") as fh:
        json.dump(model_card(det, arch, genome), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_model(path):
    card_path = str(path) + ".json"
    if not os.path.exists(card_path):
        raise FileNotFoundError(f"missing model card {card_path}")
    with open(card_path) as fh:
        det = detector_from_card(json.load(fh))
    arrays = load_checkpoint(path)
    missing = [s.name for s in det.specs() if s.name not in arrays]
    if missing:
        raise ValueError(f"{path}: checkpoint lacks {len(missing)} parameters (first: {missing[0]})")
    return det, {s.name: Tensor(arrays[s.name], requires_grad=True, name=s.name) for s in det.specs()}


def build_detector(cfg: RunConfig, arch: Optional[DiscreteArch]) -> Detector:
    m = cfg.model
    neck = DiscreteNeck(arch, m.width) if arch is not None else None
    return Detector(cfg.detector, backbone=m.backbone, neck=neck, width=m.width, head_depth=m.head_depth)


def train_model(det: Detector, train_ds, schedule: TrainSchedule, seed: int, name: str, log_path=None,
                init=None):
    """Train ``det`` from a seeded initialisation (or from ``init`` weights); returns params."""
    rng = make_rng(seed, "train", name)
    params = det.init_params(rng)
    if init is not None:
        for k, v in init.items():
            params[k].data[...] = v.data
    records = []
    train_detector(det, params, train_ds, schedule, rng, log=records.append)
    if log_path is not None:
        with open(log_path, "w") as fh:
            for r in records:
                fh.write(json.dumps(r, sort_keys=True) + "\n")
    return params


def eval_model(det, params, val_ds, floors=None) -> EvalReport:
    return evaluate(det, params, val_ds, floors)


def write_report(path, report: EvalReport):
    with open(path, "w") as fh:
        fh.write(report.dumps() + "\n")


def file_digest(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


# supernet


def save_supernet(path, sn: Supernet):
    save_checkpoint(path, sn.store)
    doc = {"arch": sn.arch.to_dict(), "space": to_section(sn.space), "detector": to_section(sn.config)}
    with open(str(path) + ".json", "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_supernet(path) -> Supernet:
    card_path = str(path) + ".json"
    if not os.path.exists(card_path):
        raise FileNotFoundError(f"missing supernet card {card_path}")
    with open(card_path) as fh:
        doc = json.load(fh)
    sn = Supernet(DiscreteArch.from_dict(doc["arch"]), from_section(SearchSpace, doc["space"]),
                  from_section(DetectorConfig, doc["detector"]))
    arrays = load_checkpoint(path)
    sn.store = {s.name: Tensor(arrays[s.name], requires_grad=True, name=s.name) for s in sn.store_specs()}
    return sn


def genome_model(sn: Supernet, genome: ArchGenome, fine_tune: bool):
    """Standalone detector for ``genome``; with ``fine_tune`` its weights start from the supernet slice."""
    if fine_tune:
        return sn.copy_path(genome)
    return genome_detector(genome.validate(sn.space), sn.arch, sn.config), None


# end to end


@dataclass
class PipelineResult:
    out_dir: str
    reports: dict  # model name -> EvalReport
    arch: DiscreteArch

    @property
    def margin_ap50(self) -> float:
        return self.reports["autofae"].ap50 - self.reports["baseline"].ap50


def run_pipeline(cfg: RunConfig, out_dir, progress=None) -> PipelineResult:
    """Data -> joint search -> train searched and identity-neck detectors -> evaluate both.

    Writes ``report.json`` with both evaluations and the AP.50 margin.
    """
    say = progress or (lambda msg: None)
    os.makedirs(out_dir, exist_ok=True)
    cfg.save(os.path.join(out_dir, "config.ini"))
    train_dir, val_dir = os.path.join(out_dir, "data", "train"), os.path.join(out_dir, "data", "val")
    train_ds = gen_data(cfg.scene_for("train"), cfg.data.n_train, train_dir, cfg.run.jobs)
    val_ds = gen_data(cfg.scene_for("val"), cfg.data.n_val, val_dir, cfg.run.jobs)
    floors = subset_floors(cfg.scene)
    say("data ready")

    search_dir = os.path.join(out_dir, "search")
    os.makedirs(search_dir, exist_ok=True)
    s = cfg.search
    schedule = dataclasses.replace(cfg.search_schedule, seeds=cfg.search_seeds())
    result = run_search(s.target, train_ds, schedule, fe_position=s.fe_position, out_dir=search_dir,
                        width=s.width, opset=s.opset, num_nodes=s.num_nodes, config=cfg.detector,
                        fa_kernel=s.fa_kernel)
    say(f"search done (best seed {result.best_seed})")

    final_dir = os.path.join(out_dir, "final")
    os.makedirs(final_dir, exist_ok=True)
    reports = {}
    for name, arch in (("autofae", result.best), ("baseline", None)):
        det = build_detector(cfg, arch)
        params = train_model(det, train_ds, cfg.train_schedule, sub_seed(cfg.run.seed, "final"), name,
                             log_path=os.path.join(final_dir, f"{name}.log.jsonl"))
        save_model(os.path.join(final_dir, f"{name}.ckpt"), det, params, arch)
        reports[name] = eval_model(det, params, val_ds, floors)
        write_report(os.path.join(final_dir, f"{name}.report.json"), reports[name])
        say(f"{name}: AP.50 {reports[name].ap50:.4f}")

    doc = {name: r.to_dict() for name, r in reports.items()}
    doc["margin_ap50"] = reports["autofae"].ap50 - reports["baseline"].ap50
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return PipelineResult(str(out_dir), reports, result.best)


def path_fitness(sn: Supernet, minival):
    """Mini-val AP.50 of a genome's sliced path with inherited supernet weights."""
    def fitness(genome: ArchGenome) -> float:
        det, params = sn.path(genome)
        return evaluate(det, params, minival).ap50
    return fitness


def path_latency(sn: Supernet, settings: EvolutionSettings):
    if settings.latency == "measured":
        return lambda g: measure_latency(g, sn, n_runs=settings.n_runs).median_ms
    return lambda g: flops_latency(path_flops(sn, g), settings.ms_per_gflop)


def evolve_supernet(sn: Supernet, minival, settings: EvolutionSettings, rng, progress=None):
    return run_evolution(path_fitness(sn, minival), path_latency(sn, settings), settings.budget_ms, rng,
                         pop_size=settings.pop_size, iters=settings.iters, top_k=settings.top_k,
                         mutation_p=settings.mutation_p, space=sn.space, progress=progress)
