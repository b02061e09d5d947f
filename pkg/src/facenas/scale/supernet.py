"""One-shot supernet: a single weight store from which every genome's path is sliced.

The store holds all backbones, lateral projections, ``max_stack`` full
AutoFAE blocks and a ``max_head``-deep head, all at the maximal width. A
genome's network is an ordinary :class:`Detector` whose parameters are
leading-channel slices of the store, so updating a path updates the store.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..autodiff import SGD, NonFiniteError, Tape, Tensor
from ..cells import DiscreteArch, DiscreteNeck
from ..detector import Detector, DetectorConfig
from ..detector.train import augment, batch_loss, batches, clip_gradients, scaled_lr
from ..nn import SlicedParams, init_params
from .genome import ArchGenome, SearchSpace, sample_uniform_path


def genome_detector(genome: ArchGenome, arch: DiscreteArch, config: Optional[DetectorConfig] = None) -> Detector:
    neck = DiscreteNeck(arch, genome.width, stack=genome.stack)
    return Detector(config, backbone=genome.backbone, neck=neck, width=genome.width, head_depth=genome.head_depth)


class Supernet:
    def __init__(self, arch: DiscreteArch, space: SearchSpace = SearchSpace(),
                 config: Optional[DetectorConfig] = None):
        self.arch = arch
        self.space = space
        self.config = config or DetectorConfig()
        self.store: dict = {}

    def full_genomes(self):
        """Maximal-width, maximal-depth genomes (one per backbone) covering the whole store."""
        s = self.space
        return [ArchGenome(b, s.max_stack, (False,) * s.max_stack, s.max_head, s.max_width) for b in s.backbones]

    def store_specs(self):
        specs = {}
        for g in self.full_genomes():
            for spec in genome_detector(g, self.arch, self.config).specs():
                specs.setdefault(spec.name, spec)
        return list(specs.values())

    def initialize(self, rng: np.random.Generator, dtype=np.float32) -> "Supernet":
        self.store = init_params(self.store_specs(), rng, dtype)
        for g in self.full_genomes():
            for name, value in genome_detector(g, self.arch, self.config).neck.initial_values().items():
                self.store[name].data[...] = value
        return self

    def path(self, genome: ArchGenome):
        """(detector, sliced parameter mapping) for ``genome``."""
        genome.validate(self.space)
        det = genome_detector(genome, self.arch, self.config)
        return det, SlicedParams(self.store, {s.name: s.shape for s in det.specs()})

    def slice_weights(self, genome: ArchGenome):
        return self.path(genome)

    def copy_path(self, genome: ArchGenome):
        """(detector, independent dict of copied slices); used to build standalone networks."""
        det = genome_detector(genome.validate(self.space), self.arch, self.config)
        params = {}
        for s in det.specs():
            src = self.store[s.name].data
            params[s.name] = Tensor(src[tuple(slice(0, d) for d in s.shape)].copy(), requires_grad=True, name=s.name)
        return det, params


@dataclass(frozen=True)
class SupernetSchedule:
    """Warm-up at maximal width, then one more width joins the pool every ``intro_every`` epochs."""

    epochs: int = 12
    warmup_epochs: int = 6
    intro_every: int = 1
    batch_size: int = 16
    lr: Optional[float] = None
    momentum: float = 0.9
    weight_decay: float = 5e-4
    clip_norm: float = 20.0
    warmup_steps: int = 50

    def __post_init__(self):
        if not 0 <= self.warmup_epochs <= self.epochs:
            raise ValueError("warm-up must fit inside the schedule")
        if self.intro_every < 1:
            raise ValueError("intro_every must be >= 1")

    @property
    def base_lr(self):
        return self.lr if self.lr is not None else scaled_lr(self.batch_size)


def width_introduction_order(widths) -> list:
    return sorted(widths, reverse=True)


def active_widths(schedule: SupernetSchedule, epoch: int, widths) -> tuple:
    order = width_introduction_order(widths)
    if epoch < schedule.warmup_epochs:
        return (order[0],)
    n = 1 + (epoch - schedule.warmup_epochs) // schedule.intro_every + 1
    return tuple(order[:min(n, len(order))])


def train_supernet(supernet: Supernet, dataset, schedule: SupernetSchedule, rng: np.random.Generator,
                   log: Optional[Callable[[dict], None]] = None, probe=None) -> list:
    """Single-path training; returns per-epoch records.

    ``probe`` (images, boxes) is scored with the maximal B0 path after each
    epoch when given.
    """
    names = list(supernet.store)
    tensors = [supernet.store[n] for n in names]
    opt = SGD(tensors, lr=schedule.base_lr, momentum=schedule.momentum, weight_decay=schedule.weight_decay)
    steps_per_epoch = math.ceil(len(dataset) / schedule.batch_size)
    total = steps_per_epoch * schedule.epochs
    step = 0
    records = []
    for epoch in range(schedule.epochs):
        widths = active_widths(schedule, epoch, supernet.space.widths)
        losses, sampled = [], []
        for idx in batches(len(dataset), schedule.batch_size, rng):
            genome = sample_uniform_path(rng, widths, supernet.space)
            sampled.append(str(genome))
            det, params = supernet.path(genome)
            images, boxes = augment(dataset.images[idx], [dataset.boxes[i] for i in idx], rng)
            lr = schedule.base_lr * 0.5 * (1 + math.cos(math.pi * step / total))
            if step < schedule.warmup_steps:
                lr *= (step + 1) / schedule.warmup_steps
            opt.lr = lr
            used = [supernet.store[n] for n in params]
            with Tape() as tape:
                loss = batch_loss(det, params, images, boxes)
                try:
                    grads = tape.gradient(loss, used)
                except NonFiniteError as exc:
                    raise NonFiniteError(f"supernet diverged at epoch {epoch}, step {step} ({genome}): {exc}") from exc
            by_id = {id(t): g for t, g in zip(used, clip_gradients(grads, schedule.clip_norm))}
            opt.step([by_id.get(id(t)) for t in tensors])
            losses.append(float(loss.data))
            step += 1
        rec = {"epoch": epoch, "active_widths": list(widths), "loss": float(np.mean(losses)),
               "phase": "warmup" if epoch < schedule.warmup_epochs else "width-sampling",
               "sampled_widths": sorted({ArchGenome.parse(s).width for s in sampled})}
        if probe is not None:
            det, params = supernet.path(supernet.full_genomes()[0])
            rec["probe_loss"] = float(batch_loss(det, params, *probe).data)
        records.append(rec)
        if log is not None:
            log(rec)
    return records
