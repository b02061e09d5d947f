"""First-order bi-level optimisation of network weights and architecture parameters."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..autodiff import SGD, Adam, NonFiniteError, Tape
from ..cells import SearchContext, SearchNeck
from ..detector import Detector, DetectorConfig
from ..detector.train import augment, batch_loss, batches, clip_gradients, scaled_lr
from ..nn import split_params


class SearchDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class SearchSplit:
    weight_train: tuple
    arch_train: tuple
    mini_val: tuple


def split_dataset(n: int, seed: int) -> SearchSplit:
    """Shuffle ``range(n)`` into 9:9:2 parts; rounding leftovers go to mini-val."""
    if n < 20:
        raise ValueError(f"need at least 20 items to split 9:9:2, got {n}")
    order = np.random.default_rng(seed).permutation(n)
    a = n * 9 // 20
    return SearchSplit(tuple(int(i) for i in order[:a]), tuple(int(i) for i in order[a:2 * a]),
                       tuple(int(i) for i in order[2 * a:]))


@dataclass(frozen=True)
class SearchSchedule:
    """Epoch budget and optimiser settings.

    Architecture parameters stay frozen for ``freeze_epochs`` epochs and are
    then updated every step. The Gumbel temperature holds at ``tau_start``
    while frozen and falls linearly to ``tau_end`` over the update epochs.
    """

    epochs: int = 20
    freeze_epochs: int = 10
    batch_size: int = 16
    weight_lr: Optional[float] = None  # None -> 0.01 * batch / 32
    momentum: float = 0.9
    weight_decay: float = 5e-4
    arch_lr: float = 0.01
    arch_betas: tuple = (0.9, 0.999)
    tau_start: float = 5.0
    tau_end: float = 0.1
    seeds: tuple = (0, 1, 2)
    clip_norm: float = 20.0
    warmup_steps: int = 50

    def __post_init__(self):
        if not 0 <= self.freeze_epochs < self.epochs:
            raise ValueError("freeze boundary must be below the total epoch count")
        if self.tau_start <= 0 or self.tau_end <= 0:
            raise ValueError("temperatures must be positive")
        if not self.seeds:
            raise ValueError("need at least one seed")

    @property
    def base_weight_lr(self):
        return self.weight_lr if self.weight_lr is not None else scaled_lr(self.batch_size)

    def tau(self, epoch: int) -> float:
        if epoch < self.freeze_epochs:
            return self.tau_start
        span = max(1, self.epochs - self.freeze_epochs - 1)
        t = min(1.0, (epoch - self.freeze_epochs) / span)
        return self.tau_start + (self.tau_end - self.tau_start) * t

    def arch_active(self, epoch: int) -> bool:
        return epoch >= self.freeze_epochs


@dataclass
class SearchState:
    detector: Detector
    params: dict
    weights: list
    arch: list
    weight_opt: SGD
    arch_opt: Adam
    rng: np.random.Generator
    step: int = 0
    log: list = field(default_factory=list)

    @property
    def neck(self) -> SearchNeck:
        return self.detector.neck


def make_search_state(neck: SearchNeck, schedule: SearchSchedule, rng: np.random.Generator,
                      config: Optional[DetectorConfig] = None, backbone="B0", head_depth=2) -> SearchState:
    det = Detector(config, backbone=backbone, neck=neck, width=neck.channels, head_depth=head_depth)
    specs = det.specs()
    params = det.init_params(rng)
    weights, arch = split_params(params, specs)
    w_opt = SGD(weights, lr=schedule.base_weight_lr, momentum=schedule.momentum,
                weight_decay=schedule.weight_decay)
    a_opt = Adam(arch, lr=schedule.arch_lr, betas=schedule.arch_betas)
    return SearchState(det, params, weights, arch, w_opt, a_opt, rng)


def _step(state, tensors, opt, images, boxes, tau, clip):
    ctx = SearchContext(rng=state.rng, temperature=tau)
    with Tape() as tape:
        loss = batch_loss(state.detector, state.params, images, boxes, ctx)
        grads = tape.gradient(loss, tensors)
    opt.step(clip_gradients(grads, clip))
    return float(loss.data)


def bilevel_epoch(state: SearchState, dataset, split: SearchSplit, schedule: SearchSchedule, epoch: int) -> dict:
    """One epoch: each weight-train batch is followed (once unfrozen) by one arch-train batch.

    The two updates never share a batch. Returns the epoch's log record.
    """
    if not 0 <= epoch < schedule.epochs:
        raise ValueError(f"epoch {epoch} outside schedule of {schedule.epochs}")
    tau = schedule.tau(epoch)
    active = schedule.arch_active(epoch)
    wtrain = np.asarray(split.weight_train)
    atrain = np.asarray(split.arch_train)
    w_batches = batches(len(wtrain), schedule.batch_size, state.rng)
    a_batches = batches(len(atrain), schedule.batch_size, state.rng) if active else []
    steps_per_epoch = len(w_batches)
    total = steps_per_epoch * schedule.epochs
    w_losses, a_losses = [], []
    for k, wb in enumerate(w_batches):
        lr = schedule.base_weight_lr * 0.5 * (1 + math.cos(math.pi * state.step / total))
        if state.step < schedule.warmup_steps:
            lr *= (state.step + 1) / schedule.warmup_steps
        state.weight_opt.lr = lr
        idx = wtrain[wb]
        images, boxes = augment(dataset.images[idx], [dataset.boxes[i] for i in idx], state.rng)
        try:
            w_losses.append(_step(state, state.weights, state.weight_opt, images, boxes, tau, schedule.clip_norm))
            if active:
                ab = atrain[a_batches[k % len(a_batches)]]
                images, boxes = dataset.images[ab], [dataset.boxes[i] for i in ab]
                a_losses.append(_step(state, state.arch, state.arch_opt, images, boxes, tau, None))
        except (NonFiniteError, ValueError) as exc:
            raise SearchDiverged(f"search diverged at epoch {epoch}, step {state.step}: {exc}") from exc
        state.step += 1
    record = {"epoch": epoch, "tau": tau, "arch_active": active,
              "weight_loss": float(np.mean(w_losses)),
              "arch_loss": float(np.mean(a_losses)) if a_losses else None}
    state.log.append(record)
    return record


def params_digest(params: dict) -> str:
    """SHA-256 over names and raw bytes, for replay checks."""
    h = hashlib.sha256()
    for name in sorted(params):
        h.update(name.encode())
        h.update(np.ascontiguousarray(params[name].data).tobytes())
    return h.hexdigest()
