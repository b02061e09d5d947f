"""Mini-batch training and inference for detectors."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..autodiff import SGD, NonFiniteError, Tape
from ..autodiff.ops import sigmoid_np
from .loss import build_targets, detection_loss
from .model import images_to_input
from .postprocess import decode_and_nms

BASE_LR = 0.01
BASE_BATCH = 32


def scaled_lr(batch_size: int, base: float = BASE_LR) -> float:
    """Linear scaling of the per-32-images learning rate."""
    return base * batch_size / BASE_BATCH


@dataclass(frozen=True)
class TrainSchedule:
    epochs: int = 12
    batch_size: int = 16
    lr: Optional[float] = None  # None -> scaled_lr(batch_size)
    momentum: float = 0.9
    weight_decay: float = 5e-4
    milestones: tuple = (0.6, 0.8)  # fractions of training where lr drops 10x
    warmup_steps: int = 50
    flip: bool = True
    clip_norm: float = 20.0

    @property
    def base_lr(self):
        return self.lr if self.lr is not None else scaled_lr(self.batch_size)

    def lr_at(self, step: int, total_steps: int) -> float:
        lr = self.base_lr
        for m in self.milestones:
            if step >= m * total_steps:
                lr *= 0.1
        if self.warmup_steps and step < self.warmup_steps:
            lr *= (step + 1) / self.warmup_steps
        return lr


def batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def augment(images, boxes, rng):
    """Random horizontal flip per image."""
    images = images.copy()
    boxes = [np.asarray(b, dtype=np.float64).reshape(-1, 4).copy() for b in boxes]
    width = images.shape[2]
    for k in np.flatnonzero(rng.random(len(images)) < 0.5):
        images[k] = images[k, :, ::-1]
        boxes[k][:, [0, 2]] = width - boxes[k][:, [2, 0]]
    return images, boxes


def batch_loss(det, p, images, boxes, ctx=None):
    """Detection loss of ``det`` on one batch (records onto the active tape)."""
    x = images_to_input(images)
    cls, box = det.forward(p, x, ctx)
    anchors = det.anchors(*images.shape[1:3])
    labels, targets, pos = build_targets(anchors, boxes, det.config.match_threshold)
    return detection_loss(cls, box, labels, targets, pos)


def clip_gradients(grads, max_norm):
    if not max_norm:
        return grads
    norm = math.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads))
    if norm > max_norm:
        return [g * (max_norm / norm) for g in grads]
    return grads


def gradient_step(det, p, params, optimizer, images, boxes, ctx=None, clip_norm=None):
    """One forward/backward/update; returns the loss value."""
    with Tape() as tape:
        loss = batch_loss(det, p, images, boxes, ctx)
        grads = tape.gradient(loss, params)
    optimizer.step(clip_gradients(grads, clip_norm))
    return float(loss.data)


def train_detector(det, params: dict, dataset, schedule: TrainSchedule, rng: np.random.Generator,
                   log: Optional[Callable[[dict], None]] = None) -> list[float]:
    """Train every tensor in ``params`` in place; returns mean loss per epoch."""
    weights = list(params.values())
    opt = SGD(weights, lr=schedule.base_lr, momentum=schedule.momentum, weight_decay=schedule.weight_decay)
    steps_per_epoch = math.ceil(len(dataset) / schedule.batch_size)
    total = steps_per_epoch * schedule.epochs
    step = 0
    history = []
    for epoch in range(schedule.epochs):
        losses = []
        for idx in batches(len(dataset), schedule.batch_size, rng):
            images, boxes = dataset.images[idx], [dataset.boxes[i] for i in idx]
            if schedule.flip:
                images, boxes = augment(images, boxes, rng)
            opt.lr = schedule.lr_at(step, total)
            try:
                losses.append(gradient_step(det, params, weights, opt, images, boxes, clip_norm=schedule.clip_norm))
            except NonFiniteError as exc:
                raise NonFiniteError(f"training diverged at epoch {epoch}, step {step}: {exc}") from exc
            step += 1
        history.append(float(np.mean(losses)))
        if log is not None:
            log({"epoch": epoch, "loss": history[-1], "lr": opt.lr})
    return history


def predict(det, params, images, batch_size: int = 32, ctx=None):
    """Per-image (boxes, scores) after decoding and NMS."""
    anchors = det.anchors(*images.shape[1:3])
    out = []
    for i in range(0, len(images), batch_size):
        cls, box = det.forward(params, images_to_input(images[i:i + batch_size]), ctx)
        scores = sigmoid_np(cls.data[..., 0].astype(np.float64))
        for s, d in zip(scores, box.data):
            out.append(decode_and_nms(s, d, anchors, det.config))
    return out


def evaluate(det, params, dataset, subset_floors=None, batch_size: int = 32, ctx=None):
    from ..databench.metrics import compute_ap

    dets = predict(det, params, dataset.images, batch_size, ctx)
    return compute_ap(dets, dataset.boxes, image_height=dataset.images.shape[1], subset_floors=subset_floors)
