"""Synthetic face scenes: textured ellipses with eyes and a mouth over cluttered backgrounds.

Every image is drawn from its own child rng (``sub_seed(seed, "image", i)``),
so generation is deterministic and can be split across workers. Shapes are
rendered at 4x resolution and box-filtered down, which keeps tiny faces
visible and the output bit-stable.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from PIL import Image, ImageDraw

from ..rng import make_rng

FORMAT = "facenas.dataset"
VERSION = 1
SUPERSAMPLE = 4


@dataclass(frozen=True)
class SceneSpec:
    """Scene statistics.

    Face counts follow a geometric law on {1, 2, ...} with the given mean,
    capped at ``max_faces``. Relative scale (box height / image height) is
    log-uniform on ``scale_range``. ``clutter`` is the mean number of
    distractor shapes per image.
    """

    image_size: int = 64
    mean_faces: float = 6.0
    max_faces: int = 20
    scale_range: tuple = (0.05, 0.5)
    aspect_range: tuple = (1.1, 1.4)  # face height / width
    clutter: float = 8.0
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.scale_range
        if not 0 < lo < hi < 1:
            raise ValueError("scale range must satisfy 0 < lo < hi < 1")
        if self.mean_faces < 1 or self.max_faces < 1:
            raise ValueError("face counts must be at least 1")
        if self.image_size < 8:
            raise ValueError("image size too small")
        if self.clutter < 0:
            raise ValueError("clutter density must be non-negative")


def sample_face_count(rng, spec: SceneSpec) -> int:
    return int(min(rng.geometric(1.0 / spec.mean_faces), spec.max_faces))


def sample_scales(rng, spec: SceneSpec, n: int) -> np.ndarray:
    lo, hi = np.log(spec.scale_range[0]), np.log(spec.scale_range[1])
    return np.exp(rng.uniform(lo, hi, size=n))


def log_uniform_cdf(x, lo, hi):
    x = np.clip(np.asarray(x, dtype=np.float64), lo, hi)
    return np.log(x / lo) / np.log(hi / lo)


def _background(rng, size):
    # smooth colour field: bilinear blow-up of a coarse random grid plus pixel noise
    coarse = rng.uniform(40, 215, size=(4, 4, 3)).astype(np.uint8)
    img = Image.fromarray(coarse, "RGB").resize((size, size), Image.BILINEAR)
    arr = np.asarray(img, dtype=np.float64) + rng.normal(0, 6, size=(size, size, 3))
    return np.clip(arr, 0, 255)


def _draw_clutter(draw, rng, n, big):
    for _ in range(n):
        w, h = rng.uniform(0.05, 0.4, size=2) * big
        x, y = rng.uniform(0, big - w), rng.uniform(0, big - h)
        color = tuple(int(c) for c in rng.integers(0, 256, size=3))
        kind = rng.integers(3)
        box = [x, y, x + w, y + h]
        if kind == 0:
            draw.rectangle(box, fill=color)
        elif kind == 1:
            draw.ellipse(box, fill=color)
        else:
            draw.line(box, fill=color, width=max(1, int(rng.uniform(0.5, 2.5) * SUPERSAMPLE)))


def _draw_face(draw, rng, box):
    x1, y1, x2, y2 = box
    w, h = x2 - x1, y2 - y1
    tone = rng.uniform(0.55, 1.0)
    skin = tuple(int(v) for v in (np.array([235, 190, 150]) * tone + rng.normal(0, 8, 3)).clip(0, 255))
    draw.ellipse([x1, y1, x2, y2], fill=skin)
    dark = tuple(int(v) for v in rng.integers(10, 60, size=3))
    ew, eh = 0.16 * w, 0.12 * h
    ey = y1 + 0.38 * h
    for ex in (x1 + 0.32 * w, x1 + 0.68 * w):
        draw.ellipse([ex - ew / 2, ey - eh / 2, ex + ew / 2, ey + eh / 2], fill=dark)
    my = y1 + 0.72 * h
    draw.rectangle([x1 + 0.35 * w, my - 0.04 * h, x1 + 0.65 * w, my + 0.04 * h], fill=(150, 40, 50))


def render_image(spec: SceneSpec, index: int):
    """One (uint8 H x W x 3 image, (K, 4) float boxes) pair."""
    rng = make_rng(spec.seed, "image", index)
    size = spec.image_size
    big = size * SUPERSAMPLE
    n = sample_face_count(rng, spec)
    scales = sample_scales(rng, spec, n)
    aspects = rng.uniform(*spec.aspect_range, size=n)
    boxes = []
    for s, a in zip(scales, aspects):
        h = s * size
        w = h / a
        cx = rng.uniform(w / 2, size - w / 2)
        cy = rng.uniform(h / 2, size - h / 2)
        boxes.append([cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2])
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)

    bg = _background(rng, big)
    canvas = Image.fromarray(bg.astype(np.uint8), "RGB")
    draw = ImageDraw.Draw(canvas)
    _draw_clutter(draw, rng, int(rng.poisson(spec.clutter)), big)
    # large faces first so small ones stay on top
    for k in np.argsort(-(boxes[:, 3] - boxes[:, 1]), kind="stable"):
        _draw_face(draw, rng, [v * SUPERSAMPLE for v in boxes[k]])
    img = canvas.resize((size, size), Image.BOX)
    arr = np.asarray(img, dtype=np.float64) + rng.normal(0, 3, size=(size, size, 3))
    return np.clip(np.round(arr), 0, 255).astype(np.uint8), boxes


@dataclass
class Dataset:
    """In-memory dataset: (N, H, W, 3) uint8 images and per-image (K, 4) boxes."""

    images: np.ndarray
    boxes: list

    def __len__(self):
        return len(self.images)

    def subset(self, idx) -> "Dataset":
        idx = list(idx)
        return Dataset(self.images[idx], [self.boxes[i] for i in idx])

    @property
    def image_size(self):
        return self.images.shape[1:3]


def _render_range(args):
    spec, lo, hi = args
    return [render_image(spec, i) for i in range(lo, hi)]


def generate(spec: SceneSpec, n_images: int, jobs: int = 1) -> Dataset:
    if n_images < 1:
        raise ValueError("need at least one image")
    jobs = max(1, min(jobs, n_images))
    if jobs == 1:
        items = _render_range((spec, 0, n_images))
    else:
        cuts = np.linspace(0, n_images, jobs + 1).astype(int)
        with ProcessPoolExecutor(jobs) as pool:
            parts = pool.map(_render_range, [(spec, int(a), int(b)) for a, b in zip(cuts[:-1], cuts[1:])])
            items = [it for part in parts for it in part]
    return Dataset(np.stack([im for im, _ in items]), [b for _, b in items])


def save_dataset(ds: Dataset, root, spec: SceneSpec | None = None):
    """PNG per image under ``root/images`` plus ``root/annotations.json``."""
    os.makedirs(os.path.join(root, "images"), exist_ok=True)
    records = []
    for i, (img, boxes) in enumerate(zip(ds.images, ds.boxes)):
        name = f"images/{i:05d}.png"
        Image.fromarray(img, "RGB").save(os.path.join(root, name), format="PNG", optimize=False, compress_level=6)
        records.append({"file": name, "height": int(img.shape[0]), "width": int(img.shape[1]),
                        "boxes": [[float(v) for v in b] for b in boxes]})
    doc = {"format": FORMAT, "version": VERSION, "spec": None if spec is None else asdict(spec), "images": records}
    with open(os.path.join(root, "annotations.json"), "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_dataset(root) -> Dataset:
    path = os.path.join(root, "annotations.json")
    if not os.path.exists(path):
        raise FileNotFoundError(f"no dataset at {root} (missing annotations.json)")
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != FORMAT or doc.get("version") != VERSION:
        raise ValueError(f"{path} is not a version-{VERSION} {FORMAT} document")
    images, boxes = [], []
    for rec in doc["images"]:
        with Image.open(os.path.join(root, rec["file"])) as im:
            images.append(np.asarray(im.convert("RGB"), dtype=np.uint8))
        boxes.append(np.asarray(rec["boxes"], dtype=np.float64).reshape(-1, 4))
    return Dataset(np.stack(images), boxes)


def relative_scales(ds: Dataset) -> np.ndarray:
    h = ds.images.shape[1]
    return np.concatenate([(b[:, 3] - b[:, 1]) / h for b in ds.boxes]) if ds.boxes else np.zeros(0)


def ks_distance_log_uniform(samples, lo, hi) -> float:
    x = np.sort(np.asarray(samples, dtype=np.float64))
    n = len(x)
    cdf = log_uniform_cdf(x, lo, hi)
    return float(max(np.max(np.arange(1, n + 1) / n - cdf), np.max(cdf - np.arange(n) / n)))


def scale_thresholds(spec: SceneSpec):
    """Tercile cut points of the log-uniform scale law (medium and easy floors)."""
    lo, hi = spec.scale_range
    r = math.log(hi / lo)
    return lo * math.exp(r / 3), lo * math.exp(2 * r / 3)


def subset_floors(spec: SceneSpec) -> dict:
    """Minimum relative scale counted by each nested subset."""
    medium, easy = scale_thresholds(spec)
    return {"easy": easy, "medium": medium, "hard": 0.0}
