"""Time the compiled and numpy kernel backends on detector-sized inputs.

    python3 bench/bench_kernels.py [--repeat 5] [--json out.json]

Each row is the best of ``--repeat`` timings of a loop of calls; the last row
is one full training step of the toy detector under each backend.
"""
import argparse
import json
import timeit

import numpy as np

from facenas import kernels
from facenas.autodiff import SGD
from facenas.databench import SceneSpec, generate
from facenas.detector import Detector
from facenas.detector.train import gradient_step


def conv_geometry(h, w, k, dilation=1):
    pad = (k - 1) * dilation
    return pad // 2, pad // 2, h, w


def kernel_cases(rng):
    x = rng.standard_normal((16, 16, 32, 32)).astype(np.float32)
    top, left, oh, ow = conv_geometry(32, 32, 3)
    cols = kernels.python_backend.im2col(x, 3, 3, 1, 1, top, left, oh, ow)
    pooled, idx = kernels.python_backend.maxpool2_forward(x)
    grad = rng.standard_normal(pooled.shape).astype(np.float32)
    xy = rng.uniform(0, 60, (400, 2))
    boxes_a = np.concatenate([xy, xy + rng.uniform(2, 20, (400, 2))], axis=1)
    xy = rng.uniform(0, 60, (30, 2))
    boxes_b = np.concatenate([xy, xy + rng.uniform(2, 20, (30, 2))], axis=1)
    xy = rng.uniform(0, 60, (2000, 2))
    nms_boxes = np.concatenate([xy, xy + rng.uniform(2, 20, (2000, 2))], axis=1)
    return {
        "im2col 16x16x32x32 k3": lambda: kernels.im2col(x, 3, 3, 1, 1, top, left, oh, ow),
        "col2im 16x16x32x32 k3": lambda: kernels.col2im(cols, x.shape, 3, 3, 1, 1, top, left, oh, ow),
        "maxpool2 forward": lambda: kernels.maxpool2_forward(x),
        "maxpool2 backward": lambda: kernels.maxpool2_backward(grad, idx, 32, 32),
        "iou_matrix 400x30": lambda: kernels.iou_matrix(boxes_a, boxes_b),
        "nms_sorted 2000": lambda: kernels.nms_sorted(nms_boxes, 0.4),
    }


def training_step_case(rng):
    data = generate(SceneSpec(seed=0), 16)
    det = Detector(width=16)
    params = det.init_params(rng)
    weights = list(params.values())
    opt = SGD(weights, lr=0.0)
    return lambda: gradient_step(det, params, weights, opt, data.images, data.boxes)


def best_time(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--json", help="also write the results here")
    args = parser.parse_args()
    if kernels.compiled_backend is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation` first")

    rng = np.random.default_rng(0)
    cases = kernel_cases(rng)
    cases["detector training step (batch 16)"] = training_step_case(rng)
    rows = []
    for name, fn in cases.items():
        number = 1 if name.startswith("detector") else 20
        times = {}
        for backend in ("python", "cython"):
            kernels.use_backend(backend)
            fn()
            times[backend] = best_time(fn, args.repeat, number)
        rows.append({"case": name, "python_ms": times["python"] * 1e3, "cython_ms": times["cython"] * 1e3,
                     "speedup": times["python"] / times["cython"]})
    kernels.use_backend("cython")

    print(f"| {'case':<36} | {'python ms':>10} | {'cython ms':>10} | {'speedup':>7} |")
    print(f"|{'-' * 38}|{'-' * 12}|{'-' * 12}|{'-' * 9}|")
    for r in rows:
        print(f"| {r['case']:<36} | {r['python_ms']:>10.3f} | {r['cython_ms']:>10.3f} | {r['speedup']:>6.2f}x |")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=1)


if __name__ == "__main__":
    main()
