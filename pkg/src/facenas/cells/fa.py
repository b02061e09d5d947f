"""Feature-aggregation cells and the top-down / bottom-up paths built from them.

A cell at pyramid level ``l`` mixes the pyramid feature ``F`` with a weighted
sum of previously aggregated candidates (each resized to ``l``)::

    C = f_post(beta0 * F + beta1 * f_pre(sum_j alpha_j * resize(C_j)))

In discrete mode the weights ``alpha_j`` become 0/1 membership of a retained
index set. A cell with an empty candidate pool reduces to ``f_post(beta0 * F)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from ..autodiff import Tensor, add, add_n, index, maxpool2, mul_scalar, softmax_t, upsample2x
from ..nn import ParamSpec, conv, conv_specs


@dataclass
class FeatureMap:
    """A (B, C, H, W) activation at pyramid level ``level`` (stride ``2**level``)."""

    tensor: Tensor
    level: int

    @property
    def stride(self):
        return 2 ** self.level

    @property
    def shape(self):
        return self.tensor.shape


def resize_to(feature: FeatureMap, target_level: int, levels: Optional[Sequence[int]] = None) -> FeatureMap:
    """Bring ``feature`` to ``target_level``: bilinear 2x up or stride-2 max-pool down, once per octave."""
    if levels is not None and target_level not in levels:
        raise ValueError(f"target level P{target_level} outside pyramid {list(levels)}")
    k = target_level - feature.level
    t = feature.tensor
    if k > 0:
        for _ in range(k):
            t = maxpool2(t)
    elif k < 0:
        for _ in range(-k):
            t = upsample2x(t)
    return FeatureMap(t, target_level)


def relax_alpha(alpha_logits: Tensor) -> Tensor:
    """Candidate probabilities: softmax of free logits at temperature 1."""
    return softmax_t(alpha_logits, 1.0)


def fa_cell_forward(
    feature: FeatureMap,
    candidates: Sequence[FeatureMap],
    beta: Tensor,
    p: Mapping[str, Tensor],
    name: str,
    mode: str = "continuous",
    alpha: Optional[Tensor] = None,
    retained: Optional[Sequence[int]] = None,
) -> FeatureMap:
    """One aggregation cell.

    Args:
        feature: the activated pyramid feature.
        candidates: aggregated features from earlier cells of the path.
        beta: (2,) weights for the pyramid and candidate branches, used raw.
        p: parameter mapping holding ``{name}.pre.*`` and ``{name}.post.*``.
        mode: "continuous" weighs candidates by ``alpha`` (a probability
            vector, one entry per candidate); "discrete" sums ``retained``.
    """
    lvl = feature.level
    f = mul_scalar(feature.tensor, index(beta, 0))
    if mode == "continuous":
        if candidates:
            if alpha is None or alpha.shape != (len(candidates),):
                raise ValueError(f"{name}: alpha must have one entry per candidate ({len(candidates)})")
            terms = [mul_scalar(resize_to(c, lvl).tensor, index(alpha, j)) for j, c in enumerate(candidates)]
            agg = add_n(terms)
        else:
            agg = None
    elif mode == "discrete":
        keep = list(retained or [])
        if any(j < 0 or j >= len(candidates) for j in keep):
            raise ValueError(f"{name}: retained index out of range for pool of {len(candidates)}")
        agg = add_n([resize_to(candidates[j], lvl).tensor for j in keep]) if keep else None
    else:
        raise ValueError(f"unknown FA mode {mode!r}")
    if agg is not None:
        if agg.shape[1] != f.shape[1]:
            raise ValueError(f"{name}: channel mismatch {agg.shape[1]} vs {f.shape[1]}")
        t = conv(p, f"{name}.pre", agg)
        f = add(f, mul_scalar(t, index(beta, 1)))
    return FeatureMap(conv(p, f"{name}.post", f), lvl)


def path_order(levels: Sequence[int], direction: str) -> list[int]:
    """Visit order: top-down starts at the deepest (coarsest) level."""
    if direction == "td":
        return sorted(levels, reverse=True)
    if direction == "bu":
        return sorted(levels)
    raise ValueError(f"unknown path direction {direction!r}")


def fa_path_specs(prefix: str, levels: Sequence[int], direction: str, channels: int,
                  kernel: int = 3, with_arch: bool = True) -> list[ParamSpec]:
    specs = []
    for k, lvl in enumerate(path_order(levels, direction)):
        name = f"{prefix}.{direction}.P{lvl}"
        if k > 0:
            # the cell starts as the identity on its pyramid feature and learns the candidate branch
            specs += conv_specs(f"{name}.pre", channels, channels, kernel, kernel, init="zeros")
        specs += conv_specs(f"{name}.post", channels, channels, kernel, kernel, init="dirac")
        if with_arch and k > 0:
            specs.append(ParamSpec(f"{name}.alpha", (k,), "zeros", arch=True))
        # beta is searched alongside alpha; in a discrete network it is an ordinary weight
        specs.append(ParamSpec(f"{name}.beta", (2,), "ones", arch=with_arch))
    return specs


def fa_path_forward(
    pyramid: Sequence[FeatureMap],
    p: Mapping[str, Tensor],
    prefix: str,
    direction: str,
    mode: str = "continuous",
    retained: Optional[Mapping[int, Sequence[int]]] = None,
    alphas: Optional[Mapping[int, Tensor]] = None,
) -> list[FeatureMap]:
    """Run one path; returns aggregated features in the same level order as ``pyramid``.

    Each produced feature is appended to the candidate pool, so the k-th visited
    cell (0-based) sees exactly k candidates. ``alphas`` overrides the relaxed
    logits per level (used to pin the architecture in tests).
    """
    by_level = {fm.level: fm for fm in pyramid}
    pool: list[FeatureMap] = []
    out = {}
    for k, lvl in enumerate(path_order(list(by_level), direction)):
        name = f"{prefix}.{direction}.P{lvl}"
        beta = p[f"{name}.beta"]
        alpha = None
        if mode == "continuous" and k > 0:
            alpha = alphas[lvl] if alphas is not None and lvl in alphas else relax_alpha(p[f"{name}.alpha"])
        keep = retained.get(lvl, []) if retained is not None else None
        c = fa_cell_forward(by_level[lvl], pool, beta, p, name, mode=mode, alpha=alpha, retained=keep)
        pool.append(c)
        out[lvl] = c
    return [out[fm.level] for fm in pyramid]


def discretize_fa(alpha: np.ndarray, threshold: float = 0.5) -> list[int]:
    """Retain every candidate with probability >= threshold; fall back to the argmax."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.size == 0:
        return []
    keep = [int(j) for j in np.flatnonzero(alpha >= threshold)]
    return keep if keep else [int(np.argmax(alpha))]
