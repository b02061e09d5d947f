"""AutoFAE necks: FA paths and per-level FE cells composed in one of three orders.

``fe_position`` places the enhancement cells before the top-down path, between
the two paths ("middle"), or after the bottom-up path. The bottom-up path uses
the top-down outputs as its pyramid and starts with a fresh candidate pool.
"""
from __future__ import annotations

from typing import Mapping, Optional, Sequence

import numpy as np

from ..autodiff import Tensor
from .arch import DiscreteArch, FaLevel
from .fa import FeatureMap, discretize_fa, fa_path_forward, fa_path_specs, path_order, relax_alpha
from .fe import (
    FeDag,
    SearchContext,
    discretize_fe,
    fe_arch_arrays,
    fe_cell_forward,
    fe_cell_specs,
    fe_dag_specs,
    get_opset,
)

TARGETS = ("fa", "fe", "joint")


def _apply_fe(pyramid, p, prefix, mode, num_nodes, ops, dags, ctx):
    out = []
    for fm in pyramid:
        name = f"{prefix}.fe.P{fm.level}"
        dag = dags[fm.level] if dags is not None else None
        t = fe_cell_forward(fm.tensor, p, name, num_nodes, mode=mode, ops=ops, dag=dag, ctx=ctx)
        out.append(FeatureMap(t, fm.level))
    return out


def autofae_forward(
    pyramid: Sequence[FeatureMap],
    p: Mapping[str, Tensor],
    prefix: str,
    *,
    use_fa: bool = True,
    fe_position: Optional[str] = "middle",
    mode: str = "discrete",
    fa_retained: Optional[Mapping[str, Mapping[int, Sequence[int]]]] = None,
    fe_dags: Optional[Mapping[int, FeDag]] = None,
    num_nodes: int = 4,
    ops=None,
    ctx: Optional[SearchContext] = None,
    alphas: Optional[Mapping[str, Mapping[int, Tensor]]] = None,
) -> list[FeatureMap]:
    """(FE?) -> top-down FA -> (FE?) -> bottom-up FA -> (FE?).

    ``mode`` is "search" (continuous FA, Gumbel FE) or "discrete".
    ``fe_position=None`` skips enhancement entirely; ``use_fa=False`` skips
    both aggregation paths.
    """
    if fe_position not in (None, "before", "middle", "after"):
        raise ValueError(f"bad fe_position {fe_position!r}")
    ops = ops if ops is not None else get_opset("full")
    fa_mode = "continuous" if mode == "search" else "discrete"
    fe_mode = "search" if mode == "search" else "discrete"
    if fa_mode == "discrete" and use_fa and fa_retained is None:
        raise ValueError("discrete FA needs retained index sets")
    feats = list(pyramid)

    def fe(fs):
        return _apply_fe(fs, p, prefix, fe_mode, num_nodes, ops, fe_dags, ctx)

    if fe_position == "before":
        feats = fe(feats)
    if use_fa:
        feats = fa_path_forward(feats, p, prefix, "td", mode=fa_mode,
                                retained=None if fa_retained is None else fa_retained["td"],
                                alphas=None if alphas is None else alphas.get("td"))
    if fe_position == "middle":
        feats = fe(feats)
    if use_fa:
        feats = fa_path_forward(feats, p, prefix, "bu", mode=fa_mode,
                                retained=None if fa_retained is None else fa_retained["bu"],
                                alphas=None if alphas is None else alphas.get("bu"))
    if fe_position == "after":
        feats = fe(feats)
    return feats


class SearchNeck:
    """Continuous neck used while searching.

    ``target`` picks what is searched: "fa" (aggregation paths only), "fe"
    (enhancement cells only, no aggregation) or "joint" (both at once).
    """

    def __init__(self, levels, channels, target="joint", fe_position="middle", num_nodes=4,
                 opset="full", prefix="neck.b0", full_edge_grad=False, fa_kernel=3):
        if target not in TARGETS:
            raise ValueError(f"unknown search target {target!r}")
        self.levels = list(levels)
        self.channels = channels
        self.target = target
        self.fe_position = fe_position if target != "fa" else None
        self.num_nodes = num_nodes
        self.opset = opset
        self.ops = get_opset(opset)
        self.prefix = prefix
        self.full_edge_grad = full_edge_grad
        self.fa_kernel = fa_kernel

    @property
    def use_fa(self):
        return self.target in ("fa", "joint")

    def specs(self):
        specs = []
        if self.use_fa:
            for d in ("td", "bu"):
                specs += fa_path_specs(self.prefix, self.levels, d, self.channels, kernel=self.fa_kernel)
        if self.fe_position is not None:
            for lvl in self.levels:
                specs += fe_cell_specs(f"{self.prefix}.fe.P{lvl}", self.channels, self.num_nodes, self.ops)
        return specs

    def forward(self, p, pyramid, ctx: Optional[SearchContext] = None, alphas=None):
        ctx = ctx or SearchContext()
        ctx.full_edge_grad = self.full_edge_grad
        return autofae_forward(pyramid, p, self.prefix, use_fa=self.use_fa, fe_position=self.fe_position,
                               mode="search", num_nodes=self.num_nodes, ops=self.ops, ctx=ctx, alphas=alphas)

    def discretize(self, p: Mapping[str, Tensor], meta=None) -> DiscreteArch:
        fa = None
        if self.use_fa:
            fa = {}
            for d in ("td", "bu"):
                cells = {}
                for k, lvl in enumerate(path_order(self.levels, d)):
                    name = f"{self.prefix}.{d}.P{lvl}"
                    keep = discretize_fa(relax_alpha(p[f"{name}.alpha"]).data) if k > 0 else []
                    cells[lvl] = FaLevel(keep, [float(b) for b in np.asarray(p[f"{name}.beta"].data)])
                fa[d] = cells
        fe = None
        if self.fe_position is not None:
            fe = {}
            for lvl in self.levels:
                kappa, gamma = fe_arch_arrays(p, f"{self.prefix}.fe.P{lvl}", self.num_nodes)
                fe[lvl] = discretize_fe(kappa, gamma, self.ops)
        kind = {"fa": "FA", "fe": "FE", "joint": "FAE"}[self.target]
        return DiscreteArch(
            levels=list(self.levels), fa=fa, fe=fe,
            fe_position=self.fe_position or "none", num_nodes=self.num_nodes,
            opset=self.opset, stack=[kind], meta=dict(meta or {}), fa_kernel=self.fa_kernel,
        ).validate()


class DiscreteNeck:
    """A stack of discrete AutoFAE blocks sharing one architecture, each with its own weights.

    Block ``k`` lives under ``{prefix}.b{k}``; block kinds come from
    ``stack`` (defaults to ``arch.stack``).
    """

    def __init__(self, arch: DiscreteArch, channels: int, prefix="neck", stack=None):
        self.arch = arch
        self.channels = channels
        self.prefix = prefix
        self.stack = list(stack if stack is not None else arch.stack)
        arch.with_stack(self.stack)

    def block_prefix(self, k):
        return f"{self.prefix}.b{k}"

    def specs(self):
        specs = []
        for k, kind in enumerate(self.stack):
            pre = self.block_prefix(k)
            if "FA" in kind:
                for d in ("td", "bu"):
                    specs += fa_path_specs(pre, self.arch.levels, d, self.channels, kernel=self.arch.fa_kernel,
                                           with_arch=False)
            if kind in ("FAE", "FE"):
                for lvl in self.arch.levels:
                    specs += fe_dag_specs(f"{pre}.fe.P{lvl}", self.channels, self.arch.fe[lvl])
        return specs

    def initial_values(self, beta_mode="trained"):
        """Overrides for freshly initialised params: the retained beta values.

        ``beta_mode="init"`` keeps beta at its initial (1, 1) instead.
        """
        out = {}
        if beta_mode not in ("trained", "init"):
            raise ValueError(f"bad beta_mode {beta_mode!r}")
        if beta_mode == "init" or self.arch.fa is None:
            return out
        for k, kind in enumerate(self.stack):
            if "FA" not in kind:
                continue
            for d, cells in self.arch.fa.items():
                for lvl, cell in cells.items():
                    out[f"{self.block_prefix(k)}.{d}.P{lvl}.beta"] = np.asarray(cell.beta)
        return out

    def forward(self, p, pyramid, ctx=None):
        feats = list(pyramid)
        retained = None
        if self.arch.fa is not None:
            retained = {d: {lvl: c.retained for lvl, c in cells.items()} for d, cells in self.arch.fa.items()}
        position = self.arch.fe_position if self.arch.fe_position != "none" else "middle"
        for k, kind in enumerate(self.stack):
            feats = autofae_forward(
                feats, p, self.block_prefix(k),
                use_fa="FA" in kind,
                fe_position=position if kind in ("FAE", "FE") else None,
                mode="discrete", fa_retained=retained, fe_dags=self.arch.fe,
                num_nodes=self.arch.num_nodes,
            )
        return feats


class IdentityNeck:
    def specs(self):
        return []

    def forward(self, p, pyramid, *args, **kwargs):
        return list(pyramid)
