"""Feature-enhancement cells: per-level DAGs searched with a straight-through Gumbel estimator.

Node 0 is the cell input. Every later node ``i`` takes exactly one earlier node
``j`` through a mixed operation; the cell output is the sum of leaf nodes (nodes
no later node takes as input).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Optional, Sequence

import numpy as np

from ..autodiff import Tensor, add_n, index, mul_scalar, softmax_t, straight_through
from ..autodiff.ops import add_const, conv2d
from ..nn import ParamSpec


class Op(NamedTuple):
    name: str
    kh: int
    kw: int
    dilation: int = 1


# candidate transforms; all preserve channels and spatial size
BASE_OPS = (
    Op("1x1", 1, 1),
    Op("1x3", 1, 3),
    Op("3x1", 3, 1),
    Op("3x3", 3, 3),
    Op("1x5", 1, 5),
    Op("5x1", 5, 1),
    Op("5x5", 5, 5),
)
DILATED_OPS = (Op("3x3_r2", 3, 3, 2), Op("3x3_r3", 3, 3, 3))
FULL_OPS = BASE_OPS + DILATED_OPS


def get_opset(name: str = "full") -> tuple:
    if name == "full":
        return FULL_OPS
    if name == "base":
        return BASE_OPS
    raise ValueError(f"unknown op set {name!r} (expected 'full' or 'base')")


def op_by_name(name: str) -> Op:
    for op in FULL_OPS:
        if op.name == name:
            return op
    raise KeyError(f"unknown FE operation {name!r}")


def apply_op(x: Tensor, op: Op, w: Tensor) -> Tensor:
    return conv2d(x, w, None, stride=1, dilation=op.dilation)


def mixed_op_weighted(x: Tensor, probs: Tensor, weights: Sequence[Tensor], ops: Sequence[Op]) -> Tensor:
    """sum_o probs[o] * op_o(x) with an explicit probability vector."""
    if len(weights) != len(ops) or probs.shape != (len(ops),):
        raise ValueError("mixed op needs one weight tensor and one probability per operation")
    terms = []
    for o, (op, w) in enumerate(zip(ops, weights)):
        if w.shape != (x.shape[1], x.shape[1], op.kh, op.kw):
            raise ValueError(f"op {op.name}: weight shape {w.shape} does not match {x.shape[1]} channels")
        terms.append(mul_scalar(apply_op(x, op, w), index(probs, o)))
    return add_n(terms)


def mixed_op(x: Tensor, gamma: Tensor, weights: Sequence[Tensor], ops: Sequence[Op]) -> Tensor:
    """Operation mixture weighted by ``softmax(gamma)``."""
    return mixed_op_weighted(x, softmax_t(gamma, 1.0), weights, ops)


def sample_gumbel(shape, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(shape)
    # u in [0, 1); nudge away from 0 so both logs stay finite
    u = np.clip(u, np.finfo(np.float64).tiny, 1.0 - 1e-16)
    return -np.log(-np.log(u))


def gumbel_edge_select(kappa: Tensor, temperature: float, rng: Optional[np.random.Generator] = None,
                       noise: Optional[np.ndarray] = None):
    """Straight-through Gumbel-max choice over one column of connection logits.

    Returns ``(choice, h)`` where ``h`` is a tensor whose forward value is the
    hard one-hot of ``argmax(kappa + o)`` and whose gradient is that of
    ``softmax((kappa + o) / temperature)``.
    """
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    if kappa.size == 0:
        raise ValueError("empty connection logits")
    if noise is None:
        if rng is None:
            raise ValueError("need an rng or explicit noise")
        noise = sample_gumbel(kappa.shape, rng)
    noise = np.asarray(noise, dtype=kappa.dtype)
    perturbed = add_const(kappa, noise)
    soft = softmax_t(perturbed, temperature)
    choice = int(np.argmax(kappa.data + noise))
    hard = np.zeros(kappa.shape, dtype=kappa.dtype)
    hard[choice] = 1.0
    return choice, straight_through(hard, soft)


@dataclass
class FeDag:
    """Discrete enhancement cell: ``parents[i-1]`` and ``ops[i-1]`` describe node ``i``."""

    parents: list
    ops: list

    @property
    def num_nodes(self):
        return len(self.parents) + 1

    def edges(self):
        return [(j, i + 1, op) for i, (j, op) in enumerate(zip(self.parents, self.ops))]

    def leaves(self):
        return leaf_nodes(self.parents)

    def validate(self):
        for i, j in enumerate(self.parents, start=1):
            if not 0 <= j < i:
                raise ValueError(f"node {i} takes input from node {j}; edges must go from lower to higher index")
        for name in self.ops:
            op_by_name(name)


def leaf_nodes(parents: Sequence[int]) -> list[int]:
    """Nodes (index >= 1) that no later node takes as input."""
    used = set(parents)
    return [i for i in range(1, len(parents) + 1) if i not in used]


def fe_cell_specs(prefix: str, channels: int, num_nodes: int, ops: Sequence[Op]) -> list[ParamSpec]:
    """Search-mode parameters: every edge j->i carries every op, plus kappa / gamma."""
    specs = []
    for i in range(1, num_nodes):
        specs.append(ParamSpec(f"{prefix}.kappa{i}", (i,), "zeros", arch=True))
        for j in range(i):
            specs.append(ParamSpec(f"{prefix}.gamma{j}_{i}", (len(ops),), "zeros", arch=True))
            for op in ops:
                specs.append(ParamSpec(f"{prefix}.e{j}_{i}.{op.name}.w", (channels, channels, op.kh, op.kw), "linear"))
    return specs


def fe_dag_specs(prefix: str, channels: int, dag: FeDag) -> list[ParamSpec]:
    """Discrete-mode parameters: only the chosen op on each chosen edge.

    Every op starts as the identity kernel and edges into leaves are scaled by
    1/leaves, so a fresh cell returns its input unchanged.
    """
    specs = []
    leaves = set(dag.leaves())
    for j, i, name in dag.edges():
        op = op_by_name(name)
        gain = 1.0 / len(leaves) if i in leaves else 1.0
        specs.append(ParamSpec(f"{prefix}.e{j}_{i}.{name}.w", (channels, channels, op.kh, op.kw), "dirac", gain=gain))
    return specs


@dataclass
class SearchContext:
    """Randomness and temperature for search-mode forwards.

    ``pinned`` maps a cell prefix to per-node Gumbel noise arrays, replacing
    sampling (used to replay or force choices).
    """

    rng: Optional[np.random.Generator] = None
    temperature: float = 1.0
    pinned: dict = field(default_factory=dict)
    full_edge_grad: bool = False
    choices: dict = field(default_factory=dict)


def fe_cell_forward(x: Tensor, p: Mapping[str, Tensor], prefix: str, num_nodes: int,
                    mode: str = "search", ops: Sequence[Op] = FULL_OPS,
                    dag: Optional[FeDag] = None, ctx: Optional[SearchContext] = None) -> Tensor:
    """Evaluate one enhancement cell on ``x``.

    In search mode each node draws its input edge with :func:`gumbel_edge_select`
    and applies the gamma-weighted op mixture. Only the selected edge is
    evaluated (its output is scaled by the straight-through indicator, which is
    exactly 1 in the forward pass); with ``ctx.full_edge_grad`` every incoming
    edge is evaluated and weighted by the indicator vector instead.
    """
    if mode == "discrete":
        if dag is None:
            raise ValueError("discrete FE cell needs a DAG")
        dag.validate()
        feats = [x]
        for j, i, name in dag.edges():
            op = op_by_name(name)
            feats.append(apply_op(feats[j], op, p[f"{prefix}.e{j}_{i}.{name}.w"]))
        return add_n([feats[i] for i in dag.leaves()])
    if mode != "search":
        raise ValueError(f"unknown FE mode {mode!r}")
    if num_nodes < 2:
        raise ValueError("an FE cell needs at least 2 nodes")
    ctx = ctx or SearchContext()
    pinned = ctx.pinned.get(prefix)
    feats = [x]
    parents = []
    for i in range(1, num_nodes):
        kappa = p[f"{prefix}.kappa{i}"]
        noise = pinned[i - 1] if pinned is not None else None
        choice, h = gumbel_edge_select(kappa, ctx.temperature, ctx.rng, noise)
        parents.append(choice)

        def edge(j):
            w = [p[f"{prefix}.e{j}_{i}.{op.name}.w"] for op in ops]
            return mixed_op(feats[j], p[f"{prefix}.gamma{j}_{i}"], w, ops)

        if ctx.full_edge_grad:
            node = add_n([mul_scalar(edge(j), index(h, j)) for j in range(i)])
        else:
            node = mul_scalar(edge(choice), index(h, choice))
        feats.append(node)
    ctx.choices[prefix] = parents
    return add_n([feats[i] for i in leaf_nodes(parents)])


def discretize_fe(kappa: Sequence[np.ndarray], gamma: Mapping[tuple, np.ndarray], ops: Sequence[Op]) -> FeDag:
    """Keep argmax-kappa edge per node and the argmax-gamma op on it.

    ``kappa[i-1]`` is the logit column for node ``i``; ``gamma[(j, i)]`` the op
    logits of edge j->i.
    """
    parents, names = [], []
    for i, col in enumerate(kappa, start=1):
        j = int(np.argmax(np.asarray(col)))
        parents.append(j)
        names.append(ops[int(np.argmax(np.asarray(gamma[(j, i)])))].name)
    dag = FeDag(parents, names)
    dag.validate()
    return dag


def fe_arch_arrays(p: Mapping[str, Tensor], prefix: str, num_nodes: int):
    kappa = [np.asarray(p[f"{prefix}.kappa{i}"].data) for i in range(1, num_nodes)]
    gamma = {(j, i): np.asarray(p[f"{prefix}.gamma{j}_{i}"].data) for i in range(1, num_nodes) for j in range(i)}
    return kappa, gamma
