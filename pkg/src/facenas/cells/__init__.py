"""Searchable feature aggregation (FA) and enhancement (FE) cells."""
from .arch import DiscreteArch, FaLevel
from .fa import FeatureMap, discretize_fa, fa_cell_forward, fa_path_forward, relax_alpha, resize_to
from .fe import (
    BASE_OPS,
    FULL_OPS,
    FeDag,
    SearchContext,
    discretize_fe,
    fe_cell_forward,
    gumbel_edge_select,
    get_opset,
    leaf_nodes,
    mixed_op,
    mixed_op_weighted,
)
from .neck import DiscreteNeck, IdentityNeck, SearchNeck, autofae_forward

__all__ = [
    "BASE_OPS", "DiscreteArch", "DiscreteNeck", "FULL_OPS", "FaLevel", "FeDag", "FeatureMap",
    "IdentityNeck", "SearchContext", "SearchNeck", "autofae_forward", "discretize_fa", "discretize_fe",
    "fa_cell_forward", "fa_path_forward", "fe_cell_forward", "get_opset", "gumbel_edge_select",
    "leaf_nodes", "mixed_op", "mixed_op_weighted", "relax_alpha", "resize_to",
]
