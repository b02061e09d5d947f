"""Bi-level architecture search over AutoFA / AutoFE / joint necks."""
from .bilevel import (
    SearchDiverged,
    SearchSchedule,
    SearchSplit,
    SearchState,
    bilevel_epoch,
    make_search_state,
    params_digest,
    split_dataset,
)
from .driver import (
    SearchResult,
    SeedResult,
    combine_cascade,
    compare_fe_positions,
    compare_joint_cascade,
    inherited_detector,
    run_search,
    score_arch,
    search_once,
    select_best,
)

__all__ = [
    "SearchDiverged", "SearchResult", "SearchSchedule", "SearchSplit", "SearchState", "SeedResult",
    "bilevel_epoch", "combine_cascade", "compare_fe_positions", "compare_joint_cascade", "inherited_detector",
    "make_search_state", "params_digest", "run_search", "score_arch", "search_once", "select_best",
    "split_dataset",
]
