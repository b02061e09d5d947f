"""Synthetic face data, AP evaluation and probing experiments."""
from .metrics import IOU_THRESHOLDS, EvalReport, average_precision, compute_ap, evaluate_ap, match_image
from .probes import (
    REFERENCE_MODULES,
    adjacent_pairs,
    direction_means,
    probe_fa_pairwise,
    probe_fe_levels,
    write_matrix_csv,
    write_table_csv,
)
from .synth import (
    Dataset,
    SceneSpec,
    generate,
    ks_distance_log_uniform,
    load_dataset,
    log_uniform_cdf,
    relative_scales,
    render_image,
    save_dataset,
    scale_thresholds,
    subset_floors,
)

__all__ = [
    "Dataset", "EvalReport", "IOU_THRESHOLDS", "REFERENCE_MODULES", "SceneSpec", "adjacent_pairs", "average_precision",
    "compute_ap", "direction_means", "evaluate_ap", "generate", "ks_distance_log_uniform", "load_dataset", "log_uniform_cdf", "match_image", "probe_fa_pairwise",
    "probe_fe_levels", "relative_scales", "render_image", "save_dataset", "scale_thresholds", "subset_floors", "write_matrix_csv",
    "write_table_csv",
]
