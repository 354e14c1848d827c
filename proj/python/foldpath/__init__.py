"""Python bindings for the FoldPath C++ core.

Paths are NumPy arrays of shape (K, 6): xyz position followed by a unit
orientation vector. Arrays with 3 columns are accepted where only positions
matter; their orientation defaults to +z.
"""

from ._core import (
    HeadConfig,
    HeadParams,
    ParseError,
    ValidationError,
    ap_suite,
    average_precision,
    confidence_forward,
    dtw_align,
    evaluate,
    evaluate_files,
    focal_conf_loss,
    fscore_bidirectional,
    gen_raster,
    head_forward,
    hungarian,
    init_head,
    interp_at,
    load_dataset,
    match_cost,
    parameter_count,
    pcd,
    pose_fscore,
    resample,
    reverse,
    sample_params,
    save_dataset,
    total_loss,
)

__all__ = [
    "HeadConfig",
    "HeadParams",
    "ParseError",
    "ValidationError",
    "ap_suite",
    "average_precision",
    "confidence_forward",
    "dtw_align",
    "evaluate",
    "evaluate_files",
    "focal_conf_loss",
    "fscore_bidirectional",
    "gen_raster",
    "head_forward",
    "hungarian",
    "init_head",
    "interp_at",
    "load_dataset",
    "match_cost",
    "parameter_count",
    "pcd",
    "pose_fscore",
    "resample",
    "reverse",
    "sample_params",
    "save_dataset",
    "total_loss",
]
