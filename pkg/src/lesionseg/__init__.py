"""Skin lesion segmentation: superpixels, region merging, mask extraction.

The pipeline oversegments a dermoscopic image into SLIC superpixels, builds
a region adjacency graph restricted to the inscribed-ellipse field of view,
merges regions by mean-color distance under a binary-searched threshold,
and post-processes the two-region result into the final lesion mask.
"""

from .cli import (
    DatasetEntry,
    DatasetIndex,
    PipelineConfig,
    PipelineStageError,
    SegmentationResult,
    ingest_dataset,
    run_evaluate,
    segment_image,
)
from .imagecore import (
    ImageDecodeError,
    ellipse_mask,
    load_image,
    load_mask,
    save_image_png,
    save_mask_png,
    to_gray,
)
from .metrics import ConfusionCounts, EvalRecord, MetricSet, confusion, metrics_from_counts
from .postprocess import PostprocessConfig, postprocess_pipeline
from .ragmerge import MergeConfig, RegionGraph, RegionNode, build_rag, find_threshold
from .slic import SlicConfig, slic_segment
from .synthetic import generate_corpus

__version__ = "1.0.0"

__all__ = [
    "ImageDecodeError",
    "load_image",
    "load_mask",
    "save_image_png",
    "save_mask_png",
    "to_gray",
    "ellipse_mask",
    "SlicConfig",
    "slic_segment",
    "MergeConfig",
    "RegionNode",
    "RegionGraph",
    "build_rag",
    "find_threshold",
    "PostprocessConfig",
    "postprocess_pipeline",
    "ConfusionCounts",
    "MetricSet",
    "EvalRecord",
    "confusion",
    "metrics_from_counts",
    "PipelineConfig",
    "PipelineStageError",
    "SegmentationResult",
    "segment_image",
    "DatasetEntry",
    "DatasetIndex",
    "ingest_dataset",
    "run_evaluate",
    "generate_corpus",
    "__version__",
]
