"""HTTP service wrapping the segmentation pipeline.

One worker-local FastAPI app: upload an image, get the lesion mask back as
base64 PNG (or raw PNG with format=png) together with the chosen threshold
and region count. /evaluate-pair scores an upload against an uploaded
ground-truth mask. Batch dataset work stays in the CLI, which talks to the
library directly; the service covers interactive and integration use.
"""

from __future__ import annotations

import base64
import time

from fastapi import FastAPI, File, HTTPException, Query, Response, UploadFile
from pydantic import BaseModel

from .cli import PipelineConfig, PipelineStageError, segment_image
from .imagecore import ImageDecodeError, decode_image_bytes, encode_mask_png
from .metrics import confusion, metrics_from_counts

__all__ = [
    "create_app",
    "HealthResponse",
    "ConfigDefaultsResponse",
    "SegmentResponse",
    "ConfusionModel",
    "MetricsModel",
    "EvaluatePairResponse",
]


class HealthResponse(BaseModel):
    status: str = "ok"


class ConfigDefaultsResponse(BaseModel):
    k: int
    compactness: float
    iterations: int
    color_space: str
    t_lo: float
    t_hi: float
    epsilon: float
    max_iterations: int
    min_area_fraction: float
    dilation_radius: int
    clahe_clip_limit: float
    clahe_tiles: int
    otsu_foreground: str


class SegmentResponse(BaseModel):
    width: int
    height: int
    threshold: float
    regions_after_merge: int
    runtime_ms: float
    mask_png_base64: str


class ConfusionModel(BaseModel):
    tp: int
    tn: int
    fp: int
    fn: int


class MetricsModel(BaseModel):
    sensitivity: float
    specificity: float
    accuracy: float
    f_measure: float
    jaccard: float


class EvaluatePairResponse(BaseModel):
    threshold: float
    regions_after_merge: int
    counts: ConfusionModel
    metrics: MetricsModel


def _config_from_params(
    k: int | None,
    compactness: float | None,
    epsilon: float | None,
    max_iter: int | None,
    min_area: float | None,
    dilate_radius: int | None,
    clip_limit: float | None,
) -> PipelineConfig:
    cfg = PipelineConfig()
    if k is not None:
        cfg.slic.k = k
    if compactness is not None:
        cfg.slic.compactness = compactness
    if epsilon is not None:
        cfg.merge.epsilon = epsilon
    if max_iter is not None:
        cfg.merge.max_iterations = max_iter
    if min_area is not None:
        cfg.post.min_area_fraction = min_area
    if dilate_radius is not None:
        cfg.post.dilation_radius = dilate_radius
    if clip_limit is not None:
        cfg.post.clahe_clip_limit = clip_limit
    try:
        cfg.validate()
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    return cfg


def _run_segmentation(data: bytes, origin: str, cfg: PipelineConfig):
    try:
        img = decode_image_bytes(data, origin)
    except ImageDecodeError as exc:
        raise HTTPException(status_code=400, detail=str(exc))
    start = time.perf_counter()
    try:
        result = segment_image(img, cfg)
    except PipelineStageError as exc:
        status = 400 if isinstance(exc.cause, ValueError) else 500
        raise HTTPException(status_code=status, detail=str(exc))
    runtime_ms = (time.perf_counter() - start) * 1000.0
    return img, result, runtime_ms


def create_app() -> FastAPI:
    app = FastAPI(title="lesionseg", description="Skin lesion segmentation service")

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse()

    @app.get("/config/defaults", response_model=ConfigDefaultsResponse)
    def config_defaults() -> ConfigDefaultsResponse:
        cfg = PipelineConfig()
        return ConfigDefaultsResponse(
            k=cfg.slic.k,
            compactness=cfg.slic.compactness,
            iterations=cfg.slic.iterations,
            color_space=cfg.slic.color_space,
            t_lo=cfg.merge.t_lo,
            t_hi=cfg.merge.t_hi,
            epsilon=cfg.merge.epsilon,
            max_iterations=cfg.merge.max_iterations,
            min_area_fraction=cfg.post.min_area_fraction,
            dilation_radius=cfg.post.dilation_radius,
            clahe_clip_limit=cfg.post.clahe_clip_limit,
            clahe_tiles=cfg.post.clahe_tiles,
            otsu_foreground=cfg.post.otsu_foreground,
        )

    @app.post("/segment")
    async def segment(
        file: UploadFile = File(...),
        format: str = Query("json", pattern="^(json|png)$"),
        k: int | None = Query(None),
        compactness: float | None = Query(None),
        epsilon: float | None = Query(None),
        max_iter: int | None = Query(None),
        min_area: float | None = Query(None),
        dilate_radius: int | None = Query(None),
        clip_limit: float | None = Query(None),
    ):
        cfg = _config_from_params(
            k, compactness, epsilon, max_iter, min_area, dilate_radius, clip_limit
        )
        data = await file.read()
        img, result, runtime_ms = _run_segmentation(data, file.filename or "upload", cfg)
        png = encode_mask_png(result.mask)
        if format == "png":
            return Response(content=png, media_type="image/png")
        h, w = img.shape[:2]
        return SegmentResponse(
            width=w,
            height=h,
            threshold=result.threshold,
            regions_after_merge=result.regions_after_merge,
            runtime_ms=runtime_ms,
            mask_png_base64=base64.b64encode(png).decode("ascii"),
        )

    @app.post("/evaluate-pair", response_model=EvaluatePairResponse)
    async def evaluate_pair(
        image: UploadFile = File(...),
        truth: UploadFile = File(...),
        k: int | None = Query(None),
        compactness: float | None = Query(None),
        epsilon: float | None = Query(None),
        max_iter: int | None = Query(None),
        min_area: float | None = Query(None),
        dilate_radius: int | None = Query(None),
        clip_limit: float | None = Query(None),
    ) -> EvaluatePairResponse:
        cfg = _config_from_params(
            k, compactness, epsilon, max_iter, min_area, dilate_radius, clip_limit
        )
        img_data = await image.read()
        _, result, _ = _run_segmentation(img_data, image.filename or "image", cfg)
        try:
            truth_rgb = decode_image_bytes(await truth.read(), truth.filename or "truth")
        except ImageDecodeError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        truth_mask = truth_rgb.max(axis=2) > 0
        if truth_mask.shape != result.mask.shape:
            raise HTTPException(status_code=400, detail="image and truth dimensions differ")
        counts = confusion(result.mask, truth_mask)
        m = metrics_from_counts(counts)
        return EvaluatePairResponse(
            threshold=result.threshold,
            regions_after_merge=result.regions_after_merge,
            counts=ConfusionModel(tp=counts.tp, tn=counts.tn, fp=counts.fp, fn=counts.fn),
            metrics=MetricsModel(**m.as_dict()),
        )

    return app
