"""Command-line interface and batch evaluation harness.

Commands:
    segment        one image in, lesion mask out (plus optional overlays)
    evaluate       run a dataset layout against ground truth, write a CSV
    gen-synthetic  write a reproducible synthetic test corpus
    serve          start the HTTP segmentation service

Flags mirror the config fields; an optional key=value config file is read
first and explicit flags override it. LESIONSEG_THREADS overrides
--parallel. Exit codes: 0 success, 1 input/validation error or partial
batch failures, 2 internal error.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .imagecore import (
    ImageDecodeError,
    ellipse_mask,
    load_image,
    load_mask,
    save_image_png,
    save_mask_png,
)
from .metrics import (
    METRIC_NAMES,
    EvalRecord,
    aggregate,
    confusion,
    metrics_from_counts,
)
from .postprocess import PostprocessConfig, postprocess_pipeline
from .ragmerge import MergeConfig, build_rag, find_threshold
from .slic import SlicConfig, render_label_image, slic_segment

__all__ = [
    "PipelineConfig",
    "PipelineStageError",
    "SegmentationResult",
    "segment_image",
    "DatasetEntry",
    "DatasetIndex",
    "ingest_dataset",
    "run_evaluate",
    "main",
]

CSV_HEADER = (
    "image_id,sensitivity,specificity,accuracy,f_measure,jaccard,"
    "threshold,regions_after_merge,runtime_ms"
)


@dataclass
class PipelineConfig:
    """Everything the full image-to-mask pipeline needs."""

    slic: SlicConfig = field(default_factory=SlicConfig)
    merge: MergeConfig = field(default_factory=MergeConfig)
    post: PostprocessConfig = field(default_factory=PostprocessConfig)
    debug_dumps: bool = False
    parallelism: int = 1

    def validate(self) -> None:
        self.merge.validate()
        self.post.validate()
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")


class PipelineStageError(RuntimeError):
    """A pipeline stage failed; carries the stage name and the cause."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class SegmentationResult:
    mask: np.ndarray
    threshold: float
    regions_after_merge: int


def _run_stage(stage: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineStageError:
        raise
    except Exception as exc:
        raise PipelineStageError(stage, exc) from exc


def segment_image(
    img: np.ndarray, cfg: PipelineConfig | None = None, debug: dict | None = None
) -> SegmentationResult:
    """Full pipeline: field-of-view mask, superpixels, merge, post-process.

    Deterministic for fixed inputs. Stage failures raise PipelineStageError
    naming the stage. Pass a dict as `debug` to collect intermediates
    (slic labels, merge probes, merged labels, post-processing stages).
    """
    cfg = cfg or PipelineConfig()
    cfg.validate()
    h, w = np.asarray(img).shape[:2]

    roi = _run_stage("ellipse_mask", ellipse_mask, w, h)
    labels = _run_stage("slic_segment", slic_segment, img, cfg.slic)
    graph = _run_stage("build_rag", build_rag, img, labels, roi)
    probes: list[tuple[float, int]] | None = [] if debug is not None else None
    threshold, merged = _run_stage("find_threshold", find_threshold, graph, cfg.merge, probes)
    if debug is not None:
        debug["roi"] = roi
        debug["slic_labels"] = labels
        debug["merge_probes"] = probes
        debug["merged_labels"] = merged.pixel_assignment
    mask = _run_stage(
        "postprocess_pipeline",
        postprocess_pipeline,
        img,
        merged.pixel_assignment,
        roi,
        cfg.post,
        debug=debug,
    )
    return SegmentationResult(
        mask=mask, threshold=threshold, regions_after_merge=merged.node_count
    )


# ---------------------------------------------------------------------------
# dataset ingestion


@dataclass
class DatasetEntry:
    image_id: str
    image_path: Path
    truth_path: Path | None


@dataclass
class DatasetIndex:
    entries: list[DatasetEntry] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)


def ingest_dataset(root: str | Path, layout: str) -> DatasetIndex:
    """Scan a dataset directory into (id, image, truth) entries.

    Layouts: "ph2" (per-case folders with *_Dermoscopic_Image/<id>.bmp and
    *_lesion/<id>_lesion.bmp), "isic" (flat <id>.jpg with
    <id>_segmentation.png), "pairs" (flat <id>.png with <id>_mask.png).
    Images without a truth mask are skipped and listed in `skipped`.
    Entries come back sorted by id; duplicate ids are an error.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root {root} is not a directory")

    entries: list[DatasetEntry] = []
    skipped: list[str] = []

    def add(image_id: str, image_path: Path, truth_path: Path) -> None:
        if truth_path.is_file():
            entries.append(DatasetEntry(image_id, image_path, truth_path))
        else:
            skipped.append(image_id)

    if layout == "ph2":
        for case_dir in sorted(p for p in root.iterdir() if p.is_dir()):
            for image_path in sorted(case_dir.glob("*_Dermoscopic_Image/*.bmp")):
                image_id = image_path.stem
                candidates = sorted(case_dir.glob(f"*_lesion/{image_id}_lesion.bmp"))
                if candidates:
                    add(image_id, image_path, candidates[0])
                else:
                    skipped.append(image_id)
    elif layout == "isic":
        for image_path in sorted(root.glob("*.jpg")):
            image_id = image_path.stem
            add(image_id, image_path, root / f"{image_id}_segmentation.png")
    elif layout == "pairs":
        for image_path in sorted(root.glob("*.png")):
            if image_path.name.endswith("_mask.png"):
                continue
            image_id = image_path.stem
            add(image_id, image_path, root / f"{image_id}_mask.png")
    else:
        raise ValueError(f"unknown layout {layout!r} (expected ph2, isic or pairs)")

    entries.sort(key=lambda e: e.image_id)
    ids = [e.image_id for e in entries]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate image ids in dataset")
    return DatasetIndex(entries=entries, skipped=sorted(skipped))


# ---------------------------------------------------------------------------
# batch evaluation


def _evaluate_entry(task: tuple[str, str, str, PipelineConfig]) -> EvalRecord:
    image_id, image_path, truth_path, cfg = task
    start = time.perf_counter()
    img = load_image(image_path)
    result = segment_image(img, cfg)
    runtime_ms = (time.perf_counter() - start) * 1000.0
    truth = load_mask(truth_path)
    counts = confusion(result.mask, truth)
    return EvalRecord(
        image_id=image_id,
        counts=counts,
        metrics=metrics_from_counts(counts),
        threshold=result.threshold,
        regions_after_merge=result.regions_after_merge,
        runtime_ms=runtime_ms,
    )


def _format_row(record: EvalRecord) -> str:
    m = record.metrics
    return (
        f"{record.image_id},{m.sensitivity:.6f},{m.specificity:.6f},{m.accuracy:.6f},"
        f"{m.f_measure:.6f},{m.jaccard:.6f},{record.threshold:.4f},"
        f"{record.regions_after_merge},{record.runtime_ms:.1f}"
    )


def _format_summary(tag: str, records: list[EvalRecord]) -> str:
    stats = aggregate(records)
    parts = [f"{name}={stats[name][0]:.4f}±{stats[name][1]:.4f}" for name in METRIC_NAMES]
    return f"{tag} n={len(records)} " + " ".join(parts)


def run_evaluate(
    index: DatasetIndex,
    cfg: PipelineConfig,
    report_path: str | Path,
    subsets: dict[str, str] | None = None,
) -> tuple[list[EvalRecord], list[tuple[str, str]]]:
    """Segment and score every index entry; write the CSV report.

    Rows appear in index order whatever the completion order; failures are
    recorded as rows with nan metrics and the run continues. The summary
    (and per-subset summaries when a subsets mapping is given) is printed
    and appended as comment rows. Returns (records, failures).
    """
    if not index.entries:
        raise ValueError("dataset index is empty, nothing to evaluate")
    cfg.validate()

    tasks = [
        (e.image_id, str(e.image_path), str(e.truth_path), cfg) for e in index.entries
    ]
    outcomes: list[EvalRecord | tuple[str, str]] = []
    if cfg.parallelism > 1:
        with ProcessPoolExecutor(max_workers=cfg.parallelism) as pool:
            futures = [pool.submit(_evaluate_entry, t) for t in tasks]
            for task, fut in zip(tasks, futures):
                try:
                    outcomes.append(fut.result())
                except Exception as exc:
                    outcomes.append((task[0], str(exc)))
    else:
        for task in tasks:
            try:
                outcomes.append(_evaluate_entry(task))
            except Exception as exc:
                outcomes.append((task[0], str(exc)))

    records = [o for o in outcomes if isinstance(o, EvalRecord)]
    failures = [o for o in outcomes if not isinstance(o, EvalRecord)]

    lines = [CSV_HEADER]
    for outcome in outcomes:
        if isinstance(outcome, EvalRecord):
            lines.append(_format_row(outcome))
        else:
            lines.append(f"{outcome[0]},nan,nan,nan,nan,nan,nan,0,nan")
    if records:
        summary = _format_summary("summary", records)
        lines.append(f"# {summary}")
        print(summary)
        if subsets:
            by_subset: dict[str, list[EvalRecord]] = {}
            for r in records:
                name = subsets.get(r.image_id)
                if name:
                    by_subset.setdefault(name, []).append(r)
            for name in sorted(by_subset):
                block = _format_summary(f"subset {name}", by_subset[name])
                lines.append(f"# {block}")
                print(block)
    else:
        lines.append("# summary n=0 (all entries failed)")
    for image_id, reason in failures:
        lines.append(f"# failed {image_id}: {reason}")
        print(f"failed {image_id}: {reason}", file=sys.stderr)

    Path(report_path).write_text("\n".join(lines) + "\n")
    return records, failures


# ---------------------------------------------------------------------------
# configuration plumbing

_CONFIG_KEYS = {
    "k": ("slic", "k", int),
    "compactness": ("slic", "compactness", float),
    "epsilon": ("merge", "epsilon", float),
    "max_iter": ("merge", "max_iterations", int),
    "min_area": ("post", "min_area_fraction", float),
    "dilate_radius": ("post", "dilation_radius", int),
    "clip_limit": ("post", "clahe_clip_limit", float),
    "parallel": (None, "parallelism", int),
    "debug_dumps": (None, "debug_dumps", None),  # bool, parsed specially
}


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _read_config_file(path: str | Path) -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip().replace("-", "_")
        if key not in _CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = raw.strip()
    return values


def _apply_setting(cfg: PipelineConfig, key: str, value) -> None:
    section, attr, conv = _CONFIG_KEYS[key]
    if isinstance(value, str):
        value = _parse_bool(value) if conv is None else conv(value)
    target = cfg if section is None else getattr(cfg, section)
    setattr(target, attr, value)


def build_pipeline_config(args: argparse.Namespace) -> PipelineConfig:
    """Defaults, then the config file, then explicit flags, then env."""
    cfg = PipelineConfig()
    if getattr(args, "config", None):
        for key, raw in _read_config_file(args.config).items():
            _apply_setting(cfg, key, raw)
    for key in _CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            _apply_setting(cfg, key, value)
    env_threads = os.environ.get("LESIONSEG_THREADS")
    if env_threads:
        try:
            cfg.parallelism = int(env_threads)
        except ValueError:
            raise ValueError(f"LESIONSEG_THREADS must be an integer, got {env_threads!r}")
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# commands


def _mask_outline(img: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """The image with the mask's outer boundary drawn in yellow."""
    inner = mask.copy()
    inner[1:, :] &= mask[:-1, :]
    inner[:-1, :] &= mask[1:, :]
    inner[:, 1:] &= mask[:, :-1]
    inner[:, :-1] &= mask[:, 1:]
    inner[0, :] = inner[-1, :] = False
    inner[:, 0] = inner[:, -1] = False
    out = img.copy()
    out[mask & ~inner] = (255, 255, 0)
    return out


def _write_debug_dumps(out_path: Path, img: np.ndarray, debug: dict) -> None:
    stem = out_path.parent / out_path.stem
    save_image_png(render_label_image(img, debug["slic_labels"]), f"{stem}_slic_labels.png")
    save_image_png(render_label_image(img, debug["merged_labels"]), f"{stem}_merged_labels.png")
    if "pruned_labels" in debug:
        save_image_png(render_label_image(img, debug["pruned_labels"]), f"{stem}_pruned_labels.png")
    if "otsu_reference" in debug:
        save_mask_png(debug["otsu_reference"], f"{stem}_reference.png")
    if "selected_region" in debug:
        save_mask_png(debug["selected_region"], f"{stem}_selected.png")
    probe_lines = ["t,node_count"] + [f"{t:.4f},{n}" for t, n in debug["merge_probes"]]
    Path(f"{stem}_probes.csv").write_text("\n".join(probe_lines) + "\n")


def cmd_segment(args: argparse.Namespace) -> int:
    cfg = build_pipeline_config(args)
    img = load_image(args.image)
    debug: dict | None = {} if (cfg.debug_dumps or args.labels) else None
    result = segment_image(img, cfg, debug=debug)
    out_path = Path(args.out)
    save_mask_png(result.mask, out_path)
    if args.overlay:
        save_image_png(_mask_outline(img, result.mask), args.overlay)
    if args.labels:
        save_image_png(render_label_image(img, debug["slic_labels"]), args.labels)
    if cfg.debug_dumps:
        _write_debug_dumps(out_path, img, debug)
    print(
        f"{args.image}: threshold={result.threshold:.4f} "
        f"regions={result.regions_after_merge} mask={out_path}"
    )
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = build_pipeline_config(args)
    index = ingest_dataset(args.root, args.layout)
    for image_id in index.skipped:
        print(f"warning: no truth mask for {image_id}, skipped", file=sys.stderr)
    if not index.entries:
        print("error: no evaluable image/truth pairs found", file=sys.stderr)
        return 1
    subsets = _read_subsets(args.subsets) if args.subsets else None
    _, failures = run_evaluate(index, cfg, args.report, subsets=subsets)
    return 1 if failures else 0


def _read_subsets(path: str) -> dict[str, str]:
    mapping = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "," not in stripped:
            raise ValueError(f"{path}:{lineno}: expected image_id,subset")
        image_id, subset = (part.strip() for part in stripped.split(",", 1))
        mapping[image_id] = subset
    return mapping


def cmd_gen_synthetic(args: argparse.Namespace) -> int:
    from .synthetic import generate_corpus

    ids = generate_corpus(args.out, args.count, args.seed, size=args.size)
    print(f"wrote {len(ids)} image/mask pairs to {args.out}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="key=value config file, flags override")
    common.add_argument("--k", type=int, help="superpixel count")
    common.add_argument("--compactness", type=float, help="SLIC spatial weight")
    common.add_argument("--epsilon", type=float, help="threshold search resolution")
    common.add_argument("--max-iter", dest="max_iter", type=int, help="threshold search probe cap")
    common.add_argument("--min-area", dest="min_area", type=float, help="region prune fraction")
    common.add_argument("--dilate-radius", dest="dilate_radius", type=int, help="disk radius")
    common.add_argument("--clip-limit", dest="clip_limit", type=float, help="CLAHE clip limit")
    common.add_argument("--parallel", type=int, help="worker count for batch runs")
    common.add_argument(
        "--debug-dumps",
        dest="debug_dumps",
        action="store_true",
        default=None,
        help="write intermediate images next to the output",
    )

    parser = argparse.ArgumentParser(prog="lesionseg", description="Skin lesion segmentation")
    sub = parser.add_subparsers(dest="command")

    p_seg = sub.add_parser("segment", parents=[common], help="segment one image")
    p_seg.add_argument("image", help="input image (PNG/BMP/JPEG)")
    p_seg.add_argument("--out", required=True, help="output mask PNG")
    p_seg.add_argument("--overlay", help="write the mask outline over the image")
    p_seg.add_argument("--labels", help="write the superpixel label rendering")
    p_seg.set_defaults(func=cmd_segment)

    p_eval = sub.add_parser("evaluate", parents=[common], help="evaluate a dataset")
    p_eval.add_argument("--layout", required=True, choices=("ph2", "isic", "pairs"))
    p_eval.add_argument("--root", required=True, help="dataset root directory")
    p_eval.add_argument("--report", required=True, help="CSV report path")
    p_eval.add_argument(
        "--subsets", help="image_id,subset mapping file for per-subset summaries"
    )
    p_eval.set_defaults(func=cmd_evaluate)

    p_gen = sub.add_parser("gen-synthetic", parents=[common], help="generate a test corpus")
    p_gen.add_argument("--out", required=True, help="output directory")
    p_gen.add_argument("--count", required=True, type=int, help="number of images")
    p_gen.add_argument("--seed", required=True, type=int, help="corpus seed")
    p_gen.add_argument("--size", type=int, default=512, help="image side in pixels")
    p_gen.set_defaults(func=cmd_gen_synthetic)

    p_srv = sub.add_parser("serve", parents=[common], help="run the HTTP service")
    p_srv.add_argument("--host", default="127.0.0.1")
    p_srv.add_argument("--port", type=int, default=8000)
    p_srv.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if (exc.code or 0) == 0 else 1
    if not getattr(args, "func", None):
        parser.print_help(sys.stderr)
        return 1
    try:
        return args.func(args)
    except PipelineStageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1 if isinstance(exc.cause, ValueError) else 2
    except (ImageDecodeError, FileNotFoundError, NotADirectoryError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
