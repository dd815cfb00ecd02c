"""Dataset model and annotation-file I/O.

Annotation files are UTF-8 JSONL, one record per line:

    {"video_id": str, "duration": num, "query": str, "span": [start, end],
     "annotation_id": str, "provenance": str}

plus optional ``native_fps``, ``source_dataset`` and ``error_flags``.
Unknown fields are preserved on round-trip. Timestamps are written with
one decimal place, which makes serialize(load(x)) a fixpoint.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .spans import TimeSpan

# Span ends may overshoot the video duration by this much (rounding noise
# in source datasets); such spans are clamped and flagged, not rejected.
BOUNDS_TOLERANCE = 0.5

SOURCE_DATASETS = ("charades", "activitynet", "qvhighlights", "other")
PROVENANCES = ("original", "human_refined", "auto_annotated")


class ErrorKind(str, enum.Enum):
    MULTIPLE_OCCURRENCES = "multiple_occurrences"
    NO_OCCURRENCE = "no_occurrence"
    DUPLICATE_QUERY = "duplicate_query"
    UNCLEAR_QUERY = "unclear_query"
    INACCURATE_SEGMENT = "inaccurate_segment"
    INFO_LEAKAGE = "info_leakage"


@dataclass(frozen=True)
class VideoMeta:
    video_id: str
    duration: float
    native_fps: float | None = None
    source_dataset: str = "other"

    def __post_init__(self) -> None:
        if not self.video_id:
            raise ValueError("video_id must be non-empty")
        if not (math.isfinite(self.duration) and self.duration > 0):
            raise ValueError(f"duration must be finite and positive, got {self.duration}")
        if self.native_fps is not None and not self.native_fps > 0:
            raise ValueError(f"native_fps must be positive, got {self.native_fps}")
        if self.source_dataset not in SOURCE_DATASETS:
            raise ValueError(f"unknown source_dataset {self.source_dataset!r}")


@dataclass(frozen=True)
class AnnotationRecord:
    annotation_id: str
    video_id: str
    query: str
    span: TimeSpan
    provenance: str = "original"
    error_flags: frozenset[ErrorKind] = frozenset()
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if not self.annotation_id:
            raise ValueError("annotation_id must be non-empty")
        if not self.query.strip():
            raise ValueError("query must be non-empty")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")


@dataclass
class Dataset:
    name: str
    videos: dict[str, VideoMeta] = field(default_factory=dict)
    annotations: list[AnnotationRecord] = field(default_factory=list)

    def __post_init__(self) -> None:
        ids = [a.annotation_id for a in self.annotations]
        if len(ids) != len(set(ids)):
            raise ValueError("annotation_ids must be unique")
        for a in self.annotations:
            if a.video_id not in self.videos:
                raise ValueError(f"annotation {a.annotation_id} references unknown video {a.video_id}")

    def annotation_by_id(self, annotation_id: str) -> AnnotationRecord:
        for a in self.annotations:
            if a.annotation_id == annotation_id:
                return a
        raise KeyError(annotation_id)


@dataclass(frozen=True)
class Rejection:
    """One record-level problem found while loading."""

    line: int
    annotation_id: str | None
    reason: str
    fatal: bool  # fatal rejections drop the record; others only flag it


@dataclass
class LoadResult:
    dataset: Dataset
    rejections: list[Rejection]


def _round_ts(x: float) -> float:
    return round(float(x), 1)


def load_dataset(path: str | Path, schema: str = "other", name: str | None = None) -> LoadResult:
    """Load an annotation JSONL file.

    ``schema`` names the source benchmark and tags records that do not
    carry their own ``source_dataset``. Records violating hard invariants
    go to the rejection report instead of being silently dropped.
    """
    if schema not in SOURCE_DATASETS:
        raise ValueError(f"unknown schema {schema!r}; expected one of {SOURCE_DATASETS}")
    path = Path(path)
    videos: dict[str, VideoMeta] = {}
    annotations: list[AnnotationRecord] = []
    seen_ids: set[str] = set()
    rejections: list[Rejection] = []

    with path.open(encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                rejections.append(Rejection(lineno, None, f"malformed JSON: {exc.msg}", fatal=True))
                continue
            if not isinstance(obj, dict):
                rejections.append(Rejection(lineno, None, "record is not a JSON object", fatal=True))
                continue

            missing = [k for k in ("video_id", "duration", "query", "span", "annotation_id") if k not in obj]
            if missing:
                rejections.append(
                    Rejection(lineno, obj.get("annotation_id"), f"missing fields: {', '.join(missing)}", fatal=True)
                )
                continue

            ann_id = str(obj["annotation_id"])
            if ann_id in seen_ids:
                rejections.append(Rejection(lineno, ann_id, "duplicate annotation_id", fatal=True))
                continue

            try:
                duration = float(obj["duration"])
                video = VideoMeta(
                    video_id=str(obj["video_id"]),
                    duration=duration,
                    native_fps=float(obj["native_fps"]) if obj.get("native_fps") is not None else None,
                    source_dataset=obj.get("source_dataset", schema),
                )
            except (TypeError, ValueError) as exc:
                rejections.append(Rejection(lineno, ann_id, f"bad video metadata: {exc}", fatal=True))
                continue

            existing = videos.get(video.video_id)
            if existing is None:
                videos[video.video_id] = video
                existing = video
            elif abs(existing.duration - video.duration) > 0.05:
                rejections.append(
                    Rejection(lineno, ann_id, f"conflicting duration for video {video.video_id}", fatal=True)
                )
                continue

            span_raw = obj["span"]
            if not (isinstance(span_raw, (list, tuple)) and len(span_raw) == 2):
                rejections.append(Rejection(lineno, ann_id, "span must be a [start, end] pair", fatal=True))
                continue
            try:
                start, end = float(span_raw[0]), float(span_raw[1])
            except (TypeError, ValueError):
                rejections.append(Rejection(lineno, ann_id, "span endpoints must be numbers", fatal=True))
                continue

            dur = existing.duration
            if end > dur + BOUNDS_TOLERANCE:
                rejections.append(
                    Rejection(lineno, ann_id, f"span end {end} exceeds duration {dur} beyond tolerance", fatal=True)
                )
                continue
            clamped = False
            if end > dur:
                end = dur
                clamped = True
            try:
                span = TimeSpan(start, end)
            except ValueError as exc:
                rejections.append(Rejection(lineno, ann_id, f"invalid span: {exc}", fatal=True))
                continue
            if clamped:
                rejections.append(
                    Rejection(lineno, ann_id, f"span end clamped to duration {dur}", fatal=False)
                )

            flags = frozenset(ErrorKind(v) for v in obj.get("error_flags", []))
            known = {
                "video_id", "duration", "query", "span", "annotation_id",
                "provenance", "native_fps", "source_dataset", "error_flags",
            }
            extra = {k: v for k, v in obj.items() if k not in known}
            try:
                record = AnnotationRecord(
                    annotation_id=ann_id,
                    video_id=video.video_id,
                    query=str(obj["query"]),
                    span=span,
                    provenance=obj.get("provenance", "original"),
                    error_flags=flags,
                    extra=extra,
                )
            except ValueError as exc:
                rejections.append(Rejection(lineno, ann_id, str(exc), fatal=True))
                continue
            seen_ids.add(ann_id)
            annotations.append(record)

    dataset = Dataset(name=name or path.stem, videos=videos, annotations=annotations)
    return LoadResult(dataset, rejections)


def record_to_json_obj(record: AnnotationRecord, video: VideoMeta) -> dict:
    obj: dict = {
        "video_id": record.video_id,
        "duration": _round_ts(video.duration),
        "query": record.query,
        "span": [_round_ts(record.span.start), _round_ts(record.span.end)],
        "annotation_id": record.annotation_id,
        "provenance": record.provenance,
    }
    if video.native_fps is not None:
        obj["native_fps"] = video.native_fps
    if video.source_dataset != "other":
        obj["source_dataset"] = video.source_dataset
    if record.error_flags:
        obj["error_flags"] = sorted(k.value for k in record.error_flags)
    for key in sorted(record.extra):
        obj[key] = record.extra[key]
    return obj


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write the dataset in canonical JSONL form (one-decimal timestamps)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as f:
        for record in dataset.annotations:
            video = dataset.videos[record.video_id]
            f.write(json.dumps(record_to_json_obj(record, video), ensure_ascii=False) + "\n")


def load_videos(path: str | Path, schema: str = "other") -> list[VideoMeta]:
    """Load a videos-only JSONL file ({"video_id", "duration", ...})."""
    videos = []
    with Path(path).open(encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            videos.append(
                VideoMeta(
                    video_id=str(obj["video_id"]),
                    duration=float(obj["duration"]),
                    native_fps=float(obj["native_fps"]) if obj.get("native_fps") is not None else None,
                    source_dataset=obj.get("source_dataset", schema),
                )
            )
    return videos


def dataset_stats(dataset: Dataset, hist_bins: int = 12) -> dict:
    """Counts, mean video duration, and a duration histogram.

    Sub-dataset breakdowns are keyed by ``source_dataset``.
    """
    durations = [v.duration for v in dataset.videos.values()]
    n_videos = len(durations)
    stats: dict = {
        "name": dataset.name,
        "n_videos": n_videos,
        "n_annotations": len(dataset.annotations),
        "avg_duration": (sum(durations) / n_videos) if n_videos else 0.0,
    }
    if n_videos:
        lo, hi = 0.0, max(durations)
        width = hi / hist_bins if hi > 0 else 1.0
        counts = [0] * hist_bins
        for d in durations:
            idx = min(int(d / width), hist_bins - 1) if width > 0 else 0
            counts[idx] += 1
        stats["duration_histogram"] = {
            "bin_edges": [round(lo + i * width, 3) for i in range(hist_bins + 1)],
            "counts": counts,
        }
    else:
        stats["duration_histogram"] = {"bin_edges": [], "counts": []}

    per_source: dict[str, dict] = {}
    for source in sorted({v.source_dataset for v in dataset.videos.values()}):
        vids = {vid for vid, v in dataset.videos.items() if v.source_dataset == source}
        durs = [dataset.videos[v].duration for v in vids]
        per_source[source] = {
            "n_videos": len(vids),
            "n_annotations": sum(1 for a in dataset.annotations if a.video_id in vids),
            "avg_duration": sum(durs) / len(durs) if durs else 0.0,
        }
    stats["per_source"] = per_source
    return stats


def merge_datasets(name: str, parts: Iterable[Dataset]) -> Dataset:
    """Concatenate datasets; annotation_ids must stay globally unique."""
    videos: dict[str, VideoMeta] = {}
    annotations: list[AnnotationRecord] = []
    for part in parts:
        for vid, meta in part.videos.items():
            if vid in videos and abs(videos[vid].duration - meta.duration) > 0.05:
                raise ValueError(f"conflicting duration for video {vid} across datasets")
            videos.setdefault(vid, meta)
        annotations.extend(part.annotations)
    return Dataset(name=name, videos=videos, annotations=annotations)
