"""Automated re-annotation pipeline against a pluggable annotator backend.

Videos are sampled duration-uniformly, sent to an external multimodal
annotator (or its deterministic mock) with a prompt that fixes a
parseable one-event-per-line contract, and the returned candidates are
gated through the dataset linter before anything enters a dataset.
"""
from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Protocol

import numpy as np

from .dataset import AnnotationRecord, Dataset, VideoMeta
from .lint import LintConfig, LintRow, error_rates, lint_rows
from .spans import TimeSpan

DURATION_RANGE = (0.0, 240.0)  # regular bins; longer videos go to an overflow bin

ANNOTATION_PROMPT = (
    "Watch the video and identify distinct events, making sure the events are "
    "spread across different time periods of the video rather than concentrated "
    "in one part. Describe each event with a clear, specific, self-contained "
    "query that does not reveal its temporal position. Output one event per "
    "line in exactly this format:\n"
    "start_seconds-end_seconds: description\n"
    "Example:\n"
    "12.5-30.0: a person opens the refrigerator and takes out a bottle\n"
)

_EVENT_LINE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*[–-]\s*(\d+(?:\.\d+)?)\s*:\s*(.+?)\s*$")


class BackendError(RuntimeError):
    pass


class AnnotatorBackend(Protocol):
    def annotate(self, video: VideoMeta, prompt: str) -> str:
        """Return the raw model response for one video."""


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3


@dataclass
class MockBackend:
    """Deterministic stand-in for a live annotator model.

    Generates ``events_per_video`` events spread over the video, with
    optional quality defects for lint-gate tests.
    """

    seed: int = 0
    events_per_video: int = 3
    duplicate_rate: float = 0.0
    leakage_rate: float = 0.0
    fail_video_ids: frozenset[str] = frozenset()

    _VERBS = ("opens", "closes", "picks up", "puts down", "moves", "inspects")
    _OBJECTS = ("a door", "a laptop", "a cup", "a box", "a chair", "a book")

    def annotate(self, video: VideoMeta, prompt: str) -> str:
        if video.video_id in self.fail_video_ids:
            raise BackendError(f"mock backend failure for {video.video_id}")
        rng = np.random.default_rng((self.seed, hash(video.video_id) & 0xFFFFFFFF))
        n = self.events_per_video
        lines = []
        edges = np.linspace(0.0, video.duration, n + 1)
        for i in range(n):
            lo, hi = edges[i], edges[i + 1]
            width = hi - lo
            start = lo + 0.1 * width + rng.random() * 0.3 * width
            end = start + max(0.5, 0.3 * width + rng.random() * 0.3 * width)
            end = min(end, video.duration)
            if end <= start:
                continue
            verb = self._VERBS[int(rng.integers(len(self._VERBS)))]
            obj = self._OBJECTS[int(rng.integers(len(self._OBJECTS)))]
            desc = f"a person {verb} {obj}"
            if rng.random() < self.leakage_rate:
                desc = "the ending credits appear on screen"
            lines.append(f"{start:.1f}-{end:.1f}: {desc}")
            if rng.random() < self.duplicate_rate and lines:
                lines.append(f"{start:.1f}-{end:.1f}: {desc}")
        return "\n".join(lines)


@dataclass
class HttpBackend:
    """POSTs {"video_id", "duration", "prompt"} and expects {"text": ...}."""

    endpoint: str
    timeout: float = 30.0
    headers: dict = field(default_factory=dict)

    def annotate(self, video: VideoMeta, prompt: str) -> str:
        import httpx

        try:
            response = httpx.post(
                self.endpoint,
                json={"video_id": video.video_id, "duration": video.duration, "prompt": prompt},
                timeout=self.timeout,
                headers=self.headers,
            )
            response.raise_for_status()
        except httpx.HTTPError as exc:
            raise BackendError(str(exc)) from exc
        body = response.json()
        if "text" not in body:
            raise BackendError("backend response missing 'text'")
        return str(body["text"])


@dataclass(frozen=True)
class CandidateAnnotation:
    video_id: str
    duration: float
    query: str
    start: float
    end: float
    model_confidence: float | None = None
    verification_status: str = "unverified"  # unverified | lint_passed | lint_failed

    def to_dict(self) -> dict:
        return {
            "video_id": self.video_id,
            "duration": round(self.duration, 1),
            "query": self.query,
            "span": [round(self.start, 1), round(self.end, 1)],
            "model_confidence": self.model_confidence,
            "verification_status": self.verification_status,
        }


def sample_videos_uniform_duration(
    videos: list[VideoMeta], n: int, bins: int = 8, seed: int = 0
) -> list[VideoMeta]:
    """Equal-count sampling per duration bin over [0, 240] s.

    The remainder is spread deterministically over the first bins; videos
    longer than 240 s form an overflow bin that (along with the others)
    absorbs deficits from under-supplied bins.
    """
    if n > len(videos):
        raise ValueError(f"cannot sample {n} from {len(videos)} videos")
    if bins < 1:
        raise ValueError("need at least one duration bin")
    lo, hi = DURATION_RANGE
    width = (hi - lo) / bins
    pools: list[list[VideoMeta]] = [[] for _ in range(bins + 1)]  # last = overflow
    for video in videos:
        if video.duration > hi:
            pools[bins].append(video)
        else:
            idx = min(int((video.duration - lo) / width), bins - 1)
            pools[idx].append(video)
    for pool in pools:
        pool.sort(key=lambda v: v.video_id)

    base, rem = divmod(n, bins)
    quotas = [base + (1 if i < rem else 0) for i in range(bins)] + [0]

    rng = np.random.default_rng(seed)
    selected: list[VideoMeta] = []
    deficit = 0
    for i, pool in enumerate(pools):
        take = min(quotas[i], len(pool))
        deficit += quotas[i] - take
        if take:
            picks = rng.choice(len(pool), size=take, replace=False)
            selected.extend(pool[j] for j in sorted(picks))
            pools[i] = [p for j, p in enumerate(pool) if j not in set(picks.tolist())]
    # spread any deficit round-robin over bins that still have supply
    while deficit > 0:
        progressed = False
        for i in range(bins + 1):
            if deficit == 0:
                break
            if pools[i]:
                j = int(rng.integers(len(pools[i])))
                selected.append(pools[i].pop(j))
                deficit -= 1
                progressed = True
        if not progressed:  # pragma: no cover - guarded by n <= len(videos)
            raise RuntimeError("insufficient supply while spreading deficit")
    return selected


def parse_events(text: str, duration: float) -> list[tuple[float, float, str]]:
    """Parse 'start-end: description' lines; out-of-order pairs are kept
    as-is for the lint gate to flag."""
    events = []
    for line in text.splitlines():
        m = _EVENT_LINE.match(line)
        if m:
            events.append((float(m.group(1)), float(m.group(2)), m.group(3)))
    return events


def annotate_video(
    video: VideoMeta,
    backend: AnnotatorBackend,
    retry: RetryPolicy = RetryPolicy(),
) -> tuple[list[CandidateAnnotation], list[str]]:
    """One backend round for one video -> unverified candidates + warnings."""
    warnings: list[str] = []
    last_error: BackendError | None = None
    text = None
    for _attempt in range(retry.max_attempts):
        try:
            text = backend.annotate(video, ANNOTATION_PROMPT)
            break
        except BackendError as exc:
            last_error = exc
    if text is None:
        raise BackendError(f"backend failed after {retry.max_attempts} attempts: {last_error}")

    events = parse_events(text, video.duration)
    if not events:
        warnings.append(f"{video.video_id}: unparsable or empty backend response")
        return [], warnings

    midpoints = [(s + e) / 2 for s, e, _ in events]
    quarter = video.duration / 4
    if quarter > 0 and len({min(int(m / quarter), 3) for m in midpoints}) == 1 and len(events) > 1:
        warnings.append(
            f"{video.video_id}: all event midpoints fall within one quarter of the duration"
        )

    candidates = [
        CandidateAnnotation(video.video_id, video.duration, desc, start, end)
        for start, end, desc in events
    ]
    return candidates, warnings


def accept_candidates(
    candidates: list[CandidateAnnotation],
    lint_cfg: LintConfig = LintConfig(),
) -> tuple[Dataset, list[CandidateAnnotation], dict]:
    """Lint-gate candidates; only clean ones enter the dataset fragment.

    Returns (fragment with provenance=auto_annotated, all candidates with
    their verification status set, acceptance report).
    """
    rows = []
    ids = []
    for i, c in enumerate(candidates):
        ann_id = f"{c.video_id}-auto-{i:04d}"
        ids.append(ann_id)
        rows.append(LintRow(ann_id, c.video_id, c.query, c.start, c.end, c.duration))
    report = lint_rows(rows, lint_cfg)
    failed_ids = {f.annotation_id for f in report.error_findings()}

    videos: dict[str, VideoMeta] = {}
    records: list[AnnotationRecord] = []
    updated: list[CandidateAnnotation] = []
    for ann_id, cand in zip(ids, candidates):
        if ann_id in failed_ids:
            updated.append(replace(cand, verification_status="lint_failed"))
            continue
        try:
            span = TimeSpan(cand.start, min(cand.end, cand.duration))
        except ValueError:
            updated.append(replace(cand, verification_status="lint_failed"))
            continue
        updated.append(replace(cand, verification_status="lint_passed"))
        videos.setdefault(
            cand.video_id, VideoMeta(cand.video_id, cand.duration, source_dataset="other")
        )
        records.append(
            AnnotationRecord(
                annotation_id=ann_id,
                video_id=cand.video_id,
                query=cand.query,
                span=span,
                provenance="auto_annotated",
            )
        )
    records.sort(key=lambda r: (r.video_id, r.span.start))
    fragment = Dataset(name="auto_annotated", videos=videos, annotations=records)
    stats = {
        "n_candidates": len(candidates),
        "n_accepted": len(records),
        "n_rejected": len(candidates) - len(records),
        "error_rates": {k.value: v for k, v in error_rates(report).items()},
    }
    return fragment, updated, stats


def run_pipeline(
    videos: list[VideoMeta],
    backend: AnnotatorBackend,
    n: int,
    bins: int = 8,
    seed: int = 0,
    lint_cfg: LintConfig = LintConfig(),
    concurrency: int = 4,
) -> tuple[Dataset, list[CandidateAnnotation], dict]:
    """Sample videos, annotate them (bounded-parallel), lint-gate results."""
    chosen = sample_videos_uniform_duration(videos, n, bins, seed)
    all_candidates: list[CandidateAnnotation] = []
    warnings: list[str] = []
    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        for cands, warns in pool.map(lambda v: annotate_video(v, backend), chosen):
            all_candidates.extend(cands)
            warnings.extend(warns)
    all_candidates.sort(key=lambda c: (c.video_id, c.start))
    fragment, updated, stats = accept_candidates(all_candidates, lint_cfg)
    stats["warnings"] = warnings
    return fragment, updated, stats


def save_candidates(candidates: list[CandidateAnnotation], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as f:
        for c in candidates:
            f.write(json.dumps(c.to_dict(), ensure_ascii=False) + "\n")
