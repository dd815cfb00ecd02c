"""Mechanical dataset linting against the annotation quality criteria.

Machine-checkable criteria (query uniqueness, temporal-position leakage,
segment bounds) produce ErrorKind findings. Criteria that need a human or
a model (event existence, query clarity, boundary precision,
exhaustiveness) are only ever routed to review via review flags, based on
cheap suspicion heuristics.
"""
from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .dataset import Dataset, ErrorKind

DEFAULT_LEAKAGE_LEXICON = (
    "ending credits",
    "beginning of the video",
    "end of the video",
    "intro",
    "outro",
)

# Dropped during query normalization; articles carry no event content and
# would otherwise block near-duplicate detection on trivial rewordings.
_STOP_TOKENS = frozenset({"a", "an", "the"})

_VAGUE_TOKENS = frozenset({"something", "someone", "somewhere", "stuff", "things", "continues"})

REVIEW_FLAGS = ("existence", "clarity", "precision", "exhaustiveness")

_PUNCT = re.compile(r"[^\w\s]")


@dataclass(frozen=True)
class LintConfig:
    near_dup_threshold: float = 0.9
    leakage_lexicon: tuple[str, ...] = DEFAULT_LEAKAGE_LEXICON
    bounds_tolerance: float = 0.5
    # similarity band routed to exhaustiveness review (related, not duplicate)
    related_band: tuple[float, float] = (0.6, 0.9)

    def __post_init__(self) -> None:
        if not 0.0 <= self.near_dup_threshold <= 1.0:
            raise ValueError("near_dup_threshold must be in [0, 1]")
        if not self.leakage_lexicon:
            raise ValueError("leakage lexicon must be non-empty")
        if self.bounds_tolerance < 0:
            raise ValueError("bounds_tolerance must be non-negative")


@dataclass(frozen=True)
class Finding:
    annotation_id: str
    kind: str  # ErrorKind value, or one of REVIEW_FLAGS
    rule_id: str
    detail: str
    is_review: bool

    def to_dict(self) -> dict:
        return {
            "annotation_id": self.annotation_id,
            "kind": self.kind,
            "rule_id": self.rule_id,
            "detail": self.detail,
            "is_review": self.is_review,
        }


@dataclass
class LintReport:
    n_records: int
    findings: list[Finding] = field(default_factory=list)
    per_video: dict[str, int] = field(default_factory=dict)

    def error_findings(self) -> list[Finding]:
        return [f for f in self.findings if not f.is_review]

    def review_findings(self) -> list[Finding]:
        return [f for f in self.findings if f.is_review]

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "n_records": self.n_records,
            "findings": [f.to_dict() for f in self.findings],
            "error_rates": {k.value: v for k, v in error_rates(self).items()},
            "per_video_finding_counts": self.per_video,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@dataclass(frozen=True)
class LintRow:
    """Pre-validation view of one annotation line, as lint sees it."""

    annotation_id: str
    video_id: str
    query: str
    start: float
    end: float
    duration: float


def normalize_query(query: str) -> list[str]:
    """Case-folded, punctuation-stripped tokens with articles dropped."""
    text = _PUNCT.sub(" ", query.casefold())
    return [t for t in text.split() if t not in _STOP_TOKENS]


def token_jaccard(a: list[str], b: list[str]) -> float:
    """Multiset Jaccard similarity of two token lists."""
    if not a and not b:
        return 1.0
    ca, cb = Counter(a), Counter(b)
    inter = sum((ca & cb).values())
    union = sum((ca | cb).values())
    return inter / union if union else 0.0


def _contains_phrase(tokens: list[str], phrase_tokens: list[str]) -> bool:
    n = len(phrase_tokens)
    if n == 0 or n > len(tokens):
        return False
    return any(tokens[i:i + n] == phrase_tokens for i in range(len(tokens) - n + 1))


def rows_from_dataset(dataset: Dataset) -> list[LintRow]:
    return [
        LintRow(
            annotation_id=a.annotation_id,
            video_id=a.video_id,
            query=a.query,
            start=a.span.start,
            end=a.span.end,
            duration=dataset.videos[a.video_id].duration,
        )
        for a in dataset.annotations
    ]


def rows_from_file(path: str | Path) -> list[LintRow]:
    """Lenient row reader so lint can flag records the strict loader rejects."""
    rows = []
    with Path(path).open(encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                span = obj.get("span", [0.0, 0.0])
                rows.append(
                    LintRow(
                        annotation_id=str(obj.get("annotation_id", "")),
                        video_id=str(obj.get("video_id", "")),
                        query=str(obj.get("query", "")),
                        start=float(span[0]),
                        end=float(span[1]),
                        duration=float(obj.get("duration", 0.0)),
                    )
                )
            except (json.JSONDecodeError, TypeError, ValueError, IndexError):
                continue
    return rows


def lint_rows(rows: list[LintRow], cfg: LintConfig = LintConfig()) -> LintReport:
    """Lint is total: every record is inspected, nothing raises."""
    findings: list[Finding] = []

    by_video: dict[str, list[LintRow]] = {}
    for row in rows:
        by_video.setdefault(row.video_id, []).append(row)

    lexicon_tokens = [normalize_query(p) for p in cfg.leakage_lexicon]

    for video_id, group in by_video.items():
        # queries of one video are compared pairwise; the canonically later
        # annotation_id carries the finding so results are order-insensitive
        ordered = sorted(group, key=lambda r: r.annotation_id)
        tokens = {r.annotation_id: normalize_query(r.query) for r in ordered}
        for i in range(len(ordered)):
            for j in range(i + 1, len(ordered)):
                first, second = ordered[i], ordered[j]
                sim = token_jaccard(tokens[first.annotation_id], tokens[second.annotation_id])
                if sim >= cfg.near_dup_threshold:
                    exact = tokens[first.annotation_id] == tokens[second.annotation_id]
                    findings.append(
                        Finding(
                            annotation_id=second.annotation_id,
                            kind=ErrorKind.DUPLICATE_QUERY.value,
                            rule_id="uniq.exact" if exact else "uniq.near",
                            detail=f"query duplicates {first.annotation_id!r} (similarity {sim:.3f})",
                            is_review=False,
                        )
                    )
                elif cfg.related_band[0] <= sim < cfg.related_band[1]:
                    findings.append(
                        Finding(
                            annotation_id=second.annotation_id,
                            kind="exhaustiveness",
                            rule_id="review.exhaustiveness",
                            detail=f"query related to {first.annotation_id!r} (similarity {sim:.3f}); "
                                   "check for repeated occurrences of the event",
                            is_review=True,
                        )
                    )

    for row in rows:
        q_tokens = normalize_query(row.query)

        for phrase, p_tokens in zip(cfg.leakage_lexicon, lexicon_tokens):
            if _contains_phrase(q_tokens, p_tokens):
                findings.append(
                    Finding(row.annotation_id, ErrorKind.INFO_LEAKAGE.value, "leak.lexicon",
                            f"query contains position-leaking phrase {phrase!r}", is_review=False)
                )

        if row.end == row.start:
            findings.append(
                Finding(row.annotation_id, ErrorKind.INACCURATE_SEGMENT.value, "seg.zero_length",
                        f"zero-length span ({row.start}, {row.end})", is_review=False)
            )
        elif row.end < row.start or row.start < 0:
            findings.append(
                Finding(row.annotation_id, ErrorKind.INACCURATE_SEGMENT.value, "seg.invalid",
                        f"invalid span ({row.start}, {row.end})", is_review=False)
            )
        if row.duration > 0 and row.end > row.duration + cfg.bounds_tolerance:
            findings.append(
                Finding(row.annotation_id, ErrorKind.INACCURATE_SEGMENT.value, "seg.bounds",
                        f"span end {row.end} exceeds video duration {row.duration}", is_review=False)
            )

        if len(q_tokens) < 3 or any(t in _VAGUE_TOKENS for t in q_tokens):
            findings.append(
                Finding(row.annotation_id, "clarity", "review.clarity",
                        "query may be too short or vague for definitive grounding", is_review=True)
            )
        span_len = row.end - row.start
        if row.duration > 0 and span_len > 0:
            if span_len >= 0.98 * row.duration:
                findings.append(
                    Finding(row.annotation_id, "existence", "review.existence",
                            "span covers the whole video; verify a distinct event exists", is_review=True)
                )
            elif span_len >= 0.9 * row.duration:
                findings.append(
                    Finding(row.annotation_id, "precision", "review.precision",
                            "span covers most of the video; boundaries may be imprecise", is_review=True)
                )

    video_of = {r.annotation_id: r.video_id for r in rows}
    per_video = Counter(video_of[f.annotation_id] for f in findings if f.annotation_id in video_of)
    return LintReport(n_records=len(rows), findings=findings, per_video=dict(per_video))


def lint_dataset(dataset: Dataset, cfg: LintConfig = LintConfig()) -> LintReport:
    return lint_rows(rows_from_dataset(dataset), cfg)


def error_rates(report: LintReport) -> dict[ErrorKind, float]:
    """Fraction of records carrying at least one finding of each kind."""
    rates: dict[ErrorKind, float] = {}
    if report.n_records == 0:
        return {kind: 0.0 for kind in ErrorKind}
    for kind in ErrorKind:
        flagged = {f.annotation_id for f in report.findings if not f.is_review and f.kind == kind.value}
        rates[kind] = len(flagged) / report.n_records
    return rates


def load_lint_config(path: str | Path) -> LintConfig:
    """Read a key = value config file (values in JSON syntax)."""
    values: dict = {}
    with Path(path).open(encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, _, raw = line.partition("=")
            key = key.strip()
            raw = raw.strip()
            try:
                value = json.loads(raw)
            except json.JSONDecodeError:
                value = raw.strip("\"'")
            values[key] = value
    kwargs = {}
    if "near_dup_threshold" in values:
        kwargs["near_dup_threshold"] = float(values["near_dup_threshold"])
    if "leakage_lexicon" in values:
        lex = values["leakage_lexicon"]
        if isinstance(lex, str):
            lex = [p.strip() for p in lex.split(",") if p.strip()]
        kwargs["leakage_lexicon"] = tuple(lex)
    if "bounds_tolerance" in values:
        kwargs["bounds_tolerance"] = float(values["bounds_tolerance"])
    return LintConfig(**kwargs)
