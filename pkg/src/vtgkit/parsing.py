"""Extract time spans from free-form model output.

Ordered rule families, first rule that yields a valid ordered pair wins:

  seconds_pair    "12.5 to 30.0", "12.5s - 30.0s", "3, 9.5"
  clock_pair      "01:05 to 01:30", "00:01:05 - 00:01:30"
  structured_pair "[12.5, 30.0]", "(12.5, 30.0)", '{"start": 12.5, "end": 30.0}'
  frame_pair      "frames 10 to 25" (converted via index / fps)
  answer_tag      <answer>...</answer> region re-parsed by the rules above

Within one rule, the last candidate pair in the text wins (models restate
the final answer last). Swapped endpoints are reordered with a trace note.
"""
from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field

from .spans import TimeSpan

RULE_ORDER = ("seconds_pair", "clock_pair", "structured_pair", "frame_pair", "answer_tag")

FAIL_NO_RULE = "no_rule_matched"
FAIL_ZERO_LENGTH = "zero_length"
FAIL_NEGATIVE = "negative_endpoint"

# A plain number not embedded in a clock time or another number.
_NUM = r"-?\d+(?:\.\d+)?"
_NUM_GUARD = r"(?<![\d:.])({num})(?![\d:]|\.\d)".format(num=_NUM)
_SEC_SUFFIX = r"(\s*(?:seconds|second|secs|sec|s)\b\.?)?"
_PAIR_SEP = r"\s*(?:to|until|till|through|and|[-–~,])\s*"

_SECONDS_PAIR = re.compile(
    _NUM_GUARD + _SEC_SUFFIX + _PAIR_SEP + _NUM_GUARD + _SEC_SUFFIX,
    re.IGNORECASE,
)

_CLOCK = r"(\d{1,2}):([0-5]\d)(?::([0-5]\d))?(?:\.(\d+))?"
_CLOCK_PAIR = re.compile(
    r"(?<![\d:])" + _CLOCK + r"(?![\d:])" + _PAIR_SEP + r"(?<![\d:])" + _CLOCK + r"(?![\d:])",
    re.IGNORECASE,
)

_BRACKET_PAIR = re.compile(
    r"[\[({{]\s*({num})\s*,\s*({num})\s*[\])}}]".format(num=_NUM)
)
_JSON_START_END = re.compile(
    r"[\"']?starts?[\"']?\s*(?:[:=]|at)\s*[\"']?({num})s?\b"
    r".{{0,40}}?"
    r"[\"']?ends?[\"']?\s*(?:[:=]|at)\s*[\"']?({num})".format(num=_NUM),
    re.IGNORECASE | re.DOTALL,
)

_FRAME_PAIR = re.compile(
    r"frames?\s+(?:at\s+)?(\d+)(?![\d.:])" + _PAIR_SEP + r"(?:frames?\s+)?(\d+)(?![\d.:])",
    re.IGNORECASE,
)

_ANSWER_TAG = re.compile(r"<answer>(.*?)</answer>", re.IGNORECASE | re.DOTALL)

_FRAME_CONTEXT = re.compile(r"frames?\s*(?:at\s*)?$", re.IGNORECASE)


@dataclass(frozen=True)
class ParseConfig:
    """Parser settings; fps converts frame indices to seconds."""

    fps_for_frame_indices: float = 2.0
    rules: tuple[str, ...] = RULE_ORDER

    def __post_init__(self) -> None:
        if not self.fps_for_frame_indices > 0:
            raise ValueError("fps_for_frame_indices must be positive")
        if not self.rules:
            raise ValueError("rule list must be non-empty")
        unknown = set(self.rules) - set(RULE_ORDER)
        if unknown:
            raise ValueError(f"unknown rules: {sorted(unknown)}")


@dataclass(frozen=True)
class PredictionRecord:
    annotation_id: str
    raw_text: str
    span: TimeSpan | None = None
    failure_reason: str | None = None
    parser_trace: str = ""

    @property
    def parsed(self) -> bool:
        return self.span is not None


@dataclass
class ParseResult:
    span: TimeSpan | None
    failure_reason: str | None
    trace: str


def _seconds_candidates(text: str) -> list[tuple[float, float]]:
    out = []
    for m in _SECONDS_PAIR.finditer(text):
        a, suf_a, b, suf_b = m.group(1), m.group(2), m.group(3), m.group(4)
        # bare integer pairs right after "frame(s)" are frame indices, not seconds
        plain_ints = "." not in a and "." not in b and not (suf_a or suf_b)
        if plain_ints and _FRAME_CONTEXT.search(text[max(0, m.start() - 12):m.start()]):
            continue
        out.append((float(a), float(b)))
    return out


def _clock_to_seconds(h_or_m: str, m_or_s: str, s: str | None, frac: str | None) -> float:
    if s is None:
        total = 60.0 * int(h_or_m) + int(m_or_s)
    else:
        total = 3600.0 * int(h_or_m) + 60.0 * int(m_or_s) + int(s)
    if frac:
        total += float("0." + frac)
    return total


def _clock_candidates(text: str) -> list[tuple[float, float]]:
    out = []
    for m in _CLOCK_PAIR.finditer(text):
        a = _clock_to_seconds(m.group(1), m.group(2), m.group(3), m.group(4))
        b = _clock_to_seconds(m.group(5), m.group(6), m.group(7), m.group(8))
        out.append((a, b))
    return out


def _structured_candidates(text: str) -> list[tuple[float, float]]:
    out = [(float(m.group(1)), float(m.group(2))) for m in _BRACKET_PAIR.finditer(text)]
    out += [(float(m.group(1)), float(m.group(2))) for m in _JSON_START_END.finditer(text)]
    return out


def _frame_candidates(text: str, fps: float) -> list[tuple[float, float]]:
    return [(int(m.group(1)) / fps, int(m.group(2)) / fps) for m in _FRAME_PAIR.finditer(text)]


def parse_prediction(raw_text: str, cfg: ParseConfig = ParseConfig()) -> ParseResult:
    """Parse one model output into a span, or a failure reason."""
    return _parse(raw_text, cfg, cfg.rules)


def _parse(text: str, cfg: ParseConfig, rules: tuple[str, ...]) -> ParseResult:
    soft_failure: str | None = None
    for rule in rules:
        if rule == "seconds_pair":
            candidates = _seconds_candidates(text)
        elif rule == "clock_pair":
            candidates = _clock_candidates(text)
        elif rule == "structured_pair":
            candidates = _structured_candidates(text)
        elif rule == "frame_pair":
            candidates = _frame_candidates(text, cfg.fps_for_frame_indices)
        elif rule == "answer_tag":
            regions = _ANSWER_TAG.findall(text)
            if not regions:
                continue
            inner_rules = tuple(r for r in cfg.rules if r != "answer_tag")
            sub = _parse(regions[-1], cfg, inner_rules)
            if sub.span is not None:
                return ParseResult(sub.span, None, f"answer_tag>{sub.trace}")
            if sub.failure_reason in (FAIL_ZERO_LENGTH, FAIL_NEGATIVE):
                soft_failure = soft_failure or sub.failure_reason
            continue
        else:  # pragma: no cover - guarded in ParseConfig
            raise ValueError(f"unknown rule {rule!r}")

        if not candidates:
            continue
        start, end = candidates[-1]
        notes = [rule]
        if len(candidates) > 1:
            notes.append(f"last_of_{len(candidates)}")
        if start < 0 or end < 0:
            soft_failure = soft_failure or FAIL_NEGATIVE
            continue
        if start == end:
            soft_failure = soft_failure or FAIL_ZERO_LENGTH
            continue
        if start > end:
            start, end = end, start
            notes.append("reordered")
        return ParseResult(TimeSpan(start, end), None, "+".join(notes))

    return ParseResult(None, soft_failure or FAIL_NO_RULE, "")


@dataclass
class BatchSummary:
    n_total: int = 0
    n_parsed: int = 0
    failures_by_reason: Counter = field(default_factory=Counter)


def parse_batch(lines: list[str], cfg: ParseConfig = ParseConfig()) -> tuple[list[PredictionRecord], BatchSummary]:
    """Parse prediction-file lines, order-preserving.

    Lines are JSONL objects {"annotation_id", "raw_text", "span"?}; a span
    already present is taken as pre-parsed. Non-JSON lines are parsed as
    bare text (blank lines fail with no rule matched).
    """
    records: list[PredictionRecord] = []
    summary = BatchSummary()
    for line in lines:
        stripped = line.strip()
        ann_id, raw_text, given_span = "", stripped, None
        if stripped.startswith("{"):
            try:
                obj = json.loads(stripped)
                ann_id = str(obj.get("annotation_id", ""))
                raw_text = str(obj.get("raw_text", ""))
                given_span = obj.get("span")
            except json.JSONDecodeError:
                pass

        if given_span is not None:
            record = _from_pregiven(ann_id, raw_text, given_span)
        else:
            result = parse_prediction(raw_text, cfg)
            record = PredictionRecord(ann_id, raw_text, result.span, result.failure_reason, result.trace)

        records.append(record)
        summary.n_total += 1
        if record.span is not None:
            summary.n_parsed += 1
        else:
            summary.failures_by_reason[record.failure_reason] += 1
    return records, summary


def _from_pregiven(ann_id: str, raw_text: str, given_span) -> PredictionRecord:
    try:
        start, end = float(given_span[0]), float(given_span[1])
    except (TypeError, ValueError, IndexError):
        return PredictionRecord(ann_id, raw_text, None, FAIL_NO_RULE, "")
    if start < 0 or end < 0:
        return PredictionRecord(ann_id, raw_text, None, FAIL_NEGATIVE, "")
    if start == end:
        return PredictionRecord(ann_id, raw_text, None, FAIL_ZERO_LENGTH, "")
    trace = "pregiven"
    if start > end:
        start, end = end, start
        trace += "+reordered"
    try:
        return PredictionRecord(ann_id, raw_text, TimeSpan(start, end), None, trace)
    except ValueError:
        return PredictionRecord(ann_id, raw_text, None, FAIL_NO_RULE, "")


def render_span(span: TimeSpan, fmt: str, fps: float = 2.0) -> str:
    """Render a span in one of the parseable textual formats."""
    if fmt == "seconds_pair":
        return f"{span.start:.1f}s to {span.end:.1f}s"
    if fmt == "clock_pair":
        return f"{_to_clock(span.start)} to {_to_clock(span.end)}"
    if fmt == "structured_pair":
        return f"[{span.start:.1f}, {span.end:.1f}]"
    if fmt == "frame_pair":
        return f"frames {round(span.start * fps)} to {round(span.end * fps)}"
    raise ValueError(f"unknown format {fmt!r}")


def _to_clock(t: float) -> str:
    total = round(t)
    return f"{total // 60:02d}:{total % 60:02d}"
