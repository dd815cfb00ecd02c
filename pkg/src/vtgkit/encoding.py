"""Frame-schedule and token-budget planning for timestamp encodings.

Plans are pure data artifacts: frame sampling times, merged-frame groups,
per-group token budgets, effective resolutions, and the rendered
timestamp payloads (interleaved prefixes, a non-interleaved instruction,
or visual-overlay descriptors). No video or tokenizer is touched.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path

PLAN_SCHEMA_VERSION = 1


class EncodingScheme(str, enum.Enum):
    INTERLEAVED_PREFIX = "interleaved_prefix"
    NONINTERLEAVED_INSTRUCTION = "noninterleaved_instruction"
    VISUAL_OVERLAY = "visual_overlay"
    # handled inside model architectures; named here so experiment configs
    # can address all four scheme rows, payload intentionally empty
    POSITION_EMBEDDING_PASSTHROUGH = "position_embedding_passthrough"


class TimestampFormat(str, enum.Enum):
    RAW_SECONDS = "raw_seconds"
    FRAME_INDEX = "frame_index"


@dataclass(frozen=True)
class PatchGeometry:
    """Pixels represented by one visual token along each side.

    Default mirrors a 14 px patch with 2x2 spatial merging: 28 px/token.
    Declared config, not hard-wired to any one vision stack.
    """

    px_per_token_side: int = 28

    def tokens_for(self, width: int, height: int) -> int:
        u = self.px_per_token_side
        return max(1, math.ceil(width / u)) * max(1, math.ceil(height / u))


class BudgetError(ValueError):
    def __init__(self, message: str, max_feasible_duration: float):
        super().__init__(message)
        self.max_feasible_duration = max_feasible_duration


@dataclass(frozen=True)
class FramePlan:
    frame_times: tuple[float, ...]
    duration: float
    fps: float
    group_size: int
    per_group_tokens: int
    effective_resolution: tuple[int, int]

    def __post_init__(self) -> None:
        if any(b <= a for a, b in zip(self.frame_times, self.frame_times[1:])):
            raise ValueError("frame_times must be strictly increasing")

    @property
    def n_frames(self) -> int:
        return len(self.frame_times)

    @property
    def n_groups(self) -> int:
        return math.ceil(self.n_frames / self.group_size)

    @property
    def total_tokens(self) -> int:
        return self.per_group_tokens * self.n_groups

    def group_start_times(self) -> list[float]:
        return [self.frame_times[i] for i in range(0, self.n_frames, self.group_size)]

    def to_dict(self) -> dict:
        return {
            "schema_version": PLAN_SCHEMA_VERSION,
            "frame_times": [round(t, 6) for t in self.frame_times],
            "duration": self.duration,
            "fps": self.fps,
            "group_size": self.group_size,
            "per_group_tokens": self.per_group_tokens,
            "effective_resolution": list(self.effective_resolution),
        }


def _fit_resolution(tokens: int, native: tuple[int, int] | None, geometry: PatchGeometry) -> tuple[int, int]:
    """Largest isotropically scaled resolution whose token count fits."""
    u = geometry.px_per_token_side
    if native is None:
        side = max(1, int(math.isqrt(tokens)))
        return side * u, side * u
    w, h = native
    native_pw = max(1, math.ceil(w / u))
    native_ph = max(1, math.ceil(h / u))
    if native_pw * native_ph <= tokens:
        return w, h
    scale = math.sqrt(tokens * u * u / (w * h))
    pw = max(1, int(w * scale // u))
    ph = max(1, int(h * scale // u))
    while pw * ph > tokens:
        if pw >= ph:
            pw -= 1
        else:
            ph -= 1
    # greedily reclaim budget head-room lost to flooring
    while (pw + 1) * ph <= tokens and (pw + 1) <= native_pw:
        pw += 1
    while pw * (ph + 1) <= tokens and (ph + 1) <= native_ph:
        ph += 1
    return pw * u, ph * u


def plan_frames(
    duration: float,
    fps: float = 2.0,
    min_tokens: int = 16,
    total_tokens: int = 3584,
    native_resolution: tuple[int, int] | None = None,
    group_size: int = 2,
    geometry: PatchGeometry = PatchGeometry(),
) -> FramePlan:
    """Sample frames at fps, merge them into groups, split the token budget.

    Frames are sampled at t = 0, 1/fps, 2/fps, ... strictly below the
    duration. Raises BudgetError (reporting the maximal feasible duration)
    when even min_tokens per group cannot fit in total_tokens.
    """
    if duration <= 0:
        raise ValueError(f"duration must be positive, got {duration}")
    if fps <= 0:
        raise ValueError(f"fps must be positive, got {fps}")
    if min_tokens <= 0 or total_tokens <= 0 or group_size <= 0:
        raise ValueError("min_tokens, total_tokens and group_size must be positive")

    n_frames = max(1, math.ceil(duration * fps))
    frame_times = tuple(k / fps for k in range(n_frames))
    n_groups = math.ceil(n_frames / group_size)

    if min_tokens * n_groups > total_tokens:
        max_groups = total_tokens // min_tokens
        max_duration = max_groups * group_size / fps
        raise BudgetError(
            f"budget infeasible: {n_groups} groups x min {min_tokens} tokens exceeds "
            f"{total_tokens}; maximal feasible duration is {max_duration:.1f}s",
            max_feasible_duration=max_duration,
        )

    budget_share = total_tokens // n_groups
    if native_resolution is not None:
        native_cap = geometry.tokens_for(*native_resolution)
        per_group = max(min_tokens, min(budget_share, native_cap))
    else:
        per_group = budget_share
    resolution = _fit_resolution(per_group, native_resolution, geometry)
    return FramePlan(
        frame_times=frame_times,
        duration=duration,
        fps=fps,
        group_size=group_size,
        per_group_tokens=per_group,
        effective_resolution=resolution,
    )


def _fmt_seconds(t: float) -> str:
    return f"{t:.1f}s"


def render_interleaved(plan: FramePlan, fmt: TimestampFormat = TimestampFormat.RAW_SECONDS) -> list[str]:
    """One timestamp prefix per merged group, at the group's first frame."""
    starts = plan.group_start_times()
    if not starts:
        raise ValueError("cannot render prefixes for an empty plan")
    if fmt is TimestampFormat.RAW_SECONDS:
        return [_fmt_seconds(t) for t in starts]
    return [str(i + 1) for i in range(len(starts))]


def render_noninterleaved(plan: FramePlan) -> str:
    """Single prompt instruction naming the frame count and sample times."""
    if plan.n_frames == 0:
        raise ValueError("cannot render an instruction for an empty plan")
    times = ", ".join(f"{t:.1f}" for t in plan.frame_times)
    return (
        f"This video samples {plan.n_frames} frames of a "
        f"{plan.duration:.1f}-second video at {times} seconds."
    )


def overlay_spec(plan: FramePlan) -> list[dict]:
    """Per-frame visual-overlay descriptors; nothing is rasterized."""
    return [
        {"text": _fmt_seconds(t), "color": "red", "size_pt": 40, "anchor": "bottom_left"}
        for t in plan.frame_times
    ]


@dataclass(frozen=True)
class EncodingArtifact:
    scheme: EncodingScheme
    timestamp_format: TimestampFormat
    plan: FramePlan
    payload: list | str | None

    def to_dict(self) -> dict:
        return {
            "schema_version": PLAN_SCHEMA_VERSION,
            "scheme": self.scheme.value,
            "timestamp_format": self.timestamp_format.value,
            "plan": self.plan.to_dict(),
            "payload": self.payload,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def build_artifact(
    plan: FramePlan,
    scheme: EncodingScheme,
    fmt: TimestampFormat = TimestampFormat.RAW_SECONDS,
) -> EncodingArtifact:
    if scheme is EncodingScheme.INTERLEAVED_PREFIX:
        payload: list | str | None = render_interleaved(plan, fmt)
    elif scheme is EncodingScheme.NONINTERLEAVED_INSTRUCTION:
        payload = render_noninterleaved(plan)
    elif scheme is EncodingScheme.VISUAL_OVERLAY:
        payload = overlay_spec(plan)
    else:
        payload = None
    return EncodingArtifact(scheme=scheme, timestamp_format=fmt, plan=plan, payload=payload)


def save_artifact(artifact: EncodingArtifact, path: str | Path) -> None:
    Path(path).write_text(artifact.to_json() + "\n", encoding="utf-8")
