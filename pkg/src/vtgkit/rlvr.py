"""Group-relative reward accounting and reward-plateau early stopping.

Covers the verifiable-reward side of GRPO training: IoU rewards over
think/answer-structured responses, mean-centered group advantages, reward
traces, and plateau detection. Policy optimization itself needs a model
and is out of scope; this module produces the quantities the loss consumes.
"""
from __future__ import annotations

import enum
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .parsing import ParseConfig, parse_prediction
from .spans import TimeSpan, temporal_iou


class RewardMode(str, enum.Enum):
    THINKING_FREE = "thinking_free"
    THINKING_BASED = "thinking_based"


@dataclass(frozen=True)
class RewardConfig:
    mode: RewardMode = RewardMode.THINKING_FREE
    # granted when the think/answer structure is well-formed (thinking_based only)
    format_reward_value: float = 1.0


_THINK_ANSWER = re.compile(
    r"^\s*<think>(?P<thinking>.*?)</think>\s*<answer>(?P<answer>.*?)</answer>\s*$",
    re.DOTALL | re.IGNORECASE,
)


@dataclass(frozen=True)
class Response:
    raw_text: str
    thinking: str = ""
    answer: str = ""
    parsed_span: TimeSpan | None = None
    well_formed: bool = False


class StructureError(ValueError):
    pass


def split_think_answer(raw_text: str, mode: RewardMode = RewardMode.THINKING_FREE) -> tuple[str, str]:
    """Split a response into (thinking, answer) regions.

    Thinking-free responses have an empty thinking region and the whole
    text as answer. In thinking_based mode a missing or malformed
    think/answer structure raises StructureError.
    """
    m = _THINK_ANSWER.match(raw_text)
    if m:
        return m.group("thinking"), m.group("answer")
    if mode is RewardMode.THINKING_BASED:
        raise StructureError("response lacks the think-then-answer structure")
    return "", raw_text


def make_response(raw_text: str, mode: RewardMode = RewardMode.THINKING_FREE,
                  parse_cfg: ParseConfig = ParseConfig()) -> Response:
    """Split regions and parse the answer region into a span."""
    try:
        thinking, answer = split_think_answer(raw_text, mode)
        well_formed = bool(_THINK_ANSWER.match(raw_text)) if mode is RewardMode.THINKING_BASED else True
    except StructureError:
        thinking, answer, well_formed = "", raw_text, False
    result = parse_prediction(answer, parse_cfg)
    return Response(raw_text=raw_text, thinking=thinking, answer=answer,
                    parsed_span=result.span, well_formed=well_formed)


def compute_reward(resp: Response, gt: TimeSpan, cfg: RewardConfig = RewardConfig()) -> float:
    """Accuracy reward is the IoU with the ground truth (0 if unparsable);
    thinking_based mode adds the format reward when the structure holds."""
    acc = temporal_iou(resp.parsed_span, gt) if resp.parsed_span is not None else 0.0
    if cfg.mode is RewardMode.THINKING_BASED:
        return acc + (cfg.format_reward_value if resp.well_formed else 0.0)
    return acc


def group_advantages(rewards: list[float]) -> list[float]:
    """Each rollout's reward minus its group mean."""
    if len(rewards) < 2:
        raise ValueError(f"a rollout group needs at least 2 responses, got {len(rewards)}")
    arr = np.asarray([rewards], dtype=np.float64)
    return _kernels.group_center(arr)[0].tolist()


def group_advantages_batch(rewards: np.ndarray) -> np.ndarray:
    """Mean-center rows of an (n_groups, G) reward matrix."""
    rewards = np.asarray(rewards, dtype=np.float64)
    if rewards.ndim != 2 or rewards.shape[1] < 2:
        raise ValueError("expected an (n_groups, G>=2) reward matrix")
    return _kernels.group_center(rewards)


@dataclass(frozen=True)
class RolloutGroup:
    prompt_id: str
    responses: tuple[Response, ...]
    rewards: tuple[float, ...]
    advantages: tuple[float, ...]

    def __post_init__(self) -> None:
        g = len(self.responses)
        if g < 2 or len(self.rewards) != g or len(self.advantages) != g:
            raise ValueError("responses, rewards and advantages must share length G >= 2")
        if abs(sum(self.advantages)) > 1e-9:
            raise ValueError("group advantages must sum to zero")


@dataclass(frozen=True)
class TraceStep:
    step: int
    mean_reward: float
    group_std: float


@dataclass
class RewardTrace:
    steps: list[TraceStep] = field(default_factory=list)

    def append(self, step: int, mean_reward: float, group_std: float) -> None:
        if self.steps and step <= self.steps[-1].step:
            raise ValueError(f"step indices must be strictly increasing, got {step}")
        if not (math.isfinite(mean_reward) and math.isfinite(group_std)):
            raise ValueError("trace values must be finite")
        self.steps.append(TraceStep(step, mean_reward, group_std))

    def save(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8") as f:
            for s in self.steps:
                f.write(json.dumps(
                    {"step": s.step, "mean_reward": round(s.mean_reward, 9),
                     "group_std": round(s.group_std, 9)}) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "RewardTrace":
        trace = cls()
        with Path(path).open(encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                trace.append(int(obj["step"]), float(obj["mean_reward"]), float(obj["group_std"]))
        return trace


class TraceTooShort(ValueError):
    pass


def _relative_range(values: np.ndarray, floor: float) -> float:
    mean = abs(float(values.mean()))
    return float(values.max() - values.min()) / max(mean, floor)


def detect_plateau(
    trace: RewardTrace,
    window: int = 30,
    rel_tol: float = 0.02,
    mean_floor: float = 1e-6,
) -> int | None:
    """First step where both the mean-reward and within-group-std series
    have settled, i.e. their relative range over the trailing window
    [s - window, s] is at most rel_tol.

    Evaluation starts once 2*window entries are available, so a constant
    trace stops at the first evaluable step. Returns None if the trace
    never plateaus.
    """
    steps = trace.steps
    if len(steps) < 2 * window:
        raise TraceTooShort(f"need at least {2 * window} trace entries, got {len(steps)}")
    step_vals = np.array([s.step for s in steps])
    rewards = np.array([s.mean_reward for s in steps])
    stds = np.array([s.group_std for s in steps])

    for i in range(2 * window - 1, len(steps)):
        s = steps[i].step
        in_window = (step_vals >= s - window) & (step_vals <= s)
        if _relative_range(rewards[in_window], mean_floor) <= rel_tol and \
           _relative_range(stds[in_window], mean_floor) <= rel_tol:
            return s
    return None


@dataclass(frozen=True)
class SpanJitterPolicy:
    """Seeded stand-in for a policy model: answers are the ground-truth
    span jittered by Gaussian noise whose scale shrinks on a linear
    improvement schedule until ``improve_until_step``."""

    initial_scale: float = 8.0
    final_scale: float = 0.5
    improve_until_step: int = 200

    def scale_at(self, step: int) -> float:
        if self.improve_until_step <= 0 or step >= self.improve_until_step:
            return self.final_scale
        frac = step / self.improve_until_step
        return self.initial_scale + (self.final_scale - self.initial_scale) * frac

    def rollout_text(self, gt: TimeSpan, step: int, rng: np.random.Generator) -> str:
        scale = self.scale_at(step)
        start = max(0.0, gt.start + rng.normal(0.0, scale))
        end = gt.end + rng.normal(0.0, scale)
        if end <= start:
            end = start + 0.1
        return f"{start:.1f}s to {end:.1f}s"


def simulate_rollouts(
    gt_spans: dict[str, TimeSpan],
    policy: SpanJitterPolicy,
    group_size: int = 8,
    steps: int = 100,
    seed: int = 0,
    reward_cfg: RewardConfig = RewardConfig(),
) -> tuple[RewardTrace, list[RolloutGroup]]:
    """Desk-scale substitute for RLVR training: deterministic rollout
    groups and a reward trace suitable for plateau-detection tests."""
    if group_size < 2:
        raise ValueError("group_size must be at least 2")
    rng = np.random.default_rng(seed)
    trace = RewardTrace()
    final_groups: list[RolloutGroup] = []
    prompt_ids = sorted(gt_spans)
    for step in range(1, steps + 1):
        step_rewards = []
        step_stds = []
        groups_this_step = []
        for prompt_id in prompt_ids:
            gt = gt_spans[prompt_id]
            responses = tuple(
                make_response(policy.rollout_text(gt, step, rng), reward_cfg.mode)
                for _ in range(group_size)
            )
            rewards = tuple(compute_reward(r, gt, reward_cfg) for r in responses)
            advantages = tuple(group_advantages(list(rewards)))
            groups_this_step.append(RolloutGroup(prompt_id, responses, rewards, advantages))
            step_rewards.extend(rewards)
            step_stds.append(float(np.std(rewards)))
        trace.append(step, float(np.mean(step_rewards)), float(np.mean(step_stds)))
        final_groups = groups_this_step
    return trace, final_groups


def save_groups(groups: list[RolloutGroup], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as f:
        for g in groups:
            f.write(json.dumps({
                "prompt_id": g.prompt_id,
                "rewards": [round(r, 9) for r in g.rewards],
                "advantages": [round(a, 9) for a in g.advantages],
                "responses": [r.raw_text for r in g.responses],
            }) + "\n")
