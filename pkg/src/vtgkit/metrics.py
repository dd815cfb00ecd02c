"""Recall@IoU-threshold and mean-IoU evaluation over prediction files."""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .parsing import PredictionRecord
from .spans import iou_array

R1_THRESHOLDS = (0.3, 0.5, 0.7)


class UnparsedPolicy(str, enum.Enum):
    # score_zero keeps comparisons total: an output we cannot parse scores 0
    # rather than silently inflating the average.
    SCORE_ZERO = "score_zero"
    EXCLUDE = "exclude"


class EvaluationError(ValueError):
    pass


def recall_at(ious: list[float] | np.ndarray, m: float) -> float:
    """Percentage of IoU values strictly exceeding threshold m."""
    ious = np.asarray(ious, dtype=np.float64)
    if ious.size == 0:
        raise EvaluationError("recall_at over an empty IoU list is undefined")
    if not 0.0 < m < 1.0:
        raise EvaluationError(f"threshold must be in (0, 1), got {m}")
    return 100.0 * float(np.count_nonzero(ious > m)) / ious.size


def mean_iou(ious: list[float] | np.ndarray) -> float:
    """Arithmetic mean of IoU values, as a percentage."""
    ious = np.asarray(ious, dtype=np.float64)
    if ious.size == 0:
        raise EvaluationError("mean_iou over an empty IoU list is undefined")
    return 100.0 * float(ious.mean())


@dataclass
class BenchmarkMetrics:
    n_total: int
    n_scored: int
    n_unparsed: int
    r1_03: float | None
    r1_05: float | None
    r1_07: float | None
    miou: float | None

    def to_dict(self) -> dict:
        return {
            "n_total": self.n_total,
            "n_scored": self.n_scored,
            "n_unparsed": self.n_unparsed,
            "r1_03": self.r1_03,
            "r1_05": self.r1_05,
            "r1_07": self.r1_07,
            "miou": self.miou,
        }


@dataclass
class EvalReport:
    per_benchmark: dict[str, BenchmarkMetrics] = field(default_factory=dict)
    n_scored: int = 0
    n_unparsed: int = 0
    policy: UnparsedPolicy = UnparsedPolicy.SCORE_ZERO

    def to_dict(self) -> dict:
        return {
            "policy": self.policy.value,
            "n_scored": self.n_scored,
            "n_unparsed": self.n_unparsed,
            "per_benchmark": {k: v.to_dict() for k, v in self.per_benchmark.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text_table(self) -> str:
        """Aligned table, columns R1@0.3 | R1@0.5 | R1@0.7 | mIoU."""
        name_w = max([len(k) for k in self.per_benchmark] + [len("Benchmark")])
        header = f"{'Benchmark':<{name_w}}  {'R1@0.3':>7}  {'R1@0.5':>7}  {'R1@0.7':>7}  {'mIoU':>7}"
        lines = [header, "-" * len(header)]
        for name in sorted(self.per_benchmark):
            m = self.per_benchmark[name]
            cells = [
                f"{v:7.1f}" if v is not None else f"{'-':>7}"
                for v in (m.r1_03, m.r1_05, m.r1_07, m.miou)
            ]
            lines.append(f"{name:<{name_w}}  " + "  ".join(cells))
        return "\n".join(lines)


def _metrics_from_ious(ious: np.ndarray, n_total: int, n_scored: int, n_unparsed: int) -> BenchmarkMetrics:
    if ious.size == 0:
        return BenchmarkMetrics(n_total, n_scored, n_unparsed, None, None, None, None)
    return BenchmarkMetrics(
        n_total,
        n_scored,
        n_unparsed,
        recall_at(ious, 0.3),
        recall_at(ious, 0.5),
        recall_at(ious, 0.7),
        mean_iou(ious),
    )


def evaluate(
    dataset: Dataset,
    predictions: list[PredictionRecord],
    policy: UnparsedPolicy = UnparsedPolicy.SCORE_ZERO,
) -> EvalReport:
    """Score predictions against the dataset, per constituent benchmark.

    Benchmarks are keyed by the video's ``source_dataset``. Unparsable
    predictions score 0 (score_zero) or are dropped from the metric pool
    (exclude); both ways they are counted in ``n_unparsed``.
    """
    by_id = {a.annotation_id: a for a in dataset.annotations}
    seen: set[str] = set()
    # benchmark -> (ious considered for metrics, n_total, n_scored, n_unparsed)
    pools: dict[str, list[float]] = {}
    counts: dict[str, list[int]] = {}

    pred_rows = []
    for pred in predictions:
        ann = by_id.get(pred.annotation_id)
        if ann is None:
            raise EvaluationError(f"prediction references unknown annotation_id {pred.annotation_id!r}")
        if pred.annotation_id in seen:
            raise EvaluationError(f"duplicate prediction for annotation_id {pred.annotation_id!r}")
        seen.add(pred.annotation_id)
        bench = dataset.videos[ann.video_id].source_dataset
        pred_rows.append((bench, pred, ann))
        pools.setdefault(bench, [])
        counts.setdefault(bench, [0, 0, 0])  # total, scored, unparsed

    parsed = [(b, p, a) for b, p, a in pred_rows if p.span is not None]
    if parsed:
        ious = iou_array(
            np.array([p.span.start for _, p, _ in parsed]),
            np.array([p.span.end for _, p, _ in parsed]),
            np.array([a.span.start for _, _, a in parsed]),
            np.array([a.span.end for _, _, a in parsed]),
        )
    else:
        ious = np.zeros(0)

    idx = 0
    for bench, pred, _ann in pred_rows:
        counts[bench][0] += 1
        if pred.span is not None:
            counts[bench][1] += 1
            pools[bench].append(float(ious[idx]))
            idx += 1
        else:
            counts[bench][2] += 1
            if policy is UnparsedPolicy.SCORE_ZERO:
                pools[bench].append(0.0)

    report = EvalReport(policy=policy)
    for bench in sorted(pools):
        n_total, n_scored, n_unparsed = counts[bench]
        report.per_benchmark[bench] = _metrics_from_ious(
            np.asarray(pools[bench]), n_total, n_scored, n_unparsed
        )
        report.n_scored += n_scored
        report.n_unparsed += n_unparsed
    return report
