"""Difficulty estimation and Gaussian difficulty-targeted subset sampling.

Difficulty of a training item is 1 - IoU of an offline prediction by the
model about to be trained. Subset selection draws items with weight
g(d; mu, sigma^2) / p_hat(d), where p_hat is the empirical difficulty
density; the correction makes the sampled subset's difficulty follow the
target Gaussian rather than the source distribution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .dataset import Dataset
from .parsing import PredictionRecord
from .spans import iou_array

SAMPLING_MODES = ("without", "with")


class SamplingError(ValueError):
    pass


@dataclass(frozen=True)
class DifficultyRecord:
    annotation_id: str
    difficulty: float
    weight: float = 0.0
    unparsable: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.difficulty <= 1.0:
            raise ValueError(f"difficulty must be in [0, 1], got {self.difficulty}")
        if not math.isfinite(self.weight) or self.weight < 0:
            raise ValueError(f"weight must be finite and non-negative, got {self.weight}")


@dataclass(frozen=True)
class GaussianTarget:
    mu: float
    sigma: float

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    def pdf(self, d: float | np.ndarray) -> float | np.ndarray:
        z = (np.asarray(d) - self.mu) / self.sigma
        return np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2.0 * math.pi))


@dataclass(frozen=True)
class DensityEstimate:
    """Piecewise-constant histogram density on [0, 1]; integrates to 1."""

    bin_edges: np.ndarray
    densities: np.ndarray

    @property
    def n_bins(self) -> int:
        return len(self.densities)

    def bin_index(self, d: float | np.ndarray) -> np.ndarray:
        idx = np.floor(np.asarray(d) * self.n_bins).astype(np.int64)
        return np.clip(idx, 0, self.n_bins - 1)

    def value_at(self, d: float | np.ndarray) -> np.ndarray:
        return self.densities[self.bin_index(d)]


def compute_difficulties(gt: Dataset, offline_preds: list[PredictionRecord]) -> list[DifficultyRecord]:
    """d = 1 - IoU(offline prediction, ground truth); unparsable -> d = 1."""
    by_id = {a.annotation_id: a for a in gt.annotations}
    records: list[DifficultyRecord] = []
    parsed = [(p, by_id[p.annotation_id]) for p in offline_preds if p.span is not None]
    for p in offline_preds:
        if p.annotation_id not in by_id:
            raise SamplingError(f"prediction references unknown annotation_id {p.annotation_id!r}")
    if parsed:
        ious = iou_array(
            np.array([p.span.start for p, _ in parsed]),
            np.array([p.span.end for p, _ in parsed]),
            np.array([a.span.start for _, a in parsed]),
            np.array([a.span.end for _, a in parsed]),
        )
    iou_by_id = {p.annotation_id: float(v) for (p, _), v in zip(parsed, ious)} if parsed else {}
    for p in offline_preds:
        if p.span is None:
            records.append(DifficultyRecord(p.annotation_id, 1.0, unparsable=True))
        else:
            records.append(DifficultyRecord(p.annotation_id, 1.0 - iou_by_id[p.annotation_id]))
    return records


def estimate_density(difficulties: list[float] | np.ndarray, bins: int = 20) -> DensityEstimate:
    values = np.asarray(difficulties, dtype=np.float64)
    if values.size == 0:
        raise SamplingError("cannot estimate a density from zero samples")
    if bins < 2:
        raise SamplingError(f"need at least 2 bins, got {bins}")
    if values.min() < 0 or values.max() > 1:
        raise SamplingError("difficulties must lie in [0, 1]")
    counts, edges = np.histogram(values, bins=bins, range=(0.0, 1.0))
    width = 1.0 / bins
    densities = counts / (values.size * width)
    return DensityEstimate(bin_edges=edges, densities=densities)


def gaussian_weights(
    records: list[DifficultyRecord],
    target: GaussianTarget,
    density: DensityEstimate,
) -> list[DifficultyRecord]:
    """Set w = g(d) / p_hat(d), renormalized to sum to 1 over the records.

    g is evaluated un-truncated; renormalizing over the candidate set
    preserves its ratios while confining mass to [0, 1].
    """
    if not records:
        return []
    d = np.array([r.difficulty for r in records])
    p_hat = density.value_at(d)
    if np.any(p_hat <= 0):
        bad = [records[i].annotation_id for i in np.nonzero(p_hat <= 0)[0][:3]]
        raise SamplingError(f"zero empirical density at occupied difficulties (e.g. {bad})")
    raw = target.pdf(d) / p_hat
    weights = raw / raw.sum()
    return [replace(r, weight=float(w)) for r, w in zip(records, weights)]


@dataclass
class SampleResult:
    selected_ids: list[str]
    difficulty_histogram: dict

    def to_dict(self) -> dict:
        return {"selected_ids": self.selected_ids, "difficulty_histogram": self.difficulty_histogram}


def sample_subset(
    records: list[DifficultyRecord],
    n: int,
    seed: int,
    mode: str = "without",
    hist_bins: int = 20,
) -> SampleResult:
    """Weighted sampling, deterministic given seed.

    Without replacement uses sequential weighted draws with removal, so a
    training subset never repeats items.
    """
    if mode not in SAMPLING_MODES:
        raise SamplingError(f"mode must be one of {SAMPLING_MODES}, got {mode!r}")
    if n <= 0:
        raise SamplingError(f"sample size must be positive, got {n}")
    if mode == "without" and n > len(records):
        raise SamplingError(f"cannot draw {n} without replacement from {len(records)} records")
    weights = np.array([r.weight for r in records], dtype=np.float64)
    if weights.sum() <= 0:
        raise SamplingError("all sampling weights are zero")

    uniforms = np.random.default_rng(seed).random(n)
    idx = _kernels.weighted_draws(weights, uniforms, replace=(mode == "with"))
    selected = [records[i].annotation_id for i in idx]
    chosen_d = np.array([records[i].difficulty for i in idx])
    counts, edges = np.histogram(chosen_d, bins=hist_bins, range=(0.0, 1.0))
    hist = {
        "bin_edges": [round(float(e), 6) for e in edges],
        "counts": counts.tolist(),
        "mean_difficulty": float(chosen_d.mean()),
    }
    return SampleResult(selected_ids=selected, difficulty_histogram=hist)
