"""Threshold sweeps and ROC metrics over labeled track samples."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Hashable, Sequence

import numpy as np

from .pipeline import Frame

TP = "TP"
FP = "FP"
N_STEPS = 100
THRESHOLDS = tuple(i / N_STEPS for i in range(N_STEPS + 1))
TPR_LEVELS = THRESHOLDS[1:]

CSV_COLUMNS = (
    "threshold",
    "tpr",
    "fpr",
    "precision",
    "recall",
    "accuracy",
    "tp_kept",
    "fp_kept",
    "tp_total",
    "fp_total",
)


class LabelError(KeyError):
    """A track sample has no ground-truth label."""


@dataclass
class LabeledDataset:
    """Frames plus a TP/FP label for every ``(timestamp, track label)`` sample."""

    frames: list[Frame]
    labels: dict[tuple[float, Hashable], str]
    # optional per-sample annotations, e.g. generator archetypes
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        for key, value in self.labels.items():
            if value not in (TP, FP):
                raise ValueError(f"label for {key!r} must be 'TP' or 'FP', got {value!r}")
        for frame in self.frames:
            for track in frame.tracks:
                if (frame.timestamp, track.label) not in self.labels:
                    raise LabelError(f"unlabeled sample: frame {frame.timestamp!r}, track {track.label!r}")

    def samples(self):
        for frame in self.frames:
            for track in frame.tracks:
                yield frame, track, self.labels[(frame.timestamp, track.label)]

    def truth(self) -> np.ndarray:
        """Boolean array, True for TP, in sample order."""
        return np.array([label == TP for _, _, label in self.samples()], dtype=bool)

    def __len__(self) -> int:
        return sum(len(f.tracks) for f in self.frames)


@dataclass(frozen=True)
class Metrics:
    threshold: float
    tpr: float
    fpr: float
    precision: float
    recall: float
    accuracy: float
    tp_kept: int
    fp_kept: int
    tp_total: int
    fp_total: int
    # False when nothing was kept and precision fell back to 1.0
    precision_defined: bool = True

    @property
    def tp_removed(self) -> int:
        return self.tp_total - self.tp_kept

    @property
    def fp_removed(self) -> int:
        return self.fp_total - self.fp_kept

    def row(self) -> tuple:
        return tuple(getattr(self, c) for c in CSV_COLUMNS)


def _rate(num: int, den: int) -> float:
    # an empty class is trivially fully kept / removed; report 0 so the curve stays monotone
    return num / den if den else 0.0


def metrics_from_scores(scores, truth, theta: float) -> Metrics:
    """Metrics when a sample counts as kept iff ``score >= theta``."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {theta!r}")
    scores = np.asarray(scores, dtype=float)
    truth = np.asarray(truth, dtype=bool)
    kept = scores >= theta
    tp_total = int(truth.sum())
    fp_total = int((~truth).sum())
    tp_kept = int((kept & truth).sum())
    fp_kept = int((kept & ~truth).sum())
    total = tp_total + fp_total
    n_kept = tp_kept + fp_kept
    return Metrics(
        threshold=theta,
        tpr=_rate(tp_kept, tp_total),
        fpr=_rate(fp_kept, fp_total),
        precision=tp_kept / n_kept if n_kept else 1.0,
        recall=_rate(tp_kept, tp_total),
        accuracy=(tp_kept + fp_total - fp_kept) / total if total else 1.0,
        tp_kept=tp_kept,
        fp_kept=fp_kept,
        tp_total=tp_total,
        fp_total=fp_total,
        precision_defined=n_kept > 0,
    )


Scorer = Callable[[Frame, object], float]


def score_dataset(dataset: LabeledDataset, scorer: Scorer) -> np.ndarray:
    return np.array([scorer(frame, track) for frame, track, _ in dataset.samples()], dtype=float)


def existence_scorer(frame: Frame, track) -> float:
    """Baseline score: the tracker's own existence probability."""
    return track.existence


def metrics_at(dataset: LabeledDataset, scorer: Scorer | Sequence[float], theta: float) -> Metrics:
    scores = score_dataset(dataset, scorer) if callable(scorer) else scorer
    return metrics_from_scores(scores, dataset.truth(), theta)


@dataclass(frozen=True)
class RocCurve:
    points: tuple[Metrics, ...]

    @property
    def thresholds(self) -> np.ndarray:
        return np.array([p.threshold for p in self.points])

    @property
    def tpr(self) -> np.ndarray:
        return np.array([p.tpr for p in self.points])

    @property
    def fpr(self) -> np.ndarray:
        return np.array([p.fpr for p in self.points])

    def at(self, theta: float) -> Metrics:
        for p in self.points:
            if abs(p.threshold - theta) < 1e-12:
                return p
        raise KeyError(theta)

    def min_fpr_at_tpr(self, level: float) -> float:
        """Lowest FPR among sweep points whose TPR reaches ``level``."""
        fpr = self.fpr[self.tpr >= level]
        return float(fpr.min()) if fpr.size else 1.0


def sweep_scores(scores, truth) -> RocCurve:
    return RocCurve(tuple(metrics_from_scores(scores, truth, t) for t in THRESHOLDS))


def sweep(dataset: LabeledDataset, scorer: Scorer | Sequence[float]) -> RocCurve:
    """Evaluate the 101 thresholds 0.00, 0.01, ..., 1.00."""
    scores = score_dataset(dataset, scorer) if callable(scorer) else scorer
    return sweep_scores(scores, dataset.truth())


def dominance(candidate: RocCurve, baseline: RocCurve, levels: Sequence[float] | None = None) -> float:
    """Fraction of TPR levels where ``candidate`` reaches a strictly lower FPR.

    Levels default to the grid 0.01, 0.02, ..., 1.00.
    """
    if levels is None:
        levels = TPR_LEVELS
    if len(levels) == 0:
        return 0.0
    wins = sum(candidate.min_fpr_at_tpr(l) < baseline.min_fpr_at_tpr(l) for l in levels)
    return wins / len(levels)


def fpr_gap(candidate: RocCurve, baseline: RocCurve, levels: Sequence[float] | None = None) -> float:
    """Mean FPR advantage of ``candidate`` over ``baseline`` across TPR levels."""
    if levels is None:
        levels = TPR_LEVELS
    return float(np.mean([baseline.min_fpr_at_tpr(l) - candidate.min_fpr_at_tpr(l) for l in levels]))
