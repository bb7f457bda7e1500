"""Per-frame track verification."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

from .fusion import FusionConfig, fuse
from .influence import InfluenceParams, InfluenceVector, evaluate_influences
from .mapmodel import MapData, extract_local
from .reduce import to_global
from .state import EgoState, TrackState, validate_covariance

DEFAULT_RADIUS = 200.0


class FrameError(ValueError):
    """A frame failed validation; the whole frame is rejected."""


@dataclass(frozen=True)
class Frame:
    timestamp: float
    ego: EgoState
    tracks: tuple[TrackState, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "tracks", tuple(self.tracks))
        labels = [t.label for t in self.tracks]
        if len(set(labels)) != len(labels):
            dupes = sorted({str(l) for l in labels if labels.count(l) > 1})
            raise FrameError(f"frame {self.timestamp!r}: duplicate track labels {dupes}")


@dataclass(frozen=True)
class TrackVerdict:
    label: Hashable
    eta: float
    influences: InfluenceVector
    kept: bool


@dataclass(frozen=True)
class VerifiedFrame:
    timestamp: float
    entries: tuple[TrackVerdict, ...]
    kept: tuple[TrackState, ...]


def check_frame(frame: Frame) -> None:
    """Raise :class:`FrameError` listing every invalid covariance in the frame."""
    problems = []
    report = validate_covariance(frame.ego.cov)
    if not report:
        problems.append(f"ego covariance: {report.reason}")
    for track in frame.tracks:
        report = validate_covariance(track.cov)
        if not report:
            problems.append(f"track {track.label!r} covariance: {report.reason}")
    if problems:
        raise FrameError(f"frame {frame.timestamp!r}: " + "; ".join(problems))


def frame_influences(
    frame: Frame,
    full_map: MapData,
    params: InfluenceParams = InfluenceParams(),
    relevant_classes: Sequence[str] | None = None,
    radius: float = DEFAULT_RADIUS,
) -> list[InfluenceVector]:
    """Influence vectors for every track of a frame, in input order."""
    check_frame(frame)
    local = extract_local(full_map, frame.ego.position, radius)
    return [
        evaluate_influences(to_global(track, frame.ego), local, params, relevant_classes)
        for track in frame.tracks
    ]


def verify_frame(
    frame: Frame,
    full_map: MapData,
    params: InfluenceParams = InfluenceParams(),
    config: FusionConfig = FusionConfig(),
    theta_eta: float = 0.35,
    radius: float = DEFAULT_RADIUS,
) -> VerifiedFrame:
    """Score every track and keep those with ``eta >= theta_eta``.

    Kept tracks are the input objects themselves, unmodified.
    """
    if not 0.0 <= theta_eta <= 1.0:
        raise ValueError(f"theta_eta must lie in [0, 1], got {theta_eta!r}")
    influences = frame_influences(frame, full_map, params, config.relevant_classes, radius)
    entries = []
    kept = []
    for track, iv in zip(frame.tracks, influences):
        eta = fuse(iv, config)
        keep = eta >= theta_eta
        entries.append(TrackVerdict(track.label, eta, iv, keep))
        if keep:
            kept.append(track)
    return VerifiedFrame(frame.timestamp, tuple(entries), tuple(kept))
