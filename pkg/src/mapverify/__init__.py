"""Map-based verification of tracked objects via an extended existence probability."""

from .evaluation import LabeledDataset, RocCurve, metrics_at, sweep
from .fusion import FusionConfig, fuse
from .influence import InfluenceParams, InfluenceVector, evaluate_influences
from .mapmodel import MapData
from .pipeline import Frame, VerifiedFrame, verify_frame
from .scenario import ScenarioSpec, generate
from .state import EgoState, GlobalTrack, TrackState

__all__ = [
    "EgoState",
    "Frame",
    "FusionConfig",
    "GlobalTrack",
    "InfluenceParams",
    "InfluenceVector",
    "LabeledDataset",
    "MapData",
    "RocCurve",
    "ScenarioSpec",
    "TrackState",
    "VerifiedFrame",
    "evaluate_influences",
    "fuse",
    "generate",
    "metrics_at",
    "sweep",
    "verify_frame",
]
