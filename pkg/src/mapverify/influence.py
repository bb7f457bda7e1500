"""Map influences on a track's existence.

Every influence reduces the track's 2-D position uncertainty to a 1-D
Gaussian along the perpendicular to the relevant map boundary, with the
outward direction positive. On that axis:

* building containment ``P_C``: P(track <= building edge), edge ~ N(-3 sigma_b, sigma_b^2)
* on road ``P_OR``: track mass inside ``[-w_r, 0]``
* near road ``P_NR``: P(track <= road edge), edge ~ N(+3 sigma_r, sigma_r^2)
* lane position ``P_LP``: overlap of track and N(-w_l/2, (w_l/6)^2), peak-normalized
* lane alignment ``P_LA``: overlap of heading difference and N(0, (pi/6)^2), peak-normalized
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import ndtr

from .mapmodel import BuildingOutline, Lane, MapData, Road, lane_frame, signed_boundary_projection
from .reduce import ReducedGaussian, reduce_to_line
from .state import GlobalTrack, wrap_angle

LANE_HEADING_STD = math.pi / 6.0
BUILDING_GATE_MARGIN = 5.0


@dataclass(frozen=True)
class InfluenceParams:
    sigma_b: float = 1.0 / 3.0
    sigma_r: float = 1.0

    def __post_init__(self) -> None:
        if not (self.sigma_b > 0.0 and self.sigma_r > 0.0):
            raise ValueError(f"sigma_b and sigma_r must be positive, got {self.sigma_b!r}, {self.sigma_r!r}")


@dataclass(frozen=True)
class InfluenceVector:
    """The five influence probabilities for one track.

    ``p_building`` is the only negative influence; the other four are
    positive. Missing map elements leave their influence at 0.
    """

    p_building: float = 0.0
    p_on_road: float = 0.0
    p_near_road: float = 0.0
    p_lane_pos: float = 0.0
    p_lane_align: float = 0.0
    associated_lane_id: str | None = None
    class_prob: float | None = None

    def __post_init__(self) -> None:
        for name in ("p_building", "p_on_road", "p_near_road", "p_lane_pos", "p_lane_align"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name}={p!r} outside [0, 1]")
        if self.class_prob is not None and not 0.0 <= self.class_prob <= 1.0:
            raise ValueError(f"class_prob={self.class_prob!r} outside [0, 1]")

    @property
    def positives(self) -> tuple[float, float, float, float]:
        return (self.p_on_road, self.p_near_road, self.p_lane_pos, self.p_lane_align)

    def as_dict(self) -> dict:
        return {
            "p_building": self.p_building,
            "p_on_road": self.p_on_road,
            "p_near_road": self.p_near_road,
            "p_lane_pos": self.p_lane_pos,
            "p_lane_align": self.p_lane_align,
            "associated_lane_id": self.associated_lane_id,
            "class_prob": self.class_prob,
        }


def _phi(x: float) -> float:
    return float(ndtr(x))


def _edge_exceed(mean: float, var: float, edge_mean: float, edge_std: float) -> float:
    """P(T <= E) for independent T ~ N(mean, var) and E ~ N(edge_mean, edge_std^2)."""
    return _phi((edge_mean - mean) / math.sqrt(var + edge_std**2))


def _overlap(delta: float, var: float) -> float:
    """Peak-normalized integral of a product of two Gaussians whose means differ by ``delta``."""
    return math.exp(-(delta**2) / (2.0 * var))


def containment_probability(reduced: ReducedGaussian, sigma_b: float) -> float:
    return _edge_exceed(reduced.mean, reduced.var, -3.0 * sigma_b, sigma_b)


def on_road_probability(reduced: ReducedGaussian, road_width: float) -> float:
    if reduced.var == 0.0:
        return 1.0 if -road_width <= reduced.mean <= 0.0 else 0.0
    sd = reduced.std
    return max(_phi((0.0 - reduced.mean) / sd) - _phi((-road_width - reduced.mean) / sd), 0.0)


def near_road_probability(reduced: ReducedGaussian, sigma_r: float) -> float:
    return _edge_exceed(reduced.mean, reduced.var, 3.0 * sigma_r, sigma_r)


def lane_position_probability(reduced: ReducedGaussian, lane_width: float) -> float:
    sigma_lx = lane_width / 6.0
    return _overlap(reduced.mean + lane_width / 2.0, reduced.var + sigma_lx**2)


def lane_alignment_probability(heading_diff: float, heading_var: float) -> float:
    return _overlap(heading_diff, heading_var + LANE_HEADING_STD**2)


def _building_gate(track: GlobalTrack, sigma_b: float) -> float:
    return 3.0 * (track.max_std + sigma_b) + BUILDING_GATE_MARGIN


def _bbox_distance(p: np.ndarray, ring: np.ndarray) -> float:
    lo = ring.min(axis=0)
    hi = ring.max(axis=0)
    gap = np.maximum(np.maximum(lo - p, p - hi), 0.0)
    return math.hypot(gap[0], gap[1])


def building_containment(track: GlobalTrack, buildings: Sequence[BuildingOutline], sigma_b: float) -> float:
    """Largest containment probability over buildings near the track.

    Buildings farther than ``3 (sigma_max + sigma_b) + 5`` m from the track
    are skipped; with none left the influence is 0.
    """
    gate = _building_gate(track, sigma_b)
    pos = track.position
    best = 0.0
    for building in buildings:
        if _bbox_distance(pos, building.polygon) > gate:
            continue
        proj = signed_boundary_projection(pos, building)
        if proj.s > gate:
            continue
        reduced = reduce_to_line(track, proj.foot, proj.u)
        best = max(best, containment_probability(reduced, sigma_b))
    return best


def building_field(p, buildings: Sequence[BuildingOutline], sigma_b: float) -> float:
    """Probability that point ``p`` lies inside a building, edge blurred by ``sigma_b``.

    Uses a straight-edge approximation of the blurred footprint at the
    nearest outline. Intended for inspection and plots.
    """
    if not buildings:
        return 0.0
    s = min(signed_boundary_projection(p, b).s for b in buildings)
    return min(max(_phi((-s - 3.0 * sigma_b) / sigma_b), 0.0), 1.0)


def nearest_road(track: GlobalTrack, roads: Sequence[Road]):
    """Road with the smallest signed distance, with its projection; ``None`` without roads."""
    best = None
    for road in roads:
        proj = signed_boundary_projection(track.position, road)
        if best is None or proj.s < best[1].s:
            best = (road, proj)
    return best


def on_road(track: GlobalTrack, road: Road | None) -> float:
    if road is None:
        return 0.0
    proj = signed_boundary_projection(track.position, road)
    return on_road_probability(reduce_to_line(track, proj.foot, proj.u), road.width)


def near_road(track: GlobalTrack, road: Road | None, sigma_r: float) -> float:
    if road is None:
        return 0.0
    proj = signed_boundary_projection(track.position, road)
    return near_road_probability(reduce_to_line(track, proj.foot, proj.u), sigma_r)


def _lane_reduction(track: GlobalTrack, lane: Lane):
    frame = lane_frame(track.position, lane)
    return frame, reduce_to_line(track, frame.border, frame.axis)


def lane_position(track: GlobalTrack, lane: Lane) -> float:
    _, reduced = _lane_reduction(track, lane)
    return lane_position_probability(reduced, lane.width)


def lane_alignment(track: GlobalTrack, lane: Lane) -> float:
    frame = lane_frame(track.position, lane)
    return lane_alignment_probability(wrap_angle(track.phi - frame.course), track.phi_var)


def associate_lane(track: GlobalTrack, lanes: Iterable[Lane]) -> tuple[str, float, float] | None:
    """Pick the candidate lane maximizing ``P_LP + P_LA``.

    A lane is a candidate when the centerline lies within
    ``w_l/2 + 3 sigma' + 3 w_l/6`` of the track, ``sigma'`` being the track's
    standard deviation across the lane. Exact ties go to the lowest lane id.
    """
    best = None
    for lane in sorted(lanes, key=lambda l: l.id):
        frame, reduced = _lane_reduction(track, lane)
        gate = lane.width / 2.0 + 3.0 * reduced.std + 3.0 * lane.width / 6.0
        if frame.distance > gate:
            continue
        p_lp = lane_position_probability(reduced, lane.width)
        p_la = lane_alignment_probability(wrap_angle(track.phi - frame.course), track.phi_var)
        if best is None or p_lp + p_la > best[1] + best[2]:
            best = (lane.id, p_lp, p_la)
    return best


def relevant_class_prob(class_probs, relevant_classes: Sequence[str] | None) -> float | None:
    if not relevant_classes:
        return None
    present = [class_probs[c] for c in relevant_classes if c in class_probs]
    return max(present) if present else None


def evaluate_influences(
    track: GlobalTrack,
    local_map: MapData,
    params: InfluenceParams = InfluenceParams(),
    relevant_classes: Sequence[str] | None = None,
) -> InfluenceVector:
    p_c = building_containment(track, local_map.buildings, params.sigma_b)
    p_or = p_nr = 0.0
    found = nearest_road(track, local_map.roads)
    if found is not None:
        road, proj = found
        reduced = reduce_to_line(track, proj.foot, proj.u)
        p_or = on_road_probability(reduced, road.width)
        p_nr = near_road_probability(reduced, params.sigma_r)
    lane = associate_lane(track, local_map.lanes)
    lane_id, p_lp, p_la = lane if lane is not None else (None, 0.0, 0.0)
    return InfluenceVector(
        p_building=p_c,
        p_on_road=p_or,
        p_near_road=p_nr,
        p_lane_pos=p_lp,
        p_lane_align=p_la,
        associated_lane_id=lane_id,
        class_prob=relevant_class_prob(track.class_probs, relevant_classes),
    )
