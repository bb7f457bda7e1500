"""Seeded synthetic scenarios with labeled track samples.

Randomness comes only from ``numpy.random.Generator(PCG64(seed))``, so a
seed reproduces the same map, log and labels bit for bit.

City scenarios place building blocks on both sides of a four-lane main road
and a two-lane cross street. Rural scenarios have a single two-lane road,
a few isolated buildings and more open-field clutter. Each frame draws
fresh samples of four archetypes around the ego vehicle:

* on-lane vehicles (TP): inside a lane, heading within ``heading_noise`` of its course
* near-road pedestrians (TP): on the verge, at most ``pedestrian_max_offset`` m off the road
* in-building ghosts (FP): at least ``ghost_min_depth`` m inside a footprint, high ``r``
* open-field clutter (FP): at least ``clutter_clearance`` m from every map element
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np
from shapely.geometry import Point

from .evaluation import FP, TP, LabeledDataset
from .mapmodel import BuildingOutline, Lane, MapData, signed_distance
from .pipeline import Frame
from .state import EgoState, TrackState, wrap_angle

STYLES = ("city", "rural")
LANE_WIDTH = 3.5
SIDEWALK = 4.0
MAX_TRIES = 10_000

CLASSES = ("car", "truck", "pedestrian", "bicycle")


class ScenarioError(ValueError):
    """The requested archetypes cannot be placed on the generated map."""


@dataclass(frozen=True)
class ScenarioSpec:
    """Scenario parameters. Counts are per frame.

    ``*_r`` fields are ``(low, high)`` bounds of the uniform existence
    distribution per archetype; ``pos_std`` bounds each axis of the track's
    positional standard deviation.
    """

    seed: int = 42
    style: str = "city"
    n_frames: int = 50
    n_vehicles: int = 20
    n_pedestrians: int = 8
    n_ghosts: int = 10
    n_clutter: int = 4
    pos_std: tuple[float, float] = (0.1, 0.7)
    ego_pos_std: float = 0.05
    phi_std: tuple[float, float] = (0.02, 0.15)
    heading_noise: float = math.pi / 12.0
    vehicle_r: tuple[float, float] = (0.35, 0.95)
    pedestrian_r: tuple[float, float] = (0.25, 0.9)
    ghost_r: tuple[float, float] = (0.3, 0.9)
    clutter_r: tuple[float, float] = (0.02, 0.6)
    ghost_min_depth: float = 1.5
    pedestrian_max_offset: float = 2.0
    clutter_clearance: float = 30.0
    track_range: float = 80.0
    frame_dt: float = 0.1

    def __post_init__(self) -> None:
        if self.style not in STYLES:
            raise ValueError(f"style must be one of {STYLES}, got {self.style!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a non-negative 64-bit integer")
        for f in ("n_frames", "n_vehicles", "n_pedestrians", "n_ghosts", "n_clutter"):
            if getattr(self, f) < 0:
                raise ValueError(f"{f} must be >= 0")
        for f in ("pos_std", "phi_std", "vehicle_r", "pedestrian_r", "ghost_r", "clutter_r"):
            lo, hi = getattr(self, f)
            if not 0.0 < lo <= hi:
                raise ValueError(f"{f} must satisfy 0 < low <= high, got {(lo, hi)}")
        for f in ("vehicle_r", "pedestrian_r", "ghost_r", "clutter_r"):
            if getattr(self, f)[1] >= 1.0:
                raise ValueError(f"{f} upper bound must be below 1")
        for f in ("ego_pos_std", "heading_noise", "ghost_min_depth", "pedestrian_max_offset",
                  "clutter_clearance", "track_range", "frame_dt"):
            if not getattr(self, f) > 0.0:
                raise ValueError(f"{f} must be positive")

    @classmethod
    def defaults(cls, style: str = "city", seed: int = 42, **overrides) -> ScenarioSpec:
        base = dict(seed=seed, style=style)
        if style == "rural":
            base.update(n_vehicles=10, n_pedestrians=3, n_ghosts=2, n_clutter=15)
        base.update(overrides)
        return cls(**base)

    @classmethod
    def from_dict(cls, data: dict) -> ScenarioSpec:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown scenario fields: {sorted(unknown)}")
        data = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
        return cls.defaults(data.pop("style", "city"), data.pop("seed", 42), **data)

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


def _rect(x0: float, y0: float, x1: float, y1: float) -> np.ndarray:
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])


def _lane(id: str, road: str, start, end) -> Lane:
    return Lane(id, np.array([start, end], dtype=float), LANE_WIDTH, road)


def _block_row(rng, x_from: float, x_to: float, y_near: float, side: int, prefix: str, overlap_p: float):
    """Row of rectangular buildings between ``x_from`` and ``x_to``; ``side`` is +1 north, -1 south."""
    out = []
    x = x_from
    k = 0
    while True:
        width = rng.uniform(12.0, 30.0)
        if x + width > x_to:
            break
        depth = rng.uniform(12.0, 25.0)
        y0, y1 = sorted((y_near, y_near + side * depth))
        out.append(BuildingOutline(f"{prefix}{k}", _rect(x, y0, x + width, y1)))
        if rng.uniform() < overlap_p:
            # a second, overlapping outline of the same building as found in crowd-sourced maps
            dx = rng.uniform(0.2, 0.5) * width
            dy = rng.uniform(0.2, 0.5) * depth
            yy0, yy1 = sorted((y_near + side * dy, y_near + side * (depth + dy * 0.5)))
            out.append(BuildingOutline(f"{prefix}{k}b", _rect(x + dx, yy0, x + width + dx * 0.3, yy1)))
            x += dx * 0.3
        x += width + rng.uniform(2.0, 6.0)
        k += 1
    return out


def city_map(rng) -> MapData:
    half = 160.0
    lanes = [
        _lane("m_e1", "main", (-half, -5.25), (half, -5.25)),
        _lane("m_e2", "main", (-half, -1.75), (half, -1.75)),
        _lane("m_w2", "main", (half, 1.75), (-half, 1.75)),
        _lane("m_w1", "main", (half, 5.25), (-half, 5.25)),
        _lane("c_n", "cross", (1.75, -half), (1.75, half)),
        _lane("c_s", "cross", (-1.75, half), (-1.75, -half)),
    ]
    main_edge = 7.0
    cross_edge = 3.5
    setback_x = cross_edge + SIDEWALK
    buildings = []
    for side, tag in ((1, "n"), (-1, "s")):
        y_near = side * (main_edge + SIDEWALK)
        buildings += _block_row(rng, setback_x, half - 10.0, y_near, side, f"{tag}e", 0.25)
        row = _block_row(rng, setback_x, half - 10.0, y_near, side, f"{tag}w", 0.25)
        # mirror to the west side of the cross street
        for b in row:
            buildings.append(BuildingOutline(b.id, b.polygon * np.array([-1.0, 1.0])))
    return MapData.build(buildings, lanes)


def rural_map(rng) -> MapData:
    half = 160.0
    lanes = [
        _lane("r_e", "rural", (-half, -1.75), (half, -1.75)),
        _lane("r_w", "rural", (half, 1.75), (-half, 1.75)),
    ]
    buildings = []
    for k in range(int(rng.integers(3, 6))):
        side = 1 if rng.uniform() < 0.5 else -1
        x0 = rng.uniform(-half + 10.0, half - 40.0)
        gap = rng.uniform(6.0, 15.0)
        w, d = rng.uniform(12.0, 25.0), rng.uniform(12.0, 20.0)
        y_near = side * (3.5 + gap)
        y0, y1 = sorted((y_near, y_near + side * d))
        candidate = BuildingOutline(f"farm{k}", _rect(x0, y0, x0 + w, y1))
        if all(not candidate.shape.intersects(b.shape.buffer(2.0)) for b in buildings):
            buildings.append(candidate)
    return MapData.build(buildings, lanes)


class _Sampler:
    def __init__(self, spec: ScenarioSpec, world: MapData, rng) -> None:
        self.spec = spec
        self.world = world
        self.rng = rng

    def _uniform(self, bounds) -> float:
        return float(self.rng.uniform(*bounds))

    def _near(self, ego_xy) -> np.ndarray:
        r = self.spec.track_range * math.sqrt(self.rng.uniform())
        a = self.rng.uniform(-math.pi, math.pi)
        return np.asarray(ego_xy) + r * np.array([math.cos(a), math.sin(a)])

    def vehicle(self, ego_xy):
        lanes = self.world.lanes
        for _ in range(MAX_TRIES):
            lane = lanes[int(self.rng.integers(len(lanes)))]
            a, b = lane.centerline[0], lane.centerline[-1]
            d = b - a
            length = math.hypot(*d)
            t = self.rng.uniform(0.0, 1.0)
            center = a + t * d
            if np.hypot(*(center - ego_xy)) > self.spec.track_range:
                continue
            left = np.array([-d[1], d[0]]) / length
            offset = self.rng.uniform(-0.3, 0.3) * lane.width / 2.0
            heading = math.atan2(d[1], d[0]) + self.rng.uniform(-1.0, 1.0) * self.spec.heading_noise
            return center + offset * left, heading, lane.id
        raise ScenarioError("could not place an on-lane vehicle near the ego vehicle")

    def pedestrian(self, ego_xy):
        for _ in range(MAX_TRIES):
            p = self._near(ego_xy)
            dists = [signed_distance(p, road) for road in self.world.roads]
            if not dists or min(dists) <= 0.0 or min(dists) > self.spec.pedestrian_max_offset:
                continue
            if any(signed_distance(p, b) <= 0.5 for b in self.world.buildings):
                continue
            return p, self.rng.uniform(-math.pi, math.pi)
        raise ScenarioError("could not place a near-road pedestrian; increase track_range or pedestrian_max_offset")

    def ghost(self, ego_xy):
        depth = max(self.spec.ghost_min_depth, 2.0 / 3.0)
        if not self.world.buildings:
            raise ScenarioError("the map has no building to host a ghost track")
        ego_pt = Point(*map(float, ego_xy))
        dist = [b.shape.distance(ego_pt) for b in self.world.buildings]
        near = [b for b, d in zip(self.world.buildings, dist) if d <= self.spec.track_range]
        if not near:
            near = [self.world.buildings[int(np.argmin(dist))]]
        for _ in range(MAX_TRIES):
            b = near[int(self.rng.integers(len(near)))]
            lo, hi = b.polygon.min(axis=0), b.polygon.max(axis=0)
            p = self.rng.uniform(lo, hi)
            if signed_distance(p, b) <= -depth:
                return p, self.rng.uniform(-math.pi, math.pi), b.id
        raise ScenarioError(f"buildings too thin for ghosts {depth} m deep")

    def clutter(self, ego_xy):
        clear = self.spec.clutter_clearance
        reach = self.spec.track_range + clear
        elements = [*self.world.roads, *self.world.buildings]
        for _ in range(MAX_TRIES):
            r = reach * math.sqrt(self.rng.uniform())
            a = self.rng.uniform(-math.pi, math.pi)
            p = np.asarray(ego_xy) + r * np.array([math.cos(a), math.sin(a)])
            if all(signed_distance(p, e) >= clear for e in elements):
                return p, self.rng.uniform(-math.pi, math.pi)
        raise ScenarioError(f"no open field {clear} m away from the map near the ego vehicle")

    def covariance(self) -> np.ndarray:
        s1, s2 = self.rng.uniform(*self.spec.pos_std, size=2)
        a = self.rng.uniform(-math.pi, math.pi)
        rot = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
        cov = np.diag([0.0, 0.0, 0.5**2, 0.5**2, self._uniform(self.spec.phi_std) ** 2, 0.05**2])
        cov[:2, :2] = rot @ np.diag([s1**2, s2**2]) @ rot.T
        cov[0, 1] = cov[1, 0]
        return cov

    def class_probs(self, main: str, bounds) -> dict[str, float]:
        top = self._uniform(bounds)
        others = [c for c in CLASSES if c != main]
        split = self.rng.dirichlet(np.ones(len(others))) * (1.0 - top) * 0.9
        probs = {main: top, **{c: float(v) for c, v in zip(others, split)}}
        return {c: round(probs[c], 6) for c in CLASSES}


@dataclass(frozen=True)
class SampleInfo:
    """Generator-side ground truth for one track sample."""

    archetype: str
    element_id: str | None = None


def _ego_path(n: int):
    y = -1.75
    x0, x1 = -100.0, 100.0
    for k in range(n):
        t = k / (n - 1) if n > 1 else 0.5
        yield np.array([x0 + t * (x1 - x0), y])


def _to_local(ego: EgoState, p, heading):
    c, s = math.cos(ego.phi), math.sin(ego.phi)
    d = np.asarray(p) - ego.position
    return c * d[0] + s * d[1], -s * d[0] + c * d[1], wrap_angle(heading - ego.phi)


def generate(spec: ScenarioSpec) -> tuple[MapData, LabeledDataset]:
    """Build the map and a labeled track log for ``spec``.

    The dataset's ``meta`` maps every sample key to its :class:`SampleInfo`.
    """
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    world = city_map(rng) if spec.style == "city" else rural_map(rng)
    sampler = _Sampler(spec, world, rng)
    frames = []
    labels: dict = {}
    meta: dict = {}
    next_label = 0
    archetypes = (
        ("vehicle", spec.n_vehicles, TP),
        ("pedestrian", spec.n_pedestrians, TP),
        ("ghost", spec.n_ghosts, FP),
        ("clutter", spec.n_clutter, FP),
    )
    for k, ego_xy in enumerate(_ego_path(spec.n_frames)):
        timestamp = round(k * spec.frame_dt, 6)
        ego_cov = np.diag(
            [spec.ego_pos_std**2, spec.ego_pos_std**2, 0.1**2, 0.1**2, 0.002**2, 0.001**2]
        )
        ego = EgoState(
            x=float(ego_xy[0]),
            y=float(ego_xy[1]),
            v=10.0,
            a=0.0,
            phi=float(rng.normal(0.0, 0.005)),
            omega=0.0,
            cov=ego_cov,
            timestamp=timestamp,
        )
        tracks = []
        for archetype, count, truth in archetypes:
            for _ in range(count):
                element = None
                if archetype == "vehicle":
                    p, heading, element = sampler.vehicle(ego_xy)
                    r_bounds, probs = spec.vehicle_r, sampler.class_probs("car", (0.6, 0.95))
                elif archetype == "pedestrian":
                    p, heading = sampler.pedestrian(ego_xy)
                    r_bounds, probs = spec.pedestrian_r, sampler.class_probs("pedestrian", (0.5, 0.9))
                elif archetype == "ghost":
                    p, heading, element = sampler.ghost(ego_xy)
                    main = CLASSES[int(rng.integers(len(CLASSES)))]
                    r_bounds, probs = spec.ghost_r, sampler.class_probs(main, (0.25, 0.55))
                else:
                    p, heading = sampler.clutter(ego_xy)
                    main = CLASSES[int(rng.integers(len(CLASSES)))]
                    r_bounds, probs = spec.clutter_r, sampler.class_probs(main, (0.2, 0.5))
                x, y, phi = _to_local(ego, p, heading)
                label = next_label
                next_label += 1
                tracks.append(
                    TrackState(
                        label=label,
                        x=float(x),
                        y=float(y),
                        v=float(rng.uniform(0.0, 15.0)) if archetype == "vehicle" else float(rng.uniform(0.0, 2.0)),
                        a=0.0,
                        phi=float(phi),
                        omega=0.0,
                        cov=sampler.covariance(),
                        existence=round(sampler._uniform(r_bounds), 6),
                        class_probs=probs,
                    )
                )
                labels[(timestamp, label)] = truth
                meta[(timestamp, label)] = SampleInfo(archetype, element)
        frames.append(Frame(timestamp, ego, tuple(tracks)))
    return world, LabeledDataset(frames, labels, meta)
