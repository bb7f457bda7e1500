"""Planar map elements: building outlines, lanes and roads.

Polygons are handled through shapely for validity checks, unions and
spatial filtering. Boundary projection is done directly on vertex arrays so
the signed distance, foot point and outward normal come from one pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import shapely
from shapely.geometry import LineString, MultiPolygon, Point, Polygon
from shapely.geometry.polygon import orient
from shapely.ops import unary_union

# relative distance below which a point counts as on the boundary
_SNAP = 1e-12
# meters; closes floating-point seams between adjacent lane strips
SEAM_CLOSE = 1e-6


class MapError(ValueError):
    """Invalid map geometry."""


@dataclass(frozen=True, eq=False)
class BuildingOutline:
    """Building footprint. ``polygon`` is the CCW shell, ``holes`` are CW rings."""

    id: str
    polygon: np.ndarray
    holes: tuple[np.ndarray, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "polygon", _ring_array(self.polygon))
        object.__setattr__(self, "holes", tuple(_ring_array(h) for h in self.holes))

    @classmethod
    def from_shapely(cls, id: str, poly: Polygon) -> BuildingOutline:
        poly = orient(poly, 1.0)
        return cls(
            id,
            np.asarray(poly.exterior.coords)[:-1],
            tuple(np.asarray(r.coords)[:-1] for r in poly.interiors),
        )

    @property
    def shape(self) -> Polygon:
        return Polygon(self.polygon, [h for h in self.holes])

    @property
    def area(self) -> float:
        return float(self.shape.area)

    def rings(self) -> list[np.ndarray]:
        return [self.polygon, *self.holes]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BuildingOutline):
            return NotImplemented
        return (
            self.id == other.id
            and np.array_equal(self.polygon, other.polygon)
            and len(self.holes) == len(other.holes)
            and all(np.array_equal(a, b) for a, b in zip(self.holes, other.holes))
        )


def _ring_array(coords) -> np.ndarray:
    arr = np.array(coords, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise MapError(f"ring must be a list of [x, y] pairs, got shape {arr.shape}")
    if len(arr) > 1 and np.array_equal(arr[0], arr[-1]):
        arr = arr[:-1]
    arr.setflags(write=False)
    return arr


def check_outline(b: BuildingOutline) -> BuildingOutline:
    """Reject degenerate or self-intersecting outlines; return a CCW copy."""
    if len(b.polygon) < 3:
        raise MapError(f"building {b.id!r}: needs at least 3 vertices")
    poly = b.shape
    if not poly.is_valid:
        raise MapError(f"building {b.id!r}: polygon is not simple ({shapely.is_valid_reason(poly)})")
    if poly.area <= 0.0:
        raise MapError(f"building {b.id!r}: zero area")
    if poly.exterior.is_ccw and all(not r.is_ccw for r in poly.interiors):
        return b
    return BuildingOutline.from_shapely(b.id, poly)


@dataclass(frozen=True, eq=False)
class Lane:
    id: str
    centerline: np.ndarray
    width: float
    road_id: str

    def __post_init__(self) -> None:
        line = np.array(self.centerline, dtype=float)
        if line.ndim != 2 or line.shape[1] != 2 or len(line) < 2:
            raise MapError(f"lane {self.id!r}: centerline needs at least 2 [x, y] points")
        if np.any(np.all(np.diff(line, axis=0) == 0.0, axis=1)):
            raise MapError(f"lane {self.id!r}: consecutive centerline points coincide")
        if not (self.width > 0.0 and math.isfinite(self.width)):
            raise MapError(f"lane {self.id!r}: width must be positive, got {self.width!r}")
        line.setflags(write=False)
        object.__setattr__(self, "centerline", line)

    @property
    def strip(self) -> Polygon:
        """The lane surface: centerline offset by half the width on each side."""
        return LineString(self.centerline).buffer(self.width / 2.0, cap_style="flat", join_style="mitre")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Lane):
            return NotImplemented
        return (
            self.id == other.id
            and np.array_equal(self.centerline, other.centerline)
            and self.width == other.width
            and self.road_id == other.road_id
        )


@dataclass(frozen=True, eq=False)
class Road:
    """All parallel lanes sharing a ``road_id``; ``corridor`` is their union."""

    road_id: str
    lane_ids: tuple[str, ...]
    width: float
    corridor: Polygon | MultiPolygon = field(repr=False)

    @classmethod
    def from_lanes(cls, road_id: str, lanes: Sequence[Lane]) -> Road:
        if not lanes:
            raise MapError(f"road {road_id!r}: no lanes")
        # adjacent strips share an edge only up to rounding; a tiny closing
        # (dilate, union, erode) keeps the seam from surviving as a boundary
        grown = [lane.strip.buffer(SEAM_CLOSE, join_style="mitre") for lane in lanes]
        corridor = unary_union(grown).buffer(-SEAM_CLOSE, join_style="mitre")
        return cls(road_id, tuple(l.id for l in lanes), float(sum(l.width for l in lanes)), corridor)

    @cached_property
    def rings(self) -> list[np.ndarray]:
        return region_rings(self.corridor)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Road):
            return NotImplemented
        return self.road_id == other.road_id and self.lane_ids == other.lane_ids and self.width == other.width


def group_roads(lanes: Sequence[Lane]) -> list[Road]:
    """Build roads from lanes, ordered by first appearance of each ``road_id``."""
    members: dict[str, list[Lane]] = {}
    for lane in lanes:
        members.setdefault(lane.road_id, []).append(lane)
    return [Road.from_lanes(rid, ls) for rid, ls in members.items()]


@dataclass(frozen=True, eq=False)
class MapData:
    """A map (full or local): merged buildings, lanes and derived roads."""

    buildings: tuple[BuildingOutline, ...] = ()
    lanes: tuple[Lane, ...] = ()
    roads: tuple[Road, ...] = ()
    center: tuple[float, float] | None = None
    radius: float | None = None

    @classmethod
    def build(cls, buildings: Iterable[BuildingOutline], lanes: Iterable[Lane]) -> MapData:
        """Validate, merge overlapping outlines, and group lanes into roads."""
        lanes = tuple(lanes)
        ids = [l.id for l in lanes]
        if len(set(ids)) != len(ids):
            raise MapError("duplicate lane ids")
        return cls(tuple(merge_outlines(list(buildings))), lanes, tuple(group_roads(lanes)))

    def lane(self, lane_id: str) -> Lane:
        for lane in self.lanes:
            if lane.id == lane_id:
                return lane
        raise KeyError(lane_id)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MapData):
            return NotImplemented
        return self.buildings == other.buildings and self.lanes == other.lanes and self.roads == other.roads


# LocalMap and the full map share one container.
LocalMap = MapData


def _interiors_overlap(a: Polygon, b: Polygon) -> bool:
    return a.relate_pattern(b, "T********")


def merge_outlines(outlines: Sequence[BuildingOutline]) -> list[BuildingOutline]:
    """Union outlines whose interiors overlap.

    Outlines that overlap nothing (touching edges is not overlap) come back
    unchanged apart from CCW orientation, which makes the operation
    idempotent. Each merged group keeps the ids joined by ``+`` in input
    order and is placed at the position of its first member.
    """
    checked = [check_outline(b) for b in outlines]
    shapes = [b.shape for b in checked]
    n = len(shapes)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    if n > 1:
        tree = shapely.STRtree(shapes)
        for i, shape in enumerate(shapes):
            for j in tree.query(shape):
                j = int(j)
                if j > i and _interiors_overlap(shape, shapes[j]):
                    parent[find(j)] = find(i)

    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)

    merged = []
    for members in sorted(groups.values(), key=lambda g: g[0]):
        if len(members) == 1:
            merged.append(checked[members[0]])
            continue
        union = unary_union([shapes[i] for i in members])
        if not isinstance(union, Polygon):
            raise AssertionError(f"union of overlapping outlines {members} is not a single polygon")
        merged.append(BuildingOutline.from_shapely("+".join(checked[i].id for i in members), union))
    return merged


def extract_local(full: MapData, center: Sequence[float], radius: float) -> MapData:
    """Keep every building and lane whose geometry touches the disc.

    Lanes are kept whole. Roads are kept when at least one member lane is
    kept, with the full-map corridor and width.
    """
    if not radius > 0.0:
        raise ValueError(f"radius must be positive, got {radius!r}")
    cx, cy = float(center[0]), float(center[1])
    origin = Point(cx, cy)
    # exact distance test; a buffered disc polygon would be inscribed
    buildings = tuple(b for b in full.buildings if b.shape.distance(origin) <= radius)
    lanes = tuple(l for l in full.lanes if LineString(l.centerline).distance(origin) <= radius)
    kept_roads = {l.road_id for l in lanes}
    roads = tuple(r for r in full.roads if r.road_id in kept_roads)
    return MapData(buildings, lanes, roads, (cx, cy), float(radius))


@dataclass(frozen=True)
class BoundaryProjection:
    """Nearest boundary point ``foot``, outward unit normal ``u``, signed distance ``s``."""

    foot: np.ndarray
    u: np.ndarray
    s: float


def region_rings(region) -> list[np.ndarray]:
    """Boundary rings of a polygonal region, oriented with the interior on the left."""
    if isinstance(region, BuildingOutline):
        return region.rings()
    if isinstance(region, Road):
        return region.rings
    if isinstance(region, Polygon):
        polys = [region]
    elif isinstance(region, MultiPolygon):
        polys = list(region.geoms)
    else:
        polys = [Polygon(np.asarray(region, dtype=float))]
    rings = []
    for poly in polys:
        if poly.is_empty or poly.area <= 0.0:
            raise MapError("degenerate region")
        poly = orient(poly, 1.0)
        rings.append(np.asarray(poly.exterior.coords)[:-1])
        rings.extend(np.asarray(r.coords)[:-1] for r in poly.interiors)
    return rings


def _edge_normal(d: np.ndarray) -> np.ndarray:
    # interior on the left of d, so outward is to the right
    return np.array([d[1], -d[0]]) / math.hypot(d[0], d[1])


def signed_boundary_projection(p: Sequence[float], region) -> BoundaryProjection:
    """Project a point onto the boundary of a polygonal region.

    ``region`` may be a :class:`BuildingOutline`, a :class:`Road`, a shapely
    (Multi)Polygon or a plain vertex list. ``s`` is negative inside.

    When the nearest boundary point is a vertex, the side is decided by the
    normalized sum of the two adjacent edge normals. On an edge interior the
    returned normal is the edge normal; at a vertex it is the direction from
    ``foot`` to ``p`` (flipped inside). Either way ``|s|`` is the Euclidean
    distance. Points within rounding distance of the boundary get ``s = 0``
    and the edge (or averaged vertex) normal.
    """
    p = np.asarray(p, dtype=float)
    best = None
    for ring in region_rings(region):
        a = ring
        b = np.roll(ring, -1, axis=0)
        d = b - a
        len2 = np.einsum("ij,ij->i", d, d)
        t = np.clip(np.einsum("ij,ij->i", p - a, d) / len2, 0.0, 1.0)
        feet = a + t[:, None] * d
        dist2 = np.einsum("ij,ij->i", p - feet, p - feet)
        k = int(np.argmin(dist2))
        if best is None or dist2[k] < best[0]:
            best = (float(dist2[k]), ring, k, float(t[k]), feet[k])
    _, ring, k, t, foot = best
    n = len(ring)
    d_k = ring[(k + 1) % n] - ring[k]
    on_edge = 0.0 < t < 1.0
    if on_edge:
        normal = _edge_normal(d_k)
    else:
        # vertex foot: average the normals of the two edges meeting there
        v = k if t == 0.0 else (k + 1) % n
        d_in = ring[v] - ring[v - 1]
        d_out = ring[(v + 1) % n] - ring[v]
        normal = _edge_normal(d_in) + _edge_normal(d_out)
        norm = math.hypot(normal[0], normal[1])
        normal = normal / norm if norm > 0.0 else _edge_normal(d_k)
        foot = ring[v].copy()
    foot = np.array(foot, dtype=float)
    delta = p - foot
    dist = math.hypot(delta[0], delta[1])
    if dist <= _SNAP * max(1.0, float(np.abs(p).max())):
        return BoundaryProjection(foot, normal, 0.0)
    if on_edge:
        s = float(normal @ delta)
        return BoundaryProjection(foot, normal, s)
    side = 1.0 if float(normal @ delta) >= 0.0 else -1.0
    u = side * delta / dist
    return BoundaryProjection(foot, u, float(u @ delta))


def signed_distance(p: Sequence[float], region) -> float:
    return signed_boundary_projection(p, region).s


@dataclass(frozen=True)
class LaneFrame:
    """Lateral geometry of a point relative to a lane centerline.

    ``offset`` is the signed lateral offset from the centerline (left
    positive), ``axis`` the unit vector from the centerline toward the nearer
    lane border, ``border`` the point on that border, ``course`` the heading
    of the nearest centerline segment and ``distance`` the Euclidean distance
    to the centerline polyline.
    """

    offset: float
    axis: np.ndarray
    border: np.ndarray
    course: float
    distance: float


def lane_frame(p: Sequence[float], lane: Lane) -> LaneFrame:
    p = np.asarray(p, dtype=float)
    a = lane.centerline[:-1]
    d = np.diff(lane.centerline, axis=0)
    len2 = np.einsum("ij,ij->i", d, d)
    t = np.clip(np.einsum("ij,ij->i", p - a, d) / len2, 0.0, 1.0)
    feet = a + t[:, None] * d
    dist2 = np.einsum("ij,ij->i", p - feet, p - feet)
    # argmin picks the earlier segment on ties
    k = int(np.argmin(dist2))
    seg = d[k] / math.sqrt(len2[k])
    left = np.array([-seg[1], seg[0]])
    offset = float(left @ (p - feet[k]))
    axis = left if offset >= 0.0 else -left
    border = feet[k] + axis * (lane.width / 2.0)
    course = math.atan2(seg[1], seg[0])
    return LaneFrame(offset, axis, border, course, math.sqrt(float(dist2[k])))
