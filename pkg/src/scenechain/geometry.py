"""Geometric kernel: oriented-box overlap, boundary excess, and support.

Objects are upright boxes rotated about the vertical axis only, so every
horizontal cross-section is the same rotated rectangle. That makes box-level
geometry exact: penetration depth comes from the separating-axis test over
the two footprints' axes plus the vertical interval, and out-of-bounds volume
is (footprint area outside the room polygon) x (vertical extent inside the
room's height range). Polygon set operations are delegated to shapely;
everything here is a pure function over immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from shapely.geometry import Point, Polygon
from shapely.validation import make_valid

from .scene import RoomGeometry, Scene, SceneObject, Vec3, quaternion_to_yaw

#: Penetration deeper than this counts as a collision (meters).
EPS_COLLISION = 0.01
#: Corner excursion beyond this counts as out of bounds (meters).
EPS_OOB = 0.001
#: Face-to-face distance treated as contact for support checks (meters).
EPS_SUPPORT = 0.02
#: Minimum fraction of an object's footprint that must rest on a supporter.
SURFACE_OVERLAP_MIN = 0.5


@dataclass(frozen=True)
class Obb:
    """Upright oriented box: center, yaw about +y, and half extents."""

    center: Vec3
    yaw: float
    half_extents: Vec3

    def __post_init__(self):
        if min(self.half_extents.x, self.half_extents.y, self.half_extents.z) <= 0.0:
            raise ValueError(f"half extents must be > 0, got {self.half_extents.to_list()}")

    def bottom(self) -> float:
        return self.center.y - self.half_extents.y

    def top(self) -> float:
        return self.center.y + self.half_extents.y

    def footprint_axes(self) -> tuple[tuple[float, float], tuple[float, float]]:
        """The two in-plane unit axes of the footprint rectangle (x, z)."""
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return (c, s), (-s, c)

    def footprint_corners(self) -> list[tuple[float, float]]:
        """The four footprint corners in (x, z), counter-clockwise."""
        (ux, uz), (vx, vz) = self.footprint_axes()
        hx, hz = self.half_extents.x, self.half_extents.z
        cx, cz = self.center.x, self.center.z
        return [
            (cx + sx * hx * ux + sz * hz * vx, cz + sx * hx * uz + sz * hz * vz)
            for sx, sz in ((-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0))
        ]

    def footprint_polygon(self) -> Polygon:
        return Polygon(self.footprint_corners())

    def footprint_area(self) -> float:
        return 4.0 * self.half_extents.x * self.half_extents.z

    def volume(self) -> float:
        return 8.0 * self.half_extents.x * self.half_extents.y * self.half_extents.z


def obb_from_object(obj: SceneObject) -> Obb:
    """`Obb` view of a scene object (half extents, yaw from quaternion)."""
    return Obb(
        center=obj.position,
        yaw=quaternion_to_yaw(obj.rotation),
        half_extents=Vec3(obj.size.x / 2.0, obj.size.y / 2.0, obj.size.z / 2.0),
    )


def _axis_overlap(axis: tuple[float, float], a: Obb, b: Obb) -> float:
    """Overlap of the two footprints' projections onto a horizontal axis."""
    ax, az = axis
    spans = []
    for box in (a, b):
        centre = box.center.x * ax + box.center.z * az
        (ux, uz), (vx, vz) = box.footprint_axes()
        radius = box.half_extents.x * abs(ux * ax + uz * az) + box.half_extents.z * abs(
            vx * ax + vz * az
        )
        spans.append((centre - radius, centre + radius))
    (a_lo, a_hi), (b_lo, b_hi) = spans
    return min(a_hi, b_hi) - max(a_lo, b_lo)


def pair_penetration(a: Obb, b: Obb) -> float:
    """Minimum-translation penetration depth between two boxes (0 if disjoint).

    Separating-axis test over both footprints' axes (4 horizontal candidates)
    plus the vertical interval; the depth is the smallest overlap, and any
    non-positive overlap separates the pair. Symmetric in its arguments.
    """
    vertical = min(a.top(), b.top()) - max(a.bottom(), b.bottom())
    if vertical <= 0.0:
        return 0.0
    depth = vertical
    for box in (a, b):
        for axis in box.footprint_axes():
            overlap = _axis_overlap(axis, a, b)
            if overlap <= 0.0:
                return 0.0
            depth = min(depth, overlap)
    return depth


def pair_intersection_volume(a: Obb, b: Obb) -> float:
    """Exact intersection volume of two upright boxes.

    The horizontal cross-section of the intersection is constant over the
    shared vertical interval, so volume = footprint-intersection area x
    vertical overlap.
    """
    vertical = min(a.top(), b.top()) - max(a.bottom(), b.bottom())
    if vertical <= 0.0:
        return 0.0
    area = a.footprint_polygon().intersection(b.footprint_polygon()).area
    return area * vertical


def room_polygon(room: RoomGeometry) -> Polygon:
    """The room footprint as a shapely polygon, repaired if degenerate.

    Degenerate footprints are judged (and rejected) by rewards, but the
    kernel stays total: invalid rings are repaired to a measurable region.
    """
    poly = room.polygon()
    if not poly.is_valid:
        poly = make_valid(poly)
    return poly


def oob_excess(obj: SceneObject, room: RoomGeometry) -> tuple[float, float]:
    """(max corner excursion, volume outside the room) for one object.

    Excursion is the largest distance any footprint corner lies outside the
    room polygon (0 when contained). Volume is the footprint area outside the
    polygon times the box's vertical extent clipped to [0, ceiling]; both are
    exact for simple polygons.
    """
    box = obb_from_object(obj)
    room_poly = room_polygon(room)
    excursion = max(Point(c).distance(room_poly) for c in box.footprint_corners())
    outside_area = box.footprint_polygon().difference(room_poly).area
    if outside_area <= 0.0:
        return excursion, 0.0
    clipped_height = min(box.top(), room.ceiling_height) - max(box.bottom(), 0.0)
    return excursion, outside_area * max(clipped_height, 0.0)


class SupportKind(str, Enum):
    FLOOR = "floor"
    SURFACE = "surface"
    WALL = "wall"
    UNSUPPORTED = "unsupported"


@dataclass(frozen=True)
class SupportStatus:
    kind: SupportKind
    supporter_uid: str | None = None

    def __post_init__(self):
        if (self.supporter_uid is not None) != (self.kind is SupportKind.SURFACE):
            raise ValueError("supporter_uid is set exactly for surface support")


def _surface_supporter(
    obj: SceneObject, box: Obb, scene: Scene, eps: float, overlap_min: float
) -> str | None:
    """Uid of the object this one rests on, or None.

    Candidates have their top within ``eps`` of the object's bottom and carry
    at least ``overlap_min`` of its footprint. Ties resolve by larger overlap,
    then smaller gap, then smaller uid.
    """
    footprint = box.footprint_polygon()
    own_area = footprint.area
    if own_area <= 0.0:
        return None
    best = None
    for other in scene.objects:
        if other.uid == obj.uid:
            continue
        gap = abs(obj.bottom() - other.top())
        if gap > eps:
            continue
        overlap = footprint.intersection(obb_from_object(other).footprint_polygon()).area
        fraction = overlap / own_area
        if fraction < overlap_min:
            continue
        key = (-fraction, gap, other.uid)
        if best is None or key < best[0]:
            best = (key, other.uid)
    return best[1] if best else None


def _touches_wall(box: Obb, room: RoomGeometry, eps: float) -> bool:
    """True when some footprint edge has both endpoints within eps of the
    room boundary."""
    boundary = room_polygon(room).boundary
    corners = box.footprint_corners()
    near = [Point(c).distance(boundary) <= eps for c in corners]
    return any(near[i] and near[(i + 1) % 4] for i in range(4))


def support_status(
    obj: SceneObject,
    scene: Scene,
    *,
    eps: float = EPS_SUPPORT,
    overlap_min: float = SURFACE_OVERLAP_MIN,
) -> SupportStatus:
    """How an object is held up: floor contact, resting on another object,
    mounted on a wall, or unsupported. Precedence floor > surface > wall."""
    if abs(obj.bottom()) <= eps:
        return SupportStatus(SupportKind.FLOOR)
    box = obb_from_object(obj)
    supporter = _surface_supporter(obj, box, scene, eps, overlap_min)
    if supporter is not None:
        return SupportStatus(SupportKind.SURFACE, supporter)
    if obj.bottom() > 0.0 and _touches_wall(box, scene.room, eps):
        return SupportStatus(SupportKind.WALL)
    return SupportStatus(SupportKind.UNSUPPORTED)
