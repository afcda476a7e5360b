"""Scene data model and canonical JSON wire format.

A scene is a room polygon plus an ordered list of furniture objects. Objects
are upright (yaw-only) oriented bounding boxes described by a center position,
a unit quaternion, and full extents. The coordinate frame is y-up with the
floor at y = 0; positions are box centers.

Every float stored on a scene is quantized to six decimals at construction so
that serialization is byte-stable and ``parse_scene_json(serialize_scene(s))``
reproduces ``s`` field-exactly.
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, field

from shapely.geometry import Point, Polygon

logger = logging.getLogger(__name__)

#: Number of decimals kept on every stored float.
FLOAT_DECIMALS = 6

#: Tolerance for accepting a quaternion as unit-norm / yaw-only.
QUAT_TOLERANCE = 1e-6


class SceneError(ValueError):
    """Base class for scene parsing/validation failures."""


class MalformedJson(SceneError):
    """The input text is not valid JSON."""


class MissingField(SceneError):
    """A required wire-format field is absent."""

    def __init__(self, name: str):
        super().__init__(f"missing required field: {name}")
        self.name = name


class InvariantViolation(SceneError):
    """A structural invariant of the scene model does not hold."""


class DegeneratePolygon(SceneError):
    """The room footprint has zero area or self-intersects."""


def quantize(value: float) -> float:
    """Round ``value`` to the canonical 6-decimal storage grid.

    Negative zero is normalized to positive zero so formatting is stable.
    """
    if not math.isfinite(value):
        raise InvariantViolation(f"non-finite float: {value!r}")
    q = round(float(value), FLOAT_DECIMALS)
    return 0.0 if q == 0.0 else q


def format_float(value: float) -> str:
    """Render a stored float in the canonical fixed 6-decimal form."""
    return f"{value:.{FLOAT_DECIMALS}f}"


@dataclass(frozen=True)
class Vec3:
    """A 3D vector in meters (y is up)."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        object.__setattr__(self, "x", quantize(self.x))
        object.__setattr__(self, "y", quantize(self.y))
        object.__setattr__(self, "z", quantize(self.z))

    @classmethod
    def from_seq(cls, seq, *, what: str = "vector") -> "Vec3":
        if not isinstance(seq, (list, tuple)) or len(seq) != 3:
            raise InvariantViolation(f"{what} must be a 3-element array, got {seq!r}")
        try:
            return cls(float(seq[0]), float(seq[1]), float(seq[2]))
        except (TypeError, ValueError) as exc:
            raise InvariantViolation(f"{what} has non-numeric entries: {seq!r}") from exc

    def to_list(self) -> list[float]:
        return [self.x, self.y, self.z]

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def scaled(self, k: float) -> "Vec3":
        return Vec3(self.x * k, self.y * k, self.z * k)

    def volume(self) -> float:
        """Product of the components (meaningful when this Vec3 is a size)."""
        return self.x * self.y * self.z


def yaw_to_quaternion(yaw: float) -> tuple[float, float, float, float]:
    """Quaternion [x, y, z, w] for a rotation of ``yaw`` radians about y."""
    half = 0.5 * yaw
    return (0.0, quantize(math.sin(half)), 0.0, quantize(math.cos(half)))


def quaternion_to_yaw(q: tuple[float, float, float, float]) -> float:
    """Yaw angle in [-pi, pi) of a (sanitized) yaw-only quaternion."""
    yaw = 2.0 * math.atan2(q[1], q[3])
    # Wrap into [-pi, pi); atan2 doubling can land on any multiple of 2*pi.
    yaw = math.remainder(yaw, 2.0 * math.pi)
    if yaw >= math.pi:
        yaw -= 2.0 * math.pi
    if yaw < -math.pi:
        yaw += 2.0 * math.pi
    return yaw


def sanitize_quaternion(q) -> tuple[float, float, float, float]:
    """Validate and canonicalize a rotation quaternion.

    Accepts a 4-sequence [x, y, z, w]. Inputs within tolerance of a unit
    yaw-only quaternion are canonicalized (x and z forced to exactly 0, the
    (y, w) pair renormalized, everything quantized). Anything else is
    projected onto its nearest yaw-only rotation via the swing-twist
    decomposition and a warning is logged; a zero twist falls back to the
    identity rotation. The result is always a fixed point of this function.
    """
    if not isinstance(q, (list, tuple)) or len(q) != 4:
        raise InvariantViolation(f"rotation must be a 4-element array, got {q!r}")
    try:
        x, y, z, w = (float(v) for v in q)
    except (TypeError, ValueError) as exc:
        raise InvariantViolation(f"rotation has non-numeric entries: {q!r}") from exc
    for v in (x, y, z, w):
        if not math.isfinite(v):
            raise InvariantViolation(f"rotation has non-finite entries: {q!r}")

    norm = math.sqrt(x * x + y * y + z * z + w * w)
    # Fast path: already canonical (exact zeros, on the 6-decimal grid, unit
    # within tolerance). Returning the input verbatim — rather than
    # renormalizing — is what makes this function idempotent: renormalizing a
    # quantized unit quaternion can move a component by up to ~7.1e-7, which
    # crosses the 5e-7 half-grid and would flip it to an adjacent cell.
    if (
        x == 0.0
        and z == 0.0
        and y == quantize(y)
        and w == quantize(w)
        and abs(norm - 1.0) <= QUAT_TOLERANCE
    ):
        return (0.0, y, 0.0, w)
    yaw_like = abs(x) <= QUAT_TOLERANCE and abs(z) <= QUAT_TOLERANCE
    if not (yaw_like and abs(norm - 1.0) <= QUAT_TOLERANCE):
        logger.warning("non-yaw or non-unit quaternion %r projected to nearest yaw", q)
    twist = math.sqrt(y * y + w * w)
    if twist == 0.0:
        return (0.0, 0.0, 0.0, 1.0)
    return (0.0, quantize(y / twist), 0.0, quantize(w / twist))


_UID_SLUG_RE = re.compile(r"[^a-z0-9]+")


def slugify(description: str) -> str:
    """Reduce a free-text description to a lowercase identifier stem."""
    slug = _UID_SLUG_RE.sub("_", description.lower()).strip("_")
    return slug or "object"


def fresh_uid(description: str, existing: set[str]) -> str:
    """Smallest-index ``<slug>_<n>`` uid not present in ``existing``."""
    stem = slugify(description)
    n = 1
    while f"{stem}_{n}" in existing:
        n += 1
    return f"{stem}_{n}"


@dataclass(frozen=True)
class SceneObject:
    """One furniture item: a yaw-only oriented bounding box with a label."""

    uid: str
    description: str
    position: Vec3
    rotation: tuple[float, float, float, float]
    size: Vec3

    def __post_init__(self):
        if not isinstance(self.uid, str) or not self.uid:
            raise InvariantViolation(f"uid must be a non-empty string, got {self.uid!r}")
        if not isinstance(self.description, str):
            raise InvariantViolation("description must be a string")
        object.__setattr__(self, "rotation", sanitize_quaternion(self.rotation))
        if min(self.size.x, self.size.y, self.size.z) <= 0.0:
            raise InvariantViolation(
                f"size components must be > 0, got {self.size.to_list()}"
            )

    @property
    def yaw(self) -> float:
        return quaternion_to_yaw(self.rotation)

    def with_position(self, position: Vec3) -> "SceneObject":
        return SceneObject(self.uid, self.description, position, self.rotation, self.size)

    def with_rotation(self, rotation) -> "SceneObject":
        return SceneObject(self.uid, self.description, self.position, rotation, self.size)

    def with_size(self, size: Vec3) -> "SceneObject":
        return SceneObject(self.uid, self.description, self.position, self.rotation, size)

    def bottom(self) -> float:
        return self.position.y - self.size.y / 2.0

    def top(self) -> float:
        return self.position.y + self.size.y / 2.0

    def volume(self) -> float:
        return self.size.volume()

    def to_wire(self) -> dict:
        return {
            "uid": self.uid,
            "description": self.description,
            "position": self.position.to_list(),
            "rotation": list(self.rotation),
            "size": self.size.to_list(),
        }

    @classmethod
    def from_wire(cls, data: dict) -> "SceneObject":
        if not isinstance(data, dict):
            raise InvariantViolation(f"object entry must be a JSON object, got {data!r}")
        uid = data.get("uid", data.get("jid"))
        if uid is None:
            raise MissingField("uid")
        for name in ("description", "position", "rotation", "size"):
            if name not in data:
                raise MissingField(name)
        return cls(
            uid=uid,
            description=data["description"],
            position=Vec3.from_seq(data["position"], what="position"),
            rotation=tuple(data["rotation"]) if isinstance(data["rotation"], (list, tuple)) else data["rotation"],
            size=Vec3.from_seq(data["size"], what="size"),
        )


@dataclass(frozen=True)
class RoomGeometry:
    """Room shell: floor polygon at y = 0, matching ceiling polygon above it."""

    bounds_top: tuple[Vec3, ...]
    bounds_bottom: tuple[Vec3, ...]
    room_type: str
    room_id: str

    def __post_init__(self):
        top = tuple(self.bounds_top)
        bottom = tuple(self.bounds_bottom)
        object.__setattr__(self, "bounds_top", top)
        object.__setattr__(self, "bounds_bottom", bottom)
        if len(bottom) < 3:
            raise InvariantViolation("room footprint needs at least 3 vertices")
        if len(top) != len(bottom):
            raise InvariantViolation("bounds_top and bounds_bottom lengths differ")
        for v in bottom:
            if v.y != 0.0:
                raise InvariantViolation("bounds_bottom vertices must lie at y = 0")
        heights = {v.y for v in top}
        if len(heights) != 1:
            raise InvariantViolation("bounds_top vertices must share one ceiling height")
        if next(iter(heights)) <= 0.0:
            raise InvariantViolation("ceiling height must be > 0")
        for t, b in zip(top, bottom):
            if t.x != b.x or t.z != b.z:
                raise InvariantViolation("bounds_top and bounds_bottom footprints differ")
        if not isinstance(self.room_type, str) or not self.room_type:
            raise InvariantViolation("room_type must be a non-empty string")
        if not isinstance(self.room_id, str) or not self.room_id:
            raise InvariantViolation("room_id must be a non-empty string")

    @property
    def ceiling_height(self) -> float:
        return self.bounds_top[0].y

    def footprint(self) -> list[tuple[float, float]]:
        """Floor polygon vertices as (x, z) pairs."""
        return [(v.x, v.z) for v in self.bounds_bottom]

    def polygon(self) -> Polygon:
        return Polygon(self.footprint())

    def is_simple(self) -> bool:
        """True when the footprint is a valid, positive-area simple polygon."""
        poly = self.polygon()
        return bool(poly.is_valid) and poly.area > 0.0

    def contains_xz(self, x: float, z: float) -> bool:
        poly = self.polygon()
        p = Point(x, z)
        return bool(poly.contains(p) or poly.touches(p))

    def to_wire(self) -> dict:
        return {
            "bounds_top": [v.to_list() for v in self.bounds_top],
            "bounds_bottom": [v.to_list() for v in self.bounds_bottom],
            "room_type": self.room_type,
            "room_id": self.room_id,
        }

    @classmethod
    def rectangle(
        cls,
        width: float,
        depth: float,
        *,
        height: float = 2.8,
        room_type: str = "bedroom",
        room_id: str = "room_0",
        origin: tuple[float, float] = (0.0, 0.0),
    ) -> "RoomGeometry":
        """Axis-aligned rectangular room helper used by fixtures and policies."""
        ox, oz = origin
        corners = [(ox, oz), (ox + width, oz), (ox + width, oz + depth), (ox, oz + depth)]
        bottom = tuple(Vec3(x, 0.0, z) for x, z in corners)
        top = tuple(Vec3(x, height, z) for x, z in corners)
        return cls(bounds_top=top, bounds_bottom=bottom, room_type=room_type, room_id=room_id)


@dataclass(frozen=True)
class Scene:
    """Latent simulator state: a room and its ordered furniture list."""

    room: RoomGeometry
    objects: tuple[SceneObject, ...] = field(default_factory=tuple)

    def __post_init__(self):
        objs = tuple(self.objects)
        object.__setattr__(self, "objects", objs)
        uids = [o.uid for o in objs]
        if len(set(uids)) != len(uids):
            dupes = sorted({u for u in uids if uids.count(u) > 1})
            raise InvariantViolation(f"duplicate object uids: {dupes}")

    def uid_set(self) -> set[str]:
        return {o.uid for o in self.objects}

    def find(self, uid: str) -> SceneObject | None:
        for obj in self.objects:
            if obj.uid == uid:
                return obj
        return None

    def with_objects(self, objects) -> "Scene":
        return Scene(room=self.room, objects=tuple(objects))

    def add(self, obj: SceneObject) -> "Scene":
        return self.with_objects(self.objects + (obj,))

    def remove(self, uid: str) -> "Scene":
        return self.with_objects(o for o in self.objects if o.uid != uid)

    def replace(self, uid: str, new_obj: SceneObject) -> "Scene":
        return self.with_objects(new_obj if o.uid == uid else o for o in self.objects)

    def to_wire(self) -> dict:
        data = self.room.to_wire()
        data["objects"] = [o.to_wire() for o in self.objects]
        return data


def _fmt_value(value) -> str:
    """Canonical JSON fragment for one value (floats fixed at 6 decimals)."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_float(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt_value(v) for v in value) + "]"
    if isinstance(value, dict):
        return "{" + ", ".join(f"{json.dumps(k)}: {_fmt_value(v)}" for k, v in value.items()) + "}"
    raise TypeError(f"cannot serialize value of type {type(value)!r}")


def serialize_scene(scene: Scene, *, indent: bool = True) -> str:
    """Canonical scene JSON: stable key order, fixed 6-decimal floats.

    Two serializations of equal scenes are byte-identical, and
    ``parse_scene_json`` inverts this function field-exactly.
    """
    wire = scene.to_wire()
    if not indent:
        return _fmt_value(wire)
    lines = ["{"]
    lines.append('  "bounds_top": ' + _fmt_value(wire["bounds_top"]) + ",")
    lines.append('  "bounds_bottom": ' + _fmt_value(wire["bounds_bottom"]) + ",")
    lines.append('  "room_type": ' + json.dumps(wire["room_type"]) + ",")
    lines.append('  "room_id": ' + json.dumps(wire["room_id"]) + ",")
    if not wire["objects"]:
        lines.append('  "objects": []')
    else:
        lines.append('  "objects": [')
        body = ",\n".join("    " + _fmt_value(o) for o in wire["objects"])
        lines.append(body)
        lines.append("  ]")
    lines.append("}")
    return "\n".join(lines)


def scene_from_wire(data: dict) -> Scene:
    """Build a Scene from decoded wire JSON, enforcing structural invariants."""
    if not isinstance(data, dict):
        raise InvariantViolation(f"scene must be a JSON object, got {type(data)!r}")
    for name in ("bounds_top", "bounds_bottom", "room_type", "room_id"):
        if name not in data:
            raise MissingField(name)
    bounds_top = data["bounds_top"]
    bounds_bottom = data["bounds_bottom"]
    if not isinstance(bounds_top, list) or not isinstance(bounds_bottom, list):
        raise InvariantViolation("bounds_top/bounds_bottom must be arrays")
    room = RoomGeometry(
        bounds_top=tuple(Vec3.from_seq(v, what="bounds_top vertex") for v in bounds_top),
        bounds_bottom=tuple(Vec3.from_seq(v, what="bounds_bottom vertex") for v in bounds_bottom),
        room_type=data["room_type"],
        room_id=data["room_id"],
    )
    raw_objects = data.get("objects")
    if raw_objects is None:
        raise MissingField("objects")
    if not isinstance(raw_objects, list):
        raise InvariantViolation("objects must be an array")
    objects = tuple(SceneObject.from_wire(entry) for entry in raw_objects)
    return Scene(room=room, objects=objects)


def parse_scene_json(text: str) -> Scene:
    """Parse scene JSON text into a Scene.

    Raises:
        MalformedJson: the text is not JSON.
        MissingField: a required wire field is absent.
        InvariantViolation: a structural invariant fails.

    Triangle or self-intersecting footprints parse successfully; geometric
    validity is judged by the reward system, not the parser.
    """
    try:
        data = json.loads(text)
    except (json.JSONDecodeError, TypeError) as exc:
        raise MalformedJson(f"scene JSON does not parse: {exc}") from exc
    return scene_from_wire(data)


def room_area(room: RoomGeometry) -> float:
    """Shoelace area of the floor footprint in square meters.

    Raises:
        DegeneratePolygon: zero area or self-intersection.
    """
    poly = room.polygon()
    if not poly.is_valid or poly.area <= 0.0:
        raise DegeneratePolygon("room footprint is degenerate (zero area or self-intersecting)")
    return float(poly.area)
