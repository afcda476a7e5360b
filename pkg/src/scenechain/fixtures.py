"""Deterministic fixture scenes for tests, demos, and dataset seeds.

Each fixture is a rectangular room packed with catalog furniture at
canonical (snap-stable) sizes, laid out on a shelf grid with clearance gaps
so the scene is violation-free by construction. Everything derives from the
fixture index through a string-seeded generator, so the same index always
yields the identical scene on any platform.
"""

from __future__ import annotations

import math
import random

from .assets import (
    AssetCatalog,
    FALLBACK_CATEGORY,
    load_catalog,
    mandatory_objects,
    match_category,
)
from .metrics import DEFAULT_PHYSICS, check_physics
from .scene import RoomGeometry, Scene, SceneObject, Vec3, fresh_uid, yaw_to_quaternion

#: Base room footprints (width, depth) in meters, per room type.
ROOM_FOOTPRINTS: dict[str, tuple[float, float]] = {
    "bedroom": (4.0, 4.0),
    "living room": (5.0, 5.0),
    "dining room": (4.5, 4.0),
    "study": (3.5, 4.0),
    "office": (5.0, 5.0),
    "gym": (5.0, 5.0),
    "entertainment room": (5.5, 5.0),
}

_WALL_MARGIN = 0.3
_OBJECT_GAP = 0.2
_MAX_ROOM_AREA = 29.5  # keep fixtures comfortably under the validity cap
_MIN_OBJECTS = 5
_MAX_OBJECTS = 9


class FixtureOverflow(RuntimeError):
    """A required object does not fit into the fixture room."""


def _canonical_object(
    catalog: AssetCatalog,
    category: str,
    uids: set[str],
    rng: random.Random,
) -> SceneObject:
    """A floor object of the category at one of its canonical sizes."""
    entries = catalog.category_index[category]
    entry = entries[rng.randrange(len(entries))]
    size = entry.canonical_size
    uid = fresh_uid(category, uids)
    uids.add(uid)
    return SceneObject(
        uid=uid,
        description=category,
        position=Vec3(0.0, size.y / 2.0, 0.0),  # shelf-packed later
        rotation=yaw_to_quaternion(0.0),
        size=size,
    )


def _shelf_pack(room: RoomGeometry, objects: list[SceneObject], *, required: int):
    """Place axis-aligned objects in gap-separated rows; drop overflow extras.

    Objects are packed largest-footprint-first. The first ``required``
    objects (the room's mandatory set) must fit or ``FixtureOverflow`` is
    raised; later ones are silently dropped when space runs out.
    """
    xs = [x for x, _ in room.footprint()]
    zs = [z for _, z in room.footprint()]
    x_min, x_max = min(xs) + _WALL_MARGIN, max(xs) - _WALL_MARGIN
    z_min, z_max = min(zs) + _WALL_MARGIN, max(zs) - _WALL_MARGIN

    def by_footprint(indices):
        return sorted(indices, key=lambda i: (-(objects[i].size.x * objects[i].size.z), i))

    # Mandatory objects claim space first so extras can never crowd them out.
    order = by_footprint(range(required)) + by_footprint(range(required, len(objects)))
    placed: list[tuple[int, SceneObject]] = []
    cursor_x, row_z, row_depth = x_min, z_min, 0.0
    for rank in order:
        obj = objects[rank]
        sx, sz = obj.size.x, obj.size.z
        if cursor_x + sx > x_max:
            cursor_x = x_min
            row_z += row_depth + _OBJECT_GAP
            row_depth = 0.0
        if cursor_x + sx > x_max or row_z + sz > z_max:
            if rank < required:
                raise FixtureOverflow(
                    f"{obj.description!r} does not fit in {room.room_id!r}"
                )
            continue
        center = Vec3(cursor_x + sx / 2.0, obj.size.y / 2.0, row_z + sz / 2.0)
        placed.append((rank, obj.with_position(center)))
        cursor_x += sx + _OBJECT_GAP
        row_depth = max(row_depth, sz)
    placed.sort(key=lambda item: item[0])
    return [obj for _, obj in placed]


def make_fixture_scene(index: int, catalog: AssetCatalog | None = None) -> Scene:
    """Deterministic violation-free scene number ``index``."""
    catalog = catalog if catalog is not None else load_catalog()
    rng = random.Random(f"fixture:{index}")
    room_type = sorted(ROOM_FOOTPRINTS)[index % len(ROOM_FOOTPRINTS)]

    width, depth = ROOM_FOOTPRINTS[room_type]
    extra_w = rng.choice((0.0, 0.25, 0.5))
    extra_d = rng.choice((0.0, 0.25, 0.5))
    if (width + extra_w) * (depth + extra_d) > _MAX_ROOM_AREA:
        extra_w = extra_d = 0.0
    room = RoomGeometry.rectangle(
        width + extra_w,
        depth + extra_d,
        room_type=room_type,
        room_id=f"fixture_{index:03d}",
    )

    uids: set[str] = set()
    objects = [
        _canonical_object(catalog, category, uids, rng)
        for category in mandatory_objects(catalog, room_type)
    ]
    required = len(objects)

    small_categories = [
        category
        for category in catalog.categories()
        if category != FALLBACK_CATEGORY
        and catalog.category_index[category][0].canonical_size.volume() < 0.5
        and (
            catalog.category_index[category][0].canonical_size.x
            * catalog.category_index[category][0].canonical_size.z
        )
        < 0.4
    ]
    target = rng.randint(max(_MIN_OBJECTS, required), _MAX_OBJECTS)
    while len(objects) < target:
        category = small_categories[rng.randrange(len(small_categories))]
        objects.append(_canonical_object(catalog, category, uids, rng))

    return Scene(room=room, objects=tuple(_shelf_pack(room, objects, required=required)))


def make_fixture_scenes(count: int, catalog: AssetCatalog | None = None) -> list[Scene]:
    catalog = catalog if catalog is not None else load_catalog()
    scenes = [make_fixture_scene(i, catalog) for i in range(count)]
    for scene in scenes:
        report = check_physics(scene, DEFAULT_PHYSICS)
        if not report.is_clean():
            raise FixtureOverflow(
                f"fixture {scene.room.room_id!r} is not violation-free: "
                f"colliding={sorted(report.colliding)} oob={sorted(report.oob)}"
            )
    return scenes


def perturb_scene(
    scene: Scene,
    rng: random.Random,
    *,
    max_offset: float = 0.8,
    rotate: bool = True,
) -> Scene:
    """Jitter object poses to manufacture collisions and boundary excursions.

    Used to seed the layout optimizer with dirty-but-plausible inputs; the
    vertical coordinate is preserved so support relations stay sensible.
    """
    perturbed = []
    for obj in scene.objects:
        dx = rng.uniform(-max_offset, max_offset)
        dz = rng.uniform(-max_offset, max_offset)
        moved = obj.with_position(
            Vec3(obj.position.x + dx, obj.position.y, obj.position.z + dz)
        )
        if rotate and rng.random() < 0.3:
            moved = moved.with_rotation(yaw_to_quaternion(rng.uniform(-math.pi, math.pi)))
        perturbed.append(moved)
    return Scene(room=scene.room, objects=tuple(perturbed))


def drop_key_objects(
    scene: Scene,
    rng: random.Random,
    catalog: AssetCatalog | None = None,
    *,
    count: int = 1,
) -> Scene:
    """Remove up to ``count`` objects that fill required-furniture roles.

    Produces goal-oriented starting scenes whose gap an editing agent is
    expected to notice and repair. If nothing in the scene matches a
    required category, the scene is returned unchanged.
    """
    catalog = catalog if catalog is not None else load_catalog()
    required = set(mandatory_objects(catalog, scene.room.room_type))
    candidates = [
        obj.uid
        for obj in scene.objects
        if match_category(catalog, obj.description) in required
    ]
    if not candidates:
        return scene
    doomed = set(rng.sample(candidates, min(count, len(candidates))))
    kept = tuple(obj for obj in scene.objects if obj.uid not in doomed)
    return Scene(room=scene.room, objects=kept)
