"""Rule-based layout repair: move out-of-bounds objects inward, perturb the
smaller member of each colliding pair, delete what cannot be resolved.

The loop runs at most ``K_MAX_STEPS`` iterations. Each iteration re-diagnoses
the scene, then applies three phases in order:

1. every out-of-bounds object takes one fixed 0.2 m step toward the room
   centroid in the ground plane (a single step per iteration even when it
   under-corrects — the outer loop iterates). A step that would push the
   object into a previously clean neighbour is skipped for this iteration,
   so the set of violating objects can only shrink;
2. each colliding pair from this iteration's diagnosis (in sorted-uid order,
   skipping pairs touching an object already marked for deletion) has its
   smaller-volume member perturbed to a nearby free spot, or marked for
   deletion when no candidate spot qualifies;
3. marked objects are removed.

Deleting unresolvable objects makes the loop-head violation count
non-increasing across iterations. The whole procedure is deterministic; the
``rng`` parameters exist for interface compatibility and are unused.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import obb_from_object, oob_excess, pair_penetration, room_polygon
from .metrics import DEFAULT_PHYSICS, PhysicsConfig, ViolationReport, check_physics
from .scene import Scene, Vec3

#: Maximum repair iterations.
K_MAX_STEPS = 5
#: Ground-plane step toward the room centroid for out-of-bounds objects.
CENTER_STEP = 0.2
#: Clearance margin added to the perturbation magnitude.
RESOLVE_MARGIN = 0.02

#: Compass directions tried after the minimum-translation axis, radians.
_COMPASS = tuple(math.radians(a) for a in (0, 60, 120, 180, 240, 300))


@dataclass(frozen=True)
class OptReport:
    """What the optimizer did and what remains.

    ``loop_violations`` records |colliding ∪ oob| at each loop head and
    ``resolved_pairs`` the pairs whose target was successfully perturbed,
    both kept for diagnosis.
    """

    steps_run: int
    moved: tuple[tuple[str, Vec3, Vec3], ...]
    deleted: tuple[str, ...]
    residual: ViolationReport
    loop_violations: tuple[int, ...]
    resolved_pairs: tuple[tuple[str, str], ...]


def _fresh_collisions(scene: Scene, target_uid: str, cfg: PhysicsConfig):
    """Current colliding partners of one object as (depth, other_uid, obb)."""
    target_box = obb_from_object(scene.find(target_uid))
    hits = []
    for other in scene.objects:
        if other.uid == target_uid:
            continue
        depth = pair_penetration(target_box, obb_from_object(other))
        if depth > cfg.eps_col:
            hits.append((depth, other.uid, obb_from_object(other)))
    return target_box, hits


def _mtv_axis(target_box, other_box) -> tuple[float, float]:
    """Ground-plane axis of minimum overlap, signed to push the target away."""
    best_axis = (1.0, 0.0)
    best_overlap = math.inf
    for box in (target_box, other_box):
        for ax, az in box.footprint_axes():
            spans = []
            for b in (target_box, other_box):
                centre = b.center.x * ax + b.center.z * az
                (ux, uz), (vx, vz) = b.footprint_axes()
                radius = b.half_extents.x * abs(ux * ax + uz * az) + b.half_extents.z * abs(
                    vx * ax + vz * az
                )
                spans.append((centre - radius, centre + radius))
            overlap = min(spans[0][1], spans[1][1]) - max(spans[0][0], spans[1][0])
            if overlap < best_overlap:
                best_overlap = overlap
                best_axis = (ax, az)
    away = (target_box.center.x - other_box.center.x) * best_axis[0] + (
        target_box.center.z - other_box.center.z
    ) * best_axis[1]
    if away < 0.0:
        return (-best_axis[0], -best_axis[1])
    return best_axis


def _creates_new_collision(
    scene: Scene, obj, position: Vec3, violating: frozenset | set, cfg: PhysicsConfig
) -> bool:
    """True when ``obj`` placed at ``position`` penetrates an object outside
    the currently violating set."""
    box = obb_from_object(obj.with_position(position))
    for other in scene.objects:
        if other.uid == obj.uid or other.uid in violating:
            continue
        if pair_penetration(box, obb_from_object(other)) > cfg.eps_col:
            return True
    return False


def _position_clear(scene: Scene, target_uid: str, position: Vec3, cfg: PhysicsConfig) -> bool:
    """True when the target, placed at ``position``, collides with nothing
    above tolerance and stays in bounds."""
    candidate = scene.find(target_uid).with_position(position)
    box = obb_from_object(candidate)
    for other in scene.objects:
        if other.uid == target_uid:
            continue
        if pair_penetration(box, obb_from_object(other)) > cfg.eps_col:
            return False
    excursion, _ = oob_excess(candidate, scene.room)
    return excursion <= cfg.eps_oob


def resolve_collision(
    scene: Scene,
    target_uid: str,
    matrix: dict[tuple[str, str], float],
    rng=None,
    cfg: PhysicsConfig = DEFAULT_PHYSICS,
) -> tuple[bool, Vec3 | None]:
    """Try to perturb one object out of its collisions.

    Candidate translations: the minimum-translation axis of the currently
    worst pair in both signs plus six compass directions, each at magnitude
    (max current penetration + margin) and then doubled — first qualifying
    candidate wins. A candidate qualifies when the moved object has no
    collision above tolerance and no boundary excursion. Returns
    (True, None) when the object no longer collides with anything (nothing
    to resolve); (False, None) when no candidate qualifies.
    """
    del rng, matrix  # deterministic; magnitudes come from fresh penetrations
    target_box, hits = _fresh_collisions(scene, target_uid, cfg)
    if not hits:
        return True, None
    _, _, worst_box = max(hits, key=lambda h: h[0])
    magnitude = max(h[0] for h in hits) + RESOLVE_MARGIN

    mtv = _mtv_axis(target_box, worst_box)
    directions = [mtv, (-mtv[0], -mtv[1])]
    directions.extend((math.cos(a), math.sin(a)) for a in _COMPASS)

    origin = scene.find(target_uid).position
    for scale in (1.0, 2.0):
        step = magnitude * scale
        for dx, dz in directions:
            candidate = Vec3(origin.x + step * dx, origin.y, origin.z + step * dz)
            if _position_clear(scene, target_uid, candidate, cfg):
                return True, candidate
    return False, None


def optimize(
    scene: Scene, cfg: PhysicsConfig = DEFAULT_PHYSICS, rng=None
) -> tuple[Scene, OptReport]:
    """Run the repair loop and return the repaired scene plus a report."""
    del rng  # deterministic
    moved: list[tuple[str, Vec3, Vec3]] = []
    deleted: list[str] = []
    loop_violations: list[int] = []
    resolved_pairs: list[tuple[str, str]] = []
    steps_run = 0

    for _ in range(K_MAX_STEPS):
        steps_run += 1
        report = check_physics(scene, cfg)
        loop_violations.append(report.violation_count())
        if report.is_clean():
            break

        violating = report.colliding | report.oob
        centroid = room_polygon(scene.room).centroid
        for uid in sorted(report.oob):
            obj = scene.find(uid)
            dx = centroid.x - obj.position.x
            dz = centroid.y - obj.position.z  # polygon y-coordinate is scene z
            norm = math.hypot(dx, dz)
            if norm < 1e-12:
                continue
            new_position = Vec3(
                obj.position.x + CENTER_STEP * dx / norm,
                obj.position.y,
                obj.position.z + CENTER_STEP * dz / norm,
            )
            # The inward step must not recruit a previously clean object into
            # a collision — that would grow the violating set. Landing on an
            # already-violating object is tolerated (the set cannot grow) so
            # crowded boundaries still drain.
            if _creates_new_collision(scene, obj, new_position, violating, cfg):
                continue
            moved.append((uid, obj.position, new_position))
            scene = scene.replace(uid, obj.with_position(new_position))

        marked: set[str] = set()
        for pair in sorted(report.pair_matrix):
            uid_a, uid_b = pair
            if uid_a in marked or uid_b in marked:
                continue
            a, b = scene.find(uid_a), scene.find(uid_b)
            if a.volume() < b.volume() or (a.volume() == b.volume() and uid_a < uid_b):
                target_uid = uid_a
            else:
                target_uid = uid_b
            success, new_position = resolve_collision(
                scene, target_uid, report.pair_matrix, cfg=cfg
            )
            if not success:
                marked.add(target_uid)
                continue
            resolved_pairs.append(pair)
            if new_position is not None:
                obj = scene.find(target_uid)
                moved.append((target_uid, obj.position, new_position))
                scene = scene.replace(target_uid, obj.with_position(new_position))

        for uid in sorted(marked):
            scene = scene.remove(uid)
            deleted.append(uid)
    else:
        report = check_physics(scene, cfg)

    return scene, OptReport(
        steps_run=steps_run,
        moved=tuple(moved),
        deleted=tuple(deleted),
        residual=report,
        loop_violations=tuple(loop_violations),
        resolved_pairs=tuple(resolved_pairs),
    )
