"""Scene-level violation diagnosis and dataset-level physics metrics.

``check_physics`` is the single source of truth for what counts as a
violation: pairwise penetrations above the collision tolerance, boundary
excursions above the out-of-bounds tolerance, and objects with no support.
Rewards, the layout optimizer, and dataset metrics all consume its report.

Dataset metrics are per-scene ratios averaged over scenes: the out-of-bounds
rate and collision rate count objects (an object in several colliding pairs
counts once), and the violation-volume metric sums colliding-pair
intersection volumes plus boundary-excess volumes, stored in cubic meters.
"""

from __future__ import annotations

from dataclasses import dataclass

from .geometry import (
    EPS_COLLISION,
    EPS_OOB,
    EPS_SUPPORT,
    SURFACE_OVERLAP_MIN,
    SupportKind,
    obb_from_object,
    oob_excess,
    pair_intersection_volume,
    pair_penetration,
    support_status,
)
from .scene import Scene


class EmptyInput(ValueError):
    """Aggregation over zero scenes has no defined value."""


@dataclass(frozen=True)
class PhysicsConfig:
    """Tolerances for violation detection."""

    eps_col: float = EPS_COLLISION
    eps_oob: float = EPS_OOB
    eps_support: float = EPS_SUPPORT
    surface_overlap_min: float = SURFACE_OVERLAP_MIN


DEFAULT_PHYSICS = PhysicsConfig()


def _pair_key(uid_a: str, uid_b: str) -> tuple[str, str]:
    return (uid_a, uid_b) if uid_a <= uid_b else (uid_b, uid_a)


@dataclass(frozen=True)
class ViolationReport:
    """Everything wrong with one scene, keyed by object uid.

    ``pair_matrix`` holds penetration depths for colliding pairs only (keys
    are sorted uid pairs); ``colliding`` is exactly the union of its key
    members. ``per_object_excess`` maps every object to its (max excursion,
    volume outside); ``oob`` contains those whose excursion exceeds the
    tolerance.
    """

    colliding: frozenset[str]
    oob: frozenset[str]
    pair_matrix: dict[tuple[str, str], float]
    per_object_excess: dict[str, tuple[float, float]]
    unsupported: frozenset[str]

    def violation_count(self) -> int:
        return len(self.colliding | self.oob)

    def is_clean(self) -> bool:
        return not self.colliding and not self.oob


def check_physics(scene: Scene, cfg: PhysicsConfig = DEFAULT_PHYSICS) -> ViolationReport:
    """Diagnose collisions, boundary violations, and missing support."""
    boxes = {obj.uid: obb_from_object(obj) for obj in scene.objects}
    pair_matrix: dict[tuple[str, str], float] = {}
    colliding: set[str] = set()
    objects = list(scene.objects)
    for i, a in enumerate(objects):
        for b in objects[i + 1 :]:
            depth = pair_penetration(boxes[a.uid], boxes[b.uid])
            if depth > cfg.eps_col:
                pair_matrix[_pair_key(a.uid, b.uid)] = depth
                colliding.add(a.uid)
                colliding.add(b.uid)

    per_object_excess: dict[str, tuple[float, float]] = {}
    oob: set[str] = set()
    for obj in objects:
        excursion, volume = oob_excess(obj, scene.room)
        per_object_excess[obj.uid] = (excursion, volume)
        if excursion > cfg.eps_oob:
            oob.add(obj.uid)

    unsupported = {
        obj.uid
        for obj in objects
        if support_status(
            obj, scene, eps=cfg.eps_support, overlap_min=cfg.surface_overlap_min
        ).kind
        is SupportKind.UNSUPPORTED
    }
    return ViolationReport(
        colliding=frozenset(colliding),
        oob=frozenset(oob),
        pair_matrix=pair_matrix,
        per_object_excess=per_object_excess,
        unsupported=frozenset(unsupported),
    )


@dataclass(frozen=True)
class SceneRatios:
    """Violation summary of one scene in the units the rewards consume."""

    r_col: float  # percent of objects colliding
    r_oob: float  # percent of objects out of bounds
    d_pen: float  # total penetration depth over colliding pairs, meters
    v_oob: float  # total volume outside the room, cubic meters
    r_unsup: float  # percent of objects unsupported


def scene_ratios(report: ViolationReport, scene: Scene) -> SceneRatios:
    """Reduce a report to percentages and totals over the scene's objects."""
    n = max(len(scene.objects), 1)
    return SceneRatios(
        r_col=100.0 * len(report.colliding) / n,
        r_oob=100.0 * len(report.oob) / n,
        d_pen=sum(report.pair_matrix.values()),
        v_oob=sum(volume for _, volume in report.per_object_excess.values()),
        r_unsup=100.0 * len(report.unsupported) / n,
    )


@dataclass(frozen=True)
class DatasetMetrics:
    """Physics quality of a scene collection.

    ``obr``/``cnr`` are mean per-scene fractions of objects out of bounds /
    colliding; ``vbl`` is the mean per-scene violation volume in cubic
    meters (colliding-pair intersection volumes plus boundary-excess
    volumes).
    """

    obr: float
    cnr: float
    vbl: float
    scene_count: int


def violation_volume(report: ViolationReport, scene: Scene) -> float:
    """Total violation volume of one scene in cubic meters."""
    boxes = {obj.uid: obb_from_object(obj) for obj in scene.objects}
    pair_volume = sum(
        pair_intersection_volume(boxes[a], boxes[b]) for a, b in report.pair_matrix
    )
    oob_volume = sum(volume for _, volume in report.per_object_excess.values())
    return pair_volume + oob_volume


def aggregate(reports: list[tuple[ViolationReport, Scene]]) -> DatasetMetrics:
    """Mean per-scene out-of-bounds rate, collision rate, and violation volume.

    Raises:
        EmptyInput: on an empty list.
    """
    if not reports:
        raise EmptyInput("cannot aggregate zero scenes")
    obr = cnr = vbl = 0.0
    for report, scene in reports:
        n = max(len(scene.objects), 1)
        obr += len(report.oob) / n
        cnr += len(report.colliding) / n
        vbl += violation_volume(report, scene)
    count = len(reports)
    return DatasetMetrics(obr=obr / count, cnr=cnr / count, vbl=vbl / count, scene_count=count)
