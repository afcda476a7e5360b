"""Hierarchical reward system: initial, per-step, terminal, and trajectory.

Three layers of scoring drive multi-turn scene editing:

* ``init_reward`` gates the created room (binary: degenerate geometry,
  unrealistic area, or a room-type mismatch fails the episode start).
* ``step_reward`` mixes tool-syntax quality, four piecewise physical curves
  (collision rate, out-of-bounds rate, penetration depth, out-of-bounds
  volume), and two judge-driven semantic signals (improvement, relevance or
  key-object presence).
* ``final_reward`` mixes format, object completeness/size, terminal-scene
  physics (including support), and consolidated judge scores — with hard
  overrides for tiny scenes.
* ``trajectory_score`` blends the step mean with the final reward.

Every component maps no-violation to exactly 1.0, is continuous and monotone
non-increasing in its violation argument, and is clamped to [-1, 1].
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .assets import AssetCatalog, match_category, size_valid
from .metrics import SceneRatios, ViolationReport
from .scene import DegeneratePolygon, Scene, room_area

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

#: Rooms larger than this (or with non-positive area) fail initialization.
MAX_ROOM_AREA = 30.0
#: Terminal scenes with fewer objects than this are failed outright.
MIN_OBJECT_COUNT = 4
#: Terminal scenes with fewer size-valid objects than this skip physics
#: scoring and take the penalty instead.
MIN_SIZE_VALID_OBJECTS = 3

#: The discrete value set judges may emit for consolidated scores.
CONSOLIDATED_VALUES = (-1.0, -0.5, 0.0, 0.5, 1.0)


class EmptyTrajectory(ValueError):
    """A trajectory score needs at least one step."""


# --------------------------------------------------------------------------
# Weights


@dataclass(frozen=True)
class StepWeights:
    fmt: float = 0.10
    phy_each: float = 0.10  # four physical components
    sem_each: float = 0.25  # two semantic components


@dataclass(frozen=True)
class TerminalWeights:
    fmt: float = 0.10
    obj: float = 0.30
    scene_phys: float = 0.30
    scene_vlm: float = 0.30


@dataclass(frozen=True)
class RewardWeights:
    alpha: float = 0.4  # process consistency (mean step reward)
    beta: float = 0.6  # outcome quality (final reward)
    step: StepWeights = field(default_factory=StepWeights)
    terminal: TerminalWeights = field(default_factory=TerminalWeights)

    def __post_init__(self):
        values = (
            self.alpha,
            self.beta,
            self.step.fmt,
            self.step.phy_each,
            self.step.sem_each,
            self.terminal.fmt,
            self.terminal.obj,
            self.terminal.scene_phys,
            self.terminal.scene_vlm,
        )
        if any(v < 0 for v in values):
            raise ValueError("reward weights must be non-negative")


DEFAULT_WEIGHTS = RewardWeights()


def load_weights(path: str | Path) -> RewardWeights:
    """Read weight overrides from a TOML or JSON file.

    The file mirrors the built-in structure key for key; omitted keys keep
    their defaults::

        alpha = 0.4
        beta = 0.6
        [step]
        fmt = 0.10
        phy_each = 0.10
        sem_each = 0.25
        [terminal]
        fmt = 0.10
        obj = 0.30
        scene_phys = 0.30
        scene_vlm = 0.30
    """
    path = Path(path)
    if path.suffix.lower() == ".json":
        data = json.loads(path.read_text())
    else:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    step = StepWeights(**data.get("step", {}))
    terminal = TerminalWeights(**data.get("terminal", {}))
    return RewardWeights(
        alpha=data.get("alpha", 0.4),
        beta=data.get("beta", 0.6),
        step=step,
        terminal=terminal,
    )


# --------------------------------------------------------------------------
# Initial-scene gate


def init_reward(scene: Scene | None, requested_room_type: str | None) -> float:
    """Binary gate on the created room: 1.0 if acceptable, else -1.0.

    Fails on: missing/unparsable scene, triangular footprint,
    self-intersecting footprint, floor area above 30 m² (or non-positive),
    or a room type that does not match the request.
    """
    if scene is None:
        return -1.0
    room = scene.room
    if len(room.footprint()) == 3:
        return -1.0
    if not room.is_simple():
        return -1.0
    try:
        area = room_area(room)
    except DegeneratePolygon:
        return -1.0
    if area > MAX_ROOM_AREA or area <= 0.0:
        return -1.0
    if requested_room_type is not None:
        if room.room_type.strip().lower() != requested_room_type.strip().lower():
            return -1.0
    return 1.0


# --------------------------------------------------------------------------
# Per-component scores


def format_reward(penalties) -> float:
    """max(1 - total penalty, -1) over a turn's format penalties."""
    total = sum(p.weight for p in penalties)
    return max(1.0 - total, -1.0)


def collision_rate_reward(r_col: float) -> float:
    """Piecewise score of the colliding-object percentage (0 -> 1, 45 -> 0)."""
    if r_col <= 20.0:
        return 1.0 - 0.5 * (r_col / 20.0)
    if r_col <= 45.0:
        return 0.5 - 0.5 * (r_col - 20.0) / 25.0
    return max(-(r_col - 45.0) / 55.0, -1.0)


def oob_rate_reward(r_oob: float) -> float:
    """Piecewise score of the out-of-bounds percentage (0 -> 1, 30 -> 0)."""
    if r_oob <= 10.0:
        return 1.0 - 0.05 * r_oob
    if r_oob <= 30.0:
        return 0.5 - 0.025 * (r_oob - 10.0)
    return max(-(r_oob - 30.0) / 70.0, -1.0)


def penetration_reward(d_pen: float) -> float:
    """Piecewise score of total penetration depth in meters."""
    if d_pen <= 0.1:
        return 1.0 - 5.0 * d_pen
    if d_pen <= 0.3:
        return 0.5 - 2.5 * (d_pen - 0.1)
    if d_pen <= 0.6:
        left = 0.5 - 2.5 * 0.2  # value at 0.3
        return left + (d_pen - 0.3) * (-0.5 - left) / 0.3
    if d_pen <= 1.0:
        return -0.5 - 1.25 * (d_pen - 0.6)
    return -1.0


def oob_volume_reward(v_oob: float) -> float:
    """Piecewise score of total out-of-bounds volume in cubic meters."""
    if v_oob <= 0.2:
        return 1.0 - 2.5 * v_oob
    if v_oob <= 0.5:
        return 0.5 - 1.67 * (v_oob - 0.2)
    if v_oob <= 1.0:
        left = 0.5 - 1.67 * 0.3  # value at 0.5 (-0.001 by the curve's own slope)
        return left + (v_oob - 0.5) * (-0.5 - left) / 0.5
    if v_oob <= 2.0:
        return -0.5 - 0.5 * (v_oob - 1.0)
    return -1.0


def support_reward(r_unsup: float) -> float:
    """1 - (unsupported percentage / 10), clamped to [-1, 1]."""
    value = 1.0 - max(0.0, r_unsup / 10.0)
    return max(min(value, 1.0), -1.0)


def key_objects_score(found: int, total: int, essential_missing: bool) -> float:
    """Mandatory-object completeness with a hard essential-object gate."""
    if total < 1 or not 0 <= found <= total:
        raise ValueError(f"need 0 <= found <= total with total >= 1, got {found}/{total}")
    if essential_missing:
        return -1.0
    ratio = found / total
    if ratio >= 0.99:
        return 1.0
    if ratio > 0.5:
        return 0.0
    return -1.0


def relevance_score(relevant: int, irrelevant: int) -> float:
    """Score of this turn's additions: all relevant 1.0, none relevant -1.0,
    else majority rule at half magnitude (ties count against)."""
    if relevant < 0 or irrelevant < 0 or relevant + irrelevant < 1:
        raise ValueError(f"need at least one classified object, got ({relevant}, {irrelevant})")
    if irrelevant == 0:
        return 1.0
    if relevant == 0:
        return -1.0
    return 0.5 if relevant > irrelevant else -0.5


def size_validity_counts(scene: Scene, catalog: AssetCatalog) -> tuple[int, int]:
    """(valid, total) objects under the catalog's per-category size envelopes."""
    valid = sum(
        1
        for obj in scene.objects
        if size_valid(catalog, match_category(catalog, obj.description), obj.size)
    )
    return valid, len(scene.objects)


def size_proportion_score(scene: Scene, catalog: AssetCatalog) -> float:
    """clamp(1 - 2 * invalid/total, -1, 1); an empty scene scores 1.0."""
    valid, total = size_validity_counts(scene, catalog)
    if total == 0:
        return 1.0
    invalid = total - valid
    return max(min(1.0 - 2.0 * invalid / total, 1.0), -1.0)


# --------------------------------------------------------------------------
# Judge value bundle


@dataclass(frozen=True)
class JudgeScores:
    """Values produced by the semantic judge for terminal scoring.

    ``consolidated`` holds (rationality, requirement_match, scene_graph),
    each constrained to the 5-point scale.
    """

    improvement: int = 0
    mandatory_objects: tuple[str, ...] = ()
    relevant: tuple[str, ...] = ()
    irrelevant: tuple[str, ...] = ()
    consolidated: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.improvement not in (-1, 0, 1):
            raise ValueError(f"improvement must be -1, 0, or 1, got {self.improvement!r}")
        for value in self.consolidated:
            if value not in CONSOLIDATED_VALUES:
                raise ValueError(
                    f"consolidated scores must be one of {CONSOLIDATED_VALUES}, got {value!r}"
                )


# --------------------------------------------------------------------------
# Composites


@dataclass(frozen=True)
class StepReward:
    """One edit turn's reward and its components (all in [-1, 1])."""

    r_fmt: float
    r_col: float
    r_oob: float
    r_pen: float
    r_oob_vol: float
    r_imp: float
    r_key: float
    r_t: float


def step_reward(
    r_fmt: float,
    r_col: float,
    r_oob: float,
    r_pen: float,
    r_oob_vol: float,
    r_imp: float,
    r_key: float,
    weights: RewardWeights = DEFAULT_WEIGHTS,
) -> StepReward:
    """Weighted sum of one turn's components (format, physics x4, semantics x2)."""
    w = weights.step
    r_t = (
        w.fmt * r_fmt
        + w.phy_each * (r_col + r_oob + r_pen + r_oob_vol)
        + w.sem_each * (r_imp + r_key)
    )
    return StepReward(
        r_fmt=r_fmt,
        r_col=r_col,
        r_oob=r_oob,
        r_pen=r_pen,
        r_oob_vol=r_oob_vol,
        r_imp=r_imp,
        r_key=r_key,
        r_t=r_t,
    )


def step_reward_from_ratios(
    r_fmt: float,
    ratios: SceneRatios,
    r_imp: float,
    r_key: float,
    weights: RewardWeights = DEFAULT_WEIGHTS,
) -> StepReward:
    """`step_reward` with the physical components derived from scene ratios."""
    return step_reward(
        r_fmt=r_fmt,
        r_col=collision_rate_reward(ratios.r_col),
        r_oob=oob_rate_reward(ratios.r_oob),
        r_pen=penetration_reward(ratios.d_pen),
        r_oob_vol=oob_volume_reward(ratios.v_oob),
        r_imp=r_imp,
        r_key=r_key,
        weights=weights,
    )


@dataclass(frozen=True)
class FinalReward:
    """Terminal reward with components and any overrides that fired."""

    r_fmt: float
    r_key: float
    r_size: float
    r_support: float
    r_col: float
    r_oob: float
    r_pen: float
    r_oob_vol: float
    consolidated: tuple[float, float, float]
    object_count_override: bool
    physics_skipped: bool
    r_final: float


def final_reward(
    scene: Scene,
    report: ViolationReport,
    ratios: SceneRatios,
    judge: JudgeScores,
    key_check: tuple[int, int, bool],
    catalog: AssetCatalog,
    r_fmt: float,
    weights: RewardWeights = DEFAULT_WEIGHTS,
) -> FinalReward:
    """Terminal scene score with hard overrides.

    Fewer than 4 objects fails the scene outright (-1.0). Fewer than 3
    size-valid objects replaces the physics mix with -1.0 and flags it
    skipped. Otherwise the score is the weighted mean of format, object
    completeness/size, terminal physics, and consolidated judge scores.
    """
    found, total, essential_gone = key_check
    r_key = key_objects_score(found, total, essential_gone)
    r_size = size_proportion_score(scene, catalog)

    valid_count, _ = size_validity_counts(scene, catalog)
    physics_skipped = valid_count < MIN_SIZE_VALID_OBJECTS
    r_support = support_reward(ratios.r_unsup)
    r_col = collision_rate_reward(ratios.r_col)
    r_oob = oob_rate_reward(ratios.r_oob)
    r_pen = penetration_reward(ratios.d_pen)
    r_oob_vol = oob_volume_reward(ratios.v_oob)
    if physics_skipped:
        phys_mix = -1.0
    else:
        phys_mix = (r_support + r_col + r_oob + r_pen + r_oob_vol) / 5.0

    object_count_override = len(scene.objects) < MIN_OBJECT_COUNT
    w = weights.terminal
    vlm_mix = sum(judge.consolidated) / 3.0
    obj_mix = (r_key + r_size) / 2.0
    if object_count_override:
        r_final = -1.0
    else:
        r_final = w.fmt * r_fmt + w.obj * obj_mix + w.scene_phys * phys_mix + w.scene_vlm * vlm_mix
    return FinalReward(
        r_fmt=r_fmt,
        r_key=r_key,
        r_size=r_size,
        r_support=r_support,
        r_col=r_col,
        r_oob=r_oob,
        r_pen=r_pen,
        r_oob_vol=r_oob_vol,
        consolidated=judge.consolidated,
        object_count_override=object_count_override,
        physics_skipped=physics_skipped,
        r_final=r_final,
    )


@dataclass(frozen=True)
class TrajectoryScore:
    mean_step: float
    final: float
    j_tau: float


def trajectory_score(
    step_rewards, final: float, weights: RewardWeights = DEFAULT_WEIGHTS
) -> TrajectoryScore:
    """J = alpha * mean(step rewards) + beta * final.

    Raises:
        EmptyTrajectory: with no steps the mean is undefined.
    """
    steps = list(step_rewards)
    if not steps:
        raise EmptyTrajectory("trajectory has no step rewards")
    mean_step = sum(steps) / len(steps)
    return TrajectoryScore(
        mean_step=mean_step,
        final=final,
        j_tau=weights.alpha * mean_step + weights.beta * final,
    )
