"""Reverse-engineered editing trajectories ("chains") and dataset synthesis.

A chain is a forward construction trajectory: empty room, then 4-8 turns of
tool calls ending at a target scene. Chains are made by dismantling the
target in reverse — each reverse edit records the exact forward call that
undoes it — then inverting the order:

* a reverse *removal* of an object becomes a forward add of that object at
  its exact pose and size (adds are volume-stratified: early reverse progress
  draws from small objects, which become the chain's late decorating turns,
  so the forward chain builds coarse-to-fine);
* a reverse *perturbation* (position, yaw, size, or description swap) becomes
  the forward call restoring the ground truth;
* a reverse *insertion* of a distractor becomes a forward removal.

Construction replays the forward calls while building the chain, so the
stored per-turn scenes and ``final_scene`` are exactly what replay produces.
All randomness flows through one seeded generator; datasets derive one
sub-seed per (scene, candidate) so synthesis is reproducible and
order-independent across scenes.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field, replace as dc_replace
from pathlib import Path

from .assets import (
    AssetCatalog,
    FALLBACK_CATEGORY,
    load_catalog,
    match_category,
    size_valid,
    snap_size,
)
from .metrics import DEFAULT_PHYSICS, check_physics
from .scene import (
    RoomGeometry,
    Scene,
    SceneObject,
    Vec3,
    fresh_uid,
    scene_from_wire,
    yaw_to_quaternion,
)
from .tools import (
    AddObject,
    MoveObject,
    RemoveObject,
    ReplaceObject,
    RotateObject,
    ScaleObject,
    ToolCall,
    apply_tool_calls,
    canonical_json,
    tool_call_from_wire,
    tool_call_to_wire,
)

#: Retries for one reverse-edit slot before the slot is skipped.
_SLOT_RETRIES = 8
#: Rejection-sampling tries for a uniform in-room point before falling back
#: to the footprint centroid.
_POINT_RETRIES = 100
#: Dismantle attempts before giving up on a scene (early breaks are rare).
_CHAIN_RETRIES = 100

OP_NAMES = ("add", "move", "rotate", "scale", "replace", "remove")


class EmptyScene(ValueError):
    """Dismantling needs at least one object."""


class ChainVerificationError(ValueError):
    """A chain failed replay verification."""


@dataclass(frozen=True)
class ChainConfig:
    """Knobs of the reverse-engineering sampler."""

    op_probs: dict[str, float] = field(
        default_factory=lambda: {
            "add": 0.35,
            "move": 0.20,
            "rotate": 0.20,
            "scale": 0.05,
            "replace": 0.10,
            "remove": 0.10,
        }
    )
    small_vol: float = 0.5  # cubic meters; below this is "decor"
    large_vol: float = 2.0  # cubic meters; at or above this is "core"
    early_p: float = 0.3  # progress below this draws adds from small objects
    late_p: float = 0.7  # progress at or above this draws from large objects
    turns_min: int = 4
    turns_max: int = 8
    seed: int = 0

    def __post_init__(self):
        if set(self.op_probs) != set(OP_NAMES):
            raise ValueError(f"op_probs must cover exactly {OP_NAMES}")
        total = sum(self.op_probs.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"op_probs must sum to 1.0, got {total}")
        if not (0.0 < self.small_vol < self.large_vol):
            raise ValueError("volume thresholds must satisfy 0 < small < large")
        if not (0.0 < self.early_p < self.late_p <= 1.0):
            raise ValueError("progress thresholds must satisfy 0 < early < late <= 1")
        if not (1 <= self.turns_min <= self.turns_max):
            raise ValueError("turn bounds must satisfy 1 <= min <= max")


@dataclass(frozen=True)
class ChainTurn:
    scene_before: Scene
    forward_calls: tuple[ToolCall, ...]
    scene_after: Scene
    cot_stub: str


@dataclass(frozen=True)
class EditChain:
    """Forward trajectory from an empty room to ``final_scene``."""

    instruction: str
    turns: tuple[ChainTurn, ...]
    final_scene: Scene

    def __post_init__(self):
        if self.turns and self.turns[0].scene_before.objects:
            raise ValueError("a chain must start from an empty room")


# --------------------------------------------------------------------------
# Reverse-edit sampling


def _weighted_op(cfg: ChainConfig, rng: random.Random) -> str:
    roll = rng.random()
    cumulative = 0.0
    for name in OP_NAMES:
        cumulative += cfg.op_probs[name]
        if roll < cumulative:
            return name
    return OP_NAMES[-1]


def _random_point_in_room(room: RoomGeometry, rng: random.Random) -> tuple[float, float]:
    xs = [x for x, _ in room.footprint()]
    zs = [z for _, z in room.footprint()]
    for _ in range(_POINT_RETRIES):
        x = rng.uniform(min(xs), max(xs))
        z = rng.uniform(min(zs), max(zs))
        if room.contains_xz(x, z):
            return x, z
    from .geometry import room_polygon

    centroid = room_polygon(room).centroid
    return centroid.x, centroid.y


def _volume_bucket(cfg: ChainConfig, progress: float, pool: list[SceneObject]):
    if progress < cfg.early_p:
        chosen = [o for o in pool if o.volume() < cfg.small_vol]
    elif progress < cfg.late_p:
        chosen = [o for o in pool if cfg.small_vol <= o.volume() < cfg.large_vol]
    else:
        chosen = [o for o in pool if o.volume() >= cfg.large_vol]
    return chosen if chosen else pool


@dataclass
class _ReverseTurn:
    """One dismantling step: the forward calls that rebuild what it undid."""

    forward_calls: list[ToolCall]
    op_names: list[str]


@dataclass
class SynthesisTelemetry:
    """Audit trail of the sampler, for statistical tests.

    ``op_draws`` records every weighted operation draw (including ones whose
    slot was later skipped). ``add_events`` records, for each reverse
    removal, the progress fraction, the chosen object's volume, and whether
    the small-volume bucket was non-empty at that moment.
    """

    op_draws: list[str] = field(default_factory=list)
    add_events: list[tuple[float, float, bool]] = field(default_factory=list)

    def merge(self, other: "SynthesisTelemetry") -> None:
        self.op_draws.extend(other.op_draws)
        self.add_events.extend(other.add_events)


def _categories_for_distractors(catalog: AssetCatalog) -> list[str]:
    return [c for c in catalog.categories() if c != FALLBACK_CATEGORY]


def _reverse_add(obj: SceneObject, call_id: str) -> AddObject:
    """Forward add restoring an object exactly (uid pinned for replay)."""
    return AddObject(
        id=call_id,
        object_description=obj.description,
        position=obj.position,
        rotation=obj.rotation,
        size=obj.size,
        uid=obj.uid,
    )


def _try_reverse_scale(
    scene: Scene, obj: SceneObject, catalog: AssetCatalog, rng: random.Random
) -> tuple[Scene, ScaleObject] | None:
    """Perturb an object's size (forward call restores the original).

    The perturbed size goes through snapping so it stays a fixed point of its
    description (a later reverse removal turns it into a forward add, whose
    applied size must reproduce it exactly), and must stay within the
    category's validity envelope.
    """
    category = match_category(catalog, obj.description)
    for _ in range(_SLOT_RETRIES):
        target = Vec3(
            obj.size.x * rng.uniform(0.5, 1.5),
            obj.size.y * rng.uniform(0.5, 1.5),
            obj.size.z * rng.uniform(0.5, 1.5),
        )
        perturbed = snap_size(catalog, obj.description, target)
        if perturbed == obj.size or not size_valid(catalog, category, perturbed):
            continue
        call = ScaleObject(id="", uid=obj.uid, new_size=obj.size)
        return scene.replace(obj.uid, obj.with_size(perturbed)), call
    return None


def _try_reverse_replace(
    scene: Scene, obj: SceneObject, catalog: AssetCatalog, rng: random.Random
) -> tuple[Scene, ReplaceObject] | None:
    """Swap an object for a distractor of another category.

    The forward replace re-derives the original size by snapping the original
    description against the distractor's size, so acceptance requires that
    round trip to be exact.
    """
    categories = _categories_for_distractors(catalog)
    own = match_category(catalog, obj.description)
    for _ in range(_SLOT_RETRIES):
        distractor_cat = categories[rng.randrange(len(categories))]
        if distractor_cat == own:
            continue
        distractor_size = snap_size(catalog, distractor_cat, obj.size)
        if snap_size(catalog, obj.description, distractor_size) != obj.size:
            continue
        swapped = SceneObject(
            uid=obj.uid,
            description=distractor_cat,
            position=obj.position,
            rotation=obj.rotation,
            size=distractor_size,
        )
        call = ReplaceObject(id="", uid_to_replace=obj.uid, new_object_description=obj.description)
        return scene.replace(obj.uid, swapped), call
    return None


def _reverse_insert_distractor(
    scene: Scene,
    catalog: AssetCatalog,
    rng: random.Random,
    uid_registry: set[str],
) -> tuple[Scene, RemoveObject]:
    """Insert a floor-standing distractor (forward call removes it)."""
    categories = _categories_for_distractors(catalog)
    category = categories[rng.randrange(len(categories))]
    entries = catalog.category_index[category]
    entry = entries[rng.randrange(len(entries))]
    size = entry.canonical_size
    x, z = _random_point_in_room(scene.room, rng)
    yaw = rng.uniform(-math.pi, math.pi)
    uid = fresh_uid(category, uid_registry)
    uid_registry.add(uid)
    distractor = SceneObject(
        uid=uid,
        description=category,
        position=Vec3(x, size.y / 2.0, z),
        rotation=yaw_to_quaternion(yaw),
        size=size,
    )
    return scene.add(distractor), RemoveObject(id="", uid=uid)


def dismantle(
    final: Scene,
    cfg: ChainConfig,
    rng: random.Random,
    catalog: AssetCatalog | None = None,
    telemetry: SynthesisTelemetry | None = None,
) -> list[_ReverseTurn]:
    """Dismantle a scene into reverse turns, recording forward inverses.

    The returned list is in reverse order (first entry undoes the last
    forward turn). Each non-final turn applies 1..|objects| stochastic
    reverse edits (no object twice per turn); the final reverse turn clears
    every remaining object. Raises ``EmptyScene`` for an object-less input.
    """
    if not final.objects:
        raise EmptyScene("cannot dismantle a scene with no objects")
    catalog = catalog if catalog is not None else load_catalog()

    turns_total = rng.randint(cfg.turns_min, cfg.turns_max)
    scene = final
    uid_registry = set(scene.uid_set())
    reverse_turns: list[_ReverseTurn] = []

    for t in range(turns_total):
        snapshot = list(scene.objects)
        if not snapshot:
            break
        progress = t / (turns_total - 1) if turns_total > 1 else 1.0
        turn = _ReverseTurn(forward_calls=[], op_names=[])

        if t == turns_total - 1:
            for obj in snapshot:
                turn.forward_calls.append(_reverse_add(obj, ""))
                turn.op_names.append("add")
                scene = scene.remove(obj.uid)
        else:
            edits = rng.randint(1, len(snapshot))
            used: set[str] = set()
            for _ in range(edits):
                op = _weighted_op(cfg, rng)
                if telemetry is not None:
                    telemetry.op_draws.append(op)
                pool = [o for o in snapshot if o.uid not in used]
                if op == "add":
                    candidates = _volume_bucket(cfg, progress, pool)
                    obj = candidates[rng.randrange(len(candidates))]
                    if telemetry is not None:
                        small_present = any(o.volume() < cfg.small_vol for o in pool)
                        telemetry.add_events.append((progress, obj.volume(), small_present))
                    turn.forward_calls.append(_reverse_add(obj, ""))
                    scene = scene.remove(obj.uid)
                    used.add(obj.uid)
                elif op == "remove":
                    scene, call = _reverse_insert_distractor(scene, catalog, rng, uid_registry)
                    turn.forward_calls.append(call)
                else:
                    obj = pool[rng.randrange(len(pool))]
                    current = scene.find(obj.uid)
                    if op == "move":
                        x, z = _random_point_in_room(scene.room, rng)
                        call = MoveObject(id="", uid=obj.uid, new_position=current.position)
                        scene = scene.replace(
                            obj.uid,
                            current.with_position(Vec3(x, current.position.y, z)),
                        )
                    elif op == "rotate":
                        yaw = rng.uniform(-math.pi, math.pi)
                        call = RotateObject(id="", uid=obj.uid, new_rotation=current.rotation)
                        scene = scene.replace(
                            obj.uid, current.with_rotation(yaw_to_quaternion(yaw))
                        )
                    elif op == "scale":
                        outcome = _try_reverse_scale(scene, current, catalog, rng)
                        if outcome is None:
                            continue
                        scene, call = outcome
                    else:  # replace
                        outcome = _try_reverse_replace(scene, current, catalog, rng)
                        if outcome is None:
                            continue
                        scene, call = outcome
                    turn.forward_calls.append(call)
                    used.add(obj.uid)
                turn.op_names.append(op)
        reverse_turns.append(turn)
        if not scene.objects:
            break
    return reverse_turns


_BUG_CLASS = {
    "add": "Spatial Distribution",
    "remove": "Spatial Distribution",
    "move": "Layout Rationality",
    "rotate": "Layout Rationality",
    "scale": "Physical Conflict",
    "replace": "Physical Conflict",
}


def _cot_stub(op_names: list[str]) -> str:
    if not op_names:
        return "Spatial Diagnosis: no outstanding issues this turn; holding the layout."
    dominant = max(set(op_names), key=lambda n: (op_names.count(n), -OP_NAMES.index(n)))
    counts = ", ".join(f"{op_names.count(n)} {n}" for n in OP_NAMES if n in op_names)
    return (
        f"Spatial Diagnosis: working on {_BUG_CLASS[dominant]}. "
        f"Planned edits this turn: {counts}."
    )


def invert(
    reverse_turns: list[_ReverseTurn],
    final: Scene,
    instruction: str,
    catalog: AssetCatalog | None = None,
) -> EditChain:
    """Invert a dismantling record into a forward chain.

    Turn order is reversed and every turn's scenes are produced by actually
    applying the forward calls, so the stored trajectory is exactly what
    replay computes. Verifies that the rebuilt scene matches the source
    (same room, same objects by uid — tuple order is an artifact of add
    order and not compared).
    """
    catalog = catalog if catalog is not None else load_catalog()
    scene = Scene(room=final.room, objects=())
    turns: list[ChainTurn] = []
    for turn in reversed(reverse_turns):
        calls = tuple(
            dc_replace(call, id=f"call_{i + 1}") for i, call in enumerate(turn.forward_calls)
        )
        after, penalties, _ = apply_tool_calls(scene, calls, catalog)
        if penalties:
            details = "; ".join(p.detail for p in penalties)
            raise ChainVerificationError(f"forward replay produced penalties: {details}")
        turns.append(
            ChainTurn(
                scene_before=scene,
                forward_calls=calls,
                scene_after=after,
                cot_stub=_cot_stub(turn.op_names),
            )
        )
        scene = after
    if not scenes_equivalent(scene, final):
        raise ChainVerificationError("rebuilt scene does not match the dismantled source")
    return EditChain(instruction=instruction, turns=tuple(turns), final_scene=scene)


def scenes_equivalent(a: Scene, b: Scene) -> bool:
    """Field-exact scene equality up to object order (objects keyed by uid)."""
    if a.room != b.room:
        return False
    return sorted(a.objects, key=lambda o: o.uid) == sorted(b.objects, key=lambda o: o.uid)


def default_instruction(room_type: str) -> str:
    return f"Design a complete, realistic {room_type} with sensible furniture placement."


def synthesize_chain(
    final: Scene,
    cfg: ChainConfig,
    rng: random.Random,
    catalog: AssetCatalog | None = None,
    instruction: str | None = None,
    telemetry: SynthesisTelemetry | None = None,
) -> EditChain:
    """Dismantle + invert, retrying the rare degenerate draw.

    A dismantling pass that empties the scene before reaching the minimum
    turn count is discarded and redrawn (the generator keeps advancing, so
    the retry is deterministic under the seed). Telemetry is merged only
    from the accepted attempt.
    """
    catalog = catalog if catalog is not None else load_catalog()
    if instruction is None:
        instruction = default_instruction(final.room.room_type)
    for _ in range(_CHAIN_RETRIES):
        attempt_log = SynthesisTelemetry() if telemetry is not None else None
        reverse_turns = dismantle(final, cfg, rng, catalog, telemetry=attempt_log)
        if cfg.turns_min <= len(reverse_turns) <= cfg.turns_max:
            if telemetry is not None:
                telemetry.merge(attempt_log)
            return invert(reverse_turns, final, instruction, catalog)
    raise ChainVerificationError(
        f"no dismantling of {final.room.room_id!r} reached {cfg.turns_min} turns "
        f"in {_CHAIN_RETRIES} attempts"
    )


# --------------------------------------------------------------------------
# Replay and serialization


def replay(chain: EditChain, catalog: AssetCatalog | None = None) -> Scene:
    """Apply all forward calls from the chain's initial scene.

    Unlike agent-facing parsing, replay treats penalties as hard errors —
    datasets must be penalty-free.
    """
    catalog = catalog if catalog is not None else load_catalog()
    if not chain.turns:
        return chain.final_scene
    scene = chain.turns[0].scene_before
    for index, turn in enumerate(chain.turns):
        scene, penalties, _ = apply_tool_calls(scene, turn.forward_calls, catalog)
        if penalties:
            details = "; ".join(p.detail for p in penalties)
            raise ChainVerificationError(f"turn {index}: {details}")
    return scene


def verify_chain(chain: EditChain, catalog: AssetCatalog | None = None) -> None:
    """Re-apply every turn and compare against the stored trajectory.

    Raises ``ChainVerificationError`` on any divergence.
    """
    catalog = catalog if catalog is not None else load_catalog()
    scene = chain.turns[0].scene_before if chain.turns else chain.final_scene
    for index, turn in enumerate(chain.turns):
        if scene != turn.scene_before:
            raise ChainVerificationError(f"turn {index}: stored scene_before diverges")
        scene, penalties, _ = apply_tool_calls(scene, turn.forward_calls, catalog)
        if penalties:
            details = "; ".join(p.detail for p in penalties)
            raise ChainVerificationError(f"turn {index}: {details}")
        if scene != turn.scene_after:
            raise ChainVerificationError(f"turn {index}: replayed scene_after diverges")
    if scene != chain.final_scene:
        raise ChainVerificationError("replayed terminal scene diverges from final_scene")


def chain_to_wire(chain: EditChain) -> dict:
    return {
        "instruction": chain.instruction,
        "turns": [
            {
                "scene_before": turn.scene_before.to_wire(),
                "forward_calls": [tool_call_to_wire(c) for c in turn.forward_calls],
                "scene_after": turn.scene_after.to_wire(),
                "cot_stub": turn.cot_stub,
            }
            for turn in chain.turns
        ],
        "final_scene": chain.final_scene.to_wire(),
    }


def chain_to_json(chain: EditChain) -> str:
    return canonical_json(chain_to_wire(chain))


def chain_from_wire(data: dict) -> EditChain:
    turns = tuple(
        ChainTurn(
            scene_before=scene_from_wire(t["scene_before"]),
            forward_calls=tuple(tool_call_from_wire(c) for c in t["forward_calls"]),
            scene_after=scene_from_wire(t["scene_after"]),
            cot_stub=t["cot_stub"],
        )
        for t in data["turns"]
    )
    return EditChain(
        instruction=data["instruction"],
        turns=turns,
        final_scene=scene_from_wire(data["final_scene"]),
    )


def chain_from_json(text: str) -> EditChain:
    return chain_from_wire(json.loads(text))


# --------------------------------------------------------------------------
# Scoring


@dataclass(frozen=True)
class ChainScore:
    """Multi-dimensional chain quality on a 100-point scale."""

    coherence: int  # 0-40
    naturalness: int  # 0-35
    instruction_following: int  # 0-15
    visual_transition: int  # 0-10
    overall: int  # == sum of the four
    reasoning: str = ""
    strengths: str = ""
    weaknesses: str = ""

    def __post_init__(self):
        bounds = (
            (self.coherence, 40),
            (self.naturalness, 35),
            (self.instruction_following, 15),
            (self.visual_transition, 10),
        )
        for value, upper in bounds:
            if not 0 <= value <= upper:
                raise ValueError(f"chain score component {value} outside [0, {upper}]")
        total = sum(v for v, _ in bounds)
        if self.overall != total:
            raise ValueError(f"overall {self.overall} != component sum {total}")


SCORE_WIRE_KEYS = (
    ("coherence_score", "coherence"),
    ("naturalness_score", "naturalness"),
    ("instruction_following_score", "instruction_following"),
    ("visual_transition_score", "visual_transition"),
    ("overall_score", "overall"),
)


def score_to_wire(score: ChainScore) -> dict:
    data = {wire: getattr(score, attr) for wire, attr in SCORE_WIRE_KEYS}
    data["reasoning"] = score.reasoning
    data["strengths"] = score.strengths
    data["weaknesses"] = score.weaknesses
    return data


def score_from_wire(data: dict) -> ChainScore:
    kwargs = {}
    for wire, attr in SCORE_WIRE_KEYS:
        value = data.get(wire)
        if not isinstance(value, int) or isinstance(value, bool):
            raise ValueError(f"chain score field {wire!r} must be an integer, got {value!r}")
        kwargs[attr] = value
    return ChainScore(
        reasoning=str(data.get("reasoning", "")),
        strengths=str(data.get("strengths", "")),
        weaknesses=str(data.get("weaknesses", "")),
        **kwargs,
    )


def score_chain(chain: EditChain, judge) -> ChainScore:
    """Delegate chain scoring to a judge (mock or remote)."""
    return judge.score_chain(chain)


# --------------------------------------------------------------------------
# Dataset synthesis


def candidate_seed(base_seed: int, scene_id: str, k: int) -> int:
    """Stable per-candidate seed (first 8 bytes of a SHA-256)."""
    digest = hashlib.sha256(f"{base_seed}:{scene_id}:{k}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class DatasetEntry:
    scene_id: str
    chain_path: str
    overall_score: int


def _retained_for_scene(
    scene: Scene,
    cfg: ChainConfig,
    judge,
    catalog: AssetCatalog,
    n_candidates: int,
    keep: int,
) -> list[tuple[int, EditChain, "ChainScore"]]:
    """Draw, score, rank, and re-verify one scene's kept candidates."""
    scene_id = scene.room.room_id
    candidates: list[tuple[int, EditChain, ChainScore]] = []
    for k in range(n_candidates):
        rng = random.Random(candidate_seed(cfg.seed, scene_id, k))
        chain = synthesize_chain(scene, cfg, rng, catalog)
        candidates.append((k, chain, score_chain(chain, judge)))
    candidates.sort(key=lambda item: (-item[2].overall, item[0]))

    retained = []
    for k, chain, score in candidates:
        if len(retained) == keep:
            break
        verify_chain(chain, catalog)
        if not scenes_equivalent(replay(chain, catalog), scene):
            raise ChainVerificationError(f"candidate {k} of {scene_id} fails replay")
        if not check_physics(chain.final_scene, DEFAULT_PHYSICS).is_clean():
            raise ChainVerificationError(
                f"candidate {k} of {scene_id} ends with physics violations"
            )
        retained.append((k, chain, score))
    return retained


def synthesize_dataset(
    scenes: list[Scene],
    cfg: ChainConfig,
    judge,
    out_dir: str | Path,
    *,
    n_candidates: int = 10,
    keep: int = 3,
    catalog: AssetCatalog | None = None,
    map_fn=map,
) -> list[DatasetEntry]:
    """Generate, score, verify, and persist top-k chains per scene.

    Per scene: ``n_candidates`` chains are drawn with per-candidate derived
    seeds, scored by the judge, and the ``keep`` best by overall score (ties
    to the earlier candidate) are retained — each re-verified to replay
    field-exactly and to end violation-free. ``map_fn`` may be an
    order-preserving parallel map (scenes are independent); files are always
    written in input order so output is identical regardless of it. Layout::

        out_dir/<scene_id>/chain_<rank>.json
        out_dir/<scene_id>/scores.json
        out_dir/index.jsonl
    """
    if not scenes:
        raise EmptyScene("dataset synthesis needs at least one scene")
    catalog = catalog if catalog is not None else load_catalog()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries: list[DatasetEntry] = []

    per_scene = list(
        map_fn(
            lambda scene: _retained_for_scene(
                scene, cfg, judge, catalog, n_candidates, keep
            ),
            scenes,
        )
    )
    for scene, retained in zip(scenes, per_scene):
        scene_id = scene.room.room_id
        scene_dir = out_dir / scene_id
        scene_dir.mkdir(parents=True, exist_ok=True)
        scores_payload = {}
        for rank, (k, chain, score) in enumerate(retained, start=1):
            name = f"chain_{rank}.json"
            (scene_dir / name).write_text(chain_to_json(chain))
            payload = score_to_wire(score)
            payload["candidate_index"] = k
            scores_payload[name] = payload
            entries.append(
                DatasetEntry(
                    scene_id=scene_id,
                    chain_path=str(Path(scene_id) / name),
                    overall_score=score.overall,
                )
            )
        (scene_dir / "scores.json").write_text(canonical_json(scores_payload))

    index_lines = [
        canonical_json(
            {
                "scene_id": e.scene_id,
                "chain_path": e.chain_path,
                "overall_score": e.overall_score,
            }
        )
        for e in entries
    ]
    (out_dir / "index.jsonl").write_text("\n".join(index_lines) + "\n")
    return entries
