"""Scene-quality judges: a deterministic rule-based mock and HTTP clients.

The episode loop talks to a judge through four calls — ``mandatory``,
``improvement``, ``relevance``, ``consolidate`` — plus ``score_chain`` for
dataset synthesis. ``MockJudge`` answers all five from scene state alone so
the whole test suite runs offline and reproducibly; ``RemoteJudge`` forwards
each call to a model server and validates the response against the exact
value sets the reward code accepts. Transport or conformance failures raise
``JudgeUnavailable`` — infrastructure trouble must abort an episode rather
than be laundered into a reward.
"""

from __future__ import annotations

import logging
import statistics
from dataclasses import dataclass

from .assets import (
    AssetCatalog,
    essential_missing,
    key_object_counts,
    load_catalog,
    mandatory_objects,
    match_category,
)
from .chains import ChainScore, EditChain, chain_to_wire, score_from_wire
from .metrics import DEFAULT_PHYSICS, PhysicsConfig, check_physics
from .rewards import CONSOLIDATED_VALUES, MIN_OBJECT_COUNT, size_validity_counts
from .scene import Scene, serialize_scene
from .tools import AddObject

logger = logging.getLogger(__name__)

#: Additions smaller than this (cubic meters) count as room-neutral decor.
_DECOR_VOLUME = 0.5


class JudgeUnavailable(RuntimeError):
    """The judge cannot be reached or returned a non-conforming result."""


@dataclass(frozen=True)
class JudgeContext:
    """What a judge call may condition on besides the scenes themselves."""

    instruction: str
    room_type: str


class MockJudge:
    """Deterministic rule evaluation standing in for a vision-language judge.

    Every answer is a pure function of (scenes, instruction, room type), so
    episodes and dataset synthesis are exactly reproducible.
    """

    def __init__(
        self,
        catalog: AssetCatalog | None = None,
        physics: PhysicsConfig = DEFAULT_PHYSICS,
    ):
        self.catalog = catalog if catalog is not None else load_catalog()
        self.physics = physics

    # -- shared rule helpers

    def _violations(self, scene: Scene) -> int:
        return check_physics(scene, self.physics).violation_count()

    def _coverage(self, scene: Scene, context: JudgeContext) -> tuple[int, int]:
        required = self.mandatory(context.room_type, context.instruction)
        return key_object_counts(self.catalog, scene, required)

    # -- the judge interface

    def mandatory(self, room_type: str, instruction: str) -> list[str]:
        return mandatory_objects(self.catalog, room_type, instruction)

    def improvement(self, prev: Scene, cur: Scene, context: JudgeContext) -> int:
        """Three-level comparison: 1 improved, 0 neutral change, -1 worse/no-op."""
        if cur == prev:
            return -1
        prev_violations, cur_violations = self._violations(prev), self._violations(cur)
        prev_found, _ = self._coverage(prev, context)
        cur_found, _ = self._coverage(cur, context)
        if cur_violations < prev_violations:
            return 1
        if cur_found > prev_found and cur_violations <= prev_violations:
            return 1
        if cur_violations > prev_violations:
            return -1
        if cur_found < prev_found:
            return -1
        return 0

    def relevance(
        self, room_type: str, instruction: str, new_objects: list[str]
    ) -> tuple[list[str], list[str]]:
        """Split added descriptions into (relevant, irrelevant).

        An addition is relevant when its category belongs to the room's
        required set, or when it is small decor (room-neutral); descriptions
        matching no catalog category count as hallucinations.
        """
        allowed = set(self.mandatory(room_type, instruction))
        relevant, irrelevant = [], []
        for description in new_objects:
            category = match_category(self.catalog, description)
            if category is None:
                irrelevant.append(description)
                continue
            entry = self.catalog.category_index[category][0]
            if category in allowed or entry.canonical_size.volume() < _DECOR_VOLUME:
                relevant.append(description)
            else:
                irrelevant.append(description)
        return relevant, irrelevant

    def consolidate(
        self, scene: Scene, context: JudgeContext
    ) -> tuple[float, float, float]:
        """Grid-valued (rationality, requirement_match, scene_graph) scores."""
        report = check_physics(scene, self.physics)
        valid, total_objects = size_validity_counts(scene, self.catalog)

        rationality = 1.0
        if report.violation_count() > 0:
            rationality -= 0.5
        if valid < total_objects:
            rationality -= 0.5
        if len(scene.objects) < MIN_OBJECT_COUNT:
            rationality -= 0.5
        if report.unsupported:
            rationality -= 0.5
        rationality = max(rationality, -1.0)

        found, total = self._coverage(scene, context)
        ratio = found / total if total else 1.0
        if essential_missing(self.catalog, scene, context.room_type, context.instruction):
            requirement_match = -1.0
        elif ratio >= 0.99:
            requirement_match = 1.0
        elif ratio >= 0.75:
            requirement_match = 0.5
        elif ratio > 0.5:
            requirement_match = 0.0
        elif ratio > 0.25:
            requirement_match = -0.5
        else:
            requirement_match = -1.0

        unsupported = len(report.unsupported)
        if unsupported == 0:
            scene_graph = 1.0
        elif unsupported == 1:
            scene_graph = 0.5
        elif unsupported == 2:
            scene_graph = 0.0
        elif unsupported == 3:
            scene_graph = -0.5
        else:
            scene_graph = -1.0

        scores = (rationality, requirement_match, scene_graph)
        assert all(s in CONSOLIDATED_VALUES for s in scores)
        return scores

    def score_chain(self, chain: EditChain) -> ChainScore:
        """Rule-based multi-dimensional chain quality.

        Coherence and visual transition both reward turns whose violation
        count does not grow (process- and appearance-level smoothness share
        that signal); naturalness rewards coarse-to-fine add ordering,
        op-type diversity, and turn-length variety; instruction following
        rewards coverage gained over the (empty) starting room.
        """
        turns = chain.turns
        if turns:
            deltas_ok = sum(
                self._violations(t.scene_after) <= self._violations(t.scene_before)
                for t in turns
            ) / len(turns)
        else:
            deltas_ok = 1.0

        add_means = []
        for turn in turns:
            volumes = [
                c.size.volume() for c in turn.forward_calls if isinstance(c, AddObject)
            ]
            if volumes:
                add_means.append(sum(volumes) / len(volumes))
        if len(add_means) > 1:
            pairs = len(add_means) - 1
            ordered = sum(
                add_means[i + 1] <= add_means[i] + 1e-9 for i in range(pairs)
            ) / pairs
        else:
            ordered = 1.0
        op_types = {c.name for t in turns for c in t.forward_calls}
        diversity = min(1.0, len(op_types) / 3.0)
        lengths = [len(t.forward_calls) for t in turns]
        variety = min(1.0, statistics.pstdev(lengths)) if len(lengths) > 1 else 0.0

        context = JudgeContext(
            instruction=chain.instruction,
            room_type=chain.final_scene.room.room_type,
        )
        found, total = self._coverage(chain.final_scene, context)
        coverage = found / total if total else 1.0

        coherence = round(40 * deltas_ok)
        naturalness = round(15 * ordered + 10 * diversity + 10 * variety)
        instruction_following = round(15 * coverage)
        visual_transition = round(10 * deltas_ok)
        return ChainScore(
            coherence=coherence,
            naturalness=naturalness,
            instruction_following=instruction_following,
            visual_transition=visual_transition,
            overall=coherence + naturalness + instruction_following + visual_transition,
            reasoning=(
                f"rule evaluation: {deltas_ok:.2f} of turns non-regressive, "
                f"add ordering {ordered:.2f}, coverage {coverage:.2f}"
            ),
            strengths="deterministic rule check",
            weaknesses="no aesthetic judgment",
        )


def _validate_improvement(value) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value not in (-1, 0, 1):
        raise ValueError(f"improvement must be -1, 0, or 1, got {value!r}")
    return value


def _validate_consolidated(data: dict) -> tuple[float, float, float]:
    scores = []
    for key in ("rationality", "requirement_match", "scene_graph"):
        value = data.get(key)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(f"consolidated field {key!r} must be a number, got {value!r}")
        value = float(value)
        if value not in CONSOLIDATED_VALUES:
            raise ValueError(
                f"consolidated field {key!r} must be one of {CONSOLIDATED_VALUES}, got {value}"
            )
        scores.append(value)
    return tuple(scores)


def _validate_strings(value, what: str) -> list[str]:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise ValueError(f"{what} must be a list of strings, got {value!r}")
    return value


class RemoteJudge:
    """HTTP client for a judge server exposing the five scoring endpoints.

    POSTs JSON to ``/improve``, ``/mandatory``, ``/relevance``,
    ``/consolidate``, and ``/score_chain``; retries each call once, then
    raises ``JudgeUnavailable``. Non-conforming payloads are logged verbatim
    and raised as ``JudgeUnavailable`` too.
    """

    def __init__(self, base_url: str, timeout: float = 30.0):
        import requests

        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._session = requests.Session()
        self._requests = requests

    def _post(self, endpoint: str, payload: dict) -> dict:
        url = f"{self.base_url}/{endpoint}"
        last_error = None
        for _ in range(2):
            try:
                response = self._session.post(url, json=payload, timeout=self.timeout)
                response.raise_for_status()
                data = response.json()
                if not isinstance(data, dict):
                    raise ValueError(f"expected a JSON object, got {type(data).__name__}")
                return data
            except (self._requests.RequestException, ValueError) as error:
                last_error = error
        raise JudgeUnavailable(f"judge call {url} failed: {last_error}")

    def _conform(self, endpoint: str, data: dict, validate):
        try:
            return validate(data)
        except ValueError as error:
            logger.error("non-conforming judge response from /%s: %r", endpoint, data)
            raise JudgeUnavailable(f"judge /{endpoint} returned bad data: {error}") from error

    def mandatory(self, room_type: str, instruction: str) -> list[str]:
        data = self._post("mandatory", {"room_type": room_type, "instruction": instruction})
        return self._conform(
            "mandatory", data, lambda d: _validate_strings(d.get("mandatory_objects"), "mandatory_objects")
        )

    def improvement(self, prev: Scene, cur: Scene, context: JudgeContext) -> int:
        data = self._post(
            "improve",
            {
                "instruction": context.instruction,
                "room_type": context.room_type,
                "prev_scene_json": serialize_scene(prev),
                "cur_scene_json": serialize_scene(cur),
            },
        )
        return self._conform(
            "improve", data, lambda d: _validate_improvement(d.get("improvement"))
        )

    def relevance(
        self, room_type: str, instruction: str, new_objects: list[str]
    ) -> tuple[list[str], list[str]]:
        data = self._post(
            "relevance",
            {
                "room_type": room_type,
                "instruction": instruction,
                "new_objects": list(new_objects),
            },
        )

        def validate(d):
            return (
                _validate_strings(d.get("relevant_objects"), "relevant_objects"),
                _validate_strings(d.get("irrelevant_objects"), "irrelevant_objects"),
            )

        return self._conform("relevance", data, validate)

    def consolidate(self, scene: Scene, context: JudgeContext) -> tuple[float, float, float]:
        data = self._post(
            "consolidate",
            {
                "instruction": context.instruction,
                "room_type": context.room_type,
                "scene_json": serialize_scene(scene),
            },
        )
        return self._conform("consolidate", data, _validate_consolidated)

    def score_chain(self, chain: EditChain) -> ChainScore:
        data = self._post("score_chain", {"chain": chain_to_wire(chain)})
        return self._conform("score_chain", data, score_from_wire)
