"""Agent policies. Every policy emits raw protocol text, never structured
calls — the episode loop parses each response with the same parser an LLM's
output would go through, so format scoring exercises one code path for all
agents (scripted, heuristic, replayed, or remote).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .assets import (
    AssetCatalog,
    UnknownRoomType,
    load_catalog,
    mandatory_objects,
    missing_key_objects,
    resolve_room_type,
)
from .chains import EditChain
from .fixtures import ROOM_FOOTPRINTS
from .scene import RoomGeometry, Scene, Vec3, parse_scene_json, yaw_to_quaternion
from .tools import (
    AddObject,
    Phase,
    Terminate,
    render_calls_text,
    render_create_scene_text,
)

_IDENTITY_ROTATION = yaw_to_quaternion(0.0)


class PolicyUnavailable(RuntimeError):
    """The policy cannot be reached or produced no response."""


def _terminate_text(reason: str) -> str:
    think = f"Spatial Diagnosis: no outstanding issues remain. {reason}"
    return render_calls_text(think, (Terminate(id="call_1", reason=reason),))


class _Shelf:
    """Incremental row packer: left-to-right rows with clearance gaps.

    Mirrors the fixture generator's layout discipline so greedy placements
    are collision-free and in-bounds by construction.
    """

    MARGIN = 0.3
    GAP = 0.2

    def __init__(self, room: RoomGeometry):
        xs = [x for x, _ in room.footprint()]
        zs = [z for _, z in room.footprint()]
        self.x_min, self.x_max = min(xs) + self.MARGIN, max(xs) - self.MARGIN
        self.z_min, self.z_max = min(zs) + self.MARGIN, max(zs) - self.MARGIN
        self.cursor_x = self.x_min
        self.row_z = self.z_min
        self.row_depth = 0.0

    def place(self, size: Vec3) -> Vec3 | None:
        """Center position for the next object, or None when the room is full."""
        if self.cursor_x + size.x > self.x_max:
            self.cursor_x = self.x_min
            self.row_z += self.row_depth + self.GAP
            self.row_depth = 0.0
        if self.cursor_x + size.x > self.x_max or self.row_z + size.z > self.z_max:
            return None
        center = Vec3(
            self.cursor_x + size.x / 2.0, size.y / 2.0, self.row_z + size.z / 2.0
        )
        self.cursor_x += size.x + self.GAP
        self.row_depth = max(self.row_depth, size.z)
        return center


class GreedyBuilderPolicy:
    """Builds the room's mandatory furniture in packed rows, then terminates.

    At the init turn it creates a rectangular room sized for the requested
    room type; each edit turn adds up to ``adds_per_turn`` still-missing
    mandatory objects at canonical sizes along the shelf rows, and once
    nothing is missing it calls terminate. The resulting scenes are
    violation-free by construction.
    """

    def __init__(self, catalog: AssetCatalog | None = None, adds_per_turn: int = 3):
        if adds_per_turn < 1:
            raise ValueError("adds_per_turn must be at least 1")
        self.catalog = catalog if catalog is not None else load_catalog()
        self.adds_per_turn = adds_per_turn

    def _room_for(self, instruction: str) -> RoomGeometry:
        room_type = resolve_room_type(self.catalog, None, instruction)
        width, depth = ROOM_FOOTPRINTS[room_type]
        return RoomGeometry.rectangle(width, depth, room_type=room_type, room_id="room_0")

    def act(self, observation) -> str:
        if observation.phase is Phase.INIT:
            room = self._room_for(observation.instruction)
            return render_create_scene_text(Scene(room=room, objects=()))

        scene = parse_scene_json(observation.scene_json)
        room_type = scene.room.room_type
        required = mandatory_objects(self.catalog, room_type, observation.instruction)
        missing = missing_key_objects(self.catalog, scene, required)
        if not missing:
            return _terminate_text(f"The {room_type} now has every required item.")

        shelf = _Shelf(scene.room)
        for obj in scene.objects:
            shelf.place(obj.size)

        calls = []
        for category in missing[: self.adds_per_turn]:
            entry = self.catalog.category_index[category][0]
            center = shelf.place(entry.canonical_size)
            if center is None:
                break
            calls.append(
                AddObject(
                    id=f"call_{len(calls) + 1}",
                    object_description=category,
                    position=center,
                    rotation=_IDENTITY_ROTATION,
                    size=entry.canonical_size,
                )
            )
        if not calls:
            return _terminate_text("No floor space remains for further additions.")
        names = ", ".join(c.object_description for c in calls)
        think = (
            f"Spatial Diagnosis: the {room_type} is missing required furniture. "
            f"Adding {names} along open floor rows with clearance gaps."
        )
        return render_calls_text(think, tuple(calls))


class ReplayPolicy:
    """Replays a synthesized chain turn by turn, then terminates."""

    def __init__(self, chain: EditChain):
        self.chain = chain
        self._next = 0

    def act(self, observation) -> str:
        if observation.phase is Phase.INIT:
            initial = (
                self.chain.turns[0].scene_before
                if self.chain.turns
                else self.chain.final_scene
            )
            return render_create_scene_text(initial)
        if self._next < len(self.chain.turns):
            turn = self.chain.turns[self._next]
            self._next += 1
            return render_calls_text(turn.cot_stub, turn.forward_calls)
        return _terminate_text("The recorded editing chain is fully replayed.")


class ScriptedPolicy:
    """Serves pre-written raw responses in order (for protocol tests)."""

    def __init__(self, responses):
        self._responses = list(responses)
        self._next = 0

    def act(self, observation) -> str:
        if self._next < len(self._responses):
            text = self._responses[self._next]
            self._next += 1
            return text
        return _terminate_text("Script exhausted.")


class RandomPolicy:
    """Seeded baseline: random room, a few random additions, terminate."""

    def __init__(
        self,
        seed: int = 0,
        catalog: AssetCatalog | None = None,
        edit_turns: int | None = None,
    ):
        self.catalog = catalog if catalog is not None else load_catalog()
        self.rng = random.Random(seed)
        self.edit_turns = (
            edit_turns if edit_turns is not None else self.rng.randint(3, 6)
        )
        self._acted = 0

    def act(self, observation) -> str:
        if observation.phase is Phase.INIT:
            try:
                room_type = resolve_room_type(
                    self.catalog, None, observation.instruction
                )
            except UnknownRoomType:
                room_type = sorted(ROOM_FOOTPRINTS)[
                    self.rng.randrange(len(ROOM_FOOTPRINTS))
                ]
            width, depth = ROOM_FOOTPRINTS[room_type]
            room = RoomGeometry.rectangle(
                width, depth, room_type=room_type, room_id="room_0"
            )
            return render_create_scene_text(Scene(room=room, objects=()))

        if self._acted >= self.edit_turns:
            return _terminate_text("Random exploration budget spent.")
        self._acted += 1

        scene = parse_scene_json(observation.scene_json)
        xs = [x for x, _ in scene.room.footprint()]
        zs = [z for _, z in scene.room.footprint()]
        categories = [c for c in self.catalog.categories() if c != "generic"]
        category = categories[self.rng.randrange(len(categories))]
        entry = self.catalog.category_index[category][0]
        size = entry.canonical_size
        position = Vec3(
            self.rng.uniform(min(xs), max(xs)),
            size.y / 2.0,
            self.rng.uniform(min(zs), max(zs)),
        )
        call = AddObject(
            id="call_1",
            object_description=category,
            position=position,
            rotation=yaw_to_quaternion(self.rng.uniform(-math.pi, math.pi)),
            size=size,
        )
        think = f"Spatial Diagnosis: trying a {category} to fill the empty floor."
        return render_calls_text(think, (call,))


@dataclass(frozen=True)
class RemotePolicy:
    """HTTP client for a policy server: POST /act with the observation."""

    base_url: str
    timeout: float = 60.0

    def act(self, observation) -> str:
        import base64

        import requests

        payload = {
            "instruction": observation.instruction,
            "scene_json": observation.scene_json,
            "history": [
                {"text": entry.text, "reward": entry.reward}
                for entry in observation.history
            ],
            "turn": observation.turn,
            "phase": observation.phase.value,
        }
        if observation.render is not None:
            payload["render_b64"] = base64.b64encode(observation.render).decode("ascii")

        url = f"{self.base_url.rstrip('/')}/act"
        last_error = None
        for _ in range(2):
            try:
                response = requests.post(url, json=payload, timeout=self.timeout)
                response.raise_for_status()
                data = response.json()
                text = data.get("text") if isinstance(data, dict) else None
                if not isinstance(text, str):
                    raise ValueError(f"policy response must carry text, got {data!r}")
                return text
            except (requests.RequestException, ValueError) as error:
                last_error = error
        raise PolicyUnavailable(f"policy call {url} failed: {last_error}")
