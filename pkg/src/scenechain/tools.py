"""Agent text protocol: tool-call parsing, penalties, and scene transitions.

Agents communicate in raw text. Turn 0 carries a ``<create_scene>`` tag with
scene JSON; later turns carry ``<think>`` followed by ``<tool_calls>`` holding
a JSON list of ``{"id", "name", "arguments"}`` calls. Parsing is best-effort:
every defect in the text becomes a :class:`FormatPenalty` (never an
exception), because the format reward is defined over accumulated penalties.

Transitions are pure: ``apply_tool_call`` returns a new scene and never
mutates its input. Invalid uids at apply time also surface as penalties with
the scene left unchanged.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import Union

from .assets import AssetCatalog, snap_size
from .scene import (
    Scene,
    SceneError,
    SceneObject,
    Vec3,
    format_float,
    fresh_uid,
    parse_scene_json,
    sanitize_quaternion,
    serialize_scene,
)

THINK_OPEN, THINK_CLOSE = "<think>", "</think>"
CALLS_OPEN, CALLS_CLOSE = "<tool_calls>", "</tool_calls>"
CREATE_OPEN, CREATE_CLOSE = "<create_scene>", "</create_scene>"


class Phase(str, Enum):
    """Which part of an episode a message belongs to.

    The parser accepts INIT (scene creation) and EDIT (tool calls); TERMINAL
    tags end-of-episode observations that are recorded but never answered.
    """

    INIT = "init"
    EDIT = "edit"
    TERMINAL = "terminal"


class PenaltyKind(Enum):
    """Format defect categories; the value is the penalty weight."""

    MISSING_PARAMS = 0.1
    INVALID_ID = 0.2
    TAG_ORDER = 0.8
    JSON_PARSE = 0.9


@dataclass(frozen=True)
class FormatPenalty:
    kind: PenaltyKind
    detail: str

    @property
    def weight(self) -> float:
        return self.kind.value


def penalty_total(penalties) -> float:
    return sum(p.weight for p in penalties)


# --------------------------------------------------------------------------
# Tool-call variants


@dataclass(frozen=True)
class AddObject:
    """Insert a new object. ``uid`` is optional: synthesized trajectories pin
    it for exact replay; agent-issued adds leave it None and get a fresh one."""

    id: str
    object_description: str
    position: Vec3
    rotation: tuple[float, float, float, float]
    size: Vec3
    uid: str | None = None

    name = "add_object"


@dataclass(frozen=True)
class RemoveObject:
    id: str
    uid: str

    name = "remove_object"


@dataclass(frozen=True)
class MoveObject:
    id: str
    uid: str
    new_position: Vec3

    name = "move_object"


@dataclass(frozen=True)
class RotateObject:
    id: str
    uid: str
    new_rotation: tuple[float, float, float, float]

    name = "rotate_object"


@dataclass(frozen=True)
class ScaleObject:
    id: str
    uid: str
    new_size: Vec3

    name = "scale_object"


@dataclass(frozen=True)
class ReplaceObject:
    id: str
    uid_to_replace: str
    new_object_description: str

    name = "replace_object"


@dataclass(frozen=True)
class Terminate:
    id: str
    reason: str

    name = "terminate"


ToolCall = Union[
    AddObject, RemoveObject, MoveObject, RotateObject, ScaleObject, ReplaceObject, Terminate
]

TOOL_NAMES = (
    "add_object",
    "remove_object",
    "move_object",
    "rotate_object",
    "scale_object",
    "replace_object",
    "terminate",
)


@dataclass(frozen=True)
class ActionResponse:
    """Parsed agent output for one turn.

    Exactly one of ``create_scene`` / ``tool_calls`` is populated depending on
    the phase; ``raw_text`` preserves the original message for records.
    """

    think: str | None
    tool_calls: tuple[ToolCall, ...]
    create_scene: Scene | None
    raw_text: str


# --------------------------------------------------------------------------
# Parsing


def _extract_tag(text: str, open_tag: str, close_tag: str) -> tuple[str | None, int]:
    """Content of the first complete tag pair and the opening position (-1 if
    absent or unclosed)."""
    start = text.find(open_tag)
    if start < 0:
        return None, -1
    end = text.find(close_tag, start + len(open_tag))
    if end < 0:
        return None, -1
    return text[start + len(open_tag) : end], start


def _finite_floats(value, arity: int) -> list[float] | None:
    if not isinstance(value, (list, tuple)) or len(value) != arity:
        return None
    out = []
    for v in value:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            return None
        out.append(float(v))
    return out


def _argument_uid(args: dict, *keys: str) -> str | None:
    """First present uid-ish argument; every tool accepts jid as a uid alias."""
    for key in keys:
        value = args.get(key)
        if isinstance(value, str) and value:
            return value
    return None


def _parse_one_call(entry, index: int) -> tuple[ToolCall | None, str | None]:
    """(call, None) on success, (None, reason) on a dropped call."""
    if not isinstance(entry, dict):
        return None, f"call #{index} is not an object"
    name = entry.get("name")
    if name not in TOOL_NAMES:
        return None, f"call #{index} has unknown tool name {name!r}"
    call_id = entry.get("id")
    if not isinstance(call_id, str) or not call_id:
        call_id = f"call_{index}"
    args = entry.get("arguments")
    if isinstance(args, str):
        try:
            args = json.loads(args)
        except json.JSONDecodeError:
            return None, f"call #{index} ({name}) has unparsable string arguments"
    if not isinstance(args, dict):
        return None, f"call #{index} ({name}) has no arguments object"

    if name == "add_object":
        description = args.get("object_description")
        position = _finite_floats(args.get("position"), 3)
        rotation = _finite_floats(args.get("rotation"), 4)
        size = _finite_floats(args.get("size"), 3)
        if not isinstance(description, str) or not description:
            return None, f"call #{index} (add_object) missing object_description"
        if position is None or rotation is None or size is None:
            return None, f"call #{index} (add_object) has missing or malformed arrays"
        if min(size) <= 0.0:
            return None, f"call #{index} (add_object) has non-positive size"
        uid = args.get("uid")
        if uid is not None and (not isinstance(uid, str) or not uid):
            return None, f"call #{index} (add_object) has malformed uid"
        return (
            AddObject(
                id=call_id,
                object_description=description,
                position=Vec3(*position),
                rotation=tuple(rotation),
                size=Vec3(*size),
                uid=uid,
            ),
            None,
        )
    if name == "remove_object":
        uid = _argument_uid(args, "uid", "jid")
        if uid is None:
            return None, f"call #{index} (remove_object) missing uid"
        return RemoveObject(id=call_id, uid=uid), None
    if name == "move_object":
        uid = _argument_uid(args, "uid", "jid")
        position = _finite_floats(args.get("new_position"), 3)
        if uid is None or position is None:
            return None, f"call #{index} (move_object) missing uid or new_position"
        return MoveObject(id=call_id, uid=uid, new_position=Vec3(*position)), None
    if name == "rotate_object":
        uid = _argument_uid(args, "uid", "jid")
        rotation = _finite_floats(args.get("new_rotation"), 4)
        if uid is None or rotation is None:
            return None, f"call #{index} (rotate_object) missing uid or new_rotation"
        return RotateObject(id=call_id, uid=uid, new_rotation=tuple(rotation)), None
    if name == "scale_object":
        uid = _argument_uid(args, "uid", "jid")
        size = _finite_floats(args.get("new_size"), 3)
        if uid is None or size is None:
            return None, f"call #{index} (scale_object) missing uid or new_size"
        if min(size) <= 0.0:
            return None, f"call #{index} (scale_object) has non-positive new_size"
        return ScaleObject(id=call_id, uid=uid, new_size=Vec3(*size)), None
    if name == "replace_object":
        uid = _argument_uid(args, "uid_to_replace", "jid_to_replace", "uid", "jid")
        description = args.get("new_object_description")
        if uid is None or not isinstance(description, str) or not description:
            return None, f"call #{index} (replace_object) missing uid or description"
        return ReplaceObject(id=call_id, uid_to_replace=uid, new_object_description=description), None
    # terminate
    reason = args.get("reason")
    if not isinstance(reason, str):
        return None, f"call #{index} (terminate) missing reason"
    return Terminate(id=call_id, reason=reason), None


def parse_agent_response(text: str, phase: Phase) -> tuple[ActionResponse, list[FormatPenalty]]:
    """Best-effort parse of one agent message into an action.

    Never raises: every defect is encoded as a penalty. Recoverable problems
    (wrong tag order, individual bad calls) still yield a partial action;
    unrecoverable tool-call JSON yields an empty call list.
    """
    penalties: list[FormatPenalty] = []
    if phase is Phase.INIT:
        body, _ = _extract_tag(text, CREATE_OPEN, CREATE_CLOSE)
        scene = None
        if body is None:
            penalties.append(
                FormatPenalty(PenaltyKind.JSON_PARSE, "missing <create_scene> tag")
            )
        else:
            try:
                scene = parse_scene_json(body)
            except SceneError as exc:
                penalties.append(FormatPenalty(PenaltyKind.JSON_PARSE, str(exc)))
        return ActionResponse(think=None, tool_calls=(), create_scene=scene, raw_text=text), penalties

    think, think_pos = _extract_tag(text, THINK_OPEN, THINK_CLOSE)
    calls_body, calls_pos = _extract_tag(text, CALLS_OPEN, CALLS_CLOSE)
    if think is None:
        penalties.append(FormatPenalty(PenaltyKind.TAG_ORDER, "missing <think> tag"))
    elif calls_pos >= 0 and calls_pos < think_pos:
        penalties.append(
            FormatPenalty(PenaltyKind.TAG_ORDER, "<tool_calls> precedes <think>")
        )

    calls: list[ToolCall] = []
    if calls_body is None:
        penalties.append(FormatPenalty(PenaltyKind.JSON_PARSE, "missing <tool_calls> tag"))
    else:
        try:
            entries = json.loads(calls_body)
        except json.JSONDecodeError as exc:
            entries = None
            penalties.append(
                FormatPenalty(PenaltyKind.JSON_PARSE, f"tool_calls JSON: {exc}")
            )
        if entries is not None:
            if not isinstance(entries, list):
                penalties.append(
                    FormatPenalty(PenaltyKind.JSON_PARSE, "tool_calls is not a list")
                )
            else:
                for index, entry in enumerate(entries, start=1):
                    call, problem = _parse_one_call(entry, index)
                    if call is None:
                        penalties.append(
                            FormatPenalty(PenaltyKind.MISSING_PARAMS, problem)
                        )
                    else:
                        calls.append(call)
    return (
        ActionResponse(think=think, tool_calls=tuple(calls), create_scene=None, raw_text=text),
        penalties,
    )


# --------------------------------------------------------------------------
# Transitions


def apply_tool_call(
    scene: Scene, call: ToolCall, assets: AssetCatalog
) -> tuple[Scene, list[FormatPenalty]]:
    """Apply one call to a scene, returning the new scene and any penalties.

    Pure: the input scene is never mutated. Unknown or duplicate uids leave
    the scene unchanged and emit an InvalidId penalty. Added and replaced
    objects get their size instantiated through asset retrieval (aspect ratio
    from the catalog, volume from the requested size); scaling is verbatim.
    """
    if isinstance(call, AddObject):
        existing = scene.uid_set()
        if call.uid is not None and call.uid in existing:
            return scene, [
                FormatPenalty(PenaltyKind.INVALID_ID, f"uid {call.uid!r} already in scene")
            ]
        uid = call.uid if call.uid is not None else fresh_uid(call.object_description, existing)
        obj = SceneObject(
            uid=uid,
            description=call.object_description,
            position=call.position,
            rotation=sanitize_quaternion(call.rotation),
            size=snap_size(assets, call.object_description, call.size),
        )
        return scene.add(obj), []
    if isinstance(call, Terminate):
        return scene, []

    uid = call.uid_to_replace if isinstance(call, ReplaceObject) else call.uid
    target = scene.find(uid)
    if target is None:
        return scene, [FormatPenalty(PenaltyKind.INVALID_ID, f"unknown uid {uid!r}")]
    if isinstance(call, RemoveObject):
        return scene.remove(uid), []
    if isinstance(call, MoveObject):
        return scene.replace(uid, target.with_position(call.new_position)), []
    if isinstance(call, RotateObject):
        return scene.replace(uid, target.with_rotation(sanitize_quaternion(call.new_rotation))), []
    if isinstance(call, ScaleObject):
        return scene.replace(uid, target.with_size(call.new_size)), []
    if isinstance(call, ReplaceObject):
        replacement = SceneObject(
            uid=target.uid,
            description=call.new_object_description,
            position=target.position,
            rotation=target.rotation,
            size=snap_size(assets, call.new_object_description, target.size),
        )
        return scene.replace(uid, replacement), []
    raise TypeError(f"unknown tool call type {type(call).__name__}")


def apply_tool_calls(
    scene: Scene, calls, assets: AssetCatalog
) -> tuple[Scene, list[FormatPenalty], bool]:
    """Apply calls in order; a terminate stops consumption of later calls.

    Returns the final scene, accumulated penalties, and whether a terminate
    was reached.
    """
    penalties: list[FormatPenalty] = []
    for call in calls:
        scene, new = apply_tool_call(scene, call, assets)
        penalties.extend(new)
        if isinstance(call, Terminate):
            return scene, penalties, True
    return scene, penalties, False


# --------------------------------------------------------------------------
# Wire serialization (canonical text for records and synthetic trajectories)


def canonical_json(value) -> str:
    """Deterministic JSON with 6-decimal floats and insertion-order keys."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "null"
    if isinstance(value, float):
        return format_float(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(canonical_json(v) for v in value) + "]"
    if isinstance(value, dict):
        return "{" + ", ".join(f"{json.dumps(k)}: {canonical_json(v)}" for k, v in value.items()) + "}"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def tool_call_to_wire(call: ToolCall) -> dict:
    """The ``{"id", "name", "arguments"}`` object for one call."""
    if isinstance(call, AddObject):
        args = {
            "object_description": call.object_description,
            "position": call.position.to_list(),
            "rotation": list(call.rotation),
            "size": call.size.to_list(),
        }
        if call.uid is not None:
            args["uid"] = call.uid
    elif isinstance(call, RemoveObject):
        args = {"uid": call.uid}
    elif isinstance(call, MoveObject):
        args = {"uid": call.uid, "new_position": call.new_position.to_list()}
    elif isinstance(call, RotateObject):
        args = {"uid": call.uid, "new_rotation": list(call.new_rotation)}
    elif isinstance(call, ScaleObject):
        args = {"uid": call.uid, "new_size": call.new_size.to_list()}
    elif isinstance(call, ReplaceObject):
        args = {
            "uid_to_replace": call.uid_to_replace,
            "new_object_description": call.new_object_description,
        }
    elif isinstance(call, Terminate):
        args = {"reason": call.reason}
    else:
        raise TypeError(f"unknown tool call type {type(call).__name__}")
    return {"id": call.id, "name": call.name, "arguments": args}


def tool_call_from_wire(entry: dict) -> ToolCall:
    """Strict inverse of :func:`tool_call_to_wire` (raises on bad input)."""
    call, problem = _parse_one_call(entry, 1)
    if call is None:
        raise ValueError(problem)
    return call


def render_calls_text(think: str, calls) -> str:
    """Canonical agent message for an edit turn (think, then tool calls)."""
    body = ",\n  ".join(canonical_json(tool_call_to_wire(c)) for c in calls)
    inner = f"[\n  {body}\n]" if calls else "[]"
    return f"{THINK_OPEN}{think}{THINK_CLOSE}\n{CALLS_OPEN}{inner}{CALLS_CLOSE}"


def render_create_scene_text(scene: Scene) -> str:
    """Canonical agent message for the scene-creation turn."""
    return f"{CREATE_OPEN}\n{serialize_scene(scene)}\n{CREATE_CLOSE}"
