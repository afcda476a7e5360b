"""Scene model: quantization, quaternions, wire format, canonical JSON."""

import json
import math
import random

import pytest

from scenechain.scene import (
    DegeneratePolygon,
    InvariantViolation,
    MalformedJson,
    MissingField,
    RoomGeometry,
    Scene,
    SceneObject,
    Vec3,
    format_float,
    fresh_uid,
    parse_scene_json,
    quantize,
    quaternion_to_yaw,
    room_area,
    sanitize_quaternion,
    scene_from_wire,
    serialize_scene,
    slugify,
    yaw_to_quaternion,
)


class TestQuantize:
    def test_rounds_to_six_decimals(self):
        assert quantize(1.23456789) == 1.234568
        assert quantize(0.1 + 0.2) == 0.3

    def test_negative_zero_normalized(self):
        q = quantize(-1e-9)
        assert q == 0.0
        assert math.copysign(1.0, q) == 1.0

    def test_non_finite_rejected(self):
        for bad in (math.inf, -math.inf, math.nan):
            with pytest.raises(InvariantViolation):
                quantize(bad)

    def test_idempotent(self):
        rng = random.Random(11)
        for _ in range(1000):
            v = rng.uniform(-100, 100)
            q = quantize(v)
            assert quantize(q) == q

    def test_format_float_fixed_width(self):
        assert format_float(1.5) == "1.500000"
        assert format_float(0.0) == "0.000000"
        assert format_float(-2.25) == "-2.250000"


class TestVec3:
    def test_from_seq_roundtrip(self):
        v = Vec3.from_seq([1.2345678, 2.0, -3.5])
        assert v.to_list() == [1.234568, 2.0, -3.5]

    def test_from_seq_rejects_wrong_arity(self):
        with pytest.raises(InvariantViolation):
            Vec3.from_seq([1.0, 2.0])

    def test_from_seq_rejects_non_numeric(self):
        with pytest.raises(InvariantViolation):
            Vec3.from_seq(["a", 2.0, 3.0])

    def test_arithmetic(self):
        a = Vec3(1.0, 2.0, 3.0)
        b = Vec3(0.5, 0.5, 0.5)
        assert (a + b).to_list() == [1.5, 2.5, 3.5]
        assert (a - b).to_list() == [0.5, 1.5, 2.5]
        assert a.scaled(2.0).to_list() == [2.0, 4.0, 6.0]
        assert Vec3(2.0, 3.0, 4.0).volume() == 24.0


class TestQuaternions:
    def test_identity(self):
        assert yaw_to_quaternion(0.0) == (0.0, 0.0, 0.0, 1.0)
        assert quaternion_to_yaw((0.0, 0.0, 0.0, 1.0)) == 0.0

    def test_quarter_turn(self):
        q = yaw_to_quaternion(math.pi / 2)
        assert q[1] == pytest.approx(math.sqrt(0.5), abs=1e-6)
        assert q[3] == pytest.approx(math.sqrt(0.5), abs=1e-6)
        assert quaternion_to_yaw(q) == pytest.approx(math.pi / 2, abs=1e-5)

    def test_roundtrip_property(self):
        rng = random.Random(7)
        for _ in range(500):
            yaw = rng.uniform(-math.pi, math.pi)
            back = quaternion_to_yaw(sanitize_quaternion(yaw_to_quaternion(yaw)))
            # Angles are equivalent modulo 2*pi; quantization costs ~1e-6.
            delta = math.remainder(back - yaw, 2.0 * math.pi)
            assert abs(delta) < 1e-5

    def test_yaw_range(self):
        rng = random.Random(8)
        for _ in range(500):
            yaw = rng.uniform(-50, 50)
            out = quaternion_to_yaw(yaw_to_quaternion(yaw))
            assert -math.pi <= out < math.pi

    def test_sanitize_idempotent(self):
        rng = random.Random(9)
        for _ in range(500):
            yaw = rng.uniform(-math.pi, math.pi)
            q1 = sanitize_quaternion(yaw_to_quaternion(yaw))
            assert sanitize_quaternion(q1) == q1

    def test_sanitize_projects_non_yaw(self):
        # A tilt about x must be squashed onto its yaw (twist) component.
        q = sanitize_quaternion((0.3, 0.2, 0.1, 0.9273618495495703))
        assert q[0] == 0.0 and q[2] == 0.0
        assert math.isclose(q[1] ** 2 + q[3] ** 2, 1.0, abs_tol=2e-6)

    def test_sanitize_zero_twist_falls_back_to_identity(self):
        assert sanitize_quaternion((1.0, 0.0, 0.0, 0.0)) == (0.0, 0.0, 0.0, 1.0)

    def test_sanitize_rejects_garbage(self):
        for bad in ("nope", [1.0, 2.0], [0.0, 0.0, 0.0, math.nan], [0, "x", 0, 1]):
            with pytest.raises(InvariantViolation):
                sanitize_quaternion(bad)


class TestUids:
    def test_slugify(self):
        assert slugify("Queen-Size Bed!") == "queen_size_bed"
        assert slugify("   ") == "object"

    def test_fresh_uid_picks_smallest_free_index(self):
        existing = {"desk_1", "desk_2", "desk_4"}
        assert fresh_uid("Desk", existing) == "desk_3"
        assert fresh_uid("Lamp", existing) == "lamp_1"


class TestSceneObject:
    def test_wire_roundtrip(self, catalog):
        obj = SceneObject(
            uid="bed_1",
            description="double bed",
            position=Vec3(1.0, 0.25, 2.0),
            rotation=yaw_to_quaternion(0.4),
            size=Vec3(2.0, 0.5, 1.6),
        )
        again = SceneObject.from_wire(obj.to_wire())
        assert again == obj

    def test_jid_alias_accepted(self):
        data = {
            "jid": "chair_1",
            "description": "chair",
            "position": [0, 0.5, 0],
            "rotation": [0, 0, 0, 1],
            "size": [1, 1, 1],
        }
        assert SceneObject.from_wire(data).uid == "chair_1"

    def test_missing_field_raises(self):
        with pytest.raises(MissingField):
            SceneObject.from_wire({"uid": "a", "description": "x"})

    def test_non_positive_size_rejected(self):
        with pytest.raises(InvariantViolation):
            SceneObject(
                uid="a",
                description="x",
                position=Vec3(0, 0, 0),
                rotation=(0, 0, 0, 1),
                size=Vec3(1.0, 0.0, 1.0),
            )

    def test_bottom_top_volume(self, floor_box):
        obj = floor_box("t_1", "table", (1, 2), (1.0, 0.8, 0.6))
        assert obj.bottom() == pytest.approx(0.0)
        assert obj.top() == pytest.approx(0.8)
        assert obj.volume() == pytest.approx(0.48)


class TestRoomGeometry:
    def test_rectangle_spans_origin_to_extent(self):
        room = RoomGeometry.rectangle(4.0, 3.0, height=2.5)
        assert room.footprint() == [(0, 0), (4, 0), (4, 3), (0, 3)]
        assert room.ceiling_height == 2.5
        assert room.contains_xz(2.0, 1.5)
        assert room.contains_xz(0.0, 0.0)  # boundary counts as inside
        assert not room.contains_xz(4.1, 1.0)

    def test_floor_must_sit_at_zero(self):
        with pytest.raises(InvariantViolation):
            RoomGeometry(
                bounds_top=(Vec3(0, 2, 0), Vec3(1, 2, 0), Vec3(1, 2, 1)),
                bounds_bottom=(Vec3(0, 0.1, 0), Vec3(1, 0.1, 0), Vec3(1, 0.1, 1)),
                room_type="bedroom",
                room_id="r",
            )

    def test_ceiling_heights_must_agree(self):
        with pytest.raises(InvariantViolation):
            RoomGeometry(
                bounds_top=(Vec3(0, 2, 0), Vec3(1, 3, 0), Vec3(1, 2, 1)),
                bounds_bottom=(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 0, 1)),
                room_type="bedroom",
                room_id="r",
            )

    def test_footprints_must_match(self):
        with pytest.raises(InvariantViolation):
            RoomGeometry(
                bounds_top=(Vec3(0, 2, 0), Vec3(1, 2, 0), Vec3(2, 2, 1)),
                bounds_bottom=(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 0, 1)),
                room_type="bedroom",
                room_id="r",
            )

    def test_self_intersecting_footprint_parses_but_is_not_simple(self):
        # Bow-tie: parsing succeeds, scoring layer is responsible for judging.
        pts = [(0, 0), (2, 2), (2, 0), (0, 2)]
        room = RoomGeometry(
            bounds_top=tuple(Vec3(x, 2.8, z) for x, z in pts),
            bounds_bottom=tuple(Vec3(x, 0.0, z) for x, z in pts),
            room_type="bedroom",
            room_id="r",
        )
        assert not room.is_simple()
        with pytest.raises(DegeneratePolygon):
            room_area(room)

    def test_room_area(self, square_room):
        assert room_area(square_room(side=4.0)) == pytest.approx(16.0)


class TestScene:
    def test_duplicate_uid_rejected(self, square_room, floor_box):
        a = floor_box("x_1", "a", (1, 1), (0.5, 0.5, 0.5))
        b = floor_box("x_1", "b", (2, 2), (0.5, 0.5, 0.5))
        with pytest.raises(InvariantViolation):
            Scene(room=square_room(), objects=(a, b))

    def test_add_remove_replace_find(self, square_room, floor_box):
        scene = Scene(room=square_room())
        a = floor_box("a_1", "a", (1, 1), (0.5, 0.5, 0.5))
        b = floor_box("b_1", "b", (2, 2), (0.5, 0.5, 0.5))
        scene = scene.add(a).add(b)
        assert scene.uid_set() == {"a_1", "b_1"}
        assert scene.find("a_1") == a
        assert scene.find("zzz") is None
        moved = a.with_position(Vec3(3.0, 0.25, 3.0))
        scene = scene.replace("a_1", moved)
        assert scene.find("a_1").position.x == 3.0
        scene = scene.remove("b_1")
        assert scene.uid_set() == {"a_1"}


class TestSerialization:
    def _sample(self, square_room, floor_box):
        return Scene(
            room=square_room(side=4.0, room_type="livingroom", room_id="room_7"),
            objects=(
                floor_box("sofa_1", "three-seat sofa", (1.5, 1.0), (2.0, 0.8, 0.9), yaw=0.5),
                floor_box("tv_stand_1", "tv stand", (3.0, 3.2), (1.4, 0.5, 0.4)),
            ),
        )

    def test_roundtrip_field_exact(self, square_room, floor_box):
        scene = self._sample(square_room, floor_box)
        again = parse_scene_json(serialize_scene(scene))
        assert again == scene

    def test_serialization_is_byte_stable(self, square_room, floor_box):
        scene = self._sample(square_room, floor_box)
        assert serialize_scene(scene) == serialize_scene(scene)
        # A parse/serialize cycle is a fixed point.
        text = serialize_scene(scene)
        assert serialize_scene(parse_scene_json(text)) == text

    def test_floats_use_fixed_six_decimals(self, square_room, floor_box):
        text = serialize_scene(self._sample(square_room, floor_box))
        payload = json.loads(text)
        assert payload["objects"][0]["position"] == [1.5, 0.4, 1.0]
        # Every float in the raw text is printed with exactly 6 decimals.
        import re

        for token in re.findall(r"-?\d+\.\d+", text):
            assert len(token.split(".")[1]) == 6, token

    def test_compact_form_parses_to_same_scene(self, square_room, floor_box):
        scene = self._sample(square_room, floor_box)
        compact = serialize_scene(scene, indent=False)
        assert "\n" not in compact
        assert parse_scene_json(compact) == scene

    def test_wire_key_order(self, square_room):
        text = serialize_scene(Scene(room=square_room()))
        keys = list(json.loads(text).keys())
        assert keys == ["bounds_top", "bounds_bottom", "room_type", "room_id", "objects"]

    def test_malformed_json_raises(self):
        with pytest.raises(MalformedJson):
            parse_scene_json("{not json")

    def test_missing_fields_raise(self):
        with pytest.raises(MissingField):
            scene_from_wire({"bounds_top": [], "bounds_bottom": []})
        with pytest.raises(MissingField):
            parse_scene_json(
                json.dumps(
                    {
                        "bounds_top": [[0, 2, 0], [1, 2, 0], [1, 2, 1]],
                        "bounds_bottom": [[0, 0, 0], [1, 0, 0], [1, 0, 1]],
                        "room_type": "bedroom",
                        "room_id": "r",
                    }
                )
            )

    def test_positions_quantized_on_parse(self, square_room):
        wire = Scene(room=square_room()).to_wire()
        wire["objects"] = [
            {
                "uid": "box_1",
                "description": "box",
                "position": [0.12345678, 0.5, 0.9999995],
                "rotation": [0, 0, 0, 1],
                "size": [1, 1, 1],
            }
        ]
        scene = scene_from_wire(wire)
        pos = scene.objects[0].position
        assert pos.x == 0.123457
        assert pos.z == 1.0
