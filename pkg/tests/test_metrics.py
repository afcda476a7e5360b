"""Violation diagnosis and dataset metrics."""

import pytest

from scenechain.metrics import (
    DEFAULT_PHYSICS,
    EmptyInput,
    PhysicsConfig,
    aggregate,
    check_physics,
    scene_ratios,
    violation_volume,
)

from conftest import make_box, make_floor_box, make_scene, make_square_room


def _clean_scene():
    return make_scene(
        make_square_room(),
        make_floor_box("a_1", "box", (1.0, 1.0), (1, 1, 1)),
        make_floor_box("b_1", "box", (3.0, 3.0), (1, 1, 1)),
    )


def _colliding_scene():
    return make_scene(
        make_square_room(),
        make_floor_box("a_1", "box", (1.0, 1.0), (1, 1, 1)),
        make_floor_box("b_1", "box", (1.8, 1.0), (1, 1, 1)),  # 0.2 deep overlap
        make_floor_box("c_1", "box", (3.2, 3.2), (1, 1, 1)),
    )


class TestCheckPhysics:
    def test_clean_scene(self):
        report = check_physics(_clean_scene())
        assert report.is_clean()
        assert report.violation_count() == 0
        assert report.pair_matrix == {}
        assert report.unsupported == frozenset()
        assert set(report.per_object_excess) == {"a_1", "b_1"}

    def test_collision_pair(self):
        report = check_physics(_colliding_scene())
        assert report.colliding == {"a_1", "b_1"}
        assert report.oob == frozenset()
        assert report.pair_matrix[("a_1", "b_1")] == pytest.approx(0.2)
        assert report.violation_count() == 2

    def test_pair_keys_are_sorted(self):
        report = check_physics(_colliding_scene())
        for a, b in report.pair_matrix:
            assert a < b
        # colliding is exactly the union of pair-key members
        members = {u for pair in report.pair_matrix for u in pair}
        assert report.colliding == members

    def test_touching_within_tolerance_is_not_collision(self):
        scene = make_scene(
            make_square_room(),
            make_floor_box("a_1", "box", (1.0, 1.0), (1, 1, 1)),
            make_floor_box("b_1", "box", (1.995, 1.0), (1, 1, 1)),  # depth 0.005
        )
        assert check_physics(scene).is_clean()
        tight = PhysicsConfig(eps_col=0.001)
        assert not check_physics(scene, tight).is_clean()

    def test_oob_detection(self):
        scene = make_scene(
            make_square_room(),
            make_floor_box("a_1", "box", (4.0, 2.0), (1, 1, 1)),  # pokes 0.5 out
            make_floor_box("b_1", "box", (2.0, 2.0), (1, 1, 1)),
        )
        report = check_physics(scene)
        assert report.oob == {"a_1"}
        excursion, volume = report.per_object_excess["a_1"]
        assert excursion == pytest.approx(0.5)
        assert volume == pytest.approx(0.5)
        assert report.per_object_excess["b_1"] == (0.0, 0.0)

    def test_unsupported_detection(self):
        scene = make_scene(
            make_square_room(),
            make_floor_box("a_1", "box", (1.0, 1.0), (1, 1, 1)),
            make_box("fly_1", center=(3.0, 2.0, 3.0), size=(0.5, 0.5, 0.5)),
        )
        report = check_physics(scene)
        assert report.unsupported == {"fly_1"}
        # Unsupported objects are not violations in the count sense.
        assert report.violation_count() == 0

    def test_empty_scene(self):
        report = check_physics(make_scene(make_square_room()))
        assert report.is_clean()
        assert report.per_object_excess == {}


class TestSceneRatios:
    def test_percent_units(self):
        scene = _colliding_scene()
        ratios = scene_ratios(check_physics(scene), scene)
        assert ratios.r_col == pytest.approx(100.0 * 2 / 3)
        assert ratios.r_oob == 0.0
        assert ratios.d_pen == pytest.approx(0.2)
        assert ratios.v_oob == 0.0
        assert ratios.r_unsup == 0.0

    def test_empty_scene_ratios(self):
        scene = make_scene(make_square_room())
        ratios = scene_ratios(check_physics(scene), scene)
        assert (ratios.r_col, ratios.r_oob, ratios.d_pen, ratios.v_oob, ratios.r_unsup) == (
            0.0,
            0.0,
            0.0,
            0.0,
            0.0,
        )

    def test_oob_volume_total(self):
        scene = make_scene(
            make_square_room(),
            make_floor_box("a_1", "box", (4.0, 1.0), (1, 1, 1)),
            make_floor_box("b_1", "box", (4.0, 3.0), (1, 1, 1)),
        )
        ratios = scene_ratios(check_physics(scene), scene)
        assert ratios.v_oob == pytest.approx(1.0)
        assert ratios.r_oob == pytest.approx(100.0)


class TestAggregate:
    def test_micro_fixture(self):
        # Two scenes: one with a quarter of objects out of bounds, one clean.
        oob_scene = make_scene(
            make_square_room(),
            make_floor_box("a_1", "box", (4.0, 2.0), (1, 1, 1)),
            make_floor_box("b_1", "box", (1.0, 1.0), (1, 1, 1)),
            make_floor_box("c_1", "box", (1.0, 3.0), (1, 1, 1)),
            make_floor_box("d_1", "box", (3.0, 1.0), (1, 1, 1)),
        )
        clean = _clean_scene()
        reports = [(check_physics(s), s) for s in (oob_scene, clean)]
        metrics = aggregate(reports)
        assert metrics.obr == pytest.approx((0.25 + 0.0) / 2)
        assert metrics.cnr == 0.0
        assert metrics.vbl == pytest.approx(0.25)  # 0.5 m3 excess / 2 scenes
        assert metrics.scene_count == 2

    def test_violation_volume_combines_pairs_and_oob(self):
        scene = make_scene(
            make_square_room(),
            make_floor_box("a_1", "box", (1.0, 1.0), (1, 1, 1)),
            make_floor_box("b_1", "box", (1.8, 1.0), (1, 1, 1)),
            make_floor_box("c_1", "box", (4.0, 3.0), (1, 1, 1)),
        )
        report = check_physics(scene)
        # Pair overlap 0.2 x 1 x 1 plus boundary excess 0.5.
        assert violation_volume(report, scene) == pytest.approx(0.2 + 0.5)

    def test_collision_object_counted_once(self):
        # One object colliding with two neighbours still counts once.
        scene = make_scene(
            make_square_room(),
            make_floor_box("mid_1", "box", (2.0, 2.0), (1, 1, 1)),
            make_floor_box("left_1", "box", (1.2, 2.0), (1, 1, 1)),
            make_floor_box("right_1", "box", (2.8, 2.0), (1, 1, 1)),
        )
        report = check_physics(scene)
        assert len(report.pair_matrix) >= 2
        metrics = aggregate([(report, scene)])
        assert metrics.cnr == pytest.approx(1.0)

    def test_empty_aggregate_raises(self):
        with pytest.raises(EmptyInput):
            aggregate([])

    def test_default_config_values(self):
        assert DEFAULT_PHYSICS.eps_col == 0.01
        assert DEFAULT_PHYSICS.eps_oob == 0.001
        assert DEFAULT_PHYSICS.eps_support == 0.02
        assert DEFAULT_PHYSICS.surface_overlap_min == 0.5
