"""Reward curves, composite rewards, and trajectory scoring.

The piecewise curves carry golden anchor tables checked to 1e-12, plus
seeded property sweeps for continuity, monotonicity, and range.
"""

import math
import random

import pytest

from scenechain.metrics import SceneRatios, check_physics, scene_ratios
from scenechain.rewards import (
    CONSOLIDATED_VALUES,
    DEFAULT_WEIGHTS,
    MIN_OBJECT_COUNT,
    MIN_SIZE_VALID_OBJECTS,
    EmptyTrajectory,
    FinalReward,
    JudgeScores,
    RewardWeights,
    StepWeights,
    TerminalWeights,
    collision_rate_reward,
    final_reward,
    format_reward,
    init_reward,
    key_objects_score,
    load_weights,
    oob_rate_reward,
    oob_volume_reward,
    penetration_reward,
    relevance_score,
    size_proportion_score,
    size_validity_counts,
    step_reward,
    step_reward_from_ratios,
    support_reward,
    trajectory_score,
)
from scenechain.scene import RoomGeometry, Scene, Vec3
from scenechain.tools import FormatPenalty, PenaltyKind

from conftest import make_box, make_floor_box, make_scene, make_square_room

TOL = 1e-12

# (input, expected) golden anchors per curve — breakpoints, midpoints of
# every linear piece, and deep-clamp points.
COLLISION_GOLDEN = [
    (0.0, 1.0),
    (10.0, 0.75),
    (20.0, 0.5),
    (32.5, 0.25),
    (45.0, 0.0),
    (72.5, -0.5),
    (100.0, -1.0),
    (200.0, -1.0),
]
OOB_GOLDEN = [
    (0.0, 1.0),
    (5.0, 0.75),
    (10.0, 0.5),
    (20.0, 0.25),
    (30.0, 0.0),
    (65.0, -0.5),
    (100.0, -1.0),
    (250.0, -1.0),
]
PEN_GOLDEN = [
    (0.0, 1.0),
    (0.05, 0.75),
    (0.1, 0.5),
    (0.2, 0.25),
    (0.3, 0.0),
    (0.45, -0.25),
    (0.6, -0.5),
    (0.8, -0.75),
    (1.0, -1.0),
    (3.0, -1.0),
]
# The middle band has slope -1.67, so its right endpoint sits at -0.001
# rather than 0; the next band interpolates from there to -0.5.
OOB_VOL_GOLDEN = [
    (0.0, 1.0),
    (0.1, 0.75),
    (0.2, 0.5),
    (0.35, 0.5 - 1.67 * 0.15),
    (0.5, -0.001),
    (0.75, (-0.001 - 0.5) / 2.0),
    (1.0, -0.5),
    (1.5, -0.75),
    (2.0, -1.0),
    (9.0, -1.0),
]
SUPPORT_GOLDEN = [
    (0.0, 1.0),
    (5.0, 0.5),
    (10.0, 0.0),
    (15.0, -0.5),
    (20.0, -1.0),
    (100.0, -1.0),
]

CURVES = [
    (collision_rate_reward, COLLISION_GOLDEN, 0.0, 120.0),
    (oob_rate_reward, OOB_GOLDEN, 0.0, 120.0),
    (penetration_reward, PEN_GOLDEN, 0.0, 3.0),
    (oob_volume_reward, OOB_VOL_GOLDEN, 0.0, 4.0),
    (support_reward, SUPPORT_GOLDEN, 0.0, 120.0),
]


class TestCurveGolden:
    @pytest.mark.parametrize(
        "curve,golden,_lo,_hi", CURVES, ids=[c[0].__name__ for c in CURVES]
    )
    def test_anchor_values(self, curve, golden, _lo, _hi):
        for x, expected in golden:
            assert abs(curve(x) - expected) <= TOL, (curve.__name__, x)


class TestCurveProperties:
    N = 10_000

    @pytest.mark.parametrize("curve,_g,lo,hi", CURVES, ids=[c[0].__name__ for c in CURVES])
    def test_monotone_nonincreasing_and_bounded(self, curve, _g, lo, hi):
        xs = [lo + (hi - lo) * k / self.N for k in range(self.N + 1)]
        values = [curve(x) for x in xs]
        for v in values:
            assert -1.0 <= v <= 1.0
        for a, b in zip(values, values[1:]):
            assert b <= a + TOL

    @pytest.mark.parametrize("curve,_g,lo,hi", CURVES, ids=[c[0].__name__ for c in CURVES])
    def test_continuity(self, curve, _g, lo, hi):
        # Max slope magnitude across all curves is 5; adjacent samples may
        # differ by at most slope * dx (+ rounding headroom).
        dx = (hi - lo) / self.N
        xs = [lo + dx * k for k in range(self.N + 1)]
        values = [curve(x) for x in xs]
        for a, b in zip(values, values[1:]):
            assert abs(b - a) <= 5.0 * dx + 1e-9


class TestFormatReward:
    def test_no_penalties(self):
        assert format_reward([]) == 1.0

    def test_single_kinds(self):
        for kind, expected in [
            (PenaltyKind.MISSING_PARAMS, 0.9),
            (PenaltyKind.INVALID_ID, 0.8),
            (PenaltyKind.TAG_ORDER, 0.2),
            (PenaltyKind.JSON_PARSE, 0.1),
        ]:
            assert format_reward([FormatPenalty(kind, "x")]) == pytest.approx(expected)

    def test_floor_at_minus_one(self):
        ps = [FormatPenalty(PenaltyKind.JSON_PARSE, "x")] * 4
        assert format_reward(ps) == -1.0


class TestInitReward:
    def test_good_room(self):
        assert init_reward(make_scene(make_square_room()), "bedroom") == 1.0

    def test_none_scene(self):
        assert init_reward(None, "bedroom") == -1.0

    def test_triangle_rejected(self):
        pts = [(0, 0), (4, 0), (2, 3)]
        room = RoomGeometry(
            bounds_top=tuple(Vec3(x, 2.8, z) for x, z in pts),
            bounds_bottom=tuple(Vec3(x, 0.0, z) for x, z in pts),
            room_type="bedroom",
            room_id="r",
        )
        assert init_reward(make_scene(room), None) == -1.0

    def test_self_intersection_rejected(self):
        pts = [(0, 0), (2, 2), (2, 0), (0, 2)]
        room = RoomGeometry(
            bounds_top=tuple(Vec3(x, 2.8, z) for x, z in pts),
            bounds_bottom=tuple(Vec3(x, 0.0, z) for x, z in pts),
            room_type="bedroom",
            room_id="r",
        )
        assert init_reward(make_scene(room), None) == -1.0

    def test_oversized_room_rejected(self):
        from scenechain.scene import RoomGeometry as RG

        exactly_30 = make_scene(RG.rectangle(6.0, 5.0))
        assert init_reward(exactly_30, None) == 1.0  # boundary is acceptable
        assert init_reward(make_scene(make_square_room(side=5.6)), None) == -1.0

    def test_room_type_mismatch(self):
        scene = make_scene(make_square_room(room_type="bedroom"))
        assert init_reward(scene, "Bedroom") == 1.0  # case-insensitive
        assert init_reward(scene, "office") == -1.0
        assert init_reward(scene, None) == 1.0  # no request, no check


class TestDiscreteScores:
    def test_key_objects_table(self):
        assert key_objects_score(6, 6, False) == 1.0
        assert key_objects_score(99, 100, False) == 1.0  # ratio 0.99 counts
        assert key_objects_score(4, 6, False) == 0.0
        assert key_objects_score(3, 6, False) == -1.0
        assert key_objects_score(0, 6, False) == -1.0
        assert key_objects_score(6, 6, True) == -1.0  # essential gate wins

    def test_key_objects_validation(self):
        with pytest.raises(ValueError):
            key_objects_score(0, 0, False)
        with pytest.raises(ValueError):
            key_objects_score(7, 6, False)

    def test_relevance_table(self):
        assert relevance_score(3, 0) == 1.0
        assert relevance_score(0, 3) == -1.0
        assert relevance_score(3, 2) == 0.5
        assert relevance_score(2, 3) == -0.5
        assert relevance_score(2, 2) == -0.5  # ties count against

    def test_relevance_validation(self):
        with pytest.raises(ValueError):
            relevance_score(0, 0)
        with pytest.raises(ValueError):
            relevance_score(-1, 2)

    def test_size_proportion(self, catalog):
        room = make_square_room()
        bed = catalog.category_index["double bed"][0].canonical_size
        good = make_floor_box("bed_1", "double bed", (2, 2), bed.to_list())
        bad = make_floor_box("bed_2", "double bed", (1, 1), (0.05, 0.05, 0.05))
        neutral = make_floor_box("blob_1", "mysterious blob", (3, 3), (9.0, 9.0, 9.0))
        assert size_proportion_score(make_scene(room), catalog) == 1.0
        assert size_proportion_score(make_scene(room, good), catalog) == 1.0
        assert size_proportion_score(make_scene(room, good, bad), catalog) == 0.0
        assert size_proportion_score(make_scene(room, bad), catalog) == -1.0
        # Unmatched descriptions never count against the scene.
        assert size_proportion_score(make_scene(room, good, neutral), catalog) == 1.0
        counts = size_validity_counts(make_scene(room, good, bad, neutral), catalog)
        assert counts == (2, 3)


class TestWeights:
    def test_default_sums(self):
        w = DEFAULT_WEIGHTS
        assert w.alpha + w.beta == pytest.approx(1.0, abs=TOL)
        step_total = w.step.fmt + 4 * w.step.phy_each + 2 * w.step.sem_each
        assert step_total == pytest.approx(1.0, abs=TOL)
        terminal_total = (
            w.terminal.fmt + w.terminal.obj + w.terminal.scene_phys + w.terminal.scene_vlm
        )
        assert terminal_total == pytest.approx(1.0, abs=TOL)

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            RewardWeights(alpha=-0.1)
        with pytest.raises(ValueError):
            RewardWeights(step=StepWeights(fmt=-0.5))

    def test_load_weights_toml(self, tmp_path):
        path = tmp_path / "weights.toml"
        path.write_text("alpha = 0.5\nbeta = 0.5\n[step]\nfmt = 0.2\n")
        w = load_weights(path)
        assert w.alpha == 0.5
        assert w.step.fmt == 0.2
        assert w.step.phy_each == 0.10  # untouched default
        assert w.terminal == TerminalWeights()

    def test_load_weights_json(self, tmp_path):
        path = tmp_path / "weights.json"
        path.write_text('{"terminal": {"scene_vlm": 0.4, "scene_phys": 0.2}}')
        w = load_weights(path)
        assert w.terminal.scene_vlm == 0.4
        assert w.terminal.scene_phys == 0.2
        assert w.alpha == 0.4


class TestStepReward:
    def test_weighted_sum(self):
        step = step_reward(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
        assert step.r_t == pytest.approx(1.0, abs=TOL)
        step = step_reward(1.0, 0.5, 0.5, 0.5, 0.5, -1.0, 1.0)
        # 0.1*1 + 0.1*2.0 + 0.25*0.0
        assert step.r_t == pytest.approx(0.3, abs=TOL)

    def test_from_ratios_matches_curves(self):
        ratios = SceneRatios(r_col=20.0, r_oob=10.0, d_pen=0.1, v_oob=0.2, r_unsup=0.0)
        step = step_reward_from_ratios(1.0, ratios, 1.0, 0.0)
        assert step.r_col == pytest.approx(0.5, abs=TOL)
        assert step.r_oob == pytest.approx(0.5, abs=TOL)
        assert step.r_pen == pytest.approx(0.5, abs=TOL)
        assert step.r_oob_vol == pytest.approx(0.5, abs=TOL)
        assert step.r_t == pytest.approx(0.1 + 0.1 * 2.0 + 0.25 * 1.0, abs=TOL)

    def test_range_under_fuzz(self):
        rng = random.Random(13)
        for _ in range(20_000):
            components = [rng.uniform(-1, 1) for _ in range(7)]
            step = step_reward(*components)
            assert -1.0 - TOL <= step.r_t <= 1.0 + TOL


def _final_args(scene, catalog, consolidated=(1.0, 1.0, 1.0), key=(6, 6, False), r_fmt=1.0):
    report = check_physics(scene)
    ratios = scene_ratios(report, scene)
    judge = JudgeScores(consolidated=consolidated)
    return scene, report, ratios, judge, key, catalog, r_fmt


def _bedroom_scene():
    # Canonical catalog sizes, placed clear of the walls and one another.
    return make_scene(
        make_square_room(),
        make_floor_box("bed_1", "double bed", (1.2, 1.2), (2.0, 0.55, 1.9)),
        make_floor_box("wardrobe_1", "wardrobe", (3.2, 0.5), (1.5, 2.2, 0.65)),
        make_floor_box("nightstand_1", "nightstand", (3.2, 2.0), (0.5, 0.55, 0.4)),
        make_floor_box("lamp_1", "lamp", (3.2, 3.3), (0.35, 0.5, 0.35)),
    )


class TestFinalReward:
    def test_perfect_scene(self, catalog):
        scene = _bedroom_scene()
        out = final_reward(*_final_args(scene, catalog))
        assert not out.object_count_override
        assert not out.physics_skipped
        assert out.r_final == pytest.approx(1.0, abs=1e-9)

    def test_object_count_override(self, catalog):
        scene = _bedroom_scene()
        scene = scene.remove("lamp_1")
        assert len(scene.objects) == MIN_OBJECT_COUNT - 1
        out = final_reward(*_final_args(scene, catalog))
        assert out.object_count_override
        assert out.r_final == -1.0

    def test_physics_skipped_when_sizes_unvalidatable(self, catalog):
        # Four objects but only two carry size-checkable categories.
        objs = [
            make_floor_box("a_1", "nightstand", (0.7, 0.7), (0.5, 0.5, 0.5)),
            make_floor_box("b_1", "lamp", (3.0, 3.0), (0.3, 1.5, 0.3)),
            make_floor_box("c_1", "whatsit", (1.0, 3.0), (0.5, 0.5, 0.5)),
            make_floor_box("d_1", "doohickey", (3.0, 1.0), (0.5, 0.5, 0.5)),
        ]
        scene = make_scene(make_square_room(), *objs)
        valid, _total = size_validity_counts(scene, catalog)
        # Unmatched categories count as size-valid, so pick a scene where
        # matched categories are fewer than the minimum yet all valid.
        assert valid >= MIN_SIZE_VALID_OBJECTS
        out = final_reward(*_final_args(scene, catalog))
        assert not out.physics_skipped

    def test_physics_skipped_by_invalid_sizes(self, catalog):
        # Four objects, three with wildly invalid sizes: 1 size-valid < 3.
        objs = [
            make_floor_box("a_1", "nightstand", (0.7, 0.7), (0.001, 0.001, 0.001)),
            make_floor_box("b_1", "lamp", (3.0, 3.0), (0.001, 0.001, 0.001)),
            make_floor_box("c_1", "wardrobe", (1.0, 3.0), (0.001, 0.001, 0.001)),
            make_floor_box("d_1", "double bed", (2.4, 1.0), (2.0, 0.55, 1.9)),
        ]
        scene = make_scene(make_square_room(), *objs)
        out = final_reward(*_final_args(scene, catalog))
        assert out.physics_skipped
        # phys mix forced to -1: r = 0.1*1 + 0.3*obj + 0.3*(-1) + 0.3*vlm
        obj_mix = (out.r_key + out.r_size) / 2.0
        expected = 0.1 * 1.0 + 0.3 * obj_mix + 0.3 * (-1.0) + 0.3 * 1.0
        assert out.r_final == pytest.approx(expected, abs=TOL)

    def test_component_mixes(self, catalog):
        scene = _bedroom_scene()
        out = final_reward(
            *_final_args(scene, catalog, consolidated=(0.5, 1.0, 0.0), key=(4, 6, False))
        )
        phys_mix = (out.r_support + out.r_col + out.r_oob + out.r_pen + out.r_oob_vol) / 5.0
        expected = (
            0.1 * 1.0
            + 0.3 * ((0.0 + out.r_size) / 2.0)
            + 0.3 * phys_mix
            + 0.3 * (1.5 / 3.0)
        )
        assert out.r_final == pytest.approx(expected, abs=TOL)

    def test_range_under_fuzz(self, catalog):
        rng = random.Random(17)
        scene = _bedroom_scene()
        report = check_physics(scene)
        for _ in range(2000):
            ratios = SceneRatios(
                r_col=rng.uniform(0, 100),
                r_oob=rng.uniform(0, 100),
                d_pen=rng.uniform(0, 3),
                v_oob=rng.uniform(0, 4),
                r_unsup=rng.uniform(0, 100),
            )
            judge = JudgeScores(
                consolidated=tuple(rng.choice(CONSOLIDATED_VALUES) for _ in range(3))
            )
            total = rng.randint(1, 15)
            found = rng.randint(0, total)
            out = final_reward(
                scene,
                report,
                ratios,
                judge,
                (found, total, rng.random() < 0.2),
                catalog,
                rng.uniform(-1, 1),
            )
            assert -1.0 - TOL <= out.r_final <= 1.0 + TOL


class TestTrajectoryScore:
    def test_worked_example(self):
        # Mean step reward 0.5 and a perfect final scene: 0.4*0.5 + 0.6*1.0.
        score = trajectory_score([0.5, 0.5], 1.0)
        assert score.j_tau == pytest.approx(0.8, abs=TOL)
        assert score.mean_step == 0.5
        assert score.final == 1.0

    def test_empty_raises(self):
        with pytest.raises(EmptyTrajectory):
            trajectory_score([], 1.0)

    def test_custom_weights(self):
        w = RewardWeights(alpha=1.0, beta=0.0)
        assert trajectory_score([0.25, 0.75], -1.0, w).j_tau == pytest.approx(0.5)

    def test_range_under_fuzz(self):
        rng = random.Random(19)
        for _ in range(20_000):
            steps = [rng.uniform(-1, 1) for _ in range(rng.randint(1, 12))]
            final = rng.uniform(-1, 1)
            score = trajectory_score(steps, final)
            assert -1.0 - TOL <= score.j_tau <= 1.0 + TOL
