"""Asset catalog: loading, keyword matching, retrieval, size rules."""

import json
import math
import random

import pytest

from scenechain.assets import (
    CATALOG_ENV_VAR,
    FALLBACK_CATEGORY,
    MANDATORY_MAX,
    MANDATORY_MIN,
    SIZE_MAX_FACTOR,
    SIZE_MIN_FACTOR,
    UnknownCategory,
    UnknownRoomType,
    alignment_error,
    essential_category,
    essential_missing,
    find_categories_in_text,
    key_object_counts,
    load_catalog,
    mandatory_objects,
    match_category,
    missing_key_objects,
    object_size_valid,
    resolve_room_type,
    retrieve,
    size_valid,
    snap_size,
)
from scenechain.scene import Scene, Vec3

from conftest import make_floor_box, make_square_room


def _tiny_catalog_dict():
    entry = {
        "canonical_size": [1.0, 1.0, 1.0],
        "min_size": [0.5, 0.5, 0.5],
        "max_size": [2.0, 2.0, 2.0],
    }
    return {
        "version": 1,
        "entries": [
            {"asset_id": "crate_b", "category": "crate", **entry},
            {"asset_id": "crate_a", "category": "crate", **entry},
            {"asset_id": "generic_x", "category": FALLBACK_CATEGORY, **entry},
        ],
        "mandatory_by_room": {"vault": ["crate"] * 5},
        "essential_by_room": {"vault": "crate"},
    }


class TestLoadCatalog:
    def test_builtin_catalog_is_consistent(self, catalog):
        assert len(catalog.entries) > 0
        assert FALLBACK_CATEGORY in catalog.category_index
        for room in catalog.room_types():
            items = catalog.mandatory_by_room[room]
            assert MANDATORY_MIN <= len(items) <= MANDATORY_MAX
            for cat in items:
                assert cat in catalog.category_index, cat
            assert catalog.essential_by_room[room] in catalog.category_index

    def test_env_var_honored(self, tmp_path, monkeypatch):
        path = tmp_path / "catalog.json"
        path.write_text(json.dumps(_tiny_catalog_dict()))
        monkeypatch.setenv(CATALOG_ENV_VAR, str(path))
        cat = load_catalog()
        assert set(cat.categories()) == {"crate", FALLBACK_CATEGORY}

    def test_explicit_path_beats_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv(CATALOG_ENV_VAR, str(tmp_path / "missing.json"))
        path = tmp_path / "explicit.json"
        path.write_text(json.dumps(_tiny_catalog_dict()))
        cat = load_catalog(path)
        assert "crate" in cat.categories()

    def test_bad_envelope_rejected(self, tmp_path):
        data = _tiny_catalog_dict()
        data["entries"][0]["min_size"] = [3.0, 3.0, 3.0]  # min above canonical
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(data))
        with pytest.raises(ValueError):
            load_catalog(path)


class TestKeywordMatching:
    def test_longest_name_wins(self, catalog):
        assert match_category(catalog, "put a large desk by the window") == "large desk"
        assert match_category(catalog, "put a desk by the window") == "desk"

    def test_word_boundaries(self, catalog):
        assert match_category(catalog, "three desks") is None
        assert match_category(catalog, "A DESK, please") == "desk"

    def test_no_match_returns_none(self, catalog):
        assert match_category(catalog, "a mysterious contraption") is None

    def test_find_categories_orders_by_occurrence(self, catalog):
        found = find_categories_in_text(catalog, "a tv stand under the tv, then a desk")
        assert found == ["tv stand", "tv", "desk"]

    def test_find_categories_deduplicates(self, catalog):
        found = find_categories_in_text(catalog, "a lamp here and a lamp there")
        assert found == ["lamp"]


class TestRetrieval:
    def test_alignment_error_value(self):
        err = alignment_error(Vec3(2.0, 1.0, 1.0), Vec3(1.0, 1.0, 1.0))
        assert err == pytest.approx(math.log(2.0))
        err = alignment_error(Vec3(2.0, 0.5, 1.0), Vec3(1.0, 1.0, 1.0))
        assert err == pytest.approx(2.0 * math.log(2.0))

    def test_alignment_error_rejects_non_positive_target(self):
        with pytest.raises(ValueError):
            alignment_error(Vec3(1, 1, 1), Vec3(1.0, 0.0, 1.0))

    def test_retrieve_picks_best_aligned_entry(self, catalog):
        entries = catalog.category_index["double bed"]
        assert len(entries) >= 2
        for entry in entries:
            got = retrieve(catalog, "a double bed", entry.canonical_size)
            assert got.asset_id == entry.asset_id

    def test_retrieve_ties_break_by_asset_id(self, tmp_path):
        path = tmp_path / "catalog.json"
        path.write_text(json.dumps(_tiny_catalog_dict()))
        cat = load_catalog(path)
        got = retrieve(cat, "a crate", Vec3(1.3, 1.3, 1.3))
        assert got.asset_id == "crate_a"

    def test_unknown_description_falls_back_to_generic(self, catalog):
        got = retrieve(catalog, "a mysterious contraption", Vec3(1, 1, 1))
        assert got.category == FALLBACK_CATEGORY

    def test_fallback_can_be_disabled(self, catalog):
        with pytest.raises(UnknownCategory):
            retrieve(catalog, "a mysterious contraption", Vec3(1, 1, 1), allow_fallback=False)


class TestSnapSize:
    def test_snap_is_idempotent(self, catalog):
        rng = random.Random(21)
        descriptions = ["double bed", "nightstand", "sofa", "floor lamp", "odd gizmo"]
        for _ in range(200):
            desc = rng.choice(descriptions)
            target = Vec3(rng.uniform(0.2, 3.0), rng.uniform(0.2, 3.0), rng.uniform(0.2, 3.0))
            once = snap_size(catalog, desc, target)
            twice = snap_size(catalog, desc, once)
            assert twice == once, (desc, target.to_list())

    def test_snap_preserves_volume_approximately(self, catalog):
        target = Vec3(1.0, 1.0, 1.0)
        snapped = snap_size(catalog, "double bed", target)
        assert snapped.volume() == pytest.approx(1.0, rel=0.02)

    def test_snap_takes_catalog_aspect_ratio(self, catalog):
        snapped = snap_size(catalog, "double bed", Vec3(1.0, 1.0, 1.0))
        ratios = {
            (
                round(e.canonical_size.x / e.canonical_size.y, 6),
                round(e.canonical_size.x / e.canonical_size.z, 6),
            )
            for e in catalog.category_index["double bed"]
        }
        got = (round(snapped.x / snapped.y, 6), round(snapped.x / snapped.z, 6))
        assert got in ratios

    def test_snap_survives_storage_quantization(self, catalog):
        # Sizes must be exact on the 6-decimal wire grid so a scene
        # serialize/parse cycle cannot change them.
        from scenechain.scene import quantize

        rng = random.Random(22)
        for _ in range(100):
            target = Vec3(rng.uniform(0.3, 2.5), rng.uniform(0.3, 2.5), rng.uniform(0.3, 2.5))
            snapped = snap_size(catalog, "wardrobe", target)
            for v in snapped.to_list():
                assert quantize(v) == v


class TestSizeValidity:
    def test_factor_bounds(self, catalog):
        entries = catalog.category_index["double bed"]
        lo_x = min(e.min_size.x for e in entries)
        hi_x = max(e.max_size.x for e in entries)
        mid = entries[0].canonical_size
        assert size_valid(catalog, "double bed", mid)
        # Exact boundary values are valid; a step beyond is not. The step
        # must exceed the 6-decimal storage grid or Vec3 rounds it away.
        for v, ok in [
            (SIZE_MIN_FACTOR * lo_x, True),
            (SIZE_MIN_FACTOR * lo_x - 1e-5, False),
            (SIZE_MAX_FACTOR * hi_x, True),
            (SIZE_MAX_FACTOR * hi_x + 1e-5, False),
        ]:
            assert size_valid(catalog, "double bed", Vec3(v, mid.y, mid.z)) is ok

    def test_unknown_category_is_valid(self, catalog):
        assert size_valid(catalog, None, Vec3(99.0, 99.0, 99.0))
        assert size_valid(catalog, "not-a-category", Vec3(99.0, 99.0, 99.0))

    def test_object_size_valid_matches_description(self, catalog):
        bed = catalog.category_index["double bed"][0].canonical_size
        assert object_size_valid(catalog, "a plush double bed", bed)
        assert not object_size_valid(catalog, "a plush double bed", Vec3(50.0, 50.0, 50.0))
        assert object_size_valid(catalog, "a mysterious contraption", Vec3(50.0, 50.0, 50.0))


class TestRoomTypes:
    def test_exact_and_normalized(self, catalog):
        assert resolve_room_type(catalog, "bedroom") == "bedroom"
        assert resolve_room_type(catalog, "  Living Room ") == "living room"

    def test_inferred_from_instruction(self, catalog):
        assert resolve_room_type(catalog, None, "Design a cozy bedroom for a child") == "bedroom"

    def test_unresolvable_raises(self, catalog):
        with pytest.raises(UnknownRoomType):
            resolve_room_type(catalog, "spaceship", "dock the shuttle")

    def test_mandatory_objects_base_list(self, catalog):
        base = mandatory_objects(catalog, "bedroom")
        assert base.count("nightstand") == 2  # duplicates are meaningful
        assert "double bed" in base

    def test_mandatory_objects_extended_by_instruction(self, catalog):
        out = mandatory_objects(catalog, "bedroom", "add an aquarium and a desk")
        base = mandatory_objects(catalog, "bedroom")
        assert out[: len(base)] == base
        assert out[len(base) :] == ["aquarium", "desk"]

    def test_mandatory_objects_never_exceed_cap(self, catalog):
        instruction = ", ".join(catalog.categories())
        out = mandatory_objects(catalog, "bedroom", instruction)
        assert len(out) == MANDATORY_MAX
        assert FALLBACK_CATEGORY not in out

    def test_essential_category(self, catalog):
        assert essential_category(catalog, "bedroom") == "double bed"


class TestKeyObjects:
    def _bedroom_scene(self, *descriptions):
        room = make_square_room(room_type="bedroom")
        objs = [
            make_floor_box(f"obj_{i}", d, (0.5 + i, 0.5), (0.5, 0.5, 0.5))
            for i, d in enumerate(descriptions)
        ]
        return Scene(room=room, objects=tuple(objs))

    def test_duplicate_entries_need_duplicate_objects(self, catalog):
        mandatory = mandatory_objects(catalog, "bedroom")
        one = self._bedroom_scene("double bed", "nightstand", "wardrobe", "lamp", "lamp")
        missing = missing_key_objects(catalog, one, mandatory)
        assert missing == ["nightstand"]
        two = self._bedroom_scene(
            "double bed", "nightstand", "nightstand", "wardrobe", "lamp", "lamp"
        )
        assert missing_key_objects(catalog, two, mandatory) == []

    def test_counts(self, catalog):
        mandatory = mandatory_objects(catalog, "bedroom")
        scene = self._bedroom_scene("double bed", "lamp")
        found, total = key_object_counts(catalog, scene, mandatory)
        assert total == len(mandatory)
        assert found == 2

    def test_matching_is_category_aware(self, catalog):
        # "queen double bed with headboard" and the mandatory entry
        # "double bed" meet through the same catalog category.
        scene = self._bedroom_scene("a queen double bed with headboard")
        assert missing_key_objects(catalog, scene, ["double bed"]) == []

    def test_matching_falls_back_to_keywords(self, catalog):
        # "pouf" is not a catalog category; containment still matches.
        scene = self._bedroom_scene("a velvet pouf")
        assert missing_key_objects(catalog, scene, ["pouf"]) == []
        assert missing_key_objects(catalog, scene, ["poufs"]) == ["poufs"]

    def test_essential_missing(self, catalog):
        without = self._bedroom_scene("nightstand", "lamp")
        assert essential_missing(catalog, without, "bedroom")
        with_bed = self._bedroom_scene("double bed", "lamp")
        assert not essential_missing(catalog, with_bed, "bedroom")
