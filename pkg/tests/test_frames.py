"""
Tests for the frame data model, lexicon and HOI catalog
"""

import json
import os
import random
import tempfile
import unittest

from dynoframe.error import DynoframeError
from dynoframe.frames import (
    BoundingBox,
    GroundedFrame,
    HhiAnnotation,
    HoiCatalog,
    HoiCatalogEntry,
    HoiDetection,
    Lexicon,
    SemanticFrame,
    VerbEntry,
    catalog_from_records,
    frame_from_roles,
    hoi_splits,
    lexicon_from_records,
    load_lexicon,
    validate_frame,
)

SLICE = {"verb": "slice", "gerund": "slicing", "roles": ["AGENT", "ITEM", "TOOL", "PLACE"]}


class TestLexicon(unittest.TestCase):
    """Test cases for lexicon loading."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def write(self, records):
        path = os.path.join(self.tmp.name, "lexicon.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(records, fh)
        return path

    def test_load_single_entry(self):
        lexicon = load_lexicon(self.write([SLICE]))
        self.assertEqual(len(lexicon), 1)
        self.assertEqual(lexicon["slice"].gerund, "slicing")
        self.assertEqual(lexicon["slice"].roles, ("AGENT", "ITEM", "TOOL", "PLACE"))

    def test_gerund_is_inflected_when_absent(self):
        lexicon = lexicon_from_records([{"verb": "run", "roles": ["AGENT"]}])
        self.assertEqual(lexicon["run"].gerund, "running")
        self.assertEqual(lexicon.verbs_for_gerund("running"), ["run"])

    def test_mixed_case_role_rejected(self):
        with self.assertRaises(DynoframeError) as context:
            lexicon_from_records([{"verb": "slice", "roles": ["Agent"]}])
        self.assertEqual(context.exception.code, "ROLE_NOT_UPPERCASE")
        self.assertIn("role not uppercase", context.exception.message)

    def test_duplicate_verb_rejected(self):
        records = [{"verb": "eat", "roles": ["AGENT"]}, {"verb": "eat", "roles": ["FOOD"]}]
        with self.assertRaises(DynoframeError) as context:
            lexicon_from_records(records)
        self.assertEqual(context.exception.code, "DUPLICATE_VERB")

    def test_duplicate_role_rejected(self):
        with self.assertRaises(DynoframeError) as context:
            lexicon_from_records([{"verb": "eat", "roles": ["AGENT", "AGENT"]}])
        self.assertEqual(context.exception.code, "DUPLICATE_ROLE")

    def test_verb_marker_is_reserved(self):
        with self.assertRaises(DynoframeError) as context:
            lexicon_from_records([{"verb": "eat", "roles": ["VERB"]}])
        self.assertEqual(context.exception.code, "RESERVED_ROLE")

    def test_gerund_collision_rejected_unless_allowed(self):
        records = [
            {"verb": "lie", "roles": ["AGENT"]},
            {"verb": "lye", "gerund": "lying", "roles": ["AGENT"]},
        ]
        with self.assertRaises(DynoframeError) as context:
            lexicon_from_records(records)
        self.assertEqual(context.exception.code, "AMBIGUOUS_GERUND")

        lexicon = lexicon_from_records(records, allow_gerund_collisions=True)
        self.assertEqual(lexicon.gerund_collisions(), {"lying": ["lie", "lye"]})

    def test_malformed_json_reports_line(self):
        path = os.path.join(self.tmp.name, "bad.json")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write('[\n  {"verb": "eat",\n   "roles": [AGENT]}\n]')
        with self.assertRaises(DynoframeError) as context:
            load_lexicon(path)
        self.assertEqual(context.exception.code, "JSON_PARSE_ERROR")
        self.assertIn("line 3", context.exception.message)

    def test_schema_errors(self):
        for records in ({"verb": "eat"}, [{"roles": []}], [{"verb": "eat", "roles": "AGENT"}]):
            with self.assertRaises(DynoframeError):
                lexicon_from_records(records)
        with self.assertRaises(DynoframeError) as context:
            lexicon_from_records([{"verb": "Eat", "roles": []}])
        self.assertEqual(context.exception.code, "INVALID_VERB")

    def test_role_names_in_first_seen_order(self):
        lexicon = lexicon_from_records(
            [SLICE, {"verb": "ride", "roles": ["AGENT", "VEHICLE", "PLACE"]}]
        )
        self.assertEqual(lexicon.role_names(), ["AGENT", "ITEM", "TOOL", "PLACE", "VEHICLE"])
        self.assertEqual(lexicon.gerunds(), ["slicing", "riding"])
        self.assertEqual(lexicon.to_json()[0], SLICE)

    def test_unknown_verb_lookup(self):
        lexicon = Lexicon([VerbEntry("eat", "eat", "eating", ("AGENT",))])
        with self.assertRaises(DynoframeError) as context:
            lexicon.entry("fly")
        self.assertEqual(context.exception.code, "UNKNOWN_VERB")


class TestSemanticFrame(unittest.TestCase):
    """Test cases for frames and schema validation."""

    def setUp(self):
        self.lexicon = lexicon_from_records([SLICE])

    def test_valid_frame(self):
        frame = SemanticFrame.create(
            "slice", [("AGENT", "person"), ("ITEM", None), ("TOOL", "knife"), ("PLACE", "table")]
        )
        self.assertEqual(validate_frame(frame, self.lexicon), [])
        self.assertIsNone(frame.noun("ITEM"))

    def test_missing_role(self):
        frame = SemanticFrame.create(
            "slice", [("AGENT", "person"), ("ITEM", None), ("PLACE", "table")]
        )
        self.assertEqual(validate_frame(frame, self.lexicon), ["missing role TOOL"])

    def test_unknown_verb(self):
        frame = SemanticFrame.create("fly", [("AGENT", "bird")])
        self.assertEqual(validate_frame(frame, self.lexicon), ["unknown verb 'fly'"])

    def test_extraneous_and_reordered_roles(self):
        frame = SemanticFrame.create(
            "slice",
            [("AGENT", "a"), ("ITEM", None), ("TOOL", None), ("PLACE", None), ("SOURCE", "b")],
        )
        self.assertEqual(validate_frame(frame, self.lexicon), ["extraneous role SOURCE"])

        reordered = SemanticFrame.create(
            "slice", [("ITEM", None), ("AGENT", "a"), ("TOOL", None), ("PLACE", None)]
        )
        violations = validate_frame(reordered, self.lexicon)
        self.assertEqual(len(violations), 1)
        self.assertIn("role order", violations[0])

    def test_nouns_are_normalised(self):
        frame = SemanticFrame.create("slice", {"AGENT": "  Old   MAN "})
        self.assertEqual(frame.noun("AGENT"), "old man")
        with self.assertRaises(DynoframeError) as context:
            SemanticFrame.create("slice", {"AGENT": "   "})
        self.assertEqual(context.exception.code, "INVALID_NOUN")

    def test_frame_from_roles_fills_schema_order(self):
        frame = frame_from_roles(self.lexicon, "slice", {"TOOL": "knife", "AGENT": "chef"})
        self.assertEqual(frame.roles, ("AGENT", "ITEM", "TOOL", "PLACE"))
        self.assertEqual(frame.noun("TOOL"), "knife")
        with self.assertRaises(DynoframeError) as context:
            frame_from_roles(self.lexicon, "slice", {"VEHICLE": "car"})
        self.assertEqual(context.exception.code, "EXTRANEOUS_ROLE")

    def test_json_uses_lexicon_order(self):
        roles = {"PLACE": "table", "AGENT": "chef", "ITEM": None, "TOOL": None}
        data = {"verb": "slice", "roles": roles}
        frame = SemanticFrame.from_json(data, self.lexicon)
        self.assertEqual(frame.roles, ("AGENT", "ITEM", "TOOL", "PLACE"))
        self.assertEqual(frame.to_json()["roles"]["PLACE"], "table")


class TestBoundingBox(unittest.TestCase):
    """Test cases for box invariants."""

    def test_valid_box(self):
        box = BoundingBox(0, 0, 10, 20)
        self.assertEqual(box.area, 200)
        self.assertEqual(BoundingBox.from_list(box.to_list()), box)

    def test_degenerate_boxes_rejected(self):
        rng = random.Random(7)
        for _ in range(1000):
            x1 = rng.uniform(0, 100)
            y1 = rng.uniform(0, 100)
            x2 = x1 - rng.uniform(0, 50) if rng.random() < 0.5 else x1 + 1
            y2 = y1 - rng.uniform(0, 50) if x2 > x1 else y1 + 1
            with self.assertRaises(DynoframeError):
                BoundingBox(x1, y1, x2, y2)

    def test_negative_and_non_finite_rejected(self):
        for coords in ((-1, 0, 5, 5), (0, 0, float("inf"), 5), (0, 0, float("nan"), 5)):
            with self.assertRaises(DynoframeError) as context:
                BoundingBox(*coords)
            self.assertEqual(context.exception.code, "INVALID_BOX")
        with self.assertRaises(DynoframeError):
            BoundingBox.from_list([0, 0, 1])


class TestGroundedFrame(unittest.TestCase):
    def setUp(self):
        self.frame = SemanticFrame.create("ride", [("AGENT", "man"), ("VEHICLE", None)])

    def test_box_requires_noun(self):
        with self.assertRaises(DynoframeError) as context:
            GroundedFrame.create(self.frame, {"VEHICLE": BoundingBox(0, 0, 5, 5)})
        self.assertEqual(context.exception.code, "BOX_WITHOUT_NOUN")

    def test_box_role_must_exist(self):
        with self.assertRaises(DynoframeError) as context:
            GroundedFrame.create(self.frame, {"PLACE": None})
        self.assertEqual(context.exception.code, "BOX_ROLE_UNKNOWN")

    def test_to_json(self):
        grounded = GroundedFrame.create(self.frame, {"AGENT": BoundingBox(1, 2, 3, 4)})
        self.assertEqual(grounded.box("VEHICLE"), None)
        self.assertEqual(
            grounded.to_json()["boxes"], {"AGENT": [1, 2, 3, 4], "VEHICLE": None}
        )


class TestHoiCatalog(unittest.TestCase):
    """Test cases for the rare / non-rare partition."""

    def catalog(self, counts):
        return HoiCatalog(HoiCatalogEntry(f"obj{i}", "hold", c) for i, c in enumerate(counts))

    def test_rare_split_by_count(self):
        splits = hoi_splits(self.catalog([3, 10, 9, 250]))
        self.assertEqual(splits.rare, {("obj0", "hold"), ("obj2", "hold")})
        self.assertEqual(splits.nonrare, {("obj1", "hold"), ("obj3", "hold")})

    def test_boundaries(self):
        self.assertEqual(hoi_splits(self.catalog([0, 0])).nonrare, frozenset())
        self.assertEqual(hoi_splits(self.catalog([10, 11])).rare, frozenset())

    def test_partition_property(self):
        rng = random.Random(3)
        for _ in range(50):
            counts = [rng.randrange(0, 30) for _ in range(rng.randrange(1, 40))]
            splits = hoi_splits(self.catalog(counts))
            self.assertEqual(len(splits.rare) + len(splits.nonrare), len(splits.full))
            self.assertEqual(splits.rare | splits.nonrare, splits.full)

    def test_catalog_validation(self):
        with self.assertRaises(DynoframeError) as context:
            HoiCatalog([])
        self.assertEqual(context.exception.code, "EMPTY_CATALOG")
        with self.assertRaises(DynoframeError) as context:
            catalog_from_records(
                [{"object": "cup", "action": "hold", "train_count": 1}] * 2
            )
        self.assertEqual(context.exception.code, "DUPLICATE_HOI_CLASS")
        with self.assertRaises(DynoframeError):
            catalog_from_records([{"object": "cup", "action": "hold", "train_count": "1"}])

    def test_negative_score_rejected(self):
        box = BoundingBox(0, 0, 1, 1)
        with self.assertRaises(DynoframeError) as context:
            HoiDetection(box, box, ("cup", "hold"), -0.1)
        self.assertEqual(context.exception.code, "INVALID_SCORE")


class TestHhiAnnotation(unittest.TestCase):
    def test_duplicate_slot(self):
        with self.assertRaises(DynoframeError) as context:
            HhiAnnotation("[P1] hugging [P1]", participants=1)
        self.assertEqual(context.exception.code, "DUPLICATE_SLOT")


if __name__ == "__main__":
    unittest.main()
