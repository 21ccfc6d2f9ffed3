"""
Tests for structured-text serialization and parsing
"""

import random
import string
import time
import unittest

from dynoframe.error import DynoframeError, FrameParseError
from dynoframe.frames import SemanticFrame, lexicon_from_records
from dynoframe.structparse import (
    STRICT,
    TOLERANT,
    StructuredText,
    gerund,
    parse_frame,
    parse_hhi,
    serialize_frame,
    serialize_hhi,
)

GERUNDS = {
    "slice": "slicing",
    "eat": "eating",
    "run": "running",
    "tie": "tying",
    "die": "dying",
    "see": "seeing",
    "flee": "fleeing",
    "agree": "agreeing",
    "dye": "dyeing",
    "hoe": "hoeing",
    "canoe": "canoeing",
    "make": "making",
    "ride": "riding",
    "age": "aging",
    "sit": "sitting",
    "stop": "stopping",
    "swim": "swimming",
    "hug": "hugging",
    "cut": "cutting",
    "quit": "quitting",
    "fix": "fixing",
    "snow": "snowing",
    "play": "playing",
    "throw": "throwing",
    "read": "reading",
    "open": "opening",
    "visit": "visiting",
    "carry": "carrying",
    "feed": "feeding",
    "jump": "jumping",
    "go": "going",
    "be": "being",
    "ski": "skiing",
}

ROLE_POOL = ["AGENT", "ITEM", "TOOL", "PLACE", "VEHICLE", "SOURCE", "GOAL", "COAGENT"]
NOUN_POOL = ["man", "old man", "agent smith", "place", "knife", "cutting board", "tool box", "a"]


def random_lexicon(rng, size=50):
    records, gerunds = [], set()
    while len(records) < size:
        verb = "".join(rng.choice(string.ascii_lowercase) for _ in range(rng.randrange(3, 9)))
        if gerund(verb) in gerunds:
            continue
        gerunds.add(gerund(verb))
        roles = rng.sample(ROLE_POOL, rng.randrange(0, 5))
        records.append({"verb": verb, "roles": roles})
    return lexicon_from_records(records)


def random_frame(rng, lexicon):
    verb = rng.choice(list(lexicon))
    fillers = [
        (role, None if rng.random() < 0.3 else rng.choice(NOUN_POOL))
        for role in lexicon[verb].roles
    ]
    return SemanticFrame.create(verb, fillers)


class TestGerund(unittest.TestCase):
    """Test cases for gerund inflection."""

    def test_oracle_list(self):
        for lemma, expected in GERUNDS.items():
            with self.subTest(lemma=lemma):
                self.assertEqual(gerund(lemma), expected)


class TestSerializeFrame(unittest.TestCase):
    """Test cases for serialize_frame."""

    def setUp(self):
        self.lexicon = lexicon_from_records(
            [
                {"verb": "slice", "roles": ["AGENT", "PLACE", "TOOL", "ITEM"]},
                {"verb": "eat", "roles": ["AGENT", "FOOD"]},
            ]
        )

    def test_example_string(self):
        frame = SemanticFrame.create(
            "slice", [("AGENT", "person"), ("PLACE", "table"), ("TOOL", "knife"), ("ITEM", None)]
        )
        text = serialize_frame(frame, self.lexicon)
        self.assertEqual(str(text), "VERB slicing AGENT person PLACE table TOOL knife")
        self.assertEqual(text.tokens[:2], ("VERB", "slicing"))

    def test_all_empty_roles(self):
        frame = SemanticFrame.create("eat", [("AGENT", None), ("FOOD", None)])
        self.assertEqual(str(serialize_frame(frame, self.lexicon)), "VERB eating")

    def test_multi_word_noun(self):
        frame = SemanticFrame.create(
            "slice", [("AGENT", "old man"), ("PLACE", None), ("TOOL", None), ("ITEM", "bread")]
        )
        text = str(serialize_frame(frame, self.lexicon))
        self.assertEqual(text, "VERB slicing AGENT old man ITEM bread")
        self.assertEqual(parse_frame(text, self.lexicon)[0], frame)

    def test_invalid_frame(self):
        with self.assertRaises(DynoframeError) as context:
            serialize_frame(SemanticFrame.create("eat", [("AGENT", "man")]), self.lexicon)
        self.assertEqual(context.exception.code, "INVALID_FRAME")
        with self.assertRaises(DynoframeError) as context:
            serialize_frame(SemanticFrame.create("fly", []), self.lexicon)
        self.assertEqual(context.exception.code, "UNKNOWN_VERB")

    def test_structured_text_is_canonical(self):
        text = StructuredText.from_string("  VERB   eating  AGENT man ")
        self.assertEqual(text.raw, "VERB eating AGENT man")
        self.assertEqual(" ".join(text.tokens), text.raw)


class TestParseFrame(unittest.TestCase):
    """Test cases for parse_frame in strict and tolerant modes."""

    def setUp(self):
        self.lexicon = lexicon_from_records(
            [
                {"verb": "slice", "roles": ["AGENT", "ITEM", "TOOL", "PLACE"]},
                {"verb": "eat", "roles": ["AGENT", "FOOD"]},
            ]
        )

    def test_example_string(self):
        frame, diag = parse_frame("VERB slicing AGENT person PLACE table TOOL knife", self.lexicon)
        self.assertEqual(frame.noun("AGENT"), "person")
        self.assertEqual(frame.noun("PLACE"), "table")
        self.assertEqual(frame.noun("TOOL"), "knife")
        self.assertIsNone(frame.noun("ITEM"))
        self.assertFalse(diag.recovered)
        self.assertEqual(diag.issues, ())

    def test_duplicate_role(self):
        text = "VERB eating AGENT man AGENT boy"
        with self.assertRaises(FrameParseError) as context:
            parse_frame(text, self.lexicon, STRICT)
        self.assertEqual(context.exception.code, "DUPLICATE_ROLE")
        self.assertEqual(context.exception.token_index, 4)

        frame, diag = parse_frame(text, self.lexicon, TOLERANT)
        self.assertEqual(frame.noun("AGENT"), "man")
        self.assertTrue(diag.recovered)
        self.assertEqual([i.kind for i in diag.issues], ["duplicate_role"])

    def test_empty_text(self):
        for mode in (STRICT, TOLERANT):
            with self.assertRaises(FrameParseError) as context:
                parse_frame("", self.lexicon, mode)
            self.assertEqual(context.exception.code, "NO_VERB_MARKER")

    def test_strict_errors(self):
        cases = {
            "eating AGENT man": "NO_VERB_MARKER",
            "VERB flying AGENT bird": "UNKNOWN_GERUND",
            "VERB eating DRINK water": "UNKNOWN_ROLE",
            "VERB eating AGENT FOOD bread": "ROLE_WITHOUT_NOUN",
            "VERB eating man": "UNKNOWN_ROLE",
            "VERB": "UNKNOWN_GERUND",
        }
        for text, code in cases.items():
            with self.subTest(text=text):
                with self.assertRaises(FrameParseError) as context:
                    parse_frame(text, self.lexicon, STRICT)
                self.assertEqual(context.exception.code, code)

    def test_tolerant_repairs_missing_marker(self):
        frame, diag = parse_frame("eating AGENT man", self.lexicon, TOLERANT)
        self.assertEqual(frame.verb, "eat")
        self.assertEqual([i.kind for i in diag.issues], ["missing_verb_marker"])

    def test_tolerant_keeps_unknown_caps_in_noun(self):
        frame, diag = parse_frame("VERB eating FOOD hot DOG AGENT man", self.lexicon, TOLERANT)
        self.assertEqual(frame.noun("FOOD"), "hot dog")
        self.assertEqual(frame.noun("AGENT"), "man")
        self.assertEqual([i.kind for i in diag.issues], ["unknown_role"])

    def test_tolerant_unparseable(self):
        with self.assertRaises(FrameParseError) as context:
            parse_frame("the cat sat", self.lexicon, TOLERANT)
        self.assertEqual(context.exception.code, "UNPARSEABLE")
        with self.assertRaises(FrameParseError) as context:
            parse_frame("VERB flying", self.lexicon, TOLERANT)
        self.assertEqual(context.exception.code, "UNPARSEABLE")

    def test_tolerant_drops_orphan_nouns(self):
        frame, diag = parse_frame("VERB eating quickly AGENT man", self.lexicon, TOLERANT)
        self.assertEqual(frame.noun("AGENT"), "man")
        self.assertEqual([i.kind for i in diag.issues], ["orphan_noun"])

    def test_ambiguous_gerund(self):
        lexicon = lexicon_from_records(
            [
                {"verb": "lie", "roles": ["AGENT"]},
                {"verb": "lye", "gerund": "lying", "roles": ["AGENT"]},
            ],
            allow_gerund_collisions=True,
        )
        with self.assertRaises(FrameParseError) as context:
            parse_frame("VERB lying AGENT man", lexicon, STRICT)
        self.assertEqual(context.exception.code, "AMBIGUOUS_GERUND")
        with self.assertRaises(FrameParseError) as context:
            parse_frame("VERB lying AGENT man", lexicon, TOLERANT)
        self.assertEqual(context.exception.code, "UNPARSEABLE")

    def test_noun_equal_to_lowercased_role(self):
        frame = SemanticFrame.create(
            "slice", [("AGENT", "agent smith"), ("ITEM", "place"), ("TOOL", None), ("PLACE", None)]
        )
        text = serialize_frame(frame, self.lexicon)
        self.assertEqual(parse_frame(text, self.lexicon)[0], frame)

    def test_bad_mode(self):
        with self.assertRaises(ValueError):
            parse_frame("VERB eating", self.lexicon, "lenient")


class TestRoundTrip(unittest.TestCase):
    """Round-trip and injectivity over random lexicons."""

    def test_round_trip_random_frames(self):
        rng = random.Random(11)
        lexicon = random_lexicon(rng)
        frames = [random_frame(rng, lexicon) for _ in range(10_000)]

        started = time.perf_counter()
        results = [
            parse_frame(serialize_frame(frame, lexicon), lexicon, STRICT) for frame in frames
        ]
        elapsed = time.perf_counter() - started

        for frame, (parsed, diag) in zip(frames, results):
            self.assertEqual(parsed, frame)
            self.assertEqual(diag.issues, ())
        # 2 s budget, 2x slack
        self.assertLess(elapsed, 4.0)

    def test_serialization_is_injective(self):
        rng = random.Random(5)
        lexicon = random_lexicon(rng)
        seen = {}
        for _ in range(3000):
            frame = random_frame(rng, lexicon)
            text = str(serialize_frame(frame, lexicon))
            self.assertEqual(seen.setdefault(text, frame), frame)


class TestHhi(unittest.TestCase):
    """Test cases for HHI parsing."""

    def test_two_slots(self):
        annotation, diag = parse_hhi("[P1] shakes hands with [P2]")
        self.assertEqual(annotation.participants, 2)
        self.assertEqual(str(serialize_hhi(annotation)), "[P1] shakes hands with [P2]")
        self.assertEqual(diag.issues, ())

    def test_duplicate_slot(self):
        with self.assertRaises(DynoframeError) as context:
            parse_hhi("[P1] hugging [P1] warmly")
        self.assertEqual(context.exception.code, "DUPLICATE_SLOT")

    def test_no_slots(self):
        annotation, diag = parse_hhi("people dancing together")
        self.assertEqual(annotation.participants, 0)
        self.assertEqual(annotation.slot_positions, ())
        self.assertEqual([i.kind for i in diag.issues], ["no_slots"])
        self.assertTrue(diag.recovered)

    def test_slot_positions(self):
        annotation, diag = parse_hhi("the man [P2] is hugged by [P1].")
        self.assertEqual(annotation.slot_positions, (("[P2]", 2), ("[P1]", 5)))
        self.assertEqual(annotation.participants, 2)
        self.assertFalse(diag.recovered)

    def test_slot_must_be_whole_token(self):
        annotation, diag = parse_hhi("x[P1]y waves at [P2]")
        self.assertEqual(annotation.participants, 1)
        self.assertEqual(annotation.slot_positions, (("[P2]", 3),))
        self.assertEqual([(i.kind, i.token_index) for i in diag.issues], [("embedded_slot", 0)])
        self.assertTrue(diag.recovered)


if __name__ == "__main__":
    unittest.main()
