"""
Structured text <-> frame conversion

A frame is written as ``VERB <gerund>`` followed by ``<ROLE> <noun>`` pairs in
the verb's schema order, empty roles omitted::

    VERB slicing AGENT person PLACE table TOOL knife

Role boundaries are found by ALL-CAPS tokens only, so nouns may span several
lowercase words.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

from .error import DynoframeError, FrameParseError
from .frames import (
    SLOT_PATTERN,
    VERB_MARKER,
    HhiAnnotation,
    Lexicon,
    SemanticFrame,
    is_role_token,
    validate_frame,
)

logger = logging.getLogger(__name__)

STRICT = "strict"
TOLERANT = "tolerant"
PARSE_MODES = (STRICT, TOLERANT)

VOWELS = "aeiou"

# Error codes raised by parse_frame.
NO_VERB_MARKER = "NO_VERB_MARKER"
UNKNOWN_GERUND = "UNKNOWN_GERUND"
AMBIGUOUS_GERUND = "AMBIGUOUS_GERUND"
UNKNOWN_ROLE = "UNKNOWN_ROLE"
DUPLICATE_ROLE = "DUPLICATE_ROLE"
ROLE_WITHOUT_NOUN = "ROLE_WITHOUT_NOUN"
UNPARSEABLE = "UNPARSEABLE"


def _syllable_groups(word: str) -> int:
    groups = 0
    previous_vowel = False
    for char in word.replace("qu", "qw"):
        is_vowel = char in VOWELS
        if is_vowel and not previous_vowel:
            groups += 1
        previous_vowel = is_vowel
    return groups


def gerund(lemma: str) -> str:
    """
    Present-continuous form of a lowercase ASCII lemma.

    Rules, in order: short words (<= 2 letters) take ``ing``; ``ie`` becomes
    ``ying``; a final silent ``e`` is dropped except after ``e``, ``y`` or ``o``;
    a monosyllabic consonant-vowel-consonant ending doubles its final consonant
    unless it is ``w``, ``x`` or ``y``. Irregular forms belong in the lexicon's
    ``gerund`` field.
    """
    word = lemma
    if len(word) <= 2:
        return word + "ing"
    if word.endswith("ie"):
        return word[:-2] + "ying"
    if word.endswith("e"):
        if word[-2] in "eyo":
            return word + "ing"
        return word[:-1] + "ing"

    spelled = word.replace("qu", "qw")
    c1, v, c2 = spelled[-3], spelled[-2], spelled[-1]
    if (
        c1 not in VOWELS
        and v in VOWELS
        and c2 not in VOWELS
        and c2 not in "wxy"
        and _syllable_groups(word) == 1
    ):
        return word + c2 + "ing"
    return word + "ing"


@dataclass(frozen=True)
class StructuredText:
    """A structured string in canonical single-space form."""

    raw: str
    tokens: Tuple[str, ...]

    @classmethod
    def from_string(cls, text: str) -> "StructuredText":
        tokens = tuple(text.split())
        return cls(" ".join(tokens), tokens)

    @classmethod
    def from_tokens(cls, tokens: List[str]) -> "StructuredText":
        return cls.from_string(" ".join(tokens))

    def __str__(self) -> str:
        return self.raw


@dataclass(frozen=True)
class ParseIssue:
    kind: str
    token_index: Optional[int]
    message: str

    def to_dict(self) -> Dict[str, object]:
        return {"kind": self.kind, "token": self.token_index, "message": self.message}


@dataclass(frozen=True)
class ParseDiagnostics:
    """Repairs applied while parsing; ``recovered`` iff issues exist and a result was produced."""

    recovered: bool = False
    issues: Tuple[ParseIssue, ...] = field(default_factory=tuple)

    @classmethod
    def from_issues(cls, issues: List[ParseIssue]) -> "ParseDiagnostics":
        return cls(recovered=bool(issues), issues=tuple(issues))

    def to_dict(self) -> Dict[str, object]:
        return {"recovered": self.recovered, "issues": [i.to_dict() for i in self.issues]}


TextInput = Union[str, StructuredText]


def _as_structured(text: TextInput) -> StructuredText:
    if isinstance(text, StructuredText):
        return text
    return StructuredText.from_string(text)


def serialize_frame(frame: SemanticFrame, lexicon: Lexicon) -> StructuredText:
    """
    Render a frame as structured text.

    Raises:
        DynoframeError: ``UNKNOWN_VERB`` or ``INVALID_FRAME`` if the frame does not
            match its verb schema
    """
    entry = lexicon.entry(frame.verb)
    violations = validate_frame(frame, lexicon)
    if violations:
        raise DynoframeError(
            f"frame for '{frame.verb}' is invalid: {'; '.join(violations)}",
            code="INVALID_FRAME",
        )

    tokens = [VERB_MARKER, entry.gerund]
    for role, noun in frame.fillers:
        if noun is not None:
            tokens.append(role)
            tokens.extend(noun.split())
    return StructuredText.from_tokens(tokens)


class _FrameParser:
    """Single-use state machine behind parse_frame."""

    def __init__(self, tokens: Tuple[str, ...], lexicon: Lexicon, mode: str):
        self.tokens = tokens
        self.lexicon = lexicon
        self.tolerant = mode == TOLERANT
        self.issues: List[ParseIssue] = []

    def fail(self, code: str, message: str, index: Optional[int]) -> FrameParseError:
        if self.tolerant:
            return FrameParseError(message, UNPARSEABLE, index)
        return FrameParseError(message, code, index)

    def note(self, kind: str, index: Optional[int], message: str) -> None:
        if not self.tolerant:
            raise FrameParseError(message, kind.upper(), index)
        logger.debug("tolerant parse repair (%s) at token %s: %s", kind, index, message)
        self.issues.append(ParseIssue(kind, index, message))

    def identify_verb(self) -> Tuple[str, int]:
        tokens = self.tokens
        if not tokens:
            raise FrameParseError("empty text has no VERB marker", NO_VERB_MARKER, 0)

        if tokens[0] == VERB_MARKER:
            if len(tokens) < 2:
                raise self.fail(UNKNOWN_GERUND, "missing gerund after VERB", 1)
            return self.resolve_gerund(1), 2

        if self.tolerant and self.lexicon.verbs_for_gerund(tokens[0]):
            verb = self.resolve_gerund(0)
            self.issues.append(
                ParseIssue("missing_verb_marker", 0, "inserted VERB marker before gerund")
            )
            return verb, 1

        if self.tolerant:
            raise FrameParseError(
                f"no verb can be identified in '{' '.join(tokens[:3])}'", UNPARSEABLE, 0
            )
        raise FrameParseError(
            f"text must start with {VERB_MARKER}, found '{tokens[0]}'", NO_VERB_MARKER, 0
        )

    def resolve_gerund(self, index: int) -> str:
        surface = self.tokens[index]
        verbs = self.lexicon.verbs_for_gerund(surface)
        if not verbs:
            raise self.fail(UNKNOWN_GERUND, f"unknown gerund '{surface}'", index)
        if len(verbs) > 1:
            raise self.fail(
                AMBIGUOUS_GERUND, f"gerund '{surface}' matches verbs {sorted(verbs)}", index
            )
        return verbs[0]

    def parse(self) -> Tuple[SemanticFrame, ParseDiagnostics]:
        verb, position = self.identify_verb()
        schema = self.lexicon[verb].roles
        nouns: Dict[str, List[str]] = {}
        current: Optional[str] = None
        current_index = position
        discarding = False

        def close_role() -> None:
            if current is not None and not nouns[current]:
                self.note(ROLE_WITHOUT_NOUN.lower(), current_index, f"role {current} has no noun")
                del nouns[current]

        for index in range(position, len(self.tokens)):
            token = self.tokens[index]
            if is_role_token(token) and token in schema:
                close_role()
                current = None
                if token in nouns:
                    self.note(
                        DUPLICATE_ROLE.lower(), index, f"duplicate role {token}; keeping first"
                    )
                    discarding = True
                    continue
                current, current_index, discarding = token, index, False
                nouns[token] = []
            elif is_role_token(token):
                if current is not None and nouns[current]:
                    self.note(
                        UNKNOWN_ROLE.lower(),
                        index,
                        f"unknown role '{token}' for verb '{verb}'; kept in noun",
                    )
                    nouns[current].append(token.lower())
                elif discarding:
                    continue
                else:
                    self.note(UNKNOWN_ROLE.lower(), index, f"unknown role '{token}' for '{verb}'")
            elif current is not None:
                nouns[current].append(token)
            elif not discarding:
                if not self.tolerant:
                    raise FrameParseError(
                        f"expected a role of '{verb}', found '{token}'", UNKNOWN_ROLE, index
                    )
                self.issues.append(
                    ParseIssue("orphan_noun", index, f"dropped '{token}' outside any role")
                )
        close_role()

        fillers = [(role, " ".join(nouns[role]) if role in nouns else None) for role in schema]
        frame = SemanticFrame.create(verb, fillers)
        return frame, ParseDiagnostics.from_issues(self.issues)


def parse_frame(
    text: TextInput, lexicon: Lexicon, mode: str = STRICT
) -> Tuple[SemanticFrame, ParseDiagnostics]:
    """
    Parse structured text into a frame.

    Args:
        text: Structured string
        lexicon: Verb lexicon providing the gerund index and role schemas
        mode: ``strict`` rejects any deviation from the grammar; ``tolerant``
            repairs what it can and records every repair in the diagnostics

    Returns:
        (frame, diagnostics); roles absent from the text are empty

    Raises:
        FrameParseError: strict mode: ``NO_VERB_MARKER``, ``UNKNOWN_GERUND``,
            ``AMBIGUOUS_GERUND``, ``UNKNOWN_ROLE``, ``DUPLICATE_ROLE``,
            ``ROLE_WITHOUT_NOUN``; tolerant mode: ``NO_VERB_MARKER`` for empty
            input and ``UNPARSEABLE`` when no verb can be identified
    """
    if mode not in PARSE_MODES:
        raise ValueError(f"mode must be one of {PARSE_MODES}, got {mode!r}")
    structured = _as_structured(text)
    return _FrameParser(structured.tokens, lexicon, mode).parse()


def serialize_hhi(annotation: HhiAnnotation) -> StructuredText:
    """HHI annotations serialize to their own text."""
    return StructuredText.from_string(annotation.text)


def parse_hhi(text: TextInput) -> Tuple[HhiAnnotation, ParseDiagnostics]:
    """
    Parse an HHI string with ``[P1]``/``[P2]`` participant slots.

    Slots must be whole tokens; their token indices are kept on the annotation
    as ``slot_positions``. Text without any slot is still returned, with a
    ``no_slots`` issue.

    Raises:
        DynoframeError: ``DUPLICATE_SLOT`` if a slot token occurs more than once
    """
    structured = _as_structured(text)
    positions: List[Tuple[str, int]] = []
    issues: List[ParseIssue] = []
    for index, token in enumerate(structured.tokens):
        match = SLOT_PATTERN.match(token)
        if match:
            slot = match.group(1)
            if any(slot == seen for seen, _ in positions):
                raise DynoframeError(
                    f"participant slot {slot} occurs more than once", code="DUPLICATE_SLOT"
                )
            positions.append((slot, index))
        elif "[P" in token:
            issues.append(ParseIssue("embedded_slot", index, f"'{token}' is not a slot token"))
    if not positions:
        issues.append(ParseIssue("no_slots", None, "no participant slots"))
    annotation = HhiAnnotation(
        structured.raw, participants=len(positions), slot_positions=tuple(positions)
    )
    return annotation, ParseDiagnostics.from_issues(issues)
