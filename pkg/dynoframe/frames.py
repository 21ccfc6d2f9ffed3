"""
Semantic frames, grounded frames, HOI classes and HHI annotations

Canonical data model plus the verb lexicon that keeps structured text
unambiguous. All types are immutable once constructed.
"""

import logging
import math
import re
from collections import OrderedDict
from dataclasses import dataclass
from typing import (
    Any,
    Callable,
    Dict,
    FrozenSet,
    Iterable,
    Iterator,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
    Union,
)

from .error import DynoframeError
from .workspace import read_json

logger = logging.getLogger(__name__)

ROLE_PATTERN = re.compile(r"^[A-Z]+$")
LEMMA_PATTERN = re.compile(r"^[a-z]+$")

VERB_MARKER = "VERB"
SLOT_TOKENS = ("[P1]", "[P2]")
# A slot is a whole token; trailing sentence punctuation is allowed.
SLOT_PATTERN = re.compile(r"^(\[P[12]\])[.,;:!?]*$")
RARE_THRESHOLD = 10

NounNormalizer = Callable[[str], str]
HoiClass = Tuple[str, str]
RoleFillers = Union[Mapping[str, Optional[str]], Iterable[Tuple[str, Optional[str]]]]


def is_role_token(token: str) -> bool:
    """A token is a role candidate iff every character is A-Z."""
    return bool(ROLE_PATTERN.match(token))


def normalize_noun(noun: str) -> str:
    """Default noun normaliser: lowercase with single spaces."""
    return " ".join(noun.lower().split())


@dataclass(frozen=True)
class VerbEntry:
    """A verb, its present-continuous form and its ordered role schema."""

    verb_id: str
    lemma: str
    gerund: str
    roles: Tuple[str, ...]

    def __post_init__(self) -> None:
        if not LEMMA_PATTERN.match(self.lemma):
            raise DynoframeError(
                f"verb '{self.lemma}' must be lowercase ASCII letters", code="INVALID_VERB"
            )
        if not self.gerund or len(self.gerund.split()) != 1 or is_role_token(self.gerund):
            raise DynoframeError(
                f"gerund for '{self.verb_id}' must be one lowercase word, got '{self.gerund}'",
                code="INVALID_GERUND",
            )
        seen = set()
        for role in self.roles:
            if not is_role_token(role):
                raise DynoframeError(
                    f"role not uppercase: '{role}' (verb '{self.verb_id}')",
                    code="ROLE_NOT_UPPERCASE",
                )
            if role == VERB_MARKER:
                raise DynoframeError(
                    f"'{VERB_MARKER}' is reserved and cannot be a role", code="RESERVED_ROLE"
                )
            if role in seen:
                raise DynoframeError(
                    f"duplicate role '{role}' in verb '{self.verb_id}'", code="DUPLICATE_ROLE"
                )
            seen.add(role)

    def to_json(self) -> Dict[str, Any]:
        return {"verb": self.verb_id, "gerund": self.gerund, "roles": list(self.roles)}


class Lexicon(Mapping[str, VerbEntry]):
    """Verb id to entry map with a reverse gerund index."""

    def __init__(self, entries: Iterable[VerbEntry], allow_gerund_collisions: bool = False):
        self._entries: "OrderedDict[str, VerbEntry]" = OrderedDict()
        self._by_gerund: Dict[str, List[str]] = {}
        for entry in entries:
            if entry.verb_id in self._entries:
                raise DynoframeError(f"duplicate verb '{entry.verb_id}'", code="DUPLICATE_VERB")
            self._entries[entry.verb_id] = entry
            self._by_gerund.setdefault(entry.gerund, []).append(entry.verb_id)

        collisions = self.gerund_collisions()
        if collisions and not allow_gerund_collisions:
            gerund, verbs = sorted(collisions.items())[0]
            raise DynoframeError(
                f"ambiguous gerund '{gerund}' shared by verbs {verbs}; "
                "give them distinct 'gerund' fields",
                code="AMBIGUOUS_GERUND",
            )

    def __getitem__(self, verb_id: str) -> VerbEntry:
        return self._entries[verb_id]

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __repr__(self) -> str:
        return f"Lexicon({len(self)} verbs)"

    def entry(self, verb_id: str) -> VerbEntry:
        try:
            return self._entries[verb_id]
        except KeyError:
            raise DynoframeError(f"unknown verb '{verb_id}'", code="UNKNOWN_VERB")

    def verbs_for_gerund(self, gerund: str) -> List[str]:
        return list(self._by_gerund.get(gerund, []))

    def gerund_collisions(self) -> Dict[str, List[str]]:
        return {g: list(v) for g, v in self._by_gerund.items() if len(v) > 1}

    def gerunds(self) -> List[str]:
        return [entry.gerund for entry in self._entries.values()]

    def role_names(self) -> List[str]:
        names: List[str] = []
        for entry in self._entries.values():
            names.extend(role for role in entry.roles if role not in names)
        return names

    def to_json(self) -> List[Dict[str, Any]]:
        return [entry.to_json() for entry in self._entries.values()]


def lexicon_from_records(
    records: Any, allow_gerund_collisions: bool = False, source: str = "lexicon"
) -> Lexicon:
    """Build a lexicon from decoded lexicon-file records."""
    from .structparse import gerund as inflect

    if not isinstance(records, list):
        raise DynoframeError(f"{source}: top level must be an array", code="SCHEMA_ERROR")

    entries = []
    for position, record in enumerate(records):
        if not isinstance(record, dict):
            raise DynoframeError(
                f"{source}[{position}]: entry must be an object", code="SCHEMA_ERROR"
            )
        verb = record.get("verb")
        roles = record.get("roles")
        if not isinstance(verb, str) or not verb:
            raise DynoframeError(f"{source}[{position}]: verb is required", code="SCHEMA_ERROR")
        if not isinstance(roles, list) or not all(isinstance(r, str) for r in roles):
            raise DynoframeError(
                f"{source}[{position}]: roles must be an array of strings", code="SCHEMA_ERROR"
            )
        if not LEMMA_PATTERN.match(verb):
            raise DynoframeError(
                f"{source}[{position}]: verb '{verb}' must be lowercase ASCII letters",
                code="INVALID_VERB",
            )
        surface = record.get("gerund") or inflect(verb)
        entries.append(VerbEntry(verb, verb, surface, tuple(roles)))

    return Lexicon(entries, allow_gerund_collisions=allow_gerund_collisions)


def load_lexicon(path: str, allow_gerund_collisions: bool = False) -> Lexicon:
    """
    Load and validate a lexicon file.

    Args:
        path: JSON array of ``{"verb", "gerund" (optional), "roles"}`` objects
        allow_gerund_collisions: Keep verbs that share a gerund (parsing them
            is then an ``AMBIGUOUS_GERUND`` error)

    Returns:
        Lexicon

    Raises:
        DynoframeError: On malformed JSON (with line number), duplicate verbs,
            duplicate or non-uppercase roles, or colliding gerunds
    """
    lexicon = lexicon_from_records(read_json(path), allow_gerund_collisions, source=path)
    logger.info("loaded lexicon %s with %d verbs", path, len(lexicon))
    return lexicon


@dataclass(frozen=True)
class SemanticFrame:
    """A verb with ordered role fillers; ``None`` is the empty filler."""

    verb: str
    fillers: Tuple[Tuple[str, Optional[str]], ...]

    @classmethod
    def create(
        cls,
        verb: str,
        fillers: RoleFillers,
        normalizer: NounNormalizer = normalize_noun,
    ) -> "SemanticFrame":
        pairs = fillers.items() if isinstance(fillers, Mapping) else fillers
        normalized = []
        for role, noun in pairs:
            if noun is not None:
                noun = normalizer(noun)
                if not noun:
                    raise DynoframeError(
                        f"empty noun for role {role}; use null for an empty role",
                        code="INVALID_NOUN",
                    )
            normalized.append((role, noun))
        return cls(verb, tuple(normalized))

    @property
    def roles(self) -> Tuple[str, ...]:
        return tuple(role for role, _ in self.fillers)

    def noun(self, role: str) -> Optional[str]:
        for name, noun in self.fillers:
            if name == role:
                return noun
        raise KeyError(role)

    def as_dict(self) -> "OrderedDict[str, Optional[str]]":
        return OrderedDict(self.fillers)

    def to_json(self) -> Dict[str, Any]:
        return {"verb": self.verb, "roles": dict(self.fillers)}

    @classmethod
    def from_json(
        cls, data: Mapping[str, Any], lexicon: Optional[Lexicon] = None
    ) -> "SemanticFrame":
        verb = data.get("verb")
        roles = data.get("roles")
        if not isinstance(verb, str) or not isinstance(roles, dict):
            raise DynoframeError("frame needs 'verb' and 'roles'", code="SCHEMA_ERROR")
        if lexicon is not None and verb in lexicon:
            order = lexicon[verb].roles
            ordered = [(r, roles[r]) for r in order if r in roles]
            ordered += [(r, n) for r, n in roles.items() if r not in order]
            return cls.create(verb, ordered)
        return cls.create(verb, list(roles.items()))


def frame_from_roles(
    lexicon: Lexicon, verb: str, roles: Mapping[str, Optional[str]]
) -> SemanticFrame:
    """Build a frame in schema order, filling unspecified roles with the empty value."""
    entry = lexicon.entry(verb)
    extraneous = [role for role in roles if role not in entry.roles]
    if extraneous:
        raise DynoframeError(
            f"extraneous role {extraneous[0]} for verb '{verb}'", code="EXTRANEOUS_ROLE"
        )
    return SemanticFrame.create(verb, [(role, roles.get(role)) for role in entry.roles])


def validate_frame(frame: SemanticFrame, lexicon: Lexicon) -> List[str]:
    """
    Check a frame against its verb schema.

    Returns:
        An empty list iff the frame's role keys equal the schema in order,
        otherwise human-readable violations
    """
    if frame.verb not in lexicon:
        return [f"unknown verb '{frame.verb}'"]

    schema = lexicon[frame.verb].roles
    keys = frame.roles
    violations = [f"missing role {role}" for role in schema if role not in keys]
    violations += [f"extraneous role {role}" for role in keys if role not in schema]
    duplicates = sorted({role for role in keys if keys.count(role) > 1})
    violations += [f"duplicate role {role}" for role in duplicates]
    if not violations and keys != schema:
        violations.append(f"role order {list(keys)} differs from schema {list(schema)}")
    return violations


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in pixels."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        coords = (self.x1, self.y1, self.x2, self.y2)
        if not all(isinstance(c, (int, float)) and math.isfinite(c) for c in coords):
            raise DynoframeError(f"box coordinates must be finite: {coords}", code="INVALID_BOX")
        if min(coords) < 0:
            raise DynoframeError(f"box coordinates must be >= 0: {coords}", code="INVALID_BOX")
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise DynoframeError(f"degenerate box: {coords}", code="INVALID_BOX")

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def to_list(self) -> List[float]:
        return [self.x1, self.y1, self.x2, self.y2]

    @classmethod
    def from_list(cls, coords: Sequence[float]) -> "BoundingBox":
        if len(coords) != 4:
            raise DynoframeError(f"box needs 4 coordinates, got {len(coords)}", code="INVALID_BOX")
        return cls(*(float(c) for c in coords))


@dataclass(frozen=True)
class GroundedFrame:
    """A semantic frame with an optional box per role (a box requires a noun)."""

    frame: SemanticFrame
    boxes: Tuple[Tuple[str, Optional[BoundingBox]], ...]

    def __post_init__(self) -> None:
        roles = self.frame.roles
        for role, box in self.boxes:
            if role not in roles:
                raise DynoframeError(
                    f"box for role {role} not in frame of '{self.frame.verb}'",
                    code="BOX_ROLE_UNKNOWN",
                )
            if box is not None and self.frame.noun(role) is None:
                raise DynoframeError(
                    f"role {role} has a box but no noun", code="BOX_WITHOUT_NOUN"
                )

    @classmethod
    def create(
        cls, frame: SemanticFrame, boxes: Optional[Mapping[str, Optional[BoundingBox]]] = None
    ) -> "GroundedFrame":
        boxes = boxes or {}
        unknown = [role for role in boxes if role not in frame.roles]
        pairs = [(role, boxes.get(role)) for role in frame.roles]
        pairs += [(role, boxes[role]) for role in unknown]
        return cls(frame, tuple(pairs))

    def box(self, role: str) -> Optional[BoundingBox]:
        for name, box in self.boxes:
            if name == role:
                return box
        return None

    def to_json(self) -> Dict[str, Any]:
        data = self.frame.to_json()
        data["boxes"] = {role: (box.to_list() if box else None) for role, box in self.boxes}
        return data


@dataclass(frozen=True)
class HoiDetection:
    """A scored (human, object, interaction) prediction within one item."""

    human_box: BoundingBox
    object_box: BoundingBox
    hoi_class: HoiClass
    score: float
    item_id: str = ""

    def __post_init__(self) -> None:
        if not math.isfinite(self.score) or self.score < 0:
            raise DynoframeError(
                f"detection score must be finite and >= 0, got {self.score}", code="INVALID_SCORE"
            )


@dataclass(frozen=True)
class HoiGroundTruth:
    """An annotated (human, object, interaction) pair within one item."""

    human_box: BoundingBox
    object_box: BoundingBox
    hoi_class: HoiClass
    item_id: str = ""


@dataclass(frozen=True)
class HoiCatalogEntry:
    object_class: str
    action_class: str
    train_count: int

    @property
    def hoi_class(self) -> HoiClass:
        return (self.object_class, self.action_class)


class HoiCatalog:
    """The closed set of (object, action) classes with training counts."""

    def __init__(self, entries: Iterable[HoiCatalogEntry]):
        self.entries: Tuple[HoiCatalogEntry, ...] = tuple(entries)
        if not self.entries:
            raise DynoframeError("HOI catalog is empty", code="EMPTY_CATALOG")
        self._index: Dict[HoiClass, HoiCatalogEntry] = {}
        for entry in self.entries:
            if entry.train_count < 0:
                raise DynoframeError(
                    f"negative train_count for {entry.hoi_class}", code="SCHEMA_ERROR"
                )
            if entry.hoi_class in self._index:
                raise DynoframeError(
                    f"duplicate HOI class {entry.hoi_class}", code="DUPLICATE_HOI_CLASS"
                )
            self._index[entry.hoi_class] = entry

    def __contains__(self, hoi_class: object) -> bool:
        return hoi_class in self._index

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def classes(self) -> List[HoiClass]:
        return [entry.hoi_class for entry in self.entries]

    def train_count(self, hoi_class: HoiClass) -> int:
        return self._index[hoi_class].train_count

    def to_json(self) -> List[Dict[str, Any]]:
        return [
            {"object": e.object_class, "action": e.action_class, "train_count": e.train_count}
            for e in self.entries
        ]


def catalog_from_records(records: Any, source: str = "catalog") -> HoiCatalog:
    if not isinstance(records, list):
        raise DynoframeError(f"{source}: top level must be an array", code="SCHEMA_ERROR")
    entries = []
    for position, record in enumerate(records):
        try:
            obj, action, count = record["object"], record["action"], record["train_count"]
        except (KeyError, TypeError):
            raise DynoframeError(
                f"{source}[{position}]: object, action and train_count are required",
                code="SCHEMA_ERROR",
            )
        if not isinstance(count, int) or isinstance(count, bool):
            raise DynoframeError(
                f"{source}[{position}]: train_count must be an integer", code="SCHEMA_ERROR"
            )
        entries.append(HoiCatalogEntry(str(obj), str(action), count))
    return HoiCatalog(entries)


class HoiSplits(NamedTuple):
    full: FrozenSet[HoiClass]
    rare: FrozenSet[HoiClass]
    nonrare: FrozenSet[HoiClass]


def hoi_splits(catalog: HoiCatalog) -> HoiSplits:
    """Partition catalog classes into rare (< 10 training instances) and non-rare."""
    full = frozenset(catalog.classes)
    rare = frozenset(e.hoi_class for e in catalog.entries if e.train_count < RARE_THRESHOLD)
    return HoiSplits(full=full, rare=rare, nonrare=full - rare)


@dataclass(frozen=True)
class HhiAnnotation:
    """Free-text interaction with at most one occurrence of each participant slot."""

    text: str
    participants: int
    slot_positions: Tuple[Tuple[str, int], ...] = ()

    def __post_init__(self) -> None:
        for slot in SLOT_TOKENS:
            if self.text.count(slot) > 1:
                raise DynoframeError(
                    f"participant slot {slot} occurs more than once", code="DUPLICATE_SLOT"
                )
        if self.participants < 0:
            raise DynoframeError("participants must be >= 0", code="SCHEMA_ERROR")
