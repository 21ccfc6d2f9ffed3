"""
Deterministic synthetic worlds

A world is a lexicon with per-(verb, role) noun pools, unit-norm codebook
vectors for verbs and (role, noun) fillers, and the noise and corruption
settings used to derive predictions from ground truth. Every sample is
addressed by (world seed, stream, index) through SplitMix64, so any item can
be regenerated on its own and in any process.
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, NamedTuple, Optional, Tuple

import numpy as np

from .error import DynoframeError
from .frames import (
    BoundingBox,
    GroundedFrame,
    HoiCatalog,
    HoiCatalogEntry,
    HoiDetection,
    HoiGroundTruth,
    Lexicon,
    SemanticFrame,
    catalog_from_records,
    lexicon_from_records,
    normalize_noun,
)
from .metrics.boxes import IOU_THRESHOLD, pair_overlap
from .rng import SplitMix64
from .structparse import serialize_frame
from .workspace import check_schema, read_json, schema_tag

logger = logging.getLogger(__name__)

MIN_DIM = 8

STREAM_VERB_CODES = 0
STREAM_FILLER_CODES = 1
STREAM_SITUATION = 2
STREAM_NOISE = 3
STREAM_HOI = 4

# Rejection attempts before a distractor is dropped.
MAX_DISTRACTOR_TRIES = 100


def _invalid(message: str) -> DynoframeError:
    return DynoframeError(message, code="INVALID_WORLD")


@dataclass
class WorldSpec:
    """
    Settings and codebooks of a synthetic world.

    Attributes:
        lexicon: Verb schemas
        nouns: Noun pool per (verb, role)
        catalog: HOI classes scenes are drawn from
        seed: Fixes codebooks and every sample
        dim: Embedding width (at least 8)
        noise: Standard deviation of the gaussian added to embeddings
        empty_prob: Probability that a role is left empty
        canvas: Side of the square canvas boxes live on
        min_side: Smallest box side
        jitter: Bound of the uniform perturbation applied to predicted box corners
        flip_prob: Probability that a predicted noun is replaced by a wrong one
        distractors: False-positive detections added to each HOI scene
        max_pairs: Largest number of annotated pairs in one HOI scene
        miss_prob: Probability that a ground-truth pair gets no detection
    """

    lexicon: Lexicon
    nouns: Dict[Tuple[str, str], Tuple[str, ...]]
    catalog: HoiCatalog
    seed: int = 0
    dim: int = 64
    noise: float = 0.05
    empty_prob: float = 0.2
    canvas: float = 1000.0
    min_side: float = 20.0
    jitter: float = 0.0
    flip_prob: float = 0.0
    distractors: int = 0
    max_pairs: int = 2
    miss_prob: float = 0.0
    verb_codes: Dict[str, np.ndarray] = field(init=False, repr=False)
    filler_codes: Dict[Tuple[str, str], np.ndarray] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.dim < MIN_DIM:
            raise _invalid(f"embedding dim must be at least {MIN_DIM}, got {self.dim}")
        if self.noise < 0:
            raise _invalid(f"noise must be >= 0, got {self.noise}")
        for name in ("empty_prob", "flip_prob", "miss_prob"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise _invalid(f"{name} must be in [0, 1], got {value}")
        if self.min_side <= 0 or self.canvas < 2 * self.min_side:
            raise _invalid("canvas must hold two minimum-size boxes side by side")
        if self.jitter < 0 or self.distractors < 0 or self.max_pairs < 1:
            raise _invalid("jitter and distractors must be >= 0, max_pairs >= 1")
        if len(self.lexicon) == 0:
            raise _invalid("world needs at least one verb")
        for verb_id, entry in self.lexicon.items():
            for role in entry.roles:
                if not self.nouns.get((verb_id, role)):
                    raise _invalid(f"no nouns for role {role} of '{verb_id}'")
        if len(self.all_nouns) < 2:
            raise _invalid("world needs at least two distinct nouns")

        self.verb_codes = {
            verb: SplitMix64.for_index(self.seed, STREAM_VERB_CODES, i).unit_vector(self.dim)
            for i, verb in enumerate(self.lexicon)
        }
        roles = self.lexicon.role_names()
        nouns = self.all_nouns
        self.filler_codes = {}
        for verb_id, entry in self.lexicon.items():
            for role in entry.roles:
                for noun in self.nouns[(verb_id, role)]:
                    if (role, noun) not in self.filler_codes:
                        rng = SplitMix64.for_index(
                            self.seed, STREAM_FILLER_CODES, roles.index(role), nouns.index(noun)
                        )
                        self.filler_codes[(role, noun)] = rng.unit_vector(self.dim)

    @property
    def all_nouns(self) -> List[str]:
        return sorted({noun for pool in self.nouns.values() for noun in pool})

    @property
    def verbs(self) -> List[str]:
        return list(self.lexicon)

    def replace(self, **changes: Any) -> "WorldSpec":
        """A copy with some settings changed (codebooks are rebuilt)."""
        return dataclasses.replace(self, **changes)

    def filler_code(self, role: str, noun: str) -> np.ndarray:
        code = self.filler_codes.get((role, noun))
        if code is None:
            raise DynoframeError(
                f"noun '{noun}' is not in the pool of role {role}", code="UNKNOWN_NOUN"
            )
        return code

    def to_json(self) -> Dict[str, Any]:
        verbs = []
        for verb_id, entry in self.lexicon.items():
            verbs.append(
                {
                    "verb": verb_id,
                    "gerund": entry.gerund,
                    "roles": list(entry.roles),
                    "nouns": {role: list(self.nouns[(verb_id, role)]) for role in entry.roles},
                }
            )
        return {
            "schema": schema_tag("world"),
            "seed": self.seed,
            "dim": self.dim,
            "noise": self.noise,
            "empty_prob": self.empty_prob,
            "canvas": self.canvas,
            "min_side": self.min_side,
            "jitter": self.jitter,
            "flip_prob": self.flip_prob,
            "distractors": self.distractors,
            "max_pairs": self.max_pairs,
            "miss_prob": self.miss_prob,
            "verbs": verbs,
            "catalog": self.catalog.to_json(),
        }


SETTINGS = {
    "seed": int,
    "dim": int,
    "noise": float,
    "empty_prob": float,
    "canvas": float,
    "min_side": float,
    "jitter": float,
    "flip_prob": float,
    "distractors": int,
    "max_pairs": int,
    "miss_prob": float,
}


def _default_catalog(
    lexicon: Lexicon, nouns: Mapping[Tuple[str, str], Tuple[str, ...]]
) -> HoiCatalog:
    """One class per verb, acting on the first noun of its last role."""
    entries = []
    seen = set()
    for verb_id, entry in lexicon.items():
        if not entry.roles:
            continue
        obj = nouns[(verb_id, entry.roles[-1])][0]
        if (obj, verb_id) not in seen:
            seen.add((obj, verb_id))
            entries.append(HoiCatalogEntry(obj, verb_id, 20))
    if not entries:
        raise _invalid("cannot derive an HOI catalog from verbs without roles")
    return HoiCatalog(entries)


def world_from_record(data: Any, source: str = "world", **overrides: Any) -> WorldSpec:
    """
    Build a world from a decoded world file.

    Args:
        data: ``{"verbs": [...], "catalog"?, settings...}`` where each verb entry is
            ``{"verb", "gerund"?, "roles", "nouns": {ROLE: [...]}}``
        source: Name used in error messages
        **overrides: Settings that replace the file's values (None is ignored)
    """
    if not isinstance(data, dict):
        raise DynoframeError(f"{source}: top level must be an object", code="SCHEMA_ERROR")
    check_schema(data, "world", source)
    verbs = data.get("verbs")
    if not isinstance(verbs, list) or not verbs:
        raise DynoframeError(f"{source}: 'verbs' must be a non-empty array", code="SCHEMA_ERROR")
    lexicon = lexicon_from_records(verbs, source=source)

    nouns: Dict[Tuple[str, str], Tuple[str, ...]] = {}
    for record in verbs:
        pools = record.get("nouns") or {}
        if not isinstance(pools, dict):
            raise DynoframeError(
                f"{source}: 'nouns' of '{record['verb']}' must be an object", code="SCHEMA_ERROR"
            )
        for role, pool in pools.items():
            if not isinstance(pool, list) or not all(isinstance(n, str) for n in pool):
                raise DynoframeError(
                    f"{source}: nouns of {record['verb']}/{role} must be strings",
                    code="SCHEMA_ERROR",
                )
            normalized = tuple(dict.fromkeys(normalize_noun(n) for n in pool if normalize_noun(n)))
            nouns[(record["verb"], role)] = normalized

    settings: Dict[str, Any] = {}
    for name, kind in SETTINGS.items():
        value = overrides.get(name)
        if value is None:
            value = data.get(name)
        if value is not None:
            try:
                settings[name] = kind(value)
            except (TypeError, ValueError):
                raise DynoframeError(f"{source}: '{name}' must be a number", code="SCHEMA_ERROR")

    if "catalog" in data:
        catalog = catalog_from_records(data["catalog"], source=f"{source}: catalog")
    else:
        catalog = _default_catalog(lexicon, nouns)
    return WorldSpec(lexicon=lexicon, nouns=nouns, catalog=catalog, **settings)


def load_world(path: str, **overrides: Any) -> WorldSpec:
    world = world_from_record(read_json(path), source=path, **overrides)
    logger.info(
        "loaded world %s: %d verbs, dim %d, seed %d",
        path,
        len(world.lexicon),
        world.dim,
        world.seed,
    )
    return world


def sample_frame(world: WorldSpec, rng: SplitMix64) -> SemanticFrame:
    """Verb uniform over the lexicon; each role empty with ``empty_prob``, else from its pool."""
    verb = rng.choice(world.verbs)
    fillers = []
    for role in world.lexicon[verb].roles:
        if rng.random() < world.empty_prob:
            fillers.append((role, None))
        else:
            fillers.append((role, rng.choice(world.nouns[(verb, role)])))
    return SemanticFrame(verb, tuple(fillers))


def clean_embedding(world: WorldSpec, frame: SemanticFrame) -> np.ndarray:
    vector = world.verb_codes[frame.verb].copy()
    for role, noun in frame.fillers:
        if noun is not None:
            vector += world.filler_code(role, noun)
    return vector


def embed_frame(world: WorldSpec, frame: SemanticFrame, rng: SplitMix64) -> np.ndarray:
    """Sum of the verb and filler codebook vectors plus gaussian noise of std ``noise``."""
    if frame.verb not in world.verb_codes:
        raise DynoframeError(f"verb '{frame.verb}' is not in the world", code="UNKNOWN_VERB")
    return clean_embedding(world, frame) + world.noise * rng.normal_vector(world.dim)


def random_box(world: WorldSpec, rng: SplitMix64) -> BoundingBox:
    width = rng.uniform(world.min_side, world.canvas / 2)
    height = rng.uniform(world.min_side, world.canvas / 2)
    x1 = rng.uniform(0.0, world.canvas - width)
    y1 = rng.uniform(0.0, world.canvas - height)
    return BoundingBox(x1, y1, x1 + width, y1 + height)


def jitter_box(world: WorldSpec, box: BoundingBox, rng: SplitMix64) -> BoundingBox:
    """Move every corner by U(-jitter, jitter), kept on the canvas and non-degenerate."""
    if world.jitter == 0:
        return box
    j = world.jitter
    x1, y1, x2, y2 = (c + rng.uniform(-j, j) for c in box.to_list())
    x1, y1 = max(0.0, x1), max(0.0, y1)
    x2, y2 = min(world.canvas, x2), min(world.canvas, y2)
    if x2 - x1 < 1.0:
        x1 = min(x1, world.canvas - 1.0)
        x2 = x1 + 1.0
    if y2 - y1 < 1.0:
        y1 = min(y1, world.canvas - 1.0)
        y2 = y1 + 1.0
    return BoundingBox(x1, y1, x2, y2)


def _wrong_noun(
    world: WorldSpec, verb: str, role: str, noun: Optional[str], rng: SplitMix64
) -> str:
    candidates = [n for n in world.nouns[(verb, role)] if n != noun]
    if not candidates:
        candidates = [n for n in world.all_nouns if n != noun]
    return rng.choice(candidates)


def ground_frame(
    world: WorldSpec, frame: SemanticFrame, rng: SplitMix64
) -> Tuple[GroundedFrame, GroundedFrame]:
    """
    Boxes for a ground-truth frame and a corrupted prediction of it.

    The prediction keeps the verb; each role's noun is replaced by a wrong one
    with ``flip_prob`` (an empty role becomes a noun) and boxes are jittered.
    """
    gt_boxes = {role: random_box(world, rng) for role, noun in frame.fillers if noun is not None}
    gt = GroundedFrame.create(frame, gt_boxes)

    fillers, boxes = [], {}
    for role, noun in frame.fillers:
        predicted = noun
        if rng.random() < world.flip_prob:
            predicted = _wrong_noun(world, frame.verb, role, noun, rng)
        fillers.append((role, predicted))
        if predicted is None:
            continue
        if role in gt_boxes:
            boxes[role] = jitter_box(world, gt_boxes[role], rng)
        else:
            boxes[role] = random_box(world, rng)
    pred = GroundedFrame.create(SemanticFrame(frame.verb, tuple(fillers)), boxes)
    return gt, pred


def sample_grounded(world: WorldSpec, rng: SplitMix64) -> Tuple[GroundedFrame, GroundedFrame]:
    """(ground truth, noisy prediction) for a freshly sampled frame."""
    return ground_frame(world, sample_frame(world, rng), rng)


def _distractor(
    world: WorldSpec, gts: List[HoiGroundTruth], rng: SplitMix64, item_id: str
) -> Optional[HoiDetection]:
    for _ in range(MAX_DISTRACTOR_TRIES):
        hoi_class = rng.choice(world.catalog.classes)
        human, obj = random_box(world, rng), random_box(world, rng)
        score = rng.uniform(0.0, 0.5)
        if all(
            gt.hoi_class != hoi_class
            or pair_overlap(human, obj, gt.human_box, gt.object_box) < IOU_THRESHOLD
            for gt in gts
        ):
            return HoiDetection(human, obj, hoi_class, score, item_id)
    return None


def sample_hoi_scene(
    world: WorldSpec, rng: SplitMix64, item_id: str = ""
) -> Tuple[List[HoiGroundTruth], List[HoiDetection]]:
    """
    Annotated pairs and detections for one scene.

    Detected pairs are jittered copies scored in [0.5, 1); distractors never
    overlap a same-class pair and are scored in [0, 0.5).
    """
    classes = world.catalog.classes
    gts = []
    for _ in range(1 + rng.randbelow(world.max_pairs)):
        hoi_class = rng.choice(classes)
        human, obj = random_box(world, rng), random_box(world, rng)
        gts.append(HoiGroundTruth(human, obj, hoi_class, item_id))

    dets = []
    for gt in gts:
        if rng.random() < world.miss_prob:
            continue
        dets.append(
            HoiDetection(
                jitter_box(world, gt.human_box, rng),
                jitter_box(world, gt.object_box, rng),
                gt.hoi_class,
                rng.uniform(0.5, 1.0),
                item_id,
            )
        )
    for _ in range(world.distractors):
        distractor = _distractor(world, gts, rng, item_id)
        if distractor is not None:
            dets.append(distractor)
    return gts, dets


class WorldSample(NamedTuple):
    item_id: str
    frame: SemanticFrame
    embedding: np.ndarray
    grounded: GroundedFrame
    predicted: GroundedFrame
    hoi_gts: List[HoiGroundTruth]
    hoi_dets: List[HoiDetection]


def sample_id(index: int) -> str:
    return f"item{index:06d}"


def generate_sample(world: WorldSpec, index: int) -> WorldSample:
    """Sample ``index`` of the world; independent of every other index."""
    item_id = sample_id(index)
    grounded, predicted = sample_grounded(
        world, SplitMix64.for_index(world.seed, STREAM_SITUATION, index)
    )
    embedding = embed_frame(
        world, grounded.frame, SplitMix64.for_index(world.seed, STREAM_NOISE, index)
    )
    hoi_gts, hoi_dets = sample_hoi_scene(
        world, SplitMix64.for_index(world.seed, STREAM_HOI, index), item_id
    )
    return WorldSample(item_id, grounded.frame, embedding, grounded, predicted, hoi_gts, hoi_dets)


def _pair_json(pair: Any) -> Dict[str, Any]:
    return {
        "human": pair.human_box.to_list(),
        "object": pair.object_box.to_list(),
        "object_class": pair.hoi_class[0],
        "action": pair.hoi_class[1],
    }


def sample_records(world: WorldSpec, sample: WorldSample) -> Dict[str, Dict[str, Any]]:
    """The sample rendered in each of the world's output schemas."""
    item_id = sample.item_id
    frame_json = sample.frame.to_json()
    return {
        "frames": {
            "schema": schema_tag("frame"),
            "id": item_id,
            **frame_json,
            "text": str(serialize_frame(sample.frame, world.lexicon)),
        },
        "embeddings": {
            "schema": schema_tag("embedding"),
            "id": item_id,
            "label": sample.frame.verb,
            "vector": sample.embedding.tolist(),
        },
        "sir_gt": {
            "schema": schema_tag("sir-gt"),
            "id": item_id,
            "verb": sample.frame.verb,
            "frames": [{"roles": frame_json["roles"]}],
        },
        "gsr_gt": {
            "schema": schema_tag("gsr-gt"),
            "id": item_id,
            "verb": sample.frame.verb,
            "frames": [sample.grounded.to_json()],
        },
        "gsr_pred": {
            "schema": schema_tag("gsr-pred"),
            "id": item_id,
            "hypotheses": [sample.predicted.to_json()],
        },
        "hoi_gt": {
            "schema": schema_tag("hoi-gt"),
            "id": item_id,
            "pairs": [_pair_json(gt) for gt in sample.hoi_gts],
        },
        "hoi_det": {
            "schema": schema_tag("hoi-det"),
            "id": item_id,
            "detections": [dict(_pair_json(d), score=d.score) for d in sample.hoi_dets],
        },
    }


OUTPUT_KINDS = ("frames", "embeddings", "sir_gt", "gsr_gt", "gsr_pred", "hoi_gt", "hoi_det")
