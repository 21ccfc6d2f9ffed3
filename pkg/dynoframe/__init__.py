"""
dynoframe

Structured-text situation frames, a rule-based frame parser, attention feature
augmentation and an evaluation engine for situation recognition (SiR, GSR),
human-object interaction (HOI) and human-human interaction (HHI).
"""

__version__ = "0.1.0"
__author__ = "Dynoframe Team"

from .error import DynoframeError, FrameParseError
from .workspace import DynoframeWorkspace
from .dynoframe import Dynoframe
from .frames import (
    BoundingBox,
    GroundedFrame,
    HhiAnnotation,
    HoiCatalog,
    HoiDetection,
    HoiGroundTruth,
    Lexicon,
    SemanticFrame,
    VerbEntry,
)
from .metrics import EvalReport
from .services import (
    AugmentService,
    DecoderService,
    HhiService,
    HoiService,
    ParserService,
    ProbeService,
    SituationService,
    WorldService,
)
from .structparse import parse_frame, parse_hhi, serialize_frame, serialize_hhi

__all__ = [
    "Dynoframe",
    "DynoframeError",
    "FrameParseError",
    "DynoframeWorkspace",
    "BoundingBox",
    "GroundedFrame",
    "HhiAnnotation",
    "HoiCatalog",
    "HoiDetection",
    "HoiGroundTruth",
    "Lexicon",
    "SemanticFrame",
    "VerbEntry",
    "EvalReport",
    "AugmentService",
    "DecoderService",
    "HhiService",
    "HoiService",
    "ParserService",
    "ProbeService",
    "SituationService",
    "WorldService",
    "parse_frame",
    "parse_hhi",
    "serialize_frame",
    "serialize_hhi",
]
