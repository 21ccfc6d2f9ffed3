"""
Dynoframe Services
"""

from .augment import AugmentService
from .decoder import DecoderService
from .hhi import HhiService
from .hoi import HoiService
from .parser import ParserService
from .probe import ProbeService
from .situation import SituationService
from .world import WorldService

__all__ = [
    "AugmentService",
    "DecoderService",
    "HhiService",
    "HoiService",
    "ParserService",
    "ProbeService",
    "SituationService",
    "WorldService",
]
