"""
World Service
"""

import functools
import logging
from typing import Any, Dict, List

from ..config import request_setting
from ..synthworld import (
    OUTPUT_KINDS,
    SETTINGS,
    WorldSpec,
    generate_sample,
    load_world,
    sample_records,
)
from ..workspace import DynoframeWorkspace, canonical_json, write_text

logger = logging.getLogger(__name__)


def world_item_records(world: WorldSpec, index: int) -> Dict[str, Dict[str, Any]]:
    return sample_records(world, generate_sample(world, index))


class WorldService:
    """Service for generating synthetic worlds."""

    def __init__(self, workspace: DynoframeWorkspace) -> None:
        self.workspace = workspace

    def load(self, path: str, **overrides: Any) -> WorldSpec:
        self.workspace.track(path)
        return load_world(path, **overrides)

    def generate(self, world_data: Dict[str, Any]) -> Dict[str, Any]:
        """
        Write a synthetic world's data files.

        Args:
            world_data: Request containing:
                - spec: World spec file
                - output_prefix: Files are written to ``<prefix>_<kind>.jsonl``
                - n: Items to generate (default 1000)
                - start: Index of the first item (default 0)
                - seed, noise, flip_prob, jitter, ...: Overrides of the world file's settings

        Returns:
            Dictionary with the item count and the written file paths
        """
        required_fields = ["spec", "output_prefix"]

        for field in required_fields:
            if field not in world_data or not world_data[field]:
                raise ValueError(f"{field} is required")

        overrides = {name: world_data.get(name) for name in SETTINGS}
        world = self.load(world_data["spec"], **overrides)
        n = int(request_setting(world_data, "n", 1000))
        start = int(request_setting(world_data, "start", 0))
        if n < 1 or start < 0:
            raise ValueError("n must be at least 1 and start non-negative")

        records = self.items(world, start, n)
        prefix = world_data["output_prefix"]
        files = {}
        for kind in OUTPUT_KINDS:
            path = f"{prefix}_{kind}.jsonl"
            self.workspace.write_jsonl(path, (item[kind] for item in records))
            files[kind] = path
        for kind, data in (
            ("world", world.to_json()),
            ("lexicon", world.lexicon.to_json()),
            ("catalog", world.catalog.to_json()),
        ):
            path = f"{prefix}_{kind}.json"
            write_text(path, canonical_json(data))
            files[kind] = path

        logger.info("generated %d items of world seed %d under %s", n, world.seed, prefix)
        return {"items": n, "seed": world.seed, "files": files}

    def items(self, world: WorldSpec, start: int, n: int) -> List[Dict[str, Dict[str, Any]]]:
        return self.workspace.map_items(
            functools.partial(world_item_records, world), list(range(start, start + n))
        )
