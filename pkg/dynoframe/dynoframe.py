"""
Dynoframe Main Class
"""

import logging
import os
import platform
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Sequence, TextIO

import numpy as np
import scipy

from .config import TrainConfig, request_setting
from .error import DynoframeError, FrameParseError
from .frames import Lexicon, SemanticFrame
from .metrics.report import EvalReport
from .metrics.situation import (
    GTVERB,
    PER_ROLE,
    SCENARIOS,
    TOP1,
    TOP5,
    SirGroundTruth,
    SirPrediction,
    eval_sir,
)
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
from .services.decoder import DEMO_GRAD_CLIP, DEMO_HIDDEN_SIZE, DEMO_LEARNING_RATE
from .structparse import STRICT, TOLERANT, parse_frame
from .synthworld import sample_records
from .toylm import save_model
from .workspace import DynoframeWorkspace, canonical_json, schema_tag, write_text

logger = logging.getLogger(__name__)


def _parsed(texts: Sequence[Optional[str]], lexicon: Lexicon, mode: str) -> List[SemanticFrame]:
    frames = []
    for text in texts:
        if text is None:
            continue
        try:
            frame, _ = parse_frame(text, lexicon, mode)
        except FrameParseError:
            continue
        frames.append(frame)
    return frames


class Dynoframe:
    """
    Main Dynoframe class that provides access to all services.

    Services share one workspace, so every file a run reads ends up in its
    manifest: dynoframe.situations.evaluate_sir(...), dynoframe.hoi.evaluate(...)
    """

    def __init__(self, jobs: int = 1, stdout: Optional[TextIO] = None):
        """
        Initialize Dynoframe.

        Args:
            jobs: Worker processes for per-item work
            stdout: Stream reports are written to (defaults to standard output)
        """
        self.workspace = DynoframeWorkspace(jobs, stdout)

        self.parser = ParserService(self.workspace)
        self.situations = SituationService(self.workspace)
        self.hoi = HoiService(self.workspace)
        self.hhi = HhiService(self.workspace)
        self.probes = ProbeService(self.workspace)
        self.decoders = DecoderService(self.workspace)
        self.augment = AugmentService(self.workspace)
        self.worlds = WorldService(self.workspace)

    def run_pipeline(self, pipeline_config: Dict[str, Any]) -> EvalReport:
        """
        Run the end-to-end workflow (world + decoder training + generation + parsing + SiR).

        Items ``0 .. n_train-1`` of the world train the decoder; the next
        ``n_eval`` items are generated for, parsed in tolerant mode and scored
        in the top-1, top-5 and ground-truth-verb scenarios.

        Args:
            pipeline_config: Configuration containing:
                - world: World spec file
                - seed: World and training seed
                - n_train, n_eval: Item counts (default 1000 and 200)
                - epochs: Training epochs (default 30)
                - value_mode: ``per_role`` (default) or ``any_role``
                - top_k, max_len: Generation settings (default 5 and 64)
                - workdir: Optional directory for the model, generations and ground truth

        Returns:
            EvalReport with parse rates and the SiR metrics of every scenario
        """
        world_path = pipeline_config.get("world")
        if not world_path:
            raise ValueError("world is required")

        try:
            seed = pipeline_config.get("seed")
            world = self.worlds.load(world_path, seed=seed, noise=pipeline_config.get("noise"))
            n_train = int(request_setting(pipeline_config, "n_train", 1000))
            n_eval = int(request_setting(pipeline_config, "n_eval", 200))
            value_mode = pipeline_config.get("value_mode") or PER_ROLE
            top_k = int(request_setting(pipeline_config, "top_k", 5))
            max_len = int(request_setting(pipeline_config, "max_len", 64))
            if n_eval < 1:
                raise ValueError("n_eval must be at least 1")

            config = TrainConfig(
                epochs=int(request_setting(pipeline_config, "epochs", 30)),
                learning_rate=float(
                    request_setting(pipeline_config, "learning_rate", DEMO_LEARNING_RATE)
                ),
                hidden_size=int(
                    request_setting(pipeline_config, "hidden_size", DEMO_HIDDEN_SIZE)
                ),
                batch_size=int(request_setting(pipeline_config, "batch_size", 16)),
                grad_clip=DEMO_GRAD_CLIP,
                seed=world.seed,
            )
            logger.info(
                "pipeline: world seed %d, %d train / %d eval items", world.seed, n_train, n_eval
            )
            result = self.decoders.fit(world, n_train, config)

            samples = self.decoders.samples(world, range(n_train, n_train + n_eval))
            items = [(s.item_id, s.embedding, s.frame.verb) for s in samples]
            generations = self.decoders.decode(
                result.model, world.lexicon, items, top_k=top_k, max_len=max_len
            )

            lexicon = world.lexicon
            strict_ok = sum(1 for g in generations if _parsed([g["text"]], lexicon, STRICT))
            tolerant_ok = sum(1 for g in generations if _parsed([g["text"]], lexicon, TOLERANT))
            hypotheses = {
                TOP1: [_parsed([g["text"]], lexicon, TOLERANT) for g in generations],
                TOP5: [
                    _parsed(g.get("hypotheses") or [g["text"]], lexicon, TOLERANT)
                    for g in generations
                ],
                GTVERB: [_parsed([g["forced"]], lexicon, TOLERANT) for g in generations],
            }
            gts = [SirGroundTruth(s.item_id, s.frame.verb, (s.frame,)) for s in samples]

            metrics: Dict[str, Optional[float]] = {
                "strict_parse_rate": strict_ok / n_eval,
                "tolerant_parse_rate": tolerant_ok / n_eval,
            }
            for scenario in SCENARIOS:
                preds = [
                    SirPrediction(s.item_id, tuple(frames))
                    for s, frames in zip(samples, hypotheses[scenario])
                ]
                report = eval_sir(
                    preds, gts, scenario, value_mode, mapper=self.workspace.map_items
                )
                for name, value in report.metrics.items():
                    metrics[f"{scenario}_{name}"] = value

            workdir = pipeline_config.get("workdir")
            if workdir:
                self._write_workdir(workdir, result.model, world, samples, generations)
        except Exception as e:
            if isinstance(e, (DynoframeError, ValueError)):
                raise
            raise DynoframeError(f"Pipeline failed: {str(e)}", status=2, code="PIPELINE_ERROR")

        return EvalReport(
            task="pipeline",
            scenario=value_mode,
            metrics=metrics,
            details={
                "world_seed": world.seed,
                "train_items": n_train,
                "eval_items": n_eval,
                "epochs": config.epochs,
                "hidden_size": config.hidden_size,
                "parameters": result.model.parameter_count(),
                "first_loss": result.losses[0] if result.losses else None,
                "final_loss": result.losses[-1] if result.losses else None,
                "value_mode": value_mode,
            },
        )

    def _write_workdir(
        self, workdir: str, model: Any, world: Any, samples: Any, generations: Any
    ) -> None:
        os.makedirs(workdir, exist_ok=True)
        save_model(
            os.path.join(workdir, "model.bin"), model, metadata={"lexicon": world.lexicon.to_json()}
        )
        self.workspace.write_jsonl(os.path.join(workdir, "generations.jsonl"), generations)
        self.workspace.write_jsonl(
            os.path.join(workdir, "sir_gt.jsonl"),
            (sample_records(world, s)["sir_gt"] for s in samples),
        )
        write_text(os.path.join(workdir, "lexicon.json"), canonical_json(world.lexicon.to_json()))

    def manifest(
        self, subcommand: str, arguments: Dict[str, Any], seed: Optional[int] = None
    ) -> Dict[str, Any]:
        """
        Machine-readable record of a run: inputs and their hashes, seed and versions.

        The timestamp lives here and never in a report.
        """
        from . import __version__

        return {
            "schema": schema_tag("manifest"),
            "tool": "dynoframe",
            "version": __version__,
            "subcommand": subcommand,
            "arguments": arguments,
            "seed": seed,
            "inputs": self.workspace.input_hashes(),
            "versions": {
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
            },
            "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        }

    # Context manager support
    def __enter__(self) -> "Dynoframe":
        return self

    def __exit__(self, exc_type: Any, exc_val: Any, exc_tb: Any) -> None:
        self.close()

    def close(self) -> None:
        """Shut down the shared worker pool."""
        self.workspace.close()

    def __repr__(self) -> str:
        return f"Dynoframe(jobs={self.workspace.jobs})"
