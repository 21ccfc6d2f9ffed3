"""
Decoder Service
"""

import functools
import logging
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..config import LORA_DROPOUT, TrainConfig, request_setting
from ..error import DynoframeError
from ..frames import VERB_MARKER, Lexicon, lexicon_from_records
from ..metrics.report import EvalReport
from ..synthworld import WorldSample, WorldSpec, generate_sample, load_world
from ..structparse import serialize_frame
from ..toylm import (
    DecoderExample,
    DecoderModel,
    TrainResult,
    Vocabulary,
    generate,
    load_model,
    save_model,
    top_k_generations,
    train_decoder,
)
from ..toylm.decoder import ADAPTED_WEIGHTS
from ..workspace import DynoframeWorkspace, schema_tag

logger = logging.getLogger(__name__)

# Learning-rate and size settings for training the demo decoder from scratch.
DEMO_LEARNING_RATE = 5e-3
DEMO_HIDDEN_SIZE = 128
DEMO_GRAD_CLIP = 5.0
LOSS_RANGE = (0.0, math.inf)


def world_vocabulary(world: WorldSpec) -> Vocabulary:
    """Every token a frame of ``world`` can serialize to."""
    tokens = {VERB_MARKER}
    for verb_id, entry in world.lexicon.items():
        tokens.add(entry.gerund)
        for role in entry.roles:
            tokens.add(role)
            for noun in world.nouns[(verb_id, role)]:
                tokens.update(noun.split())
    return Vocabulary(tokens)


def examples_from_samples(
    samples: Sequence[WorldSample], lexicon: Lexicon, vocab: Vocabulary
) -> List[DecoderExample]:
    return [
        DecoderExample(s.embedding, vocab.encode(str(serialize_frame(s.frame, lexicon))))
        for s in samples
    ]


def decode_item(
    model: DecoderModel,
    lexicon: Lexicon,
    top_k: int,
    max_len: int,
    item: Tuple[str, np.ndarray, Optional[str]],
) -> Dict[str, Any]:
    """
    Generations for one image embedding.

    ``text`` is the plain greedy generation, ``hypotheses`` the verb-ranked
    top-k completions and ``forced`` the completion after ``VERB <gerund>`` of
    the item's label (None when the label is unknown).
    """
    item_id, image, label = item
    vocab = model.vocab
    record: Dict[str, Any] = {
        "schema": schema_tag("generation"),
        "id": item_id,
        "text": vocab.decode(generate(model, image, max_len)),
    }
    if top_k > 1:
        ranked = top_k_generations(model, image, VERB_MARKER, lexicon.gerunds(), top_k, max_len)
        record["hypotheses"] = [vocab.decode(ids) for ids in ranked]
    forced = None
    if label is not None and label in lexicon:
        gerund = lexicon[label].gerund
        if VERB_MARKER in vocab and gerund in vocab:
            prefix = (vocab.token_id(VERB_MARKER), vocab.token_id(gerund))
            forced = vocab.decode(generate(model, image, max_len, prefix=prefix))
    record["forced"] = forced
    return record


def adapter_parameter_count(model: DecoderModel, rank: int) -> int:
    """r * (m + n) for every adapted matrix."""
    return sum(rank * sum(model.params[name].shape) for name in ADAPTED_WEIGHTS)


class DecoderService:
    """Service for training the demo decoder and generating structured text."""

    def __init__(self, workspace: DynoframeWorkspace) -> None:
        self.workspace = workspace

    def load_world(self, path: str, **overrides: Any) -> WorldSpec:
        self.workspace.track(path)
        return load_world(path, **overrides)

    def samples(self, world: WorldSpec, indices: Sequence[int]) -> List[WorldSample]:
        return self.workspace.map_items(functools.partial(generate_sample, world), list(indices))

    def fit(
        self,
        world: WorldSpec,
        n: int,
        config: TrainConfig,
        base: Optional[DecoderModel] = None,
    ) -> TrainResult:
        """Train on world items ``0 .. n-1``."""
        if n < 1:
            raise ValueError("n must be at least 1")
        vocab = base.vocab if base is not None else world_vocabulary(world)
        examples = examples_from_samples(self.samples(world, range(n)), world.lexicon, vocab)

        def log_epoch(phase: str, epoch: int, loss: float) -> None:
            logger.info("%s epoch %d: mean loss %.6f", phase, epoch, loss)

        return train_decoder(examples, vocab, config, base=base, on_epoch=log_epoch)

    def train(self, train_data: Dict[str, Any]) -> EvalReport:
        """
        Train (or adapter-fine-tune) the demo decoder on a synthetic world.

        Args:
            train_data: Request containing:
                - world: World spec file
                - output: Model file to write
                - n: Training items (default 1000)
                - seed: World and training seed
                - epochs: Training epochs (fine-tuning epochs with ``base``)
                - base: Optional model file to fine-tune
                - lora_rank, lora_alpha, lora_dropout: Adapter settings (rank 0 = full)
                - learning_rate, hidden_size, batch_size, grad_clip, weight_decay

        Returns:
            EvalReport with the first and final epoch losses
        """
        required_fields = ["world", "output"]

        for field in required_fields:
            if field not in train_data or not train_data[field]:
                raise ValueError(f"{field} is required")

        seed = train_data.get("seed")
        world = self.load_world(train_data["world"], seed=seed)
        seed = world.seed if seed is None else int(seed)
        n = int(request_setting(train_data, "n", 1000))
        epochs = int(request_setting(train_data, "epochs", 30))
        rank = int(request_setting(train_data, "lora_rank", 0))
        base = None
        if train_data.get("base"):
            self.workspace.track(train_data["base"])
            base, _ = load_model(train_data["base"])

        shared = dict(
            weight_decay=float(request_setting(train_data, "weight_decay", 0.01)),
            batch_size=int(request_setting(train_data, "batch_size", 16)),
            seed=seed,
            grad_clip=request_setting(train_data, "grad_clip", DEMO_GRAD_CLIP),
            lora_rank=rank,
            lora_alpha=float(request_setting(train_data, "lora_alpha", 2.0 * max(rank, 1))),
            lora_dropout=float(request_setting(train_data, "lora_dropout", LORA_DROPOUT)),
        )
        if base is None:
            learning_rate = float(request_setting(train_data, "learning_rate", DEMO_LEARNING_RATE))
            finetune_epochs = request_setting(train_data, "finetune_epochs", epochs if rank else 0)
            config = TrainConfig(
                epochs=epochs,
                learning_rate=learning_rate,
                finetune_epochs=int(finetune_epochs),
                finetune_learning_rate=learning_rate / 10,
                hidden_size=int(request_setting(train_data, "hidden_size", DEMO_HIDDEN_SIZE)),
                **shared,
            )
        else:
            config = TrainConfig(
                epochs=0,
                finetune_epochs=epochs,
                finetune_learning_rate=float(
                    request_setting(train_data, "learning_rate", DEMO_LEARNING_RATE / 10)
                ),
                hidden_size=base.hidden_size,
                **shared,
            )

        result = self.fit(world, n, config, base)
        trainable = (
            adapter_parameter_count(result.model, rank)
            if rank and config.finetune_epochs
            else result.model.parameter_count()
        )
        save_model(
            train_data["output"],
            result.model,
            metadata={
                "lexicon": world.lexicon.to_json(),
                "world_seed": world.seed,
                "train_items": n,
                "config": config.to_dict(),
                "losses": result.losses,
                "phases": result.phases,
            },
        )

        metrics: Dict[str, Optional[float]] = {
            "first_loss": result.losses[0] if result.losses else None,
            "final_loss": result.losses[-1] if result.losses else None,
        }
        return EvalReport(
            task="demo-train",
            metrics=metrics,
            details={
                "model": train_data["output"],
                "seed": seed,
                "train_items": n,
                "epochs": epochs,
                "phases": sorted(set(result.phases)),
                "parameters": result.model.parameter_count(),
                "trainable_parameters": trainable,
                "lora_rank": rank,
            },
            ranges={name: LOSS_RANGE for name in metrics},
        )

    def generate(self, generate_data: Dict[str, Any]) -> List[Dict[str, Any]]:
        """
        Generate structured text for image embeddings.

        Args:
            generate_data: Request containing:
                - model: Model file
                - embeddings: Embedding JSONL (``id``, ``vector``, optional ``label``)
                - lexicon: Lexicon file (defaults to the one stored with the model)
                - max_len: Generation cap (default 64)
                - top_k: Verb-ranked hypotheses per item (default 1 = greedy only)
                - output: Optional JSONL file; records go to standard output otherwise

        Returns:
            One generation record per embedding
        """
        required_fields = ["model", "embeddings"]

        for field in required_fields:
            if field not in generate_data or not generate_data[field]:
                raise ValueError(f"{field} is required")

        self.workspace.track(generate_data["model"])
        model, metadata = load_model(generate_data["model"])
        if generate_data.get("lexicon"):
            lexicon_records = self.workspace.read_json(generate_data["lexicon"])
        elif "lexicon" in metadata:
            lexicon_records = metadata["lexicon"]
        else:
            raise ValueError("lexicon is required")
        lexicon = lexicon_from_records(lexicon_records)

        items = []
        for record in self.workspace.read_jsonl(generate_data["embeddings"], "embedding"):
            if "id" not in record or "vector" not in record:
                raise DynoframeError(
                    "embedding records need 'id' and 'vector'", code="SCHEMA_ERROR"
                )
            image = np.asarray(record["vector"], dtype=np.float64)
            if image.shape != (model.image_dim,):
                raise DynoframeError(
                    f"embedding {record['id']} has shape {image.shape}, model expects "
                    f"({model.image_dim},)",
                    code="SHAPE_MISMATCH",
                )
            label = record.get("label")
            items.append((str(record["id"]), image, None if label is None else str(label)))

        records = self.decode(
            model,
            lexicon,
            items,
            top_k=int(request_setting(generate_data, "top_k", 1)),
            max_len=int(request_setting(generate_data, "max_len", 64)),
        )
        output = generate_data.get("output")
        if output:
            self.workspace.write_jsonl(output, records)
        else:
            for record in records:
                self.workspace.emit(self.workspace.dumps(record))
        return records

    def decode(
        self,
        model: DecoderModel,
        lexicon: Lexicon,
        items: Sequence[Tuple[str, np.ndarray, Optional[str]]],
        top_k: int = 1,
        max_len: int = 64,
    ) -> List[Dict[str, Any]]:
        if max_len < 1:
            raise ValueError("max_len must be at least 1")
        func = functools.partial(decode_item, model, lexicon, top_k, max_len)
        return self.workspace.map_items(func, list(items))
