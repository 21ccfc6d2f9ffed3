"""
Teacher-forced decoder training with AdamW
"""

import logging
import math
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ..config import TrainConfig
from ..error import DynoframeError, INTERNAL_ERROR
from .decoder import DecoderModel, lm_loss, lm_loss_grad
from .vocab import BOS_ID, PAD_ID, Vocabulary

logger = logging.getLogger(__name__)

EpochCallback = Callable[[str, int, float], None]


class DecoderExample(NamedTuple):
    image: np.ndarray
    tokens: List[int]


class TrainResult(NamedTuple):
    model: DecoderModel
    losses: List[float]
    phases: List[str]


class AdamW:
    """Adam with decoupled weight decay, updating arrays in place."""

    def __init__(
        self,
        params: Dict[str, np.ndarray],
        learning_rate: float,
        betas: Tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.01,
    ):
        self.params = params
        self.learning_rate = learning_rate
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {name: np.zeros_like(p) for name, p in params.items()}
        self.v = {name: np.zeros_like(p) for name, p in params.items()}

    def step(self, grads: Dict[str, np.ndarray]) -> None:
        self.t += 1
        lr = self.learning_rate
        correction1 = 1.0 - self.beta1 ** self.t
        correction2 = 1.0 - self.beta2 ** self.t
        for name, param in self.params.items():
            grad = grads[name]
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * grad
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * grad * grad
            m_hat = self.m[name] / correction1
            v_hat = self.v[name] / correction2
            param *= 1.0 - lr * self.weight_decay
            param -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


def clip_gradients(grads: Dict[str, np.ndarray], max_norm: Optional[float]) -> float:
    """Scale gradients in place to a global L2 norm of at most ``max_norm``; returns the norm."""
    norm = math.sqrt(math.fsum(float(np.sum(g * g)) for g in grads.values()))
    if max_norm is not None and norm > max_norm > 0:
        scale = max_norm / norm
        for grad in grads.values():
            grad *= scale
    return norm


def make_batch(
    examples: Sequence[DecoderExample], indices: Sequence[int]
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(images, inputs, targets) with targets PAD-padded and inputs shifted right behind BOS."""
    length = max(len(examples[i].tokens) for i in indices)
    targets = np.full((len(indices), length), PAD_ID, dtype=np.int64)
    for row, i in enumerate(indices):
        tokens = examples[i].tokens
        targets[row, : len(tokens)] = tokens
    inputs = np.empty_like(targets)
    inputs[:, 0] = BOS_ID
    inputs[:, 1:] = targets[:, :-1]
    images = np.stack([np.asarray(examples[i].image, dtype=np.float64) for i in indices])
    return images, inputs, targets


def evaluate_loss(
    model: DecoderModel, examples: Sequence[DecoderExample], batch_size: int = 64
) -> float:
    """Mean per-sequence loss without dropout."""
    totals = []
    for start in range(0, len(examples), batch_size):
        index = range(start, min(start + batch_size, len(examples)))
        images, inputs, targets = make_batch(examples, index)
        logits, _ = model.forward(images, inputs)
        totals.append(lm_loss(logits, targets))
    return math.fsum(totals) / max(len(examples), 1)


def _run_phase(
    model: DecoderModel,
    examples: Sequence[DecoderExample],
    epochs: int,
    learning_rate: float,
    config: TrainConfig,
    rng: np.random.Generator,
    phase: str,
    on_epoch: Optional[EpochCallback],
) -> List[float]:
    params = model.trainable_parameters()
    optimizer = AdamW(params, learning_rate, config.betas, config.eps, config.weight_decay)
    dropout_rng = rng if model.adapters else None
    losses = []
    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(examples))
        totals = []
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            images, inputs, targets = make_batch(examples, batch)
            logits, cache = model.forward(images, inputs, dropout_rng)
            loss = lm_loss(logits, targets)
            if not math.isfinite(loss):
                raise DynoframeError(
                    f"{phase} loss became {loss} at epoch {epoch}; lower the learning rate "
                    "or set a gradient clip",
                    status=INTERNAL_ERROR,
                    code="NAN_LOSS",
                )
            grads = model.backward(cache, lm_loss_grad(logits, targets) / len(batch))
            clip_gradients(grads, config.grad_clip)
            optimizer.step(grads)
            totals.append(loss)

        mean_loss = math.fsum(totals) / len(examples)
        losses.append(mean_loss)
        logger.info("%s epoch %d/%d loss %.6f", phase, epoch, epochs, mean_loss)
        if on_epoch is not None:
            on_epoch(phase, epoch, mean_loss)
    return losses


def train_decoder(
    examples: Sequence[DecoderExample],
    vocab: Vocabulary,
    config: TrainConfig,
    base: Optional[DecoderModel] = None,
    on_epoch: Optional[EpochCallback] = None,
) -> TrainResult:
    """
    Train the decoder by teacher-forced minimisation of ``lm_loss``.

    A fresh model is trained on every parameter for ``config.epochs``. The
    fine-tuning phase then runs ``config.finetune_epochs`` more epochs at
    ``config.finetune_learning_rate``, on rank-``config.lora_rank`` adapters
    when the rank is positive (merged back into the weights afterwards). When
    ``base`` is given the first phase is skipped and only fine-tuning runs.

    Args:
        examples: (image embedding, token ids ending in EOS) pairs
        vocab: Vocabulary the token ids refer to
        config: Training settings
        base: Optional trained model to fine-tune (left unmodified)
        on_epoch: Called with (phase, epoch, mean loss) after every epoch

    Returns:
        TrainResult with the model and the per-epoch mean loss trace

    Raises:
        DynoframeError: ``EMPTY_DATASET``, ``SHAPE_MISMATCH`` or ``NAN_LOSS``
    """
    if not examples:
        raise DynoframeError("cannot train on an empty dataset", code="EMPTY_DATASET")
    image_dim = len(examples[0].image)
    if any(len(example.image) != image_dim for example in examples):
        raise DynoframeError("image embeddings differ in width", code="SHAPE_MISMATCH")
    if any(not example.tokens for example in examples):
        raise DynoframeError("every example needs at least one target token", code="EMPTY_DATASET")

    rng = np.random.default_rng(config.seed)
    losses: List[float] = []
    phases: List[str] = []
    if base is None:
        model = DecoderModel.init(vocab, image_dim, config.hidden_size, config.seed)
        logger.info(
            "training decoder: %d examples, %d parameters, seed %d",
            len(examples),
            model.parameter_count(),
            config.seed,
        )
        losses += _run_phase(
            model, examples, config.epochs, config.learning_rate, config, rng, "train", on_epoch
        )
        phases += ["train"] * config.epochs
    else:
        model = base.copy()

    if config.finetune_epochs:
        if config.lora_rank:
            model.attach_adapters(
                config.lora_rank, config.lora_alpha, config.lora_dropout, config.seed
            )
        losses += _run_phase(
            model,
            examples,
            config.finetune_epochs,
            config.finetune_learning_rate,
            config,
            rng,
            "finetune",
            on_epoch,
        )
        phases += ["finetune"] * config.finetune_epochs
        model.merge_adapters()

    return TrainResult(model, losses, phases)
