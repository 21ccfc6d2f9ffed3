"""
Image-conditioned recurrent decoder for structured text

A single tanh recurrent layer in row-vector convention. The projected image
embedding ``c = image @ img_proj`` is the first input token and is added to
every word embedding afterwards:

    h_0 = tanh(c @ w_in + b_h)
    h_t = tanh((embed[x_t] + c) @ w_in + h_{t-1} @ w_rec + b_h)
    logits_t = h_t @ w_out + b_out

Inputs are ``BOS t_1 ... t_{L-1}`` and targets ``t_1 ... t_L``.
"""

import copy
import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..error import DynoframeError
from .lora import LoraAdapter, lora_backward, lora_forward, lora_merge
from .vocab import BOS_ID, EOS_ID, PAD_ID, Vocabulary

logger = logging.getLogger(__name__)

PARAM_NAMES = ("embed", "img_proj", "w_in", "w_rec", "b_h", "w_out", "b_out")
ADAPTED_WEIGHTS = ("w_rec", "w_out")


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _check_targets(logits: np.ndarray, targets: np.ndarray) -> None:
    if logits.shape[:-1] != targets.shape:
        raise DynoframeError(
            f"logits {logits.shape} do not align with targets {targets.shape}",
            code="LENGTH_MISMATCH",
        )


def lm_loss(logits: Any, targets: Any) -> float:
    """
    Total negative log-likelihood of ``targets`` under ``logits``.

    Args:
        logits: Array of shape (..., L, V)
        targets: Token ids of shape (..., L); PAD positions are masked out

    Returns:
        Non-negative sum of ``-log softmax(logits)[target]`` over non-PAD positions

    Raises:
        DynoframeError: ``LENGTH_MISMATCH`` if shapes do not align
    """
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.int64)
    _check_targets(logits, targets)
    log_probs = _log_softmax(logits)
    picked = np.take_along_axis(log_probs, targets[..., None], axis=-1)[..., 0]
    return float(0.0 - picked[targets != PAD_ID].sum())


def lm_loss_grad(logits: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Gradient of ``lm_loss`` with respect to the logits."""
    _check_targets(logits, targets)
    probs = np.exp(_log_softmax(logits))
    probs[..., :] -= np.eye(logits.shape[-1])[targets]
    return probs * (targets != PAD_ID)[..., None]


class DecoderModel:
    """Parameters and forward/backward passes of the structured-text decoder."""

    def __init__(self, vocab: Vocabulary, params: Dict[str, np.ndarray]):
        missing = [name for name in PARAM_NAMES if name not in params]
        if missing:
            raise DynoframeError(f"missing decoder parameters {missing}", code="BAD_MODEL_FILE")
        self.vocab = vocab
        self.params = params
        self.adapters: Dict[str, LoraAdapter] = {}
        if params["embed"].shape[0] != len(vocab) or params["w_out"].shape[1] != len(vocab):
            raise DynoframeError(
                "decoder parameter shapes do not match the vocabulary", code="SHAPE_MISMATCH"
            )

    @classmethod
    def init(cls, vocab: Vocabulary, image_dim: int, hidden_size: int, seed: int) -> "DecoderModel":
        if image_dim < 1 or hidden_size < 1:
            raise ValueError("image_dim and hidden_size must be positive")
        rng = np.random.default_rng(seed)
        v, h, d = len(vocab), hidden_size, image_dim
        params = {
            "embed": rng.normal(0.0, 0.1, size=(v, h)),
            "img_proj": rng.normal(0.0, 1.0 / np.sqrt(d), size=(d, h)),
            "w_in": rng.normal(0.0, 1.0 / np.sqrt(h), size=(h, h)),
            "w_rec": rng.normal(0.0, 0.5 / np.sqrt(h), size=(h, h)),
            "b_h": np.zeros(h),
            "w_out": rng.normal(0.0, 1.0 / np.sqrt(h), size=(h, v)),
            "b_out": np.zeros(v),
        }
        return cls(vocab, params)

    @property
    def hidden_size(self) -> int:
        return int(self.params["w_in"].shape[0])

    @property
    def image_dim(self) -> int:
        return int(self.params["img_proj"].shape[0])

    def parameter_count(self) -> int:
        return sum(int(p.size) for p in self.params.values())

    def copy(self) -> "DecoderModel":
        clone = DecoderModel(self.vocab, {k: v.copy() for k, v in self.params.items()})
        clone.adapters = copy.deepcopy(self.adapters)
        return clone

    def attach_adapters(self, rank: int, alpha: float, dropout: float, seed: int) -> None:
        """Freeze the base weights and put a fresh adapter on each adapted matrix."""
        rng = np.random.default_rng(seed)
        for name in ADAPTED_WEIGHTS:
            self.adapters[name] = LoraAdapter.create(
                self.params[name].T, rank, alpha=alpha, dropout=dropout, rng=rng
            )
        logger.info("attached rank-%d adapters to %s", rank, ", ".join(ADAPTED_WEIGHTS))

    def merge_adapters(self) -> None:
        for name, adapter in self.adapters.items():
            self.params[name] = lora_merge(adapter).T.copy()
        self.adapters = {}

    def trainable_parameters(self) -> Dict[str, np.ndarray]:
        """Arrays updated by training: the adapters when attached, else every parameter."""
        if not self.adapters:
            return dict(self.params)
        trainable = {}
        for name, adapter in self.adapters.items():
            trainable[f"{name}.a"] = adapter.a
            trainable[f"{name}.b"] = adapter.b
        return trainable

    def _mask(self, name: str, shape: Tuple[int, ...], rng: Optional[np.random.Generator]):
        adapter = self.adapters.get(name)
        if adapter is None or rng is None:
            return None
        return adapter.dropout_mask(shape, rng)

    def _linear(self, name: str, u: np.ndarray, mask: Optional[np.ndarray]) -> np.ndarray:
        adapter = self.adapters.get(name)
        if adapter is None:
            return u @ self.params[name]
        return lora_forward(adapter, u, mask)

    def _linear_backward(
        self,
        name: str,
        u: np.ndarray,
        grad_out: np.ndarray,
        mask: Optional[np.ndarray],
        grads: Dict[str, np.ndarray],
    ) -> np.ndarray:
        adapter = self.adapters.get(name)
        if adapter is None:
            grads[name] += u.T @ grad_out
            return grad_out @ self.params[name].T
        grad_u, grad_a, grad_b = lora_backward(adapter, u, grad_out, mask)
        grads[f"{name}.a"] += grad_a
        grads[f"{name}.b"] += grad_b
        return grad_u

    def forward(
        self,
        images: np.ndarray,
        inputs: np.ndarray,
        rng: Optional[np.random.Generator] = None,
    ) -> Tuple[np.ndarray, Dict[str, Any]]:
        """
        Teacher-forced pass.

        Args:
            images: (B, d) image embeddings
            inputs: (B, L) input token ids
            rng: Generator for adapter dropout; None disables dropout

        Returns:
            (logits of shape (B, L, V), cache for ``backward``)
        """
        images = np.asarray(images, dtype=np.float64)
        if images.ndim != 2 or images.shape[1] != self.image_dim:
            raise DynoframeError(
                f"expected image embeddings of width {self.image_dim}, got {images.shape}",
                code="SHAPE_MISMATCH",
            )
        p = self.params
        c = images @ p["img_proj"]
        hs = [np.tanh(c @ p["w_in"] + p["b_h"])]
        xs, rec_masks, out_masks, logits = [], [], [], []
        for step in range(inputs.shape[1]):
            x = p["embed"][inputs[:, step]] + c
            rec_mask = self._mask("w_rec", hs[-1].shape, rng)
            h = np.tanh(x @ p["w_in"] + self._linear("w_rec", hs[-1], rec_mask) + p["b_h"])
            out_mask = self._mask("w_out", h.shape, rng)
            logits.append(self._linear("w_out", h, out_mask) + p["b_out"])
            xs.append(x)
            hs.append(h)
            rec_masks.append(rec_mask)
            out_masks.append(out_mask)

        cache = {
            "images": images,
            "inputs": inputs,
            "c": c,
            "hs": hs,
            "xs": xs,
            "rec_masks": rec_masks,
            "out_masks": out_masks,
        }
        return np.stack(logits, axis=1), cache

    def backward(self, cache: Dict[str, Any], dlogits: np.ndarray) -> Dict[str, np.ndarray]:
        """Backpropagation through time; returns gradients keyed like ``trainable_parameters``."""
        p = self.params
        grads = {name: np.zeros_like(value) for name, value in p.items()}
        for name, adapter in self.adapters.items():
            grads[f"{name}.a"] = np.zeros_like(adapter.a)
            grads[f"{name}.b"] = np.zeros_like(adapter.b)

        hs, xs, inputs = cache["hs"], cache["xs"], cache["inputs"]
        dc = np.zeros_like(cache["c"])
        dh_next = np.zeros_like(hs[0])
        for step in reversed(range(inputs.shape[1])):
            h, h_prev = hs[step + 1], hs[step]
            g = dlogits[:, step, :]
            grads["b_out"] += g.sum(axis=0)
            dh = dh_next + self._linear_backward("w_out", h, g, cache["out_masks"][step], grads)
            da = dh * (1.0 - h * h)
            grads["b_h"] += da.sum(axis=0)
            grads["w_in"] += xs[step].T @ da
            dx = da @ p["w_in"].T
            np.add.at(grads["embed"], inputs[:, step], dx)
            dc += dx
            dh_next = self._linear_backward("w_rec", h_prev, da, cache["rec_masks"][step], grads)

        da = dh_next * (1.0 - hs[0] * hs[0])
        grads["b_h"] += da.sum(axis=0)
        grads["w_in"] += cache["c"].T @ da
        dc += da @ p["w_in"].T
        grads["img_proj"] = cache["images"].T @ dc

        if self.adapters:
            return {name: grads[name] for name in self.trainable_parameters()}
        return grads

    def start(self, image: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Conditioning vector and hidden state after the image token."""
        image = np.asarray(image, dtype=np.float64).reshape(1, -1)
        if image.shape[1] != self.image_dim:
            raise DynoframeError(
                f"expected an image embedding of width {self.image_dim}, got {image.shape[1]}",
                code="SHAPE_MISMATCH",
            )
        c = image @ self.params["img_proj"]
        return c, np.tanh(c @ self.params["w_in"] + self.params["b_h"])

    def step(self, c: np.ndarray, h: np.ndarray, token_id: int) -> Tuple[np.ndarray, np.ndarray]:
        """Feed one token; returns (new hidden state, next-token logits)."""
        p = self.params
        x = p["embed"][token_id][None, :] + c
        h = np.tanh(x @ p["w_in"] + self._linear("w_rec", h, None) + p["b_h"])
        logits = self._linear("w_out", h, None) + p["b_out"]
        return h, logits[0]


def generate(
    model: DecoderModel,
    image: np.ndarray,
    max_len: int = 64,
    prefix: Sequence[int] = (),
) -> List[int]:
    """
    Greedy decoding from BOS until EOS or ``max_len`` tokens.

    Args:
        model: Decoder
        image: Image embedding
        max_len: Hard cap on emitted tokens (EOS included)
        prefix: Tokens forced before greedy decoding takes over

    Returns:
        Emitted token ids, ending in EOS unless the cap was hit
    """
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    c, h = model.start(image)
    forced = list(prefix)
    emitted: List[int] = []
    token = BOS_ID
    while len(emitted) < max_len:
        h, logits = model.step(c, h, token)
        token = forced.pop(0) if forced else int(np.argmax(logits))
        emitted.append(token)
        if token == EOS_ID and not forced:
            break
    return emitted


def rank_candidates(
    model: DecoderModel, image: np.ndarray, marker_id: int, candidate_ids: Sequence[int]
) -> List[int]:
    """Candidates ordered by next-token logit after ``BOS marker`` (ties keep input order)."""
    c, h = model.start(image)
    h, _ = model.step(c, h, BOS_ID)
    _, logits = model.step(c, h, marker_id)
    scored = [(-float(logits[cid]), position, cid) for position, cid in enumerate(candidate_ids)]
    return [cid for _, _, cid in sorted(scored)]


def top_k_generations(
    model: DecoderModel,
    image: np.ndarray,
    marker: str,
    gerunds: Sequence[str],
    k: int = 5,
    max_len: int = 64,
) -> List[List[int]]:
    """
    Ranked hypotheses: the ``k`` most likely gerunds after the verb marker, each
    completed greedily.
    """
    vocab = model.vocab
    if marker not in vocab:
        return [generate(model, image, max_len)]
    marker_id = vocab.token_id(marker)
    candidates = [vocab.token_id(g) for g in gerunds if g in vocab]
    if not candidates or k < 1:
        return [generate(model, image, max_len)]
    ranked = rank_candidates(model, image, marker_id, candidates)[:k]
    return [generate(model, image, max_len, prefix=(marker_id, cid)) for cid in ranked]
