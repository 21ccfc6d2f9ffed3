"""
Low-rank adapters over frozen dense weights

Conventions follow the usual (out x in) layout: the base weight ``W`` is
``m x n``, ``A`` is ``r x n`` and ``B`` is ``m x r``, so the adapted map is
``W x + (alpha / r) B (A x)``. Inputs may be a single vector or a batch of row
vectors.
"""

from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

import numpy as np

from ..config import LORA_ALPHA, LORA_DROPOUT
from ..error import DynoframeError


@dataclass
class LoraAdapter:
    """Frozen base weight plus trainable low-rank factors."""

    weight: np.ndarray
    a: np.ndarray
    b: np.ndarray
    alpha: float = LORA_ALPHA
    dropout: float = LORA_DROPOUT

    def __post_init__(self) -> None:
        if self.weight.ndim != 2 or self.a.ndim != 2 or self.b.ndim != 2:
            raise DynoframeError("adapter tensors must be matrices", code="SHAPE_MISMATCH")
        m, n = self.weight.shape
        r = self.a.shape[0]
        if r < 1:
            raise DynoframeError("adapter rank must be at least 1", code="INVALID_ADAPTER")
        if self.a.shape != (r, n) or self.b.shape != (m, r):
            raise DynoframeError(
                f"adapter shapes A{self.a.shape} B{self.b.shape} do not fit W{self.weight.shape}",
                code="SHAPE_MISMATCH",
            )
        if not 0.0 <= self.dropout < 1.0:
            raise DynoframeError("adapter dropout must be in [0, 1)", code="INVALID_ADAPTER")

    @classmethod
    def create(
        cls,
        weight: np.ndarray,
        rank: int,
        alpha: float = LORA_ALPHA,
        dropout: float = LORA_DROPOUT,
        rng: Optional[np.random.Generator] = None,
    ) -> "LoraAdapter":
        """Adapter with gaussian ``A`` and all-zero ``B``, so it starts as the identity update."""
        if rank < 1:
            raise DynoframeError("adapter rank must be at least 1", code="INVALID_ADAPTER")
        rng = rng if rng is not None else np.random.default_rng(0)
        m, n = weight.shape
        a = rng.normal(0.0, 1.0 / np.sqrt(n), size=(rank, n))
        b = np.zeros((m, rank))
        return cls(np.array(weight, dtype=np.float64), a, b, alpha, dropout)

    @property
    def rank(self) -> int:
        return int(self.a.shape[0])

    @property
    def scaling(self) -> float:
        return self.alpha / self.rank

    @property
    def trainable_count(self) -> int:
        m, n = self.weight.shape
        return self.rank * (m + n)

    def dropout_mask(
        self, shape: Tuple[int, ...], rng: np.random.Generator
    ) -> Optional[np.ndarray]:
        """Inverted-dropout mask for the adapter input path (None when dropout is off)."""
        if self.dropout == 0.0:
            return None
        keep = 1.0 - self.dropout
        return (rng.random(shape) < keep) / keep


def _check_input(adapter: LoraAdapter, x: np.ndarray) -> None:
    if x.shape[-1] != adapter.weight.shape[1]:
        raise DynoframeError(
            f"input width {x.shape[-1]} does not match adapter input {adapter.weight.shape[1]}",
            code="SHAPE_MISMATCH",
        )


def lora_forward(
    adapter: LoraAdapter, x: np.ndarray, dropout_mask: Optional[np.ndarray] = None
) -> np.ndarray:
    """
    Apply ``W x + (alpha/r) B (A x)`` without forming ``B A``.

    Args:
        adapter: The adapter
        x: Vector of length n, or rows of shape (..., n)
        dropout_mask: Optional mask applied to the adapter input path only

    Returns:
        Vector of length m, or rows of shape (..., m)
    """
    _check_input(adapter, x)
    adapted_input = x if dropout_mask is None else x * dropout_mask
    low_rank = (adapted_input @ adapter.a.T) @ adapter.b.T
    return x @ adapter.weight.T + adapter.scaling * low_rank


def lora_backward(
    adapter: LoraAdapter,
    x: np.ndarray,
    grad_out: np.ndarray,
    dropout_mask: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Gradients of a batched ``lora_forward`` call.

    Returns:
        (grad wrt x, grad wrt A, grad wrt B); the frozen base gets no gradient
    """
    adapted_input = x if dropout_mask is None else x * dropout_mask
    hidden = adapted_input @ adapter.a.T
    grad_b = adapter.scaling * (grad_out.T @ hidden)
    grad_hidden = adapter.scaling * (grad_out @ adapter.b)
    grad_a = grad_hidden.T @ adapted_input
    grad_adapted = grad_hidden @ adapter.a
    if dropout_mask is not None:
        grad_adapted = grad_adapted * dropout_mask
    grad_x = grad_out @ adapter.weight + grad_adapted
    return grad_x, grad_a, grad_b


def lora_merge(adapter: LoraAdapter) -> np.ndarray:
    """Dense ``W + (alpha/r) B A``."""
    return adapter.weight + adapter.scaling * (adapter.b @ adapter.a)


def trainable_parameter_count(adapters: Iterable[LoraAdapter]) -> int:
    return sum(adapter.trainable_count for adapter in adapters)
