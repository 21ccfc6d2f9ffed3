"""
Attention feature augmentation

Frozen vision-and-language token embeddings are projected to the backbone
width and concatenated with the backbone features along the token axis, then
passed through multi-head self-attention. No positional encodings are added,
and the attention weights depend only on the feature width and head count.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import numpy as np

from .error import DynoframeError

logger = logging.getLogger(__name__)

AUGMENT = "augment"
REPLACE = "replace"
FUSE_MODES = (AUGMENT, REPLACE)

QUERY_CHUNK = 256


@dataclass(frozen=True)
class FeatureBlock:
    """Real tensor of shape (batch, tokens, features); zero tokens is allowed."""

    data: np.ndarray

    def __post_init__(self) -> None:
        data = self.data
        if data.ndim != 3:
            raise DynoframeError(
                f"feature block must have rank 3, got shape {data.shape}", code="SHAPE_MISMATCH"
            )
        if data.shape[0] < 1 or data.shape[2] < 1:
            raise DynoframeError(
                f"batch and feature sizes must be >= 1, got {data.shape}", code="SHAPE_MISMATCH"
            )
        if not np.all(np.isfinite(data)):
            raise DynoframeError("feature block contains non-finite values", code="NON_FINITE")

    @property
    def batch(self) -> int:
        return int(self.data.shape[0])

    @property
    def tokens(self) -> int:
        return int(self.data.shape[1])

    @property
    def features(self) -> int:
        return int(self.data.shape[2])

    @property
    def shape(self):
        return self.data.shape


@dataclass(frozen=True)
class Projection:
    """Per-token affine map ``x @ matrix + bias`` from width d_in to N."""

    matrix: np.ndarray
    bias: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.matrix.ndim != 2:
            raise DynoframeError("projection matrix must be 2-D", code="SHAPE_MISMATCH")
        if self.bias is not None and self.bias.shape != (self.matrix.shape[1],):
            raise DynoframeError(
                f"bias shape {self.bias.shape} does not match output width {self.matrix.shape[1]}",
                code="SHAPE_MISMATCH",
            )
        if not np.all(np.isfinite(self.matrix)) or (
            self.bias is not None and not np.all(np.isfinite(self.bias))
        ):
            raise DynoframeError("projection contains non-finite values", code="NON_FINITE")

    @classmethod
    def create(
        cls, d_in: int, n: int, rng: np.random.Generator, use_bias: bool = True
    ) -> "Projection":
        matrix = rng.normal(0.0, 1.0 / math.sqrt(d_in), size=(d_in, n))
        bias = rng.normal(0.0, 0.1, size=n) if use_bias else None
        return cls(matrix, bias)

    @property
    def in_features(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def out_features(self) -> int:
        return int(self.matrix.shape[1])

    def parameter_count(self) -> int:
        return int(self.matrix.size) + (int(self.bias.size) if self.bias is not None else 0)


@dataclass(frozen=True)
class AttentionBlock:
    """Multi-head self-attention: per-head Q/K/V (H, N, N/H) and an N x N output matrix."""

    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray

    def __post_init__(self) -> None:
        heads, n, head_dim = self.wq.shape
        for name, w in (("wk", self.wk), ("wv", self.wv)):
            if w.shape != self.wq.shape:
                raise DynoframeError(
                    f"{name} shape {w.shape} differs from wq {self.wq.shape}", code="SHAPE_MISMATCH"
                )
        if self.wo.shape != (heads * head_dim, n):
            raise DynoframeError(
                f"output matrix must be {(heads * head_dim, n)}, got {self.wo.shape}",
                code="SHAPE_MISMATCH",
            )

    @classmethod
    def create(cls, n: int, heads: int, rng: np.random.Generator) -> "AttentionBlock":
        if heads < 1 or n % heads:
            raise ValueError(f"feature width {n} must be divisible by heads {heads}")
        head_dim = n // heads
        scale = 1.0 / math.sqrt(n)
        return cls(
            rng.normal(0.0, scale, size=(heads, n, head_dim)),
            rng.normal(0.0, scale, size=(heads, n, head_dim)),
            rng.normal(0.0, scale, size=(heads, n, head_dim)),
            rng.normal(0.0, scale, size=(n, n)),
        )

    @property
    def heads(self) -> int:
        return int(self.wq.shape[0])

    @property
    def features(self) -> int:
        return int(self.wq.shape[1])

    @property
    def head_dim(self) -> int:
        return int(self.wq.shape[2])

    def parameter_count(self) -> int:
        return int(self.wq.size + self.wk.size + self.wv.size + self.wo.size)


def project(e_vl: FeatureBlock, projection: Projection) -> FeatureBlock:
    """Map every token of ``e_vl`` to the backbone width."""
    if e_vl.features != projection.in_features:
        raise DynoframeError(
            f"V&L width {e_vl.features} does not match projection input {projection.in_features}",
            code="SHAPE_MISMATCH",
        )
    out = e_vl.data @ projection.matrix
    if projection.bias is not None:
        out = out + projection.bias
    return FeatureBlock(out)


def concat_features(e_backbone: FeatureBlock, e_projected: FeatureBlock) -> FeatureBlock:
    """
    Join two blocks along the token axis.

    Backbone tokens keep indices [0, K_b) and projected tokens follow; no
    positional encoding is added.

    Raises:
        DynoframeError: ``SHAPE_MISMATCH`` if batch or feature sizes differ
    """
    if e_backbone.batch != e_projected.batch or e_backbone.features != e_projected.features:
        raise DynoframeError(
            f"cannot concatenate {e_backbone.shape} with {e_projected.shape}: "
            "batch and feature sizes must match",
            code="SHAPE_MISMATCH",
        )
    return FeatureBlock(np.concatenate([e_backbone.data, e_projected.data], axis=1))


def attention_forward(
    features: FeatureBlock, block: AttentionBlock, chunk_size: int = QUERY_CHUNK
) -> FeatureBlock:
    """
    Scaled dot-product multi-head self-attention (softmax over tokens, scale 1/sqrt(N_h)).

    Queries are processed ``chunk_size`` at a time so long token sequences fit
    in memory; the result does not depend on the chunk size.
    """
    if features.features != block.features:
        raise DynoframeError(
            f"feature width {features.features} does not match attention width {block.features}",
            code="SHAPE_MISMATCH",
        )
    if features.tokens < 1:
        raise DynoframeError("attention needs at least one token", code="SHAPE_MISMATCH")

    x = features.data
    batch, tokens, _ = x.shape
    q = np.einsum("bkn,hnd->bhkd", x, block.wq)
    k = np.einsum("bkn,hnd->bhkd", x, block.wk)
    v = np.einsum("bkn,hnd->bhkd", x, block.wv)
    scale = 1.0 / math.sqrt(block.head_dim)

    heads_out = np.empty_like(q)
    for start in range(0, tokens, chunk_size):
        stop = min(start + chunk_size, tokens)
        scores = np.einsum("bhqd,bhkd->bhqk", q[:, :, start:stop], k) * scale
        scores -= scores.max(axis=-1, keepdims=True)
        weights = np.exp(scores)
        weights /= weights.sum(axis=-1, keepdims=True)
        heads_out[:, :, start:stop] = np.einsum("bhqk,bhkd->bhqd", weights, v)

    merged = heads_out.transpose(0, 2, 1, 3).reshape(batch, tokens, block.heads * block.head_dim)
    return FeatureBlock(merged @ block.wo)


def fuse(
    e_backbone: FeatureBlock,
    e_vl: FeatureBlock,
    projection: Projection,
    block: AttentionBlock,
    mode: str = AUGMENT,
) -> FeatureBlock:
    """
    Feed attention with augmented or replaced features.

    Args:
        mode: ``augment`` attends over backbone plus projected tokens;
            ``replace`` discards the backbone and attends over the projected
            tokens alone

    Returns:
        Block with K_b + K_v tokens (augment) or K_v tokens (replace)
    """
    if mode not in FUSE_MODES:
        raise ValueError(f"mode must be one of {FUSE_MODES}, got {mode!r}")
    projected = project(e_vl, projection)
    if mode == REPLACE:
        return attention_forward(projected, block)
    return attention_forward(concat_features(e_backbone, projected), block)


def _check(name: str, deviation: float, tolerance: float, **details: Any) -> Dict[str, Any]:
    entry = {
        "name": name,
        "max_deviation": float(deviation),
        "tolerance": tolerance,
        "passed": bool(deviation <= tolerance),
    }
    entry.update(details)
    return entry


def run_invariant_suite(
    kb: int = 49,
    kv: int = 32,
    n: int = 256,
    heads: int = 4,
    trials: int = 100,
    mode: str = AUGMENT,
    seed: int = 0,
    d_vl: Optional[int] = None,
    batch: int = 2,
    large_k: int = 10_000,
) -> Dict[str, Any]:
    """
    Numerically check the augmentation invariants and report the worst deviations.

    Checks: concatenated shape, verbatim preservation of both inputs,
    permutation equivariance over ``trials`` random token permutations,
    projection linearity without bias, parameter-count invariance between 10
    and ``large_k`` tokens, and the output token count of ``mode``.
    """
    if mode not in FUSE_MODES:
        raise ValueError(f"mode must be one of {FUSE_MODES}, got {mode!r}")
    if kb < 0 or kv < 0 or trials < 1:
        raise ValueError("kb and kv must be >= 0 and trials >= 1")
    d_vl = d_vl or n
    rng = np.random.default_rng(seed)
    block = AttentionBlock.create(n, heads, rng)
    projection = Projection.create(d_vl, n, rng)
    checks: List[Dict[str, Any]] = []

    e_b = FeatureBlock(rng.normal(size=(batch, kb, n)))
    e_vl = FeatureBlock(rng.normal(size=(batch, kv, d_vl)))
    projected = project(e_vl, projection)
    joined = concat_features(e_b, projected)
    expected_shape = (batch, kb + kv, n)
    checks.append(
        _check(
            "concat_shape",
            0.0 if joined.shape == expected_shape else 1.0,
            0.0,
            shape=list(joined.shape),
        )
    )
    preserved = max(
        float(np.max(np.abs(joined.data[:, :kb] - e_b.data), initial=0.0)),
        float(np.max(np.abs(joined.data[:, kb:] - projected.data), initial=0.0)),
    )
    checks.append(_check("concat_preservation", preserved, 0.0))

    worst = 0.0
    tokens = kb + kv if mode == AUGMENT else kv
    if tokens >= 1:
        for _ in range(trials):
            x = FeatureBlock(rng.normal(size=(batch, tokens, n)))
            perm = rng.permutation(tokens)
            permuted_out = attention_forward(FeatureBlock(x.data[:, perm]), block).data
            expected = attention_forward(x, block).data[:, perm]
            worst = max(worst, float(np.max(np.abs(permuted_out - expected))))
    checks.append(_check("permutation_equivariance", worst, 1e-6, trials=trials))

    linear = Projection(projection.matrix)
    x = FeatureBlock(rng.normal(size=(batch, max(kv, 1), d_vl)))
    y = FeatureBlock(rng.normal(size=(batch, max(kv, 1), d_vl)))
    a, b = rng.normal(size=2)
    combined = project(FeatureBlock(a * x.data + b * y.data), linear).data
    separate = a * project(x, linear).data + b * project(y, linear).data
    checks.append(
        _check("projection_linearity", float(np.max(np.abs(combined - separate))), 1e-9)
    )

    # Fresh modules per token count; attention holds 4 N^2 weights whatever K is.
    closed_form = 4 * n * n
    totals: List[int] = []
    attention_counts: List[int] = []
    for k in (10, large_k):
        sized_rng = np.random.default_rng([seed, k])
        sized_block = AttentionBlock.create(n, heads, sized_rng)
        sized_projection = Projection.create(d_vl, n, sized_rng)
        out = attention_forward(FeatureBlock(sized_rng.normal(size=(1, k, n))), sized_block)
        ran = out.shape == (1, k, n)
        attention_counts.append(sized_block.parameter_count() if ran else -1)
        totals.append(sized_block.parameter_count() + sized_projection.parameter_count())
    deviation = max(
        max(totals) - min(totals),
        max(abs(count - closed_form) for count in attention_counts),
    )
    checks.append(
        _check(
            "parameter_count_invariance",
            float(deviation),
            0.0,
            parameters=totals,
            attention_parameters=attention_counts,
            closed_form=closed_form,
            token_sizes=[10, large_k],
        )
    )

    if tokens >= 1:
        fused = fuse(e_b, e_vl, projection, block, mode)
        checks.append(
            _check("token_count", float(abs(fused.tokens - tokens)), 0.0, tokens=fused.tokens)
        )
    else:
        checks.append(_check("token_count", 0.0, 0.0, tokens=0))

    passed = all(check["passed"] for check in checks)
    logger.info("augment-check (%s): %s", mode, "pass" if passed else "FAIL")
    return {
        "mode": mode,
        "config": {
            "kb": kb,
            "kv": kv,
            "n": n,
            "heads": heads,
            "trials": trials,
            "d_vl": d_vl,
            "seed": seed,
        },
        "checks": checks,
        "passed": passed,
    }
