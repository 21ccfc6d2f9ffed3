"""
Run, training and probing configuration
"""

import os
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Optional, Tuple

from .error import DynoframeError

JOBS_ENV_VAR = "DYNOFRAME_JOBS"

# Adapter defaults used for the structured-text decoder fine-tuning runs.
LORA_RANK = 128
LORA_ALPHA = 256
LORA_DROPOUT = 0.05

DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")


def data_path(name: str) -> str:
    """Path of a file shipped in the package data directory."""
    return os.path.join(DATA_DIR, name)


def default_jobs() -> int:
    """Worker count from ``DYNOFRAME_JOBS``, falling back to 1."""
    raw = os.getenv(JOBS_ENV_VAR)
    if not raw:
        return 1
    try:
        jobs = int(raw)
    except ValueError:
        raise ValueError(f"{JOBS_ENV_VAR} must be an integer, got {raw!r}")
    if jobs < 1:
        raise ValueError(f"{JOBS_ENV_VAR} must be at least 1, got {jobs}")
    return jobs


@dataclass(frozen=True)
class TrainConfig:
    """
    Decoder training settings.

    The optimiser defaults (AdamW, lr 1e-4, weight decay 0.01, eps 1e-8) are the
    documented fine-tuning settings; the desk-scale demo raises the learning rate
    because it trains a small decoder from scratch.
    """

    epochs: int = 20
    learning_rate: float = 1e-4
    weight_decay: float = 0.01
    eps: float = 1e-8
    betas: Tuple[float, float] = (0.9, 0.999)
    batch_size: int = 16
    seed: int = 0
    hidden_size: int = 64
    max_len: int = 64
    grad_clip: Optional[float] = None
    lora_rank: int = 0
    lora_alpha: float = LORA_ALPHA
    lora_dropout: float = LORA_DROPOUT
    finetune_epochs: int = 0
    finetune_learning_rate: float = 1e-5

    def __post_init__(self) -> None:
        if self.epochs < 0 or self.finetune_epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.learning_rate < 0 or self.finetune_learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.hidden_size < 1:
            raise ValueError("hidden_size must be at least 1")
        if self.max_len < 1:
            raise ValueError("max_len must be at least 1")
        if self.lora_rank < 0:
            raise ValueError("lora_rank must be non-negative")
        if not 0.0 <= self.lora_dropout < 1.0:
            raise ValueError("lora_dropout must be in [0, 1)")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["betas"] = list(self.betas)
        return data


@dataclass(frozen=True)
class ProbeConfig:
    """Linear-probe optimiser settings (full batch below 10,000 training rows)."""

    learning_rate: float = 1e-2
    epochs: int = 500
    l2: float = 1e-4
    seed: int = 0
    batch_size: Optional[int] = None

    def __post_init__(self) -> None:
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.l2 < 0:
            raise ValueError("l2 must be non-negative")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")

    def effective_batch_size(self, n_train: int) -> int:
        if self.batch_size is not None:
            return min(self.batch_size, n_train)
        return n_train if n_train < 10_000 else 256


@dataclass
class RunConfig:
    """Everything a single CLI invocation needs, validated before work begins."""

    subcommand: str
    inputs: Dict[str, str] = field(default_factory=dict)
    outputs: Dict[str, str] = field(default_factory=dict)
    flags: Dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None
    verbosity: int = 0
    jobs: int = 1

    def validate_paths(self) -> None:
        """Fail fast on missing inputs or unwritable output directories."""
        for name, path in self.inputs.items():
            if not os.path.isfile(path):
                raise DynoframeError(
                    f"--{name.replace('_', '-')} file not found: {path}", code="FILE_NOT_FOUND"
                )
        for name, path in self.outputs.items():
            parent = os.path.dirname(os.path.abspath(path))
            if not os.path.isdir(parent):
                raise DynoframeError(
                    f"--{name.replace('_', '-')} directory does not exist: {parent}",
                    code="FILE_NOT_FOUND",
                )


def request_setting(data: Dict[str, Any], key: str, default: Any) -> Any:
    """``data[key]``, or ``default`` when the key is absent or None."""
    value = data.get(key)
    return default if value is None else value
