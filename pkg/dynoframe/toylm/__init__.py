"""
Desk-scale structured-text decoder: vocabulary, LoRA adapters, training, model files.
"""

from .checkpoint import load_model, save_model
from .decoder import DecoderModel, generate, lm_loss, lm_loss_grad, top_k_generations
from .lora import LoraAdapter, lora_backward, lora_forward, lora_merge, trainable_parameter_count
from .training import AdamW, DecoderExample, TrainResult, evaluate_loss, train_decoder
from .vocab import BOS_ID, EOS_ID, PAD_ID, Vocabulary

__all__ = [
    "AdamW",
    "BOS_ID",
    "DecoderExample",
    "DecoderModel",
    "EOS_ID",
    "LoraAdapter",
    "PAD_ID",
    "TrainResult",
    "Vocabulary",
    "evaluate_loss",
    "generate",
    "lm_loss",
    "lm_loss_grad",
    "load_model",
    "lora_backward",
    "lora_forward",
    "lora_merge",
    "save_model",
    "top_k_generations",
    "train_decoder",
    "trainable_parameter_count",
]
