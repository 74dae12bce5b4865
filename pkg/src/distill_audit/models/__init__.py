"""MLP and character-transformer models, checkpoints, generation."""

from .checkpoint import ModelCheckpoint, init_model, load_checkpoint, save_checkpoint
from .config import GPT_PRESETS, GptConfig, MlpConfig, gpt_param_count, gpt_preset
from .networks import build_network, forward, generate, generate_batch

__all__ = [
    "GPT_PRESETS", "GptConfig", "MlpConfig", "ModelCheckpoint", "build_network", "forward",
    "generate", "generate_batch", "gpt_param_count", "gpt_preset", "init_model",
    "load_checkpoint", "save_checkpoint",
]
