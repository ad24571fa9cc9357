"""Model configuration, parameters, checkpoints and the forward pipeline."""

from .config import ModelConfig, TokenizerStage, desk_config, full_config
from .network import (
    ForwardResult,
    conv_tokenize,
    encode,
    extract_features,
    forward,
    head_forward,
    reconstruct_map,
    shape_ledger,
    to_pseudo_sequence,
    tokens_shape,
)
from .params import Params, init_params, load_checkpoint, save_checkpoint

__all__ = [
    "ModelConfig", "TokenizerStage", "desk_config", "full_config",
    "ForwardResult", "conv_tokenize", "encode", "extract_features", "forward",
    "head_forward", "reconstruct_map", "shape_ledger", "to_pseudo_sequence",
    "tokens_shape", "Params", "init_params", "load_checkpoint", "save_checkpoint",
]
