"""Model architecture configuration and its fingerprint."""

from __future__ import annotations

import hashlib
import json

from pydantic import BaseModel, Field, model_validator


class TokenizerStage(BaseModel, frozen=True):
    """One tokenizer stage: convolution, ReLU, max-pool."""

    channels: int = Field(ge=1)
    kernel: int = Field(ge=1)
    stride: int = Field(default=1, ge=1)
    padding: int = Field(default=0, ge=0)
    pool_kernel: int = Field(default=2, ge=1)
    pool_stride: int = Field(default=2, ge=1)
    pool_padding: int = Field(default=0, ge=0)


class ModelConfig(BaseModel, frozen=True):
    """Shapes and switches for the full prediction pipeline."""

    hours: int = Field(default=24, ge=1)
    encoded_width: int = Field(ge=1)
    extractor_width: int = Field(ge=1)
    extractor_blocks: int = Field(default=1, ge=0)
    map_shape: tuple[int, int, int]
    stages: tuple[TokenizerStage, ...]
    encoder_depth: int = Field(default=2, ge=0)
    embed_dim: int = Field(ge=1)
    n_heads: int = Field(default=4, ge=1)
    mlp_ratio: int = Field(default=3, ge=1)
    seq_dim: int = Field(ge=1)
    head: str = "stage-adaptive"
    head_width: int = Field(default=8, ge=1)
    freeze_tokenizer: bool = False
    pool_mode: str = "seqpool"

    @model_validator(mode="after")
    def _check(self):
        if not self.stages:
            raise ValueError("at least one tokenizer stage is required")
        if self.embed_dim != self.stages[-1].channels:
            raise ValueError(f"embed_dim {self.embed_dim} must equal the last "
                             f"stage's channels {self.stages[-1].channels}")
        if self.embed_dim % self.n_heads:
            raise ValueError(f"embed_dim {self.embed_dim} not divisible by "
                             f"n_heads {self.n_heads}")
        if self.head not in ("stage-adaptive", "fully-connected"):
            raise ValueError(f"unknown head kind {self.head!r}")
        if self.pool_mode not in ("seqpool", "flatten"):
            raise ValueError(f"unknown pool_mode {self.pool_mode!r}")
        if any(s <= 0 for s in self.map_shape):
            raise ValueError(f"map_shape extents must be positive: {self.map_shape}")
        return self

    @property
    def feature_width(self) -> int:
        """Width of the encoder output f; reshapes to (hours, seq_dim)."""
        return self.hours * self.seq_dim

    def fingerprint(self) -> str:
        blob = json.dumps(self.model_dump(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def full_config() -> ModelConfig:
    """Full-scale architecture: 812 inputs, 224x224 map, 14-layer encoder."""
    stage = dict(kernel=7, stride=2, padding=3,
                 pool_kernel=3, pool_stride=2, pool_padding=1)
    return ModelConfig(
        encoded_width=812,
        extractor_width=512,
        extractor_blocks=8,
        map_shape=(3, 224, 224),
        stages=(TokenizerStage(channels=64, **stage),
                TokenizerStage(channels=384, **stage)),
        encoder_depth=14,
        embed_dim=384,
        n_heads=6,
        seq_dim=300,
        head_width=64,
    )


def desk_config(**overrides) -> ModelConfig:
    """Small architecture with the same topology; minutes-scale on a CPU."""
    stage = dict(kernel=3, stride=1, padding=1,
                 pool_kernel=2, pool_stride=2, pool_padding=0)
    base = dict(
        encoded_width=64,
        extractor_width=32,
        extractor_blocks=1,
        map_shape=(3, 32, 32),
        stages=(TokenizerStage(channels=32, **stage),
                TokenizerStage(channels=64, **stage)),
        encoder_depth=2,
        embed_dim=64,
        n_heads=4,
        seq_dim=8,
        head_width=8,
    )
    base.update(overrides)
    return ModelConfig(**base)
