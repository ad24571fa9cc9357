"""Forward pipeline: hourly extractor, map reconstruction, convolutional
tokenizer, transformer encoder, pseudo-sequence, prediction head.

All functions are pure over (input, params, config) and batched: inputs carry
a leading batch axis and no operation mixes samples, so per-sample outputs do
not depend on batch composition. ``forward`` exposes the two activations the
training loop hooks: the encoder output vector f and the pseudo-sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..autodiff import (
    Tensor, concat, conv1d, conv2d, expand, layer_norm, linear, matmul, max_,
    maxpool2d, relu, reshape, sigmoid, softmax, transpose,
)
from ..errors import ShapeError
from .config import ModelConfig, TokenizerStage

# ------------------------------------------------------------------ shape rules
# The ledger below and the real ops must agree; these helpers are the single
# statement of the sliding-window arithmetic.


def conv_out(extent: int, kernel: int, stride: int, padding: int) -> int:
    out = (extent + 2 * padding - kernel) // stride + 1
    if out < 1:
        raise ShapeError(f"window {kernel} exceeds padded extent {extent + 2 * padding}")
    return out


def stage_out_shape(chw: tuple[int, int, int], stage: TokenizerStage) -> tuple[int, int, int]:
    _, h, w = chw
    h = conv_out(h, stage.kernel, stage.stride, stage.padding)
    w = conv_out(w, stage.kernel, stage.stride, stage.padding)
    h = conv_out(h, stage.pool_kernel, stage.pool_stride, stage.pool_padding)
    w = conv_out(w, stage.pool_kernel, stage.pool_stride, stage.pool_padding)
    return (stage.channels, h, w)


def tokens_shape(config: ModelConfig) -> tuple[int, int]:
    chw = config.map_shape
    for stage in config.stages:
        chw = stage_out_shape(chw, stage)
    return (chw[1] * chw[2], chw[0])


def shape_ledger(config: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Symbolic per-stage shape chain from input grid to output probability.

    Derived from the same window-arithmetic helpers the forward path obeys,
    so it stays truthful at scales too large to materialize.
    """
    c = config
    ledger: list[tuple[str, tuple[int, ...]]] = [
        ("input", (c.hours, c.encoded_width)),
        ("extractor_out", (c.hours, c.extractor_width)),
        ("concat", (c.hours * c.extractor_width,)),
        ("map", c.map_shape),
    ]
    chw = c.map_shape
    for i, stage in enumerate(c.stages):
        chw = stage_out_shape(chw, stage)
        ledger.append((f"stage{i}", chw))
    ledger.append(("tokens", tokens_shape(c)))
    ledger.append(("feature_vector", (c.feature_width,)))
    ledger.append(("pseudo_sequence", (c.hours, c.seq_dim)))
    ledger.append(("probability", ()))
    return ledger


# --------------------------------------------------------------------- forwards


def extract_features(x: Tensor, params, config: ModelConfig) -> Tensor:
    """Shared per-hour residual extractor: (B, T, V) -> (B, T, width)."""
    B, T, V = x.shape
    if V != config.encoded_width:
        raise ShapeError(f"extract_features: input width {V} != configured "
                         f"{config.encoded_width}")
    h = reshape(x, (B * T, V))
    h = linear(h, params["extractor.stem.w"], params["extractor.stem.b"])
    for i in range(config.extractor_blocks):
        pre = f"extractor.block{i}"
        inner = layer_norm(h, params[f"{pre}.ln.g"], params[f"{pre}.ln.b"])
        inner = relu(linear(inner, params[f"{pre}.fc1.w"], params[f"{pre}.fc1.b"]))
        h = h + linear(inner, params[f"{pre}.fc2.w"], params[f"{pre}.fc2.b"])
    return reshape(h, (B, T, config.extractor_width))


def reconstruct_map(o: Tensor, params, config: ModelConfig) -> Tensor:
    """Hour-ordered concat plus one affine, reshaped to the (C, H, W) map."""
    B, T, w = o.shape
    flat = reshape(o, (B, T * w))
    m = linear(flat, params["reconstruct.w"], params["reconstruct.b"])
    C, H, W = config.map_shape
    return reshape(m, (B, C, H, W))


def conv_tokenize(m: Tensor, params, config: ModelConfig) -> Tensor:
    """Stacked conv-ReLU-pool stages, flattened to positioned tokens."""
    x = m
    for i, stage in enumerate(config.stages):
        x = conv2d(x, params[f"tokenizer.stage{i}.conv.w"],
                   params[f"tokenizer.stage{i}.conv.b"],
                   stride=stage.stride, padding=stage.padding)
        x = relu(x)
        x = maxpool2d(x, kernel=stage.pool_kernel, stride=stage.pool_stride,
                      padding=stage.pool_padding)
    B, C, H, W = x.shape
    tokens = transpose(reshape(x, (B, C, H * W)), (0, 2, 1))
    n_tokens, d = tokens_shape(config)
    pos = reshape(params["tokenizer.pos_embed"], (1, n_tokens, d))
    return tokens + expand(pos, (B, n_tokens, d))


def _attention(x: Tensor, params, prefix: str, n_heads: int) -> Tensor:
    B, n, d = x.shape
    dk = d // n_heads

    def split(t: Tensor) -> Tensor:
        return transpose(reshape(t, (B, n, n_heads, dk)), (0, 2, 1, 3))

    q = split(linear(x, params[f"{prefix}.wq"], params[f"{prefix}.wq_b"]))
    k = split(linear(x, params[f"{prefix}.wk"], params[f"{prefix}.wk_b"]))
    v = split(linear(x, params[f"{prefix}.wv"], params[f"{prefix}.wv_b"]))
    scores = matmul(q, transpose(k, (0, 1, 3, 2))) * (1.0 / math.sqrt(dk))
    att = softmax(scores, axis=-1)
    mixed = transpose(matmul(att, v), (0, 2, 1, 3))
    out = reshape(mixed, (B, n, d))
    return linear(out, params[f"{prefix}.wo"], params[f"{prefix}.wo_b"])


def encode(tokens: Tensor, params, config: ModelConfig) -> Tensor:
    """Pre-norm transformer stack, sequence pooling, affine to width T*d."""
    x = tokens
    for i in range(config.encoder_depth):
        pre = f"encoder.layer{i}"
        h = layer_norm(x, params[f"{pre}.ln1.g"], params[f"{pre}.ln1.b"])
        x = x + _attention(h, params, f"{pre}.attn", config.n_heads)
        h = layer_norm(x, params[f"{pre}.ln2.g"], params[f"{pre}.ln2.b"])
        h = relu(linear(h, params[f"{pre}.mlp.fc1.w"], params[f"{pre}.mlp.fc1.b"]))
        x = x + linear(h, params[f"{pre}.mlp.fc2.w"], params[f"{pre}.mlp.fc2.b"])
    x = layer_norm(x, params["encoder.norm_f.g"], params["encoder.norm_f.b"])
    B, n, d = x.shape
    if config.pool_mode == "seqpool":
        logits = linear(x, params["encoder.pool.w"], params["encoder.pool.b"])
        weights = softmax(logits, axis=1)           # (B, n, 1) over tokens
        pooled = reshape(matmul(transpose(weights, (0, 2, 1)), x), (B, d))
    else:
        pooled = reshape(x, (B, n * d))
    return linear(pooled, params["encoder.out.w"], params["encoder.out.b"])


def to_pseudo_sequence(f: Tensor, config: ModelConfig) -> Tensor:
    """Row-major reshape of f to (B, hours, seq_dim); z_t is the last row."""
    B, width = f.shape
    if width % config.hours:
        raise ShapeError(f"to_pseudo_sequence: width {width} not divisible by "
                         f"{config.hours} hours")
    if width != config.feature_width:
        raise ShapeError(f"to_pseudo_sequence: width {width} != configured "
                         f"{config.feature_width}")
    return reshape(f, (B, config.hours, config.seq_dim))


def head_forward(seq: Tensor, params, config: ModelConfig,
                 gate_input: Tensor | None = None) -> Tensor:
    """Mortality probability from the pseudo-sequence.

    stage-adaptive: two causal 1-D convolutions over the hour axis, gated by
    a sigmoid projection of z_t (the last row; override via gate_input),
    max-pooled over time, then affine + sigmoid. fully-connected: flatten,
    affine, sigmoid.
    """
    B, T, d = seq.shape
    if config.head == "fully-connected":
        logits = linear(reshape(seq, (B, T * d)), params["head.fc.w"], params["head.fc.b"])
        return reshape(sigmoid(logits), (B,))
    x = transpose(seq, (0, 2, 1))                       # (B, d, T)
    x = relu(conv1d(x, params["head.conv1.w"], params["head.conv1.b"], padding=(2, 0)))
    x = relu(conv1d(x, params["head.conv2.w"], params["head.conv2.b"], padding=(2, 0)))
    z_t = gate_input if gate_input is not None else seq[:, T - 1, :]
    gate = sigmoid(linear(z_t, params["head.gate.w"], params["head.gate.b"]))
    hw = config.head_width
    x = x * expand(reshape(gate, (B, hw, 1)), (B, hw, T))
    pooled = max_(x, axis=2)                            # (B, head_width)
    logits = linear(pooled, params["head.out.w"], params["head.out.b"])
    return reshape(sigmoid(logits), (B,))


@dataclass
class ForwardResult:
    prob: Tensor                 # (B,) probabilities in (0, 1)
    hooks: dict[str, Tensor]     # named activations for the training losses


def forward(x: Tensor, params, config: ModelConfig, mix_fn=None) -> ForwardResult:
    """Full pipeline; ``mix_fn`` (if given) transforms the pseudo-sequence
    batch in place of the identity — the feature-mixing site."""
    o = extract_features(x, params, config)
    m = reconstruct_map(o, params, config)
    tokens = conv_tokenize(m, params, config)
    f = encode(tokens, params, config)
    seq = to_pseudo_sequence(f, config)
    hooks = {"feature_vector": f, "pseudo_sequence": seq}
    if mix_fn is not None:
        seq = mix_fn(seq)
        hooks["pseudo_sequence_mixed"] = seq
    prob = head_forward(seq, params, config)
    return ForwardResult(prob=prob, hooks=hooks)


def batch_concat_forward(xs: list[Tensor], params, config: ModelConfig) -> Tensor:
    """Convenience for scoring: concatenate per-sample forwards."""
    return concat([forward(x, params, config).prob for x in xs], axis=0)
