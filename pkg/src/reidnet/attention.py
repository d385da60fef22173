"""Channel and spatial attention masks and their pointwise complements.

Channel attention squeezes the feature map to per-channel logits through a
bottleneck MLP; spatial attention produces per-location logits through a
1x1 / 3x3 / 3x3 / 1x1 conv stack. Their broadcast product is one logit
tensor; the forward mask is its sigmoid and the reverse mask the pointwise
complement, so the two always sum to one.
"""

from __future__ import annotations

from dataclasses import dataclass

from .autodiff import ShapeError, Tensor, as_tensor, global_avg_pool, mul, relu, sigmoid, sub_from_one
from .layers import BnParams, ConvParams, LinearParams, init_bn, init_conv, init_linear
from .rng import Rng


@dataclass
class ChannelAttentionParams:
    reduce: LinearParams  # C -> C/r
    expand: LinearParams  # C/r -> C
    bn: BnParams
    r: int


@dataclass
class SpatialAttentionParams:
    reduce1: ConvParams  # 1x1, C -> C/r
    conv_a: ConvParams   # 3x3, pad 1
    conv_b: ConvParams   # 3x3, pad 1
    reduce2: ConvParams  # 1x1, C/r -> 1
    bn: BnParams


@dataclass
class AttentionParams:
    channel: ChannelAttentionParams
    spatial: SpatialAttentionParams


@dataclass
class AttentionMaskPair:
    """Shared pre-sigmoid logits with the forward and reverse masks."""

    logits: Tensor
    att: Tensor
    att_reverse: Tensor


def init_channel_attention(rng: Rng, channels: int, r: int) -> ChannelAttentionParams:
    if r < 1 or channels % r != 0:
        raise ValueError(f"reduction ratio {r} must divide the channel count {channels}")
    hidden = channels // r
    return ChannelAttentionParams(
        reduce=init_linear(rng, hidden, channels),
        expand=init_linear(rng, channels, hidden),
        bn=init_bn(channels),
        r=r,
    )


def init_spatial_attention(rng: Rng, channels: int, r: int) -> SpatialAttentionParams:
    if r < 1 or channels % r != 0:
        raise ValueError(f"reduction ratio {r} must divide the channel count {channels}")
    hidden = channels // r
    return SpatialAttentionParams(
        reduce1=init_conv(rng, hidden, channels, 1, 1),
        conv_a=init_conv(rng, hidden, hidden, 3, 3, pad=(1, 1)),
        conv_b=init_conv(rng, hidden, hidden, 3, 3, pad=(1, 1)),
        reduce2=init_conv(rng, 1, hidden, 1, 1, bias=False),  # BN follows
        bn=init_bn(1),
    )


def init_attention(rng: Rng, channels: int, r: int) -> AttentionParams:
    return AttentionParams(
        channel=init_channel_attention(rng, channels, r),
        spatial=init_spatial_attention(rng, channels, r),
    )


def channel_attention(m, params: ChannelAttentionParams, mode: str) -> Tensor:
    """Pre-sigmoid per-channel logits, shape (...,C,1,1)."""
    m = as_tensor(m)
    batched = m.ndim == 4
    pooled = global_avg_pool(m)
    if batched:
        b, c = pooled.shape[0], pooled.shape[1]
        flat = pooled.reshape((b, c))
    else:
        c = pooled.shape[0]
        flat = pooled.reshape((1, c))
    h = relu(params.reduce.forward(flat))
    logits = params.bn.forward(params.expand.forward(h), mode)
    return logits.reshape((b, c, 1, 1)) if batched else logits.reshape((c, 1, 1))


def spatial_attention(m, params: SpatialAttentionParams, mode: str) -> Tensor:
    """Pre-sigmoid per-location logits, shape (...,1,H,W)."""
    m = as_tensor(m)
    h = params.reduce1.forward(m)
    h = params.conv_b.forward(relu(params.conv_a.forward(h)))
    h = params.reduce2.forward(h)
    if m.ndim == 3:  # single-channel BN needs a batch axis
        b, hh, ww = 1, h.shape[1], h.shape[2]
        return params.bn.forward(h.reshape((1, 1, hh, ww)), mode).reshape((1, hh, ww))
    return params.bn.forward(h, mode)


def combine_masks(att_c, att_s) -> AttentionMaskPair:
    """Broadcast-product logits, sigmoid mask, and its complement."""
    logits = mul(att_c, att_s)
    att = sigmoid(logits)
    return AttentionMaskPair(logits=logits, att=att, att_reverse=sub_from_one(att))


def apply_attention(m, pair: AttentionMaskPair, which: str = "forward") -> Tensor:
    if which not in ("forward", "reverse"):
        raise ValueError(f"apply_attention: which must be 'forward' or 'reverse', got {which!r}")
    m = as_tensor(m)
    mask = pair.att if which == "forward" else pair.att_reverse
    if m.shape != mask.shape:
        raise ShapeError(f"apply_attention: feature shape {m.shape} does not match mask shape {mask.shape}")
    return mul(m, mask)


def attention_forward(m, params: AttentionParams, mode: str) -> AttentionMaskPair:
    """Full block: channel logits x spatial logits -> mask pair."""
    return combine_masks(channel_attention(m, params.channel, mode),
                         spatial_attention(m, params.spatial, mode))
