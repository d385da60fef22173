"""Channel-grouped directional convolutions at two scales.

The channels are split into four equal contiguous groups, convolved with
1x3, 3x1, 1x5 and 5x1 kernels under "same" padding (horizontal and
vertical context at two scales), passed through ReLU, and concatenated
back in the original group order. Output shape equals input shape.
"""

from __future__ import annotations

from dataclasses import dataclass

from .autodiff import Tensor, as_tensor, concat, relu, split_channels
from .layers import ConvParams, init_conv
from .rng import Rng

KERNELS = ((1, 3), (3, 1), (1, 5), (5, 1))
PADS = ((0, 1), (1, 0), (0, 2), (2, 0))


@dataclass
class MultiScaleParams:
    groups: tuple[ConvParams, ...]


def init_multiscale(rng: Rng, channels: int) -> MultiScaleParams:
    if channels % 4 != 0:
        raise ValueError(f"multiscale: channel count {channels} not divisible into 4 groups")
    per = channels // 4
    convs = tuple(init_conv(rng, per, per, kh, kw, pad=pad)
                  for (kh, kw), pad in zip(KERNELS, PADS))
    return MultiScaleParams(groups=convs)


def multiscale_forward(x, params: MultiScaleParams) -> Tensor:
    x = as_tensor(x)
    parts = split_channels(x, 4)
    outs = [relu(conv.forward(part)) for part, conv in zip(parts, params.groups)]
    return concat(outs, axis=x.ndim - 3)
