"""Parameter containers and initializers shared by the network blocks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import RunningStats, Tensor, batchnorm, conv2d, linear, param
from .rng import Rng


@dataclass
class ConvParams:
    weight: Tensor
    bias: Tensor | None = None
    stride: tuple[int, int] = (1, 1)
    pad: tuple[int, int] = (0, 0)

    def forward(self, x) -> Tensor:
        return conv2d(x, self.weight, self.bias, pad=self.pad, stride=self.stride)

    def named(self, prefix: str):
        yield f"{prefix}.weight", self.weight
        if self.bias is not None:
            yield f"{prefix}.bias", self.bias


@dataclass
class LinearParams:
    weight: Tensor
    bias: Tensor | None = None

    def forward(self, x) -> Tensor:
        return linear(x, self.weight, self.bias)

    def named(self, prefix: str):
        yield f"{prefix}.weight", self.weight
        if self.bias is not None:
            yield f"{prefix}.bias", self.bias


@dataclass
class BnParams:
    gamma: Tensor
    beta: Tensor
    running: RunningStats
    eps: float = 1e-5
    momentum: float = 0.1

    def forward(self, x, mode: str) -> Tensor:
        return batchnorm(x, self.gamma, self.beta, mode, self.running,
                         eps=self.eps, momentum=self.momentum)

    def named(self, prefix: str):
        yield f"{prefix}.gamma", self.gamma
        yield f"{prefix}.beta", self.beta

    def buffers(self, prefix: str):
        yield f"{prefix}.running_mean", self.running.mean
        yield f"{prefix}.running_var", self.running.var
        yield f"{prefix}.running_count", np.asarray(float(self.running.count))


def init_conv(rng: Rng, c_out: int, c_in: int, kh: int, kw: int,
              stride=(1, 1), pad=(0, 0), bias: bool = True) -> ConvParams:
    bound = 1.0 / math.sqrt(c_in * kh * kw)
    w = param(rng.uniform(size=(c_out, c_in, kh, kw), low=-bound, high=bound))
    b = param(rng.uniform(size=(c_out,), low=-bound, high=bound)) if bias else None
    return ConvParams(w, b, tuple(stride), tuple(pad))


def init_linear(rng: Rng, f_out: int, f_in: int, bias: bool = True) -> LinearParams:
    bound = 1.0 / math.sqrt(f_in)
    w = param(rng.uniform(size=(f_out, f_in), low=-bound, high=bound))
    b = param(rng.uniform(size=(f_out,), low=-bound, high=bound)) if bias else None
    return LinearParams(w, b)


def init_bn(channels: int) -> BnParams:
    return BnParams(param(np.ones(channels)), param(np.zeros(channels)),
                    RunningStats.create(channels))
