"""Finite-difference verification suites for the differentiable blocks.

Each suite builds a small random instance, defines a scalar objective, and
compares analytic gradients of every parameter (and, where cheap, the
input) against central differences.
"""

from __future__ import annotations

import numpy as np

from .attention import apply_attention, attention_forward, init_attention
from .autodiff import GradCheckReport, Tensor, grad_check, tensor_sum
from .config import ModelConfig
from .losses import RllParams, SmoothingParams, rll_loss, smoothed_ce_loss, total_loss, LossWeights
from .multiscale import init_multiscale, multiscale_forward
from .network import SampleBatch, forward_train, init_parameters, named_parameters
from .rng import Rng

DEFAULT_STEP = 1e-5
DEFAULT_TOL = 1e-4


def _named_tensors(params, prefix: str) -> list[tuple[str, Tensor]]:
    return list(params.named(prefix))


def gradcheck_attention(seed: int = 0, step: float = DEFAULT_STEP, tol: float = DEFAULT_TOL) -> GradCheckReport:
    """Forward and reverse mask paths through channel+spatial attention."""
    rng = Rng(seed)
    c, r, b, h, w = 8, 4, 2, 5, 5
    params = init_attention(rng, c, r)
    x = Tensor(rng.normal(size=(b, c, h, w)), requires_grad=True)
    proj_f = rng.normal(size=(b, c, h, w))
    proj_r = rng.normal(size=(b, c, h, w))

    names, points = ["input"], [x]
    for block, prefix in ((params.channel.reduce, "channel.reduce"),
                          (params.channel.expand, "channel.expand"),
                          (params.channel.bn, "channel.bn"),
                          (params.spatial.reduce1, "spatial.reduce1"),
                          (params.spatial.conv_a, "spatial.conv_a"),
                          (params.spatial.conv_b, "spatial.conv_b"),
                          (params.spatial.reduce2, "spatial.reduce2"),
                          (params.spatial.bn, "spatial.bn")):
        for name, tensor in _named_tensors(block, prefix):
            names.append(name)
            points.append(tensor)

    def f(*_):
        pair = attention_forward(x, params, "train")
        fwd = apply_attention(x, pair, "forward")
        rev = apply_attention(x, pair, "reverse")
        return tensor_sum(fwd * proj_f) + tensor_sum(rev * proj_r)

    return grad_check(f, points, step=step, tol=tol, names=names)


def gradcheck_multiscale(seed: int = 0, step: float = DEFAULT_STEP, tol: float = DEFAULT_TOL) -> GradCheckReport:
    rng = Rng(seed)
    c, b, h, w = 8, 2, 6, 6
    params = init_multiscale(rng, c)
    x = Tensor(rng.normal(size=(b, c, h, w)), requires_grad=True)
    proj = rng.normal(size=(b, c, h, w))

    names, points = ["input"], [x]
    for g, conv in enumerate(params.groups):
        for name, tensor in _named_tensors(conv, f"group{g}"):
            names.append(name)
            points.append(tensor)

    def f(*_):
        return tensor_sum(multiscale_forward(x, params) * proj)

    return grad_check(f, points, step=step, tol=tol, names=names)


def gradcheck_losses(seed: int = 0, step: float = DEFAULT_STEP, tol: float = DEFAULT_TOL) -> GradCheckReport:
    """Metric loss on a PK batch plus smoothed CE on random logits."""
    rng = Rng(seed)
    labels = np.array([0, 0, 1, 1, 2, 2, 3, 3])
    embeddings = Tensor(rng.normal(size=(8, 4), std=0.7), requires_grad=True)
    logits = Tensor(rng.normal(size=(4, 5)), requires_grad=True)
    ce_labels = np.array([0, 2, 4, 1])
    rll_params = RllParams(alpha=1.2, margin=0.4, temperature=10.0)
    smoothing = SmoothingParams(epsilon=0.1, num_classes=5)

    def f(*_):
        return (rll_loss(embeddings, labels, rll_params)
                + smoothed_ce_loss(logits, ce_labels, smoothing))

    return grad_check(f, [embeddings, logits], step=step, tol=tol,
                      names=["embeddings", "logits"])


def gradcheck_network(seed: int = 0, step: float = DEFAULT_STEP, tol: float = DEFAULT_TOL) -> GradCheckReport:
    """The composite five-loss objective through the full training forward."""
    rng = Rng(seed)
    model = ModelConfig(stage_channels=(4, 8, 8, 8), stage_strides=(1, 2, 2, 1),
                        blocks_per_stage=1, reduction_ratio=4)
    num_classes = 2
    state = init_parameters(model, num_classes, rng.split())
    labels = np.array([0, 0, 1, 1])
    batch = SampleBatch(images=rng.normal(size=(4, 3, 8, 4), std=0.5),
                        identity_labels=labels, camera_labels=np.zeros(4, dtype=np.int64))
    rll_params = RllParams(alpha=1.2, margin=0.4, temperature=10.0)
    smoothing = SmoothingParams(epsilon=0.1, num_classes=num_classes)
    weights = LossWeights()
    params = named_parameters(state)

    def f(*_):
        out = forward_train(batch, state, mode="train")
        return total_loss(
            rll_loss(out.embedding, labels, rll_params),
            smoothed_ce_loss(out.logits_reverse, labels, smoothing),
            smoothed_ce_loss(out.logits_global, labels, smoothing),
            smoothed_ce_loss(out.logits_scale2, labels, smoothing),
            smoothed_ce_loss(out.logits_scale3, labels, smoothing),
            weights,
        )

    return grad_check(f, [p for _, p in params], step=step, tol=tol,
                      names=[n for n, _ in params])


BLOCKS = {
    "attention": gradcheck_attention,
    "multiscale": gradcheck_multiscale,
    "losses": gradcheck_losses,
    "network": gradcheck_network,
}


def run(scope: str = "all", seed: int = 0) -> dict[str, GradCheckReport]:
    if scope == "all":
        return {name: fn(seed) for name, fn in BLOCKS.items()}
    if scope not in BLOCKS:
        raise KeyError(scope)
    return {scope: BLOCKS[scope](seed)}
