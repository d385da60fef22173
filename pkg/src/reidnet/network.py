"""Four-stage residual trunk with per-stage attention, five training branches,
and the branch-3-only inference path.

Each stage produces raw features F_k; the attention block turns them into a
mask pair, and F_k * att feeds the next stage. The training head adds:
the reverse-attention branch (pooled F_k * att_reverse concatenated over
stages, then classified), the global embedding (pooled stage-4 output,
which feeds the metric loss), its BN + classifier twin, and two
multi-scale deep-supervision branches on the attended stage-2/3 outputs.
Inference keeps only trunk + attention + the embedding BN.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .attention import AttentionMaskPair, AttentionParams, apply_attention, attention_forward, init_attention
from .autodiff import Tensor, as_tensor, concat, global_avg_pool, relu
from .config import ModelConfig
from .layers import BnParams, ConvParams, LinearParams, init_bn, init_conv, init_linear
from .multiscale import MultiScaleParams, init_multiscale, multiscale_forward
from .rng import Rng

# Record names needed by forward_infer: trunk + attention + embedding BN.
_INFERENCE_PREFIXES = ("stage", "branch3.bn.")


@dataclass
class ResidualBlock:
    conv1: ConvParams
    bn1: BnParams
    conv2: ConvParams
    bn2: BnParams
    skip: ConvParams | None
    skip_bn: BnParams | None

    def forward(self, x, mode: str) -> Tensor:
        h = relu(self.bn1.forward(self.conv1.forward(x), mode))
        h = self.bn2.forward(self.conv2.forward(h), mode)
        s = x if self.skip is None else self.skip_bn.forward(self.skip.forward(x), mode)
        return relu(h + s)


@dataclass
class SampleBatch:
    """PK mini-batch: stacked images with identity and camera labels."""

    images: np.ndarray  # (B, 3, H, W)
    identity_labels: np.ndarray
    camera_labels: np.ndarray


@dataclass
class ForwardOutputs:
    embedding: Tensor                 # (B, D) pooled stage-4 feature, feeds the metric loss
    logits_global: Tensor             # BN + classifier on the embedding
    logits_reverse: Tensor | None     # reverse-attention branch
    logits_scale2: Tensor | None      # multi-scale supervision on stage-2 output
    logits_scale3: Tensor | None      # multi-scale supervision on stage-3 output
    mask_pairs: list[AttentionMaskPair]


@dataclass
class TrainNetState:
    stage_channels: tuple[int, int, int, int]
    stage_strides: tuple[int, int, int, int]
    blocks_per_stage: int
    reduction_ratio: int
    num_classes: int
    reverse_attention_on: bool
    multiscale_supervision_on: bool
    stages: list[list[ResidualBlock]]
    attention: list[AttentionParams]
    embed_bn: BnParams
    cls_global: LinearParams | None
    cls_reverse: LinearParams | None
    ms_stage2: MultiScaleParams | None
    ms_stage3: MultiScaleParams | None
    cls_scale2: LinearParams | None
    cls_scale3: LinearParams | None

    @property
    def embedding_dim(self) -> int:
        return self.stage_channels[3]


def _init_block(rng: Rng, c_in: int, c_out: int, stride: int) -> ResidualBlock:
    conv1 = init_conv(rng, c_out, c_in, 3, 3, stride=(stride, stride), pad=(1, 1), bias=False)
    conv2 = init_conv(rng, c_out, c_out, 3, 3, pad=(1, 1), bias=False)
    if stride != 1 or c_in != c_out:
        skip = init_conv(rng, c_out, c_in, 1, 1, stride=(stride, stride), bias=False)
        skip_bn = init_bn(c_out)
    else:
        skip, skip_bn = None, None
    return ResidualBlock(conv1, init_bn(c_out), conv2, init_bn(c_out), skip, skip_bn)


def init_parameters(model: ModelConfig, num_classes: int, rng: Rng) -> TrainNetState:
    """Fan-in-scaled uniform init; deterministic given the rng stream.

    Each component draws from its own derived stream, so toggling the
    auxiliary branches never changes the trunk or attention parameters.
    """
    channels = tuple(model.stage_channels)
    strides = tuple(model.stage_strides)
    if len(channels) != 4 or len(strides) != 4:
        raise ValueError("model must declare exactly four stages")
    if strides[3] != 1:
        raise ValueError("last stage stride must be 1")
    r = model.reduction_ratio
    for c in channels:
        if c % r != 0:
            raise ValueError(f"stage channel count {c} not divisible by reduction ratio {r}")
        if c % 4 != 0:
            raise ValueError(f"stage channel count {c} not divisible by 4 (multi-scale groups)")
    if num_classes < 1:
        raise ValueError("num_classes must be positive")

    trunk_rng, att_rng, ms_rng, head_rng = (rng.split() for _ in range(4))

    stages: list[list[ResidualBlock]] = []
    c_in = 3
    for c_out, stride in zip(channels, strides):
        blocks = [_init_block(trunk_rng, c_in, c_out, stride)]
        for _ in range(model.blocks_per_stage - 1):
            blocks.append(_init_block(trunk_rng, c_out, c_out, 1))
        stages.append(blocks)
        c_in = c_out

    attn = [init_attention(att_rng, c, r) for c in channels]

    if model.multiscale_supervision_on:
        ms2 = init_multiscale(ms_rng, channels[1])
        ms3 = init_multiscale(ms_rng, channels[2])
    else:
        ms2 = ms3 = None

    cls_reverse = (init_linear(head_rng, num_classes, sum(channels), bias=False)
                   if model.reverse_attention_on else None)
    cls_global = init_linear(head_rng, num_classes, channels[3], bias=False)
    cls_scale2 = (init_linear(head_rng, num_classes, channels[1], bias=False)
                  if model.multiscale_supervision_on else None)
    cls_scale3 = (init_linear(head_rng, num_classes, channels[2], bias=False)
                  if model.multiscale_supervision_on else None)

    return TrainNetState(
        stage_channels=channels,
        stage_strides=strides,
        blocks_per_stage=model.blocks_per_stage,
        reduction_ratio=r,
        num_classes=num_classes,
        reverse_attention_on=model.reverse_attention_on,
        multiscale_supervision_on=model.multiscale_supervision_on,
        stages=stages,
        attention=attn,
        embed_bn=init_bn(channels[3]),
        cls_global=cls_global,
        cls_reverse=cls_reverse,
        ms_stage2=ms2,
        ms_stage3=ms3,
        cls_scale2=cls_scale2,
        cls_scale3=cls_scale3,
    )


def backbone_stage(x, stage_index: int, state: TrainNetState, mode: str) -> tuple[Tensor, AttentionMaskPair]:
    """Raw stage features plus the stage's attention mask pair."""
    h = as_tensor(x)
    expected = 3 if stage_index == 0 else state.stage_channels[stage_index - 1]
    if h.shape[-3] != expected:
        raise ValueError(f"stage {stage_index + 1} expects {expected} input channels, got {h.shape[-3]}")
    for block in state.stages[stage_index]:
        h = block.forward(h, mode)
    pair = attention_forward(h, state.attention[stage_index], mode)
    return h, pair


def _pooled_flat(x: Tensor) -> Tensor:
    pooled = global_avg_pool(x)
    return pooled.reshape(pooled.shape[:-2])


def forward_train(batch: SampleBatch, state: TrainNetState, mode: str = "train") -> ForwardOutputs:
    """All branches enabled by the ablation flags; returns logits and the embedding."""
    x = as_tensor(batch.images)
    if x.ndim != 4:
        raise ValueError(f"expected a (B,3,H,W) image batch, got shape {x.shape}")
    reverse_on = state.reverse_attention_on and state.cls_reverse is not None
    ms_on = state.multiscale_supervision_on and state.ms_stage2 is not None

    pairs: list[AttentionMaskPair] = []
    reverse_pooled: list[Tensor] = []
    scale_inputs: dict[int, Tensor] = {}
    h = x
    for k in range(4):
        feats, pair = backbone_stage(h, k, state, mode)
        pairs.append(pair)
        gated = apply_attention(feats, pair, "forward")
        if reverse_on:
            reverse_pooled.append(_pooled_flat(apply_attention(feats, pair, "reverse")))
        if ms_on and k in (1, 2):
            scale_inputs[k] = gated
        h = gated

    embedding = _pooled_flat(h)
    if state.cls_global is None:
        raise ValueError("training forward requires the global classifier head")
    logits_global = state.cls_global.forward(state.embed_bn.forward(embedding, mode))

    logits_reverse = None
    if reverse_on:
        logits_reverse = state.cls_reverse.forward(concat(reverse_pooled, axis=1))

    logits_scale2 = logits_scale3 = None
    if ms_on:
        logits_scale2 = state.cls_scale2.forward(
            _pooled_flat(multiscale_forward(scale_inputs[1], state.ms_stage2)))
        logits_scale3 = state.cls_scale3.forward(
            _pooled_flat(multiscale_forward(scale_inputs[2], state.ms_stage3)))

    return ForwardOutputs(
        embedding=embedding,
        logits_global=logits_global,
        logits_reverse=logits_reverse,
        logits_scale2=logits_scale2,
        logits_scale3=logits_scale3,
        mask_pairs=pairs,
    )


def forward_infer(images, state: TrainNetState) -> Tensor:
    """Post-BN global embedding; touches no auxiliary branch."""
    x = as_tensor(images)
    if x.ndim != 4:
        raise ValueError(f"expected a (B,3,H,W) image batch, got shape {x.shape}")
    h = x
    for k in range(4):
        feats, pair = backbone_stage(h, k, state, "eval")
        h = apply_attention(feats, pair, "forward")
    return state.embed_bn.forward(_pooled_flat(h), "eval")


# ---------------------------------------------------------------------------
# parameter naming, checkpoint records

def _block_items(prefix: str, block: ResidualBlock):
    yield from block.conv1.named(f"{prefix}.conv1")
    yield from block.bn1.named(f"{prefix}.bn1")
    yield from block.conv2.named(f"{prefix}.conv2")
    yield from block.bn2.named(f"{prefix}.bn2")
    if block.skip is not None:
        yield from block.skip.named(f"{prefix}.skip")
        yield from block.skip_bn.named(f"{prefix}.skip_bn")


def _attention_items(prefix: str, attn: AttentionParams):
    ch, sp = attn.channel, attn.spatial
    yield from ch.reduce.named(f"{prefix}.channel.reduce")
    yield from ch.expand.named(f"{prefix}.channel.expand")
    yield from ch.bn.named(f"{prefix}.channel.bn")
    yield from sp.reduce1.named(f"{prefix}.spatial.reduce1")
    yield from sp.conv_a.named(f"{prefix}.spatial.conv_a")
    yield from sp.conv_b.named(f"{prefix}.spatial.conv_b")
    yield from sp.reduce2.named(f"{prefix}.spatial.reduce2")
    yield from sp.bn.named(f"{prefix}.spatial.bn")


def named_parameters(state: TrainNetState) -> list[tuple[str, Tensor]]:
    """Trainable tensors in a deterministic order (the optimizer order)."""
    items: list[tuple[str, Tensor]] = []
    for k, blocks in enumerate(state.stages):
        for i, block in enumerate(blocks):
            items.extend(_block_items(f"stage{k + 1}.block{i}", block))
        items.extend(_attention_items(f"stage{k + 1}.att", state.attention[k]))
    if state.cls_reverse is not None:
        items.extend(state.cls_reverse.named("branch1.classifier"))
    items.extend(state.embed_bn.named("branch3.bn"))
    if state.cls_global is not None:
        items.extend(state.cls_global.named("branch3.classifier"))
    for branch, ms, cls in (("branch4", state.ms_stage2, state.cls_scale2),
                            ("branch5", state.ms_stage3, state.cls_scale3)):
        if ms is None:
            continue
        for g, conv in enumerate(ms.groups):
            items.extend(conv.named(f"{branch}.ms.group{g}"))
        items.extend(cls.named(f"{branch}.classifier"))
    return items


def _named_bn(state: TrainNetState):
    for k, blocks in enumerate(state.stages):
        for i, block in enumerate(blocks):
            yield f"stage{k + 1}.block{i}.bn1", block.bn1
            yield f"stage{k + 1}.block{i}.bn2", block.bn2
            if block.skip_bn is not None:
                yield f"stage{k + 1}.block{i}.skip_bn", block.skip_bn
        yield f"stage{k + 1}.att.channel.bn", state.attention[k].channel.bn
        yield f"stage{k + 1}.att.spatial.bn", state.attention[k].spatial.bn
    yield "branch3.bn", state.embed_bn


def state_records(state: TrainNetState) -> "OrderedDict[str, np.ndarray]":
    """Checkpoint payload: parameters plus BN running statistics."""
    records: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for name, tensor in named_parameters(state):
        records[name] = tensor.data.copy()
    for prefix, bn in _named_bn(state):
        for name, arr in bn.buffers(prefix):
            records[name] = np.asarray(arr, dtype=np.float64).copy()
    return records


def parameter_count(records) -> int:
    return int(sum(np.asarray(a).size for a in records.values()))


def inference_records(records) -> "OrderedDict[str, np.ndarray]":
    """Subset of records the inference path needs."""
    return OrderedDict((name, arr) for name, arr in records.items()
                       if name.startswith(_INFERENCE_PREFIXES))


def load_records_into(state: TrainNetState, records) -> None:
    """Overwrite state tensors from checkpoint records.

    Missing auxiliary branches (branch1/4/5, branch3 classifier) are dropped
    from the state, which is exactly the inference-only configuration; a
    missing trunk/attention/embedding-BN record is an error.
    """
    from .serialize import CheckpointError

    def load_tensor(name: str, tensor: Tensor) -> None:
        arr = records[name]
        if arr.shape != tensor.data.shape:
            raise CheckpointError(f"record '{name}' has shape {arr.shape}, expected {tensor.data.shape}")
        tensor.data = arr.astype(np.float64).copy()

    available = set(records)
    aux_groups = {
        "branch1.": lambda: setattr(state, "cls_reverse", None),
        "branch3.classifier": lambda: setattr(state, "cls_global", None),
        "branch4.": lambda: (setattr(state, "ms_stage2", None), setattr(state, "cls_scale2", None)),
        "branch5.": lambda: (setattr(state, "ms_stage3", None), setattr(state, "cls_scale3", None)),
    }
    for name, tensor in named_parameters(state):
        if name in available:
            continue
        if name.startswith(_INFERENCE_PREFIXES):
            raise CheckpointError(f"checkpoint is missing inference parameter '{name}'")

    for prefix, dropper in aux_groups.items():
        names = [n for n, _ in named_parameters(state) if n.startswith(prefix)]
        missing = [n for n in names if n not in available]
        if missing and len(missing) != len(names):
            raise CheckpointError(f"checkpoint has a partial '{prefix}' branch (missing {missing[0]})")
        if missing:
            dropper()

    for name, tensor in named_parameters(state):
        load_tensor(name, tensor)
    for prefix, bn in _named_bn(state):
        mean_name, var_name, count_name = (f"{prefix}.running_mean", f"{prefix}.running_var",
                                           f"{prefix}.running_count")
        for n in (mean_name, var_name, count_name):
            if n not in available:
                raise CheckpointError(f"checkpoint is missing BN statistics record '{n}'")
        if records[mean_name].shape != bn.running.mean.shape:
            raise CheckpointError(f"record '{mean_name}' has shape {records[mean_name].shape}, "
                                  f"expected {bn.running.mean.shape}")
        bn.running.mean = records[mean_name].astype(np.float64).copy()
        bn.running.var = records[var_name].astype(np.float64).copy()
        bn.running.count = int(records[count_name])
