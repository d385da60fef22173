"""Training loop: PK batches, augmentation, five losses, Adam, CSV log, checkpoints."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import Tape, Tensor, backward
from .config import Config, config_to_dict, validate_config
from .datapipe import AugmentParams, SyntheticDataset, augment, generate_dataset, pk_sample, split_query_gallery
from .evaluation import EvalReport, evaluate
from .losses import LossWeights, RllParams, SmoothingParams, rll_loss, smoothed_ce_loss, total_loss
from .network import (SampleBatch, TrainNetState, forward_infer, forward_train, init_parameters,
                      load_records_into, named_parameters, state_records)
from .optim import AdamState, adam_step, lr_at_epoch
from .rng import Rng
from .serialize import read_checkpoint, write_checkpoint


class TrainingAbort(RuntimeError):
    """Non-finite loss; the message carries the iteration context."""


@dataclass
class TrainResult:
    state: TrainNetState
    checkpoint_path: Path
    log_path: Path
    iterations: int
    totals: list[float]


def _fmt(x: float) -> str:
    return repr(float(x))


def save_checkpoint(path, state: TrainNetState, cfg: Config, iteration: int) -> None:
    manifest = {"config": config_to_dict(cfg), "iteration": iteration, "seed": cfg.seed}
    write_checkpoint(path, manifest, state_records(state))


def load_checkpoint(path) -> tuple[Config, TrainNetState, dict]:
    """Rebuild a state from a checkpoint; auxiliary branches may be absent."""
    from .config import config_from_dict

    manifest, records = read_checkpoint(path)
    cfg = validate_config(config_from_dict(manifest["config"]))
    state = init_parameters(cfg.model, cfg.dataset.num_identities, Rng(cfg.seed))
    load_records_into(state, records)
    return cfg, state, manifest


def train(cfg: Config, out_dir, dataset: SyntheticDataset | None = None) -> TrainResult:
    validate_config(cfg)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if dataset is None:
        dataset = generate_dataset(cfg.dataset)

    num_classes = dataset.num_identities
    root = Rng(cfg.seed)
    init_rng, sample_rng, augment_rng = root.split(), root.split(), root.split()
    state = init_parameters(cfg.model, num_classes, init_rng)
    params = named_parameters(state)
    adam = AdamState(cfg.adam)

    # PK width cannot exceed the identities actually present at desk scale.
    p_eff = min(cfg.trainer.batch_p, dataset.num_identities)
    rll_params = RllParams(alpha=cfg.rll.alpha, margin=cfg.rll.margin,
                           temperature=cfg.rll.temperature,
                           lambda_balance=cfg.rll.lambda_balance,
                           positive_weighting=cfg.rll.positive_weighting)
    smoothing = SmoothingParams(cfg.smoothing.epsilon, num_classes)
    weights = LossWeights(cfg.loss_weights.lambda1, cfg.loss_weights.lambda2,
                          cfg.loss_weights.lambda3, cfg.loss_weights.lambda4,
                          cfg.loss_weights.lambda5)
    aug = AugmentParams(flip_probability=cfg.augment.flip_probability,
                        erase_probability=cfg.augment.erase_probability,
                        erase_area_range=tuple(cfg.augment.erase_area_range),
                        erase_aspect_range=tuple(cfg.augment.erase_aspect_range),
                        erase_fill=cfg.augment.erase_fill)

    reverse_on = cfg.model.reverse_attention_on
    ms_on = cfg.model.multiscale_supervision_on
    columns = ["iter", "epoch", "lr", "l_rll"]
    if reverse_on:
        columns.append("l_id1")
    columns.append("l_id2")
    if ms_on:
        columns.extend(["l_id3", "l_id4"])
    columns.append("total")

    log_path = out_dir / "train_log.csv"
    checkpoint_path = out_dir / "checkpoint.ckpt"
    totals: list[float] = []
    with open(log_path, "w", encoding="utf-8") as log:
        log.write(",".join(columns) + "\n")
        for it in range(1, cfg.trainer.iterations + 1):
            epoch = (it - 1) // cfg.trainer.iterations_per_epoch + 1
            lr = lr_at_epoch(epoch, cfg.schedule) * cfg.trainer.lr_scale
            batch = pk_sample(dataset, p_eff, cfg.trainer.batch_k, sample_rng)
            images = np.stack([augment(img, aug, augment_rng) for img in batch.images])
            batch = SampleBatch(images, batch.identity_labels, batch.camera_labels)

            with Tape() as tape:
                out = forward_train(batch, state, mode="train")
                l_rll = rll_loss(out.embedding, batch.identity_labels, rll_params)
                l_id1 = (smoothed_ce_loss(out.logits_reverse, batch.identity_labels, smoothing)
                         if reverse_on else None)
                l_id2 = smoothed_ce_loss(out.logits_global, batch.identity_labels, smoothing)
                l_id3 = (smoothed_ce_loss(out.logits_scale2, batch.identity_labels, smoothing)
                         if ms_on else None)
                l_id4 = (smoothed_ce_loss(out.logits_scale3, batch.identity_labels, smoothing)
                         if ms_on else None)
                total = total_loss(l_rll, l_id1, l_id2, l_id3, l_id4, weights)
                total_value = total.item()
                if not math.isfinite(total_value):
                    parts = {"l_rll": l_rll.item(), "l_id2": l_id2.item()}
                    if l_id1 is not None:
                        parts["l_id1"] = l_id1.item()
                    if l_id3 is not None:
                        parts.update(l_id3=l_id3.item(), l_id4=l_id4.item())
                    raise TrainingAbort(f"non-finite total loss at iteration {it} "
                                        f"(epoch {epoch}, lr {lr:g}): {parts}")
                backward(total, tape)

            adam_step(params, adam, lr)
            for _, p in params:
                p.grad = None

            row = [str(it), str(epoch), _fmt(lr), _fmt(l_rll.item())]
            if reverse_on:
                row.append(_fmt(l_id1.item()))
            row.append(_fmt(l_id2.item()))
            if ms_on:
                row.extend([_fmt(l_id3.item()), _fmt(l_id4.item())])
            row.append(_fmt(total_value))
            log.write(",".join(row) + "\n")
            totals.append(total_value)

            interval = cfg.trainer.checkpoint_interval
            if interval and it % interval == 0 and it != cfg.trainer.iterations:
                save_checkpoint(out_dir / f"checkpoint_iter{it}.ckpt", state, cfg, it)

    save_checkpoint(checkpoint_path, state, cfg, cfg.trainer.iterations)
    return TrainResult(state=state, checkpoint_path=checkpoint_path, log_path=log_path,
                       iterations=cfg.trainer.iterations, totals=totals)


def embed_images(state: TrainNetState, images: np.ndarray, batch_size: int = 64) -> np.ndarray:
    """Inference embeddings, computed in batches."""
    chunks = [forward_infer(Tensor(images[i:i + batch_size]), state).data
              for i in range(0, images.shape[0], batch_size)]
    return np.concatenate(chunks, axis=0)


def run_evaluation(cfg: Config, state: TrainNetState, dataset: SyntheticDataset | None = None) -> EvalReport:
    """Split the dataset, embed with the inference path, and score retrieval."""
    if dataset is None:
        dataset = generate_dataset(cfg.dataset)
    q_idx, g_idx = split_query_gallery(dataset, cfg.trainer.queries_per_identity)
    q_emb = embed_images(state, dataset.images[q_idx])
    g_emb = embed_images(state, dataset.images[g_idx])
    return evaluate(q_emb, dataset.identity_labels[q_idx], dataset.camera_labels[q_idx],
                    g_emb, dataset.identity_labels[g_idx], dataset.camera_labels[g_idx])
