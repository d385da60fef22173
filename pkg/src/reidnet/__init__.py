"""Desk-scale attention re-identification network with a from-scratch autodiff core."""

from .autodiff import (GradCheckReport, RunningStats, ShapeError, Tape, Tensor, backward,
                       batchnorm, concat, conv2d, global_avg_pool, grad_check, linear,
                       pairwise_distances, param, relu, sigmoid, split_channels, sub_from_one)
from .attention import (AttentionMaskPair, AttentionParams, apply_attention, attention_forward,
                        channel_attention, combine_masks, init_attention, spatial_attention)
from .config import Config, ConfigError, default_config, validate_config
from .datapipe import (AugmentParams, SyntheticDataset, augment, export_dataset,
                       generate_dataset, import_dataset, pk_sample, split_query_gallery)
from .evaluation import EvalReport, evaluate
from .losses import (LossWeights, RllParams, SmoothingParams, mine_nontrivial, pair_weight,
                     pairwise_margin_loss, rll_loss, smooth_labels, smoothed_ce_loss, total_loss)
from .multiscale import MultiScaleParams, init_multiscale, multiscale_forward
from .network import (ForwardOutputs, SampleBatch, TrainNetState, backbone_stage, forward_infer,
                      forward_train, inference_records, init_parameters, load_records_into,
                      named_parameters, parameter_count, state_records)
from .optim import AdamState, adam_step, lr_at_epoch
from .rng import Rng
from .serialize import (CheckpointError, read_checkpoint, read_tensor, write_checkpoint,
                        write_tensor)
from .trainer import TrainingAbort, TrainResult, embed_images, load_checkpoint, run_evaluation, save_checkpoint, train

__version__ = "0.1.0"
