"""Ranked-list metric loss, label-smoothed cross-entropy, and the composite objective.

The metric loss works on raw pairwise Euclidean distances: per query it
mines nontrivial positives (same identity, further than alpha - margin)
and nontrivial negatives (other identity, closer than alpha), applies the
two-sided hinge, and reduces each set by an exponentially weighted mean.
The positive-side weighting is configurable (`as_written` keeps the same
exponent as the negative side, `uniform` replaces it with a plain mean)
because the two readings disagree in the literature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, as_tensor, exp, log, pairwise_distances, relu, take

POSITIVE_WEIGHTINGS = ("as_written", "uniform")


@dataclass
class RllParams:
    alpha: float = 1.2
    margin: float = 0.4
    temperature: float = 10.0
    lambda_balance: float = 1.0
    positive_weighting: str = "as_written"

    def __post_init__(self) -> None:
        if not self.alpha > self.margin > 0:
            raise ValueError(f"require alpha > margin > 0, got alpha={self.alpha}, margin={self.margin}")
        if self.temperature < 0:
            raise ValueError(f"temperature must be nonnegative, got {self.temperature}")
        if self.positive_weighting not in POSITIVE_WEIGHTINGS:
            raise ValueError(f"positive_weighting must be one of {POSITIVE_WEIGHTINGS}")


@dataclass
class SmoothingParams:
    epsilon: float
    num_classes: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in [0, 1), got {self.epsilon}")
        if self.num_classes < 1:
            raise ValueError(f"num_classes must be positive, got {self.num_classes}")


@dataclass
class LossWeights:
    lambda1: float = 0.4   # metric loss
    lambda2: float = 0.1   # reverse-attention branch CE
    lambda3: float = 1.0   # global branch CE
    lambda4: float = 0.03  # multi-scale branch CE (stage 2)
    lambda5: float = 0.03  # multi-scale branch CE (stage 3)

    def __post_init__(self) -> None:
        for name in ("lambda1", "lambda2", "lambda3", "lambda4", "lambda5"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


def pairwise_margin_loss(d_ij: float, same_identity: bool, params: RllParams) -> float:
    """Two-sided hinge: pull positives inside alpha - margin, push negatives past alpha."""
    if d_ij < 0:
        raise ValueError(f"distance must be nonnegative, got {d_ij}")
    if same_identity:
        return max(d_ij - (params.alpha - params.margin), 0.0)
    return max(params.alpha - d_ij, 0.0)


def pair_weight(d_ij: float, params: RllParams) -> float:
    """exp(T * (alpha - d)); equals 1 for every pair when T is 0."""
    return math.exp(params.temperature * (params.alpha - d_ij))


def mine_nontrivial(query_index: int, labels, dist: np.ndarray,
                    params: RllParams) -> tuple[list[int], list[int]]:
    """Index sets of nontrivial positives and negatives for one query."""
    labels = np.asarray(labels)
    boundary = params.alpha - params.margin
    pos = [j for j in range(len(labels))
           if j != query_index and labels[j] == labels[query_index]
           and dist[query_index, j] > boundary]
    neg = [j for j in range(len(labels))
           if labels[j] != labels[query_index] and dist[query_index, j] < params.alpha]
    return pos, neg


def _weighted_hinge_mean(hinges: Tensor, dists: Tensor, params: RllParams) -> Tensor:
    # exponent shifted by its max (a constant) so extreme distances cannot
    # underflow every weight; the normalized mean is unchanged.
    z = params.temperature * (params.alpha - dists)
    w = exp(z - float(z.data.max()))
    return (w * hinges).sum() / w.sum()


def rll_loss(embeddings, labels, params: RllParams) -> Tensor:
    """Mean over queries of the weighted positive and negative hinge terms."""
    e = as_tensor(embeddings)
    labels = np.asarray(labels)
    if e.ndim != 2 or e.shape[0] != len(labels):
        raise ValueError(f"embeddings shape {e.shape} does not match {len(labels)} labels")
    uniq, counts = np.unique(labels, return_counts=True)
    lone = uniq[counts < 2]
    if lone.size:
        raise ValueError(f"degenerate batch: identity {lone[0]} has a single sample")

    b = e.shape[0]
    d = pairwise_distances(e)
    d_detached = d.data
    acc = Tensor(np.zeros(()))
    for i in range(b):
        pos, neg = mine_nontrivial(i, labels, d_detached, params)
        if pos:
            dp = take(d, [i * b + j for j in pos])
            hp = relu(dp - (params.alpha - params.margin))
            if params.positive_weighting == "as_written":
                acc = acc + _weighted_hinge_mean(hp, dp, params)
            else:
                acc = acc + hp.mean()
        if neg:
            dn = take(d, [i * b + j for j in neg])
            hn = relu(params.alpha - dn)
            acc = acc + params.lambda_balance * _weighted_hinge_mean(hn, dn, params)
    return acc / float(b)


def smooth_labels(y: int, params: SmoothingParams) -> np.ndarray:
    """Smoothed target distribution: 1 - (N-1)eps/N on the true class, eps/N elsewhere."""
    n = params.num_classes
    if not 0 <= y < n:
        raise ValueError(f"class index {y} out of range for {n} classes")
    q = np.full(n, params.epsilon / n)
    q[y] = 1.0 - (n - 1) * params.epsilon / n
    return q


def smoothed_ce_loss(logits, labels, params: SmoothingParams) -> Tensor:
    """Mean over the batch of -sum_i q_i log softmax(logits)_i."""
    logits = as_tensor(logits)
    if logits.ndim != 2 or logits.shape[1] != params.num_classes:
        raise ValueError(f"logits shape {logits.shape} does not match {params.num_classes} classes")
    labels = np.asarray(labels)
    if logits.shape[0] != len(labels):
        raise ValueError(f"{logits.shape[0]} logit rows but {len(labels)} labels")
    q = np.stack([smooth_labels(int(y), params) for y in labels])
    # max-subtraction with a detached shift: softmax is shift-invariant, so
    # treating the per-row max as a constant leaves value and gradient exact.
    shifted = logits - logits.data.max(axis=1, keepdims=True)
    lse = log(exp(shifted).sum(axis=1))
    per_query = lse - (shifted * q).sum(axis=1)
    return per_query.mean()


def total_loss(l_rll, l_id1, l_id2, l_id3, l_id4, weights: LossWeights) -> Tensor:
    """Weighted sum of the five supervision terms; `None` terms are dropped."""
    acc = Tensor(np.zeros(()))
    for w, term in ((weights.lambda1, l_rll), (weights.lambda2, l_id1),
                    (weights.lambda3, l_id2), (weights.lambda4, l_id3),
                    (weights.lambda5, l_id4)):
        if term is None:
            continue
        acc = acc + w * as_tensor(term)
    return acc
