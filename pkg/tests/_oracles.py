"""Independent brute-force reference implementations used as test oracles.

Everything here is written with explicit loops and scalar math, deliberately
sharing no code path with the library.
"""

from __future__ import annotations

import math

import numpy as np


def conv2d_oracle(x: np.ndarray, w: np.ndarray, b: np.ndarray | None,
                  pad: tuple[int, int], stride: tuple[int, int]) -> np.ndarray:
    """Direct sliding-window cross-correlation over a (C,H,W) input."""
    c_in, h, wdt = x.shape
    c_out, _, kh, kw = w.shape
    ph, pw = pad
    sh, sw = stride
    xp = np.zeros((c_in, h + 2 * ph, wdt + 2 * pw))
    xp[:, ph:ph + h, pw:pw + wdt] = x
    ho = (h + 2 * ph - kh) // sh + 1
    wo = (wdt + 2 * pw - kw) // sw + 1
    out = np.zeros((c_out, ho, wo))
    for co in range(c_out):
        for oy in range(ho):
            for ox in range(wo):
                acc = 0.0
                for ci in range(c_in):
                    for ky in range(kh):
                        for kx in range(kw):
                            acc += xp[ci, oy * sh + ky, ox * sw + kx] * w[co, ci, ky, kx]
                out[co, oy, ox] = acc + (b[co] if b is not None else 0.0)
    return out


def linear_oracle(x: np.ndarray, w: np.ndarray, b: np.ndarray | None) -> np.ndarray:
    n, f_in = x.shape
    f_out = w.shape[0]
    out = np.zeros((n, f_out))
    for i in range(n):
        for o in range(f_out):
            acc = 0.0
            for f in range(f_in):
                acc += x[i, f] * w[o, f]
            out[i, o] = acc + (b[o] if b is not None else 0.0)
    return out


def broadcast_mul_oracle(mask: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Explicit index-loop product of a (C,1,1) or (1,H,W) mask with (C,H,W)."""
    c, h, w = x.shape
    out = np.zeros_like(x)
    for ci in range(c):
        for y in range(h):
            for xx in range(w):
                m = mask[ci if mask.shape[0] == c else 0,
                         y if mask.shape[1] == h else 0,
                         xx if mask.shape[2] == w else 0]
                out[ci, y, xx] = x[ci, y, xx] * m
    return out


def rll_oracle(embeddings: np.ndarray, labels, alpha: float, margin: float,
               temperature: float, lambda_balance: float = 1.0,
               positive_weighting: str = "as_written") -> float:
    """Exhaustive double-loop ranked-list loss over all pairs."""
    labels = list(labels)
    b = len(labels)

    def dist(i, j):
        return math.dist(embeddings[i], embeddings[j])

    total = 0.0
    for i in range(b):
        pos = [j for j in range(b)
               if j != i and labels[j] == labels[i] and dist(i, j) > alpha - margin]
        neg = [j for j in range(b)
               if labels[j] != labels[i] and dist(i, j) < alpha]
        lp = 0.0
        if pos:
            if positive_weighting == "as_written":
                weights = [math.exp(temperature * (alpha - dist(i, j))) for j in pos]
            else:
                weights = [1.0 for _ in pos]
            wsum = sum(weights)
            lp = sum(wgt / wsum * max(dist(i, j) - (alpha - margin), 0.0)
                     for wgt, j in zip(weights, pos))
        ln = 0.0
        if neg:
            weights = [math.exp(temperature * (alpha - dist(i, j))) for j in neg]
            wsum = sum(weights)
            ln = sum(wgt / wsum * max(alpha - dist(i, j), 0.0)
                     for wgt, j in zip(weights, neg))
        total += lp + lambda_balance * ln
    return total / b


def smoothed_ce_oracle(logits: np.ndarray, labels, epsilon: float, num_classes: int) -> float:
    """Explicit-sum cross-entropy with smoothed targets."""
    total = 0.0
    for row, y in zip(logits, labels):
        exps = [math.exp(v) for v in row]
        z = sum(exps)
        for i in range(num_classes):
            q = 1.0 - (num_classes - 1) * epsilon / num_classes if i == y else epsilon / num_classes
            total += -q * math.log(exps[i] / z)
    return total / len(labels)


def retrieval_oracle(q_emb: np.ndarray, q_ids, q_cams, g_emb: np.ndarray, g_ids, g_cams):
    """Exhaustive ranking evaluation; returns (mAP, cmc, excluded)."""
    num_g = len(g_ids)
    cmc_rows = []
    aps = []
    excluded = []
    for qi in range(len(q_ids)):
        entries = []
        for gi in range(num_g):
            if g_ids[gi] == q_ids[qi] and g_cams[gi] == q_cams[qi]:
                continue
            entries.append((math.dist(q_emb[qi], g_emb[gi]), gi))
        entries.sort()  # ties resolve by gallery index
        rel = [1 if g_ids[gi] == q_ids[qi] else 0 for _, gi in entries]
        if sum(rel) == 0:
            excluded.append(qi)
            continue
        hits = 0
        ap = 0.0
        for rank, r in enumerate(rel, start=1):
            if r:
                hits += 1
                ap += hits / rank
        aps.append(ap / sum(rel))
        first = rel.index(1)
        row = [1.0 if k >= first else 0.0 for k in range(num_g)]
        cmc_rows.append(row)
    cmc = [sum(row[k] for row in cmc_rows) / len(cmc_rows) for k in range(num_g)]
    return sum(aps) / len(aps), cmc, excluded
