"""Single-query retrieval scoring: mean average precision and CMC.

For each query the gallery is ranked by Euclidean distance (ties broken by
original gallery index, so results are permutation-invariant); entries
sharing both identity and camera with the query are excluded before
scoring. Queries with no remaining relevant item are excluded from mAP
and reported.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class EvalReport:
    map: float
    cmc: np.ndarray
    per_query_ap: list[float | None]
    excluded_queries: list[int]

    def rank_k(self, k: int) -> float:
        """CMC at rank k (1-based); saturates at the last computed rank."""
        return float(self.cmc[min(k, len(self.cmc)) - 1])

    def to_json_dict(self) -> dict:
        return {"map": self.map,
                "cmc": [float(v) for v in self.cmc],
                "excluded_queries": list(self.excluded_queries)}


def evaluate(query_embeddings, query_ids, query_cams,
             gallery_embeddings, gallery_ids, gallery_cams,
             max_rank: int | None = None) -> EvalReport:
    q = np.asarray(query_embeddings, dtype=np.float64)
    g = np.asarray(gallery_embeddings, dtype=np.float64)
    query_ids = np.asarray(query_ids)
    query_cams = np.asarray(query_cams)
    gallery_ids = np.asarray(gallery_ids)
    gallery_cams = np.asarray(gallery_cams)
    if q.ndim != 2 or g.ndim != 2 or q.shape[1] != g.shape[1]:
        raise ValueError(f"embedding shapes {q.shape} and {g.shape} are incompatible")
    if g.shape[0] == 0:
        raise ValueError("gallery is empty")
    if max_rank is None:
        max_rank = g.shape[0]

    diff = q[:, None, :] - g[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))

    cmc_hits = np.zeros(max_rank)
    aps: list[float] = []
    per_query: list[float | None] = []
    excluded: list[int] = []
    for qi in range(q.shape[0]):
        keep = ~((gallery_ids == query_ids[qi]) & (gallery_cams == query_cams[qi]))
        if not keep.any():
            raise ValueError(f"query {qi} has an empty valid gallery after camera exclusion")
        order = np.argsort(dist[qi][keep], kind="stable")
        relevant = (gallery_ids[keep][order] == query_ids[qi])
        if not relevant.any():
            excluded.append(qi)
            per_query.append(None)
            continue
        hits = np.cumsum(relevant)
        precision = hits / np.arange(1, relevant.size + 1)
        ap = float((precision * relevant).sum() / relevant.sum())
        aps.append(ap)
        per_query.append(ap)
        first = int(np.argmax(relevant))
        if first < max_rank:
            cmc_hits[first:] += 1.0

    if not aps:
        raise ValueError("no query has a valid positive in the gallery")
    return EvalReport(
        map=float(np.mean(aps)),
        cmc=cmc_hits / len(aps),
        per_query_ap=per_query,
        excluded_queries=excluded,
    )
