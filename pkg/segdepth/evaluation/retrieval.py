"""Layout-aware retrieval.

Every image embedding queries all others by cosine similarity of
l2-normalised embeddings.

- Scene level: a hit when the top-K neighbours contain another frame of the query's scene
- Frame-k: a hit when the top-K neighbours contain a frame of the same scene
  at most k frames away from the query
"""
import logging
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from segdepth.evaluation.depth_metrics import UndefinedMetric

logger = logging.getLogger(__name__)


#: Top-K values of the retrieval table
DEFAULT_TOP_KS = (1, 3, 5)

#: Temporal ranges of the frame-k sweep
DEFAULT_FRAME_KS = (1, 2, 3, 4, 5)


def cosine_similarity_matrix(embeddings: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarity, the diagonal set to -inf."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    norms = np.linalg.norm(embeddings, axis=1, keepdims=True)
    unit = embeddings / np.maximum(norms, 1e-12)
    similarity = unit @ unit.T
    np.fill_diagonal(similarity, -np.inf)
    return similarity


def _targets(group_ids: np.ndarray, frames: Optional[np.ndarray], frame_k: Optional[int]) -> np.ndarray:
    """Boolean n×n matrix of acceptable matches per query."""
    same_group = group_ids[:, None] == group_ids[None, :]
    np.fill_diagonal(same_group, False)
    if frame_k is None:
        return same_group
    assert frames is not None, "Frame-k retrieval needs frame ids"
    near = np.abs(frames[:, None] - frames[None, :]) <= frame_k
    return same_group & near


def retrieval_topk(
        embeddings: np.ndarray,
        group_ids: Sequence[int],
        k: int = 1,
        frames: Optional[Sequence[int]] = None,
        frame_k: Optional[int] = None,
) -> float:
    """Fraction of queries whose top-k neighbours hold a match.

    Queries without any possible match are skipped. Ranking ties go to the lower index.

    :param frame_k:
        Restrict matches to frames of the same group at most this far away

    :raise UndefinedMetric:
        If no query has a possible match
    """
    embeddings = np.asarray(embeddings)
    group_ids = np.asarray(group_ids)
    n = len(embeddings)
    assert n >= 2, f"Retrieval needs at least two items, got {n}"
    assert len(group_ids) == n, "One group id per embedding"
    assert k >= 1, f"k must be positive, got {k}"

    similarity = cosine_similarity_matrix(embeddings)
    targets = _targets(group_ids, None if frames is None else np.asarray(frames), frame_k)
    hits = []
    for query in range(n):
        if not targets[query].any():
            continue
        # Stable sort keeps lower indices first among equal similarities
        ranked = np.argsort(-similarity[query], kind="stable")
        ranked = ranked[ranked != query][:k]
        hits.append(bool(targets[query, ranked].any()))

    if not hits:
        raise UndefinedMetric("No retrieval query has a match in the candidate set")
    return float(np.mean(hits))


def random_baseline(group_ids: Sequence[int]) -> float:
    """Expected top-1 scene accuracy of a random ranking."""
    group_ids = np.asarray(group_ids)
    n = len(group_ids)
    _, inverse, counts = np.unique(group_ids, return_inverse=True, return_counts=True)
    others = counts[inverse] - 1
    answerable = others > 0
    return float(np.mean(others[answerable] / (n - 1)))


def retrieval_sweep(
        embeddings: np.ndarray,
        group_ids: Sequence[int],
        frames: Sequence[int],
        top_ks: Sequence[int] = DEFAULT_TOP_KS,
        frame_ks: Sequence[int] = DEFAULT_FRAME_KS,
) -> pd.DataFrame:
    """Scene-level and frame-k accuracy for every top-K.

    :return:
        Columns `protocol`, `frame_k`, `top_k`, `accuracy`. Scene rows carry `frame_k` 0.
    """
    rows = []
    for top_k in top_ks:
        rows.append({"protocol": "scene", "frame_k": 0, "top_k": top_k, "accuracy": retrieval_topk(embeddings, group_ids, top_k)})
    for frame_k in frame_ks:
        for top_k in top_ks:
            accuracy = retrieval_topk(embeddings, group_ids, top_k, frames=frames, frame_k=frame_k)
            rows.append({"protocol": "frame", "frame_k": frame_k, "top_k": top_k, "accuracy": accuracy})
    return pd.DataFrame(rows)
