"""End-to-end next-item recommenders.

``recommend_cknn`` runs the session-centric pipeline: relevant sessions of
the query items -> candidate selection -> top-k similar neighbor sessions ->
item scores, where an item's score is the sum of the similarities of the
neighbor sessions containing it.

``recommend_iknn`` is the item-centric baseline: items are scored by the
cosine of their session-incidence vectors against the last clicked item.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from sessionknn import kernels
from sessionknn.candidates import (
    STRATEGIES,
    SessionState,
    WorkCounters,
    relevant_sessions,
    select,
)
from sessionknn.index import BipartiteIndex
from sessionknn.similarity import SimilarityConfig, top_k_sessions

RECOMMENDERS = ("cknn", "iknn")


@dataclass(frozen=True)
class PipelineConfig:
    """Knobs of the recommendation pipeline."""

    k_recent: int = 1000
    k_top: int = 500
    strategy: str = "original"
    similarity: SimilarityConfig = field(default_factory=SimilarityConfig)
    list_length: int = 20
    exclude_seen: bool = False

    def __post_init__(self):
        for name in ("k_recent", "k_top", "list_length"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.strategy not in STRATEGIES:
            raise ValueError(
                f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}"
            )

    def with_similarity(self, sim: SimilarityConfig) -> "PipelineConfig":
        return replace(self, similarity=sim)


class Recommendation:
    """Scored next-item suggestions, highest score first."""

    __slots__ = ("items",)

    def __init__(self, items: list[tuple]):
        self.items = items

    def __len__(self):
        return len(self.items)

    def __bool__(self):
        return bool(self.items)

    def item_ids(self) -> list:
        return [it for it, _ in self.items]

    def rank_of(self, target) -> int | None:
        """1-based rank of the target item, or None if absent."""
        for pos, (it, _) in enumerate(self.items, start=1):
            if it == target:
                return pos
        return None

    def __repr__(self):
        return f"Recommendation({self.items!r})"


def _rank_items(
    index: BipartiteIndex,
    item_idx: np.ndarray,
    scores: np.ndarray,
    list_length: int,
    drop_idx: np.ndarray | None = None,
) -> Recommendation:
    """Order scored items by (score desc, popularity desc, item id asc)."""
    if drop_idx is not None and drop_idx.size and item_idx.size:
        keep = ~np.isin(item_idx, drop_idx)
        item_idx, scores = item_idx[keep], scores[keep]
    if item_idx.size == 0:
        return Recommendation([])
    order = np.lexsort((item_idx, -index.item_deg[item_idx], -scores))[:list_length]
    return Recommendation(
        [
            (index.item_id_of(int(i)), float(s))
            for i, s in zip(item_idx[order], scores[order])
        ]
    )


def recommend_cknn(
    index: BipartiteIndex,
    state: SessionState,
    cfg: PipelineConfig,
    counters: WorkCounters | None = None,
) -> Recommendation:
    """Session-centric pipeline over the query state.

    Returns an empty recommendation when no indexed session shares an item
    with the query (cold start).  Raises on an empty state.
    """
    if not state.items:
        raise ValueError("session state has no clicks")
    known = state.distinct_known()
    if not known:
        return Recommendation([])
    rl = relevant_sessions(index, state.items, exclude=state.own_session_id)
    rc = select(cfg.strategy, state, rl, cfg.k_recent, counters)
    nn = top_k_sessions(index, known, rc, cfg.k_top, cfg.similarity)
    if len(nn) == 0:
        return Recommendation([])
    item_idx, scores = kernels.accumulate_neighbor_scores(
        index.sess_ptr, index.sess_item_idx, nn.sess_idx, nn.sims, index.num_items
    )
    drop = index.intern_items(known) if cfg.exclude_seen else None
    return _rank_items(index, item_idx, scores, cfg.list_length, drop)


def recommend_iknn(
    index: BipartiteIndex, state: SessionState, cfg: PipelineConfig
) -> Recommendation:
    """Item-centric baseline keyed on the last click.

    Candidate items are those co-occurring with the last item in at least one
    session; each is scored by incidence cosine
    ``|RL_last & RL_item| / sqrt(d_last * d_item)``.
    """
    if not state.items:
        raise ValueError("session state has no clicks")
    last_idx = index.item_index(state.items[-1])
    if last_idx is None:
        return Recommendation([])
    sess, _ = index.item_postings(last_idx)
    ones = np.ones(sess.size, dtype=np.float64)
    item_idx, co_counts = kernels.accumulate_neighbor_scores(
        index.sess_ptr, index.sess_item_idx, sess, ones, index.num_items
    )
    keep = item_idx != last_idx
    item_idx, co_counts = item_idx[keep], co_counts[keep]
    if item_idx.size == 0:
        return Recommendation([])
    d_last = np.float64(index.item_deg[last_idx])
    scores = co_counts / np.sqrt(d_last * index.item_deg[item_idx].astype(np.float64))
    drop = index.intern_items(state.distinct_known()) if cfg.exclude_seen else None
    return _rank_items(index, item_idx, scores, cfg.list_length, drop)


def recommend(
    index: BipartiteIndex,
    state: SessionState,
    cfg: PipelineConfig,
    recommender: str = "cknn",
    counters: WorkCounters | None = None,
) -> Recommendation:
    """Dispatch by recommender name ("cknn" | "iknn")."""
    if recommender == "cknn":
        return recommend_cknn(index, state, cfg, counters)
    if recommender == "iknn":
        return recommend_iknn(index, state, cfg)
    raise ValueError(f"unknown recommender: {recommender!r}")
