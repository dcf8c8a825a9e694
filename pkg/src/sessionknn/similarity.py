"""Session-session similarity over the bipartite network.

One two-parameter family covers the classic bipartite-diffusion similarities:

    sim(x, j) = 1 / (d_x^lam * d_j^(1-lam)) * sum over shared items i of
                1 / d_i^beta

``lam`` balances the two session degrees (1 = pure random-walk style,
0 = pure conduction style) and ``beta`` damps popular items.  Named presets
recover cosine (lam=0.5, beta=0), mass diffusion (1, 1), heat conduction
(0, 1) and the lam-blend of the two (lam, 1).

Because the query-session factor d_x^-lam is constant across candidates it
cannot change their ordering, so a simplified form that drops it ranks
identically; rankings here are always computed from the simplified value and
only the reported scores differ between the two forms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from sessionknn import kernels
from sessionknn.candidates import CandidateSet
from sessionknn.index import BipartiteIndex

FORM_FULL = "full"
FORM_SIMPLIFIED = "simplified"


@dataclass(frozen=True)
class SimilarityConfig:
    """(lam, beta) operating point plus the scoring form."""

    lam: float = 0.5
    beta: float = 0.5
    form: str = FORM_FULL

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lam must be in [0, 1], got {self.lam}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must be in [0, 1], got {self.beta}")
        if self.form not in (FORM_FULL, FORM_SIMPLIFIED):
            raise ValueError(f"form must be 'full' or 'simplified', got {self.form!r}")


_PRESETS = {
    "cosine": (0.5, 0.0),
    "md": (1.0, 1.0),
    "hc": (0.0, 1.0),
}


def preset(name: str, lam: float | None = None) -> SimilarityConfig:
    """Named operating points: cosine, md, hc, or mdhc (needs ``lam``)."""
    key = name.lower()
    if key in _PRESETS:
        p_lam, p_beta = _PRESETS[key]
        return SimilarityConfig(p_lam, p_beta, FORM_FULL)
    if key == "mdhc":
        return SimilarityConfig(0.5 if lam is None else lam, 1.0, FORM_FULL)
    raise ValueError(f"unknown similarity preset: {name!r}")


class NeighborSet:
    """Top candidate sessions by similarity, highest first."""

    __slots__ = ("index", "sess_idx", "sims", "k_top")

    def __init__(self, index, sess_idx, sims, k_top):
        self.index = index
        self.sess_idx = sess_idx
        self.sims = sims
        self.k_top = k_top

    def __len__(self):
        return int(self.sess_idx.size)

    @property
    def neighbors(self) -> list[tuple]:
        return [
            (self.index.session_id_of(int(s)), float(v))
            for s, v in zip(self.sess_idx, self.sims)
        ]

    def __repr__(self):
        return f"NeighborSet(n={len(self)}, k_top={self.k_top})"


def _distinct(items: Iterable) -> list:
    seen = set()
    out = []
    for it in items:
        if it not in seen:
            seen.add(it)
            out.append(it)
    return out


def sim_dsm(
    index: BipartiteIndex, x_items: Iterable, j, cfg: SimilarityConfig
) -> float:
    """Similarity between a query item set and one indexed session.

    The query-session degree is the number of distinct query items given.
    Raises if the session is unknown or the query is empty.
    """
    distinct = _distinct(x_items)
    if not distinct:
        raise ValueError("query has no items")
    j_idx = index.session_index(j)
    if j_idx is None:
        raise KeyError(f"unknown session: {j!r}")
    members = index.sess_members[index.sess_ptr[j_idx] : index.sess_ptr[j_idx + 1]]
    # Same numpy power/add sequence as top_k_sessions so the scalar and the
    # batched paths agree to the last bit.
    total = np.float64(0.0)
    for it in distinct:
        iidx = index.item_index(it)
        if iidx is None:
            continue
        pos = int(np.searchsorted(members, iidx))
        if pos < members.size and members[pos] == iidx:
            total = total + np.float64(index.item_deg[iidx]) ** np.float64(-cfg.beta)
    value = total * np.float64(index.sess_deg[j_idx]) ** np.float64(cfg.lam - 1.0)
    if cfg.form == FORM_FULL:
        value = value * np.float64(len(distinct)) ** np.float64(-cfg.lam)
    return float(value)


def top_k_sessions(
    index: BipartiteIndex,
    x_items: Iterable,
    rc: CandidateSet,
    k_top: int,
    cfg: SimilarityConfig,
) -> NeighborSet:
    """Score every candidate and keep the ``k_top`` most similar sessions.

    Zero-similarity candidates (no shared items) are dropped.  Ties break by
    larger relevance timestamp, then smaller session id.  The ranking is
    computed on the simplified score, so both forms select the same
    neighbors in the same order.
    """
    if k_top < 1:
        raise ValueError("k_top must be >= 1")
    distinct = _distinct(x_items)
    if not distinct:
        raise ValueError("query has no items")
    if len(rc) == 0:
        return NeighborSet(index, np.empty(0, np.int32), np.empty(0, np.float64), k_top)

    x_idx = index.intern_items(distinct)
    weights = index.item_deg[x_idx].astype(np.float64) ** -cfg.beta
    sums = kernels.accumulate_shared_weights(
        index.item_ptr,
        index.item_sess_idx,
        index.sess_ptr,
        index.sess_members,
        x_idx,
        weights,
        rc.sess_idx,
    )
    dj = index.sess_deg[rc.sess_idx].astype(np.float64)
    sims = sums * dj ** (cfg.lam - 1.0)

    order = np.lexsort((rc.sess_idx, -rc.ts, -sims))
    sims_o = sims[order]
    positive = sims_o > 0.0
    order = order[positive][:k_top]
    top_sims = np.ascontiguousarray(sims[order])
    if cfg.form == FORM_FULL:
        top_sims = top_sims * np.float64(len(distinct)) ** np.float64(-cfg.lam)
    return NeighborSet(
        index, np.ascontiguousarray(rc.sess_idx[order]), top_sims, k_top
    )
