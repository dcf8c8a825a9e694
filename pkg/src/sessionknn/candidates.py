"""Candidate selection: from relevant sessions to the recent session set.

Three strategies produce the candidate set for a query session:

* ``original`` ranks the whole relevant-session union by recency and keeps
  the ``k_recent`` freshest.
* ``epcs`` reserves a quota of ``ceil(k_recent / |x|)`` slots for sessions
  relevant to the last clicked item, so they can never be crowded out by
  fresher sessions of earlier clicks, and fills the rest with the freshest
  sessions of the other clicks.
* ``epcsr`` keeps the same last-click quota but fills the remaining slots by
  seeded uniform sampling (without replacement) from the cached recent
  sessions of the other clicks, skipping the ranking work entirely.

Per-item recent-session caches are maintained incrementally as clicks arrive
(:func:`advance_state`), which is what makes the epcs/epcsr strategies cheap:
each new click costs one posting-list suffix read.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from sessionknn import kernels
from sessionknn.index import BipartiteIndex

STRATEGIES = ("original", "epcs", "epcsr")

_EMPTY_I32 = np.empty(0, dtype=np.int32)
_EMPTY_I64 = np.empty(0, dtype=np.int64)


@dataclass
class WorkCounters:
    """Hardware-independent work counters for candidate selection.

    ``entries_examined`` counts candidate entries read from posting lists or
    caches; ``entries_sorted`` counts distinct candidates that entered a
    recency ranking.  Both are deterministic for a fixed input and seed.
    """

    entries_examined: int = 0
    entries_sorted: int = 0

    def merge(self, other: "WorkCounters") -> None:
        self.entries_examined += other.entries_examined
        self.entries_sorted += other.entries_sorted


class _RecentCache(NamedTuple):
    sess: np.ndarray  # interned session idx, most recent first
    ts: np.ndarray
    cap: int  # the k_recent this cache was built for


@dataclass
class SessionState:
    """The evolving query session plus its per-item recent-session caches.

    One state per in-flight session; never share across sessions.  ``items``
    is the raw click sequence (repeats allowed).  ``rng_seed`` seeds the
    epcsr sampling; a fresh stream is derived per recommendation step so
    repeated calls at the same step are reproducible.
    """

    index: BipartiteIndex
    items: list = field(default_factory=list)
    own_session_id: object = None
    rng_seed: int = 0
    _recent: dict = field(default_factory=dict)

    @property
    def per_item_recent(self) -> dict:
        """Cached recent sessions per item, as external (session, ts) lists."""
        out = {}
        for item, cache in self._recent.items():
            out[item] = [
                (self.index.session_id_of(int(s)), int(t))
                for s, t in zip(cache.sess, cache.ts)
            ]
        return out

    def distinct_items(self) -> list:
        """Distinct clicked items in first-click order."""
        seen = set()
        out = []
        for it in self.items:
            if it not in seen:
                seen.add(it)
                out.append(it)
        return out

    def distinct_known(self) -> list:
        """Distinct clicked items known to the index, first-click order."""
        return [it for it in self.distinct_items() if self.index.item_index(it) is not None]


def new_session_state(
    index: BipartiteIndex, own_session_id=None, rng_seed: int = 0
) -> SessionState:
    return SessionState(index=index, own_session_id=own_session_id, rng_seed=rng_seed)


class CandidateSet:
    """Deduplicated candidate sessions with their relevance timestamps."""

    __slots__ = ("index", "strategy", "sess_idx", "ts")

    def __init__(self, index, strategy, sess_idx, ts):
        self.index = index
        self.strategy = strategy
        # Suffix caches are reversed views; the kernels want contiguous input.
        self.sess_idx = np.ascontiguousarray(sess_idx)
        self.ts = np.ascontiguousarray(ts)

    def __len__(self):
        return int(self.sess_idx.size)

    @property
    def entries(self) -> list[tuple]:
        return [
            (self.index.session_id_of(int(s)), int(t))
            for s, t in zip(self.sess_idx, self.ts)
        ]

    def as_dict(self) -> dict:
        return {self.index.session_id_of(int(s)): int(t) for s, t in zip(self.sess_idx, self.ts)}

    def __repr__(self):
        return f"CandidateSet({self.strategy}, n={len(self)})"


class RelevanceMap(Mapping):
    """Per-item relevant sessions for a query, backed by posting-list views.

    Maps each query item to its ``(session, interaction ts)`` list; the union
    of the values is the relevant session set of the whole query.  Items
    unknown to the index map to empty lists.
    """

    def __init__(self, index: BipartiteIndex, order: list, arrays: dict):
        self.index = index
        self.order = order  # distinct query items, first-click order
        self.arrays = arrays  # item -> (sess_idx arr, ts arr)

    def __getitem__(self, item):
        sess, ts = self.arrays[item]
        return [(self.index.session_id_of(int(s)), int(t)) for s, t in zip(sess, ts)]

    def __iter__(self):
        return iter(self.order)

    def __len__(self):
        return len(self.order)

    def union_sessions(self) -> set:
        out = set()
        for sess, _ in self.arrays.values():
            out.update(self.index.session_id_of(int(s)) for s in sess)
        return out


def relevant_sessions(
    index: BipartiteIndex, items: Iterable, exclude=None
) -> RelevanceMap:
    """Relevant sessions of each query item, excluding the query's own session.

    The relevance timestamp attached to a session is the time at which that
    session interacted with the item in question.
    """
    items = list(items)
    if not items:
        raise ValueError("query has no items")
    exclude_idx = index.session_index(exclude) if exclude is not None else None
    order = []
    seen = set()
    arrays = {}
    for it in items:
        if it in seen:
            continue
        seen.add(it)
        order.append(it)
        iidx = index.item_index(it)
        if iidx is None:
            arrays[it] = (_EMPTY_I32, _EMPTY_I64)
            continue
        sess, ts = index.item_postings(iidx)
        if exclude_idx is not None and sess.size:
            keep = sess != exclude_idx
            if not keep.all():
                sess, ts = sess[keep], ts[keep]
        arrays[it] = (sess, ts)
    return RelevanceMap(index, order, arrays)


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def _recent_arrays(
    state: SessionState, rl: RelevanceMap, item, k_recent: int
) -> tuple[np.ndarray, np.ndarray]:
    """Most recent ``k_recent`` sessions of one item, most recent first.

    Uses the incremental cache when it was built with a sufficient cap,
    otherwise derives the list from the relevance map (a suffix read: posting
    lists are time-ordered).
    """
    cache = state._recent.get(item)
    if cache is not None and cache.cap >= k_recent:
        return cache.sess[:k_recent], cache.ts[:k_recent]
    sess, ts = rl.arrays.get(item, (_EMPTY_I32, _EMPTY_I64))
    if sess.size > k_recent:
        sess, ts = sess[-k_recent:], ts[-k_recent:]
    return sess[::-1], ts[::-1]


def select_original(
    rl: RelevanceMap, k_recent: int, counters: WorkCounters | None = None
) -> CandidateSet:
    """Rank the full relevant-session union by recency; keep the freshest.

    A session relevant through several query items counts once, with its
    latest interaction time among them.
    """
    if k_recent < 1:
        raise ValueError("k_recent must be >= 1")
    parts = [rl.arrays[it] for it in rl.order]
    sess = np.concatenate([p[0] for p in parts]) if parts else _EMPTY_I32
    ts = np.concatenate([p[1] for p in parts]) if parts else _EMPTY_I64
    out_sess, out_ts, n_ranked = kernels.topk_recent_dedup(sess, ts, k_recent, -1)
    if counters is not None:
        counters.entries_examined += int(sess.size)
        counters.entries_sorted += n_ranked
    return CandidateSet(rl.index, "original", out_sess, out_ts)


def _last_quota(
    state: SessionState, rl: RelevanceMap, k_recent: int
) -> tuple[object, list, np.ndarray, np.ndarray]:
    """Resolve the last click, the other distinct items, and its quota slice."""
    last = state.items[-1]
    known = state.distinct_known()
    others = [it for it in known if it != last]
    size_x = max(len(known), 1)
    last_sess, last_ts = _recent_arrays(state, rl, last, k_recent)
    quota = min(_ceil_div(k_recent, size_x), int(last_sess.size))
    return (
        last,
        others,
        np.ascontiguousarray(last_sess[:quota]),
        np.ascontiguousarray(last_ts[:quota]),
    )


def select_epcs(
    state: SessionState,
    rl: RelevanceMap,
    k_recent: int,
    counters: WorkCounters | None = None,
) -> CandidateSet:
    """Guarantee the last click's share of the candidate set.

    The last item's ``ceil(k_recent / |x|)`` most recent sessions are always
    kept; the remaining slots take the freshest sessions among the other
    items' recent lists.  Overlaps between the two portions count once (the
    last-click entry wins) and free their slot for the next-best candidate.
    """
    if k_recent < 1:
        raise ValueError("k_recent must be >= 1")
    if not state.items:
        raise ValueError("session state has no clicks")
    _, others, rc_last_sess, rc_last_ts = _last_quota(state, rl, k_recent)
    if counters is not None:
        counters.entries_examined += int(rc_last_sess.size)

    slots = k_recent - int(rc_last_sess.size)
    if others and slots > 0:
        parts = [_recent_arrays(state, rl, it, k_recent) for it in others]
        sess = np.concatenate([p[0] for p in parts])
        ts = np.concatenate([p[1] for p in parts])
        if counters is not None:
            counters.entries_examined += int(sess.size)
        # Rank up to k_recent (not just `slots`) so overlaps with the
        # last-click portion can be backfilled from the next-best entries.
        top_sess, top_ts, n_ranked = kernels.topk_recent_dedup(sess, ts, k_recent, -1)
        if counters is not None:
            counters.entries_sorted += n_ranked
        fresh = ~np.isin(top_sess, rc_last_sess)
        extra_sess = top_sess[fresh][:slots]
        extra_ts = top_ts[fresh][:slots]
        out_sess = np.concatenate([rc_last_sess, extra_sess])
        out_ts = np.concatenate([rc_last_ts, extra_ts])
    else:
        out_sess, out_ts = rc_last_sess, rc_last_ts
    return CandidateSet(rl.index, "epcs", out_sess, out_ts)


def step_rng(state: SessionState) -> np.random.Generator:
    """Sampling stream for the current step, derived from the state seed."""
    return np.random.default_rng([state.rng_seed & 0xFFFFFFFFFFFFFFFF, len(state.items)])


def select_epcsr(
    state: SessionState,
    rl: RelevanceMap,
    k_recent: int,
    counters: WorkCounters | None = None,
    rng: np.random.Generator | None = None,
) -> CandidateSet:
    """Last-click quota plus seeded random fill from the other clicks.

    The non-quota slots are drawn uniformly without replacement from the
    union of the other items' cached recent sessions, so every item's
    relevant sessions keep their expected share without any ranking pass.
    """
    if k_recent < 1:
        raise ValueError("k_recent must be >= 1")
    if not state.items:
        raise ValueError("session state has no clicks")
    _, others, rc_last_sess, rc_last_ts = _last_quota(state, rl, k_recent)
    if counters is not None:
        counters.entries_examined += int(rc_last_sess.size)

    slots = k_recent - int(rc_last_sess.size)
    if not others or slots <= 0:
        return CandidateSet(rl.index, "epcsr", rc_last_sess, rc_last_ts)

    parts = [_recent_arrays(state, rl, it, k_recent) for it in others]
    sess = np.concatenate([p[0] for p in parts])
    ts = np.concatenate([p[1] for p in parts])
    if counters is not None:
        counters.entries_examined += int(sess.size)
    pool_sess, pool_ts = kernels.dedup_union_keep_first(sess, ts, rc_last_sess)
    if pool_sess.size <= slots:
        chosen_sess, chosen_ts = pool_sess, pool_ts
    else:
        if rng is None:
            rng = step_rng(state)
        pick = rng.choice(pool_sess.size, size=slots, replace=False, shuffle=False)
        pick.sort()
        chosen_sess, chosen_ts = pool_sess[pick], pool_ts[pick]
    out_sess = np.concatenate([rc_last_sess, chosen_sess])
    out_ts = np.concatenate([rc_last_ts, chosen_ts])
    return CandidateSet(rl.index, "epcsr", out_sess, out_ts)


def advance_state(
    state: SessionState, index: BipartiteIndex, new_item, k_recent: int
) -> SessionState:
    """Record a click and cache the item's recent sessions.

    The cache holds the item's ``min(k_recent, |RL_item|)`` most recent
    sessions (a suffix view of the posting list, so this is cheap), with the
    state's own session filtered out.  Advancing twice with the same item
    replaces the cache.  Returns the same state for chaining.
    """
    state.items.append(new_item)
    iidx = index.item_index(new_item)
    if iidx is None:
        state._recent[new_item] = _RecentCache(_EMPTY_I32, _EMPTY_I64, k_recent)
        return state
    sess, ts = index.item_postings(iidx)
    own = (
        index.session_index(state.own_session_id)
        if state.own_session_id is not None
        else None
    )
    if own is None:
        tail_sess = sess[-k_recent:][::-1]
        tail_ts = ts[-k_recent:][::-1]
    else:
        # Read one extra entry so dropping the own session still fills the cap.
        tail_sess = sess[-(k_recent + 1) :][::-1]
        tail_ts = ts[-(k_recent + 1) :][::-1]
        keep = tail_sess != own
        tail_sess = tail_sess[keep][:k_recent]
        tail_ts = tail_ts[keep][:k_recent]
    state._recent[new_item] = _RecentCache(tail_sess, tail_ts, k_recent)
    return state


def select(
    strategy: str,
    state: SessionState,
    rl: RelevanceMap,
    k_recent: int,
    counters: WorkCounters | None = None,
    rng: np.random.Generator | None = None,
) -> CandidateSet:
    """Dispatch by strategy name ("original" | "epcs" | "epcsr")."""
    if strategy == "original":
        return select_original(rl, k_recent, counters)
    if strategy == "epcs":
        return select_epcs(state, rl, k_recent, counters)
    if strategy == "epcsr":
        return select_epcsr(state, rl, k_recent, counters, rng)
    raise ValueError(f"unknown candidate selection strategy: {strategy!r}")
