"""Immutable session-item bipartite index with dual posting lists.

The index stores every (session, item) edge twice: once under the session
(ordered by interaction time) and once under the item.  External identifiers
(strings or ints) are interned to dense integers in canonical sorted order, so
two indexes built from permutations of the same interaction list are
identical.  Posting lists live in flat numpy arrays (CSR layout) so the hot
kernels can work on them without per-call conversion.
"""

from __future__ import annotations

import json
from typing import Hashable, Iterable, NamedTuple

import numpy as np

SNAPSHOT_FORMAT_VERSION = 1


class EmptyDatasetError(ValueError):
    """Raised when an index build receives no interactions."""


class Interaction(NamedTuple):
    """One click record: a session interacted with an item at a time."""

    session_id: Hashable
    item_id: Hashable
    timestamp: int


def _canonical_order(values: set) -> list:
    """Sort external ids deterministically, even for mixed int/str inputs."""
    try:
        return sorted(values)
    except TypeError:
        return sorted(values, key=lambda v: (type(v).__name__, repr(v)))


class BipartiteIndex:
    """Dual inverted index over session-item interactions.

    Built once by :func:`build_index` and never mutated afterwards, so any
    number of readers may share it.  The adjacency is binary: repeated clicks
    of the same item within a session collapse to a single edge keeping the
    earliest timestamp.

    Public surface speaks external ids; the ``*_arr`` / ``*_idx`` attributes
    hold the interned CSR arrays used by the kernels.
    """

    def __init__(
        self,
        session_ids: list,
        item_ids: list,
        sess_ptr: np.ndarray,
        sess_item_idx: np.ndarray,
        sess_item_ts: np.ndarray,
        sess_members: np.ndarray,
        item_ptr: np.ndarray,
        item_sess_idx: np.ndarray,
        item_sess_ts: np.ndarray,
    ):
        self._session_ids = session_ids
        self._item_ids = item_ids
        self._sess_lookup = {s: i for i, s in enumerate(session_ids)}
        self._item_lookup = {it: i for i, it in enumerate(item_ids)}
        self.sess_ptr = sess_ptr
        self.sess_item_idx = sess_item_idx
        self.sess_item_ts = sess_item_ts
        # Per-session distinct items sorted by interned id, for membership
        # binary searches (posting order is by timestamp, not id).
        self.sess_members = sess_members
        self.item_ptr = item_ptr
        self.item_sess_idx = item_sess_idx
        self.item_sess_ts = item_sess_ts
        self.sess_deg = np.diff(sess_ptr).astype(np.int64)
        self.item_deg = np.diff(item_ptr).astype(np.int64)
        for arr in (
            sess_ptr,
            sess_item_idx,
            sess_item_ts,
            sess_members,
            item_ptr,
            item_sess_idx,
            item_sess_ts,
        ):
            arr.flags.writeable = False

    # -- sizes ------------------------------------------------------------

    @property
    def num_sessions(self) -> int:
        return len(self._session_ids)

    @property
    def num_items(self) -> int:
        return len(self._item_ids)

    @property
    def num_edges(self) -> int:
        return int(self.sess_item_idx.size)

    @property
    def avg_session_length(self) -> float:
        return self.num_edges / self.num_sessions if self.num_sessions else 0.0

    # -- id interning -----------------------------------------------------

    def session_index(self, session_id) -> int | None:
        return self._sess_lookup.get(session_id)

    def item_index(self, item_id) -> int | None:
        return self._item_lookup.get(item_id)

    def session_id_of(self, idx: int):
        return self._session_ids[idx]

    def item_id_of(self, idx: int):
        return self._item_ids[idx]

    def intern_items(self, items: Iterable) -> np.ndarray:
        """Map external item ids to interned indexes, dropping unknown ones."""
        known = [self._item_lookup[i] for i in items if i in self._item_lookup]
        return np.asarray(known, dtype=np.int32)

    # -- interned posting views (kernel-facing, zero copy) ------------------

    def item_postings(self, item_idx: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.item_ptr[item_idx], self.item_ptr[item_idx + 1]
        return self.item_sess_idx[lo:hi], self.item_sess_ts[lo:hi]

    def session_postings(self, sess_idx: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.sess_ptr[sess_idx], self.sess_ptr[sess_idx + 1]
        return self.sess_item_idx[lo:hi], self.sess_item_ts[lo:hi]

    # -- public read path (external ids) -----------------------------------

    def sessions_of_item(self, item_id) -> list[tuple]:
        """Posting list of sessions that contain the item, oldest first.

        Unknown items yield an empty list.
        """
        idx = self._item_lookup.get(item_id)
        if idx is None:
            return []
        sess, ts = self.item_postings(idx)
        return [(self._session_ids[s], int(t)) for s, t in zip(sess, ts)]

    def items_of_session(self, session_id) -> list[tuple]:
        """Posting list of items in the session, oldest first."""
        idx = self._sess_lookup.get(session_id)
        if idx is None:
            return []
        items, ts = self.session_postings(idx)
        return [(self._item_ids[i], int(t)) for i, t in zip(items, ts)]

    def degree_of_session(self, session_id) -> int:
        idx = self._sess_lookup.get(session_id)
        return int(self.sess_deg[idx]) if idx is not None else 0

    def degree_of_item(self, item_id) -> int:
        idx = self._item_lookup.get(item_id)
        return int(self.item_deg[idx]) if idx is not None else 0

    # Materialized dict views.  Handy for tests and small data; do not call
    # them on large indexes inside loops.

    @property
    def session_to_items(self) -> dict:
        return {s: self.items_of_session(s) for s in self._session_ids}

    @property
    def item_to_sessions(self) -> dict:
        return {i: self.sessions_of_item(i) for i in self._item_ids}

    @property
    def session_degree(self) -> dict:
        return {s: int(d) for s, d in zip(self._session_ids, self.sess_deg)}

    @property
    def item_degree(self) -> dict:
        return {i: int(d) for i, d in zip(self._item_ids, self.item_deg)}

    def __repr__(self):
        return (
            f"BipartiteIndex(sessions={self.num_sessions}, "
            f"items={self.num_items}, edges={self.num_edges})"
        )


def build_index(interactions: Iterable[Interaction]) -> BipartiteIndex:
    """Build the bipartite index from raw interactions.

    Input may be unsorted and may repeat (session, item) pairs; repeats
    collapse to one edge keeping the earliest timestamp.  Posting lists come
    out sorted ascending by timestamp, ties broken by interned id, so the
    result does not depend on input order.

    Raises:
        EmptyDatasetError: no interactions were given.
        ValueError: a timestamp is negative.
    """
    interactions = list(interactions)
    if not interactions:
        raise EmptyDatasetError("empty dataset: no interactions to index")

    sess_col = [r[0] for r in interactions]
    item_col = [r[1] for r in interactions]
    ts_col = np.asarray([r[2] for r in interactions], dtype=np.int64)
    if ts_col.size and ts_col.min() < 0:
        raise ValueError("negative timestamp in interaction log")

    session_ids = _canonical_order(set(sess_col))
    item_ids = _canonical_order(set(item_col))
    sess_lookup = {s: i for i, s in enumerate(session_ids)}
    item_lookup = {it: i for i, it in enumerate(item_ids)}
    s_idx = np.asarray([sess_lookup[s] for s in sess_col], dtype=np.int32)
    i_idx = np.asarray([item_lookup[i] for i in item_col], dtype=np.int32)

    # Collapse duplicate (session, item) pairs to the earliest timestamp.
    order = np.lexsort((ts_col, i_idx, s_idx))
    s_idx, i_idx, ts_col = s_idx[order], i_idx[order], ts_col[order]
    first = np.ones(len(s_idx), dtype=bool)
    first[1:] = (s_idx[1:] != s_idx[:-1]) | (i_idx[1:] != i_idx[:-1])
    s_idx, i_idx, ts_col = s_idx[first], i_idx[first], ts_col[first]

    m, n = len(session_ids), len(item_ids)

    # Posting lists ascend by timestamp with ties on *descending* interned id,
    # so a reversed suffix read ranks by (time desc, id asc) -- the same total
    # recency order every selection path uses.
    order = np.lexsort((-i_idx, ts_col, s_idx))
    sess_item_idx = np.ascontiguousarray(i_idx[order])
    sess_item_ts = np.ascontiguousarray(ts_col[order])
    sess_ptr = np.zeros(m + 1, dtype=np.int64)
    np.cumsum(np.bincount(s_idx, minlength=m), out=sess_ptr[1:])

    order = np.lexsort((i_idx, s_idx))
    sess_members = np.ascontiguousarray(i_idx[order])

    order = np.lexsort((-s_idx, ts_col, i_idx))
    item_sess_idx = np.ascontiguousarray(s_idx[order])
    item_sess_ts = np.ascontiguousarray(ts_col[order])
    item_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(i_idx, minlength=n), out=item_ptr[1:])

    return BipartiteIndex(
        session_ids,
        item_ids,
        sess_ptr,
        sess_item_idx,
        sess_item_ts,
        sess_members,
        item_ptr,
        item_sess_idx,
        item_sess_ts,
    )


def sessions_of_item(index: BipartiteIndex, item_id) -> list[tuple]:
    """Functional alias for :meth:`BipartiteIndex.sessions_of_item`."""
    return index.sessions_of_item(item_id)


def items_of_session(index: BipartiteIndex, session_id) -> list[tuple]:
    """Functional alias for :meth:`BipartiteIndex.items_of_session`."""
    return index.items_of_session(session_id)


# -- binary snapshot -------------------------------------------------------
#
# Layout (internal contract, covered by a round-trip test): a numpy .npz
# archive holding the seven posting arrays plus a JSON metadata blob with the
# format version and the two external-id tables.


def save_index(index: BipartiteIndex, path) -> None:
    meta = {
        "format_version": SNAPSHOT_FORMAT_VERSION,
        "session_ids": index._session_ids,
        "item_ids": index._item_ids,
    }
    np.savez_compressed(
        path,
        meta=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8),
        sess_ptr=index.sess_ptr,
        sess_item_idx=index.sess_item_idx,
        sess_item_ts=index.sess_item_ts,
        sess_members=index.sess_members,
        item_ptr=index.item_ptr,
        item_sess_idx=index.item_sess_idx,
        item_sess_ts=index.item_sess_ts,
    )


def load_index(path) -> BipartiteIndex:
    with np.load(path) as archive:
        meta = json.loads(archive["meta"].tobytes().decode("utf-8"))
        if meta.get("format_version") != SNAPSHOT_FORMAT_VERSION:
            raise ValueError(
                f"unsupported index snapshot version: {meta.get('format_version')}"
            )
        return BipartiteIndex(
            meta["session_ids"],
            meta["item_ids"],
            archive["sess_ptr"].copy(),
            archive["sess_item_idx"].copy(),
            archive["sess_item_ts"].copy(),
            archive["sess_members"].copy(),
            archive["item_ptr"].copy(),
            archive["item_sess_idx"].copy(),
            archive["item_sess_ts"].copy(),
        )
