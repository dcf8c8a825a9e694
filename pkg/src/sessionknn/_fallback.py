"""Pure-Python (numpy) implementations of the hot kernels.

These are the reference semantics.  The compiled backend in ``_native.pyx``
must produce bit-identical outputs; the parity test suite compares the two on
randomized inputs.  Float accumulation orders are part of the contract:
per-candidate similarity sums add query-item weights in query order, and item
scores add neighbor similarities in neighbor-rank order.
"""

from __future__ import annotations

import numpy as np

_EMPTY_I32 = np.empty(0, dtype=np.int32)
_EMPTY_I64 = np.empty(0, dtype=np.int64)
_EMPTY_F64 = np.empty(0, dtype=np.float64)


def topk_recent_dedup(
    sess: np.ndarray, ts: np.ndarray, k: int, exclude: int = -1
) -> tuple[np.ndarray, np.ndarray, int]:
    """Most recent ``k`` distinct sessions from a bag of (session, ts) entries.

    Entries are deduplicated per session keeping the maximum timestamp, then
    ranked by (timestamp desc, session asc) and truncated to ``k``.  Returns
    the selected sessions, their timestamps, and the number of distinct
    sessions that entered the ranking (the sorted-entries work counter).
    """
    if exclude >= 0 and sess.size:
        keep = sess != exclude
        sess, ts = sess[keep], ts[keep]
    if sess.size == 0:
        return _EMPTY_I32, _EMPTY_I64, 0
    order = np.lexsort((ts, sess))
    s2, t2 = sess[order], ts[order]
    last = np.empty(s2.size, dtype=bool)
    last[:-1] = s2[1:] != s2[:-1]
    last[-1] = True
    uniq, best = s2[last], t2[last]
    rank = np.lexsort((uniq, -best))[:k]
    return (
        np.ascontiguousarray(uniq[rank]),
        np.ascontiguousarray(best[rank]),
        int(uniq.size),
    )


def dedup_union_keep_first(
    sess: np.ndarray, ts: np.ndarray, exclude: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Deduplicate (session, ts) entries keeping first-occurrence order.

    Each surviving session carries its maximum timestamp across occurrences.
    Sessions listed in ``exclude`` are dropped.  First-occurrence order (not a
    sort) is deliberate: this builds the sampling pool, and the point of
    sampling is to avoid ranking work.
    """
    if exclude.size and sess.size:
        keep = ~np.isin(sess, exclude)
        sess, ts = sess[keep], ts[keep]
    if sess.size == 0:
        return _EMPTY_I32, _EMPTY_I64
    uniq, first_pos, inv = np.unique(sess, return_index=True, return_inverse=True)
    best = np.full(uniq.size, np.iinfo(np.int64).min, dtype=np.int64)
    np.maximum.at(best, inv, ts)
    order = np.argsort(first_pos)
    return (
        np.ascontiguousarray(uniq[order].astype(np.int32, copy=False)),
        np.ascontiguousarray(best[order]),
    )


def accumulate_shared_weights(
    item_ptr: np.ndarray,
    item_sess_idx: np.ndarray,
    sess_ptr: np.ndarray,
    sess_members: np.ndarray,
    x_items: np.ndarray,
    weights: np.ndarray,
    cand: np.ndarray,
) -> np.ndarray:
    """Per-candidate sum of query-item weights over shared items.

    For each candidate session j the result is the sum, taken in query order,
    of ``weights[t]`` over the query items ``x_items[t]`` present in j.  The
    fallback tests membership through each item's posting list; the compiled
    backend walks each candidate's sorted member list.  Both add weights in
    the same order, so results are bit-identical.
    """
    sums = np.zeros(cand.size, dtype=np.float64)
    for t in range(x_items.size):
        i = x_items[t]
        postings = item_sess_idx[item_ptr[i] : item_ptr[i + 1]]
        hit = np.isin(cand, postings)
        sums[hit] += weights[t]
    return sums


def accumulate_neighbor_scores(
    sess_ptr: np.ndarray,
    sess_item_idx: np.ndarray,
    nn_sess: np.ndarray,
    nn_sims: np.ndarray,
    n_items: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Sum neighbor similarities into per-item scores.

    Iterates neighbors in the given (rank) order; every item of a neighbor
    session receives that neighbor's similarity.  Returns the items with
    nonzero score in ascending item order, with their scores.
    """
    if nn_sess.size == 0:
        return _EMPTY_I32, _EMPTY_F64
    slices = [sess_item_idx[sess_ptr[s] : sess_ptr[s + 1]] for s in nn_sess.tolist()]
    items = np.concatenate(slices)
    counts = (sess_ptr[nn_sess + 1] - sess_ptr[nn_sess]).astype(np.int64)
    w = np.repeat(nn_sims, counts)
    dense = np.bincount(items, weights=w, minlength=n_items)
    nz = np.nonzero(dense)[0]
    return nz.astype(np.int32), np.ascontiguousarray(dense[nz])
