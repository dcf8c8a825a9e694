# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled implementations of the hot kernels.

Output semantics (including tie-breaking and float accumulation order) match
``sessionknn._fallback`` bit for bit; the parity tests enforce this.  Ranking
reuses numpy's lexsort so both backends share one ordering definition; the
compiled wins come from the hash-based dedup passes and the tight
membership/scoring loops.
"""

import numpy as np

cimport numpy as cnp
from libc.stdint cimport int32_t, int64_t, uint64_t

cnp.import_array()

cdef inline uint64_t _slot(int64_t key, uint64_t mask) nogil:
    return ((<uint64_t> key) * 0x9E3779B97F4A7C15ULL) & mask


cdef uint64_t _table_size(Py_ssize_t need) nogil:
    cdef uint64_t cap = 16
    while cap < <uint64_t> (2 * need):
        cap <<= 1
    return cap


def topk_recent_dedup(const int32_t[::1] sess, const int64_t[::1] ts,
                      Py_ssize_t k, int64_t exclude):
    """Hash-dedup (max timestamp per session), then rank by recency."""
    cdef Py_ssize_t n = sess.shape[0]
    empty_s = np.empty(0, dtype=np.int32)
    empty_t = np.empty(0, dtype=np.int64)
    if n == 0:
        return empty_s, empty_t, 0

    cdef uint64_t cap = _table_size(n)
    cdef uint64_t mask = cap - 1
    keys_arr = np.full(cap, -1, dtype=np.int64)
    vals_arr = np.empty(cap, dtype=np.int64)
    uniq_s_arr = np.empty(n, dtype=np.int32)
    uniq_t_arr = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] keys = keys_arr
    cdef int64_t[::1] vals = vals_arr
    cdef int32_t[::1] uniq_s = uniq_s_arr
    cdef int64_t[::1] uniq_t = uniq_t_arr

    cdef Py_ssize_t i, cnt = 0
    cdef int64_t s, pos
    cdef uint64_t h
    with nogil:
        for i in range(n):
            s = sess[i]
            if s == exclude:
                continue
            h = _slot(s, mask)
            while keys[h] != -1 and keys[h] != s:
                h = (h + 1) & mask
            if keys[h] == -1:
                keys[h] = s
                vals[h] = cnt
                uniq_s[cnt] = <int32_t> s
                uniq_t[cnt] = ts[i]
                cnt += 1
            else:
                pos = vals[h]
                if ts[i] > uniq_t[pos]:
                    uniq_t[pos] = ts[i]
    if cnt == 0:
        return empty_s, empty_t, 0
    us = uniq_s_arr[:cnt]
    ut = uniq_t_arr[:cnt]
    rank = np.lexsort((us, -ut))[:k]
    return (
        np.ascontiguousarray(us[rank]),
        np.ascontiguousarray(ut[rank]),
        cnt,
    )


def dedup_union_keep_first(const int32_t[::1] sess, const int64_t[::1] ts,
                           const int32_t[::1] exclude):
    """First-occurrence dedup with max timestamp; excluded sessions dropped."""
    cdef Py_ssize_t n = sess.shape[0]
    cdef Py_ssize_t n_excl = exclude.shape[0]
    empty_s = np.empty(0, dtype=np.int32)
    empty_t = np.empty(0, dtype=np.int64)
    if n == 0:
        return empty_s, empty_t

    cdef uint64_t cap = _table_size(n + n_excl)
    cdef uint64_t mask = cap - 1
    keys_arr = np.full(cap, -1, dtype=np.int64)
    vals_arr = np.empty(cap, dtype=np.int64)
    uniq_s_arr = np.empty(n, dtype=np.int32)
    uniq_t_arr = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] keys = keys_arr
    cdef int64_t[::1] vals = vals_arr
    cdef int32_t[::1] uniq_s = uniq_s_arr
    cdef int64_t[::1] uniq_t = uniq_t_arr

    cdef Py_ssize_t i, cnt = 0
    cdef int64_t s, pos
    cdef uint64_t h
    with nogil:
        for i in range(n_excl):  # tombstones: vals == -1
            s = exclude[i]
            h = _slot(s, mask)
            while keys[h] != -1 and keys[h] != s:
                h = (h + 1) & mask
            if keys[h] == -1:
                keys[h] = s
                vals[h] = -1
        for i in range(n):
            s = sess[i]
            h = _slot(s, mask)
            while keys[h] != -1 and keys[h] != s:
                h = (h + 1) & mask
            if keys[h] == -1:
                keys[h] = s
                vals[h] = cnt
                uniq_s[cnt] = <int32_t> s
                uniq_t[cnt] = ts[i]
                cnt += 1
            elif vals[h] != -1:
                pos = vals[h]
                if ts[i] > uniq_t[pos]:
                    uniq_t[pos] = ts[i]
    return uniq_s_arr[:cnt].copy(), uniq_t_arr[:cnt].copy()


def accumulate_shared_weights(const int64_t[::1] item_ptr,
                              const int32_t[::1] item_sess_idx,
                              const int64_t[::1] sess_ptr,
                              const int32_t[::1] sess_members,
                              const int32_t[::1] x_items,
                              const double[::1] weights,
                              const int32_t[::1] cand):
    """Per-candidate weight sums via binary search in member lists.

    The item posting arrays are unused here (the fallback uses them); they
    stay in the signature so both backends are drop-in interchangeable.
    """
    cdef Py_ssize_t ncand = cand.shape[0]
    cdef Py_ssize_t nx = x_items.shape[0]
    sums_arr = np.zeros(ncand, dtype=np.float64)
    cdef double[::1] sums = sums_arr
    cdef Py_ssize_t c, t
    cdef int64_t lo, hi, a, b, mid
    cdef int32_t target
    cdef double acc
    with nogil:
        for c in range(ncand):
            lo = sess_ptr[cand[c]]
            hi = sess_ptr[cand[c] + 1]
            acc = 0.0
            for t in range(nx):
                target = x_items[t]
                a = lo
                b = hi
                while a < b:
                    mid = (a + b) >> 1
                    if sess_members[mid] < target:
                        a = mid + 1
                    else:
                        b = mid
                if a < hi and sess_members[a] == target:
                    acc += weights[t]
            sums[c] = acc
    return sums_arr


def accumulate_neighbor_scores(const int64_t[::1] sess_ptr,
                               const int32_t[::1] sess_item_idx,
                               const int32_t[::1] nn_sess,
                               const double[::1] nn_sims,
                               Py_ssize_t n_items):
    """Scatter-add neighbor similarities onto their items, in neighbor order.

    Assumes strictly positive similarities (guaranteed upstream), which lets
    first-touch detection double as the nonzero filter.
    """
    cdef Py_ssize_t nn = nn_sess.shape[0]
    if nn == 0:
        return np.empty(0, dtype=np.int32), np.empty(0, dtype=np.float64)
    cdef Py_ssize_t total = 0
    cdef Py_ssize_t r
    cdef int64_t p
    cdef int32_t it
    for r in range(nn):
        total += sess_ptr[nn_sess[r] + 1] - sess_ptr[nn_sess[r]]
    dense_arr = np.zeros(n_items, dtype=np.float64)
    touched_arr = np.empty(total, dtype=np.int32)
    cdef double[::1] dense = dense_arr
    cdef int32_t[::1] touched = touched_arr
    cdef Py_ssize_t cnt = 0
    cdef double sim
    with nogil:
        for r in range(nn):
            sim = nn_sims[r]
            for p in range(sess_ptr[nn_sess[r]], sess_ptr[nn_sess[r] + 1]):
                it = sess_item_idx[p]
                if dense[it] == 0.0:
                    touched[cnt] = it
                    cnt += 1
                dense[it] += sim
    items = np.sort(touched_arr[:cnt])
    return items, dense_arr[items]
