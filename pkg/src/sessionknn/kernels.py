"""Kernel backend selection.

At import time the compiled extension (``sessionknn._native``) is preferred;
if it is missing (no compiler at install time) the numpy fallback is used.
Both expose the same four functions with bit-identical outputs.  Benchmarks
and tests may switch explicitly via :func:`set_backend`.
"""

from __future__ import annotations

from sessionknn import _fallback

try:
    from sessionknn import _native
except ImportError:  # extension not built
    _native = None

HAVE_NATIVE = _native is not None
_active = _native if HAVE_NATIVE else _fallback


def backend_name() -> str:
    return "native" if _active is _native else "python"


def available_backends() -> list[str]:
    return ["python", "native"] if HAVE_NATIVE else ["python"]


def set_backend(name: str) -> None:
    """Force a backend ("python" or "native"). Mostly for benchmarks/tests."""
    global _active
    if name == "python":
        _active = _fallback
    elif name == "native":
        if not HAVE_NATIVE:
            raise RuntimeError("native backend is not built")
        _active = _native
    else:
        raise ValueError(f"unknown backend: {name!r}")


def get_module(name: str):
    """Return a backend module by name without switching the active one."""
    if name == "python":
        return _fallback
    if name == "native":
        if not HAVE_NATIVE:
            raise RuntimeError("native backend is not built")
        return _native
    raise ValueError(f"unknown backend: {name!r}")


def topk_recent_dedup(sess, ts, k, exclude=-1):
    return _active.topk_recent_dedup(sess, ts, k, exclude)


def dedup_union_keep_first(sess, ts, exclude):
    return _active.dedup_union_keep_first(sess, ts, exclude)


def accumulate_shared_weights(
    item_ptr, item_sess_idx, sess_ptr, sess_members, x_items, weights, cand
):
    return _active.accumulate_shared_weights(
        item_ptr, item_sess_idx, sess_ptr, sess_members, x_items, weights, cand
    )


def accumulate_neighbor_scores(sess_ptr, sess_item_idx, nn_sess, nn_sims, n_items):
    return _active.accumulate_neighbor_scores(
        sess_ptr, sess_item_idx, nn_sess, nn_sims, n_items
    )
