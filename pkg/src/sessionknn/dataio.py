"""Dataset loading, train/test splitting, and synthetic workload generation.

Two on-disk formats are supported: delimiter-separated click logs with
(session, item, time) columns in configurable order, and playlist files (one
record per line: an identifier followed by the ordered item list) which get
timestamps assigned by seeded random day placement, since playlists carry
none of their own.

Splits assign each session to train or test by the day of its *last*
interaction, so a session is never divided across the boundary.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterable, Sequence

import numpy as np

from sessionknn.index import Interaction

logger = logging.getLogger("sessionknn")

DAY_LENGTH = 86_400


class MalformedDataError(ValueError):
    """Too many unparseable rows in an input file."""


@dataclass(frozen=True)
class LogFormat:
    """Shape of a delimiter-separated click log."""

    delimiter: str = "\t"
    columns: tuple = ("session", "item", "time")
    header: bool = False

    def __post_init__(self):
        if sorted(self.columns) != ["item", "session", "time"]:
            raise ValueError(
                "columns must be a permutation of ('session', 'item', 'time')"
            )


@dataclass(frozen=True)
class SplitSpec:
    """Day-based train/test split parameters."""

    train_days: int | None = None  # None = everything before the test days
    test_days: int = 1
    window_days: int | None = None
    window_count: int | None = None
    day_length: int = DAY_LENGTH

    def __post_init__(self):
        if self.test_days < 1:
            raise ValueError("test_days must be >= 1")
        if self.window_days is not None and self.train_days is not None:
            if self.train_days + self.test_days != self.window_days:
                raise ValueError("train_days + test_days must equal window_days")


def _coerce_id(token: str):
    """Numeric-looking ids become ints so they round-trip through text files."""
    try:
        return int(token)
    except ValueError:
        return token


def _parse_timestamp(token: str) -> int:
    try:
        return int(token)
    except ValueError:
        pass
    text = token.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def _iter_lines(source) -> Iterable[str]:
    if hasattr(source, "read"):
        for line in source:
            yield line.decode("utf-8") if isinstance(line, bytes) else line
    else:
        with open(source, "r", encoding="utf-8") as fh:
            yield from fh


def load_timestamped_log(
    source,
    fmt: LogFormat = LogFormat(),
    max_malformed_fraction: float = 0.01,
) -> list[Interaction]:
    """Parse a click log into interactions.

    Malformed rows (wrong column count, unparseable timestamp) are skipped
    and counted; once their fraction exceeds ``max_malformed_fraction`` the
    load aborts.  ``source`` may be a path or an open (text or byte) stream.
    """
    col_pos = {name: i for i, name in enumerate(fmt.columns)}
    s_pos, i_pos, t_pos = col_pos["session"], col_pos["item"], col_pos["time"]
    out: list[Interaction] = []
    malformed = 0
    total = 0
    lines = _iter_lines(source)
    if fmt.header:
        next(lines, None)
    for line in lines:
        line = line.rstrip("\n").rstrip("\r")
        if not line:
            continue
        total += 1
        parts = line.split(fmt.delimiter)
        if len(parts) != 3:
            malformed += 1
            continue
        try:
            ts = _parse_timestamp(parts[t_pos])
        except ValueError:
            malformed += 1
            continue
        out.append(
            Interaction(_coerce_id(parts[s_pos]), _coerce_id(parts[i_pos]), ts)
        )
    if malformed:
        logger.warning("skipped %d malformed rows of %d", malformed, total)
        if total and malformed / total > max_malformed_fraction:
            raise MalformedDataError(
                f"{malformed} of {total} rows malformed "
                f"(threshold {max_malformed_fraction:.1%})"
            )
    return out


def write_timestamped_log(
    interactions: Iterable[Interaction], path, fmt: LogFormat = LogFormat()
) -> None:
    """Emit interactions in the canonical log format (bit-exact re-load)."""
    col_pos = {name: i for i, name in enumerate(fmt.columns)}
    with open(path, "w", encoding="utf-8") as fh:
        if fmt.header:
            fh.write(fmt.delimiter.join(fmt.columns) + "\n")
        row = [None, None, None]
        for rec in interactions:
            row[col_pos["session"]] = str(rec.session_id)
            row[col_pos["item"]] = str(rec.item_id)
            row[col_pos["time"]] = str(rec.timestamp)
            fh.write(fmt.delimiter.join(row) + "\n")


def load_playlists(
    source,
    total_days: int = 31,
    seed: int = 0,
    day_length: int = DAY_LENGTH,
    delimiter: str | None = None,
) -> list[Interaction]:
    """Load ordered playlists and assign timestamps by random day placement.

    Each playlist lands on a uniform random day in ``[0, total_days)``; its
    items get consecutive tick timestamps inside that day, preserving their
    order.  The assignment is seeded and reproducible.  Records with no items
    are skipped with a warning.
    """
    rng = np.random.default_rng(seed)
    out: list[Interaction] = []
    skipped = 0
    for line in _iter_lines(source):
        line = line.strip()
        if not line:
            continue
        parts = line.split(delimiter)
        pid, items = parts[0], parts[1:]
        if not items:
            skipped += 1
            continue
        day = int(rng.integers(0, total_days))
        base = day * day_length
        sid = _coerce_id(pid)
        out.extend(
            Interaction(sid, _coerce_id(item), base + k)
            for k, item in enumerate(items)
        )
    if skipped:
        logger.warning("skipped %d empty playlists", skipped)
    return out


def filter_interactions(
    interactions: Sequence[Interaction],
    min_session_length: int | None = None,
    min_item_frequency: int | None = None,
) -> list[Interaction]:
    """Optional preprocessing floors, both off by default.

    Drops items that occur in fewer than ``min_item_frequency`` interactions,
    then sessions left with fewer than ``min_session_length`` interactions.
    Each floor is applied once (no fixpoint iteration).
    """
    out = list(interactions)
    if min_item_frequency:
        freq: dict = {}
        for rec in out:
            freq[rec.item_id] = freq.get(rec.item_id, 0) + 1
        out = [r for r in out if freq[r.item_id] >= min_item_frequency]
    if min_session_length:
        length: dict = {}
        for rec in out:
            length[rec.session_id] = length.get(rec.session_id, 0) + 1
        out = [r for r in out if length[r.session_id] >= min_session_length]
    return out


def _session_last_days(
    interactions: Sequence[Interaction], day_length: int
) -> dict:
    last: dict = {}
    for rec in interactions:
        day = rec.timestamp // day_length
        if rec.session_id not in last or day > last[rec.session_id]:
            last[rec.session_id] = day
    return last


def split_by_days(
    interactions: Sequence[Interaction], spec: SplitSpec = SplitSpec()
) -> tuple[list[Interaction], list[Interaction]]:
    """Split sessions into train/test by the day of their last interaction.

    The last ``test_days`` days of the span are the test side.  With
    ``train_days`` set, only that many days before the boundary feed the
    training side; otherwise all earlier days do.
    """
    if not interactions:
        raise ValueError("no interactions to split")
    last_day = _session_last_days(interactions, spec.day_length)
    distinct_days = {rec.timestamp // spec.day_length for rec in interactions}
    required = (spec.train_days or 1) + spec.test_days
    if len(distinct_days) < required:
        raise ValueError(
            f"need at least {required} distinct days, found {len(distinct_days)}"
        )
    boundary = max(last_day.values()) - spec.test_days
    train_start = boundary - spec.train_days + 1 if spec.train_days else None
    train, test = [], []
    for rec in interactions:
        day = last_day[rec.session_id]
        if day > boundary:
            test.append(rec)
        elif train_start is None or day >= train_start:
            train.append(rec)
    if not train or not test:
        raise ValueError("degenerate split: empty train or test side")
    return train, test


def rolling_windows(
    interactions: Sequence[Interaction],
    window_days: int = 91,
    window_count: int = 5,
    day_length: int = DAY_LENGTH,
) -> list[tuple[list[Interaction], list[Interaction]]]:
    """Evenly strided windows of consecutive days, each split train/last-day.

    Window starts spread across the full span; inside each window the final
    day is the test side and the preceding days the training side.  Sessions
    belong to the window containing their last interaction day.
    """
    if not interactions:
        raise ValueError("no interactions to split")
    days = [rec.timestamp // day_length for rec in interactions]
    lo, hi = min(days), max(days)
    span = hi - lo + 1
    if span < window_days:
        raise ValueError(
            f"span of {span} days is shorter than window_days={window_days}"
        )
    if window_count < 1:
        raise ValueError("window_count must be >= 1")
    if window_count == 1:
        starts = [lo]
    else:
        stride = (span - window_days) / (window_count - 1)
        starts = [lo + int(round(i * stride)) for i in range(window_count)]
    last_day = _session_last_days(interactions, day_length)
    out = []
    for start in starts:
        end = start + window_days - 1
        train, test = [], []
        for rec in interactions:
            day = last_day[rec.session_id]
            if day == end:
                test.append(rec)
            elif start <= day < end:
                train.append(rec)
        out.append((train, test))
    return out


def gen_synthetic(
    num_sessions: int,
    catalog_size: int,
    mean_length: float,
    popularity_skew: float,
    seed: int,
    span_days: int = 30,
    day_length: int = DAY_LENGTH,
) -> list[Interaction]:
    """Generate a seeded synthetic click log.

    Session lengths are 2 plus a Poisson draw around ``mean_length - 2``;
    items follow a power-law popularity with exponent ``popularity_skew``;
    each session starts at a uniform random tick in the span and clicks once
    per tick.
    """
    if num_sessions < 1 or catalog_size < 1:
        raise ValueError("num_sessions and catalog_size must be >= 1")
    if mean_length < 2:
        raise ValueError("mean_length must be >= 2")
    rng = np.random.default_rng(seed)
    lengths = 2 + rng.poisson(mean_length - 2.0, num_sessions)
    total = int(lengths.sum())

    ranks = np.arange(1, catalog_size + 1, dtype=np.float64)
    cum = np.cumsum(ranks**-popularity_skew)
    cum /= cum[-1]
    items = np.searchsorted(cum, rng.random(total)).astype(np.int64)

    starts = rng.integers(0, span_days * day_length, num_sessions, dtype=np.int64)
    offsets = np.cumsum(lengths) - lengths
    sess_col = np.repeat(np.arange(num_sessions, dtype=np.int64), lengths)
    ts_col = np.repeat(starts, lengths) + (np.arange(total) - np.repeat(offsets, lengths))

    return [
        Interaction(int(s), int(i), int(t))
        for s, i, t in zip(sess_col, items, ts_col)
    ]
