"""Prefix-prediction evaluation, hyperparameter sweeps, and benchmarks.

Every position k >= 2 of a test session becomes one prediction task: given
the first k-1 items, recommend a top-L list and check where the k-th item
lands.  Reported metrics are the hit rate (target anywhere in the list), the
mean reciprocal rank truncated at L, and catalog coverage (fraction of
training items that appear in at least one recommendation list).

Runs are reproducible by construction: per-session sampling seeds derive from
the run seed and the session id, per-step streams from the step number, and
aggregation happens in a canonical task order.  Results are therefore
independent of task order and of the parallelism degree, and report files are
byte-identical across repeat runs.
"""

from __future__ import annotations

import hashlib
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

from sessionknn.candidates import WorkCounters, advance_state, new_session_state
from sessionknn.index import BipartiteIndex, Interaction, build_index
from sessionknn.recommend import PipelineConfig, recommend
from sessionknn.similarity import SimilarityConfig


class PrefixTask(NamedTuple):
    """Predict the item at ``step`` from the ``step - 1`` items before it."""

    session_id: object
    prefix: tuple
    target: object
    step: int


@dataclass
class TimingStats:
    wall_clock_s: float
    entries_examined: int
    entries_sorted: int
    tasks: int

    @property
    def tasks_per_second(self) -> float:
        return self.tasks / self.wall_clock_s if self.wall_clock_s > 0 else float("inf")


@dataclass
class EvalReport:
    """Aggregated metrics of one evaluation run."""

    hr_at_l: float
    mrr_at_l: float
    coverage_at_l: float
    num_samples: int
    recommended_union_size: int
    catalog_size: int
    list_length: int
    strategy: str
    recommender: str
    lam: float
    beta: float
    form: str
    k_recent: int
    k_top: int
    seed: int
    per_strategy_timing: dict

    def table_text(self, delimiter: str = "\t") -> str:
        """Deterministic report table (no wall-clock; counters only)."""
        timing = self.per_strategy_timing.get(self.strategy)
        rows = [
            ("recommender", self.recommender),
            ("strategy", self.strategy),
            ("lam", repr(self.lam)),
            ("beta", repr(self.beta)),
            ("form", self.form),
            ("k_recent", self.k_recent),
            ("k_top", self.k_top),
            ("list_length", self.list_length),
            ("seed", self.seed),
            ("num_samples", self.num_samples),
            (f"hr_at_{self.list_length}", repr(self.hr_at_l)),
            (f"mrr_at_{self.list_length}", repr(self.mrr_at_l)),
            (f"coverage_at_{self.list_length}", repr(self.coverage_at_l)),
            ("recommended_union_size", self.recommended_union_size),
            ("catalog_size", self.catalog_size),
            ("entries_examined", timing.entries_examined if timing else 0),
            ("entries_sorted", timing.entries_sorted if timing else 0),
        ]
        return "".join(f"{k}{delimiter}{v}\n" for k, v in rows)

    def summary_text(self) -> str:
        timing = self.per_strategy_timing.get(self.strategy)
        lines = [
            f"{self.recommender} | strategy={self.strategy} "
            f"sim={self.form} lam={self.lam:g} beta={self.beta:g} "
            f"k_recent={self.k_recent} k_top={self.k_top}",
            f"samples: {self.num_samples}",
            f"HR@{self.list_length}:       {self.hr_at_l:.4f}",
            f"MRR@{self.list_length}:      {self.mrr_at_l:.4f}",
            f"Coverage@{self.list_length}: {self.coverage_at_l:.4f} "
            f"({self.recommended_union_size}/{self.catalog_size})",
        ]
        if timing is not None:
            lines.append(
                f"wall clock: {timing.wall_clock_s:.2f}s "
                f"({timing.tasks_per_second:.1f} tasks/s), "
                f"examined={timing.entries_examined}, "
                f"sorted={timing.entries_sorted}"
            )
        return "\n".join(lines) + "\n"

    def write(self, path, delimiter: str = "\t") -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.table_text(delimiter))


def sessions_from_interactions(
    interactions: Iterable[Interaction],
) -> list[tuple]:
    """Group interactions into (session_id, ordered item list) pairs.

    Items are ordered by timestamp (input order breaks ties); sessions come
    out in canonical id order.
    """
    by_session: dict = {}
    for row in interactions:
        by_session.setdefault(row[0], []).append((row[2], row[1]))
    out = []
    for sid in sorted(by_session, key=repr):
        rows = by_session[sid]
        rows.sort(key=lambda r: r[0])
        out.append((sid, [item for _, item in rows]))
    return out


def make_prefix_tasks(
    test_sessions: Sequence[tuple], index: BipartiteIndex
) -> list[PrefixTask]:
    """Expand test sessions into prediction tasks.

    Items the training index has never seen are dropped first; sessions left
    with fewer than two items produce no tasks.
    """
    tasks = []
    for sid, items in test_sessions:
        known = [it for it in items if index.item_index(it) is not None]
        if len(known) < 2:
            continue
        for step in range(2, len(known) + 1):
            tasks.append(
                PrefixTask(sid, tuple(known[: step - 1]), known[step - 1], step)
            )
    return tasks


def derive_state_seed(run_seed: int, session_id) -> int:
    """Stable per-session sampling seed; independent of processing order."""
    digest = hashlib.blake2s(f"{run_seed}|{session_id!r}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _group_tasks(tasks: Sequence[PrefixTask]) -> list[tuple]:
    """Group tasks by session in canonical order, steps ascending."""
    by_session: dict = {}
    for task in tasks:
        by_session.setdefault(task.session_id, []).append(task)
    groups = []
    for sid in sorted(by_session, key=repr):
        group = sorted(by_session[sid], key=lambda t: t.step)
        groups.append((sid, group))
    return groups


def _run_groups(
    index: BipartiteIndex,
    groups: Sequence[tuple],
    cfg: PipelineConfig,
    recommender: str,
    seed: int,
) -> tuple[list, WorkCounters]:
    """Evaluate task groups serially; states advance incrementally per session."""
    counters = WorkCounters()
    rows = []
    for sid, group in groups:
        state = new_session_state(
            index, own_session_id=sid, rng_seed=derive_state_seed(seed, sid)
        )
        current: list = []
        for task in group:
            prefix = list(task.prefix)
            if prefix[: len(current)] == current:
                fresh = prefix[len(current) :]
            else:  # non-chaining prefix: rebuild from scratch
                state = new_session_state(
                    index, own_session_id=sid, rng_seed=derive_state_seed(seed, sid)
                )
                current, fresh = [], prefix
            for item in fresh:
                advance_state(state, index, item, cfg.k_recent)
                current.append(item)
            rec = recommend(index, state, cfg, recommender, counters)
            rank = rec.rank_of(task.target)
            rows.append(
                (
                    repr(sid),
                    task.step,
                    1 if rank is not None else 0,
                    1.0 / rank if rank is not None else 0.0,
                    tuple(rec.item_ids()),
                )
            )
    return rows, counters


_worker_ctx: dict = {}


def _init_worker(index, cfg, recommender, seed):
    _worker_ctx["args"] = (index, cfg, recommender, seed)


def _run_chunk(groups):
    index, cfg, recommender, seed = _worker_ctx["args"]
    return _run_groups(index, groups, cfg, recommender, seed)


def evaluate(
    index: BipartiteIndex,
    tasks: Sequence[PrefixTask],
    cfg: PipelineConfig,
    recommender: str = "cknn",
    seed: int = 0,
    workers: int = 1,
) -> EvalReport:
    """Run the prefix-prediction protocol and aggregate the three metrics.

    ``workers`` > 1 splits sessions across processes; metrics and report
    files are identical for any degree.
    """
    tasks = list(tasks)
    if not tasks:
        raise ValueError("empty test set: no prediction tasks")
    groups = _group_tasks(tasks)

    started = time.perf_counter()
    if workers <= 1 or len(groups) < 2:
        rows, counters = _run_groups(index, groups, cfg, recommender, seed)
    else:
        workers = min(workers, len(groups))
        chunk_size = -(-len(groups) // workers)
        chunks = [groups[i : i + chunk_size] for i in range(0, len(groups), chunk_size)]
        counters = WorkCounters()
        rows = []
        with ProcessPoolExecutor(
            max_workers=workers,
            initializer=_init_worker,
            initargs=(index, cfg, recommender, seed),
        ) as pool:
            for chunk_rows, chunk_counters in pool.map(_run_chunk, chunks):
                rows.extend(chunk_rows)
                counters.merge(chunk_counters)
    elapsed = time.perf_counter() - started

    rows.sort(key=lambda r: (r[0], r[1]))
    hits = 0
    rr_sum = 0.0
    recommended: set = set()
    for _, _, hit, rr, rec_items in rows:
        hits += hit
        rr_sum += rr
        recommended.update(rec_items)
    n = len(rows)
    timing = TimingStats(
        wall_clock_s=elapsed,
        entries_examined=counters.entries_examined,
        entries_sorted=counters.entries_sorted,
        tasks=n,
    )
    sim = cfg.similarity
    return EvalReport(
        hr_at_l=hits / n,
        mrr_at_l=rr_sum / n,
        coverage_at_l=len(recommended) / index.num_items,
        num_samples=n,
        recommended_union_size=len(recommended),
        catalog_size=index.num_items,
        list_length=cfg.list_length,
        strategy=cfg.strategy,
        recommender=recommender,
        lam=sim.lam,
        beta=sim.beta,
        form=sim.form,
        k_recent=cfg.k_recent,
        k_top=cfg.k_top,
        seed=seed,
        per_strategy_timing={cfg.strategy: timing},
    )


def evaluate_windows(
    splits: Sequence[tuple],
    cfg: PipelineConfig,
    recommender: str = "cknn",
    seed: int = 0,
    workers: int = 1,
) -> list[EvalReport]:
    """One evaluation per (train, test) interaction split.

    Windows whose test side yields no usable tasks are skipped.  Callers
    average the per-window metrics (see :func:`windows_table_text`).
    """
    reports = []
    for train, test in splits:
        index = build_index(train)
        tasks = make_prefix_tasks(sessions_from_interactions(test), index)
        if not tasks:
            continue
        reports.append(evaluate(index, tasks, cfg, recommender, seed, workers))
    if not reports:
        raise ValueError("no window produced any prediction tasks")
    return reports


def windows_table_text(reports: Sequence[EvalReport], delimiter: str = "\t") -> str:
    """Per-window metric rows plus their unweighted average."""
    lines = [delimiter.join(("window", "samples", "hr", "mrr", "coverage"))]
    for i, r in enumerate(reports):
        lines.append(
            delimiter.join(
                (str(i), str(r.num_samples), repr(r.hr_at_l), repr(r.mrr_at_l), repr(r.coverage_at_l))
            )
        )
    n = len(reports)
    lines.append(
        delimiter.join(
            (
                "avg",
                str(sum(r.num_samples for r in reports)),
                repr(sum(r.hr_at_l for r in reports) / n),
                repr(sum(r.mrr_at_l for r in reports) / n),
                repr(sum(r.coverage_at_l for r in reports) / n),
            )
        )
    )
    return "\n".join(lines) + "\n"


@dataclass
class SweepPoint:
    lam: float
    beta: float
    hr_at_l: float
    mrr_at_l: float
    coverage_at_l: float


def sweep(
    index: BipartiteIndex,
    tasks: Sequence[PrefixTask],
    lambdas: Sequence[float],
    betas: Sequence[float],
    base_cfg: PipelineConfig,
    recommender: str = "cknn",
    seed: int = 0,
    workers: int = 1,
) -> list[SweepPoint]:
    """Evaluate every (lam, beta) grid point; rows sorted by (lam, beta)."""
    points = []
    for lam in sorted(set(float(v) for v in lambdas)):
        for beta in sorted(set(float(v) for v in betas)):
            sim = SimilarityConfig(lam, beta, base_cfg.similarity.form)
            report = evaluate(
                index, tasks, base_cfg.with_similarity(sim), recommender, seed, workers
            )
            points.append(
                SweepPoint(lam, beta, report.hr_at_l, report.mrr_at_l, report.coverage_at_l)
            )
    return points


def sweep_table_text(points: Sequence[SweepPoint], delimiter: str = "\t") -> str:
    lines = [delimiter.join(("lam", "beta", "hr", "mrr", "coverage"))]
    for p in points:
        lines.append(
            delimiter.join(
                (repr(p.lam), repr(p.beta), repr(p.hr_at_l), repr(p.mrr_at_l), repr(p.coverage_at_l))
            )
        )
    return "\n".join(lines) + "\n"


@dataclass
class BenchRow:
    strategy: str
    wall_clock_s: float
    entries_examined: int
    entries_sorted: int
    num_tasks: int

    @property
    def tasks_per_second(self) -> float:
        return self.num_tasks / self.wall_clock_s if self.wall_clock_s > 0 else float("inf")


def bench_selection(
    index: BipartiteIndex,
    tasks: Sequence[PrefixTask],
    strategies: Sequence[str],
    cfg: PipelineConfig,
    recommender: str = "cknn",
    seed: int = 0,
) -> list[BenchRow]:
    """Time the pipeline under each strategy over the identical task stream.

    Work counters are hardware-independent and reproducible; wall-clock is
    reported for context.
    """
    if not strategies:
        raise ValueError("no strategies to benchmark")
    tasks = list(tasks)
    groups = _group_tasks(tasks)
    rows = []
    for strategy in strategies:
        run_cfg = PipelineConfig(
            k_recent=cfg.k_recent,
            k_top=cfg.k_top,
            strategy=strategy,
            similarity=cfg.similarity,
            list_length=cfg.list_length,
            exclude_seen=cfg.exclude_seen,
        )
        started = time.perf_counter()
        result_rows, counters = _run_groups(index, groups, run_cfg, recommender, seed)
        elapsed = time.perf_counter() - started
        rows.append(
            BenchRow(
                strategy=strategy,
                wall_clock_s=elapsed,
                entries_examined=counters.entries_examined,
                entries_sorted=counters.entries_sorted,
                num_tasks=len(result_rows),
            )
        )
    return rows


def bench_table_text(rows: Sequence[BenchRow], delimiter: str = "\t") -> str:
    lines = [
        delimiter.join(
            ("strategy", "tasks", "wall_clock_s", "tasks_per_s", "entries_examined", "entries_sorted")
        )
    ]
    for r in rows:
        lines.append(
            delimiter.join(
                (
                    r.strategy,
                    str(r.num_tasks),
                    f"{r.wall_clock_s:.4f}",
                    f"{r.tasks_per_second:.1f}",
                    str(r.entries_examined),
                    str(r.entries_sorted),
                )
            )
        )
    return "\n".join(lines) + "\n"
