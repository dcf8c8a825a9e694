"""Benchmark the compiled kernels against the pure-Python fallback.

Builds a synthetic corpus, runs the full recommendation pipeline under each
candidate-selection strategy on every available backend, and prints a
side-by-side table.  Outputs are verified identical across backends before
timing is reported (the parity the test suite enforces, re-checked here on
the benchmark workload).

Usage:
    python benchmarks/compare_backends.py [--sessions 100000] [--items 10000]
"""

import argparse
import sys

from sessionknn import (
    PipelineConfig,
    SplitSpec,
    bench_selection,
    build_index,
    evaluate,
    gen_synthetic,
    kernels,
    make_prefix_tasks,
    sessions_from_interactions,
    split_by_days,
)
from sessionknn.similarity import SimilarityConfig


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sessions", type=int, default=100_000)
    parser.add_argument("--items", type=int, default=10_000)
    parser.add_argument("--tasks", type=int, default=2_000)
    parser.add_argument("--k-recent", type=int, default=1000)
    parser.add_argument("--k-top", type=int, default=500)
    parser.add_argument("--seed", type=int, default=2026)
    args = parser.parse_args(argv)

    print(f"generating {args.sessions} sessions over {args.items} items ...")
    rows = gen_synthetic(args.sessions, args.items, 4.0, 1.1, seed=args.seed, span_days=20)
    train, test = split_by_days(rows, SplitSpec(test_days=2))
    index = build_index(train)
    tasks = make_prefix_tasks(sessions_from_interactions(test), index)[: args.tasks]
    print(f"{index!r}, {len(tasks)} prediction tasks\n")

    cfg = PipelineConfig(
        k_recent=args.k_recent, k_top=args.k_top,
        similarity=SimilarityConfig(0.5, 0.5),
    )

    backends = kernels.available_backends()
    if backends == ["python"]:
        print("note: native backend not built; timing the fallback only")

    # parity check on this workload before quoting numbers
    reports = {}
    for backend in backends:
        kernels.set_backend(backend)
        reports[backend] = evaluate(
            index, tasks,
            PipelineConfig(k_recent=cfg.k_recent, k_top=cfg.k_top, strategy="epcsr",
                           similarity=cfg.similarity),
            seed=args.seed,
        ).table_text()
    if len(set(reports.values())) != 1:
        print("backend outputs differ; refusing to report timings", file=sys.stderr)
        return 1

    header = f"{'strategy':<10} {'backend':<8} {'tasks/s':>9} {'wall s':>8} {'entries sorted':>15}"
    print(header)
    print("-" * len(header))
    baseline = {}
    for backend in backends:
        kernels.set_backend(backend)
        for row in bench_selection(
            index, tasks, ["original", "epcs", "epcsr"], cfg, seed=args.seed
        ):
            rate = row.tasks_per_second
            key = row.strategy
            note = ""
            if backend == "python":
                baseline[key] = rate
            elif key in baseline and baseline[key] > 0:
                note = f"  ({rate / baseline[key]:.1f}x python)"
            print(
                f"{row.strategy:<10} {backend:<8} {rate:>9.1f} "
                f"{row.wall_clock_s:>8.2f} {row.entries_sorted:>15}{note}"
            )
    return 0


if __name__ == "__main__":
    sys.exit(main())
