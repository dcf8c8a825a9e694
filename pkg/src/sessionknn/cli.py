"""Command line interface: ingest, recommend, evaluate, sweep, bench.

Exit codes: 0 success, 2 usage error (click), 3 data error (unreadable or
degenerate input), 4 empty result (no neighbors / nothing to recommend).
A JSON config file can pre-set any flag per subcommand; explicit flags win.
Log verbosity comes from the SESSIONKNN_LOG environment variable.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from contextlib import contextmanager

import click

from sessionknn import kernels
from sessionknn.candidates import STRATEGIES, advance_state, new_session_state
from sessionknn.dataio import (
    LogFormat,
    MalformedDataError,
    SplitSpec,
    filter_interactions,
    load_playlists,
    load_timestamped_log,
    rolling_windows,
    split_by_days,
)
from sessionknn.evaluation import (
    bench_selection,
    bench_table_text,
    derive_state_seed,
    evaluate,
    evaluate_windows,
    make_prefix_tasks,
    sessions_from_interactions,
    sweep,
    sweep_table_text,
    windows_table_text,
)
from sessionknn.index import EmptyDatasetError, build_index, load_index, save_index
from sessionknn.recommend import RECOMMENDERS, PipelineConfig, recommend
from sessionknn.similarity import SimilarityConfig, preset

EXIT_DATA_ERROR = 3
EXIT_EMPTY_RESULT = 4


@contextmanager
def _data_errors():
    try:
        yield
    except (MalformedDataError, EmptyDatasetError, OSError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_DATA_ERROR)


def _load_config(ctx, param, value):
    if value is None:
        return None
    with open(value, "r", encoding="utf-8") as fh:
        ctx.default_map = json.load(fh)
    return value


@click.group()
@click.option(
    "--config",
    type=click.Path(exists=True, dir_okay=False),
    callback=_load_config,
    expose_value=False,
    is_eager=True,
    help="JSON file with per-subcommand flag defaults; explicit flags win.",
)
def main():
    """Session-based next-item recommendation toolkit."""
    logging.basicConfig(level=os.environ.get("SESSIONKNN_LOG", "WARNING"))


def _format_options(fn):
    fn = click.option("--delimiter", default="\t", show_default=False, help="Log column delimiter (default: tab).")(fn)
    fn = click.option(
        "--columns",
        default="session,item,time",
        show_default=True,
        help="Column order in the log file.",
    )(fn)
    fn = click.option("--header/--no-header", default=False, show_default=True, help="Whether the log has a header row.")(fn)
    return fn


def _pipeline_options(fn):
    fn = click.option("--k-recent", default=1000, show_default=True, help="Candidate sessions kept by recency.")(fn)
    fn = click.option("--k-top", default=500, show_default=True, help="Nearest neighbor sessions kept by similarity.")(fn)
    fn = click.option(
        "--strategy",
        type=click.Choice(STRATEGIES),
        default="original",
        show_default=True,
        help="Candidate selection strategy.",
    )(fn)
    fn = click.option(
        "--preset",
        type=click.Choice(["cosine", "md", "hc", "mdhc"]),
        default=None,
        help="Named similarity operating point; overrides lam/beta unless given explicitly.",
    )(fn)
    fn = click.option("--lam", "--lambda", "lam", type=float, default=None, help="Session-degree balance in [0, 1].")(fn)
    fn = click.option("--beta", type=float, default=None, help="Item-popularity damping in [0, 1].")(fn)
    fn = click.option(
        "--form",
        type=click.Choice(["full", "simplified"]),
        default="full",
        show_default=True,
        help="Similarity scoring form (rankings are identical).",
    )(fn)
    fn = click.option("--length", "list_length", default=20, show_default=True, help="Recommendation list length.")(fn)
    fn = click.option("--exclude-seen/--keep-seen", default=False, show_default=True, help="Drop already-clicked items from the list.")(fn)
    return fn


def _similarity_config(preset_name, lam, beta, form) -> SimilarityConfig:
    if preset_name is not None:
        base = preset(preset_name, lam=lam)
        return SimilarityConfig(
            base.lam if lam is None else lam,
            base.beta if beta is None else beta,
            form,
        )
    return SimilarityConfig(
        0.5 if lam is None else lam, 0.5 if beta is None else beta, form
    )


def _pipeline_config(opts: dict) -> PipelineConfig:
    """Build the pipeline config from the shared option group's kwargs."""
    return PipelineConfig(
        k_recent=opts["k_recent"],
        k_top=opts["k_top"],
        strategy=opts["strategy"],
        similarity=_similarity_config(
            opts["preset"], opts["lam"], opts["beta"], opts["form"]
        ),
        list_length=opts["list_length"],
        exclude_seen=opts["exclude_seen"],
    )


def _log_format(delimiter, columns, header) -> LogFormat:
    cols = tuple(c.strip() for c in columns.split(","))
    return LogFormat(delimiter=delimiter, columns=cols, header=header)


def _parse_id(token: str):
    try:
        return int(token)
    except ValueError:
        return token


@main.command()
@click.option("--input", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--output", required=True, type=click.Path(dir_okay=False))
@click.option("--kind", type=click.Choice(["log", "playlist"]), default="log", show_default=True, help="Input file flavor.")
@_format_options
@click.option("--total-days", default=31, show_default=True, help="Day span for playlist timestamp assignment.")
@click.option("--min-session-length", type=int, default=None, help="Drop sessions with fewer interactions (off by default).")
@click.option("--min-item-frequency", type=int, default=None, help="Drop items with fewer interactions (off by default).")
@click.option("--seed", default=0, show_default=True)
def ingest(input, output, kind, delimiter, columns, header, total_days,
           min_session_length, min_item_frequency, seed):
    """Build an index snapshot from a click log or playlist file."""
    with _data_errors():
        if kind == "playlist":
            interactions = load_playlists(input, total_days=total_days, seed=seed)
        else:
            interactions = load_timestamped_log(input, _log_format(delimiter, columns, header))
        if min_session_length or min_item_frequency:
            interactions = filter_interactions(
                interactions, min_session_length, min_item_frequency
            )
        index = build_index(interactions)
        save_index(index, output)
    click.echo(f"sessions\t{index.num_sessions}")
    click.echo(f"items\t{index.num_items}")
    click.echo(f"edges\t{index.num_edges}")
    click.echo(f"avg_session_length\t{index.avg_session_length:g}")


@main.command("recommend")
@click.option("--index", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--items", required=True, help="Comma-separated session prefix, oldest click first.")
@click.option("--recommender", type=click.Choice(RECOMMENDERS), default="cknn", show_default=True)
@_pipeline_options
@click.option("--seed", default=0, show_default=True)
def recommend_cmd(index, items, recommender, seed, **pipeline):
    """Score next items for a session prefix; prints item<TAB>score."""
    with _data_errors():
        index = load_index(index)
        cfg = _pipeline_config(pipeline)
        prefix = [_parse_id(tok) for tok in items.split(",") if tok.strip()]
        if not prefix:
            raise click.UsageError("--items is empty")
        state = new_session_state(index, rng_seed=derive_state_seed(seed, "cli"))
        for item in prefix:
            advance_state(state, index, item, cfg.k_recent)
        rec = recommend(index, state, cfg, recommender)
    if not rec:
        click.echo("no neighbors found for the given prefix", err=True)
        sys.exit(EXIT_EMPTY_RESULT)
    for item, score in rec.items:
        click.echo(f"{item}\t{score!r}")


def _load_train_test(index_path, test_path, input_path, train_days, test_days, fmt):
    """Resolve the two evaluation input styles into (index, test sessions)."""
    if index_path and input_path:
        raise click.UsageError("pass either --index with --test, or --input; not both")
    if index_path:
        if not test_path:
            raise click.UsageError("--index requires --test with the test-session log")
        index = load_index(index_path)
        test = load_timestamped_log(test_path, fmt)
    elif input_path:
        interactions = load_timestamped_log(input_path, fmt)
        spec = SplitSpec(train_days=train_days, test_days=test_days)
        train, test = split_by_days(interactions, spec)
        index = build_index(train)
    else:
        raise click.UsageError("pass --index/--test or --input")
    return index, sessions_from_interactions(test)


def _eval_inputs(fn):
    fn = click.option("--index", type=click.Path(exists=True, dir_okay=False), default=None, help="Prebuilt index snapshot.")(fn)
    fn = click.option("--test", type=click.Path(exists=True, dir_okay=False), default=None, help="Test-session log (with --index).")(fn)
    fn = click.option("--input", type=click.Path(exists=True, dir_okay=False), default=None, help="Full log to split by days.")(fn)
    fn = click.option("--train-days", type=int, default=None, help="Days of training data before the boundary (default: all).")(fn)
    fn = click.option("--test-days", type=int, default=1, show_default=True)(fn)
    return fn


@main.command("evaluate")
@_eval_inputs
@_format_options
@click.option("--window-days", type=int, default=None, help="Rolling-window length in days (needs --input and --window-count).")
@click.option("--window-count", type=int, default=None, help="Number of evenly strided windows; metrics are averaged across them.")
@click.option("--recommender", type=click.Choice(RECOMMENDERS), default="cknn", show_default=True)
@_pipeline_options
@click.option("--seed", default=0, show_default=True)
@click.option("--workers", type=int, default=lambda: os.cpu_count() or 1, show_default="cpu count")
@click.option("--output", type=click.Path(dir_okay=False), default=None, help="Write the report table here.")
def evaluate_cmd(
    index, test, input, train_days, test_days, window_days, window_count,
    delimiter, columns, header, recommender, seed, workers, output, **pipeline
):
    """Run prefix prediction over a test split and report HR/MRR/Coverage."""
    fmt = _log_format(delimiter, columns, header)
    cfg = _pipeline_config(pipeline)
    if window_count is not None:
        if not input or index or test:
            raise click.UsageError("windowed evaluation needs --input (and no --index/--test)")
        if not window_days:
            raise click.UsageError("--window-count needs --window-days")
        with _data_errors():
            interactions = load_timestamped_log(input, fmt)
            splits = rolling_windows(interactions, window_days, window_count)
            reports = evaluate_windows(splits, cfg, recommender, seed, workers)
        table = windows_table_text(reports)
        click.echo(table, nl=False)
        if output:
            with open(output, "w", encoding="utf-8") as fh:
                fh.write(table)
            click.echo(f"report written to {output}")
        return
    with _data_errors():
        index, test_sessions = _load_train_test(
            index, test, input, train_days, test_days, fmt
        )
        tasks = make_prefix_tasks(test_sessions, index)
        if not tasks:
            click.echo("no usable test tasks after filtering", err=True)
            sys.exit(EXIT_EMPTY_RESULT)
        report = evaluate(index, tasks, cfg, recommender, seed=seed, workers=workers)
    click.echo(report.summary_text(), nl=False)
    if output:
        report.write(output)
        click.echo(f"report written to {output}")


@main.command("sweep")
@_eval_inputs
@_format_options
@click.option("--lambda-grid", "lam_grid", default="0,0.25,0.5,0.75,1", show_default=True, help="Comma-separated lam values.")
@click.option("--beta-grid", default="0,0.25,0.5,0.75,1", show_default=True, help="Comma-separated beta values.")
@_pipeline_options
@click.option("--recommender", type=click.Choice(RECOMMENDERS), default="cknn", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--workers", type=int, default=lambda: os.cpu_count() or 1, show_default="cpu count")
@click.option("--output", type=click.Path(dir_okay=False), default=None)
def sweep_cmd(
    index, test, input, train_days, test_days,
    delimiter, columns, header, lam_grid, beta_grid, recommender, seed, workers,
    output, **pipeline
):
    """Evaluate a lam x beta grid; emits a table sorted by (lam, beta)."""
    with _data_errors():
        fmt = _log_format(delimiter, columns, header)
        index, test_sessions = _load_train_test(
            index, test, input, train_days, test_days, fmt
        )
        cfg = _pipeline_config(pipeline)
        tasks = make_prefix_tasks(test_sessions, index)
        if not tasks:
            click.echo("no usable test tasks after filtering", err=True)
            sys.exit(EXIT_EMPTY_RESULT)
        lambdas = [float(v) for v in lam_grid.split(",") if v.strip()]
        betas = [float(v) for v in beta_grid.split(",") if v.strip()]
        points = sweep(index, tasks, lambdas, betas, cfg, recommender, seed, workers)
    table = sweep_table_text(points)
    click.echo(table, nl=False)
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(table)


@main.command("bench")
@_eval_inputs
@_format_options
@click.option("--strategies", default="original,epcs,epcsr", show_default=True, help="Comma-separated strategies to time.")
@_pipeline_options
@click.option("--recommender", type=click.Choice(RECOMMENDERS), default="cknn", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option(
    "--backend",
    type=click.Choice(["auto", "python", "native"]),
    default="auto",
    show_default=True,
    help="Kernel backend to time ('auto' keeps the import-time choice).",
)
@click.option("--compare-backends", is_flag=True, help="Repeat the run on every available backend.")
@click.option("--output", type=click.Path(dir_okay=False), default=None)
def bench_cmd(
    index, test, input, train_days, test_days,
    delimiter, columns, header, strategies, recommender, seed, backend,
    compare_backends, output, **pipeline
):
    """Time candidate-selection strategies over an identical task stream."""
    with _data_errors():
        fmt = _log_format(delimiter, columns, header)
        index, test_sessions = _load_train_test(
            index, test, input, train_days, test_days, fmt
        )
        cfg = _pipeline_config(pipeline)
        tasks = make_prefix_tasks(test_sessions, index)
        if not tasks:
            click.echo("no usable test tasks after filtering", err=True)
            sys.exit(EXIT_EMPTY_RESULT)
        names = [s.strip() for s in strategies.split(",") if s.strip()]
        backends = (
            kernels.available_backends()
            if compare_backends
            else [kernels.backend_name() if backend == "auto" else backend]
        )
        sections = []
        previous = kernels.backend_name()
        try:
            for b in backends:
                kernels.set_backend(b)
                rows = bench_selection(index, tasks, names, cfg, recommender, seed)
                sections.append(f"backend: {b}\n" + bench_table_text(rows))
        finally:
            kernels.set_backend(previous)
    table = "\n".join(sections)
    click.echo(table, nl=False)
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(table)


if __name__ == "__main__":
    main()
