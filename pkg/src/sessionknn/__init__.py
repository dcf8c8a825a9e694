"""Session-based next-item recommendation over a session-item bipartite index.

The pipeline: relevant sessions of the clicked items -> recent candidate set
(three selection strategies) -> top-k similar neighbor sessions under a
two-parameter diffusion similarity family -> scored item list.  Includes a
prefix-prediction evaluation harness, grid sweeps, benchmarks, dataset
loaders/splitters, and a synthetic workload generator.
"""

from sessionknn.candidates import (
    CandidateSet,
    SessionState,
    WorkCounters,
    advance_state,
    new_session_state,
    relevant_sessions,
    select_epcs,
    select_epcsr,
    select_original,
)
from sessionknn.dataio import (
    LogFormat,
    SplitSpec,
    filter_interactions,
    gen_synthetic,
    load_playlists,
    load_timestamped_log,
    rolling_windows,
    split_by_days,
    write_timestamped_log,
)
from sessionknn.evaluation import (
    EvalReport,
    PrefixTask,
    bench_selection,
    evaluate,
    evaluate_windows,
    make_prefix_tasks,
    sessions_from_interactions,
    sweep,
)
from sessionknn.index import (
    BipartiteIndex,
    EmptyDatasetError,
    Interaction,
    build_index,
    load_index,
    save_index,
)
from sessionknn.recommend import (
    PipelineConfig,
    Recommendation,
    recommend_cknn,
    recommend_iknn,
)
from sessionknn.similarity import NeighborSet, SimilarityConfig, preset, sim_dsm, top_k_sessions

__version__ = "0.1.0"

__all__ = [
    "BipartiteIndex",
    "CandidateSet",
    "EmptyDatasetError",
    "EvalReport",
    "Interaction",
    "LogFormat",
    "NeighborSet",
    "PipelineConfig",
    "PrefixTask",
    "Recommendation",
    "SessionState",
    "SimilarityConfig",
    "SplitSpec",
    "WorkCounters",
    "advance_state",
    "bench_selection",
    "build_index",
    "evaluate",
    "evaluate_windows",
    "filter_interactions",
    "gen_synthetic",
    "load_index",
    "load_playlists",
    "load_timestamped_log",
    "make_prefix_tasks",
    "new_session_state",
    "preset",
    "recommend_cknn",
    "recommend_iknn",
    "relevant_sessions",
    "rolling_windows",
    "save_index",
    "select_epcs",
    "select_epcsr",
    "select_original",
    "sessions_from_interactions",
    "sim_dsm",
    "split_by_days",
    "sweep",
    "top_k_sessions",
    "write_timestamped_log",
]
