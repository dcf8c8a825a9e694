import json

import pytest
from click.testing import CliRunner

from conftest import fixture_interactions
from sessionknn import gen_synthetic, write_timestamped_log
from sessionknn.cli import EXIT_DATA_ERROR, EXIT_EMPTY_RESULT, main


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def fixture_log(tmp_path):
    path = tmp_path / "fixture.tsv"
    write_timestamped_log(fixture_interactions(), path)
    return path


@pytest.fixture
def fixture_snapshot(tmp_path, runner, fixture_log):
    out = tmp_path / "index.npz"
    result = runner.invoke(
        main, ["ingest", "--input", str(fixture_log), "--output", str(out)]
    )
    assert result.exit_code == 0, result.output
    return out


@pytest.fixture
def synthetic_log(tmp_path):
    rows = gen_synthetic(300, 40, 4.0, 1.0, seed=77, span_days=10)
    path = tmp_path / "synthetic.tsv"
    write_timestamped_log(rows, path)
    return path


class TestIngest:
    def test_summary_counts(self, runner, fixture_log, tmp_path):
        out = tmp_path / "ix.npz"
        result = runner.invoke(
            main, ["ingest", "--input", str(fixture_log), "--output", str(out)]
        )
        assert result.exit_code == 0, result.output
        assert "sessions\t4" in result.output
        assert "items\t6" in result.output
        assert "edges\t11" in result.output
        assert "avg_session_length\t2.75" in result.output
        assert out.exists()

    def test_empty_file_is_data_error(self, runner, tmp_path):
        empty = tmp_path / "empty.tsv"
        empty.write_text("")
        result = runner.invoke(
            main, ["ingest", "--input", str(empty), "--output", str(tmp_path / "x.npz")]
        )
        assert result.exit_code == EXIT_DATA_ERROR

    def test_synthetic_summary_matches_generator(self, runner, synthetic_log, tmp_path):
        result = runner.invoke(
            main,
            ["ingest", "--input", str(synthetic_log), "--output", str(tmp_path / "s.npz")],
        )
        assert result.exit_code == 0
        assert "sessions\t300" in result.output

    def test_playlist_kind(self, runner, tmp_path):
        playlist = tmp_path / "p.txt"
        playlist.write_text("p1 a b c\np2 b d\n")
        result = runner.invoke(
            main,
            [
                "ingest", "--input", str(playlist), "--output",
                str(tmp_path / "p.npz"), "--kind", "playlist", "--seed", "3",
            ],
        )
        assert result.exit_code == 0
        assert "sessions\t2" in result.output


class TestRecommend:
    def test_fixture_prefix_headed_by_popular_tie(self, runner, fixture_snapshot):
        result = runner.invoke(
            main,
            [
                "recommend", "--index", str(fixture_snapshot),
                "--items", "a4,a1", "--k-recent", "2", "--k-top", "1",
                "--preset", "cosine",
            ],
        )
        assert result.exit_code == 0, result.output
        lines = result.output.strip().splitlines()
        assert lines[0].split("\t")[0] == "a3"
        assert lines[1].split("\t")[0] == "a4"

    def test_unknown_items_exit_empty(self, runner, fixture_snapshot):
        result = runner.invoke(
            main,
            ["recommend", "--index", str(fixture_snapshot), "--items", "zz,yy"],
        )
        assert result.exit_code == EXIT_EMPTY_RESULT

    def test_missing_index_is_usage_error(self, runner, tmp_path):
        result = runner.invoke(
            main, ["recommend", "--index", str(tmp_path / "nope.npz"), "--items", "a"]
        )
        assert result.exit_code == 2

    def test_unknown_strategy_is_usage_error(self, runner, fixture_snapshot):
        result = runner.invoke(
            main,
            [
                "recommend", "--index", str(fixture_snapshot),
                "--items", "a4", "--strategy", "banana",
            ],
        )
        assert result.exit_code == 2

    def test_iknn_recommender(self, runner, fixture_snapshot):
        result = runner.invoke(
            main,
            [
                "recommend", "--index", str(fixture_snapshot),
                "--items", "a4", "--recommender", "iknn",
            ],
        )
        assert result.exit_code == 0
        assert result.output.splitlines()[0].startswith("a3\t")


class TestEvaluate:
    def test_split_run_writes_report(self, runner, synthetic_log, tmp_path):
        report = tmp_path / "report.tsv"
        result = runner.invoke(
            main,
            [
                "evaluate", "--input", str(synthetic_log), "--test-days", "1",
                "--strategy", "original", "--preset", "cosine",
                "--k-recent", "20", "--k-top", "10",
                "--workers", "1", "--output", str(report),
            ],
        )
        assert result.exit_code == 0, result.output
        assert "HR@20" in result.output
        content = report.read_text()
        assert "hr_at_20\t" in content and "strategy\toriginal" in content

    def test_epcsr_runs_are_byte_identical(self, runner, synthetic_log, tmp_path):
        args = [
            "evaluate", "--input", str(synthetic_log), "--test-days", "1",
            "--strategy", "epcsr", "--k-recent", "15", "--k-top", "8",
            "--seed", "11",
        ]
        r1 = runner.invoke(main, args + ["--workers", "1", "--output", str(tmp_path / "a.tsv")])
        r2 = runner.invoke(main, args + ["--workers", "2", "--output", str(tmp_path / "b.tsv")])
        assert r1.exit_code == 0 and r2.exit_code == 0
        assert (tmp_path / "a.tsv").read_bytes() == (tmp_path / "b.tsv").read_bytes()

    def test_index_plus_test_inputs(self, runner, fixture_snapshot, tmp_path):
        test_log = tmp_path / "test.tsv"
        test_log.write_text("t1\ta3\t100\nt1\ta4\t101\n")
        result = runner.invoke(
            main,
            [
                "evaluate", "--index", str(fixture_snapshot), "--test", str(test_log),
                "--k-recent", "4", "--k-top", "4", "--workers", "1",
            ],
        )
        assert result.exit_code == 0, result.output

    def test_conflicting_inputs_usage_error(self, runner, fixture_snapshot, synthetic_log):
        result = runner.invoke(
            main,
            [
                "evaluate", "--index", str(fixture_snapshot),
                "--input", str(synthetic_log),
            ],
        )
        assert result.exit_code == 2

    def test_missing_inputs_usage_error(self, runner):
        result = runner.invoke(main, ["evaluate"])
        assert result.exit_code == 2


class TestSweep:
    def test_grid_table(self, runner, synthetic_log, tmp_path):
        out = tmp_path / "grid.tsv"
        result = runner.invoke(
            main,
            [
                "sweep", "--input", str(synthetic_log), "--test-days", "1",
                "--lambda-grid", "0,1", "--beta-grid", "1",
                "--k-recent", "10", "--k-top", "5", "--workers", "1",
                "--output", str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        lines = out.read_text().splitlines()
        assert lines[0] == "lam\tbeta\thr\tmrr\tcoverage"
        assert len(lines) == 3


class TestBench:
    def test_strategy_table(self, runner, synthetic_log):
        result = runner.invoke(
            main,
            [
                "bench", "--input", str(synthetic_log), "--test-days", "1",
                "--strategies", "original,epcs,epcsr",
                "--k-recent", "10", "--k-top", "5",
            ],
        )
        assert result.exit_code == 0, result.output
        assert "strategy\t" in result.output
        for name in ("original", "epcs", "epcsr"):
            assert name in result.output

    def test_compare_backends(self, runner, synthetic_log):
        result = runner.invoke(
            main,
            [
                "bench", "--input", str(synthetic_log), "--test-days", "1",
                "--strategies", "original", "--k-recent", "5", "--k-top", "3",
                "--compare-backends",
            ],
        )
        assert result.exit_code == 0, result.output
        assert "backend: python" in result.output


class TestConfigFile:
    def test_config_defaults_with_flag_override(self, runner, fixture_log, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"ingest": {"output": str(tmp_path / "from_config.npz")}}))
        result = runner.invoke(
            main,
            ["--config", str(config), "ingest", "--input", str(fixture_log)],
        )
        assert result.exit_code == 0, result.output
        assert (tmp_path / "from_config.npz").exists()
        # explicit flag wins over the config value
        result = runner.invoke(
            main,
            [
                "--config", str(config), "ingest", "--input", str(fixture_log),
                "--output", str(tmp_path / "explicit.npz"),
            ],
        )
        assert result.exit_code == 0
        assert (tmp_path / "explicit.npz").exists()


def test_every_subcommand_documents_flags(runner):
    for name in ("ingest", "recommend", "evaluate", "sweep", "bench"):
        result = runner.invoke(main, [name, "--help"])
        assert result.exit_code == 0
        assert "--help" in result.output
    top = runner.invoke(main, ["--help"])
    for name in ("ingest", "recommend", "evaluate", "sweep", "bench"):
        assert name in top.output


class TestWindowedEvaluate:
    def test_windows_average_table(self, runner, tmp_path):
        rows = gen_synthetic(400, 50, 4.0, 1.0, seed=21, span_days=30)
        log = tmp_path / "span.tsv"
        write_timestamped_log(rows, log)
        out = tmp_path / "windows.tsv"
        result = runner.invoke(
            main,
            [
                "evaluate", "--input", str(log),
                "--window-days", "10", "--window-count", "3",
                "--k-recent", "10", "--k-top", "5", "--workers", "1",
                "--output", str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        lines = out.read_text().splitlines()
        assert lines[0] == "window\tsamples\thr\tmrr\tcoverage"
        assert lines[-1].startswith("avg\t")
        assert len(lines) == 5  # three windows + header + average

    def test_windows_need_input(self, runner, fixture_snapshot):
        result = runner.invoke(
            main,
            [
                "evaluate", "--index", str(fixture_snapshot),
                "--window-days", "10", "--window-count", "3",
            ],
        )
        assert result.exit_code == 2

    def test_window_count_needs_window_days(self, runner, synthetic_log):
        result = runner.invoke(
            main, ["evaluate", "--input", str(synthetic_log), "--window-count", "3"]
        )
        assert result.exit_code == 2
