import json
import socket
import threading
import time

import pytest
from click.testing import CliRunner

from shapeboot.cli import main
from shapeboot.dataset import load_csv, loads_csv


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def demo_csv(tmp_csv, demo_ds):
    return tmp_csv(demo_ds)


def run_cli(runner, *args):
    return runner.invoke(main, [str(a) for a in args], catch_exceptions=False)


ANALYZE_ARGS = (
    "analyze", "--response", "y", "--focal", "x", "--degree", "2",
    "--controls", "c1,c2,c3", "--resamples", "150", "--seed", "11",
)


@pytest.fixture(scope="module")
def live_server():
    import uvicorn

    from shapeboot.service.app import app

    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    sock.close()
    config = uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 15
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("test server did not start")
        time.sleep(0.02)
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)


class TestSynthCommand:
    def test_writes_loadable_csv(self, runner, tmp_path):
        out = tmp_path / "sample.csv"
        result = run_cli(
            runner, "synth", "--n", 40, "--beta1", 10, "--beta2", -0.5,
            "--noise-sd", 3, "--seed", 4, "--out", out,
        )
        assert result.exit_code == 0
        ds = load_csv(out)
        assert ds.n_rows == 40
        assert ds.column_names == ("y", "x")

    def test_stdout_and_json_format(self, runner):
        result = run_cli(
            runner, "synth", "--n", 10, "--beta1", 1, "--beta2", -0.1,
            "--noise-sd", 1, "--format", "json",
        )
        assert result.exit_code == 0
        table = json.loads(result.output)
        assert table["header"] == ["y", "x"]
        assert len(table["rows"]) == 10

    def test_control_flags(self, runner):
        result = run_cli(
            runner, "synth", "--n", 12, "--beta1", 1, "--beta2", -0.1,
            "--noise-sd", 1, "--gammas", "2,3", "--control-names", "size,age",
        )
        assert loads_csv(result.output).column_names == ("y", "x", "size", "age")


class TestAnalyzeCommand:
    def test_report_written_and_deterministic(self, runner, demo_csv, tmp_path):
        out1, out2 = tmp_path / "r1.json", tmp_path / "r2.json"
        for out in (out1, out2):
            result = run_cli(runner, *ANALYZE_ARGS, "--data", demo_csv, "--out", out)
            assert result.exit_code == 0
        assert out1.read_bytes() == out2.read_bytes()
        report = json.loads(out1.read_text())
        assert report["resampling"]["seed"] == 11

    def test_custom_hypotheses_replace_defaults(self, runner, demo_csv):
        result = run_cli(
            runner, *ANALYZE_ARGS, "--data", demo_csv,
            "--hypothesis", "steep=curv() < -0.5",
            "--hypothesis", "optimum_in(4,8)",
        )
        report = json.loads(result.output)
        assert [h["name"] for h in report["hypotheses"]] == ["steep", "optimum_in(4,8)"]

    def test_ci_and_directional_flags(self, runner, demo_csv):
        result = run_cli(
            runner, *ANALYZE_ARGS, "--data", demo_csv,
            "--ci", "x^2,0.9", "--directional", "x^2,negative",
        )
        report = json.loads(result.output)
        by_name = {c["name"]: c for c in report["coefficients"]}
        assert by_name["x^2"]["ci_level"] == 0.9
        assert report["directional"][0]["direction"] == "negative"

    def test_csv_format(self, runner, demo_csv):
        result = run_cli(runner, *ANALYZE_ARGS, "--data", demo_csv, "--format", "csv")
        assert result.exit_code == 0
        assert result.output.startswith("section,name,field,value")
        assert "hypothesis,inverted_u" in result.output

    def test_adjust_flag(self, runner, demo_csv):
        result = run_cli(
            runner, *ANALYZE_ARGS, "--data", demo_csv, "--adjust", "c1=2.0"
        )
        report = json.loads(result.output)
        assert report["adjustment"]["c1"] == 2.0


class TestExitCodes:
    def test_missing_file_is_data_error(self, runner):
        result = runner.invoke(main, [*ANALYZE_ARGS, "--data", "/no/such.csv"])
        assert result.exit_code == 3

    def test_bad_predicate_is_config_error(self, runner, demo_csv):
        result = runner.invoke(
            main, [*ANALYZE_ARGS, "--data", demo_csv, "--hypothesis", "h=curv() <"]
        )
        assert result.exit_code == 2

    def test_bad_flag_syntax_is_config_error(self, runner, demo_csv):
        result = runner.invoke(
            main, [*ANALYZE_ARGS, "--data", demo_csv, "--ci", "x^2,not-a-number"]
        )
        assert result.exit_code == 2

    def test_degenerate_sample_is_exit_4(self, runner, tmp_path):
        path = tmp_path / "degen.csv"
        lines = ["x,dup,y"] + [f"{i}.0,{2 * i}.0,{i % 3}.5" for i in range(1, 9)]
        path.write_text("\n".join(lines) + "\n")
        result = runner.invoke(
            main,
            ["analyze", "--data", str(path), "--response", "y", "--focal", "x",
             "--degree", "1", "--controls", "dup", "--resamples", "10"],
        )
        assert result.exit_code == 4

    def test_unknown_column_is_data_error(self, runner, demo_csv):
        result = runner.invoke(
            main,
            ["analyze", "--data", demo_csv, "--response", "nope", "--focal", "x"],
        )
        assert result.exit_code == 3


class TestCurvesCommand:
    def test_csv_round_trips(self, runner, demo_csv, tmp_path):
        out = tmp_path / "curves.csv"
        result = run_cli(
            runner, "curves", "--data", demo_csv, "--response", "y", "--focal", "x",
            "--controls", "c1,c2,c3", "--resamples", 40, "--seed", 2,
            "--curve-grid", "0:12:2", "--spaghetti", 3, "--out", out,
        )
        assert result.exit_code == 0
        table = load_csv(out)
        assert table.column_names == ("x", "fit", "resample_0", "resample_1", "resample_2")
        assert table.n_rows == 7

    def test_bad_grid_flag(self, runner, demo_csv):
        result = runner.invoke(
            main,
            ["curves", "--data", demo_csv, "--response", "y", "--focal", "x",
             "--curve-grid", "0-12-2"],
        )
        assert result.exit_code == 2


class TestCoverageCommand:
    def test_json_and_csv(self, runner):
        args = (
            "coverage", "--n", 40, "--beta1", 4, "--beta2", -0.3, "--noise-sd", 2,
            "--reps", 3, "--resamples", 20, "--seed", 2,
        )
        as_json = run_cli(runner, *args)
        out = json.loads(as_json.output)
        assert out["reps"] == 3
        as_csv = run_cli(runner, *args, "--format", "csv")
        assert as_csv.output.startswith("field,value")
        assert "percentile_coverage" in as_csv.output


class TestRemoteMode:
    def test_server_analyze_matches_local_bytes(self, runner, demo_csv, tmp_path, live_server):
        local_out = tmp_path / "local.json"
        remote_out = tmp_path / "remote.json"
        assert run_cli(
            runner, *ANALYZE_ARGS, "--data", demo_csv, "--out", local_out
        ).exit_code == 0
        assert run_cli(
            runner, *ANALYZE_ARGS, "--data", demo_csv, "--out", remote_out,
            "--server", live_server,
        ).exit_code == 0
        assert local_out.read_bytes() == remote_out.read_bytes()

    def test_server_errors_map_to_exit_codes(self, runner, demo_csv, live_server):
        result = runner.invoke(
            main,
            ["analyze", "--data", demo_csv, "--response", "nope", "--focal", "x",
             "--server", live_server],
        )
        assert result.exit_code == 3

    def test_unreachable_server(self, runner, demo_csv):
        result = runner.invoke(
            main,
            [*ANALYZE_ARGS, "--data", demo_csv, "--server", "http://127.0.0.1:1"],
        )
        assert result.exit_code == 2

    def test_remote_synth(self, runner, live_server):
        result = run_cli(
            runner, "synth", "--n", 15, "--beta1", 1, "--beta2", -0.1,
            "--noise-sd", 1, "--seed", 3, "--server", live_server,
        )
        local = run_cli(
            runner, "synth", "--n", 15, "--beta1", 1, "--beta2", -0.1,
            "--noise-sd", 1, "--seed", 3,
        )
        assert result.output == local.output
