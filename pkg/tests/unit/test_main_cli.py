"""
Tests for the command line (main.py and commands/).
"""

import json

import pytest

from fault_arbiter.commands import build_parser
from fault_arbiter.commands.common import config_overrides
from fault_arbiter.config import get_run_config
from fault_arbiter.main import main


def _error_line(stderr: str) -> dict:
    lines = [line for line in stderr.splitlines() if line.startswith('{"error"')]
    assert lines, stderr
    return json.loads(lines[-1])


class TestArgumentParsing:
    """Test subcommands and shared flags."""

    def test_overrides_from_flags(self, tmp_path):
        args = build_parser().parse_args(
            ["experiment", "--seed", "3", "--out", str(tmp_path), "--backend", "llm", "--repeats", "2", "--log-level", "debug"]
        )

        assert config_overrides(args) == {
            "seed": 3,
            "out_dir": tmp_path,
            "log_level": "DEBUG",
            "arbitration": {"backend": "llm"},
            "experiment": {"repeats": 2},
        }

    def test_no_flags_no_overrides(self):
        assert config_overrides(build_parser().parse_args(["report"])) == {}

    def test_unknown_backend_rejected(self):
        with pytest.raises(SystemExit) as exc:
            build_parser().parse_args(["arbitrate", "--backend", "magic"])

        assert exc.value.code == 2

    def test_subcommand_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])


class TestMain:
    """Test dispatch, configuration and exit codes."""

    def test_synth(self, tmp_path):
        out = tmp_path / "run"

        code = main(["synth", "--out", str(out), "--per-class", "10", "--seed", "3"])

        assert code == 0
        assert (out / "dataset" / "manifest.csv").is_file()
        assert len(list((out / "dataset" / "signals").iterdir())) == 70
        assert get_run_config().seed == 3

    def test_missing_config_file(self, tmp_path, capsys):
        code = main(["synth", "--config", str(tmp_path / "absent.toml")])

        assert code == 2
        payload = _error_line(capsys.readouterr().err)
        assert payload["error"] == "ConfigurationError"
        assert "absent.toml" in payload["message"]

    def test_invalid_config_value(self, tmp_path, capsys):
        config = tmp_path / "bad.toml"
        config.write_text("[arbitration]\ntheta = 1.5\n")

        code = main(["synth", "--config", str(config)])

        assert code == 2
        assert "arbitration.theta" in _error_line(capsys.readouterr().err)["message"]

    def test_missing_artifacts(self, tmp_path, capsys):
        code = main(["sweep", "--out", str(tmp_path / "empty")])

        assert code == 5
        assert _error_line(capsys.readouterr().err)["error"] == "PersistenceError"

    def test_serve_replay_needs_recordings(self, capsys):
        code = main(["serve-replay"])

        assert code == 2
        assert _error_line(capsys.readouterr().err)["config_key"] == "replay.recordings"

    def test_serve_replay(self, mocker, tmp_path):
        recordings = tmp_path / "recordings.jsonl"
        recordings.write_text(json.dumps({"case_id": "normal_0001", "responses": ["Final Diagnosis: normal"]}) + "\n")
        serve = mocker.patch("fault_arbiter.commands.serve_replay.uvicorn.run")

        code = main(["serve-replay", "--recordings", str(recordings), "--port", "9001"])

        assert code == 0
        assert serve.call_args.kwargs["host"] == "127.0.0.1"
        assert serve.call_args.kwargs["port"] == 9001
