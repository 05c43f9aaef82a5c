import json

import pytest

from agora.cli import main

GOLDEN = "tests/fixtures/golden_rules.txt"


def write_config(tmp_path, **overrides):
    from agora.config import baseline_config, save_config
    import dataclasses
    config = dataclasses.replace(baseline_config(), rules_path=GOLDEN,
                                 n_samples=1, **overrides)
    path = tmp_path / "config.json"
    save_config(config, path)
    return str(path)


class TestRun:
    def test_golden_run_exit_zero(self, tmp_path, capsys):
        config = write_config(tmp_path)
        code = main(["run", "--config", config, "--goal", "compute: 2+3",
                     "--seed", "0"])
        assert code == 0
        out = json.loads(capsys.readouterr().out)
        assert out["final_answer"] == "5"
        assert out["status"] == "complete"

    def test_failed_run_exit_one(self, tmp_path, capsys):
        config = write_config(tmp_path)
        code = main(["run", "--config", config, "--goal",
                     "no rule covers this"])
        assert code == 1
        assert json.loads(capsys.readouterr().out)["status"] == "failed"

    def test_state_dir_persists(self, tmp_path, capsys):
        config = write_config(tmp_path)
        state = tmp_path / "state"
        main(["run", "--config", config, "--goal", "compute: 2+3",
              "--state", str(state)])
        capsys.readouterr()
        assert (state / "events.jsonl").exists()


class TestDecide:
    def test_requirements_to_config(self, capsys):
        code = main(["decide", "--require", "accessibility,limited_budget"])
        assert code == 0
        out = json.loads(capsys.readouterr().out)
        assert out["config"]["goal_creator"] == "proactive"
        assert out["config"]["querying"] == "one_shot"

    def test_unknown_tag_exit_two(self, capsys):
        code = main(["decide", "--require", "nonsense_tag"])
        assert code == 2
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "UnknownRequirement"


class TestVerifyLog:
    def test_clean_log(self, tmp_path, capsys):
        from agora.events import EventLog
        log = EventLog()
        for i in range(4):
            log.append("a", "tick", {"i": i})
        path = tmp_path / "events.jsonl"
        log.write_jsonl(path)
        assert main(["verify-log", str(path)]) == 0
        assert json.loads(capsys.readouterr().out)["ok"] is True

    def test_tampered_log(self, tmp_path, capsys):
        from agora.events import EventLog
        log = EventLog()
        for i in range(4):
            log.append("a", "tick", {"i": i})
        path = tmp_path / "events.jsonl"
        log.write_jsonl(path)
        text = path.read_text().replace('"i": 1', '"i": 7')
        path.write_text(text)
        assert main(["verify-log", str(path)]) == 1
        out = json.loads(capsys.readouterr().out)
        assert out["first_bad_seq"] == 2


class TestEval:
    def test_suite_report_written(self, tmp_path, capsys):
        config = write_config(tmp_path)
        suite = tmp_path / "suite.json"
        suite.write_text(json.dumps({
            "suite_id": "cli-suite",
            "pass_threshold": 1.0,
            "cases": [{"case_id": "calc", "input": "compute: 2+3",
                       "expected": "5",
                       "metric": {"kind": "exact_match"}}],
        }))
        report_path = tmp_path / "report.json"
        code = main(["eval", "--suite", str(suite), "--config", config,
                     "--report", str(report_path)])
        assert code == 0
        assert "[PASS] calc" in capsys.readouterr().out
        report = json.loads(report_path.read_text())
        assert report["pass_rate"] == 1.0


ROSTER = "tests/fixtures/roster.json"


class TestCooperationCommands:
    def test_vote(self, capsys):
        code = main(["vote", "--roster", ROSTER, "--question", "pick one",
                     "--candidates", "X,Y", "--method", "weighted"])
        assert code == 0
        out = json.loads(capsys.readouterr().out)
        assert out["winner"] == "Y"  # lead carries weight 3
        assert out["tally"] == {"X": "2", "Y": "3"}

    def test_workflow(self, capsys):
        code = main(["workflow", "--roster", ROSTER, "--goal",
                     "quarterly report"])
        assert code == 0
        out = json.loads(capsys.readouterr().out)
        assert out["assignments"] == {"s1": "analyst", "s2": "lead"}

    def test_debate(self, capsys):
        code = main(["debate", "--roster", ROSTER, "--question",
                     "which colour", "--max-rounds", "3"])
        assert code == 0
        out = json.loads(capsys.readouterr().out)
        assert out["terminated_by"] == "consensus"
        assert out["consensus"] == "blue"
        assert len(out["rounds"]) == 2


class TestRunFlags:
    def test_corpus_flag_enables_rag(self, tmp_path, capsys):
        config = write_config(tmp_path)
        code = main(["run", "--config", config, "--goal",
                     "find docs about alpha", "--corpus",
                     "tests/fixtures/corpus.jsonl"])
        assert code == 0
        out = json.loads(capsys.readouterr().out)
        assert out["final_answer"].startswith("1. d1")

    def test_detectors_flag_enables_proactive(self, tmp_path, capsys):
        config = write_config(tmp_path)
        code = main(["run", "--config", config, "--goal", "compute: 2+3",
                     "--detectors", "tests/fixtures/detectors.jsonl"])
        assert code == 0
        out = json.loads(capsys.readouterr().out)
        assert out["status"] == "complete"


class TestParser:
    def test_serve_flags_parse(self):
        from agora.cli import build_parser
        args = build_parser().parse_args(
            ["serve", "--port", "9001", "--state", "/tmp/x"])
        assert args.port == 9001
        assert args.state == "/tmp/x"
