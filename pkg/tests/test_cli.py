from __future__ import annotations

import json
import subprocess
import sys

import pytest

from raisf.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main
from raisf.config import load_run_config, parse_run_config
from raisf.core import load_qa_jsonl, trace_from_json, validate_trace
from raisf.errors import ConfigError
from raisf.evaluation import EvalReport, validate_report


@pytest.fixture(scope="module")
def world(tmp_path_factory):
    out = tmp_path_factory.mktemp("world")
    assert main(["oracle", "--out-dir", str(out), "--num-composites", "20", "--seed", "3"]) == EXIT_OK
    return out


def test_oracle_writes_world(world):
    assert {p.name for p in world.iterdir()} >= {"corpus.jsonl", "behavior.json", "dataset.jsonl", "index.json",
                                                 "config.toml"}


def test_solve_with_trace(world, tmp_path, capsys):
    question = load_qa_jsonl(world / "dataset.jsonl")[0]
    trace_path = tmp_path / "trace.json"
    code = main(["solve", "--config", str(world / "config.toml"), "--question", question.question,
                 "--trace-out", str(trace_path)])
    assert code == EXIT_OK
    assert capsys.readouterr().out.strip() == question.gold_answers[0]
    trace = trace_from_json(trace_path.read_text())
    assert validate_trace(trace, 3) == []


def test_eval_writes_valid_report(world, tmp_path, capsys):
    report_path = tmp_path / "r.json"
    code = main(["eval", "run", "--config", str(world / "config.toml"), "--dataset", str(world / "dataset.jsonl"),
                 "--strategy", "rag", "--ablation", "no-skm", "--report", str(report_path), "--parallelism", "2"])
    assert code == EXIT_OK
    assert capsys.readouterr().out.startswith("strategy=rag dataset=dataset n=20")
    report = EvalReport.from_dict(json.loads(report_path.read_text()))
    assert validate_report(report) == [] and report.num_questions == 20


def test_sweep_csv(world, tmp_path):
    out = tmp_path / "s.csv"
    code = main(["sweep", "k", "--config", str(world / "config.toml"), "--dataset", str(world / "dataset.jsonl"),
                 "--values", "1,3", "--out", str(out)])
    assert code == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "param,em,avg_retrievals,avg_nodes" and [line.split(",")[0] for line in lines[1:]] == ["1", "3"]


@pytest.mark.parametrize("task, expected", [("know", 6), ("decom", None)])
def test_collect(world, tmp_path, task, expected):
    out = tmp_path / f"{task}.jsonl"
    code = main(["collect", task, "--config", str(world / "config.toml"), "--dataset", str(world / "dataset.jsonl"),
                 "--out", str(out), "--sample", "6", "--seed", "1"])
    assert code == EXIT_OK
    rows = [json.loads(line) for line in out.read_text().splitlines()]
    assert all(set(r) == {"task", "input", "label"} and r["task"] == task for r in rows)
    if expected is not None:
        assert len(rows) == expected


def test_collect_rel_uses_k(world, tmp_path):
    out = tmp_path / "rel.jsonl"
    code = main(["collect", "rel", "--config", str(world / "config.toml"), "--dataset", str(world / "dataset.jsonl"),
                 "--out", str(out), "--sample", "4", "--k", "2"])
    assert code == EXIT_OK
    assert len(out.read_text().splitlines()) == 8


def test_print_config_round_trips(world, tmp_path, capsys):
    assert main(["solve", "--config", str(world / "config.toml"), "--print-config"]) == EXIT_OK
    printed = tmp_path / "printed.toml"
    printed.write_text(capsys.readouterr().out)
    assert load_run_config(printed) == load_run_config(world / "config.toml")


def test_index_build(world, tmp_path, capsys):
    assert main(["index", "build", "--corpus", str(world / "corpus.jsonl"), "--out", str(tmp_path / "i.json")]) == 0
    assert (tmp_path / "i.json").read_bytes() == (world / "index.json").read_bytes()
    assert "chunks" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [["frobnicate"], [], ["eval"], ["sweep", "dth"], ["eval", "run", "--strategy", "x"]])
def test_usage_errors_exit_1(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        code = main(argv)
        raise SystemExit(code)
    assert exc.value.code == EXIT_USAGE


def test_missing_option_exits_1(world, capsys):
    assert main(["eval", "run", "--config", str(world / "config.toml")]) == EXIT_USAGE
    assert "--dataset" in capsys.readouterr().err


def test_bad_config_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('[engine]\nd_th = -1\n[backend]\nbehavior = "b.json"\n')
    assert main(["solve", "--config", str(bad), "--question", "Q?"]) == EXIT_USAGE
    assert "d_th" in capsys.readouterr().err
    assert main(["solve", "--config", str(tmp_path / "absent.toml"), "--question", "Q?"]) == EXIT_USAGE
    typo = tmp_path / "typo.toml"
    typo.write_text('[backend]\nbehaviour = "b.json"\n')
    assert main(["solve", "--config", str(typo), "--question", "Q?"]) == EXIT_USAGE


def test_missing_api_key_env(tmp_path, monkeypatch):
    monkeypatch.delenv("RAISF_TEST_KEY", raising=False)
    cfg = tmp_path / "c.toml"
    cfg.write_text(_http_config(api_key_env="RAISF_TEST_KEY"))
    assert main(["solve", "--config", str(cfg), "--question", "Q?"]) == EXIT_USAGE


def _http_config(**extra) -> str:
    lines = ['[backend]', 'kind = "http"', 'endpoint = "http://127.0.0.1:9"',
             "retries = 0", "timeout = 2.0"]
    lines += [f'{k} = "{v}"' for k, v in extra.items()]
    lines += ["[backend.models]"] + [f'{r} = "m"' for r in ("answerer", "self_knowledge", "relevance", "decomposer")]
    return "\n".join(lines) + "\n"


def test_unreachable_backend_writes_partial_report(world, tmp_path, capsys):
    cfg = tmp_path / "http.toml"
    cfg.write_text(_http_config() + f'[retriever]\nindex = "{world / "index.json"}"\n')
    report_path = tmp_path / "r.json"
    code = main(["eval", "run", "--config", str(cfg), "--dataset", str(world / "dataset.jsonl"),
                 "--report", str(report_path)])
    assert code == EXIT_RUNTIME
    report = EvalReport.from_dict(json.loads(report_path.read_text()))
    assert report.num_questions == 20 and len(report.errors) == 20 and report.em == 0.0
    assert "Traceback" not in capsys.readouterr().err


def test_unreachable_backend_solve_exits_2(world, tmp_path, capsys):
    cfg = tmp_path / "http.toml"
    cfg.write_text(_http_config() + f'[retriever]\nindex = "{world / "index.json"}"\n')
    assert main(["solve", "--config", str(cfg), "--question", "Q?"]) == EXIT_RUNTIME
    assert "backend" in capsys.readouterr().err


def test_config_parse_is_strict():
    with pytest.raises(ConfigError):
        parse_run_config({"engine": {"k": 1}, "backend": {"behavior": "b"}})
    with pytest.raises(ConfigError):
        parse_run_config({"backend": {"kind": "grpc"}})
    with pytest.raises(ConfigError):
        parse_run_config({"backend": {"behavior": "b"}, "extra": {}})


def test_module_entry_point():
    done = subprocess.run([sys.executable, "-m", "raisf", "--version"], capture_output=True, text=True)
    assert done.returncode == 0 and done.stdout.startswith("raisf ")
