"""End-to-end checks of the command-line surface."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from mutabench.cli import main
from mutabench.dataset import meta_path


CASES = [
    {
        "id": "m1",
        "benchmark": "cruxeval",
        "task": "output_prediction",
        "code": "def f(xs):\n    return xs[::-1]\n",
        "input": "[1, 2, 3]",
        "output": "[3, 2, 1]",
    },
    {
        "id": "m2",
        "benchmark": "cruxeval",
        "task": "output_prediction",
        "code": "def f(a, b):\n    return a * b + 1\n",
        "input": "3, 4",
        "output": "13",
    },
    {
        "id": "m3",
        "benchmark": "cruxeval",
        "task": "output_prediction",
        "code": "def f(s):\n    return s.upper()\n",
        "input": "'hi'",
        "output": "'HI'",
    },
    {
        "id": "m4",
        "benchmark": "cruxeval",
        "task": "output_prediction",
        "code": "def f(n):\n    if n > 3:\n        return n % 5\n    return n\n",
        "input": "12",
        "output": "2",
    },
]


@pytest.fixture()
def dataset(tmp_path):
    path = tmp_path / "mini.jsonl"
    path.write_text("".join(json.dumps(c) + "\n" for c in CASES), encoding="utf-8")
    return path


class TestMutate:
    def test_happy_path(self, dataset, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(
            [
                "mutate",
                "--dataset",
                str(dataset),
                "--ops",
                "varnorm1,fuv",
                "--seed",
                "42",
                "-o",
                str(out),
            ]
        )
        assert code == 0
        assert (out / "varnorm1.jsonl").exists()
        assert (out / "fuv.jsonl").exists()
        assert meta_path(out / "fuv.jsonl").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 42
        assert list(manifest["datasets"]) == [str(dataset)]
        assert len(next(iter(manifest["datasets"].values()))) == 64
        lines = capsys.readouterr().out.splitlines()
        assert any(line.startswith("varnorm1: applied") for line in lines)

    def test_unknown_op_is_usage_error(self, dataset, tmp_path):
        code = main(
            ["mutate", "--dataset", str(dataset), "--ops", "nosuchop", "-o", str(tmp_path / "x")]
        )
        assert code == 2

    def test_missing_dataset_is_operational_error(self, tmp_path):
        code = main(
            ["mutate", "--dataset", str(tmp_path / "nope.jsonl"), "--ops", "varnorm1", "-o", str(tmp_path / "x")]
        )
        assert code == 1

    def test_runs_are_byte_identical(self, dataset, tmp_path):
        for name in ("a", "b"):
            assert (
                main(
                    [
                        "mutate",
                        "--dataset",
                        str(dataset),
                        "--ops",
                        "varnorm2,constunfold,auv",
                        "--seed",
                        "7",
                        "-o",
                        str(tmp_path / name),
                    ]
                )
                == 0
            )
        for op in ("varnorm2", "constunfold", "auv"):
            first = (tmp_path / "a" / f"{op}.jsonl").read_bytes()
            second = (tmp_path / "b" / f"{op}.jsonl").read_bytes()
            assert first == second

    def test_tautology_pool_override_from_config(self, dataset, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"tautology_pool": ["(1 < 2)"]}))
        out = tmp_path / "out"
        code = main(
            [
                "mutate",
                "--dataset",
                str(dataset),
                "--ops",
                "condaug",
                "-o",
                str(out),
                "--config",
                str(config),
            ]
        )
        assert code == 0
        emitted = (out / "condaug.jsonl").read_text()
        assert "(1 < 2)" in emitted


def _mutate_into(dataset, outdir, ops="varnorm1"):
    assert main(["mutate", "--dataset", str(dataset), "--ops", ops, "-o", str(outdir)]) == 0
    return outdir / f"{ops.split(',')[0]}.jsonl"


class TestVerify:
    def test_clean_dataset_passes(self, dataset, tmp_path, capsys):
        mutated = _mutate_into(dataset, tmp_path / "out")
        code = main(["verify", "--original", str(dataset), "--mutated", str(mutated)])
        assert code == 0
        assert "0 mismatch" in capsys.readouterr().out

    def test_faulty_mutant_exits_three(self, dataset, tmp_path, capsys):
        mutated = _mutate_into(dataset, tmp_path / "out")
        lines = mutated.read_text().splitlines()
        doctored = []
        victim = None
        for line in lines:
            record = json.loads(line)
            if victim is None and record["applied"] and record["id"] == "m1":
                record["code"] = "def f(var1):\n    return var1\n"
                victim = record["id"]
            doctored.append(json.dumps(record))
        mutated.write_text("\n".join(doctored) + "\n")
        code = main(["verify", "--original", str(dataset), "--mutated", str(mutated)])
        out = capsys.readouterr().out
        assert code == 3
        assert victim == "m1"
        assert "MISMATCH m1" in out

    def test_missing_flag_is_usage_error(self):
        assert main(["verify", "--original", "x.jsonl"]) == 2


class TestCount:
    def test_census_output(self, dataset, capsys):
        assert main(["count", "--dataset", str(dataset)]) == 0
        out = capsys.readouterr().out
        assert "varnorm1" in out and "condaug" in out
        row = next(line for line in out.splitlines() if line.startswith("constunfold"))
        assert " 3 " in f" {row} " or row.split()[1] == "3"

    def test_ids_listing(self, dataset, capsys):
        assert main(["count", "--dataset", str(dataset), "--ops", "condaug", "--ids"]) == 0
        out = capsys.readouterr().out
        assert "    m4" in out


class _TruthHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        payload = json.loads(self.rfile.read(length))
        prompt = payload["messages"][0]["content"]
        line = prompt.splitlines()[-1]
        input_text = line[len("assert f(") : -len(") ==")]
        with self.server.lock:
            self.server.requests_seen += 1
        completion = f"{line} {self.server.truths[input_text]} # done"
        body = json.dumps({"choices": [{"message": {"content": completion}}]}).encode()
        self.send_response(200)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture()
def truth_server(monkeypatch):
    monkeypatch.setenv("MB_CLI_TOKEN", "sekrit")
    server = ThreadingHTTPServer(("127.0.0.1", 0), _TruthHandler)
    server.lock = threading.Lock()
    server.requests_seen = 0
    server.truths = {case["input"]: case["output"] for case in CASES}
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server
    server.shutdown()
    server.server_close()


class TestEvalAndReport:
    def test_eval_then_report(self, dataset, tmp_path, truth_server, capsys):
        out = tmp_path / "out"
        mutated = _mutate_into(dataset, out)
        host, port = truth_server.server_address
        endpoint_file = tmp_path / "endpoints.json"
        endpoint_file.write_text(
            json.dumps(
                {
                    "base_url": f"http://{host}:{port}/v1/chat/completions",
                    "model_name": "mock-model",
                    "auth_token_env": "MB_CLI_TOKEN",
                }
            )
        )
        code = main(
            [
                "eval",
                "--dataset",
                str(dataset),
                "--mutated",
                str(mutated),
                "--endpoint",
                str(endpoint_file),
                "--samples",
                "2",
                "-o",
                str(out),
            ]
        )
        assert code == 0
        origin_row = json.loads((out / "eval_mock-model_origin.json").read_text())
        mutated_row = json.loads((out / "eval_mock-model_varnorm1.json").read_text())
        assert origin_row["pass1_origin_full"] == 1.0
        assert mutated_row["pass1_mutated"] == 1.0
        assert mutated_row["metadata"]["grading_rules"] == "1"
        capsys.readouterr()

        assert main(["report", "--runs", str(out), "--original", str(dataset)]) == 0
        rendered = capsys.readouterr().out
        assert "mock-model" in rendered
        assert "varnorm1" in rendered
        assert "100.00" in rendered

        dist = tmp_path / "dist.csv"
        assert (
            main(
                [
                    "report",
                    "--runs",
                    str(out),
                    "--format",
                    "csv",
                    "--distribution",
                    str(dist),
                ]
            )
            == 0
        )
        assert dist.read_text().startswith("benchmark,mutation,model,pass1")

    def test_report_on_empty_dir_fails(self, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert main(["report", "--runs", str(empty)]) == 1

    def test_version_flag(self):
        assert main(["--version"]) == 0
