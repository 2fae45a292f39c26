import json

import pytest

from mutabench import dataset
from mutabench.dataset import (
    FormatError,
    MutatedRecord,
    TestCase,
    count_applicable,
    emit,
    load,
    load_mutated,
    mutate_cases,
    rejects,
)
from mutabench.mutate import CONSTUNFOLD, FOR2WHILE, VARNORM1, MutationConfig


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record) + "\n")


def op_record(case_id, code, input_text, output_text, **extra):
    record = {
        "id": case_id,
        "benchmark": "cruxeval",
        "task": "output_prediction",
        "code": code,
        "input": input_text,
        "output": output_text,
    }
    record.update(extra)
    return record


SIMPLE = "def f(x):\n    return x + 1\n"


class TestLoad:
    def test_round_numbers(self, tmp_path):
        path = tmp_path / "cases.jsonl"
        write_jsonl(path, [op_record(f"c{i}", SIMPLE, "1", "2") for i in range(10)])
        cases = load(path)
        assert len(cases) == 10
        assert [c.id for c in cases] == [f"c{i}" for i in range(10)]

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert load(path) == []

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "cases.jsonl"
        path.write_text(json.dumps(op_record("a", SIMPLE, "1", "2")) + "\n\n\n")
        assert len(load(path)) == 1

    def test_missing_output_field(self, tmp_path):
        path = tmp_path / "cases.jsonl"
        record = op_record("a", SIMPLE, "1", "2")
        del record["output"]
        write_jsonl(path, [record])
        with pytest.raises(FormatError) as err:
            load(path)
        assert '"output"' in str(err.value)
        assert err.value.line == 1

    def test_invalid_json_names_line(self, tmp_path):
        path = tmp_path / "cases.jsonl"
        path.write_text(json.dumps(op_record("a", SIMPLE, "1", "2")) + "\n{broken\n")
        with pytest.raises(FormatError) as err:
            load(path)
        assert err.value.line == 2

    def test_duplicate_id(self, tmp_path):
        path = tmp_path / "cases.jsonl"
        write_jsonl(path, [op_record("a", SIMPLE, "1", "2")] * 2)
        with pytest.raises(FormatError) as err:
            load(path)
        assert "duplicate" in str(err.value)

    def test_unknown_benchmark(self, tmp_path):
        path = tmp_path / "cases.jsonl"
        write_jsonl(path, [op_record("a", SIMPLE, "1", "2", benchmark="humaneval")])
        with pytest.raises(FormatError):
            load(path)

    def test_benchmark_argument_fills_and_filters(self, tmp_path):
        path = tmp_path / "cases.jsonl"
        record = op_record("a", SIMPLE, "1", "2")
        del record["benchmark"]
        write_jsonl(path, [record])
        assert load(path, benchmark="avatar")[0].benchmark == "avatar"
        with pytest.raises(FormatError):
            load(path)
        write_jsonl(path, [op_record("a", SIMPLE, "1", "2")])
        with pytest.raises(FormatError):
            load(path, benchmark="codenet")

    def test_bad_output_expression(self, tmp_path):
        path = tmp_path / "cases.jsonl"
        write_jsonl(path, [op_record("a", SIMPLE, "1", "2 +")])
        with pytest.raises(FormatError) as err:
            load(path)
        assert '"output"' in str(err.value)

    def test_unparseable_code_is_kept_not_raised(self, tmp_path):
        path = tmp_path / "cases.jsonl"
        write_jsonl(
            path,
            [
                op_record("good", SIMPLE, "1", "2"),
                op_record("bad", "def f(:\n", "1", "2"),
            ],
        )
        cases = load(path)
        assert len(cases) == 2
        assert cases[0].parse_error is None
        assert cases[1].parse_error is not None
        assert [c.id for c in rejects(cases)] == ["bad"]

    def test_order_preserved_and_idempotent(self, tmp_path):
        path = tmp_path / "cases.jsonl"
        ids = [f"case_{i}" for i in (3, 1, 2)]
        write_jsonl(path, [op_record(i, SIMPLE, "1", "2") for i in ids])
        first = load(path)
        second = load(path)
        assert [c.id for c in first] == ids
        assert first == second

    def test_translation_requires_vectors(self, tmp_path):
        path = tmp_path / "cases.jsonl"
        record = {
            "id": "t1",
            "benchmark": "avatar",
            "task": "translation",
            "code": "print(input())\n",
        }
        write_jsonl(path, [record])
        with pytest.raises(FormatError) as err:
            load(path)
        assert "tests" in str(err.value)
        record["tests"] = [{"stdin": "hi\n", "stdout": "hi\n"}]
        write_jsonl(path, [record])
        case = load(path)[0]
        assert case.tests[0].stdin == "hi\n"

    def test_translation_vector_shape_checked(self, tmp_path):
        path = tmp_path / "cases.jsonl"
        record = {
            "id": "t1",
            "benchmark": "avatar",
            "task": "translation",
            "code": "print(1)\n",
            "tests": [{"stdin": "x"}],
        }
        write_jsonl(path, [record])
        with pytest.raises(FormatError) as err:
            load(path)
        assert "stdout" in str(err.value)

    def test_unknown_task(self, tmp_path):
        path = tmp_path / "cases.jsonl"
        write_jsonl(path, [op_record("a", SIMPLE, "1", "2", task="repair")])
        with pytest.raises(FormatError):
            load(path)


class TestArgsRepr:
    def test_single_argument(self):
        case = TestCase("a", "cruxeval", "output_prediction", SIMPLE, input="5")
        assert case.args_repr() == "(5,)"
        assert eval(case.args_repr()) == (5,)

    def test_multiple_arguments(self):
        case = TestCase("a", "cruxeval", "output_prediction", SIMPLE, input="[1, 2], 3")
        assert eval(case.args_repr()) == ([1, 2], 3)

    def test_empty_input(self):
        case = TestCase("a", "cruxeval", "output_prediction", SIMPLE, input="")
        assert case.args_repr() == "()"

    def test_tuple_argument_stays_single(self):
        case = TestCase("a", "cruxeval", "output_prediction", SIMPLE, input="(1, 2)")
        assert eval(case.args_repr()) == ((1, 2),)

    def test_program_origin_is_case_id(self):
        case = TestCase("crux_7", "cruxeval", "output_prediction", SIMPLE, input="1")
        assert case.program.origin == "crux_7"


class TestCountApplicable:
    def make(self, tmp_path, codes):
        path = tmp_path / "cases.jsonl"
        write_jsonl(
            path, [op_record(f"c{i}", code, "1", "2") for i, code in enumerate(codes)]
        )
        return load(path)

    def test_counts_by_construction(self, tmp_path):
        with_loop = "def f(x):\n    for i in range(3):\n        x += i\n    return x\n"
        with_const = "def f(x):\n    return x + 10\n"
        bare = "def f(x):\n    return x\n"
        cases = self.make(tmp_path, [with_loop, with_const, bare])
        assert count_applicable(cases, FOR2WHILE) == 1
        assert count_applicable(cases, CONSTUNFOLD) == 2
        assert count_applicable(cases, VARNORM1) == 3

    def test_zero_matches(self, tmp_path):
        cases = self.make(tmp_path, ["def f(x):\n    return x\n"])
        assert count_applicable(cases, CONSTUNFOLD) == 0

    def test_unparseable_never_counts(self, tmp_path):
        cases = self.make(tmp_path, ["def f(:\n"])
        assert count_applicable(cases, VARNORM1) == 0


class TestEmitRoundTrip:
    def build(self, tmp_path, kind=VARNORM1, seed=0):
        src = tmp_path / "cases.jsonl"
        codes = [
            "def f(value):\n    return value * 2\n",
            "def f():\n    return 9\n",
            "def f(:\n",
        ]
        write_jsonl(
            src, [op_record(f"c{i}", code, "1" if i == 0 else "", "2") for i, code in enumerate(codes)]
        )
        cases = load(src)
        outcomes = mutate_cases(cases, kind, MutationConfig(seed=seed))
        return cases, outcomes

    def test_round_trip(self, tmp_path):
        cases, outcomes = self.build(tmp_path)
        out = tmp_path / "mutated.jsonl"
        header = emit(cases, outcomes, out, kind=VARNORM1, seed=0)
        loaded = load_mutated(out)
        assert loaded.header == header
        assert len(loaded.records) == 3
        again = tmp_path / "again.jsonl"
        emit(cases, outcomes, again, kind=VARNORM1, seed=0)
        assert load_mutated(again).records == loaded.records

    def test_applied_flags_and_text(self, tmp_path):
        cases, outcomes = self.build(tmp_path)
        out = tmp_path / "mutated.jsonl"
        emit(cases, outcomes, out, kind=VARNORM1, seed=0)
        records = load_mutated(out).records
        assert records[0].applied and "var1" in records[0].code
        assert not records[1].applied and records[1].code == cases[1].code
        assert not records[2].applied and records[2].code == "def f(:\n"

    def test_header_contents(self, tmp_path):
        cases, outcomes = self.build(tmp_path, seed=11)
        out = tmp_path / "mutated.jsonl"
        header = emit(cases, outcomes, out, kind=VARNORM1, seed=11)
        assert header["seed"] == 11
        assert header["mutation"] == VARNORM1
        assert header["applied"] == 1
        assert header["version"]
        assert dataset.meta_path(out).exists()

    def test_length_mismatch_rejected(self, tmp_path):
        cases, outcomes = self.build(tmp_path)
        with pytest.raises(ValueError):
            emit(cases, outcomes[:-1], tmp_path / "out.jsonl", kind=VARNORM1, seed=0)

    def test_io_error_names_path(self, tmp_path):
        cases, outcomes = self.build(tmp_path)
        missing_dir = tmp_path / "no" / "such" / "dir" / "out.jsonl"
        with pytest.raises(OSError) as err:
            emit(cases, outcomes, missing_dir, kind=VARNORM1, seed=0)
        assert "out.jsonl" in str(err.value)

    def test_corrupt_applied_record_rejected_on_load(self, tmp_path):
        out = tmp_path / "mutated.jsonl"
        record = MutatedRecord("a", VARNORM1, 0, "def f(:\n", True, 1)
        out.write_text(json.dumps(record.to_json()) + "\n")
        with pytest.raises(FormatError):
            load_mutated(out)

    def test_mistyped_record_field(self, tmp_path):
        out = tmp_path / "mutated.jsonl"
        out.write_text(json.dumps({"id": "a", "mutation": VARNORM1, "seed": "0", "code": "x = 1\n", "applied": False, "edits": 0}) + "\n")
        with pytest.raises(FormatError) as err:
            load_mutated(out)
        assert '"seed"' in str(err.value)
