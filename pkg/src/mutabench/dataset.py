"""Benchmark ingestion and mutated-dataset emission.

All benchmarks are normalized into one case model at load time.  A case
is either an output-prediction item (function source, argument literal,
expected value literal) or a translation item (full program plus
stdin/stdout test vectors).  Loading is strict about the record schema
but tolerant of broken program code: a case whose code does not parse is
kept, flagged with ``parse_error``, and excluded from mutation rather
than silently dropped.

Mutated datasets are plain JSONL records plus a small ``.meta.json``
sidecar that carries the run header (tool version, global seed,
mutation tag and rename policy).  Re-loading an emitted file yields
records equal to the ones written.
"""

from __future__ import annotations

import ast
import json
import os
import tempfile
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

from . import __version__
from .mutate import MutationConfig, MutationOutcome, applicable, mutate
from .syntax import SourceUnit

OUTPUT_PREDICTION = "output_prediction"
TRANSLATION = "translation"
TASK_KINDS = (OUTPUT_PREDICTION, TRANSLATION)

BENCHMARKS = ("cruxeval", "avatar", "codenet", "transcoder")


class FormatError(Exception):
    """A dataset record violates the case schema."""

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


@dataclass(frozen=True)
class TestVector:
    """One stdin/stdout pair for a translation case."""

    __test__ = False  # not a pytest class, despite the name

    stdin: str
    stdout: str


@dataclass
class TestCase:
    """One benchmark item in the uniform schema."""

    __test__ = False  # not a pytest class, despite the name

    id: str
    benchmark: str
    task: str
    code: str
    input: str = ""
    output: str = ""
    tests: tuple[TestVector, ...] = ()
    parse_error: str | None = None

    @cached_property
    def program(self) -> SourceUnit:
        return SourceUnit(self.code, origin=self.id)

    def args_repr(self) -> str:
        """The case input as a Python argument-tuple literal.

        The ``input`` field holds the raw argument text exactly as it
        would appear between the parentheses of a call, so a trailing
        comma turns it into a tuple regardless of arity.
        """
        text = self.input.strip()
        if not text:
            return "()"
        return f"({text},)"


def _require_str(record: dict, name: str, line: int) -> str:
    if name not in record:
        raise FormatError(line, f'missing field "{name}"')
    value = record[name]
    if not isinstance(value, str):
        raise FormatError(line, f'field "{name}" must be a string')
    return value


def _check_expression(text: str, name: str, line: int) -> None:
    try:
        ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise FormatError(line, f'field "{name}" is not a valid expression: {exc.msg}')


def _parse_vectors(record: dict, line: int) -> tuple[TestVector, ...]:
    raw = record.get("tests")
    if not isinstance(raw, list) or not raw:
        raise FormatError(line, 'translation cases need a non-empty "tests" list')
    vectors = []
    for pos, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise FormatError(line, f"tests[{pos}] must be an object")
        for key in ("stdin", "stdout"):
            if not isinstance(entry.get(key), str):
                raise FormatError(line, f'tests[{pos}] needs a string "{key}"')
        vectors.append(TestVector(entry["stdin"], entry["stdout"]))
    return tuple(vectors)


def load(path: str | Path, benchmark: str | None = None) -> list[TestCase]:
    """Read a JSONL benchmark file into test cases.

    ``benchmark`` supplies the benchmark label for records that omit it;
    a record carrying a different label is an error.  Schema problems
    raise :class:`FormatError` with the offending line number.  Code
    that fails to parse does not: the case is returned with
    ``parse_error`` set so callers can report it.
    """
    cases: list[TestCase] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(line_no, f"invalid JSON: {exc.msg}")
            if not isinstance(record, dict):
                raise FormatError(line_no, "record must be a JSON object")

            case_id = _require_str(record, "id", line_no)
            if case_id in seen:
                raise FormatError(line_no, f'duplicate id "{case_id}"')
            seen.add(case_id)

            label = record.get("benchmark", benchmark)
            if label is None:
                raise FormatError(line_no, 'missing field "benchmark"')
            if label not in BENCHMARKS:
                raise FormatError(line_no, f'unknown benchmark "{label}"')
            if benchmark is not None and label != benchmark:
                raise FormatError(
                    line_no, f'benchmark "{label}" does not match requested "{benchmark}"'
                )

            task = _require_str(record, "task", line_no)
            if task not in TASK_KINDS:
                raise FormatError(line_no, f'unknown task "{task}"')

            code = _require_str(record, "code", line_no)

            if task == OUTPUT_PREDICTION:
                raw_input = _require_str(record, "input", line_no)
                output = _require_str(record, "output", line_no)
                _check_expression(output, "output", line_no)
                vectors: tuple[TestVector, ...] = ()
            else:
                raw_input = record.get("input", "")
                output = record.get("output", "")
                vectors = _parse_vectors(record, line_no)

            case = TestCase(
                id=case_id,
                benchmark=label,
                task=task,
                code=code,
                input=raw_input,
                output=output,
                tests=vectors,
            )
            if task == OUTPUT_PREDICTION:
                try:
                    ast.parse(case.args_repr(), mode="eval")
                except SyntaxError as exc:
                    raise FormatError(line_no, f'field "input" is not a valid argument list: {exc.msg}')
            try:
                ast.parse(code)
            except SyntaxError as exc:
                case.parse_error = f"line {exc.lineno}: {exc.msg}"
            cases.append(case)
    return cases


def rejects(cases: list[TestCase]) -> list[TestCase]:
    """The cases whose program code failed to parse."""
    return [case for case in cases if case.parse_error is not None]


def index_by_id(cases: list[TestCase]) -> dict[str, TestCase]:
    return {case.id: case for case in cases}


def count_applicable(cases: list[TestCase], kind: str) -> int:
    """How many cases the given mutation (or combo) can change."""
    total = 0
    for case in cases:
        if case.parse_error is None and applicable(case.program, kind):
            total += 1
    return total


def mutate_cases(
    cases: list[TestCase], kind: str, config: MutationConfig
) -> list[MutationOutcome]:
    """Run one mutation over a whole dataset, one outcome per case.

    Unparseable cases get a pass-through outcome (original text,
    ``applied`` false) so the output stays aligned with the input.
    """
    outcomes = []
    for case in cases:
        if case.parse_error is not None:
            unit = SourceUnit(case.code, origin=case.id)
            outcomes.append(
                MutationOutcome(unit, False, [], [((0, 0), "unparseable")])
            )
        else:
            outcomes.append(mutate(case.program, kind, config))
    return outcomes


@dataclass(frozen=True)
class MutatedRecord:
    """One line of an emitted mutated dataset."""

    id: str
    mutation: str
    seed: int
    code: str
    applied: bool
    edits: int

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "mutation": self.mutation,
            "seed": self.seed,
            "code": self.code,
            "applied": self.applied,
            "edits": self.edits,
        }


@dataclass
class MutatedDataset:
    """Emitted records plus the run header from the sidecar file."""

    records: list[MutatedRecord]
    header: dict = field(default_factory=dict)


def meta_path(path: str | Path) -> Path:
    return Path(f"{path}.meta.json")


def _atomic_write(path: Path, text: str) -> None:
    handle = tempfile.NamedTemporaryFile(
        "w", encoding="utf-8", dir=path.parent, prefix=f".{path.name}.", delete=False
    )
    try:
        with handle:
            handle.write(text)
        os.replace(handle.name, path)
    except BaseException:
        os.unlink(handle.name)
        raise


def emit(
    cases: list[TestCase],
    outcomes: list[MutationOutcome],
    path: str | Path,
    kind: str,
    seed: int,
    extra_header: dict | None = None,
) -> dict:
    """Write a mutated dataset and its header sidecar.

    Expects one outcome per case, in order.  Returns the header that was
    written.  Both files land atomically (temp file then rename) so a
    crashed run never leaves a half-written dataset.
    """
    if len(cases) != len(outcomes):
        raise ValueError(
            f"need one outcome per case, got {len(outcomes)} for {len(cases)} cases"
        )
    path = Path(path)
    lines = []
    applied = 0
    for case, outcome in zip(cases, outcomes):
        record = MutatedRecord(
            id=case.id,
            mutation=kind,
            seed=seed,
            code=outcome.mutated.text,
            applied=outcome.applied,
            edits=len(outcome.edits),
        )
        applied += outcome.applied
        lines.append(json.dumps(record.to_json(), ensure_ascii=False))

    header = {
        "tool": "mutabench",
        "version": __version__,
        "mutation": kind,
        "seed": seed,
        "rename_policy": "function-scope bindings only",
        "cases": len(cases),
        "applied": applied,
    }
    if extra_header:
        header.update(extra_header)

    try:
        _atomic_write(path, "".join(line + "\n" for line in lines))
        _atomic_write(meta_path(path), json.dumps(header, indent=2) + "\n")
    except OSError as exc:
        raise OSError(f"could not write mutated dataset {path}: {exc}") from exc
    return header


def load_mutated(path: str | Path) -> MutatedDataset:
    """Read back an emitted mutated dataset (records and header)."""
    path = Path(path)
    records: list[MutatedRecord] = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(line_no, f"invalid JSON: {exc.msg}")
            if not isinstance(raw, dict):
                raise FormatError(line_no, "record must be a JSON object")
            for name, kind_ in (
                ("id", str),
                ("mutation", str),
                ("seed", int),
                ("code", str),
                ("applied", bool),
                ("edits", int),
            ):
                if not isinstance(raw.get(name), kind_):
                    raise FormatError(line_no, f'missing or mistyped field "{name}"')
            if raw["applied"]:
                try:
                    ast.parse(raw["code"])
                except SyntaxError as exc:
                    raise FormatError(line_no, f"mutated code does not parse: {exc.msg}")
            records.append(
                MutatedRecord(
                    id=raw["id"],
                    mutation=raw["mutation"],
                    seed=raw["seed"],
                    code=raw["code"],
                    applied=raw["applied"],
                    edits=raw["edits"],
                )
            )
    header = {}
    sidecar = meta_path(path)
    if sidecar.exists():
        header = json.loads(sidecar.read_text(encoding="utf-8"))
    return MutatedDataset(records=records, header=header)
