"""Query model endpoints, extract answers, and grade them by execution.

The flow for one case is: build the prompt, collect ``n_samples``
completions (disk-cached, so interrupted runs resume), pull the answer
out of each completion, then check it against ground truth obtained by
actually running the original program.  Nothing here trusts the model
output or the dataset's recorded output further than a re-execution.
"""

from __future__ import annotations

import ast
import hashlib
import json
import logging
import os
import re
import shlex
import subprocess
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .dataset import OUTPUT_PREDICTION, TRANSLATION, TestCase, _atomic_write
from .equiv import normalize_stdout
from .mutate import MutationOutcome
from .runner_client import RunnerPool, WorkerClient, call_request, literal_request
from .runner_stub import DEFAULT_TIMEOUT_MS

log = logging.getLogger(__name__)

EXECUTION_INSTRUCTION = (
    "Based on the given Python code, which may contain errors, complete "
    "the assert statement with the output when executing the code on the "
    "given test case. Do NOT output any extra information, even if the "
    "function is incorrect or incomplete. Output ``# done'' after the "
    "assertion."
)

TRANSLATION_INSTRUCTION = (
    "You are a code translation expert. Translate the Python code below "
    "to Java. Do NOT output any extra information."
)

FAILURE_NONE = "none"
FAILURE_EXTRACTION = "extraction_failed"
FAILURE_MISMATCH = "mismatch"
FAILURE_RUNTIME = "runtime_error"
FAILURE_TIMEOUT = "timeout"

ORIGIN_TAG = "origin"

# Bumped whenever extraction or grading behaviour changes, and recorded in
# run metadata so numbers from different runs are comparable.
GRADING_RULES_VERSION = "1"

_BACKOFF_SECONDS = 1.0
_REQUEST_ATTEMPTS = 3


class EvalError(Exception):
    """Configuration or orchestration problem that should stop the run."""


@dataclass(frozen=True)
class ModelEndpoint:
    """Where to send prompts.  The auth token is named, not stored."""

    base_url: str
    model_name: str
    auth_token_env: str
    max_tokens: int = 1024
    request_timeout_ms: int = 60_000

    def __post_init__(self) -> None:
        if not self.base_url.startswith(("http://", "https://")):
            raise EvalError(f"base_url must be http(s), got {self.base_url!r}")
        if not self.model_name:
            raise EvalError("model_name must be non-empty")
        if self.max_tokens < 1:
            raise EvalError("max_tokens must be at least 1")

    def auth_token(self) -> str:
        """Read the bearer token from the environment at call time."""
        token = os.environ.get(self.auth_token_env)
        if not token:
            raise EvalError(
                f"auth token environment variable {self.auth_token_env} is not set"
            )
        return token


@dataclass(frozen=True)
class SamplingPlan:
    n_samples: int = 5
    temperature: float = 0.2
    concurrency_limit: int = 4

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise EvalError("n_samples must be at least 1")
        if self.temperature < 0:
            raise EvalError("temperature must be non-negative")
        if self.concurrency_limit < 1:
            raise EvalError("concurrency_limit must be at least 1")


@dataclass(frozen=True)
class CompletionSample:
    """One model completion, or the error marker left by a failed request."""

    text: str
    ok: bool = True
    error: str = ""


@dataclass(frozen=True)
class GradeRecord:
    case_id: str
    mutation: str
    sample_index: int
    completion: str
    answer: str | None
    correct: bool
    failure_reason: str

    def __post_init__(self) -> None:
        if self.correct and self.failure_reason != FAILURE_NONE:
            raise ValueError("a correct record cannot carry a failure reason")


def build_prompt(case: TestCase, code: str | None = None) -> str:
    """Assemble the prompt for a case, embedding ``code`` when given.

    Mutated runs pass the mutated text; the default is the case's own
    code.  Execution prompts end with the partial assert line the model
    is asked to complete.
    """
    body = case.code if code is None else code
    if case.task == TRANSLATION:
        return f"{TRANSLATION_INSTRUCTION}\n\n{body}\n"
    fn = _entry_name(body)
    return f"{EXECUTION_INSTRUCTION}\n\n{body}\nassert {fn}({case.input}) =="


def _entry_name(code: str) -> str:
    try:
        from .syntax import entry_function

        name = entry_function(ast.parse(code))
    except SyntaxError:
        name = None
    return name or "f"


def cache_key(prompt: str, temperature: float, sample_index: int) -> str:
    material = f"{prompt}|{temperature!r}|{sample_index}"
    return hashlib.sha256(material.encode("utf-8")).hexdigest()


def cache_path(cache_dir: str | Path, model_name: str, key: str) -> Path:
    return Path(cache_dir) / model_name / f"{key}.json"


def _post_once(endpoint: ModelEndpoint, prompt: str, temperature: float, token: str) -> str:
    headers = {"Authorization": f"Bearer {token}"}
    payload = {
        "model": endpoint.model_name,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": temperature,
        "max_tokens": endpoint.max_tokens,
        "n": 1,
    }
    response = requests.post(
        endpoint.base_url,
        json=payload,
        headers=headers,
        timeout=endpoint.request_timeout_ms / 1000.0,
    )
    response.raise_for_status()
    data = response.json()
    try:
        return data["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        raise EvalError(f"unexpected response shape from {endpoint.model_name}")


def sample_completions(
    endpoint: ModelEndpoint,
    prompt: str,
    plan: SamplingPlan,
    cache_dir: str | Path,
) -> list[CompletionSample]:
    """Return exactly ``plan.n_samples`` completions for the prompt.

    Each sample index is cached separately under
    ``cache/<model>/<sha256(prompt|temp|idx)>.json``; warm entries make
    no network call.  Transport failures are retried with exponential
    backoff, and a sample that still fails is returned as an error
    marker rather than aborting the run.  Failed samples are not cached,
    so a later run gets to retry them.
    """
    samples: list[CompletionSample] = []
    for idx in range(plan.n_samples):
        path = cache_path(cache_dir, endpoint.model_name, cache_key(prompt, plan.temperature, idx))
        if path.exists():
            stored = json.loads(path.read_text(encoding="utf-8"))
            samples.append(CompletionSample(text=stored["text"]))
            continue
        sample = _fetch_with_retries(endpoint, prompt, plan.temperature)
        if sample.ok:
            path.parent.mkdir(parents=True, exist_ok=True)
            _atomic_write(path, json.dumps({"model": endpoint.model_name, "text": sample.text}))
        samples.append(sample)
    return samples


def _fetch_with_retries(
    endpoint: ModelEndpoint, prompt: str, temperature: float
) -> CompletionSample:
    # A missing token is a configuration error, not a transport blip, so
    # it surfaces before any retrying starts.
    token = endpoint.auth_token()
    last = "no attempt made"
    for attempt in range(_REQUEST_ATTEMPTS):
        if attempt:
            time.sleep(_BACKOFF_SECONDS * (2 ** (attempt - 1)))
        try:
            return CompletionSample(text=_post_once(endpoint, prompt, temperature, token))
        except (requests.RequestException, EvalError) as exc:
            last = str(exc)
            log.warning(
                "request to %s failed (attempt %d/%d)",
                endpoint.model_name,
                attempt + 1,
                _REQUEST_ATTEMPTS,
            )
    return CompletionSample(text="", ok=False, error=last)


_FENCE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)
_DONE_TAIL = re.compile(r"\s*#\s*done\s*$")


def extract_answer(task: str, completion: str) -> str | None:
    """Pull the answer out of a completion, or None when there is none.

    Execution answers are the expression after ``==`` on the first
    completed assert line, with the optional trailing ``# done``
    dropped.  A completion that just continues the partial prompt line
    is accepted too, as long as it parses as an expression.  Translation
    answers are the first fenced code block, else the whole completion.
    """
    if task == TRANSLATION:
        match = _FENCE.search(completion)
        return match.group(1).strip("\n") if match else completion
    for line in completion.splitlines():
        stripped = line.strip()
        if "assert" in stripped and "==" in stripped:
            answer = _after_eq(stripped)
            if answer is not None:
                return answer
    return _continuation_answer(completion)


def _after_eq(line: str) -> str | None:
    cleaned = _DONE_TAIL.sub("", line).strip()
    try:
        node = ast.parse(cleaned, mode="exec").body
    except SyntaxError:
        node = None
    if (
        node
        and isinstance(node[0], ast.Assert)
        and isinstance(node[0].test, ast.Compare)
        and len(node[0].test.ops) == 1
        and isinstance(node[0].test.ops[0], ast.Eq)
    ):
        return cleaned[node[0].test.comparators[0].col_offset :].strip()
    at = cleaned.find("==")
    if at < 0:
        return None
    tail = cleaned[at + 2 :].strip()
    return tail or None


def _continuation_answer(completion: str) -> str | None:
    for line in completion.splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("```"):
            continue
        if stripped.startswith("=="):
            stripped = stripped[2:].strip()
        stripped = _DONE_TAIL.sub("", stripped).strip()
        if not stripped:
            return None
        try:
            ast.parse(stripped, mode="eval")
        except SyntaxError:
            return None
        return stripped
    return None


@dataclass(frozen=True)
class GroundTruth:
    """Result of executing the original program on the case input."""

    status: str
    value_repr: str = ""
    defect: str | None = None


def ground_truth(
    case: TestCase,
    client: WorkerClient,
    timeout_ms: int = DEFAULT_TIMEOUT_MS,
) -> GroundTruth:
    """Run the original program and cross-check the dataset's output field.

    The executed value is authoritative.  A recorded output that
    disagrees with it is reported as a dataset defect, not used for
    grading.
    """
    fn = _entry_name(case.code)
    resp = client.request(call_request(case.code, fn, case.args_repr(), timeout_ms))
    status = resp.get("status")
    if status != "ok":
        reason = resp.get("error_type") or resp.get("error") or status
        return GroundTruth(
            status=status or "failure",
            defect=f"{case.id}: original program did not produce a value ({reason})",
        )
    truth = resp["value_repr"]
    defect = None
    if case.output:
        recorded = client.request(literal_request(case.output, timeout_ms))
        if recorded.get("status") != "ok" or recorded.get("value_repr") != truth:
            defect = (
                f"{case.id}: recorded output {case.output!r} disagrees with "
                f"executed value {truth}"
            )
            log.warning("dataset defect: %s", defect)
    return GroundTruth(status="ok", value_repr=truth, defect=defect)


def grade(
    case: TestCase,
    answer: str | None,
    client: WorkerClient,
    *,
    truth: GroundTruth | None = None,
    mutation: str = ORIGIN_TAG,
    sample_index: int = 0,
    completion: str = "",
    timeout_ms: int = DEFAULT_TIMEOUT_MS,
    run_command: str | None = None,
    source_suffix: str = ".java",
) -> GradeRecord:
    """Grade one extracted answer for one case."""
    def record(correct: bool, reason: str) -> GradeRecord:
        return GradeRecord(
            case_id=case.id,
            mutation=mutation,
            sample_index=sample_index,
            completion=completion,
            answer=answer,
            correct=correct,
            failure_reason=reason,
        )

    if answer is None:
        return record(False, FAILURE_EXTRACTION)
    if case.task == TRANSLATION:
        if run_command is None:
            raise EvalError("translation grading needs a run command template")
        return record(*_grade_translation(case, answer, run_command, source_suffix, timeout_ms))

    if truth is None:
        truth = ground_truth(case, client, timeout_ms)
    if truth.status != "ok":
        reason = FAILURE_TIMEOUT if truth.status == "timeout" else FAILURE_RUNTIME
        return record(False, reason)
    resp = client.request(literal_request(answer, timeout_ms))
    status = resp.get("status")
    if status == "ok":
        if resp.get("value_repr") == truth.value_repr:
            return record(True, FAILURE_NONE)
        return record(False, FAILURE_MISMATCH)
    if status == "timeout":
        return record(False, FAILURE_TIMEOUT)
    return record(False, FAILURE_RUNTIME)


def _grade_translation(
    case: TestCase,
    answer: str,
    run_command: str,
    source_suffix: str,
    timeout_ms: int,
) -> tuple[bool, str]:
    with tempfile.TemporaryDirectory(prefix="mutabench-grade-") as workdir:
        src = Path(workdir) / f"candidate{source_suffix}"
        src.write_text(answer, encoding="utf-8")
        command = shlex.split(run_command.format(src=str(src)))
        for vector in case.tests:
            try:
                proc = subprocess.run(
                    command,
                    input=vector.stdin,
                    capture_output=True,
                    text=True,
                    timeout=timeout_ms / 1000.0,
                    cwd=workdir,
                )
            except subprocess.TimeoutExpired:
                return False, FAILURE_TIMEOUT
            except OSError:
                return False, FAILURE_RUNTIME
            if proc.returncode != 0:
                return False, FAILURE_RUNTIME
            if normalize_stdout(proc.stdout) != normalize_stdout(vector.stdout):
                return False, FAILURE_MISMATCH
    return True, FAILURE_NONE


def pass_at_1(records: list[GradeRecord]) -> float:
    """Mean per-case fraction of correct samples."""
    if not records:
        raise ValueError("pass@1 of an empty record set is undefined")
    correct: dict[str, int] = {}
    total: dict[str, int] = {}
    for rec in records:
        total[rec.case_id] = total.get(rec.case_id, 0) + 1
        correct[rec.case_id] = correct.get(rec.case_id, 0) + int(rec.correct)
    return sum(correct[cid] / total[cid] for cid in total) / len(total)


@dataclass
class EvalResult:
    records: list[GradeRecord]
    defects: list[str]
    metadata: dict = field(default_factory=dict)

    def pass1(self) -> float:
        return pass_at_1(self.records)


def evaluate_cases(
    cases: list[TestCase],
    endpoint: ModelEndpoint,
    plan: SamplingPlan,
    cache_dir: str | Path,
    *,
    outcomes: list[MutationOutcome] | None = None,
    mutation: str = ORIGIN_TAG,
    pool: RunnerPool | None = None,
    timeout_ms: int = DEFAULT_TIMEOUT_MS,
    run_command: str | None = None,
    source_suffix: str = ".java",
) -> EvalResult:
    """Sample, extract, and grade every case; one pass@1-ready result.

    With ``outcomes`` given (aligned to ``cases``), only cases whose
    mutation applied are evaluated, each on its mutated text.  Without
    them every case runs on its original code under the origin tag.
    """
    if outcomes is not None and len(outcomes) != len(cases):
        raise ValueError("cases and outcomes must align")
    selected: list[tuple[TestCase, str]] = []
    for i, case in enumerate(cases):
        if outcomes is None:
            selected.append((case, case.code))
        elif outcomes[i].applied:
            selected.append((case, outcomes[i].mutated.text))

    own_pool = pool is None
    if pool is None:
        pool = RunnerPool(size=plan.concurrency_limit)
    records: list[GradeRecord] = []
    defects: list[str] = []
    try:
        with ThreadPoolExecutor(max_workers=plan.concurrency_limit) as executor:
            prompts = list(
                executor.map(
                    lambda pair: sample_completions(
                        endpoint, build_prompt(pair[0], pair[1]), plan, cache_dir
                    ),
                    selected,
                )
            )
        futures = []
        for (case, _code), samples in zip(selected, prompts):
            def grade_case(client: WorkerClient, case=case, samples=samples) -> list[GradeRecord]:
                out: list[GradeRecord] = []
                truth = None
                if case.task == OUTPUT_PREDICTION:
                    truth = ground_truth(case, client, timeout_ms)
                    if truth.defect:
                        defects.append(truth.defect)
                for idx, sample in enumerate(samples):
                    answer = extract_answer(case.task, sample.text) if sample.ok else None
                    out.append(
                        grade(
                            case,
                            answer,
                            client,
                            truth=truth,
                            mutation=mutation,
                            sample_index=idx,
                            completion=sample.text,
                            timeout_ms=timeout_ms,
                            run_command=run_command,
                            source_suffix=source_suffix,
                        )
                    )
                return out

            futures.append(pool.submit_task(grade_case))
        for future in futures:
            records.extend(future.result())
        defects.sort()
    finally:
        if own_pool:
            pool.close()
    metadata = {
        "grading_rules": GRADING_RULES_VERSION,
        "model": endpoint.model_name,
        "mutation": mutation,
        "temperature": plan.temperature,
        "n_samples": plan.n_samples,
        "n_cases": len(selected),
    }
    return EvalResult(records=records, defects=defects, metadata=metadata)
