"""Differential execution of original vs mutated programs.

A mutation is only acceptable if the mutant behaves exactly like the
original on the benchmark's inputs.  This module runs both sides
through the sandboxed worker and compares results: canonical value
representations for output-prediction cases, normalized stdout for
translation cases.  Two programs that raise the same exception type
also count as equivalent, since some benchmark items have an error as
their reference behavior and mutation must neither mask nor introduce
one.

Timeouts and worker failures produce an Inconclusive verdict rather
than a pass or a fail; only a definite behavioral difference is a
Mismatch.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field

from .dataset import OUTPUT_PREDICTION, TestCase
from .mutate import MutationOutcome, case_rng
from .runner_client import (
    RunnerPool,
    RunnerUnavailable,
    WorkerClient,
    call_request,
    stdin_request,
)
from .runner_stub import DEFAULT_TIMEOUT_MS
from .syntax import SourceUnit, entry_function

EQUIVALENT = "equivalent"
MISMATCH = "mismatch"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class EquivalenceVerdict:
    status: str
    original_result: str = ""
    mutated_result: str = ""
    detail: str = ""


def normalize_stdout(text: str) -> str:
    """Strip trailing whitespace per line and trailing blank lines."""
    return "\n".join(line.rstrip() for line in text.splitlines()).rstrip("\n")


def _outcome_tag(response: dict) -> tuple[str, str]:
    """Reduce a runner response to (category, comparable result)."""
    status = response.get("status")
    if status == "ok":
        return "ok", response.get("value_repr") or ""
    if status == "exception":
        return "exception", response.get("error_type") or "Exception"
    if status == "timeout":
        return "timeout", "timeout"
    return "failure", str(response.get("error_msg") or status)


def _judge(orig: tuple[str, str], mut: tuple[str, str], context: str = "") -> EquivalenceVerdict:
    for side, (category, result) in (("original", orig), ("mutant", mut)):
        if category in ("timeout", "failure"):
            return EquivalenceVerdict(
                INCONCLUSIVE,
                orig[1],
                mut[1],
                detail=f"{side} {category}" + (f" on {context}" if context else ""),
            )
    if orig[0] != mut[0]:
        detail = f"original {orig[0]}, mutant {mut[0]}"
    elif orig[1] != mut[1]:
        detail = "results differ"
    else:
        return EquivalenceVerdict(EQUIVALENT, orig[1], mut[1])
    if context:
        detail += f" on {context}"
    return EquivalenceVerdict(MISMATCH, orig[1], mut[1], detail=detail)


def _run_function(
    client: WorkerClient, code: str, function: str, args_repr: str, timeout_ms: int
) -> tuple[str, str]:
    response = client.request(call_request(code, function, args_repr, timeout_ms))
    return _outcome_tag(response)


def _stdout_tag(response: dict) -> tuple[str, str]:
    """Like ``_outcome_tag`` but the comparable payload is the stdout."""
    if response.get("status") == "ok":
        return "ok", normalize_stdout(response.get("stdout") or "")
    return _outcome_tag(response)


def fuzz_args(args_repr: str, rng, limit: int = 8) -> list[str]:
    """Perturbed copies of an argument tuple, one integer leaf at a time.

    Each variant nudges a single integer (+1, -1, to zero, or sign
    flip).  Used to spot-check equivalence beyond the benchmark's own
    input; the check asks only that both programs agree on each
    variant, not for any particular value.
    """
    try:
        tree = ast.parse(args_repr, mode="eval")
    except SyntaxError:
        return []
    leaves = [
        node
        for node in ast.walk(tree)
        if isinstance(node, ast.Constant) and type(node.value) is int
    ]
    variants: list[str] = []
    for position, leaf in enumerate(leaves):
        original = leaf.value
        twists = [original + 1, original - 1, 0, -original]
        rng.shuffle(twists)
        for twisted in twists:
            if twisted == original:
                continue
            leaf.value = twisted
            variants.append(ast.unparse(tree))
            if len(variants) >= limit:
                leaf.value = original
                return variants
        leaf.value = original
    rng.shuffle(variants)
    return variants


def verify_case(
    case: TestCase,
    mutant: SourceUnit,
    client: WorkerClient,
    timeout_ms: int = DEFAULT_TIMEOUT_MS,
    fuzz: int = 0,
    seed: int = 0,
) -> EquivalenceVerdict:
    """Differentially execute a case's original program against a mutant."""
    if case.task == OUTPUT_PREDICTION:
        name = entry_function(case.program.tree)
        if name is None:
            return EquivalenceVerdict(INCONCLUSIVE, detail="no entry function")
        args = case.args_repr()
        verdict = _judge(
            _run_function(client, case.code, name, args, timeout_ms),
            _run_function(client, mutant.text, name, args, timeout_ms),
        )
        if verdict.status != EQUIVALENT or fuzz <= 0:
            return verdict
        rng = case_rng(seed, case.id, "fuzz")
        for twisted_args in fuzz_args(args, rng, limit=fuzz):
            probe = _judge(
                _run_function(client, case.code, name, twisted_args, timeout_ms),
                _run_function(client, mutant.text, name, twisted_args, timeout_ms),
                context=twisted_args,
            )
            if probe.status == MISMATCH:
                return probe
            # A fuzzed input may legitimately not terminate; skip those
            # rather than downgrading a clean primary verdict.
        return verdict

    for position, vector in enumerate(case.tests):
        orig = _stdout_tag(
            client.request(stdin_request(case.code, vector.stdin, timeout_ms))
        )
        mut = _stdout_tag(
            client.request(stdin_request(mutant.text, vector.stdin, timeout_ms))
        )
        verdict = _judge(orig, mut, context=f"vector {position}")
        if verdict.status != EQUIVALENT:
            return verdict
    count = len(case.tests)
    return EquivalenceVerdict(EQUIVALENT, f"{count} vectors", f"{count} vectors")


@dataclass
class VerificationSummary:
    equivalent: int = 0
    mismatch: int = 0
    inconclusive: int = 0
    skipped: int = 0
    mismatches: list[tuple[str, EquivalenceVerdict]] = field(default_factory=list)
    inconclusive_ids: list[str] = field(default_factory=list)

    @property
    def checked(self) -> int:
        return self.equivalent + self.mismatch + self.inconclusive

    def ok(self) -> bool:
        return self.mismatch == 0


def verify_dataset(
    cases: list[TestCase],
    outcomes: list[MutationOutcome],
    pool: RunnerPool | None = None,
    timeout_ms: int = DEFAULT_TIMEOUT_MS,
    fuzz: int = 0,
    seed: int = 0,
) -> VerificationSummary:
    """Verify every applied mutation in a dataset-wide sweep.

    Unapplied outcomes are counted as skipped.  A dead worker marks its
    case Inconclusive and the sweep keeps going on a fresh one.
    """
    if len(cases) != len(outcomes):
        raise ValueError(
            f"need one outcome per case, got {len(outcomes)} for {len(cases)} cases"
        )
    summary = VerificationSummary()
    jobs: list[tuple[TestCase, object]] = []

    own_pool = pool is None
    if own_pool:
        pool = RunnerPool()
    try:
        for case, outcome in zip(cases, outcomes):
            if not outcome.applied:
                summary.skipped += 1
                continue
            mutant = outcome.mutated

            def task(client, case=case, mutant=mutant):
                return verify_case(case, mutant, client, timeout_ms, fuzz, seed)

            jobs.append((case, pool.submit_task(task)))

        for case, future in jobs:
            try:
                verdict = future.result()
            except RunnerUnavailable as exc:
                verdict = EquivalenceVerdict(INCONCLUSIVE, detail=f"worker failed: {exc}")
            if verdict.status == EQUIVALENT:
                summary.equivalent += 1
            elif verdict.status == MISMATCH:
                summary.mismatch += 1
                summary.mismatches.append((case.id, verdict))
            else:
                summary.inconclusive += 1
                summary.inconclusive_ids.append(case.id)
    finally:
        if own_pool:
            pool.close()
    return summary
