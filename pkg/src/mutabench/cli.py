"""Command-line front end tying the pieces into reproducible runs.

Subcommands: ``mutate`` writes mutated datasets, ``verify`` checks them
against the originals by execution, ``eval`` queries model endpoints and
grades the answers, ``report`` renders the result tables, and ``count``
prints an applicability census.  Every run directory gets a manifest
before any work starts, with input digests, so a run can be reproduced
from the manifest alone.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import re
import sys
from pathlib import Path

from . import __version__
from .dataset import (
    FormatError,
    _atomic_write,
    count_applicable,
    emit,
    index_by_id,
    load,
    load_mutated,
    meta_path,
    mutate_cases,
    rejects,
)
from .equiv import verify_dataset
from .eval import (
    EvalError,
    ModelEndpoint,
    ORIGIN_TAG,
    SamplingPlan,
    evaluate_cases,
    pass_at_1,
)
from .mutate import ALL_KINDS, SINGLE_KINDS, MutationConfig, MutationOutcome
from .report import ReportRow, RunReport, bleu, bleu_table, delta_table, distribution_export
from .runner_client import RunnerPool, RunnerUnavailable
from .syntax import SourceUnit

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_MISMATCH = 3


def _sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as handle:
        config = json.load(handle)
    if not isinstance(config, dict):
        raise FormatError(0, "config file must hold a JSON object")
    return config


def _mutation_config(seed: int, config: dict) -> MutationConfig:
    pool = config.get("tautology_pool")
    if pool:
        return MutationConfig(seed=seed, tautology_pool=tuple(pool))
    return MutationConfig(seed=seed)


def _runner_pool(config: dict) -> RunnerPool:
    return RunnerPool(size=config.get("runner_pool_size"))


def write_manifest(
    outdir: Path,
    *,
    command: str,
    seed: int | None,
    datasets: list[str | Path],
    ops: list[str] | None = None,
    endpoints: list[dict] | None = None,
    config_path: str | None = None,
) -> Path:
    """Record what a run is about to do, before doing any of it."""
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "tool": "mutabench",
        "version": __version__,
        "command": command,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "seed": seed,
        "config": config_path,
        "datasets": {str(p): _sha256_file(p) for p in datasets},
        "ops": ops or [],
        "endpoints": endpoints or [],
        "output_dir": str(outdir),
        "rename_policy": "function-scope bindings only",
    }
    path = outdir / "manifest.json"
    _atomic_write(path, json.dumps(manifest, indent=2) + "\n")
    return path


def _parse_ops(raw: str) -> list[str]:
    ops = [part.strip() for part in raw.split(",") if part.strip()]
    unknown = [op for op in ops if op not in ALL_KINDS]
    if unknown:
        raise _UsageError(
            f"unknown ops: {', '.join(unknown)} (choose from {', '.join(ALL_KINDS)})"
        )
    if not ops:
        raise _UsageError("at least one op is required")
    return ops


class _UsageError(Exception):
    pass


def cmd_mutate(args: argparse.Namespace, config: dict) -> int:
    ops = _parse_ops(args.ops)
    cases = load(args.dataset, benchmark=args.benchmark)
    for case in rejects(cases):
        print(f"note: {case.id} does not parse and passes through unchanged", file=sys.stderr)
    outdir = Path(args.out)
    write_manifest(
        outdir,
        command="mutate",
        seed=args.seed,
        datasets=[args.dataset],
        ops=ops,
        config_path=args.config,
    )
    mcfg = _mutation_config(args.seed, config)
    for op in ops:
        outcomes = mutate_cases(cases, op, mcfg)
        path = outdir / f"{op}.jsonl"
        header = emit(cases, outcomes, path, op, args.seed)
        print(f"{op}: applied {header['applied']}/{header['cases']} -> {path}")
    return EXIT_OK


def _align_mutated(originals_path: str, mutated_path: str):
    """Pair a mutated dataset with its originals, in original order."""
    originals = load(originals_path)
    mutated = load_mutated(mutated_path)
    by_id = {rec.id: rec for rec in mutated.records}
    stray = set(by_id) - {case.id for case in originals}
    if stray:
        raise FormatError(0, f"mutated ids missing from originals: {sorted(stray)[:5]}")
    outcomes = []
    for case in originals:
        rec = by_id.get(case.id)
        if rec is None or not rec.applied:
            outcomes.append(MutationOutcome(case.program, False))
        else:
            outcomes.append(MutationOutcome(SourceUnit(rec.code, origin=case.id), True))
    tag = mutated.header.get("mutation") or (
        mutated.records[0].mutation if mutated.records else "unknown"
    )
    return originals, outcomes, tag


def cmd_verify(args: argparse.Namespace, config: dict) -> int:
    cases, outcomes, tag = _align_mutated(args.original, args.mutated)
    pool = _runner_pool(config)
    summary = verify_dataset(
        cases,
        outcomes,
        pool=pool,
        timeout_ms=args.timeout_ms,
        fuzz=args.fuzz,
        seed=args.seed,
    )
    print(
        f"{tag}: {summary.equivalent} equivalent, {summary.mismatch} mismatch, "
        f"{summary.inconclusive} inconclusive, {summary.skipped} skipped"
    )
    for case_id in summary.inconclusive_ids:
        print(f"INCONCLUSIVE {case_id}")
    for case_id, verdict in summary.mismatches:
        print(
            f"MISMATCH {case_id}: {verdict.detail or 'results differ'} "
            f"(original={verdict.original_result!r} mutated={verdict.mutated_result!r})"
        )
    return EXIT_MISMATCH if summary.mismatch else EXIT_OK


def _load_endpoints(path: str) -> list[ModelEndpoint]:
    with open(path, encoding="utf-8") as handle:
        data = json.load(handle)
    if isinstance(data, dict) and "endpoints" in data:
        data = data["endpoints"]
    if isinstance(data, dict):
        data = [data]
    if not isinstance(data, list) or not data:
        raise FormatError(0, "endpoint file must hold an endpoint object or list")
    return [ModelEndpoint(**spec) for spec in data]


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name)


def cmd_eval(args: argparse.Namespace, config: dict) -> int:
    endpoints = _load_endpoints(args.endpoint)
    originals = load(args.dataset, benchmark=args.benchmark)
    benchmark = originals[0].benchmark if originals else "unknown"
    plan = SamplingPlan(
        n_samples=args.samples,
        temperature=args.temperature,
        concurrency_limit=args.concurrency,
    )
    outdir = Path(args.out)
    write_manifest(
        outdir,
        command="eval",
        seed=None,
        datasets=[args.dataset, *args.mutated],
        endpoints=[
            {"model_name": ep.model_name, "base_url": ep.base_url} for ep in endpoints
        ],
        config_path=args.config,
    )
    cache_dir = Path(args.cache) if args.cache else outdir / "cache"
    run_command = args.run_command or config.get("run_command")
    source_suffix = config.get("source_suffix", ".java")

    mutated_sets = []
    for path in args.mutated:
        cases, outcomes, tag = _align_mutated(args.dataset, path)
        mutated_sets.append((outcomes, tag))

    pool = _runner_pool(config)
    try:
        for ep in endpoints:
            origin = evaluate_cases(
                originals,
                ep,
                plan,
                cache_dir,
                pool=pool,
                timeout_ms=args.timeout_ms,
                run_command=run_command,
                source_suffix=source_suffix,
            )
            origin_full = origin.pass1()
            _write_eval_row(
                outdir,
                benchmark=benchmark,
                model=ep.model_name,
                mutation=ORIGIN_TAG,
                n_cases=len(originals),
                origin_full=origin_full,
                origin_subset=origin_full,
                mutated=origin_full,
                result=origin,
            )
            print(f"{ep.model_name} origin: pass@1 {origin_full:.4f}")
            for outcomes, tag in mutated_sets:
                result = evaluate_cases(
                    originals,
                    ep,
                    plan,
                    cache_dir,
                    outcomes=outcomes,
                    mutation=tag,
                    pool=pool,
                    timeout_ms=args.timeout_ms,
                    run_command=run_command,
                    source_suffix=source_suffix,
                )
                subset_ids = {
                    case.id
                    for case, outcome in zip(originals, outcomes)
                    if outcome.applied
                }
                subset_records = [
                    rec for rec in origin.records if rec.case_id in subset_ids
                ]
                _write_eval_row(
                    outdir,
                    benchmark=benchmark,
                    model=ep.model_name,
                    mutation=tag,
                    n_cases=len(subset_ids),
                    origin_full=origin_full,
                    origin_subset=pass_at_1(subset_records),
                    mutated=result.pass1(),
                    result=result,
                )
                print(f"{ep.model_name} {tag}: pass@1 {result.pass1():.4f}")
    finally:
        pool.close()
    return EXIT_OK


def _write_eval_row(
    outdir: Path,
    *,
    benchmark: str,
    model: str,
    mutation: str,
    n_cases: int,
    origin_full: float,
    origin_subset: float,
    mutated: float,
    result,
) -> None:
    payload = {
        "benchmark": benchmark,
        "model": model,
        "mutation": mutation,
        "n_cases": n_cases,
        "pass1_origin_full": origin_full,
        "pass1_origin_subset": origin_subset,
        "pass1_mutated": mutated,
        "defects": result.defects,
        "metadata": result.metadata,
    }
    path = outdir / f"eval_{_safe_name(model)}_{_safe_name(mutation)}.json"
    _atomic_write(path, json.dumps(payload, indent=2) + "\n")


def cmd_report(args: argparse.Namespace, config: dict) -> int:
    runs = Path(args.runs)
    rows = []
    for path in sorted(runs.glob("eval_*.json")):
        data = json.loads(path.read_text(encoding="utf-8"))
        if data["mutation"] == ORIGIN_TAG:
            continue
        rows.append(
            ReportRow(
                benchmark=data["benchmark"],
                model=data["model"],
                mutation=data["mutation"],
                n_cases=data["n_cases"],
                pass1_origin_full=data["pass1_origin_full"],
                pass1_origin_subset=data["pass1_origin_subset"],
                pass1_mutated=data["pass1_mutated"],
            )
        )
    bleu_scores: dict[tuple[str, str], float] = {}
    if args.original:
        for mutated_path in sorted(runs.glob("*.jsonl")):
            if not meta_path(mutated_path).exists():
                continue
            cases, outcomes, tag = _align_mutated(args.original, mutated_path)
            pairs = [
                (case.code, outcome.mutated.text)
                for case, outcome in zip(cases, outcomes)
                if outcome.applied
            ]
            if not pairs:
                continue
            benchmark = cases[0].benchmark if cases else "unknown"
            bleu_scores[(benchmark, tag)] = bleu(
                [p[0] for p in pairs], [p[1] for p in pairs]
            )
    if not rows and not bleu_scores:
        print(f"no evaluation results under {runs}", file=sys.stderr)
        return EXIT_FAILURE
    report = RunReport(rows=rows, bleu_scores=bleu_scores)
    if rows:
        print(delta_table([report], format=args.format))
    if bleu_scores:
        print(bleu_table([report], format=args.format))
    if args.distribution:
        _atomic_write(Path(args.distribution), distribution_export([report]))
        print(f"distribution data -> {args.distribution}")
    return EXIT_OK


def cmd_count(args: argparse.Namespace, config: dict) -> int:
    cases = load(args.dataset, benchmark=args.benchmark)
    ops = _parse_ops(args.ops) if args.ops else list(SINGLE_KINDS)
    total = len(cases)
    print(f"{'mutation':<14}{'applicable':>10}{'total':>8}{'percent':>9}")
    for op in ops:
        count = count_applicable(cases, op)
        pct = 100.0 * count / total if total else 0.0
        print(f"{op:<14}{count:>10}{total:>8}{pct:>8.1f}%")
        if args.ids:
            from .mutate import applicable

            for case in cases:
                if case.parse_error is None and applicable(case.program, op):
                    print(f"    {case.id}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mutabench",
        description="Mutate code benchmarks, verify equivalence, and score models.",
    )
    parser.add_argument("--version", action="version", version=f"mutabench {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    mutate = sub.add_parser("mutate", help="write mutated datasets")
    mutate.add_argument("--dataset", required=True)
    mutate.add_argument("--benchmark", default=None)
    mutate.add_argument("--ops", required=True, help="comma-separated mutation tags")
    mutate.add_argument("--seed", type=int, default=0)
    mutate.add_argument("-o", "--out", default="runs")
    mutate.add_argument("--config", default=None)
    mutate.set_defaults(func=cmd_mutate)

    verify = sub.add_parser("verify", help="check mutants against originals by execution")
    verify.add_argument("--original", required=True)
    verify.add_argument("--mutated", required=True)
    verify.add_argument("--timeout-ms", type=int, default=10_000)
    verify.add_argument("--fuzz", type=int, default=0)
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--config", default=None)
    verify.set_defaults(func=cmd_verify)

    evaluate = sub.add_parser("eval", help="query endpoints and grade answers")
    evaluate.add_argument("--dataset", required=True)
    evaluate.add_argument("--benchmark", default=None)
    evaluate.add_argument("--mutated", action="append", default=[])
    evaluate.add_argument("--endpoint", required=True, help="endpoint spec JSON file")
    evaluate.add_argument("--samples", type=int, default=5)
    evaluate.add_argument("--temperature", type=float, default=0.2)
    evaluate.add_argument("--concurrency", type=int, default=4)
    evaluate.add_argument("--timeout-ms", type=int, default=10_000)
    evaluate.add_argument("--cache", default=None)
    evaluate.add_argument("--run-command", default=None, help="translation run template")
    evaluate.add_argument("-o", "--out", default="runs")
    evaluate.add_argument("--config", default=None)
    evaluate.set_defaults(func=cmd_eval)

    report = sub.add_parser("report", help="render delta and similarity tables")
    report.add_argument("--runs", required=True)
    report.add_argument("--original", default=None, help="originals for similarity scores")
    report.add_argument("--format", choices=("markdown", "csv"), default="markdown")
    report.add_argument("--distribution", default=None, help="write tidy pass@1 CSV here")
    report.add_argument("--config", default=None)
    report.set_defaults(func=cmd_report)

    count = sub.add_parser("count", help="applicability census")
    count.add_argument("--dataset", required=True)
    count.add_argument("--benchmark", default=None)
    count.add_argument("--ops", default=None)
    count.add_argument("--ids", action="store_true", help="list applicable case ids")
    count.add_argument("--config", default=None)
    count.set_defaults(func=cmd_count)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        config = _load_config(getattr(args, "config", None))
        return args.func(args, config)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, OSError, RunnerUnavailable, EvalError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except KeyboardInterrupt:
        print("interrupted; cached work and written files are kept", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
