"""Semantic-preserving mutation operators for benchmark programs.

Each operator takes a program and produces a behaviorally identical
variant with different surface syntax, reported as a list of precise
text edits against the original source.  Working at the text level (with
spans supplied by the scope analyzer and the parser) keeps untouched
code byte-identical, so an edit log can be replayed to reproduce the
mutant exactly.

Operators:

* ``var_norm_sequential`` -- rename every safely renameable variable to
  ``var1``, ``var2``, ... in order of first binding.
* ``var_norm_random`` -- rename each such variable to a fresh random
  lowercase name of fixed length, drawn deterministically from the seed.
* ``const_unfold`` -- rewrite non-negative integer literals ``n`` as a
  two-term expression such as ``7 - 2``.
* ``for_to_while`` -- rewrite for-loops into iterator-protocol while
  loops with the same termination behavior.
* ``cond_augment`` -- extend each if/elif condition with a tautology
  (under ``and``) or a contradiction (under ``or``).

``compose`` chains operators left to right, reparsing between stages.
All randomness is drawn from a stream derived from (global seed, case
origin, operator), so results do not depend on processing order.
"""

from __future__ import annotations

import ast
import hashlib
import random
import string
from dataclasses import dataclass, field

from .syntax import (
    BUILTIN_NAMES,
    LineIndex,
    SourceUnit,
    Span,
    analyze_scopes,
    collect_identifiers,
    parse,
)

import keyword

VARNORM1 = "varnorm1"
VARNORM2 = "varnorm2"
CONSTUNFOLD = "constunfold"
FOR2WHILE = "for2while"
CONDAUG = "condaug"

SINGLE_KINDS = (VARNORM1, VARNORM2, CONSTUNFOLD, FOR2WHILE, CONDAUG)

# Multi-mutation recipes, applied left to right.
COMBO_KINDS: dict[str, tuple[str, ...]] = {
    "fuv": (FOR2WHILE, CONSTUNFOLD, VARNORM2),
    "auv": (CONDAUG, CONSTUNFOLD, VARNORM1),
    "afu": (CONDAUG, FOR2WHILE, CONSTUNFOLD),
}

ALL_KINDS = SINGLE_KINDS + tuple(COMBO_KINDS)

DEFAULT_TAUTOLOGY_POOL = (
    "(8 > 6) or (8 < 6)",
    "True or False",
    "(8 > 6) and (8 < 6)",
    "False and True",
)


@dataclass(frozen=True)
class Edit:
    """One text replacement: ``old`` at ``span`` becomes ``new``."""

    span: Span
    old: str
    new: str
    op: str


@dataclass
class MutationConfig:
    seed: int = 0
    random_name_length: int = 8
    unfold_offset_range: tuple[int, int] = (1, 9)
    tautology_pool: tuple[str, ...] = DEFAULT_TAUTOLOGY_POOL
    region_policy: str = "function-bodies-only"

    def __post_init__(self):
        if self.random_name_length < 4:
            raise ValueError("random_name_length must be at least 4")
        lo, hi = self.unfold_offset_range
        if not (1 <= lo <= hi):
            raise ValueError("unfold_offset_range must be a positive interval")
        if not self.tautology_pool:
            raise ValueError("tautology_pool must not be empty")
        self._classified_pool = tuple(
            (entry, _verify_pool_entry(entry)) for entry in self.tautology_pool
        )

    def classified_pool(self) -> tuple[tuple[str, bool], ...]:
        """Pool entries as (expression, is_tautology) pairs."""
        return self._classified_pool


def _verify_pool_entry(entry: str) -> bool:
    """Check a pool entry is a closed boolean expression; return its value."""
    try:
        value = eval(compile(entry, "<tautology-pool>", "eval"), {"__builtins__": {}})
    except Exception as exc:
        raise ValueError(f"invalid tautology pool entry {entry!r}: {exc}") from exc
    if value is not True and value is not False:
        raise ValueError(f"tautology pool entry {entry!r} is not boolean")
    return value


@dataclass
class MutationOutcome:
    mutated: SourceUnit
    applied: bool
    edits: list[Edit] = field(default_factory=list)
    skipped: list[tuple[Span, str]] = field(default_factory=list)


def case_rng(seed: int, origin: str, op: str) -> random.Random:
    """Deterministic per-case random stream, independent of case order."""
    digest = hashlib.sha256(f"{seed}\x1f{origin}\x1f{op}".encode()).digest()
    return random.Random(int.from_bytes(digest[:16], "big"))


def apply_edits(text: str, edits: list[Edit]) -> str:
    """Replay an edit log over the original text.

    Edits from a composed mutation are grouped into stages by operator:
    each stage's spans index the text produced by the previous stage.
    Within a stage spans must be disjoint and match their recorded old
    text, otherwise the log is corrupt and ValueError is raised.
    """
    stages: list[list[Edit]] = []
    for edit in edits:
        if stages and stages[-1][0].op == edit.op:
            stages[-1].append(edit)
        else:
            stages.append([edit])
    for stage in stages:
        ordered = sorted(stage, key=lambda e: e.span)
        pieces = []
        pos = 0
        for edit in ordered:
            start, end = edit.span
            if start < pos:
                raise ValueError("overlapping edits in one stage")
            if text[start:end] != edit.old:
                raise ValueError(
                    f"edit mismatch at {edit.span}: expected {edit.old!r}, found {text[start:end]!r}"
                )
            pieces.append(text[pos:start])
            pieces.append(edit.new)
            pos = end
        pieces.append(text[pos:])
        text = "".join(pieces)
    return text


def _finish(unit: SourceUnit, edits: list[Edit], skipped, op: str) -> MutationOutcome:
    """Apply edits, sanity-check the result still parses, build the outcome."""
    if not edits:
        return MutationOutcome(SourceUnit(unit.text, unit.origin), False, [], skipped)
    new_text = apply_edits(unit.text, edits)
    try:
        parse(new_text)
    except SyntaxError as exc:
        raise RuntimeError(
            f"{op} produced unparseable output for {unit.origin}: {exc}"
        ) from exc
    return MutationOutcome(SourceUnit(new_text, unit.origin), True, edits, skipped)


# --------------------------------------------------------------------------
# Region bookkeeping


def _subtree_ids(roots) -> set[int]:
    out: set[int] = set()
    for root in roots:
        out.update(id(n) for n in ast.walk(root))
    return out


def _driver_ids(tree: ast.Module) -> set[int]:
    """Module-level assert statements are the test driver, never mutated."""
    return _subtree_ids(n for n in tree.body if isinstance(n, ast.Assert))


def _fstring_ids(tree: ast.Module) -> set[int]:
    roots = [n for n in ast.walk(tree) if isinstance(n, ast.JoinedStr)]
    ids = _subtree_ids(roots)
    for root in roots:
        ids.discard(id(root))
    return ids


def _pattern_ids(tree: ast.Module) -> set[int]:
    roots = []
    for node in ast.walk(tree):
        if isinstance(node, ast.Match):
            roots.extend(case.pattern for case in node.cases)
    return _subtree_ids(roots)


def _parent_map(tree: ast.Module) -> dict[int, ast.AST]:
    return {
        id(child): parent
        for parent in ast.walk(tree)
        for child in ast.iter_child_nodes(parent)
    }


# --------------------------------------------------------------------------
# Variable renaming


def _rename_outcome(unit: SourceUnit, mapping, op: str) -> MutationOutcome:
    edits = []
    for binding, new_name in mapping:
        if new_name == binding.name:
            continue
        for span in binding.spans:
            edits.append(Edit(span, binding.name, new_name, op))
    edits.sort(key=lambda e: e.span)
    return _finish(unit, edits, [], op)


def var_norm_sequential(unit: SourceUnit) -> MutationOutcome:
    """Rename renameable variables to var1, var2, ... in first-binding order.

    Indices whose spelling already occurs in the program outside the
    renameable set are skipped, so an existing ``var1`` that we may not
    touch never gets captured.  Applying the operator twice gives the
    same text as applying it once.
    """
    tbl = analyze_scopes(unit)
    taken = collect_identifiers(unit.tree) - tbl.renameable_names()
    mapping = []
    i = 1
    for binding in tbl.bindings:
        while f"var{i}" in taken:
            i += 1
        mapping.append((binding, f"var{i}"))
        i += 1
    return _rename_outcome(unit, mapping, VARNORM1)


def var_norm_random(unit: SourceUnit, config: MutationConfig) -> MutationOutcome:
    """Rename renameable variables to fresh fixed-length lowercase names."""
    tbl = analyze_scopes(unit)
    rng = case_rng(config.seed, unit.origin, VARNORM2)
    forbidden = (
        collect_identifiers(unit.tree) | set(keyword.kwlist) | set(BUILTIN_NAMES)
    )
    used: set[str] = set()
    mapping = []
    for binding in tbl.bindings:
        while True:
            name = "".join(
                rng.choice(string.ascii_lowercase)
                for _ in range(config.random_name_length)
            )
            if name not in forbidden and name not in used:
                break
        used.add(name)
        mapping.append((binding, name))
    return _rename_outcome(unit, mapping, VARNORM2)


# --------------------------------------------------------------------------
# Constant unfolding

# Parent/field pairs where a two-term arithmetic expression needs no
# parentheses to mean the same thing.
def _literal_needs_parens(node: ast.Constant, parent: ast.AST) -> bool:
    if isinstance(parent, (ast.Assign, ast.AugAssign, ast.AnnAssign)) and parent.value is node:
        return False
    if isinstance(parent, ast.Expr):
        return False
    if isinstance(parent, ast.Return) and parent.value is node:
        return False
    if isinstance(parent, ast.keyword):
        return False
    if isinstance(parent, ast.Call) and node in parent.args:
        return False
    if isinstance(parent, (ast.List, ast.Tuple, ast.Set)) and node in parent.elts:
        return False
    if isinstance(parent, ast.Dict):
        return False
    if isinstance(parent, ast.Subscript) and parent.slice is node:
        return False
    if isinstance(parent, ast.arguments):
        return False
    return True


def const_unfold(unit: SourceUnit, config: MutationConfig) -> MutationOutcome:
    """Rewrite each non-negative integer literal n as ``a - b`` or ``a + b``.

    The offset is drawn per literal from the configured interval; both
    terms stay non-negative.  Literals in match patterns, f-strings, and
    the test-driver region are skipped.  A negative number in source is
    a unary minus over a positive literal, so only the positive part is
    unfolded, inside parentheses.
    """
    tree = unit.tree
    index = unit.line_index
    rng = case_rng(config.seed, unit.origin, CONSTUNFOLD)
    driver = _driver_ids(tree)
    fstrings = _fstring_ids(tree)
    patterns = _pattern_ids(tree)
    parents = _parent_map(tree)

    targets = []
    skipped: list[tuple[Span, str]] = []
    for node in ast.walk(tree):
        if not isinstance(node, ast.Constant):
            continue
        if type(node.value) is not int or node.value < 0:
            continue
        span = index.node_span(node)
        if id(node) in driver:
            skipped.append((span, "driver-region"))
        elif id(node) in fstrings:
            skipped.append((span, "f-string"))
        elif id(node) in patterns:
            skipped.append((span, "match-pattern"))
        else:
            targets.append((span, node))
    targets.sort(key=lambda t: t[0])

    lo, hi = config.unfold_offset_range
    edits = []
    for span, node in targets:
        n = node.value
        k = rng.randint(lo, hi)
        add_form = rng.random() < 0.5 and n >= k
        if add_form:
            expr = f"{n - k} + {k}"
            assert (n - k) + k == n
        else:
            expr = f"{n + k} - {k}"
            assert (n + k) - k == n
        if _literal_needs_parens(node, parents[id(node)]):
            expr = f"({expr})"
        edits.append(Edit(span, unit.text[span[0] : span[1]], expr, CONSTUNFOLD))
    return _finish(unit, edits, skipped, CONSTUNFOLD)


# --------------------------------------------------------------------------
# For-loop to while-loop


def _scan_header_colon(text: str, pos: int) -> int:
    """Find the colon closing a for-loop header, starting after the iterable."""
    while pos < len(text):
        ch = text[pos]
        if ch == ":":
            return pos
        if ch == "#":
            nl = text.find("\n", pos)
            if nl == -1:
                return -1
            pos = nl
        elif ch in " \t\r\n\\),":
            pos += 1
        else:
            return -1
    return -1


def _line_is_blank_after(text: str, pos: int) -> bool:
    """True if the rest of the line from pos holds only whitespace/comment."""
    end = text.find("\n", pos)
    rest = text[pos:] if end == -1 else text[pos:end]
    rest = rest.split("#", 1)[0]
    return rest.strip() == ""


def _deeper(prefix: str) -> str:
    return prefix + ("\t" if prefix.endswith("\t") else "    ")


def for_to_while(unit: SourceUnit) -> MutationOutcome:
    """Rewrite for-loops through the iterator protocol.

    Each loop gains a fresh iterator variable bound just before a
    ``while True:``; the loop advances at the top with the iterator
    itself as exhaustion sentinel, breaks on it, then assigns the
    original target and runs the body unchanged.  Loops with an else
    clause are left alone since break/else interplay would change, as
    are async loops and one-line bodies.
    """
    tree = unit.tree
    text = unit.text
    index = unit.line_index
    driver = _driver_ids(tree)

    loops = []
    skipped: list[tuple[Span, str]] = []
    for node in ast.walk(tree):
        if isinstance(node, ast.AsyncFor):
            skipped.append((index.node_span(node), "async-for"))
        elif isinstance(node, ast.For) and id(node) not in driver:
            loops.append(node)
    loops.sort(key=lambda n: (n.lineno, n.col_offset))

    identifiers = collect_identifiers(tree)
    counter = 0

    def fresh_pair() -> tuple[str, str]:
        nonlocal counter
        while True:
            counter += 1
            it, nx = f"_mb_it{counter}", f"_mb_nx{counter}"
            if it not in identifiers and nx not in identifiers:
                return it, nx

    edits = []
    for node in loops:
        start = index.offset(node.lineno, node.col_offset)
        span_all = index.node_span(node)
        if node.orelse:
            skipped.append((span_all, "for-else"))
            continue
        iter_span = index.node_span(node.iter)
        colon = _scan_header_colon(text, iter_span[1])
        if colon == -1:
            skipped.append((span_all, "irregular-layout"))
            continue
        if not _line_is_blank_after(text, colon + 1):
            skipped.append((span_all, "single-line-body"))
            continue
        indent = text[index.line_start(node.lineno) : start]
        body_first = node.body[0]
        body_prefix = text[
            index.line_start(body_first.lineno) : index.offset(
                body_first.lineno, body_first.col_offset
            )
        ]
        if indent.strip() or body_prefix.strip():
            skipped.append((span_all, "irregular-layout"))
            continue
        target_src = text[slice(*index.node_span(node.target))]
        iter_src = text[iter_span[0] : iter_span[1]]
        it, nx = fresh_pair()
        replacement = (
            f"{it} = iter({iter_src})\n"
            f"{indent}while True:\n"
            f"{body_prefix}{nx} = next({it}, {it})\n"
            f"{body_prefix}if {nx} is {it}:\n"
            f"{_deeper(body_prefix)}break\n"
            f"{body_prefix}{target_src} = {nx}"
        )
        edits.append(Edit((start, colon + 1), text[start : colon + 1], replacement, FOR2WHILE))
    edits.sort(key=lambda e: e.span)
    return _finish(unit, edits, skipped, FOR2WHILE)


# --------------------------------------------------------------------------
# Condition augmentation


def _test_needs_parens(test: ast.expr, and_form: bool) -> bool:
    if isinstance(test, (ast.IfExp, ast.Lambda, ast.NamedExpr)):
        return True
    if and_form and isinstance(test, ast.BoolOp) and isinstance(test.op, ast.Or):
        return True
    return False


def cond_augment(unit: SourceUnit, config: MutationConfig) -> MutationOutcome:
    """Extend each if/elif test with a truth-preserving clause.

    A tautology entry T from the pool turns C into ``C and (T)``; a
    contradiction F turns it into ``C or (F)``.  The original test is
    parenthesized only when operator precedence would otherwise change
    its meaning.  While-loop guards and conditional expressions are not
    touched.
    """
    tree = unit.tree
    index = unit.line_index
    rng = case_rng(config.seed, unit.origin, CONDAUG)
    driver = _driver_ids(tree)
    pool = config.classified_pool()

    tests = [
        node.test
        for node in ast.walk(tree)
        if isinstance(node, ast.If) and id(node) not in driver
    ]
    tests.sort(key=lambda n: (n.lineno, n.col_offset))

    edits = []
    for test in tests:
        entry, is_tautology = pool[rng.randrange(len(pool))]
        span = index.node_span(test)
        src = unit.text[span[0] : span[1]]
        left = f"({src})" if _test_needs_parens(test, is_tautology) else src
        joiner = "and" if is_tautology else "or"
        edits.append(Edit(span, src, f"{left} {joiner} ({entry})", CONDAUG))
    return _finish(unit, edits, [], CONDAUG)


# --------------------------------------------------------------------------
# Dispatch and composition


def _apply_single(unit: SourceUnit, kind: str, config: MutationConfig) -> MutationOutcome:
    if kind == VARNORM1:
        return var_norm_sequential(unit)
    if kind == VARNORM2:
        return var_norm_random(unit, config)
    if kind == CONSTUNFOLD:
        return const_unfold(unit, config)
    if kind == FOR2WHILE:
        return for_to_while(unit)
    if kind == CONDAUG:
        return cond_augment(unit, config)
    raise ValueError(f"unknown mutation kind: {kind}")


def compose(unit: SourceUnit, kinds, config: MutationConfig) -> MutationOutcome:
    """Apply several operators left to right, each consuming the last output."""
    current = unit
    edits: list[Edit] = []
    skipped: list[tuple[Span, str]] = []
    applied = False
    for kind in kinds:
        out = _apply_single(current, kind, config)
        edits.extend(out.edits)
        skipped.extend(out.skipped)
        applied = applied or out.applied
        current = out.mutated
    return MutationOutcome(current, applied, edits, skipped)


def mutate(unit: SourceUnit, kind: str, config: MutationConfig) -> MutationOutcome:
    """Run a single operator or a named combination."""
    if kind in COMBO_KINDS:
        return compose(unit, COMBO_KINDS[kind], config)
    return _apply_single(unit, kind, config)


_PROBE_CONFIG: MutationConfig | None = None


def applicable(unit: SourceUnit, kind: str) -> bool:
    """Would this mutation change the program at all?"""
    global _PROBE_CONFIG
    if _PROBE_CONFIG is None:
        _PROBE_CONFIG = MutationConfig()
    try:
        unit.tree
    except SyntaxError:
        return False
    return mutate(unit, kind, _PROBE_CONFIG).applied
