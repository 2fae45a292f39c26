"""Parsing, rendering, and variable-scope analysis for benchmark programs.

The mutation operators rewrite programs through precise text edits, so
everything here is span-oriented: a span is a half-open ``(start, end)``
pair of character offsets into the original source string.  CPython's
``ast`` reports column offsets as UTF-8 byte positions within a line;
``LineIndex`` converts those into character offsets so callers can slice
the source text directly.

Scope analysis decides which names may be renamed without changing what
the program computes.  The policy is deliberately conservative:

* Only names bound inside function bodies (parameters, local
  assignments, loop / comprehension / with / except targets) are
  candidates.  Module-level and class-level bindings are left alone.
* A candidate is dropped whenever the same spelling appears anywhere as
  an attribute, a keyword argument at a call site, an import alias, or
  a ``global`` / ``nonlocal`` declaration.  Free references that hit a
  builtin drop the name too.
* Programs that touch the dynamic scope machinery (``eval``, ``exec``,
  ``locals``, ``globals``, ``vars``) are not renamed at all, since a
  renamed variable could be observed through a string.
* Names referenced inside f-strings are dropped: before Python 3.12 the
  parser does not give trustworthy positions for expressions embedded
  in string literals, and a rename we cannot place exactly is a rename
  we do not perform.

A binding that survives all of that carries the spans of every one of
its occurrences, which is all a renamer needs.
"""

from __future__ import annotations

import ast
import builtins
from dataclasses import dataclass, field
from functools import cached_property

Span = tuple[int, int]

BUILTIN_NAMES = frozenset(dir(builtins))

# Referencing any of these suggests the program can observe its own
# namespace, so renaming anything would be a gamble.
DYNAMIC_SCOPE_NAMES = frozenset({"eval", "exec", "locals", "globals", "vars"})

PARAMETER = "parameter"
LOCAL_ASSIGNMENT = "local-assignment"
LOOP_TARGET = "loop-target"
COMPREHENSION_TARGET = "comprehension-target"
WITH_TARGET = "with-target"
EXCEPT_TARGET = "except-target"


def parse(text: str) -> ast.Module:
    """Parse source text, raising SyntaxError with line/column on failure."""
    return ast.parse(text)


def render(tree: ast.AST) -> str:
    """Render a tree back to canonically formatted source."""
    return ast.unparse(tree)


def trees_equal(a: ast.AST, b: ast.AST) -> bool:
    """Structural equality, ignoring positions."""
    return ast.dump(a, include_attributes=False) == ast.dump(b, include_attributes=False)


class LineIndex:
    """Maps ast (lineno, utf-8 byte column) positions to character offsets."""

    def __init__(self, text: str):
        self.text = text
        self._lines = text.split("\n")
        starts = [0]
        for line in self._lines[:-1]:
            starts.append(starts[-1] + len(line) + 1)
        self._starts = starts

    def line_start(self, lineno: int) -> int:
        return self._starts[lineno - 1]

    def offset(self, lineno: int, byte_col: int) -> int:
        line = self._lines[lineno - 1]
        if line.isascii():
            col = byte_col
        else:
            col = len(line.encode("utf-8")[:byte_col].decode("utf-8"))
        return self._starts[lineno - 1] + col

    def node_span(self, node: ast.AST) -> Span:
        return (
            self.offset(node.lineno, node.col_offset),
            self.offset(node.end_lineno, node.end_col_offset),
        )


@dataclass
class SourceUnit:
    """A program under test: source text plus where it came from."""

    text: str
    origin: str = "<memory>"

    @cached_property
    def tree(self) -> ast.Module:
        return parse(self.text)

    @cached_property
    def line_index(self) -> LineIndex:
        return LineIndex(self.text)


def collect_identifiers(tree: ast.AST) -> set[str]:
    """Every identifier spelling that occurs anywhere in the tree.

    Used by the renamers to avoid manufacturing a name that already
    means something in the program.
    """
    names: set[str] = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.Name):
            names.add(node.id)
        elif isinstance(node, ast.arg):
            names.add(node.arg)
        elif isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)):
            names.add(node.name)
        elif isinstance(node, ast.Attribute):
            names.add(node.attr)
        elif isinstance(node, ast.keyword):
            if node.arg:
                names.add(node.arg)
        elif isinstance(node, ast.alias):
            names.add(node.asname or node.name.split(".")[0])
        elif isinstance(node, (ast.Global, ast.Nonlocal)):
            names.update(node.names)
        elif isinstance(node, ast.ExceptHandler):
            if node.name:
                names.add(node.name)
        elif isinstance(node, ast.MatchAs):
            if node.name:
                names.add(node.name)
        elif isinstance(node, ast.MatchStar):
            if node.name:
                names.add(node.name)
        elif isinstance(node, ast.MatchMapping):
            if node.rest:
                names.add(node.rest)
    return names


def entry_function(tree: ast.Module) -> str | None:
    """Name of the function a benchmark case is driven through.

    Benchmarks in the execution-prediction style define a single
    top-level function, conventionally ``f``.  When several are present
    the last one wins, matching the helpers-first layout.
    """
    defs = [n for n in tree.body if isinstance(n, (ast.FunctionDef, ast.AsyncFunctionDef))]
    if not defs:
        return None
    for node in defs:
        if node.name == "f":
            return "f"
    return defs[-1].name


@dataclass
class Binding:
    """One renameable variable: its kind and every occurrence span."""

    name: str
    kind: str
    def_span: Span
    spans: list[Span] = field(default_factory=list)


@dataclass
class ScopeTable:
    """Renameable bindings in first-binding order, plus the rejects."""

    bindings: list[Binding]
    excluded: dict[str, str]

    def renameable_names(self) -> set[str]:
        return {b.name for b in self.bindings}


class _Scope:
    __slots__ = ("kind", "parent", "binds", "globals_", "nonlocals_")

    def __init__(self, kind: str, parent: "_Scope | None"):
        self.kind = kind
        self.parent = parent
        # name -> (first binding span, kind of that first binding)
        self.binds: dict[str, tuple[Span, str]] = {}
        self.globals_: set[str] = set()
        self.nonlocals_: set[str] = set()

    def renameable(self) -> bool:
        if self.kind == "function":
            return True
        if self.kind == "comprehension":
            scope = self.parent
            while scope is not None and scope.kind == "comprehension":
                scope = scope.parent
            return scope is not None and scope.kind == "function"
        return False


class _Occurrence:
    __slots__ = ("scope", "name", "span", "is_store", "in_fstring")

    def __init__(self, scope: _Scope, name: str, span: Span, is_store: bool, in_fstring: bool):
        self.scope = scope
        self.name = name
        self.span = span
        self.is_store = is_store
        self.in_fstring = in_fstring


class _ScopeWalker:
    """Collects scopes, bindings, occurrences, and exclusion facts."""

    def __init__(self, unit: SourceUnit):
        self.unit = unit
        self.index = unit.line_index
        self.module = _Scope("module", None)
        self.scope = self.module
        self.scopes = [self.module]
        self.occurrences: list[_Occurrence] = []
        self.excluded: dict[str, str] = {}
        self.fstring_depth = 0
        self.dynamic_scope_use = False

    # -- plumbing ---------------------------------------------------------

    def exclude(self, name: str, reason: str) -> None:
        self.excluded.setdefault(name, reason)

    def record_bind(self, scope: _Scope, name: str, span: Span, kind: str) -> None:
        prev = scope.binds.get(name)
        if prev is None or span < prev[0]:
            scope.binds[name] = (span, kind)

    def record_name(self, node: ast.Name, is_store: bool) -> None:
        span = self.index.node_span(node)
        self.occurrences.append(
            _Occurrence(self.scope, node.id, span, is_store, self.fstring_depth > 0)
        )
        if not is_store and node.id in DYNAMIC_SCOPE_NAMES:
            self.dynamic_scope_use = True

    def push(self, kind: str) -> _Scope:
        self.scope = _Scope(kind, self.scope)
        self.scopes.append(self.scope)
        return self.scope

    def pop(self) -> None:
        assert self.scope.parent is not None
        self.scope = self.scope.parent

    def binding_scope(self) -> _Scope:
        """Where an ordinary assignment in the current scope lands."""
        return self.scope

    def walrus_scope(self) -> _Scope:
        scope = self.scope
        while scope.kind == "comprehension":
            assert scope.parent is not None
            scope = scope.parent
        return scope

    # -- dispatch ---------------------------------------------------------

    def visit(self, node: ast.AST) -> None:
        method = getattr(self, "visit_" + type(node).__name__, None)
        if method is not None:
            method(node)
        else:
            self.generic_visit(node)

    def generic_visit(self, node: ast.AST) -> None:
        for child in ast.iter_child_nodes(node):
            self.visit(child)

    # -- targets ----------------------------------------------------------

    def visit_target(self, node: ast.AST, kind: str, scope: _Scope | None = None) -> None:
        """Walk an assignment target, binding the plain names it contains."""
        if isinstance(node, ast.Name):
            span = self.index.node_span(node)
            self.record_bind(scope or self.scope, node.id, span, kind)
            self.record_name(node, is_store=True)
        elif isinstance(node, (ast.Tuple, ast.List)):
            for elt in node.elts:
                self.visit_target(elt, kind, scope)
        elif isinstance(node, ast.Starred):
            self.visit_target(node.value, kind, scope)
        else:
            # Attribute / Subscript targets bind nothing new.
            self.visit(node)

    # -- statements -------------------------------------------------------

    def visit_FunctionDef(self, node: ast.FunctionDef) -> None:
        self._function(node)

    def visit_AsyncFunctionDef(self, node: ast.AsyncFunctionDef) -> None:
        self._function(node)

    def _function(self, node) -> None:
        self.exclude(node.name, "function-name")
        for dec in node.decorator_list:
            self.visit(dec)
        args = node.args
        for default in args.defaults + [d for d in args.kw_defaults if d is not None]:
            self.visit(default)
        for a in self._all_args(args):
            if a.annotation is not None:
                self.visit(a.annotation)
        if node.returns is not None:
            self.visit(node.returns)

        self.push("function")
        for a in self._all_args(args):
            start = self.index.offset(a.lineno, a.col_offset)
            span = (start, start + len(a.arg))
            self.record_bind(self.scope, a.arg, span, PARAMETER)
            self.occurrences.append(
                _Occurrence(self.scope, a.arg, span, True, self.fstring_depth > 0)
            )
        for stmt in node.body:
            self.visit(stmt)
        self.pop()

    @staticmethod
    def _all_args(args: ast.arguments) -> list[ast.arg]:
        out = list(args.posonlyargs) + list(args.args) + list(args.kwonlyargs)
        if args.vararg:
            out.append(args.vararg)
        if args.kwarg:
            out.append(args.kwarg)
        return out

    def visit_Lambda(self, node: ast.Lambda) -> None:
        for default in node.args.defaults + [d for d in node.args.kw_defaults if d is not None]:
            self.visit(default)
        self.push("function")
        for a in self._all_args(node.args):
            start = self.index.offset(a.lineno, a.col_offset)
            span = (start, start + len(a.arg))
            self.record_bind(self.scope, a.arg, span, PARAMETER)
            self.occurrences.append(
                _Occurrence(self.scope, a.arg, span, True, self.fstring_depth > 0)
            )
        self.visit(node.body)
        self.pop()

    def visit_ClassDef(self, node: ast.ClassDef) -> None:
        self.exclude(node.name, "class-name")
        for dec in node.decorator_list:
            self.visit(dec)
        for base in node.bases:
            self.visit(base)
        for kw in node.keywords:
            if kw.arg:
                self.exclude(kw.arg, "keyword-argument-use")
            self.visit(kw.value)
        self.push("class")
        for stmt in node.body:
            self.visit(stmt)
        self.pop()

    def visit_Assign(self, node: ast.Assign) -> None:
        self.visit(node.value)
        for target in node.targets:
            self.visit_target(target, LOCAL_ASSIGNMENT)

    def visit_AugAssign(self, node: ast.AugAssign) -> None:
        self.visit(node.value)
        self.visit_target(node.target, LOCAL_ASSIGNMENT)

    def visit_AnnAssign(self, node: ast.AnnAssign) -> None:
        self.visit(node.annotation)
        if node.value is not None:
            self.visit(node.value)
        self.visit_target(node.target, LOCAL_ASSIGNMENT)

    def visit_NamedExpr(self, node: ast.NamedExpr) -> None:
        self.visit(node.value)
        self.visit_target(node.target, LOCAL_ASSIGNMENT, scope=self.walrus_scope())

    def visit_For(self, node: ast.For) -> None:
        self.visit(node.iter)
        self.visit_target(node.target, LOOP_TARGET)
        for stmt in node.body + node.orelse:
            self.visit(stmt)

    visit_AsyncFor = visit_For

    def visit_With(self, node: ast.With) -> None:
        for item in node.items:
            self.visit(item.context_expr)
            if item.optional_vars is not None:
                self.visit_target(item.optional_vars, WITH_TARGET)
        for stmt in node.body:
            self.visit(stmt)

    visit_AsyncWith = visit_With

    def visit_ExceptHandler(self, node: ast.ExceptHandler) -> None:
        if node.type is not None:
            self.visit(node.type)
        if node.name:
            span = self._except_name_span(node)
            if span is not None:
                self.record_bind(self.scope, node.name, span, EXCEPT_TARGET)
                self.occurrences.append(
                    _Occurrence(self.scope, node.name, span, True, False)
                )
            else:
                self.exclude(node.name, "except-target")
        for stmt in node.body:
            self.visit(stmt)

    def _except_name_span(self, node: ast.ExceptHandler) -> Span | None:
        """Locate the bound name in ``except T as name:`` textually.

        The handler's name is a bare string on the node, so the span has
        to be recovered from the source: skip forward from the end of
        the type expression over whitespace and the ``as`` keyword.
        """
        assert node.type is not None
        text = self.unit.text
        pos = self.index.node_span(node.type)[1]
        while pos < len(text) and text[pos] in " \t\\\n":
            pos += 1
        if text[pos : pos + 2] != "as":
            return None
        pos += 2
        while pos < len(text) and text[pos] in " \t\\\n":
            pos += 1
        if text[pos : pos + len(node.name)] != node.name:
            return None
        return (pos, pos + len(node.name))

    def visit_Import(self, node: ast.Import) -> None:
        for alias in node.names:
            self.exclude(alias.asname or alias.name.split(".")[0], "import")

    def visit_ImportFrom(self, node: ast.ImportFrom) -> None:
        for alias in node.names:
            if alias.name == "*":
                continue
            self.exclude(alias.asname or alias.name, "import")

    def visit_Global(self, node: ast.Global) -> None:
        self.scope.globals_.update(node.names)
        for name in node.names:
            self.exclude(name, "global/nonlocal-declared")

    def visit_Nonlocal(self, node: ast.Nonlocal) -> None:
        self.scope.nonlocals_.update(node.names)
        for name in node.names:
            self.exclude(name, "global/nonlocal-declared")

    def visit_Match(self, node: ast.Match) -> None:
        self.visit(node.subject)
        for case in node.cases:
            for sub in ast.walk(case.pattern):
                name = None
                if isinstance(sub, (ast.MatchAs, ast.MatchStar)):
                    name = sub.name
                elif isinstance(sub, ast.MatchMapping):
                    name = sub.rest
                if name:
                    self.exclude(name, "match-pattern")
            if case.guard is not None:
                self.visit(case.guard)
            for stmt in case.body:
                self.visit(stmt)

    # -- expressions ------------------------------------------------------

    def visit_Name(self, node: ast.Name) -> None:
        self.record_name(node, is_store=isinstance(node.ctx, ast.Store))

    def visit_Attribute(self, node: ast.Attribute) -> None:
        self.exclude(node.attr, "attribute")
        self.visit(node.value)

    def visit_Call(self, node: ast.Call) -> None:
        self.visit(node.func)
        for arg in node.args:
            self.visit(arg)
        for kw in node.keywords:
            if kw.arg:
                self.exclude(kw.arg, "keyword-argument-use")
            self.visit(kw.value)

    def visit_JoinedStr(self, node: ast.JoinedStr) -> None:
        self.fstring_depth += 1
        self.generic_visit(node)
        self.fstring_depth -= 1

    def _comprehension(self, node, result_exprs: list[ast.expr]) -> None:
        gens = node.generators
        self.visit(gens[0].iter)
        self.push("comprehension")
        self.visit_target(gens[0].target, COMPREHENSION_TARGET)
        for cond in gens[0].ifs:
            self.visit(cond)
        for gen in gens[1:]:
            self.visit(gen.iter)
            self.visit_target(gen.target, COMPREHENSION_TARGET)
            for cond in gen.ifs:
                self.visit(cond)
        for expr in result_exprs:
            self.visit(expr)
        self.pop()

    def visit_ListComp(self, node: ast.ListComp) -> None:
        self._comprehension(node, [node.elt])

    def visit_SetComp(self, node: ast.SetComp) -> None:
        self._comprehension(node, [node.elt])

    def visit_GeneratorExp(self, node: ast.GeneratorExp) -> None:
        self._comprehension(node, [node.elt])

    def visit_DictComp(self, node: ast.DictComp) -> None:
        self._comprehension(node, [node.key, node.value])


def _resolve(occ: _Occurrence) -> _Scope | None:
    """The scope whose binding this occurrence refers to, if any."""
    scope = occ.scope
    first = True
    while scope is not None:
        if occ.name in scope.globals_:
            return None
        if occ.name in scope.nonlocals_:
            scope = scope.parent
            first = False
            continue
        if occ.name in scope.binds and (scope.kind != "class" or first):
            return scope
        scope = scope.parent
        first = False
    return None


def analyze_scopes(unit: SourceUnit) -> ScopeTable:
    """Compute the renameable bindings of a program.

    Returns bindings ordered by the position of their first binding
    occurrence, each carrying every occurrence span that resolves to it.
    """
    walker = _ScopeWalker(unit)
    walker.visit(unit.tree)
    excluded = dict(walker.excluded)

    # Group candidate bindings by (scope, name).
    candidates: dict[tuple[int, str], Binding] = {}
    scope_ids: dict[int, _Scope] = {}

    def key(scope: _Scope, name: str) -> tuple[int, str]:
        scope_ids[id(scope)] = scope
        return (id(scope), name)

    fstring_names: set[str] = set()
    free_names: set[str] = set()
    for occ in walker.occurrences:
        owner = _resolve(occ)
        if occ.in_fstring:
            fstring_names.add(occ.name)
        if owner is None:
            free_names.add(occ.name)

    for name in free_names:
        if name in BUILTIN_NAMES:
            excluded.setdefault(name, "builtin")
    for name in fstring_names:
        excluded.setdefault(name, "f-string")

    if walker.dynamic_scope_use:
        bound_names: set[str] = set()
        for scope in walker.scopes:
            if scope.renameable():
                bound_names.update(scope.binds)
        for name in sorted(bound_names):
            excluded.setdefault(name, "dynamic-scope-use")
        return ScopeTable(bindings=[], excluded=excluded)

    for occ in walker.occurrences:
        owner = _resolve(occ)
        if owner is None or not owner.renameable():
            continue
        if occ.name in excluded:
            continue
        def_span, kind = owner.binds[occ.name]
        binding = candidates.get(key(owner, occ.name))
        if binding is None:
            binding = Binding(occ.name, kind, def_span)
            candidates[key(owner, occ.name)] = binding
        if occ.span not in binding.spans:
            binding.spans.append(occ.span)

    bindings = sorted(candidates.values(), key=lambda b: b.def_span)
    for b in bindings:
        b.spans.sort()
    return ScopeTable(bindings=bindings, excluded=excluded)
