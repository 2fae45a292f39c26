import ast

import pytest

from mutabench.syntax import (
    SourceUnit,
    analyze_scopes,
    collect_identifiers,
    entry_function,
    parse,
    render,
    trees_equal,
)


def table(src):
    return analyze_scopes(SourceUnit(src))


def names(tbl):
    return [b.name for b in tbl.bindings]


class TestParseRender:
    def test_simple_statement_round_trips(self):
        assert render(parse("x = 1")) == "x = 1"

    def test_render_is_canonical_fixpoint(self):
        src = "def f(a):\n  if a:\n\n    return a+1\n  return 0  # tail\n"
        once = render(parse(src))
        assert render(parse(once)) == once

    def test_round_trip_preserves_structure(self):
        src = (
            "def f(xs):\n"
            "    total = 0\n"
            "    for x in xs:\n"
            "        if x % 2 == 1:\n"
            "            total += x\n"
            "    return total\n"
        )
        assert trees_equal(parse(src), parse(render(parse(src))))

    def test_syntax_error_carries_position(self):
        with pytest.raises(SyntaxError) as err:
            parse("def f(:\n    pass\n")
        assert err.value.lineno == 1

    def test_argument_literal_parses_to_nested_lists(self):
        tree = parse("f([[395, 666, 7, 4], [], [4223, 111]])")
        call = tree.body[0].value
        assert isinstance(call, ast.Call)
        assert ast.literal_eval(call.args[0]) == [[395, 666, 7, 4], [], [4223, 111]]


class TestScopeExamples:
    def test_param_and_local_are_renameable(self):
        src = "def f(lists):\n    length = len(lists)\n    return lists[:length]\n"
        tbl = table(src)
        assert names(tbl) == ["lists", "length"]
        assert tbl.excluded["f"] == "function-name"
        assert tbl.excluded["len"] == "builtin"

    def test_builtin_reference_excluded(self):
        tbl = table("def f(x):\n    print(x)\n")
        assert names(tbl) == ["x"]
        assert tbl.excluded["print"] == "builtin"

    def test_global_declaration_excludes_name(self):
        tbl = table("def f():\n    global g\n    g = 1\n")
        assert names(tbl) == []
        assert tbl.excluded["g"] == "global/nonlocal-declared"

    def test_nonlocal_declaration_excludes_name(self):
        src = (
            "def f():\n"
            "    n = 0\n"
            "    def g():\n"
            "        nonlocal n\n"
            "        n += 1\n"
            "    g()\n"
            "    return n\n"
        )
        tbl = table(src)
        assert "n" not in names(tbl)
        assert tbl.excluded["n"] == "global/nonlocal-declared"


class TestSpans:
    def test_spans_slice_to_the_name(self):
        src = "def f(lists):\n    length = len(lists)\n    return lists[:length]\n"
        tbl = table(src)
        for binding in tbl.bindings:
            for start, end in binding.spans:
                assert src[start:end] == binding.name

    def test_every_occurrence_is_collected(self):
        src = "def f(count):\n    count = count + count\n    return count\n"
        (binding,) = table(src).bindings
        assert len(binding.spans) == 5

    def test_non_ascii_lines_offset_correctly(self):
        src = "def f(s):\n    t = '\u00e9\u00e9' + s\n    return t\n"
        tbl = table(src)
        for binding in tbl.bindings:
            for start, end in binding.spans:
                assert src[start:end] == binding.name

    def test_spans_are_ordered_and_disjoint(self):
        src = "def f(a, b):\n    c = a + b\n    return c * a\n"
        tbl = table(src)
        spans = sorted(s for b in tbl.bindings for s in b.spans)
        for (s1, e1), (s2, e2) in zip(spans, spans[1:]):
            assert e1 <= s2


class TestScopePolicy:
    def test_module_level_names_are_not_renameable(self):
        src = "base = 10\ndef f(x):\n    return x + base\n"
        tbl = table(src)
        assert names(tbl) == ["x"]

    def test_shadowing_creates_two_bindings(self):
        src = (
            "def f(x):\n"
            "    def g():\n"
            "        x = 2\n"
            "        return x\n"
            "    return x + g()\n"
        )
        tbl = table(src)
        assert [b.name for b in tbl.bindings if b.name == "x"] != []
        xs = [b for b in tbl.bindings if b.name == "x"]
        assert len(xs) == 2

    def test_closure_reference_joins_outer_binding(self):
        src = (
            "def f(x):\n"
            "    def g():\n"
            "        return x + 1\n"
            "    return g()\n"
        )
        tbl = table(src)
        xs = [b for b in tbl.bindings if b.name == "x"]
        assert len(xs) == 1
        assert len(xs[0].spans) == 2

    def test_loop_and_comprehension_targets(self):
        src = (
            "def f(xs):\n"
            "    out = [y * 2 for y in xs]\n"
            "    for z in out:\n"
            "        out.append(z)\n"
            "    return out\n"
        )
        tbl = table(src)
        kinds = {b.name: b.kind for b in tbl.bindings}
        assert kinds["y"] == "comprehension-target"
        assert kinds["z"] == "loop-target"

    def test_with_and_except_targets(self):
        src = (
            "def f(path):\n"
            "    try:\n"
            "        with open(path) as fh:\n"
            "            return fh.read()\n"
            "    except OSError as err:\n"
            "        return str(err)\n"
        )
        tbl = table(src)
        kinds = {b.name: b.kind for b in tbl.bindings}
        assert kinds["fh"] == "with-target"
        assert kinds["err"] == "except-target"
        for b in tbl.bindings:
            for start, end in b.spans:
                assert src[start:end] == b.name

    def test_keyword_argument_name_is_excluded(self):
        src = "def f(xs, key):\n    return sorted(xs, key=len) + [key]\n"
        tbl = table(src)
        assert "key" not in names(tbl)
        assert tbl.excluded["key"] == "keyword-argument-use"
        assert "xs" in names(tbl)

    def test_attribute_name_is_excluded(self):
        src = "def f(obj):\n    count = 1\n    return obj.count + count\n"
        tbl = table(src)
        assert "count" not in names(tbl)
        assert tbl.excluded["count"] == "attribute"

    def test_import_alias_is_excluded(self):
        src = "import math\ndef f(x):\n    return math.sqrt(x)\n"
        tbl = table(src)
        assert tbl.excluded["math"] == "import"
        assert names(tbl) == ["x"]

    def test_fstring_use_is_excluded(self):
        src = "def f(name):\n    other = 2\n    return f'{name}!' * other\n"
        tbl = table(src)
        assert "name" not in names(tbl)
        assert tbl.excluded["name"] == "f-string"
        assert "other" in names(tbl)

    def test_dynamic_scope_use_disables_renaming(self):
        src = "def f(x):\n    y = 1\n    return eval('x + y')\n"
        tbl = table(src)
        assert names(tbl) == []
        assert tbl.excluded["x"] == "dynamic-scope-use"

    def test_lambda_parameters_are_renameable(self):
        src = "def f(xs):\n    pick = lambda item: item + 1\n    return [pick(x) for x in xs]\n"
        tbl = table(src)
        assert "item" in names(tbl)

    def test_walrus_binds_in_function_scope(self):
        src = "def f(xs):\n    if (total := sum(xs)) > 10:\n        return total\n    return 0\n"
        tbl = table(src)
        kinds = {b.name: b.kind for b in tbl.bindings}
        assert kinds["total"] == "local-assignment"

    def test_method_locals_are_renameable_class_name_is_not(self):
        src = (
            "class Box:\n"
            "    def get(self, idx):\n"
            "        value = self.items[idx]\n"
            "        return value\n"
        )
        tbl = table(src)
        assert set(names(tbl)) == {"self", "idx", "value"}
        assert tbl.excluded["Box"] == "class-name"

    def test_bindings_ordered_by_first_occurrence(self):
        src = (
            "def f(beta, alpha):\n"
            "    mid = beta - alpha\n"
            "    last = mid * 2\n"
            "    return last\n"
        )
        tbl = table(src)
        assert names(tbl) == ["beta", "alpha", "mid", "last"]

    def test_bindings_never_intersect_excluded(self):
        src = (
            "import os\n"
            "def f(path, key):\n"
            "    data = os.stat(path)\n"
            "    return sorted([data], key=str) + [key]\n"
        )
        tbl = table(src)
        assert set(names(tbl)) & set(tbl.excluded) == set()


class TestHelpers:
    def test_collect_identifiers_sees_all_spellings(self):
        src = "import json\ndef f(x):\n    return json.dumps(x, indent=2).strip()\n"
        ids = collect_identifiers(parse(src))
        assert {"json", "f", "x", "dumps", "indent", "strip"} <= ids

    def test_entry_function_prefers_f(self):
        src = "def helper(x):\n    return x\ndef f(y):\n    return helper(y)\n"
        assert entry_function(parse(src)) == "f"

    def test_entry_function_falls_back_to_last_def(self):
        src = "def helper(x):\n    return x\ndef main(y):\n    return helper(y)\n"
        assert entry_function(parse(src)) == "main"

    def test_entry_function_none_for_flat_script(self):
        assert entry_function(parse("print(1 + 2)\n")) is None
