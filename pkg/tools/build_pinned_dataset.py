#!/usr/bin/env python3
"""Generate the pinned benchmark corpus under data/.

The corpus is a fixed set of 100 small output-prediction programs in
the style of the function-execution benchmarks the tool targets.  Each
program family is labeled with the mutations that should apply to it,
and the builder asserts those labels against the real operators before
writing anything, so the shipped file's applicability census is correct
by construction.  Expected outputs are computed by executing each
program on its input, never written by hand.

A handful of cases deliberately use ``var1`` as a parameter name; the
sequential renamer leaves those occurrences alone while the random
renamer does not, which keeps the two similarity scores apart the way
benchmarks with machine-written names do.

Run from the repository root:

    python3 tools/build_pinned_dataset.py --out data/cruxeval_pinned.jsonl
"""

from __future__ import annotations

import argparse
import json
import random
from pathlib import Path

from mutabench.mutate import (
    CONDAUG,
    CONSTUNFOLD,
    FOR2WHILE,
    VARNORM1,
    VARNORM2,
    applicable,
)
from mutabench.runner_stub import canonical_repr
from mutabench.syntax import SourceUnit

MASTER_SEED = 20260822

LIST_NAMES = ["nums", "items", "vals", "entries", "seq", "scores", "queue", "batch"]
ELEM_NAMES = ["n", "item", "val", "entry", "num", "cell", "piece"]
ACC_NAMES = ["total", "acc", "result", "tally", "answer"]
STR_LIST_NAMES = ["words", "parts", "names", "lines", "tokens", "labels"]
STR_ELEM_NAMES = ["word", "part", "name", "line", "token", "label"]
OUT_NAMES = ["out", "kept", "picked", "found", "chosen", "bucket"]
TEXT_NAMES = ["text", "message", "phrase", "raw", "blob"]

PHRASES = [
    "lift the stone and find the crab",
    "a quiet river bends around the hill",
    "every lantern on the pier went dark",
    "the last train left before midnight",
    "copper kettles sing on a slow fire",
    "maps of the old city fade at the edges",
    "seven crows walked the frozen field",
    "the archive smells of dust and rain",
]


def sample_ints(rng, count, low=1, high=30):
    return [rng.randint(low, high) for _ in range(count)]


def sample_words(rng, count):
    pool = [
        "apple", "ant", "arrow", "bear", "Bolt", "cedar", "drum", "echo",
        "fern", "gate", "amber", "stone", "Atlas", "mint", "pearl", "acorn",
    ]
    return rng.sample(pool, count)


def phrase(rng):
    return rng.choice(PHRASES)


def fig_shuffle(rng, prename=False):
    code = (
        "def f(lists):\n"
        "    lists[2] += lists[1]\n"
        "    lists[1] = []\n"
        "    return lists[0]\n"
    )
    return code, "[[395, 666, 7, 4], [], [4223, 111]]"


def zero_binding_const(rng, prename=False):
    needle = rng.choice(["the", "a", "on"])
    code = (
        f'def f():\n'
        f'    return "{phrase(rng)}".count("{needle}") * {rng.randint(3, 9)}\n'
    )
    return code, ""


def dynamic_scope(rng, prename=False):
    first, second = rng.sample(["alpha", "beta", "gamma", "delta", "omega"], 2)
    code = (
        f"def f({first}, {second}):\n"
        "    table = locals()\n"
        "    return sorted(table)\n"
    )
    return code, f"{rng.randint(1, 9)}, {rng.randint(1, 9)}"


def loop_sum_const(rng, prename=False):
    xs = "var1" if prename else rng.choice(LIST_NAMES)
    x = rng.choice(ELEM_NAMES)
    acc = rng.choice(ACC_NAMES)
    k = rng.randint(2, 5)
    b = rng.randint(1, 12)
    noun = rng.choice(["batch", "round", "run"])
    shape = rng.randrange(3)
    if shape == 0:
        body = f"        {acc} = {acc} + {x} * {k}\n"
        tail = f'    return "{noun} sum: " + str({acc} + {b})\n'
    elif shape == 1:
        body = f"        {acc} = {acc} + len(str({x})) + {k}\n"
        tail = f'    return "{noun} width: " + str({acc})\n'
    else:
        body = f"        {acc} = max({acc}, {x} * {k})\n"
        tail = f'    return "peak was " + str({acc} - {b})\n'
    code = (
        f"def f({xs}):\n"
        f"    {acc} = 0\n"
        f"    for {x} in {xs}:\n"
        f"{body}"
        f"{tail}"
    )
    return code, str(sample_ints(rng, rng.randint(4, 6), 1, 9))


def loop_filter_if(rng, prename=False):
    words = rng.choice(STR_LIST_NAMES)
    word = rng.choice(STR_ELEM_NAMES)
    out = rng.choice(OUT_NAMES)
    letter = rng.choice("abcde")
    glue = rng.choice([",", " ", "/"])
    shape = rng.randrange(2)
    if shape == 0:
        body = (
            f"        if {word}.islower():\n"
            f"            {out}.append({word}.upper())\n"
            f'        elif {word}.startswith("{letter}"):\n'
            f"            {out}.append({word})\n"
        )
    else:
        body = (
            f'        if {word}.endswith("{letter}"):\n'
            f"            {out}.append({word}.title())\n"
            f"        elif {word}.isupper():\n"
            f"            {out}.append({word})\n"
        )
    code = (
        f"def f({words}):\n"
        f"    {out} = []\n"
        f"    for {word} in {words}:\n"
        f"{body}"
        f'    return "{glue}".join({out})\n'
    )
    return code, str(sample_words(rng, rng.randint(4, 6)))


def loop_if_const(rng, prename=False):
    xs = rng.choice(LIST_NAMES)
    x = rng.choice(ELEM_NAMES)
    acc = rng.choice(ACC_NAMES)
    pivot = rng.randint(3, 15)
    shape = rng.randrange(2)
    if shape == 0:
        body = (
            f"        if {x} > {pivot}:\n"
            f"            {acc} = {acc} + {x}\n"
            f"        elif {x} == {pivot}:\n"
            f"            {acc} = {acc} * 2\n"
        )
    else:
        body = (
            f"        if {x} < {pivot}:\n"
            f"            {acc} = {acc} + {x} * 2\n"
            f"        elif {x} == {pivot}:\n"
            f"            {acc} = {acc} - 1\n"
        )
    code = (
        f"def f({xs}):\n"
        f"    {acc} = len({xs})\n"
        f"    for {x} in {xs}:\n"
        f"{body}"
        f"    return str({acc})\n"
    )
    return code, str(sample_ints(rng, rng.randint(4, 6), 1, 20))


def loop_pure(rng, prename=False):
    parts = rng.choice(STR_LIST_NAMES)
    part = rng.choice(STR_ELEM_NAMES)
    out = rng.choice(OUT_NAMES)
    verb = rng.choice(["lower", "title", "strip", "swapcase"])
    shape = rng.randrange(3)
    if shape == 0:
        init = f'    {out} = ""\n'
        body = f"        {out} = {out} + {part}.{verb}()\n"
        tail = f'    return {out} or "empty"\n'
    elif shape == 1:
        init = f"    {out} = []\n"
        body = f"        {out} = [{part}.{verb}()] + {out}\n"
        tail = f'    return " then ".join({out})\n'
    else:
        init = f"    {out} = []\n"
        body = f"        {out}.append({part}.{verb}())\n"
        tail = f'    return " - ".join({out})\n'
    code = (
        f"def f({parts}):\n"
        f"{init}"
        f"    for {part} in {parts}:\n"
        f"{body}"
        f"{tail}"
    )
    return code, str(sample_words(rng, rng.randint(3, 5)))


def branch_chain_const(rng, prename=False):
    x = "var1" if prename else rng.choice(["score", "value", "amount", "size", "level"])
    mood = rng.choice(["mood", "verdict", "note", "shade"])
    hi = rng.randint(40, 90)
    digit = rng.choice("02468")
    shape = rng.randrange(2)
    if shape == 0:
        code = (
            f"def f({x}):\n"
            f"    label = str({x})\n"
            f"    if {x} > {hi}:\n"
            f'        {mood} = "over"\n'
            f'    elif label.endswith("{digit}"):\n'
            f'        {mood} = "even"\n'
            f"    else:\n"
            f'        {mood} = "plain"\n'
            f'    if {mood} == "over":\n'
            f"        {mood} = {mood}.upper()\n"
            f"    return {mood} + label\n"
        )
    else:
        code = (
            f"def f({x}, flag):\n"
            f"    label = str({x})\n"
            f"    if flag:\n"
            f"        {mood} = label + label\n"
            f"    elif {x} > {hi}:\n"
            f'        {mood} = "past"\n'
            f'    elif label.startswith("1"):\n'
            f'        {mood} = "ones"\n'
            f"    else:\n"
            f'        {mood} = "none"\n'
            f"    return {mood}\n"
        )
    if shape == 1:
        args = f"{rng.randint(1, 120)}, {rng.choice(['True', 'False'])}"
    else:
        args = str(rng.randint(1, 120))
    return code, args


def branch_str(rng, prename=False):
    word = rng.choice(STR_ELEM_NAMES)
    other = rng.choice(["prefix", "suffix", "needle", "probe"])
    shape = rng.randrange(2)
    if shape == 0:
        code = (
            f"def f({word}, {other}):\n"
            f"    if {word}.startswith({other}):\n"
            f"        return {word}.upper()\n"
            f"    if {other} in {word}:\n"
            f'        return {word}.replace({other}, "*")\n'
            f"    if {word}.islower():\n"
            f"        return {word} + {other}\n"
            f'    return "no match for " + {other}\n'
        )
    else:
        code = (
            f"def f({word}, {other}):\n"
            f"    merged = {word} + {other}\n"
            f"    if merged.islower():\n"
            f"        merged = merged.swapcase()\n"
            f"    elif merged.isupper():\n"
            f"        merged = merged.title()\n"
            f"    if merged.endswith({other}):\n"
            f"        merged = merged.strip()\n"
            f'    return "got " + merged\n'
        )
    first, second = sample_words(rng, 2)
    if rng.random() < 0.4:
        second = first[: len(first) // 2] or first
    return code, f'"{first}", "{second}"'


def arith_const(rng, prename=False):
    x = "var1" if prename else rng.choice(["x", "base", "seed", "start", "left"])
    y = rng.choice(["y", "shift", "delta", "edge", "right"])
    a = rng.randint(2, 9)
    b = rng.randint(1, 7)
    shape = rng.randrange(3)
    if shape == 0:
        code = (
            f"def f({x}, {y}):\n"
            f"    gap = abs({x} - {y})\n"
            f"    wide = gap * {a} + {b}\n"
            f'    return "gap spans " + str(wide) + " units"\n'
        )
    elif shape == 1:
        code = (
            f"def f({x}):\n"
            f"    folded = {x} % {a} + {x} // {a}\n"
            f'    label = "folded down to "\n'
            f"    return label + str(folded)\n"
        )
    else:
        code = (
            f"def f({x}, {y}):\n"
            f"    span = max({x}, {y}) - min({x}, {y})\n"
            f"    bumped = span + {a}\n"
            f'    return "span bumped: " + str(bumped)\n'
        )
    if shape == 1:
        args = str(rng.randint(5, 60))
    else:
        args = f"{rng.randint(5, 40)}, {rng.randint(1, 30)}"
    return code, args


def str_pure(rng, prename=False):
    text = "var1" if prename else rng.choice(TEXT_NAMES)
    sep = rng.choice([",", "-", ":"])
    glue = rng.choice(["-", "_", "."])
    shape = rng.randrange(3)
    if shape == 0:
        code = (
            f"def f({text}):\n"
            f'    pieces = {text}.split("{sep}")\n'
            f'    glued = "{glue}".join(pieces)\n'
            f"    cleaned = glued.strip().lower()\n"
            f'    return cleaned.replace("a", "@")\n'
        )
    elif shape == 1:
        code = (
            f"def f({text}, mark):\n"
            f'    swapped = {text}.replace(mark, "{glue}")\n'
            f"    tidy = swapped.title().strip()\n"
            f'    return tidy + ", carefully rearranged"\n'
        )
    else:
        code = (
            f"def f({text}, fallback):\n"
            f"    trimmed = {text}.strip()\n"
            f"    chosen = trimmed if trimmed else fallback\n"
            f'    return chosen.center(len(chosen) + len(fallback), "{glue}")\n'
        )
    words = sample_words(rng, 3)
    if shape == 0:
        args = f'"{sep.join(words)}"'
    elif shape == 1:
        args = f'"{sep.join(words)}", "{sep}"'
    else:
        args = f'"   ", "{words[0]}"' if rng.random() < 0.5 else f'"{words[0]} ", "{words[1]}"'
    return code, args


def while_const(rng, prename=False):
    n = rng.choice(["n", "left", "fuel", "clock", "steps"])
    trail = rng.choice(["trail", "marks", "log", "path"])
    ch = rng.choice("xo*#")
    shape = rng.randrange(2)
    if shape == 0:
        code = (
            f"def f({n}):\n"
            f'    {trail} = ""\n'
            f"    while {n} > 1:\n"
            f"        {n} = {n} // 2\n"
            f'        {trail} = {trail} + "{ch}"\n'
            f'    return {trail} + " after all the halving"\n'
        )
    else:
        code = (
            f"def f({n}):\n"
            f"    {trail} = []\n"
            f"    while {n} > 1:\n"
            f"        {trail}.append(str({n}))\n"
            f"        {n} = {n} - 3\n"
            f'    return " down to ".join({trail})\n'
        )
    return code, str(rng.randint(8, 40))


def for_else_search(rng, prename=False):
    words = rng.choice(STR_LIST_NAMES)
    word = rng.choice(STR_ELEM_NAMES)
    target = rng.choice(["target", "wanted", "needle"])
    code = (
        f"def f({words}, {target}):\n"
        f"    if not {words}:\n"
        f'        return "nothing to search"\n'
        f"    for {word} in {words}:\n"
        f"        if {word} == {target}:\n"
        f"            hit = {word}.upper()\n"
        f"            break\n"
        f"    else:\n"
        f'        hit = {target} + " missing"\n'
        f"    return hit\n"
    )
    pool = sample_words(rng, 4)
    chosen = rng.choice(pool + ["missing"])
    return code, f'{pool!r}, "{chosen}"'


def fstring_report(rng, prename=False):
    name = rng.choice(["name", "tag", "owner", "city"])
    score = rng.choice(["score", "rank", "votes"])
    shape = rng.randrange(2)
    if shape == 0:
        code = (
            f"def f({name}, {score}):\n"
            f"    cleaned = {name}.strip()\n"
            f'    return f"{{{score}}}: {{cleaned}}"\n'
        )
    else:
        code = (
            f"def f({name}, {score}):\n"
            f"    shout = {name}.upper()\n"
            f'    return f"{{shout}} beat {{{score} + 1}} others"\n'
        )
    word = sample_words(rng, 1)[0]
    return code, f'"{word} ", {rng.randint(2, 50)}'


def comprehension_case(rng, prename=False):
    words = rng.choice(STR_LIST_NAMES)
    word = rng.choice(STR_ELEM_NAMES)
    shape = rng.randrange(3)
    if shape == 0:
        code = (
            f"def f({words}):\n"
            f"    sizes = [len({word}) for {word} in {words}]\n"
            f'    banner = "sorted the collected lengths"\n'
            f"    return (sorted(sizes), banner)\n"
        )
    elif shape == 1:
        code = (
            f"def f({words}):\n"
            f"    lookup = {{{word}: len({word}) for {word} in {words}}}\n"
            f'    return sorted(lookup) + ["end of the index"]\n'
        )
    else:
        code = (
            f"def f({words}):\n"
            f"    caps = [{word}.upper() for {word} in {words} if {word}.islower()]\n"
            f'    return " versus ".join(caps) or "all were shouting already"\n'
        )
    return code, str(sample_words(rng, rng.randint(3, 5)))


def nested_loop_const(rng, prename=False):
    grid = rng.choice(["grid", "rows", "table", "matrix"])
    row = rng.choice(["row", "line", "band"])
    cell = rng.choice(["cell", "spot", "v"])
    acc = rng.choice(ACC_NAMES)
    k = rng.randint(2, 4)
    code = (
        f"def f({grid}):\n"
        f"    {acc} = 0\n"
        f"    for {row} in {grid}:\n"
        f"        for {cell} in {row}:\n"
        f"            {acc} = {acc} + {cell}\n"
        f'    return "grid " + str({acc} * {k} + 1)\n'
    )
    inner = [sample_ints(rng, rng.randint(2, 3), 1, 9) for _ in range(rng.randint(2, 3))]
    return code, str(inner)


# Each entry: (maker, count, prenamed-var1 count, expected applicability
# for (varnorm1, varnorm2, constunfold, for2while, condaug)).
FAMILIES = [
    (fig_shuffle, 1, 0, (True, True, True, False, False)),
    (zero_binding_const, 1, 0, (False, False, True, False, False)),
    (dynamic_scope, 1, 0, (False, False, False, False, False)),
    (loop_sum_const, 10, 3, (True, True, True, True, False)),
    (loop_filter_if, 8, 0, (True, True, False, True, True)),
    (loop_if_const, 9, 0, (True, True, True, True, True)),
    (loop_pure, 6, 0, (True, True, False, True, False)),
    (branch_chain_const, 16, 4, (True, True, True, False, True)),
    (branch_str, 12, 0, (True, True, False, False, True)),
    (arith_const, 9, 3, (True, True, True, False, False)),
    (str_pure, 7, 3, (True, True, False, False, False)),
    (while_const, 6, 0, (True, True, True, False, False)),
    (for_else_search, 2, 0, (True, True, False, False, True)),
    (fstring_report, 2, 0, (True, True, False, False, False)),
    (comprehension_case, 5, 0, (True, True, False, False, False)),
    (nested_loop_const, 5, 0, (True, True, True, True, False)),
]

KINDS = (VARNORM1, VARNORM2, CONSTUNFOLD, FOR2WHILE, CONDAUG)


def run_program(code: str, input_text: str):
    namespace: dict = {}
    exec(compile(code, "<pinned>", "exec"), namespace)
    args = eval(f"({input_text},)" if input_text.strip() else "()")
    return namespace["f"](*args)


def build_cases(master_seed: int):
    cases = []
    seen_code = set()
    position = 0
    for maker, count, prenamed, expected in FAMILIES:
        for variant in range(count):
            rng = random.Random(f"{master_seed}:{maker.__name__}:{variant}")
            prename = variant < prenamed
            for attempt in range(50):
                code, input_text = maker(rng, prename)
                if code not in seen_code:
                    break
            else:
                raise RuntimeError(f"could not vary {maker.__name__} #{variant}")
            seen_code.add(code)

            unit = SourceUnit(code, origin=f"pin:{position}")
            got = tuple(applicable(unit, kind) for kind in KINDS)
            if got != expected:
                raise RuntimeError(
                    f"{maker.__name__} #{variant} applicability {got}, "
                    f"expected {expected}:\n{code}"
                )
            value = run_program(code, input_text)
            cases.append(
                {
                    "maker": maker.__name__,
                    "code": code,
                    "input": input_text,
                    "output": canonical_repr(value),
                }
            )
            position += 1
    return cases


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data/cruxeval_pinned.jsonl")
    parser.add_argument("--seed", type=int, default=MASTER_SEED)
    args = parser.parse_args()

    cases = build_cases(args.seed)
    shuffler = random.Random(f"{args.seed}:order")
    head, rest = cases[0], cases[1:]
    shuffler.shuffle(rest)
    ordered = [head] + rest

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as handle:
        for index, case in enumerate(ordered):
            record = {
                "id": f"crux_pin_{index:03d}",
                "benchmark": "cruxeval",
                "task": "output_prediction",
                "code": case["code"],
                "input": case["input"],
                "output": case["output"],
            }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
    print(f"wrote {len(ordered)} cases to {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
