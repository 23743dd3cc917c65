"""Type-term corpora over the boot hierarchy, written as surface type expressions."""

import itertools
import random

from minijl.frontend import parse

LEAVES = ["Int64", "Int32", "Float64", "Bool", "String", "Complex128",
          "Number", "Real", "Integer", "FloatingPoint", "Any",
          "Rational{Int64}", "Rational{Int32}", "Rational", "Range{Int64}",
          "Array{Int64,1}", "Array{Number,1}", "Array{Int64,2}",
          "Type{Int64}", "Type{Number}"]

CONCRETE = ["Int64", "Int32", "Float64", "Bool", "String", "Complex128",
            "Rational{Int64}", "Rational{Int32}", "Range{Int64}", "Range{Int32}",
            "Array{Int64,1}", "Array{Number,1}", "Type{Int64}", "Type{Number}"]


def gen_term(rng: random.Random, depth: int) -> str:
    r = rng.random()
    if depth <= 0 or r < 0.45:
        return rng.choice(LEAVES)
    if r < 0.75:
        n = rng.randint(0, 3)
        elems = [gen_term(rng, depth - 1) for _ in range(n)]
        if elems and rng.random() < 0.25:
            elems[-1] += "..."
        return "(" + ",".join(elems) + ("," if len(elems) == 1 and not elems[0].endswith("...") else "") + ")"
    n = rng.randint(2, 3)
    return "Union(" + ",".join(gen_term(rng, depth - 1) for _ in range(n)) + ")"


def corpus(n: int = 520, seed: int = 7) -> list:
    rng = random.Random(seed)
    out = list(LEAVES)
    seen = set(out)
    while len(out) < n:
        t = gen_term(rng, 3)
        if t not in seen:
            seen.add(t)
            out.append(t)
    return out


def concrete_universe(max_len: int = 2) -> list:
    out = list(CONCRETE)
    for k in range(0, max_len + 1):
        for combo in itertools.product(CONCRETE[:8], repeat=k):
            out.append("(" + ",".join(combo) + ("," if k == 1 else "") + ")")
    return out


def to_type(ctx, text: str):
    tree = parse(text)
    return ctx.eval_type(tree.args[0], {})
