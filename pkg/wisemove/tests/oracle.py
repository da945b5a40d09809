"""
Brute-force three-valued evaluation of formulas on finite traces, used as
the reference the incremental monitors are checked against.

Kleene logic throughout; anything that looks past the end of the trace is
unknown (None).
"""
from itertools import product

from wisemove.ltl import (
    And,
    Always,
    Atom,
    Eventually,
    FalseConst,
    Implies,
    Next,
    Not,
    Or,
    TrueConst,
    Until,
    Verdict,
)

ATOM_NAMES = ("a", "b")
UNARY = (Not, Next, Eventually, Always)
BINARY = (And, Or, Implies, Until)


def _not(x):
    return None if x is None else not x


def _and(x, y):
    if x is False or y is False:
        return False
    if x is None or y is None:
        return None
    return True


def _or(x, y):
    if x is True or y is True:
        return True
    if x is None or y is None:
        return None
    return False


def holds(f, trace, i=0):
    n = len(trace)
    if isinstance(f, TrueConst):
        return True
    if isinstance(f, FalseConst):
        return False
    if i >= n:
        return None
    if isinstance(f, Atom):
        return trace[i][f.name]
    if isinstance(f, Not):
        return _not(holds(f.operand, trace, i))
    if isinstance(f, And):
        return _and(holds(f.left, trace, i), holds(f.right, trace, i))
    if isinstance(f, Or):
        return _or(holds(f.left, trace, i), holds(f.right, trace, i))
    if isinstance(f, Implies):
        return _or(_not(holds(f.left, trace, i)), holds(f.right, trace, i))
    if isinstance(f, Next):
        return holds(f.operand, trace, i + 1)
    if isinstance(f, Eventually):
        return _or(holds(f.operand, trace, i), holds(f, trace, i + 1))
    if isinstance(f, Always):
        return _and(holds(f.operand, trace, i), holds(f, trace, i + 1))
    if isinstance(f, Until):
        return _or(holds(f.right, trace, i), _and(holds(f.left, trace, i), holds(f, trace, i + 1)))
    raise TypeError(f)


def oracle_verdict(f, trace) -> Verdict:
    value = holds(f, list(trace))
    if value is True:
        return Verdict.SATISFIED
    if value is False:
        return Verdict.VIOLATED
    return Verdict.UNDETERMINED


def formulas(max_depth, names=ATOM_NAMES):
    """Every formula over ``names`` with depth at most ``max_depth``."""
    if max_depth < 1:
        return []
    if max_depth == 1:
        return [Atom(name) for name in names]
    smaller = formulas(max_depth - 1, names)
    found = list(smaller)
    seen = set(found)
    for op in UNARY:
        for f in smaller:
            g = op(f)
            if g not in seen:
                seen.add(g)
                found.append(g)
    for op in BINARY:
        for left, right in product(smaller, repeat=2):
            g = op(left, right)
            if g not in seen:
                seen.add(g)
                found.append(g)
    return found


def valuations(names=ATOM_NAMES):
    return [dict(zip(names, values)) for values in product((False, True), repeat=len(names))]
