"""
Temporal-logic property strings: parsing, printing and incremental monitoring.

Grammar (tightest binding first)::

    unary   := not | X | F | G          (prefix)
    and     := left associative
    or      := left associative
    U       := right associative
    =>      := right associative

Atoms are lower-case identifiers such as ``has_stopped_in_stop_region``;
``true`` and ``false`` are reserved so that progression residuals can be
printed and parsed again.

Monitoring is done by formula progression over finite traces.  A monitor
holds the residual obligation left after the valuations it has consumed;
its verdict is conclusive only once the residual folds to a constant.
"""
import logging
import re
from dataclasses import dataclass, replace
from functools import reduce
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence, Tuple

from django.db import models

from .exceptions import LtlSyntaxError, MissingAtomError, UnknownCharacterError

logger = logging.getLogger(__name__)

Valuation = Mapping[str, bool]

_ATOM_NAME = re.compile(r"[a-z0-9_]+")


class Verdict(models.TextChoices):
    SATISFIED = "satisfied", "Satisfied"
    VIOLATED = "violated", "Violated"
    UNDETERMINED = "undetermined", "Undetermined"

    @property
    def conclusive(self) -> bool:
        return self is not Verdict.UNDETERMINED


# --- formula tree -----------------------------------------------------------

@dataclass(frozen=True)
class Formula:
    def __str__(self):
        return to_string(self)


@dataclass(frozen=True)
class TrueConst(Formula):
    pass


@dataclass(frozen=True)
class FalseConst(Formula):
    pass


TRUE = TrueConst()
FALSE = FalseConst()


@dataclass(frozen=True)
class Atom(Formula):
    name: str

    def __post_init__(self):
        if not isinstance(self.name, str) or not _ATOM_NAME.fullmatch(self.name):
            raise ValueError(f"Invalid proposition name: {self.name!r}")


@dataclass(frozen=True)
class Not(Formula):
    operand: Formula


@dataclass(frozen=True)
class Next(Formula):
    operand: Formula


@dataclass(frozen=True)
class Eventually(Formula):
    operand: Formula


@dataclass(frozen=True)
class Always(Formula):
    operand: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula


_UNARY_SYMBOLS = {Next: "X", Eventually: "F", Always: "G"}
_BINARY_SYMBOLS = {And: "and", Or: "or", Implies: "=>", Until: "U"}


def to_string(formula: Formula) -> str:
    if isinstance(formula, TrueConst):
        return "true"
    if isinstance(formula, FalseConst):
        return "false"
    if isinstance(formula, Atom):
        return formula.name
    if isinstance(formula, Not):
        return f"not {_wrap(formula.operand)}"
    if type(formula) in _UNARY_SYMBOLS:
        return f"{_UNARY_SYMBOLS[type(formula)]}({to_string(formula.operand)})"
    if type(formula) in _BINARY_SYMBOLS:
        return f"{_wrap(formula.left)} {_BINARY_SYMBOLS[type(formula)]} {_wrap(formula.right)}"
    raise TypeError(f"Unsupported formula node: {formula!r}")


def _wrap(formula: Formula) -> str:
    if isinstance(formula, (TrueConst, FalseConst, Atom)):
        return to_string(formula)
    return f"({to_string(formula)})"


def atoms(formula: Formula) -> frozenset:
    if isinstance(formula, Atom):
        return frozenset([formula.name])
    if isinstance(formula, (TrueConst, FalseConst)):
        return frozenset()
    if hasattr(formula, "operand"):
        return atoms(formula.operand)
    return atoms(formula.left) | atoms(formula.right)


def depth(formula: Formula) -> int:
    """Leaves have depth 1"""
    if isinstance(formula, (TrueConst, FalseConst, Atom)):
        return 1
    if hasattr(formula, "operand"):
        return 1 + depth(formula.operand)
    return 1 + max(depth(formula.left), depth(formula.right))


# --- tokenizer and parser ---------------------------------------------------

class Token(NamedTuple):
    kind: str
    text: str
    offset: int


_KEYWORDS = {"not", "and", "or", "true", "false"}
_TEMPORAL = {"U", "F", "G", "X"}
_PRIMARY_START = frozenset({"identifier", "(", "not", "X", "F", "G", "true", "false"})
_CONTINUATION = frozenset({"=>", "U", "or", "and"})


def tokenize(text: str) -> list:
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        offset = len(text[:i].encode("utf-8"))
        if ch.isspace():
            i += 1
        elif ch in "()":
            tokens.append(Token(ch, ch, offset))
            i += 1
        elif text.startswith("=>", i):
            tokens.append(Token("=>", "=>", offset))
            i += 2
        elif ch in _TEMPORAL:
            tokens.append(Token(ch, ch, offset))
            i += 1
        elif ch == "_" or "a" <= ch <= "z":
            j = i + 1
            while j < n and (text[j] == "_" or "a" <= text[j] <= "z" or "0" <= text[j] <= "9"):
                j += 1
            word = text[i:j]
            tokens.append(Token(word if word in _KEYWORDS else "identifier", word, offset))
            i = j
        else:
            raise UnknownCharacterError(ch, offset)
    tokens.append(Token("end", "", len(text.encode("utf-8"))))
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def fail(self, expected):
        token = self.peek()
        found = "end of input" if token.kind == "end" else repr(token.text)
        raise LtlSyntaxError(f"Unexpected {found}", token.offset, expected)

    def parse(self) -> Formula:
        formula = self.implication()
        if self.peek().kind != "end":
            self.fail(_CONTINUATION | {"end of input"})
        return formula

    def implication(self) -> Formula:
        left = self.until()
        if self.peek().kind == "=>":
            self.advance()
            return Implies(left, self.implication())
        return left

    def until(self) -> Formula:
        left = self.disjunction()
        if self.peek().kind == "U":
            self.advance()
            return Until(left, self.until())
        return left

    def disjunction(self) -> Formula:
        left = self.conjunction()
        while self.peek().kind == "or":
            self.advance()
            left = Or(left, self.conjunction())
        return left

    def conjunction(self) -> Formula:
        left = self.unary()
        while self.peek().kind == "and":
            self.advance()
            left = And(left, self.unary())
        return left

    def unary(self) -> Formula:
        kind = self.peek().kind
        if kind == "not":
            self.advance()
            return Not(self.unary())
        if kind == "X":
            self.advance()
            return Next(self.unary())
        if kind == "F":
            self.advance()
            return Eventually(self.unary())
        if kind == "G":
            self.advance()
            return Always(self.unary())
        return self.primary()

    def primary(self) -> Formula:
        token = self.peek()
        if token.kind == "identifier":
            self.advance()
            return Atom(token.text)
        if token.kind == "true":
            self.advance()
            return TRUE
        if token.kind == "false":
            self.advance()
            return FALSE
        if token.kind == "(":
            self.advance()
            inner = self.implication()
            if self.peek().kind != ")":
                self.fail(_CONTINUATION | {")"})
            self.advance()
            return inner
        self.fail(_PRIMARY_START)


def parse(text: str) -> Formula:
    return _Parser(tokenize(text)).parse()


# --- simplification ---------------------------------------------------------

def _flatten(formula: Formula, node_type) -> list:
    if isinstance(formula, node_type):
        return _flatten(formula.left, node_type) + _flatten(formula.right, node_type)
    return [formula]


def _has_complement(items) -> bool:
    return any(isinstance(item, Not) and item.operand in items for item in items)


def _junction(left, right, node_type, unit, zero, annihilate):
    items = []
    for part in _flatten(left, node_type) + _flatten(right, node_type):
        if part == zero:
            return zero
        if part == unit or part in items:
            continue
        items.append(part)
    if annihilate and _has_complement(items):
        return zero
    if not items:
        return unit
    return reduce(lambda acc, item: node_type(item, acc), reversed(items[:-1]), items[-1])


def make_and(left: Formula, right: Formula, annihilate: bool = False) -> Formula:
    return _junction(left, right, And, TRUE, FALSE, annihilate)


def make_or(left: Formula, right: Formula, annihilate: bool = False) -> Formula:
    return _junction(left, right, Or, FALSE, TRUE, annihilate)


def make_not(operand: Formula) -> Formula:
    if operand == TRUE:
        return FALSE
    if operand == FALSE:
        return TRUE
    if isinstance(operand, Not):
        return operand.operand
    return Not(operand)


def simplify(formula: Formula, annihilate: bool = False) -> Formula:
    """Fold the boolean skeleton; temporal sub-formulas are left untouched."""
    if isinstance(formula, Not):
        return make_not(simplify(formula.operand, annihilate))
    if isinstance(formula, And):
        return make_and(simplify(formula.left, annihilate), simplify(formula.right, annihilate), annihilate)
    if isinstance(formula, Or):
        return make_or(simplify(formula.left, annihilate), simplify(formula.right, annihilate), annihilate)
    if isinstance(formula, Implies):
        return make_or(
            make_not(simplify(formula.left, annihilate)),
            simplify(formula.right, annihilate),
            annihilate,
        )
    return formula


# --- progression ------------------------------------------------------------

def progress(formula: Formula, valuation: Valuation, simplified: bool = True,
             annihilate: bool = False) -> Formula:
    """Residual obligation on the rest of the trace after one valuation."""
    if simplified:
        conj = lambda a, b: make_and(a, b, annihilate)
        disj = lambda a, b: make_or(a, b, annihilate)
        neg = make_not
    else:
        conj, disj, neg = And, Or, Not

    def step(f: Formula) -> Formula:
        if isinstance(f, (TrueConst, FalseConst)):
            return f
        if isinstance(f, Atom):
            try:
                return TRUE if valuation[f.name] else FALSE
            except KeyError:
                raise MissingAtomError(f.name) from None
        if isinstance(f, Not):
            return neg(step(f.operand))
        if isinstance(f, And):
            return conj(step(f.left), step(f.right))
        if isinstance(f, Or):
            return disj(step(f.left), step(f.right))
        if isinstance(f, Implies):
            return disj(neg(step(f.left)), step(f.right))
        if isinstance(f, Next):
            return simplify(f.operand, annihilate) if simplified else f.operand
        if isinstance(f, Eventually):
            return disj(step(f.operand), f)
        if isinstance(f, Always):
            return conj(step(f.operand), f)
        if isinstance(f, Until):
            return disj(step(f.right), conj(step(f.left), f))
        raise TypeError(f"Unsupported formula node: {f!r}")

    return step(formula)


def verdict_of(residual: Formula) -> Verdict:
    if residual == TRUE:
        return Verdict.SATISFIED
    if residual == FALSE:
        return Verdict.VIOLATED
    return Verdict.UNDETERMINED


# --- monitors ---------------------------------------------------------------

@dataclass(frozen=True)
class Monitor:
    original: Formula
    residual: Formula
    verdict: Verdict
    steps_consumed: int = 0
    label: str = ""
    annihilate_complements: bool = False


def new_monitor(formula, label: str = "", annihilate_complements: bool = False) -> Monitor:
    if isinstance(formula, str):
        formula = parse(formula)
    return Monitor(
        original=formula,
        residual=formula,
        verdict=verdict_of(formula),
        label=label or to_string(formula),
        annihilate_complements=annihilate_complements,
    )


def monitor_step(m: Monitor, valuation: Valuation) -> Tuple[Monitor, Verdict]:
    if m.verdict.conclusive:
        return replace(m, steps_consumed=m.steps_consumed + 1), m.verdict
    residual = progress(m.residual, valuation, annihilate=m.annihilate_complements)
    verdict = verdict_of(residual)
    if verdict is Verdict.VIOLATED:
        logger.debug("Monitor '%s' violated at step %d", m.label, m.steps_consumed)
    return replace(m, residual=residual, verdict=verdict, steps_consumed=m.steps_consumed + 1), verdict


def finalize(m: Monitor) -> Verdict:
    if m.verdict is Verdict.VIOLATED:
        return Verdict.VIOLATED
    if m.residual == TRUE:
        return Verdict.SATISFIED
    return Verdict.UNDETERMINED


def locate_violation(formula, trace: Iterable[Valuation]) -> Tuple[Verdict, Optional[int]]:
    """Final verdict plus the 0-based index of the falsifying valuation, if any."""
    m = new_monitor(formula)
    for index, valuation in enumerate(trace):
        m, verdict = monitor_step(m, valuation)
        if verdict is Verdict.VIOLATED:
            return Verdict.VIOLATED, index
        if verdict.conclusive:
            break
    return finalize(m), None


def evaluate_trace(formula, trace: Sequence[Valuation]) -> Verdict:
    m = new_monitor(formula)
    for valuation in trace:
        m, _ = monitor_step(m, valuation)
    return finalize(m)
