"""Coefficient fields: a small expression language plus hypothesis checks.

The model's coefficients (transmission, recruitment, mortality, diffusion,
boundary weights) are smooth functions of space x and time t, supplied as
text in a tiny arithmetic grammar:

    expr   := term  (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right-associative
    atom   := number | 'pi' | 'x' | 't' | name '(' expr {',' expr} ')'
            | '(' expr ')'

Functions: sin, cos, exp, abs (one argument), max, min, pow (two).
Precedence: ^  >  unary -  >  * /  >  + -.  Python's '**' is rejected.

Evaluation is pure and numpy-vectorised over x.  Hypothesis checks sample
every field on the grid/time lattice over two periods and report (never
throw) violations of periodicity, nonnegativity, strict positivity, and
nontriviality of the infection pathway.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field as dataclass_field
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import EvalError, ParseError

__all__ = [
    "Expression", "Num", "Var", "Neg", "Bin", "Call",
    "parse_expression", "evaluate", "to_source", "field_values",
    "CoefficientSet", "Violation", "ValidationReport", "validate_hypothesis_H",
]

FUNCTIONS = {"sin": 1, "cos": 1, "exp": 1, "abs": 1, "max": 2, "min": 2, "pow": 2}

VARIABLES = ("x", "t")

# Relative tolerance for the T-periodicity lattice check.
PERIODICITY_RTOL = 1e-10
# Roundoff slack allowed when checking nonnegativity of closed forms.
NONNEG_SLACK = -1e-12


# ═══════════════════════════════════════════════════════════════════════════
# AST
# ═══════════════════════════════════════════════════════════════════════════


class Expression:
    """Base class for parsed coefficient expressions."""

    def eval(self, x, t: float):
        return evaluate(self, x, t)

    def __str__(self) -> str:
        return to_source(self)


@dataclass(frozen=True)
class Num(Expression):
    value: float


@dataclass(frozen=True)
class Var(Expression):
    name: str  # "x" or "t"


@dataclass(frozen=True)
class Neg(Expression):
    operand: Expression


@dataclass(frozen=True)
class Bin(Expression):
    op: str  # one of + - * / ^
    left: Expression
    right: Expression


@dataclass(frozen=True)
class Call(Expression):
    fn: str
    args: tuple


# ═══════════════════════════════════════════════════════════════════════════
# Tokenizer / parser
# ═══════════════════════════════════════════════════════════════════════════

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
    r")"
)


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None or m.lastgroup is None:
            # Skip over whitespace-only tails.
            if src[pos:].strip() == "":
                break
            bad = pos + len(src[pos:]) - len(src[pos:].lstrip())
            raise ParseError(f"unexpected character {src[bad]!r}", bad)
        kind = m.lastgroup
        text = m.group(kind)
        tokens.append((kind, text, m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str, constants: Mapping[str, float]):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0
        self.constants = constants

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str) -> None:
        kind, text, pos = self.peek()
        if kind != "op" or text != op:
            raise ParseError(f"expected {op!r}, found {text or 'end of input'!r}", pos)
        self.advance()

    # grammar rules, lowest precedence first

    def parse(self) -> Expression:
        e = self.sum()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ParseError(f"expected operator or end of input, found {text!r}", pos)
        return e

    def sum(self) -> Expression:
        e = self.term()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                e = Bin(text, e, self.term())
            else:
                return e

    def term(self) -> Expression:
        e = self.unary()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                e = Bin(text, e, self.unary())
            else:
                return e

    def unary(self) -> Expression:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expression:
        base = self.atom()
        kind, text, _ = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            # right-associative; exponent may be unary-negated
            return Bin("^", base, self.unary())
        return base

    def atom(self) -> Expression:
        kind, text, pos = self.advance()
        if kind == "number":
            return Num(float(text))
        if kind == "ident":
            if text in VARIABLES:
                return Var(text)
            if text == "pi":
                return Num(math.pi)
            if text in FUNCTIONS:
                self.expect_op("(")
                args = [self.sum()]
                while True:
                    k2, t2, p2 = self.peek()
                    if k2 == "op" and t2 == ",":
                        self.advance()
                        args.append(self.sum())
                    else:
                        break
                self.expect_op(")")
                arity = FUNCTIONS[text]
                if len(args) != arity:
                    raise ParseError(
                        f"{text} takes {arity} argument(s), got {len(args)}", pos)
                return Call(text, tuple(args))
            if text in self.constants:
                return Num(float(self.constants[text]))
            raise ParseError(f"unknown name {text!r}", pos)
        if kind == "op" and text == "(":
            e = self.sum()
            self.expect_op(")")
            return e
        raise ParseError(f"expected a value, found {text or 'end of input'!r}", pos)


def parse_expression(source: str, constants: Mapping[str, float] | None = None) -> Expression:
    """Parse `source` into an Expression AST.

    Args:
        source: expression text in the grammar above.
        constants: optional extra named constants (used by parameter sweeps);
            they are inlined as literals at parse time.

    Raises:
        ParseError: with the byte offset of the offending token.
    """
    return _Parser(source, constants or {}).parse()


# ═══════════════════════════════════════════════════════════════════════════
# Evaluation / printing
# ═══════════════════════════════════════════════════════════════════════════


def _ev(e: Expression, x, t: float):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return x if e.name == "x" else t
    if isinstance(e, Neg):
        return -_ev(e.operand, x, t)
    if isinstance(e, Bin):
        a = _ev(e.left, x, t)
        b = _ev(e.right, x, t)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            if np.any(np.asarray(b) == 0):
                raise EvalError(f"division by zero in {to_source(e)!r}")
            return a / b
        # '^'
        return np.power(a, b)
    if isinstance(e, Call):
        vals = [_ev(a, x, t) for a in e.args]
        if e.fn == "sin":
            return np.sin(vals[0])
        if e.fn == "cos":
            return np.cos(vals[0])
        if e.fn == "exp":
            return np.exp(vals[0])
        if e.fn == "abs":
            return np.abs(vals[0])
        if e.fn == "max":
            return np.maximum(vals[0], vals[1])
        if e.fn == "min":
            return np.minimum(vals[0], vals[1])
        # pow
        return np.power(vals[0], vals[1])
    raise TypeError(f"not an Expression: {e!r}")


def evaluate(e: Expression, x, t: float):
    """Evaluate `e` at position(s) x and time t.

    x may be a float or ndarray; the result broadcasts accordingly.  Pure:
    identical inputs give bit-identical outputs.

    Raises:
        EvalError: on division by zero or any non-finite result.
    """
    with np.errstate(all="ignore"):
        v = _ev(e, x, t)
    if not np.all(np.isfinite(v)):
        raise EvalError(f"non-finite value from {to_source(e)!r}")
    return v


def field_values(e, x: np.ndarray, t: float) -> np.ndarray:
    """Evaluate an Expression (or plain number) to an array shaped like x."""
    if isinstance(e, Expression):
        v = evaluate(e, x, t)
    else:
        v = float(e)
    return np.broadcast_to(np.asarray(v, dtype=float), np.shape(x)).copy()


# precedence levels for minimal-paren printing
_LEVEL_SUM, _LEVEL_TERM, _LEVEL_UNARY, _LEVEL_POWER, _LEVEL_ATOM = 1, 2, 3, 4, 5


def _level(e: Expression) -> int:
    if isinstance(e, (Num, Var, Call)):
        return _LEVEL_ATOM
    if isinstance(e, Neg):
        return _LEVEL_UNARY
    return {"+": _LEVEL_SUM, "-": _LEVEL_SUM,
            "*": _LEVEL_TERM, "/": _LEVEL_TERM,
            "^": _LEVEL_POWER}[e.op]


def _wrap(e: Expression, minimum: int) -> str:
    s = to_source(e)
    return f"({s})" if _level(e) < minimum else s


def to_source(e: Expression) -> str:
    """Render the AST back to grammar text; reparsing gives an equal AST."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return "-" + _wrap(e.operand, _LEVEL_UNARY)
    if isinstance(e, Call):
        return e.fn + "(" + ", ".join(to_source(a) for a in e.args) + ")"
    if e.op in "+-":
        # right operand of '-' needs wrapping at the same level: a-(b+c)
        right_min = _LEVEL_SUM + 1 if e.op == "-" else _LEVEL_SUM
        return f"{_wrap(e.left, _LEVEL_SUM)} {e.op} {_wrap(e.right, right_min)}"
    if e.op in "*/":
        right_min = _LEVEL_TERM + 1 if e.op == "/" else _LEVEL_TERM
        return f"{_wrap(e.left, _LEVEL_TERM)} {e.op} {_wrap(e.right, right_min)}"
    # '^': right-associative, binds tighter than unary minus
    return f"{_wrap(e.left, _LEVEL_ATOM)}^{_wrap(e.right, _LEVEL_UNARY)}"


# ═══════════════════════════════════════════════════════════════════════════
# Coefficient sets and hypothesis checks
# ═══════════════════════════════════════════════════════════════════════════

# field name -> needs strict positivity (else nonnegativity suffices)
_FIELD_STRICT = {
    "rho": True, "sigma1": False, "sigma2": True, "beta": False,
    "mu1": True, "mu2": False, "d1": True, "d2": True, "H_u": False,
}

COEFFICIENT_FIELDS = tuple(_FIELD_STRICT)


@dataclass(frozen=True)
class CoefficientSet:
    """All coefficient fields of the model plus the period T.

    robin_b1/robin_b2 are optional (left, right) endpoint weight pairs for
    the host/vector boundary operators; present only for Robin flavors.
    """

    T: float
    rho: Expression
    sigma1: Expression
    sigma2: Expression
    beta: Expression
    mu1: Expression
    mu2: Expression
    d1: Expression
    d2: Expression
    H_u: Expression
    robin_b1: tuple | None = None  # (Expression, Expression) for (left, right)
    robin_b2: tuple | None = None

    @classmethod
    def from_strings(cls, T: float = 1.0, robin_b1=None, robin_b2=None,
                     constants: Mapping[str, float] | None = None,
                     **fields: str) -> "CoefficientSet":
        """Build from expression strings, e.g. rho="1", beta="2+sin(2*pi*t)"."""
        parsed = {}
        for name in _FIELD_STRICT:
            if name not in fields:
                raise KeyError(f"missing coefficient {name!r}")
            parsed[name] = parse_expression(fields[name], constants)
        extra = set(fields) - set(_FIELD_STRICT)
        if extra:
            raise KeyError(f"unknown coefficient(s): {sorted(extra)}")

        def pair(p):
            if p is None:
                return None
            left, right = p
            return (parse_expression(left, constants),
                    parse_expression(right, constants))

        return cls(T=float(T), robin_b1=pair(robin_b1), robin_b2=pair(robin_b2),
                   **parsed)

    def named_fields(self) -> dict:
        """Coefficient fields keyed by name, including Robin pairs if set."""
        out = {name: getattr(self, name) for name in _FIELD_STRICT}
        if self.robin_b1 is not None:
            out["robin_b1_left"], out["robin_b1_right"] = self.robin_b1
        if self.robin_b2 is not None:
            out["robin_b2_left"], out["robin_b2_right"] = self.robin_b2
        return out


@dataclass(frozen=True)
class Violation:
    field: str
    condition: str
    x: float
    t: float
    value: float

    def describe(self) -> str:
        return (f"{self.field}: {self.condition} at (x={self.x:.6g}, t={self.t:.6g}), "
                f"value {self.value:.6g}")


@dataclass
class ValidationReport:
    passed: bool
    violations: list = dataclass_field(default_factory=list)

    def describe(self) -> str:
        if self.passed:
            return "hypothesis checks passed"
        return "\n".join(v.describe() for v in self.violations)


def _lattice_values(expr: Expression, xs: np.ndarray, ts: np.ndarray) -> np.ndarray:
    return np.stack([field_values(expr, xs, float(t)) for t in ts])


def validate_hypothesis_H(c: CoefficientSet, grid, t_offset: float = 0.0) -> ValidationReport:
    """Check the standing hypothesis on a space-time lattice.

    Samples every field on the grid's full node set crossed with the solver
    time levels over [0, 2T] (shifted by t_offset, a diagnostic knob).
    Checks, in order: T-periodicity (relative 1e-10), nonnegativity of all
    fields, strict positivity of rho/sigma2/mu1/d1/d2, nontriviality of
    sigma1*H_u, and nonnegativity+periodicity of any Robin weights.

    Returns a report listing violations; never raises on a failed check.
    """
    xs = grid.full_nodes()
    m = grid.steps_per_period
    ts = t_offset + np.arange(2 * m + 1) * grid.dt
    violations: list[Violation] = []

    def worst(mask: np.ndarray, vals: np.ndarray):
        idx = np.unravel_index(np.argmin(np.where(mask, vals, np.inf)), vals.shape)
        return idx

    for name, expr in c.named_fields().items():
        vals = _lattice_values(expr, xs, ts)

        # periodicity: compare t and t+T over the first period of the lattice
        a = vals[: m + 1]
        b = vals[m: 2 * m + 1]
        scale = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
        rel = np.abs(a - b) / scale
        if np.max(rel) > PERIODICITY_RTOL:
            j, i = np.unravel_index(np.argmax(rel), rel.shape)
            violations.append(Violation(
                name, f"not T-periodic (relative gap {np.max(rel):.3g})",
                float(xs[i]), float(ts[j]), float(a[j, i])))

        if np.min(vals) < NONNEG_SLACK:
            j, i = worst(vals < NONNEG_SLACK, vals)
            violations.append(Violation(
                name, "must be nonnegative", float(xs[i]), float(ts[j]),
                float(vals[j, i])))

        if _FIELD_STRICT.get(name, False) and np.min(vals) <= 0.0:
            j, i = worst(vals <= 0.0, vals)
            violations.append(Violation(
                name, "must be positive", float(xs[i]), float(ts[j]),
                float(vals[j, i])))

    # infection pathway must not vanish identically
    prod = (_lattice_values(c.sigma1, xs, ts[: m + 1])
            * _lattice_values(c.H_u, xs, ts[: m + 1]))
    if np.max(prod) <= 0.0:
        violations.append(Violation(
            "sigma1*H_u", "must not vanish identically", float(xs[0]),
            float(ts[0]), float(np.max(prod))))

    return ValidationReport(passed=not violations, violations=violations)
