"""Small arithmetic expression language for metric definitions.

Expressions are built from numbers, chart variables x1..xn, fiber
variables y1..yn, the operators + - * / ^ and the functions
sqrt, abs, exp, log, pow. ^ is right-associative and a unary sign
binds tighter than the base of ^, so -x1^2 means (-x1)^2.

Grammar (EBNF):

    expression := term { ("+" | "-") term }
    term       := power { ("*" | "/") power }
    power      := signed [ "^" power ]
    signed     := ("-" | "+") signed | atom
    atom       := NUMBER
                | VARIABLE
                | NAME "(" expression { "," expression } ")"
                | "(" expression ")"
    VARIABLE   := ("x" | "y") positive-integer
    NUMBER     := decimal or scientific literal, e.g. 2, 0.5, 1e-3

Parsing is strict about dimension: a variable index above the declared
dimension is rejected with its source position.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .errors import EvaluationDomainError, ExpressionError

_FUNCTIONS = {"sqrt": 1, "abs": 1, "exp": 1, "log": 1, "pow": 2}

_TOKEN_RE = re.compile(
    r"""
    (?P<number>(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
  | (?P<ws>\s+)
  | (?P<bad>.)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int


def tokenize(source):
    """Split source into tokens, tracking 1-based line/column positions."""
    tokens = []
    line, col = 1, 1
    for m in _TOKEN_RE.finditer(source):
        kind = m.lastgroup
        text = m.group()
        if kind == "bad":
            raise ExpressionError(f"unexpected character {text!r}", line, col)
        if kind != "ws":
            tokens.append(Token(kind, text, line, col))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
    tokens.append(Token("end", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class Number:
    value: float


@dataclass(frozen=True)
class Variable:
    kind: str  # "x" or "y"
    index: int  # 0-based


@dataclass(frozen=True)
class Unary:
    op: str
    operand: object


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple = field(default_factory=tuple)


_VAR_RE = re.compile(r"^([xy])([1-9]\d*)$")


class _Parser:
    def __init__(self, tokens, dimension):
        self.tokens = tokens
        self.pos = 0
        self.dimension = dimension

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text):
        tok = self.peek()
        if tok.kind == "op" and tok.text == text:
            return self.advance()
        raise ExpressionError(
            f"expected {text!r}, found {tok.text or 'end of input'!r}",
            tok.line, tok.column,
        )

    def at_op(self, *texts):
        tok = self.peek()
        return tok.kind == "op" and tok.text in texts

    def parse(self):
        node = self.expression()
        tok = self.peek()
        if tok.kind != "end":
            raise ExpressionError(
                f"unexpected trailing input {tok.text!r}", tok.line, tok.column
            )
        return node

    def expression(self):
        node = self.term()
        while self.at_op("+", "-"):
            op = self.advance().text
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.power()
        while self.at_op("*", "/"):
            op = self.advance().text
            node = Binary(op, node, self.power())
        return node

    def power(self):
        base = self.signed()
        if self.at_op("^"):
            self.advance()
            return Binary("^", base, self.power())
        return base

    def signed(self):
        if self.at_op("-", "+"):
            op = self.advance().text
            operand = self.signed()
            if op == "+":
                return operand
            return Unary("-", operand)
        return self.atom()

    def atom(self):
        tok = self.peek()
        if tok.kind == "number":
            self.advance()
            return Number(float(tok.text))
        if tok.kind == "name":
            self.advance()
            if self.at_op("("):
                return self.call(tok)
            m = _VAR_RE.match(tok.text)
            if m is None:
                raise ExpressionError(
                    f"unknown name {tok.text!r} (variables are x1..x{self.dimension},"
                    f" y1..y{self.dimension})",
                    tok.line, tok.column,
                )
            index = int(m.group(2))
            if index > self.dimension:
                raise ExpressionError(
                    f"variable {tok.text!r} exceeds dimension {self.dimension}",
                    tok.line, tok.column,
                )
            return Variable(m.group(1), index - 1)
        if self.at_op("("):
            self.advance()
            node = self.expression()
            self.expect(")")
            return node
        raise ExpressionError(
            f"expected a value, found {tok.text or 'end of input'!r}",
            tok.line, tok.column,
        )

    def call(self, name_tok):
        name = name_tok.text
        if name not in _FUNCTIONS:
            raise ExpressionError(
                f"unknown function {name!r} (have {', '.join(sorted(_FUNCTIONS))})",
                name_tok.line, name_tok.column,
            )
        self.expect("(")
        args = [self.expression()]
        while self.at_op(","):
            self.advance()
            args.append(self.expression())
        self.expect(")")
        arity = _FUNCTIONS[name]
        if len(args) != arity:
            raise ExpressionError(
                f"{name} takes {arity} argument{'s' if arity > 1 else ''},"
                f" got {len(args)}",
                name_tok.line, name_tok.column,
            )
        return Call(name, tuple(args))


def _eval(node, x, y):
    if isinstance(node, Number):
        return node.value
    if isinstance(node, Variable):
        seq = x if node.kind == "x" else y
        return float(seq[node.index])
    if isinstance(node, Unary):
        return -_eval(node.operand, x, y)
    if isinstance(node, Binary):
        a = _eval(node.left, x, y)
        b = _eval(node.right, x, y)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            if b == 0.0:
                raise EvaluationDomainError("division by zero")
            return a / b
        return _power(a, b)
    # Call
    a = [_eval(arg, x, y) for arg in node.args]
    if node.name == "sqrt":
        if a[0] < 0.0:
            raise EvaluationDomainError(f"sqrt of negative value {a[0]!r}")
        return math.sqrt(a[0])
    if node.name == "abs":
        return abs(a[0])
    if node.name == "exp":
        try:
            return math.exp(a[0])
        except OverflowError:
            raise EvaluationDomainError(f"exp overflow at {a[0]!r}") from None
    if node.name == "log":
        if a[0] <= 0.0:
            raise EvaluationDomainError(f"log of non-positive value {a[0]!r}")
        return math.log(a[0])
    return _power(a[0], a[1])


def _power(base, exponent):
    if base < 0.0 and exponent != round(exponent):
        raise EvaluationDomainError(
            f"non-integer power {exponent!r} of negative base {base!r}"
        )
    if base == 0.0 and exponent < 0.0:
        raise EvaluationDomainError("zero raised to a negative power")
    try:
        value = math.pow(base, exponent)
    except (OverflowError, ValueError):
        raise EvaluationDomainError(
            f"power {base!r} ^ {exponent!r} is not representable"
        ) from None
    return value


# precedence ranks used for minimal parenthesization
_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 3, "u-": 4}


def _node_prec(node):
    if isinstance(node, Binary):
        return _PREC[node.op]
    if isinstance(node, Unary):
        return _PREC["u-"]
    return 10


def _to_source(node):
    if isinstance(node, Number):
        return repr(node.value)
    if isinstance(node, Variable):
        return f"{node.kind}{node.index + 1}"
    if isinstance(node, Unary):
        inner = _to_source(node.operand)
        if _node_prec(node.operand) < _PREC["u-"]:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, Binary):
        lp = _node_prec(node.left)
        rp = _node_prec(node.right)
        mine = _PREC[node.op]
        left = _to_source(node.left)
        right = _to_source(node.right)
        # left operand needs parens when looser, or equal for the
        # right-associative ^; right operand when looser-or-equal for
        # left-associative ops (also guards - and / non-associativity)
        if lp < mine or (node.op == "^" and lp == mine):
            left = f"({left})"
        if rp < mine or (node.op != "^" and rp == mine):
            right = f"({right})"
        return f"{left} {node.op} {right}" if node.op in "+-" else f"{left}{node.op}{right}"
    return f"{node.name}({', '.join(_to_source(a) for a in node.args)})"


@dataclass(frozen=True)
class MetricExpression:
    """A parsed, immutable metric expression over a chart of fixed dimension."""

    dimension: int
    root: object
    source: str = ""

    def evaluate(self, x, y):
        """Evaluate at chart point x and fiber vector y (sequences of floats)."""
        if len(x) < self.dimension or len(y) < self.dimension:
            raise ValueError(
                f"expression needs {self.dimension} components,"
                f" got x[{len(x)}], y[{len(y)}]"
            )
        return _eval(self.root, x, y)

    def to_source(self):
        """Canonical source form; parsing it again yields an equal tree."""
        return _to_source(self.root)

    def __call__(self, x, y):
        return _eval(self.root, x, y)


def parse_expression(source, dimension):
    """Parse source into a MetricExpression over the given chart dimension.

    Raises ExpressionError with 1-based line/column on any syntax problem,
    unknown name, bad arity, or variable index above the dimension.
    """
    if dimension < 1:
        raise ExpressionError(f"dimension must be >= 1, got {dimension}")
    tokens = tokenize(source)
    root = _Parser(tokens, dimension).parse()
    return MetricExpression(dimension=dimension, root=root, source=source)
