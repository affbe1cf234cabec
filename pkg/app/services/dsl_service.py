"""Concrete syntax for bracket forms and binding files.

Grammar::

    expr   := term (('+'|'-') term)* ;
    term   := factor ('*' factor)* ;
    factor := '{' expr '}' | '(' expr ')' | '-' factor | atom ;
    atom   := symbol | number | 'n' ('^' integer)? ;
    symbol := 'a' integer ;
    number := integer ('/' integer)? | decimal ;

Binding files hold one ``a<k> = <value>`` per line; ``#`` starts a comment.
"""
import logging
import math
import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from app.models.bracket_models import (
    BracketNode,
    Frac,
    MonomialForm,
    Neg,
    Poly,
    PolynomialForm,
    Prod,
    Sum,
    make_frac,
    make_neg,
    make_prod,
    make_sum,
    poly_of,
)
from app.schemas.run_schema import NumericMode
from app.utils.errors import ExactModeError, ParseError
from app.utils.utils import Scalar

logger = logging.getLogger(__name__)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<decimal>\d+\.\d*|\.\d+)
  | (?P<integer>\d+)
  | (?P<symbol>a\d+)(?![A-Za-z_])
  | (?P<var>n)(?![A-Za-z_0-9])
  | (?P<name>[A-Za-z_]\w*)
  | (?P<op>[-+*/^{}()])
    """,
    re.VERBOSE,
)

FACTOR_START = frozenset({"{", "(", "-", "a<k>", "n", "number"})
END = "end of input"

NAMED_CONSTANTS: dict[str, float] = {
    "sqrt2": math.sqrt(2),
    "sqrt3": math.sqrt(3),
    "sqrt5": math.sqrt(5),
    "pi": math.pi,
    "phi": (1 + math.sqrt(5)) / 2,
}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    offset: int  # byte offset


def _tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        byte_offset = len(text[:pos].encode("utf-8"))
        if match is None:
            raise ParseError(f"unexpected character {text[pos]!r}", byte_offset)
        kind = match.lastgroup
        if kind == "name":
            raise ParseError(
                f"unbound identifier {match.group()!r}", byte_offset, {"a<k>", "n"})
        if kind != "ws":
            value = match.group()
            tokens.append(Token(value if kind == "op" else kind, value, byte_offset))
        pos = match.end()
    tokens.append(Token(END, "", len(text.encode("utf-8"))))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def expect(self, kind: str, expected: set[str] | frozenset[str] | None = None) -> Token:
        if self.current.kind != kind:
            self.fail(expected or {kind})
        return self.advance()

    def fail(self, expected):
        token = self.current
        found = "end of input" if token.kind == END else repr(token.text)
        raise ParseError(f"unexpected {found}", token.offset, expected)

    def parse(self) -> BracketNode:
        node = self.expr()
        if self.current.kind != END:
            self.fail({"+", "-", "*", END})
        return node

    def expr(self) -> BracketNode:
        node = self.term()
        while self.current.kind in ("+", "-"):
            op = self.advance().kind
            right = self.term()
            node = make_sum(node, right if op == "+" else make_neg(right))
        return node

    def term(self) -> BracketNode:
        node = self.factor()
        while self.current.kind == "*":
            self.advance()
            node = make_prod(node, self.factor())
        return node

    def factor(self) -> BracketNode:
        kind = self.current.kind
        if kind == "{":
            self.advance()
            inner = self.expr()
            self.expect("}", {"}", "+", "-", "*"})
            return make_frac(inner)
        if kind == "(":
            self.advance()
            inner = self.expr()
            self.expect(")", {")", "+", "-", "*"})
            return inner
        if kind == "-":
            self.advance()
            return make_neg(self.factor())
        return self.atom()

    def atom(self) -> BracketNode:
        token = self.current
        if token.kind == "symbol":
            self.advance()
            index = int(token.text[1:])
            if index < 1:
                raise ParseError("symbol indices start at 1", token.offset, {"a<k>"})
            return poly_of(MonomialForm(symbols=(index,)))
        if token.kind == "var":
            self.advance()
            power = 1
            if self.current.kind == "^":
                self.advance()
                power = int(self.expect("integer", {"integer"}).text)
            return poly_of(MonomialForm(power=power))
        if token.kind == "integer":
            self.advance()
            value = Fraction(int(token.text))
            if self.current.kind == "/":
                self.advance()
                denominator = self.expect("integer", {"integer"})
                if int(denominator.text) == 0:
                    raise ParseError("zero denominator", denominator.offset, {"integer"})
                value /= int(denominator.text)
            return poly_of(MonomialForm(coefficient=value))
        if token.kind == "decimal":
            self.advance()
            return poly_of(MonomialForm(coefficient=Fraction(token.text)))
        self.fail(FACTOR_START)


def parse_form(text: str) -> BracketNode:
    """Parse DSL text into a canonical bracket form."""
    node = _Parser(text).parse()
    logger.debug("parsed %r: degree_bound=%d", text, node.degree_bound)
    return node


# ================== PRINTING ================

_EXPR, _TERM, _NEG, _ATOM = 1, 2, 3, 4


def _fraction_text(value: Fraction) -> str:
    return str(value.numerator) if value.denominator == 1 else f"{value.numerator}/{value.denominator}"


def _monomial_factors(m: MonomialForm) -> list[str]:
    factors = []
    if m.coefficient != 1 or (not m.symbols and m.power == 0):
        factors.append(_fraction_text(m.coefficient))
    factors.extend(f"a{s}" for s in m.symbols)
    if m.power == 1:
        factors.append("n")
    elif m.power > 1:
        factors.append(f"n^{m.power}")
    return factors


def _monomial_text(m: MonomialForm) -> str:
    return "*".join(_monomial_factors(m))


def _precedence(node: BracketNode) -> int:
    if isinstance(node, Poly):
        terms = node.leaf.terms
        if len(terms) > 1:
            return _EXPR
        if not terms:
            return _ATOM
        single = len(_monomial_factors(terms[0])) == 1
        if terms[0].sign < 0:
            return _NEG if single else _TERM
        return _ATOM if single else _TERM
    if isinstance(node, Sum):
        return _EXPR
    if isinstance(node, Prod):
        return _TERM
    if isinstance(node, Neg):
        return _NEG
    return _ATOM


def _render_poly(form: PolynomialForm) -> str:
    if not form.terms:
        return "0"
    parts = []
    for i, m in enumerate(form.terms):
        body = _monomial_text(m)
        if i == 0:
            parts.append(("-" if m.sign < 0 else "") + body)
        else:
            parts.append((" - " if m.sign < 0 else " + ") + body)
    return "".join(parts)


def _render(node: BracketNode, min_prec: int) -> str:
    if isinstance(node, Poly):
        text = _render_poly(node.leaf)
    elif isinstance(node, Frac):
        text = "{" + _render(node.child, _EXPR) + "}"
    elif isinstance(node, Neg):
        text = "-" + _render(node.child, _NEG)
    elif isinstance(node, Sum):
        left = _render(node.left, _EXPR)
        right = _render(node.right, _TERM)
        if isinstance(node.right, Neg):
            text = f"{left} - {_render(node.right.child, _TERM)}"
        elif isinstance(node.right, Poly) and right.startswith("-"):
            text = f"{left} - {right[1:]}"
        else:
            text = f"{left} + {right}"
    elif isinstance(node, Prod):
        text = f"{_render(node.left, _TERM)}*{_render(node.right, _NEG)}"
    else:
        raise TypeError(f"not a bracket form node: {node!r}")
    if _precedence(node) < min_prec:
        return f"({text})"
    return text


def print_form(node: BracketNode) -> str:
    """Canonical DSL text; ``parse_form(print_form(f)) == f``."""
    if isinstance(node, Poly) and not isinstance(node.leaf, PolynomialForm):
        raise TypeError("print_form expects a bracket form, not a realisation")
    return _render(node, _EXPR)


# ================== BINDINGS ================

_BINDING_LINE = re.compile(r"^\s*a(?P<index>\d+)\s*=\s*(?P<value>\S+)\s*$")
_DECIMAL = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")
_RATIONAL = re.compile(r"^[+-]?\d+/\d+$")


def parse_scalar(text: str, mode: NumericMode = NumericMode.FLOAT) -> Scalar:
    """A decimal, a rational ``p/q`` or a named constant."""
    value = text.strip()
    if value in NAMED_CONSTANTS:
        if mode == NumericMode.EXACT:
            raise ExactModeError(f"named constant {value!r} is irrational; not allowed in exact mode")
        return NAMED_CONSTANTS[value]
    if _RATIONAL.match(value):
        if value.split("/")[1].strip("0") == "":
            raise ParseError("zero denominator", 0, {"p/q"})
        exact = Fraction(value)
    elif _DECIMAL.match(value):
        exact = Fraction(value)
    else:
        raise ParseError(
            f"invalid value {value!r}", 0, {"decimal", "p/q", *NAMED_CONSTANTS})
    return exact if mode == NumericMode.EXACT else float(exact)


def parse_bindings(text: str, mode: NumericMode = NumericMode.FLOAT) -> dict[int, Scalar]:
    binding: dict[int, Scalar] = {}
    byte_offset = 0
    for line in text.splitlines(keepends=True):
        content = line.split("#", 1)[0]
        if content.strip():
            match = _BINDING_LINE.match(content)
            if match is None:
                raise ParseError("malformed binding line", byte_offset, {"a<k> = <value>"})
            try:
                binding[int(match.group("index"))] = parse_scalar(match.group("value"), mode)
            except ParseError as e:
                raise ParseError(
                    f"invalid value {match.group('value')!r}",
                    byte_offset + len(content[: match.start("value")].encode("utf-8")),
                    e.expected,
                ) from e
        byte_offset += len(line.encode("utf-8"))
    return binding


def load_bindings(path: str | Path, mode: NumericMode = NumericMode.FLOAT) -> dict[int, Scalar]:
    return parse_bindings(Path(path).read_text(), mode)
