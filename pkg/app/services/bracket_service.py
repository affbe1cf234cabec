import logging
from fractions import Fraction

import numpy as np

from app.models.bracket_models import (
    BracketNode,
    Frac,
    Neg,
    Poly,
    PolynomialForm,
    Prod,
    RealPolynomial,
    Sum,
)
from app.schemas.run_schema import NumericMode
from app.services.dsl_service import parse_form
from app.utils.errors import ExactModeError, MissingBindingError
from app.utils.utils import Scalar, frac, frac_array, int_part

logger = logging.getLogger(__name__)

__all__ = [
    "frac",
    "int_part",
    "mul_poly_forms",
    "add_poly_forms",
    "degree_bound",
    "symbols_of",
    "realize",
    "eval_many",
    "eval_at",
    "numeric_mode_of",
    "components",
    "nested_bracket_form",
    "generalized_family_form",
]


def mul_poly_forms(a: PolynomialForm, b: PolynomialForm) -> PolynomialForm:
    return a * b


def add_poly_forms(a: PolynomialForm, b: PolynomialForm) -> PolynomialForm:
    return a + b


def degree_bound(f: BracketNode) -> int:
    return f.degree_bound


def symbols_of(f: BracketNode) -> set[int]:
    if isinstance(f, Poly):
        return set(f.leaf.symbols) if isinstance(f.leaf, PolynomialForm) else set()
    if isinstance(f, (Neg, Frac)):
        return symbols_of(f.child)
    return symbols_of(f.left) | symbols_of(f.right)


def _realize_leaf(form: PolynomialForm, binding: dict[int, Scalar]) -> RealPolynomial:
    terms = []
    for m in form.terms:
        value: Scalar = m.coefficient
        for s in m.symbols:
            if s not in binding:
                raise MissingBindingError(s)
            value = value * binding[s]
        terms.append((value if m.sign > 0 else -value, m.power))
    return RealPolynomial(tuple(terms))


def realize(f: BracketNode, binding: dict[int, Scalar]) -> BracketNode:
    """Substitute the bound scalars for the symbols, keeping the tree shape."""
    if isinstance(f, Poly):
        if isinstance(f.leaf, RealPolynomial):
            return f
        return Poly(_realize_leaf(f.leaf, binding))
    if isinstance(f, Neg):
        return Neg(realize(f.child, binding))
    if isinstance(f, Frac):
        return Frac(realize(f.child, binding))
    if isinstance(f, Sum):
        return Sum(realize(f.left, binding), realize(f.right, binding))
    if isinstance(f, Prod):
        return Prod(realize(f.left, binding), realize(f.right, binding))
    raise TypeError(f"not a bracket node: {f!r}")


def _check_exact(p: BracketNode):
    if isinstance(p, Poly):
        leaf = p.leaf
        if isinstance(leaf, PolynomialForm):
            if leaf.symbols:
                raise MissingBindingError(min(leaf.symbols))
        elif not leaf.exact:
            raise ExactModeError("irrational binding present in exact mode")
    elif isinstance(p, (Neg, Frac)):
        _check_exact(p.child)
    else:
        _check_exact(p.left)
        _check_exact(p.right)


def _leaf_terms(leaf) -> list[tuple[Scalar, int]]:
    if isinstance(leaf, RealPolynomial):
        return list(leaf.terms)
    if leaf.symbols:
        raise MissingBindingError(min(leaf.symbols))
    return [(m.coefficient * m.sign, m.power) for m in leaf.terms]


def _eval_node(p: BracketNode, ns: np.ndarray, exact: bool) -> np.ndarray:
    if isinstance(p, Poly):
        total = np.zeros(len(ns), dtype=object if exact else float)
        for coefficient, power in _leaf_terms(p.leaf):
            c = coefficient if exact else float(coefficient)
            total = total + c * ns**power
        return total
    if isinstance(p, Neg):
        return -_eval_node(p.child, ns, exact)
    if isinstance(p, Frac):
        return frac_array(_eval_node(p.child, ns, exact))
    if isinstance(p, Sum):
        return _eval_node(p.left, ns, exact) + _eval_node(p.right, ns, exact)
    return _eval_node(p.left, ns, exact) * _eval_node(p.right, ns, exact)


def eval_many(p: BracketNode, ns, mode: NumericMode = NumericMode.FLOAT) -> np.ndarray:
    """Evaluate at every n in ``ns``.

    Float mode returns a float64 array; exact mode returns an object array of
    Fractions and refuses float coefficients.
    """
    exact = NumericMode(mode) == NumericMode.EXACT
    if exact:
        _check_exact(p)
        index = np.array([int(n) for n in np.ravel(ns)], dtype=object)
        values = _eval_node(p, index, True)
        return np.array([Fraction(v) for v in values], dtype=object)
    index = np.asarray(ns, dtype=float).ravel()
    return _eval_node(p, index, False)


def numeric_mode_of(p: BracketNode) -> NumericMode:
    """EXACT when every coefficient is rational, FLOAT otherwise."""
    try:
        _check_exact(p)
    except ExactModeError:
        return NumericMode.FLOAT
    return NumericMode.EXACT


def eval_at(p: BracketNode, n: int, mode: NumericMode = NumericMode.FLOAT) -> Scalar:
    value = eval_many(p, [n], mode)[0]
    return value if isinstance(value, Fraction) else float(value)


def components(p: BracketNode) -> list[BracketNode]:
    """Bracket components: the inner expressions nu of every {nu}, post-order."""
    found: list[BracketNode] = []

    def visit(node: BracketNode):
        if isinstance(node, Poly):
            return
        if isinstance(node, (Neg, Frac)):
            visit(node.child)
            if isinstance(node, Frac) and node.child not in found:
                found.append(node.child)
            return
        visit(node.left)
        visit(node.right)

    visit(p)
    return found


def nested_bracket_form(k: int) -> BracketNode:
    """phi_{k-1}(n) = a_{k-1} n {a_{k-2} n {... {a1 n}...}}, expected to have U^k norm bounded below."""
    if k < 2:
        raise ValueError("the nested family starts at k = 2")
    text = "a1*n"
    for j in range(2, k):
        text = f"a{j}*n*{{{text}}}"
    return parse_form(text)


def generalized_family_form(m: int, r: int, s: int, t: int, outer: bool = False) -> tuple[BracketNode, int]:
    """gamma n^t {beta n^r prod_i {alpha_i n}}^s and its predicted uniformity index.

    Symbols: a1..am are the alphas, a(m+1) is beta, a(m+2) is gamma. With
    ``outer`` the whole expression is bracketed and multiplied by
    a(m+3) n, which raises the index by one.
    """
    if m < 0 or r < 0 or s < 1 or t < 0:
        raise ValueError("need m, r, t >= 0 and s >= 1")

    def n_power(e: int) -> str:
        return "" if e == 0 else ("*n" if e == 1 else f"*n^{e}")

    inner = f"a{m + 1}" + n_power(r) + "".join(f"*{{a{i}*n}}" for i in range(1, m + 1))
    text = f"a{m + 2}" + n_power(t) + "".join(f"*{{{inner}}}" for _ in range(s))
    index = s * (r + m) + t + 1
    if outer:
        text = f"a{m + 3}*n*{{{text}}}"
        index += 1
    logger.debug("generalized family %s has predicted index %d", text, index)
    return parse_form(text), index

