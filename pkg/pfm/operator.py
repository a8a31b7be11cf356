# operator.py

import re
import json
import logging
import functools
from fractions import Fraction
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import mpmath as mp
import sympy
from sympy.parsing.sympy_parser import parse_expr, standard_transformations, convert_xor
from sympy.functions.combinatorial.numbers import stirling

from .errors import (
    ParseError,
    ParameterError,
    IrregularSingularityError,
    ExponentRecognitionError,
    RootFindingError,
    NoRationalFound,
)
from .numerics import to_mpc, taylor_shift, rational_approximation


logger = logging.getLogger(__name__)

THETA, Z = sympy.symbols("theta z")

NEG_INF = float("-inf")

# Exponents are snapped to rationals with at most this denominator.
SNAP_DENOMINATOR = 60
SNAP_TOLERANCE = 1e-10

_LITERAL = re.compile(r"^\s*[+-]?\d+\s*(/\s*\d+\s*)?$")


@dataclass(frozen=True)
class RationalPoly:

    """Polynomial in z with exact rational coefficients, ascending powers, no trailing zeros."""

    coefficients: Tuple[Fraction, ...] = ()

    def __post_init__(self):
        coeffs = [Fraction(c) for c in self.coefficients]
        while coeffs and coeffs[-1] == 0:
            coeffs.pop()
        object.__setattr__(self, "coefficients", tuple(coeffs))

    @property
    def degree(self) -> Union[int, float]:
        return len(self.coefficients) - 1 if self.coefficients else NEG_INF

    @property
    def is_zero(self) -> bool:
        return not self.coefficients

    def coefficient(self, power: int) -> Fraction:
        if 0 <= power < len(self.coefficients):
            return self.coefficients[power]
        return Fraction(0)

    def __call__(self, x: Any) -> Any:
        value = 0
        for c in reversed(self.coefficients):
            value = value * x + c
        return value

    def as_expr(self, var: sympy.Symbol = Z) -> sympy.Expr:
        return sum((sympy.Rational(c.numerator, c.denominator) * var ** i for i, c in enumerate(self.coefficients)), sympy.Integer(0))

    @classmethod
    def from_expr(cls, expr: sympy.Expr, var: sympy.Symbol = Z) -> "RationalPoly":
        poly = sympy.Poly(expr, var, domain=sympy.QQ)
        coeffs = [Fraction(int(c.p), int(c.q)) for c in reversed(poly.all_coeffs())]
        return cls(tuple(coeffs))


@dataclass(frozen=True)
class Operator:

    """
    Linear differential operator sum_i p_i(z) theta^i with theta = z d/dz.

    Operators are stored normalized: every p_i is divided by the lowest
    nonzero coefficient of p_n, so equal operators compare equal whatever
    scalar multiple they were given as.

    Parameters:
        order (int): Order n of the operator, at least 2.
        theta_coeffs (Tuple[RationalPoly, ...]): p_0 .. p_n.
    """

    order: int
    theta_coeffs: Tuple[RationalPoly, ...]

    def __post_init__(self):
        if self.order < 2:
            raise ParseError(f"operator order must be at least 2, got {self.order}")
        if len(self.theta_coeffs) != self.order + 1:
            raise ParseError(f"expected {self.order + 1} theta coefficients, got {len(self.theta_coeffs)}")
        if self.theta_coeffs[-1].is_zero:
            raise ParseError("leading theta coefficient is the zero polynomial")
        unit = next(c for c in self.theta_coeffs[-1].coefficients if c != 0)
        if unit != 1:
            scaled = tuple(RationalPoly(tuple(c / unit for c in p.coefficients)) for p in self.theta_coeffs)
            object.__setattr__(self, "theta_coeffs", scaled)

    @property
    def leading(self) -> RationalPoly:
        return self.theta_coeffs[-1]

    @property
    def z_degree(self) -> int:
        return max(int(p.degree) for p in self.theta_coeffs if not p.is_zero)

    def as_expr(self) -> sympy.Expr:
        return sum((p.as_expr() * THETA ** i for i, p in enumerate(self.theta_coeffs)), sympy.Integer(0))

    def derivative_form(self) -> Tuple[Tuple[Fraction, ...], ...]:
        '''Coefficients P_k(z) of d^k/dz^k, using theta^i = sum_k S(i,k) z^k D^k.'''
        n = self.order
        out = []
        for k in range(n + 1):
            poly = [Fraction(0)] * (self.z_degree + k + 1)
            for i in range(k, n + 1):
                s = int(stirling(i, k))
                if not s:
                    continue
                for j, c in enumerate(self.theta_coeffs[i].coefficients):
                    poly[j + k] += s * c
            out.append(RationalPoly(tuple(poly)).coefficients)
        return tuple(out)

    @classmethod
    def from_expr(cls, expr: sympy.Expr) -> "Operator":
        expr = sympy.sympify(expr)
        if expr.atoms(sympy.Float):
            raise ParseError("floating point literals are not allowed in operators")
        extra = expr.free_symbols - {THETA, Z}
        if extra:
            raise ParseError(f"unknown symbols {sorted(map(str, extra))}")
        numerator, denominator = sympy.fraction(sympy.together(expr))
        if denominator.has(THETA):
            raise ParseError("theta may not appear in a denominator")
        try:
            poly = sympy.Poly(sympy.expand(numerator), THETA, Z)
        except sympy.PolynomialError as e:
            raise ParseError(f"not a polynomial operator: {e}") from e
        if not (poly.domain.is_ZZ or poly.domain.is_QQ):
            raise ParseError(f"coefficients must be rational, got domain {poly.domain}")
        order = poly.degree(THETA)
        table: Dict[int, Dict[int, Fraction]] = {}
        for (i, j), c in poly.terms():
            c = sympy.Rational(c)
            table.setdefault(i, {})[j] = Fraction(int(c.p), int(c.q))
        coeffs = []
        for i in range(order + 1):
            row = table.get(i, {})
            size = max(row) + 1 if row else 0
            coeffs.append(RationalPoly(tuple(row.get(j, Fraction(0)) for j in range(size))))
        return cls(order, tuple(coeffs))


def _literal(value: Any) -> Fraction:
    if isinstance(value, bool):
        raise ParseError(f"invalid coefficient literal {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if not isinstance(value, str) or not _LITERAL.match(value):
        raise ParseError(f"coefficient literal {value!r} is not an exact rational")
    try:
        return Fraction(value.replace(" ", ""))
    except ZeroDivisionError as e:
        raise ParseError(f"zero denominator in {value!r}") from e


def parse_operator(text: str) -> Operator:

    """
    Parse the JSON operator format.

    Either {"order": n, "theta": [[p_0 coefficients], ..., [p_n coefficients]]}
    with coefficient strings "p/q", or {"expression": "..."} holding a polynomial
    in theta and z written with z to the left of theta.

    Parameters:
        text (str): JSON document.

    Returns:
        Operator: The parsed operator.
    """

    try:
        data = json.loads(text)
    except (json.JSONDecodeError, TypeError) as e:
        raise ParseError(f"malformed operator JSON: {e}") from e
    if not isinstance(data, dict):
        raise ParseError("operator JSON must be an object")

    if "expression" in data:
        source = data["expression"]
        if not isinstance(source, str):
            raise ParseError("'expression' must be a string")
        try:
            expr = parse_expr(source, local_dict={"theta": THETA, "z": Z},
                              transformations=standard_transformations + (convert_xor,))
        except (SyntaxError, TypeError, ValueError, sympy.SympifyError) as e:
            raise ParseError(f"cannot read expression {source!r}: {e}") from e
        op = Operator.from_expr(expr)
        if "order" in data and data["order"] != op.order:
            raise ParseError(f"declared order {data['order']} but expression has order {op.order}")
        return op

    try:
        order = data["order"]
        theta = data["theta"]
    except KeyError as e:
        raise ParseError(f"missing key {e}") from e
    if not isinstance(order, int) or not isinstance(theta, list):
        raise ParseError("'order' must be an integer and 'theta' an array")
    if not all(isinstance(row, list) for row in theta):
        raise ParseError("each theta coefficient must be an array of literals")
    coeffs = tuple(RationalPoly(tuple(_literal(c) for c in row)) for row in theta)
    return Operator(order, coeffs)


def render_operator(op: Operator) -> str:
    theta = [[str(c) for c in p.coefficients] for p in op.theta_coeffs]
    return json.dumps({"order": op.order, "theta": theta})


def _fraction(x: Any, name: str) -> Fraction:
    try:
        return Fraction(str(x)) if not isinstance(x, Fraction) else x
    except (ValueError, ZeroDivisionError) as e:
        raise ParameterError(f"{name}={x!r} is not a rational number") from e


def from_hypergeometric4(A: Any, B: Any, C: Any) -> Operator:
    '''theta^4 - C z (theta+A)(theta+1-A)(theta+B)(theta+1-B)'''
    A, B, C = _fraction(A, "A"), _fraction(B, "B"), _fraction(C, "C")
    if not (0 < A < 1 and 0 < B < 1):
        raise ParameterError(f"A and B must lie in (0, 1), got A={A}, B={B}")
    if C == 0:
        raise ParameterError("C must be nonzero")
    a, b, c = (sympy.Rational(x.numerator, x.denominator) for x in (A, B, C))
    expr = THETA ** 4 - c * Z * (THETA + a) * (THETA + 1 - a) * (THETA + b) * (THETA + 1 - b)
    return Operator.from_expr(sympy.expand(expr))


def from_hypergeometric5(A: Any, B: Any, C: Any) -> Operator:
    '''theta^5 - C z (theta+1/2)(theta+A)(theta+1-A)(theta+B)(theta+1-B)'''
    A, B, C = _fraction(A, "A"), _fraction(B, "B"), _fraction(C, "C")
    if not (0 < A < 1 and 0 < B < 1):
        raise ParameterError(f"A and B must lie in (0, 1), got A={A}, B={B}")
    if C == 0:
        raise ParameterError("C must be nonzero")
    a, b, c = (sympy.Rational(x.numerator, x.denominator) for x in (A, B, C))
    half = sympy.Rational(1, 2)
    expr = THETA ** 5 - c * Z * (THETA + half) * (THETA + a) * (THETA + 1 - a) * (THETA + b) * (THETA + 1 - b)
    return Operator.from_expr(sympy.expand(expr))


def to_monic_derivative_form(op: Operator) -> Tuple[sympy.Expr, ...]:
    '''Rational functions r_{n-1}, ..., r_0 with y^(n) + r_{n-1} y^(n-1) + ... + r_0 y = 0.'''
    P = [RationalPoly(c).as_expr() for c in op.derivative_form()]
    lead = P[-1]
    return tuple(sympy.cancel(P[k] / lead) for k in range(op.order - 1, -1, -1))


# ----------------------------------------------------------------------------
# Points


@dataclass(frozen=True)
class Point:

    """
    Expansion point in the Riemann sphere.

    Parameters:
        value (Fraction | mpc | None): Location; None at infinity.
        exact (sympy.Expr, optional): Closed form of an irrational location.
        minpoly (Tuple[Fraction, ...], optional): Ascending coefficients of the
            irreducible factor the location is a root of, used for refinement.
        multiplicity (int): Vanishing order of the leading theta coefficient here.
        infinity (bool): True for the point at infinity.
    """

    value: Any = None
    exact: Optional[sympy.Expr] = None
    minpoly: Optional[Tuple[Fraction, ...]] = None
    multiplicity: int = 0
    infinity: bool = False

    @classmethod
    def at(cls, x: Any) -> "Point":
        if isinstance(x, Point):
            return x
        if isinstance(x, str) and x.strip() in ("inf", "oo", "infinity", "∞"):
            return INFINITY
        if isinstance(x, (int, Fraction, str)):
            return cls(Fraction(x))
        return cls(to_mpc(x))

    @property
    def is_rational(self) -> bool:
        return isinstance(self.value, Fraction)

    @property
    def is_origin(self) -> bool:
        return self.is_rational and self.value == 0

    def approx(self) -> mp.mpc:
        '''Location at the current working precision.'''
        if self.infinity:
            raise ValueError("the point at infinity has no finite location")
        if self.is_rational:
            return to_mpc(self.value)
        if self.exact is not None:
            return to_mpc(self.exact)
        if self.minpoly is not None:
            return _newton_refine(self.minpoly, to_mpc(self.value))
        return to_mpc(self.value)

    def label(self) -> str:
        if self.infinity:
            return "oo"
        if self.is_rational:
            return str(self.value)
        if self.exact is not None:
            return str(self.exact)
        return mp.nstr(self.value, 12)

    def __str__(self):
        return self.label()


INFINITY = Point(infinity=True)
ORIGIN = Point(Fraction(0))


def _newton_refine(coeffs: Sequence[Fraction], x: mp.mpc, steps: int = 60) -> mp.mpc:
    p = [to_mpc(c) for c in coeffs]
    dp = [k * p[k] for k in range(1, len(p))]
    eps = mp.mpf(10) ** (5 - mp.mp.dps)
    for _ in range(steps):
        fx = mp.polyval(p[::-1], x)
        dfx = mp.polyval(dp[::-1], x)
        if dfx == 0:
            break
        step = fx / dfx
        x -= step
        if abs(step) <= eps * max(1, abs(x)):
            return x
    if abs(mp.polyval(p[::-1], x)) > mp.mpf(10) ** (10 - mp.mp.dps) * max(1, abs(x)) ** (len(p) - 1):
        raise RootFindingError(f"Newton refinement did not converge near {mp.nstr(x, 10)}")
    return x


@dataclass(frozen=True)
class SingularPoint:
    point: Point
    exponents: Tuple[Fraction, ...]
    classification: str

    @property
    def location(self) -> Point:
        return self.point


def classify_exponents(exponents: Sequence[Fraction], order: int) -> str:
    ex = sorted(exponents)
    if not ex:
        return "irregular"
    if all(e == 0 for e in ex):
        return "maximally-unipotent"
    if order == 4 and ex == [0, 1, 1, 2]:
        return "conifold"
    if all(e.denominator == 1 and e >= 0 for e in ex) and len(set(ex)) == len(ex):
        return "apparent-candidate"
    return "general"


# ----------------------------------------------------------------------------
# Local form sum_j t^j Q_j(theta_t)


@dataclass(frozen=True)
class LocalOperator:

    """
    The operator around an expansion point, written as sum_j t^j Q_j(theta_t).

    polys[j] holds the ascending theta coefficients of Q_j, normalized so that
    Q_0 is monic of degree order. Entries are Fractions when exact, else mpc.
    """

    point: Point
    order: int
    polys: Tuple[Tuple[Any, ...], ...]
    exact: bool

    @property
    def indicial(self) -> Tuple[Any, ...]:
        return self.polys[0]


@functools.lru_cache(maxsize=None)
def _falling(k: int) -> Tuple[int, ...]:
    '''Ascending coefficients of theta (theta-1) ... (theta-k+1).'''
    poly = [1]
    for m in range(k):
        nxt = [0] * (len(poly) + 1)
        for i, c in enumerate(poly):
            nxt[i + 1] += c
            nxt[i] -= m * c
        poly = nxt
    return tuple(poly)


def _is_zero(x: Any, exact: bool, scale) -> bool:
    if exact:
        return x == 0
    return abs(x) <= mp.mpf(10) ** (-(mp.mp.dps // 2)) * max(1, scale)


def local_operator(op: Operator, point: Point) -> LocalOperator:
    n = op.order
    if point.infinity:
        D = op.z_degree
        if op.leading.degree != D:
            raise IrregularSingularityError("infinity is an irregular singular point")
        polys = []
        for j in range(D + 1):
            q = [Fraction(0)] * (n + 1)
            for i, p in enumerate(op.theta_coeffs):
                c = p.coefficient(D - j)
                if c:
                    # (-theta_w)^i
                    q[i] += c * (-1) ** i
            polys.append(q)
        return _normalize(point, n, polys, exact=True)

    exact = point.is_rational
    x0 = point.value if exact else point.approx()
    P = op.derivative_form()
    if exact:
        shifted = [taylor_shift(list(Pk), x0) for Pk in P]
    else:
        shifted = [taylor_shift([to_mpc(c) for c in Pk], x0) for Pk in P]

    scale = max((abs(c) for row in shifted for c in row), default=1)
    lead = shifted[n]
    if exact:
        v = next(i for i, c in enumerate(lead) if c != 0)
    else:
        v = point.multiplicity
        for i in range(v):
            lead[i] = mp.mpc(0)

    polys: Dict[int, List[Any]] = {}
    zero = Fraction(0) if exact else mp.mpc(0)
    for k in range(n + 1):
        power = n - v - k
        for idx, c in enumerate(shifted[k]):
            j = idx + power
            if j < 0:
                if not _is_zero(c, exact, scale):
                    raise IrregularSingularityError(f"irregular singular point at {point.label()}")
                continue
            if exact and c == 0:
                continue
            q = polys.setdefault(j, [zero] * (n + 1))
            for m, f in enumerate(_falling(k)):
                q[m] += c * f
    top = max(polys)
    return _normalize(point, n, [polys.get(j, [zero] * (n + 1)) for j in range(top + 1)], exact)


def _normalize(point: Point, n: int, polys: List[List[Any]], exact: bool) -> LocalOperator:
    lead = polys[0][n]
    if (exact and lead == 0) or (not exact and abs(lead) == 0):
        raise IrregularSingularityError(f"indicial polynomial at {point.label()} has degree below the order")
    out = [tuple(c / lead for c in q) for q in polys]
    while len(out) > 1 and all(_is_zero(c, exact, 1) for c in out[-1]):
        out.pop()
    return LocalOperator(point, n, tuple(out), exact)


def indicial_roots(local: LocalOperator) -> Tuple[Fraction, ...]:
    '''Roots of Q_0 with multiplicity, as exact rationals, sorted ascending.'''
    q = local.indicial
    n = local.order
    if local.exact:
        poly = sympy.Poly([sympy.Rational(c.numerator, c.denominator) for c in reversed(q)], THETA)
        roots = poly.ground_roots() if poly.degree() > 0 else {}
        if sum(roots.values()) != n:
            raise ExponentRecognitionError(f"exponents at {local.point.label()} are not all rational")
        out = []
        for r, m in roots.items():
            out.extend([Fraction(int(r.p), int(r.q))] * m)
        return tuple(sorted(out))

    try:
        roots = mp.polyroots([to_mpc(c) for c in reversed(q)], maxsteps=400, extraprec=4 * mp.mp.prec)
    except mp.libmp.NoConvergence as e:
        raise ExponentRecognitionError(f"indicial roots at {local.point.label()} did not converge") from e
    out = []
    for r in roots:
        r = mp.mpc(r)
        tol = SNAP_TOLERANCE * max(1, abs(r))
        try:
            real = rational_approximation(r.real, SNAP_DENOMINATOR, tol)
        except NoRationalFound as e:
            raise ExponentRecognitionError(f"exponent {mp.nstr(r, 15)} at {local.point.label()} is not recognizably rational") from e
        if abs(r.imag) >= tol:
            raise ExponentRecognitionError(f"exponent {mp.nstr(r, 15)} at {local.point.label()} is not real")
        out.append(real)
    return tuple(sorted(out))


def indicial_exponents(op: Operator, point: Any) -> Tuple[Fraction, ...]:
    '''Local exponents of op at point (a Point, a rational, or "oo").'''
    point = Point.at(point)
    if not point.infinity and not point.is_rational and point.multiplicity == 0:
        for s in singular_points(op):
            if not s.point.infinity and not s.point.is_rational and abs(s.point.approx() - point.approx()) < mp.mpf(10) ** (-(mp.mp.dps // 2)):
                point = s.point
                break
    return indicial_roots(local_operator(op, point))


# ----------------------------------------------------------------------------
# Singular points


def _factor_multiplicities(poly: sympy.Poly) -> Dict[sympy.Poly, int]:
    _, factors = sympy.factor_list(poly)
    return {f.to_field().monic(): m for f, m in factors}


def _roots_of_factor(factor: sympy.Poly, multiplicity: int) -> List[Point]:
    coeffs = tuple(Fraction(int(c.p), int(c.q)) for c in reversed(factor.monic().all_coeffs()))
    degree = factor.degree()
    if degree == 1:
        return [Point(-coeffs[0] / coeffs[1], multiplicity=multiplicity)]
    if degree == 2:
        points = []
        for r in sympy.roots(factor, multiple=True):
            points.append(Point(to_mpc(r), exact=r, minpoly=coeffs, multiplicity=multiplicity))
        return points
    try:
        with mp.workdps(mp.mp.dps + 20):
            approx = mp.polyroots([to_mpc(c) for c in reversed(coeffs)], maxsteps=400, extraprec=4 * mp.mp.prec)
    except mp.libmp.NoConvergence as e:
        raise RootFindingError(f"root finding failed for {factor.as_expr()}") from e
    points = []
    for r in approx:
        r = _newton_refine(coeffs, mp.mpc(r))
        if abs(r.imag) < mp.mpf(10) ** (-(mp.mp.dps // 2)) * max(1, abs(r)):
            r = mp.mpc(r.real, 0)
        points.append(Point(r, minpoly=coeffs, multiplicity=multiplicity))
    return points


def _sort_key(point: Point):
    if point.infinity:
        return (2, 0, 0)
    z = point.approx()
    return (0 if point.is_origin else 1, float(abs(z)), float(mp.arg(z)))


def singular_points(op: Operator) -> Tuple[SingularPoint, ...]:
    return _singular_points(op, mp.mp.dps)


@functools.lru_cache(maxsize=64)
def _singular_points(op: Operator, dps: int) -> Tuple[SingularPoint, ...]:

    """
    Finite singular points are the poles of the monic d/dz coefficients; infinity is always included.
    """

    denominator = sympy.Integer(1)
    for r in to_monic_derivative_form(op):
        denominator = sympy.lcm(denominator, sympy.denom(r))
    denominator = sympy.Poly(denominator, Z)

    leading = sympy.Poly(op.leading.as_expr(), Z)
    in_leading = _factor_multiplicities(leading) if leading.degree() > 0 else {}

    points: List[Point] = []
    for factor in _factor_multiplicities(denominator):
        points.extend(_roots_of_factor(factor, in_leading.get(factor, 0)))
    points.append(INFINITY)

    result = []
    for point in sorted(points, key=_sort_key):
        try:
            exponents = indicial_roots(local_operator(op, point))
            kind = classify_exponents(exponents, op.order)
        except IrregularSingularityError:
            exponents, kind = (), "irregular"
        result.append(SingularPoint(point, exponents, kind))
        logger.debug("singular point %s: exponents %s (%s)", point.label(), [str(e) for e in exponents], kind)
    return tuple(result)


def distance_to_singularities(op: Operator, z: mp.mpc, exclude: Optional[Point] = None) -> mp.mpf:
    '''Distance from z to the nearest finite singular point other than exclude.'''
    best = mp.inf
    for s in singular_points(op):
        if s.point.infinity or s.point == exclude:
            continue
        best = min(best, abs(s.point.approx() - z))
    return best
