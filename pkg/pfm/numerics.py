# numerics.py

import json
import logging
import functools
from fractions import Fraction
from dataclasses import dataclass
from typing import Any, Iterable, List, Sequence, Tuple, Union

import mpmath as mp
from mpmath.libmp import to_rational
import sympy

from .errors import NoRationalFound, ParseError


logger = logging.getLogger(__name__)

# Extra digits carried by every computation on top of the requested precision.
GUARD_DIGITS = 10

# Symbol standing for zeta(3)/(2 pi i)^3 in exact raw-form matrices.
UNIT = sympy.Symbol("u")
UNIT_TAG = "zeta3_over_2pii_cubed"
UNIT_EXACT = sympy.zeta(3) / (2 * sympy.pi * sympy.I) ** 3


@dataclass(frozen=True)
class Constants:
    precision: int
    pi: mp.mpf
    zeta3: mp.mpf
    two_pi_i_powers: Tuple[mp.mpc, ...]

    @property
    def unit(self) -> mp.mpc:
        return self.zeta3 / self.two_pi_i_powers[3]


@functools.lru_cache(maxsize=None)
def compute_constants(precision: int) -> Constants:

    """
    Compute pi, zeta(3) and the powers (2 pi i)^k, k = 0..3, at the given decimal precision.

    The values are produced at precision + GUARD_DIGITS and checked against a
    recomputation at twice the precision.

    Parameters:
        precision (int): Decimal digits, at least 20.

    Returns:
        Constants: Immutable bundle of the constants.
    """

    if precision < 20:
        raise ValueError(f"precision must be at least 20, got {precision}")
    with mp.workdps(precision + GUARD_DIGITS):
        pi = +mp.pi
        zeta3 = mp.zeta(3)
        two_pi_i = 2 * pi * mp.mpc(0, 1)
        powers = tuple(two_pi_i ** k for k in range(4))
    with mp.workdps(2 * precision + GUARD_DIGITS):
        reference_pi = +mp.pi
        reference_zeta3 = mp.zeta(3)
        bound = mp.mpf(10) ** (2 - precision)
        if abs(pi - reference_pi) > bound or abs(zeta3 - reference_zeta3) > bound:
            raise ArithmeticError(f"constant self-check failed at precision {precision}")
    logger.debug("constants computed at %d digits", precision)
    return Constants(precision, pi, zeta3, powers)


def working_constants() -> Constants:
    return compute_constants(max(20, mp.mp.dps - GUARD_DIGITS))


def to_mpc(x: Any) -> mp.mpc:
    '''Convert exact rationals, sympy numbers and floats to an mpc at the current precision.'''
    if isinstance(x, mp.mpc):
        return x
    if isinstance(x, (mp.mpf, int, float, complex)):
        return mp.mpc(x)
    if isinstance(x, Fraction):
        return mp.mpc(mp.mpf(x.numerator) / x.denominator)
    if isinstance(x, sympy.Basic):
        if isinstance(x, sympy.Rational):
            return mp.mpc(mp.mpf(int(x.p)) / int(x.q))
        value = sympy.N(x, mp.mp.dps + 5)
        real, imag = value.as_real_imag()
        return mp.mpc(mp.mpf(str(sympy.N(real, mp.mp.dps + 5))), mp.mpf(str(sympy.N(imag, mp.mp.dps + 5))))
    raise TypeError(f"cannot convert {type(x).__name__} to mpc")


def to_fraction(x: Union[mp.mpf, int, Fraction]) -> Fraction:
    '''Exact value of a binary floating point number.'''
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    p, q = to_rational(mp.mpf(x)._mpf_)
    return Fraction(int(p), int(q))


def rational_approximation(x: mp.mpf, max_denominator: int, tol) -> Fraction:

    """
    Best rational approximation with bounded denominator (continued fractions).

    Raises NoRationalFound when the best candidate misses x by tol or more.
    """

    x = mp.mpf(x)
    if abs(x) < tol:
        return Fraction(0)
    candidate = to_fraction(x).limit_denominator(max_denominator)
    miss = abs(x - mp.mpf(candidate.numerator) / candidate.denominator)
    if miss >= tol:
        raise NoRationalFound(f"no p/q with q <= {max_denominator} within {mp.nstr(mp.mpf(tol), 3)} of {mp.nstr(x, 15)}")
    return candidate


def rationalize(x: Any, max_denominator: int = 10**6, tol=1e-20) -> sympy.Expr:

    """
    Recover an exact rational or Gaussian rational from a floating value.

    Parameters:
        x (Any): Value convertible with to_mpc.
        max_denominator (int): Largest admissible denominator per part.
        tol (float): Largest admissible error per part; smaller imaginary parts snap to 0.

    Returns:
        sympy.Expr: A sympy Rational, or p/q + I*r/s for Gaussian results.
    """

    if tol <= 0:
        raise ValueError("tol must be positive")
    value = to_mpc(x)
    real = rational_approximation(value.real, max_denominator, tol)
    imag = rational_approximation(value.imag, max_denominator, tol)
    result = sympy.Rational(real.numerator, real.denominator)
    if imag:
        result += sympy.I * sympy.Rational(imag.numerator, imag.denominator)
    return result


def rationalize_matrix(M: mp.matrix, max_denominator: int = 10**6, tol=1e-20) -> sympy.ImmutableMatrix:
    entries = [[rationalize(M[i, j], max_denominator, tol) for j in range(M.cols)] for i in range(M.rows)]
    return sympy.ImmutableMatrix(entries)


def evaluate_exact(M: sympy.MatrixBase) -> mp.matrix:
    '''Numerical value of an exact matrix, substituting the scaled unit, at the current precision.'''
    unit = working_constants().unit
    out = mp.matrix(M.rows, M.cols)
    for i in range(M.rows):
        for j in range(M.cols):
            entry = sympy.expand(M[i, j])
            if entry.has(UNIT):
                poly = sympy.Poly(entry, UNIT)
                value = mp.mpc(0)
                for (power,), coeff in poly.terms():
                    value += to_mpc(coeff) * unit ** power
                out[i, j] = value
            else:
                out[i, j] = to_mpc(entry)
    return out


def taylor_shift(coefficients: Sequence[Any], x0: Any) -> List[Any]:
    '''Coefficients of p(x0 + t) in powers of t, given p in ascending powers.'''
    c = list(coefficients)
    n = len(c)
    for i in range(n - 1):
        for j in range(n - 2, i - 1, -1):
            c[j] += x0 * c[j + 1]
    return c


def max_abs(M: mp.matrix) -> mp.mpf:
    return max((abs(M[i, j]) for i in range(M.rows) for j in range(M.cols)), default=mp.mpf(0))


def max_entry_diff(A: mp.matrix, B: mp.matrix) -> mp.mpf:
    return max_abs(A - B)


def abs_matrix(M: mp.matrix) -> mp.matrix:
    '''Entrywise absolute values, for componentwise error bounds.'''
    out = mp.matrix(M.rows, M.cols)
    for i in range(M.rows):
        for j in range(M.cols):
            out[i, j] = abs(M[i, j])
    return out


def identity(n: int) -> mp.matrix:
    return mp.eye(n)


def matrix_to_json(M: Union[mp.matrix, sympy.MatrixBase], digits: int = 30) -> dict:
    '''Matrix JSON: floating entries as decimal re/im pairs, exact entries as "p/q" strings.'''
    if isinstance(M, sympy.MatrixBase):
        scaled = any(sympy.sympify(e).has(UNIT) for e in M)
        rows = []
        for i in range(M.rows):
            row = []
            for j in range(M.cols):
                entry = sympy.expand(M[i, j])
                if scaled:
                    poly = sympy.Poly(entry, UNIT)
                    coeffs = [str(poly.coeff_monomial(UNIT ** p)) for p in range(poly.degree() + 1)] if entry != 0 else ["0"]
                    row.append(coeffs)
                else:
                    row.append(str(entry))
            rows.append(row)
        data = {"rows": M.rows, "cols": M.cols, "entries": rows}
        if scaled:
            data["unit"] = UNIT_TAG
        return data
    entries = [[{"re": mp.nstr(M[i, j].real, digits), "im": mp.nstr(mp.mpc(M[i, j]).imag, digits)}
                for j in range(M.cols)] for i in range(M.rows)]
    return {"rows": M.rows, "cols": M.cols, "entries": entries}


def _exact_literal(text: Any) -> sympy.Expr:
    if isinstance(text, bool):
        raise ParseError(f"invalid matrix entry {text!r}")
    if isinstance(text, int):
        return sympy.Integer(text)
    try:
        value = sympy.Rational(Fraction(str(text)))
    except (ValueError, ZeroDivisionError) as e:
        raise ParseError(f"invalid matrix entry {text!r}") from e
    return value


def matrix_from_json(data: Union[str, dict]) -> Union[mp.matrix, sympy.ImmutableMatrix]:
    if isinstance(data, str):
        data = json.loads(data)
    try:
        entries = data["entries"]
    except (KeyError, TypeError) as e:
        raise ParseError("matrix JSON needs an 'entries' array") from e
    if entries and isinstance(entries[0][0], dict):
        M = mp.matrix(len(entries), len(entries[0]))
        for i, row in enumerate(entries):
            for j, e in enumerate(row):
                M[i, j] = mp.mpc(mp.mpf(e["re"]), mp.mpf(e.get("im", "0")))
        return M
    scaled = data.get("unit") == UNIT_TAG
    rows = []
    for row in entries:
        out = []
        for e in row:
            if scaled and isinstance(e, list):
                out.append(sum((_exact_literal(c) * UNIT ** p for p, c in enumerate(e)), sympy.Integer(0)))
            else:
                out.append(_exact_literal(e))
        rows.append(out)
    return sympy.ImmutableMatrix(rows)


def exact_matrix(rows: Iterable[Iterable[Any]]) -> sympy.ImmutableMatrix:
    '''Exact matrix from nested literals such as "1/3", 5 or Fraction(1, 2).'''
    return sympy.ImmutableMatrix([[_exact_literal(e) for e in row] for row in rows])
