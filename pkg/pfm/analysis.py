# analysis.py

import math
import logging
from fractions import Fraction
from dataclasses import dataclass
from functools import reduce
from typing import Any, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import mpmath as mp
import numpy as np
import sympy

from .errors import NonIntegerInvariant, NotInLevelFamily, NotRawForm, ParameterError
from .numerics import UNIT, evaluate_exact, max_abs, max_entry_diff, rationalize_matrix, to_mpc, working_constants


logger = logging.getLogger(__name__)

Matrix = Union[mp.matrix, sympy.MatrixBase]

# Largest admissible distance of an invariant from the nearest integer.
ROUNDING_TOLERANCE = 1e-8
# Largest m tried when matching factors against cyclotomic polynomials.
MAX_CYCLOTOMIC = 30


# ----------------------------------------------------------------------------
# Invariants and the raw-form pair


@dataclass(frozen=True)
class Invariants:

    """
    Topological data read off the conifold monodromy.

    Parameters:
        d (int): H^3, at least 1.
        c2H (int): c_2 . H.
        c3 (int): Euler characteristic c_3.
        residual (float): Largest mismatch against the raw-form pattern when extracted.
    """

    d: int
    c2H: int
    c3: int
    residual: float = 0.0

    def __post_init__(self):
        if self.d < 1:
            raise NotRawForm(f"H^3 must be positive, got {self.d}")

    @property
    def b(self) -> Fraction:
        return Fraction(self.c2H, 24)

    @property
    def k(self) -> Fraction:
        return Fraction(self.d, 6) + Fraction(self.c2H, 12)

    @property
    def a(self) -> sympy.Expr:
        '''c3 zeta(3)/(2 pi i)^3 as a multiple of the scaled unit.'''
        return self.c3 * UNIT

    def as_tuple(self) -> Tuple[int, int, int]:
        return (self.d, self.c2H, self.c3)


def _q(x: Fraction) -> sympy.Rational:
    return sympy.Rational(x.numerator, x.denominator)


def theorem1_matrix(inv: Invariants) -> Tuple[sympy.ImmutableMatrix, sympy.ImmutableMatrix]:
    '''Exact raw-form pair (T_0, T_1/C) in the scaled origin basis, entries polynomial in the unit.'''
    d, b, a = sympy.Integer(inv.d), _q(inv.b), inv.a
    T0 = sympy.ImmutableMatrix(4, 4, lambda r, c: sympy.Rational(1, math.factorial(c - r)) if c >= r else 0)
    T1 = sympy.ImmutableMatrix([
        [1 + a, 0, a * b / d, a ** 2 / d],
        [-b, 1, -b ** 2 / d, -a * b / d],
        [0, 0, 1, 0],
        [-d, 0, -b, 1 - a],
    ])
    return T0, T1


def _matrix_of(T: Any) -> mp.matrix:
    M = getattr(T, "matrix", T)
    if isinstance(M, sympy.MatrixBase):
        return evaluate_exact(M)
    return M


def _round(value: mp.mpf, name: str, tol: float) -> int:
    nearest = int(mp.nint(value))
    residual = float(abs(value - nearest))
    if residual >= tol:
        raise NonIntegerInvariant(f"{name} = {mp.nstr(value, 15)} is not an integer", residual)
    return nearest


def extract_invariants(T: Any, tol: float = ROUNDING_TOLERANCE) -> Invariants:

    """
    Read (H^3, c_2.H, c_3) off a conifold monodromy matrix in the raw scaled basis.

    d = -T[3,0], b = -T[1,0], a = T[0,0] - 1 and c_3 = a (2 pi i)^3 / zeta(3);
    the remaining entries are compared with the raw-form pattern.

    Parameters:
        T (mp.matrix | MonodromyMatrix | sympy.Matrix): The conifold matrix.
        tol (float): Rounding and pattern tolerance.

    Returns:
        Invariants: With the pattern residual attached.
    """

    M = _matrix_of(T)
    if M.rows != 4 or M.cols != 4:
        raise NotRawForm(f"raw-form extraction needs a 4x4 matrix, got {M.rows}x{M.cols}")
    constants = working_constants()
    d_value, b_value, a_value = -M[3, 0], -M[1, 0], M[0, 0] - 1
    if abs(mp.im(d_value)) >= tol or abs(mp.im(b_value)) >= tol or abs(mp.re(a_value)) >= tol:
        raise NotRawForm("d and b must be real and a purely imaginary")
    d = _round(mp.re(d_value), "H^3", tol)
    if d < 1:
        raise NotRawForm(f"H^3 = {d} is not positive")
    c2H = _round(24 * mp.re(b_value), "c2.H", tol)
    c3 = _round(mp.re(a_value * constants.two_pi_i_powers[3] / constants.zeta3), "c3", tol)
    inv = Invariants(d, c2H, c3)
    _, expected = theorem1_matrix(inv)
    residual = float(max_entry_diff(M, evaluate_exact(expected)))
    if residual >= tol:
        raise NotRawForm(f"matrix deviates from the raw conifold pattern by {residual:.3g}")
    logger.debug("invariants H^3=%d c2.H=%d c3=%d (residual %.3g)", d, c2H, c3, residual)
    return Invariants(d, c2H, c3, residual)


# ----------------------------------------------------------------------------
# Basis changes


def cy_conjugator(inv: Invariants) -> sympy.ImmutableMatrix:
    d, b, a = sympy.Integer(inv.d), _q(inv.b), inv.a
    return sympy.ImmutableMatrix([
        [0, 0, 1, 0],
        [0, 0, 0, 1],
        [0, d, d / 2, -b],
        [-d, 0, -b, -a],
    ])


def dm_conjugator(inv: Invariants) -> sympy.ImmutableMatrix:
    d, b, a = sympy.Integer(inv.d), _q(inv.b), inv.a
    return sympy.ImmutableMatrix([
        [d, 0, b, a],
        [0, d, d / 2, d / 6 + b],
        [0, 0, 1, 1],
        [0, 0, 0, 1],
    ])


def conjugate(M: Matrix, P: sympy.MatrixBase, P_inv: Optional[sympy.MatrixBase] = None) -> Matrix:
    '''P M P^-1, exact when M is exact and numerical otherwise.'''
    P_inv = P.inv() if P_inv is None else P_inv
    if isinstance(M, sympy.MatrixBase):
        return sympy.ImmutableMatrix((P * M * P_inv).applyfunc(sympy.expand))
    return evaluate_exact(P) * M * evaluate_exact(P_inv)


def _conjugate_all(gens: Any, P: sympy.MatrixBase, basis: str):
    P_inv = P.inv()
    if hasattr(gens, "with_matrices"):
        return gens.with_matrices([conjugate(g.matrix, P, P_inv) for g in gens], basis)
    return [conjugate(M, P, P_inv) for M in gens]


def cy_conjugate(gens: Any, inv: Invariants):
    '''Generators in the integral symplectic basis: S M S^-1 for each.'''
    from .monodromy import NICE_BASIS
    return _conjugate_all(gens, cy_conjugator(inv), NICE_BASIS)


def dm_conjugate(gens: Any, inv: Invariants):
    from .monodromy import DM_BASIS
    return _conjugate_all(gens, dm_conjugator(inv), DM_BASIS)


def nice_pair(inv: Invariants) -> Tuple[sympy.ImmutableMatrix, sympy.ImmutableMatrix]:
    d, k = sympy.Integer(inv.d), _q(inv.k)
    T0 = sympy.ImmutableMatrix([[1, 1, 0, 0], [0, 1, 0, 0], [d, d, 1, 0], [0, -k, -1, 1]])
    T1 = sympy.ImmutableMatrix([[1, 0, 0, 0], [0, 1, 0, 1], [0, 0, 1, 0], [0, 0, 0, 1]])
    return T0, T1


def dm_pair(inv: Invariants) -> Tuple[sympy.ImmutableMatrix, sympy.ImmutableMatrix]:
    d, k = sympy.Integer(inv.d), _q(inv.k)
    T0 = sympy.ImmutableMatrix([[1, 1, 0, 0], [0, 1, d, 0], [0, 0, 1, 1], [0, 0, 0, 1]])
    T1 = sympy.ImmutableMatrix([[1, 0, 0, 0], [-k, 1, 0, 0], [-1, 0, 1, 0], [-1, 0, 0, 1]])
    return T0, T1


def diagonal_conjugate(gens: Any, diagonal: Sequence[Any]):
    '''D M D^-1 with D = diag(diagonal).'''
    D = sympy.diag(*[sympy.nsimplify(x) for x in diagonal])
    if hasattr(gens, "with_matrices"):
        return _conjugate_all(gens, D, gens.basis)
    return _conjugate_all(gens, D, "")


# ----------------------------------------------------------------------------
# Symplectic structure


def symplectic_form(n: int = 4) -> sympy.ImmutableMatrix:
    h = n // 2
    return sympy.ImmutableMatrix(n, n, lambda i, j: 1 if j == i + h else (-1 if i == j + h else 0))


def reorder_symplectic(M: Matrix) -> Matrix:
    '''Raw ordering (y3, y2, y1, y0) to (y0, y2, y3, y1), in which raw matrices preserve J.'''
    order = [3, 1, 0, 2]
    if isinstance(M, sympy.MatrixBase):
        return sympy.ImmutableMatrix(4, 4, lambda i, j: M[order[i], order[j]])
    out = mp.matrix(4, 4)
    for i in range(4):
        for j in range(4):
            out[i, j] = M[order[i], order[j]]
    return out


def symplectic_check(M: Matrix, tol: float = 1e-15) -> bool:

    """
    Whether M^T J M = J, exactly for sympy matrices and within tol otherwise.

    The block characterization M^-1 = [[D^T, -B^T], [-C^T, A^T]] is checked as well.
    """

    n = M.rows
    if n != M.cols or n % 2:
        raise ParameterError("symplectic check needs a square matrix of even size")
    h = n // 2
    J = symplectic_form(n)
    if isinstance(M, sympy.MatrixBase):
        if (M.T * J * M - J).applyfunc(sympy.expand) != sympy.zeros(n):
            return False
        A, B, C, D = M[:h, :h], M[:h, h:], M[h:, :h], M[h:, h:]
        candidate = sympy.Matrix.vstack(sympy.Matrix.hstack(D.T, -B.T), sympy.Matrix.hstack(-C.T, A.T))
        return (candidate * M - sympy.eye(n)).applyfunc(sympy.expand) == sympy.zeros(n)
    Jn = evaluate_exact(J)
    if max_abs(M.T * Jn * M - Jn) >= tol:
        return False
    candidate = mp.matrix(n, n)
    for i in range(h):
        for j in range(h):
            candidate[i, j] = M[h + j, h + i]
            candidate[i, h + j] = -M[j, h + i]
            candidate[h + i, j] = -M[h + j, i]
            candidate[h + i, h + j] = M[j, i]
    return max_abs(candidate * M - mp.eye(n)) < tol


# ----------------------------------------------------------------------------
# Congruence levels


def _gcd(values: Iterable[int]) -> int:
    return reduce(math.gcd, (abs(int(v)) for v in values), 0)


def _lcm(values: Iterable[int]) -> int:
    return reduce(lambda x, y: x * y // math.gcd(x, y), values, 1)


def _congruent(x: Any, y: Any, modulus: int) -> bool:
    diff = sympy.nsimplify(x - y)
    if not diff.is_integer:
        return False
    return diff == 0 if modulus == 0 else int(diff) % modulus == 0


@dataclass(frozen=True)
class CongruenceLevel:

    """
    Gamma(d1, d2) or, with d3 set, Gamma(d1, d2, d3) whose (1,3) entries may have denominator d3.

    A level of 0 means the congruences hold as equalities.
    """

    d1: int
    d2: int
    d3: Optional[int] = None

    @property
    def variant(self) -> str:
        return "three-parameter" if self.d3 else "two-parameter"

    def as_tuple(self) -> Tuple[int, ...]:
        return (self.d1, self.d2) if not self.d3 else (self.d1, self.d2, self.d3)

    def __str__(self):
        return "Gamma(" + ",".join(str(x) for x in self.as_tuple()) + ")"

    def contains(self, M: sympy.MatrixBase) -> bool:
        '''Explicit membership test: integrality, symplecticity and the congruence pattern.'''
        if M.shape != (4, 4) or any(sympy.sympify(e).has(UNIT, sympy.I) for e in M):
            return False
        d3 = self.d3 or 1
        for i in range(4):
            for j in range(4):
                entry = sympy.nsimplify(M[i, j])
                scale = d3 if (i, j) == (0, 2) else 1
                if not (entry * scale).is_integer:
                    return False
        if not symplectic_check(sympy.ImmutableMatrix(M)):
            return False
        diagonal_modulus = self.d1 // d3 if self.d3 else self.d1
        zero_d1 = [M[1, 0], M[2, 0], M[3, 0], M[2, 1], M[2, 3]]
        return (all(_congruent(x, 0, self.d1) for x in zero_d1)
                and _congruent(M[0, 0], 1, diagonal_modulus)
                and _congruent(M[2, 2], 1, diagonal_modulus)
                and _congruent(M[1, 1], 1, self.d2)
                and _congruent(M[3, 3], 1, self.d2)
                and _congruent(M[3, 1], 0, self.d2))


def _exact_matrices(gens: Any) -> List[sympy.MatrixBase]:
    matrices = [getattr(g, "matrix", g) for g in gens]
    for M in matrices:
        if not isinstance(M, sympy.MatrixBase):
            raise NotInLevelFamily("congruence levels need exact (rationalized) generators")
    return matrices


def congruence_level(gens: Any) -> CongruenceLevel:

    """
    Largest level in the Gamma(d1, d2) family (or Gamma(d1, d2, d3)) containing all generators.

    d1 is the gcd over generators of a21, a31, a41, a32, a34, a11 - 1 and
    a33 - 1, and d2 = gcd(d1, a22 - 1, a44 - 1, a42). When the (1,3) entries
    share a denominator d3 > 1 the diagonal conditions are relaxed to hold
    modulo d1/d3.

    Parameters:
        gens (Iterable): Exact 4x4 generator matrices (or objects with a matrix attribute).

    Returns:
        CongruenceLevel: The detected level.
    """

    matrices = _exact_matrices(gens)
    denominators = []
    for M in matrices:
        if M.shape != (4, 4):
            raise NotInLevelFamily(f"expected 4x4 generators, got {M.shape}")
        for i in range(4):
            for j in range(4):
                entry = sympy.nsimplify(M[i, j])
                if entry.has(UNIT) or entry.has(sympy.I) or not entry.is_rational:
                    raise NotInLevelFamily(f"entry ({i + 1},{j + 1}) = {entry} is not rational")
                q = int(sympy.fraction(entry)[1])
                if q != 1 and (i, j) != (0, 2):
                    raise NotInLevelFamily(f"entry ({i + 1},{j + 1}) = {entry} is not integral")
                if (i, j) == (0, 2):
                    denominators.append(q)
    d3 = _lcm(denominators) if denominators else 1
    off = [M[i, j] for M in matrices for (i, j) in ((1, 0), (2, 0), (3, 0), (2, 1), (2, 3))]
    diagonal = [M[i, i] - 1 for M in matrices for i in (0, 2)]
    if d3 > 1:
        d1 = math.gcd(_gcd(off), d3 * _gcd(diagonal))
    else:
        d1 = _gcd(off + diagonal)
    d2 = math.gcd(d1, _gcd([M[1, 1] - 1 for M in matrices] + [M[3, 3] - 1 for M in matrices] + [M[3, 1] for M in matrices]))
    level = CongruenceLevel(d1, d2, d3 if d3 > 1 else None)
    logger.info("congruence level %s", level)
    return level


def implicit_congruence_check(M: sympy.MatrixBase, level: CongruenceLevel) -> bool:
    '''The congruences implied by symplecticity plus the level pattern (integral entries only).'''
    needed = [(0, 1), (0, 3), (1, 1), (1, 2), (1, 3), (3, 1), (3, 2), (3, 3)]
    if any(not sympy.nsimplify(M[i, j]).is_integer for i, j in needed):
        return False
    a = lambda i, j: int(sympy.nsimplify(M[i - 1, j - 1]))
    d1, d2 = level.d1, level.d2
    return (_congruent(a(2, 2) * a(4, 4) - a(2, 4) * a(4, 2), 1, d1)
            and _congruent(a(2, 3), a(1, 4) * a(2, 2) - a(1, 2) * a(2, 4), d1)
            and _congruent(a(4, 3), a(1, 4) * a(4, 2) - a(1, 2) * a(4, 4), d1)
            and _congruent(a(1, 2), -a(4, 3), d2))


# ----------------------------------------------------------------------------
# Indices and group orders


def _product_over_primes(n: int, exponents: Sequence[int]) -> Fraction:
    value = Fraction(1)
    for p in sympy.primefactors(n):
        for e in exponents:
            value *= 1 - Fraction(1, p ** e)
    return value


def tilde_gamma1_index(d1: int) -> int:
    return int(d1 ** 4 * _product_over_primes(d1, [4]))


def sl2_mod_order(n: int) -> int:
    '''Order of SL(2, Z/nZ).'''
    if n < 1:
        raise ParameterError(f"n must be positive, got {n}")
    return int(n ** 3 * _product_over_primes(n, [2]))


def sp4_mod_order(n: int) -> int:
    '''Order of Sp(4, Z/nZ).'''
    if n < 1:
        raise ParameterError(f"n must be positive, got {n}")
    return int(n ** 10 * _product_over_primes(n, [2, 4]))


def group_index(level: Union[CongruenceLevel, Tuple[int, int]]) -> int:

    """
    Index of Gamma(d1, d2) in Sp(4, Z).

    Parameters:
        level (CongruenceLevel | Tuple[int, int]): Two-parameter level with d2 | d1.

    Returns:
        int: d1^4 prod(1 - p^-4) * d2^2 prod(1 - p^-2).
    """

    d1, d2 = (level.d1, level.d2) if isinstance(level, CongruenceLevel) else level
    if isinstance(level, CongruenceLevel) and level.d3:
        raise ParameterError("the index formula covers the two-parameter family only")
    if d1 < 1 or d2 < 1 or d1 % d2:
        raise ParameterError(f"need positive levels with d2 | d1, got ({d1}, {d2})")
    return tilde_gamma1_index(d1) * int(d2 ** 2 * _product_over_primes(d2, [2]))


def brute_force_sp4_order(n: int) -> int:
    '''Count 4x4 matrices over Z/nZ preserving J by enumeration (n = 2 only is practical).'''
    if n < 2 or n ** 16 > 2 ** 20:
        raise ParameterError(f"enumeration over Z/{n}Z is not feasible")
    J = np.array([[0, 0, 1, 0], [0, 0, 0, 1], [-1, 0, 0, 0], [0, -1, 0, 0]], dtype=np.int64)
    digits = np.arange(n ** 16, dtype=np.int64)[:, None] // (n ** np.arange(16, dtype=np.int64)) % n
    M = digits.reshape(-1, 4, 4)
    product = np.einsum("nji,jk,nkl->nil", M, J, M) % n
    return int(np.all(product == J % n, axis=(1, 2)).sum())


# ----------------------------------------------------------------------------
# Vanishing cycles and characteristic polynomials


class VanishingCycle(NamedTuple):
    vector: mp.matrix
    multipliers: List[mp.mpc]


def vanishing_cycle(T: Any, tol: float = 1e-15) -> VanishingCycle:

    """
    Row vector v with T - I = m v^T for a unipotent rank-one T.

    v is signed so that its rightmost nonzero entry has positive real part
    (positive imaginary part when the real part vanishes).
    """

    M = _matrix_of(T)
    n = M.rows
    N = M - mp.eye(n)
    scale = max(1, max_abs(N))
    if max_abs(N) < tol or max_abs(N * N) >= tol * scale ** 2:
        raise ParameterError("matrix is not unipotent of rank one")
    norms = [max(abs(N[i, j]) for j in range(n)) for i in range(n)]
    row = max(range(n), key=lambda i: norms[i])
    v = mp.matrix(1, n)
    for j in range(n):
        v[0, j] = N[row, j]
    for j in reversed(range(n)):
        x = mp.mpc(v[0, j])
        if abs(x) >= tol * scale:
            positive = mp.re(x) > 0 if abs(mp.re(x)) >= tol * scale else mp.im(x) > 0
            if not positive:
                v = -v
            break
    pivot = max(range(n), key=lambda j: abs(v[0, j]))
    multipliers = [N[i, pivot] / v[0, pivot] for i in range(n)]
    for i in range(n):
        for j in range(n):
            if abs(N[i, j] - multipliers[i] * v[0, j]) >= tol * scale:
                raise ParameterError("T - I has rank above one")
    return VanishingCycle(v, multipliers)


def charpoly_coefficients(M: Matrix) -> List[Any]:
    '''Characteristic polynomial det(x I - M), descending coefficients, via Newton's identities.'''
    n = M.rows
    exact = isinstance(M, sympy.MatrixBase)
    power = M
    traces = []
    for k in range(n):
        traces.append(sympy.expand(power.trace()) if exact else sum(power[i, i] for i in range(n)))
        power = power * M
    e = [sympy.Integer(1) if exact else mp.mpc(1)]
    for k in range(1, n + 1):
        acc = sum(((-1) ** (i - 1) * e[k - i] * traces[i - 1] for i in range(1, k + 1)), sympy.Integer(0) if exact else mp.mpc(0))
        e.append(sympy.expand(acc / k) if exact else acc / k)
    return [(-1) ** k * e[k] for k in range(n + 1)]


def dm_charpoly_expected(inv: Invariants) -> List[Fraction]:
    k, d = inv.k, Fraction(inv.d)
    return [Fraction(1), k - 4, 6 - 2 * k + d, k - 4, Fraction(1)]


def dm_charpoly_check(T_inf: Any, inv: Invariants, tol: float = 1e-15) -> bool:
    M = getattr(T_inf, "matrix", T_inf)
    coeffs = charpoly_coefficients(M)
    expected = dm_charpoly_expected(inv)
    if isinstance(M, sympy.MatrixBase):
        return all(sympy.simplify(c - _q(e)) == 0 for c, e in zip(coeffs, expected))
    return all(abs(c - to_mpc(e)) < tol for c, e in zip(coeffs, expected))


def cyclotomic_factors(coeffs: Sequence[Any]) -> Optional[List[int]]:
    '''Indices m with prod Phi_m equal to the polynomial, or None when it is not such a product.'''
    x = sympy.Symbol("x")
    poly = sympy.Poly([sympy.nsimplify(c) for c in coeffs], x)
    if poly.LC() != 1 or not all(c.is_integer for c in poly.all_coeffs()):
        return None
    _, factors = sympy.factor_list(poly)
    out = []
    for factor, multiplicity in factors:
        if factor.LC() < 0:
            factor = -factor
        match = next((m for m in range(1, MAX_CYCLOTOMIC + 1)
                      if sympy.totient(m) == factor.degree() and sympy.Poly(sympy.cyclotomic_poly(m, x), x) == factor), None)
        if match is None:
            return None
        out.extend([match] * multiplicity)
    return sorted(out)


def is_cyclotomic_product(coeffs: Sequence[Any]) -> bool:
    return cyclotomic_factors(coeffs) is not None


# ----------------------------------------------------------------------------
# Order five


# (A, B) -> (a^2, c^2, x', C); the conifold sits at z = 1/C
ORDER5_TABLE: Dict[Tuple[Fraction, Fraction], Tuple[Fraction, Fraction, int, int]] = {
    (Fraction(1, 2), Fraction(1, 2)): (Fraction(25, 36), Fraction(64), 10, 1024),
    (Fraction(1, 4), Fraction(1, 2)): (Fraction(8, 9), Fraction(32), 24, 4096),
    (Fraction(1, 6), Fraction(1, 4)): (Fraction(289, 288), Fraction(8), 80, 110592),
    (Fraction(1, 4), Fraction(1, 3)): (Fraction(27, 32), Fraction(24), 28, 6912),
    (Fraction(1, 6), Fraction(1, 3)): (Fraction(75, 64), Fraction(12), 70, 46656),
    (Fraction(1, 8), Fraction(3, 8)): (Fraction(529, 288), Fraction(8), 150, 262144),
}

ORDER5_DISPLAY_ADVISORY = (
    "the printed conifold matrix has -ab at (0,2) and (2,4) and -b^2/2 at (0,4), "
    "which is not an involution; the computed matrix has -2ab and -2b^2 there"
)


def _table_key(A: Any, B: Any) -> Tuple[Fraction, Fraction]:
    A, B = Fraction(A), Fraction(B)
    return tuple(sorted((min(A, 1 - A), min(B, 1 - B))))


@dataclass(frozen=True)
class Order5Parameters:
    a2: Fraction
    c2: Fraction
    ac: Fraction
    x_prime: int
    C: int = 1

    @property
    def b2(self) -> Fraction:
        return (1 - self.a2) ** 2 / self.c2

    @property
    def ab(self) -> Fraction:
        return self.ac * (1 - self.a2) / self.c2


def theorem3_parameters(A: Any, B: Any) -> Order5Parameters:
    try:
        a2, c2, x_prime, C = ORDER5_TABLE[_table_key(A, B)]
    except KeyError as e:
        raise ParameterError(f"no order-five monodromy data for (A, B) = ({A}, {B})") from e
    root = sympy.sqrt(_q(a2 * c2))
    ac = Fraction(int(root.p), int(root.q))
    return Order5Parameters(a2, c2, ac, x_prime, C)


def order5_pattern(a2, c2, ac, ab, b2, x, printed: bool = False) -> List[List[Any]]:

    """
    Conifold matrix of the order-five family in the scaled origin basis.

    T - I is (b, cx/2, a, 0, c/2) times (-c, 0, -2a, cx, -2b), so T is an
    involution once a^2 + bc = 1. With printed set the (0,2), (2,4) and (0,4)
    entries take the printed values -ab, -ab and -b^2/2 instead.
    """

    ab_entry, b2_entry = (ab, b2 / 2) if printed else (2 * ab, 2 * b2)
    return [
        [a2, 0, -ab_entry, (1 - a2) * x, -b2_entry],
        [-c2 * x / 2, 1, -ac * x, c2 * x ** 2 / 2, -(1 - a2) * x],
        [-ac, 0, 1 - 2 * a2, ac * x, -ab_entry],
        [0, 0, 0, 1, 0],
        [-c2 / 2, 0, -ac, c2 * x / 2, a2],
    ]


def theorem3_expected(A: Any, B: Any, printed: bool = False) -> Tuple[sympy.ImmutableMatrix, sympy.ImmutableMatrix]:
    '''Exact order-five pair (T_0, T_1/C) in the scaled origin basis, x = x' times the unit.'''
    p = theorem3_parameters(A, B)
    T0 = sympy.ImmutableMatrix(5, 5, lambda r, c: sympy.Rational(1, math.factorial(c - r)) if c >= r else 0)
    x = p.x_prime * UNIT
    rows = order5_pattern(_q(p.a2), _q(p.c2), _q(p.ac), _q(p.ab), _q(p.b2), x, printed)
    T1 = sympy.ImmutableMatrix(rows).applyfunc(sympy.expand)
    return T0, T1


class Order5Fit(NamedTuple):
    a2: mp.mpf
    c2: mp.mpf
    ac: mp.mpf
    b: mp.mpf
    x_prime: mp.mpf
    pattern_residual: mp.mpf
    relation_residual: mp.mpf
    # distance to the printed b-entries, nonzero whenever b is
    printed_residual: mp.mpf


def theorem3_fit(T: Any) -> Order5Fit:

    """
    Recover (a^2, c^2, ac, b, x') from a computed order-five conifold matrix.

    Parameters:
        T (mp.matrix | MonodromyMatrix): Matrix around z = 1/C in the scaled origin basis.

    Returns:
        Order5Fit: Fitted parameters, the deviation from the involutive pattern,
        |a^2 + bc - 1| and the deviation from the printed pattern.
    """

    M = _matrix_of(T)
    constants = working_constants()
    a2 = mp.re(M[0, 0])
    c2 = mp.re(-2 * M[4, 0])
    ac = mp.re(-M[2, 0])
    if c2 <= 0 or a2 <= 0:
        raise NotRawForm("matrix does not follow the order-five conifold pattern")
    x = 2 * M[4, 3] / c2
    b2 = mp.re(-M[0, 4] / 2)
    b = mp.sqrt(abs(b2))
    if mp.re(-M[0, 2]) < 0:
        b = -b
    ab = mp.sqrt(a2) * b
    pattern = max_entry_diff(M, mp.matrix(order5_pattern(a2, c2, ac, ab, b2, x)))
    printed = max_entry_diff(M, mp.matrix(order5_pattern(a2, c2, ac, ab, b2, x, printed=True)))
    relation = abs(a2 + b * mp.sqrt(c2) - 1)
    x_prime = mp.re(x * constants.two_pi_i_powers[3] / constants.zeta3)
    return Order5Fit(a2, c2, ac, b, x_prime, pattern, relation, printed)


# ----------------------------------------------------------------------------
# Comparison with printed matrices


def exact_generators(gens: Any, max_den: int = 10 ** 6, tol=1e-20):
    '''Rationalize every generator; returns a list of exact matrices (or a GeneratorSet copy).'''
    if hasattr(gens, "with_matrices"):
        return gens.with_matrices([rationalize_matrix(g.matrix, max_den, tol) for g in gens], gens.basis)
    return [rationalize_matrix(M, max_den, tol) for M in gens]


def match_printed(computed: sympy.MatrixBase, printed: sympy.MatrixBase,
                  T0: Optional[sympy.MatrixBase] = None) -> Optional[str]:

    """
    How a computed generator relates to a printed one.

    Returns "direct", "inverse", "conjugated-by-T0", "conjugated-by-T0-inverse"
    (also with "-inverse" appended when both apply), or None.
    """

    computed = sympy.ImmutableMatrix(computed)
    printed = sympy.ImmutableMatrix(printed)
    candidates = [("direct", computed), ("inverse", computed.inv())]
    if T0 is not None:
        T0 = sympy.ImmutableMatrix(T0)
        T0_inv = T0.inv()
        for tag, P, Q in (("conjugated-by-T0", T0, T0_inv), ("conjugated-by-T0-inverse", T0_inv, T0)):
            candidates.append((tag, P * computed * Q))
            candidates.append((tag + "-inverse", P * computed.inv() * Q))
    for tag, M in candidates:
        if (M - printed).applyfunc(sympy.expand) == sympy.zeros(*printed.shape):
            return tag
    return None
