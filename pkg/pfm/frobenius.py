# frobenius.py

import json
import math
import logging
import functools
from fractions import Fraction
from dataclasses import dataclass, replace
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import mpmath as mp

from .errors import EvaluationDomainError, ObstructionError, ParameterError
from .numerics import max_abs, to_mpc, taylor_shift
from .operator import (
    Operator,
    Point,
    LocalOperator,
    local_operator,
    indicial_roots,
    singular_points,
)


logger = logging.getLogger(__name__)

# Evaluation is refused once |t| / radius reaches this ratio.
SAFETY_RATIO = 0.95


@dataclass(frozen=True)
class ExponentGroup:

    """Exponents congruent mod 1: base exponent and multiplicity per integer shift."""

    base: Fraction
    multiplicities: Tuple[Tuple[int, int], ...]

    @property
    def size(self) -> int:
        return sum(m for _, m in self.multiplicities)

    def multiplicity(self, shift: int) -> int:
        return dict(self.multiplicities).get(shift, 0)

    @property
    def criticals(self) -> List[Tuple[int, int]]:
        '''(shift, log power) monomials fixing each solution of the group.'''
        return [(s, k) for s, m in self.multiplicities for k in range(m)]


@dataclass(frozen=True)
class LogSeries:

    """
    Truncated local solution sum_n sum_k c[n][k] t^(base+n) log(t)^k / k!.

    The solution is normalized at its critical monomial (shift, log_power): the
    coefficient there is 1 and the coefficients at the other critical monomials
    of its exponent group vanish.
    """

    point: Point
    base_exponent: Fraction
    shift: int
    log_power: int
    coefficients: Tuple[Tuple[Any, ...], ...]
    exact: bool

    @property
    def exponent(self) -> Fraction:
        return self.base_exponent + self.shift

    @property
    def terms(self) -> int:
        return len(self.coefficients)

    @property
    def log_depth(self) -> int:
        depth = 0
        for row in self.coefficients:
            for k, c in enumerate(row):
                if k > depth and c != 0:
                    depth = k
        return depth

    def coefficient(self, n: int, k: int) -> Any:
        row = self.coefficients[n] if n < len(self.coefficients) else ()
        return row[k] if k < len(row) else 0


@dataclass(frozen=True)
class FrobeniusBasis:
    point: Point
    local: LocalOperator
    groups: Tuple[ExponentGroup, ...]
    solutions: Tuple[LogSeries, ...]
    radius: mp.mpf
    normalization: str = "echelon"
    # other finite singularities in the local variable
    singularities: Tuple[mp.mpc, ...] = ()

    @property
    def order(self) -> int:
        return self.local.order

    @property
    def terms(self) -> int:
        return self.solutions[0].terms

    @property
    def exponents(self) -> Tuple[Fraction, ...]:
        return tuple(s.exponent for s in self.solutions)


class Evaluation(NamedTuple):
    matrix: mp.matrix
    # tail bound per entry
    errors: mp.matrix

    @property
    def error(self) -> mp.mpf:
        return max_abs(self.errors)

    @property
    def column_errors(self) -> Tuple[mp.mpf, ...]:
        return tuple(max(self.errors[i, k] for i in range(self.errors.rows)) for k in range(self.errors.cols))


class LocalMonodromy(NamedTuple):
    point: Point
    matrix: mp.matrix


def exponent_groups(exponents: Sequence[Fraction]) -> Tuple[ExponentGroup, ...]:
    '''Group exponents by class mod 1, ascending by base exponent.'''
    classes: Dict[Fraction, List[Fraction]] = {}
    for e in exponents:
        classes.setdefault(e - math.floor(e), []).append(e)
    groups = []
    for members in classes.values():
        base = min(members)
        counts: Dict[int, int] = {}
        for e in members:
            counts[int(e - base)] = counts.get(int(e - base), 0) + 1
        groups.append(ExponentGroup(base, tuple(sorted(counts.items()))))
    return tuple(sorted(groups, key=lambda g: g.base))


def _group_solutions(local: LocalOperator, group: ExponentGroup, N: int, exact: bool, point: Point) -> List[LogSeries]:
    size = group.size
    zero = Fraction(0) if exact else mp.mpc(0)
    polys = local.polys if exact else tuple(tuple(to_mpc(c) for c in q) for q in local.polys)
    base = group.base if exact else to_mpc(group.base)

    # Taylor coefficients Q_j(base + n - j + x), shared by all solutions of the group.
    shifted = {}
    for n in range(N):
        for j in range(min(n, len(polys) - 1) + 1):
            shifted[(j, n)] = taylor_shift(polys[j], base + (n - j))

    eps = mp.mpf(10) ** (-(mp.mp.dps // 2))
    solutions = []
    for critical in group.criticals:
        rows: List[Tuple[Any, ...]] = []
        for n in range(N):
            rhs = [zero] * size
            for j in range(1, min(n, len(polys) - 1) + 1):
                prev = rows[n - j]
                for r, q in enumerate(shifted[(j, n)]):
                    if q == 0:
                        continue
                    for k in range(size - r):
                        if prev[k + r] != 0:
                            rhs[k] -= q * prev[k + r]
            q0 = shifted[(0, n)]
            m = group.multiplicity(n)
            if exact and any(q0[r] != 0 for r in range(m)):
                raise ObstructionError(f"indicial polynomial does not vanish to order {m} at shift {n}")
            vec = [zero] * size
            for k in range(m):
                if (n, k) == critical:
                    vec[k] = Fraction(1) if exact else mp.mpc(1)
            for k in range(size - m, size):
                if (exact and rhs[k] != 0) or (not exact and abs(rhs[k]) > eps * (1 + max(abs(x) for x in rhs))):
                    raise ObstructionError(f"log depth exceeds the exponent multiplicities at shift {n}")
            for k in range(size - 1 - m, -1, -1):
                acc = rhs[k]
                for r in range(m + 1, len(q0)):
                    if k + r >= size:
                        break
                    if vec[k + r] != 0:
                        acc -= q0[r] * vec[k + r]
                vec[k + m] = acc / q0[m]
            rows.append(tuple(vec))
        solutions.append(LogSeries(point, group.base, critical[0], critical[1], tuple(rows), exact))
    return solutions


def local_singularities(op: Operator, point: Point) -> Tuple[mp.mpc, ...]:
    '''Other finite singularities of op in the local variable at point (z - z0, or 1/z at infinity).'''
    finite = [s.point for s in singular_points(op) if not s.point.infinity]
    if point.infinity:
        return tuple(1 / p.approx() for p in finite if not p.is_origin)
    z0 = point.approx()
    floor = mp.mpf(10) ** (-(mp.mp.dps // 2))
    offsets = (p.approx() - z0 for p in finite if p != point)
    return tuple(d for d in offsets if abs(d) > floor)


def local_radius(op: Operator, point: Point) -> mp.mpf:
    '''Radius of convergence of series at point: distance to the nearest other singularity.'''
    offsets = local_singularities(op, point)
    return min(abs(d) for d in offsets) if offsets else mp.inf


def frobenius_basis(op: Operator, point: Any, N: int, radius: Optional[mp.mpf] = None) -> FrobeniusBasis:

    """
    Frobenius basis of op at a regular singular or ordinary point, truncated to N terms.

    Recurrences run over exact rationals whenever the point and its local
    operator are rational, and in mpc at the working precision otherwise.

    Parameters:
        op (Operator): The operator.
        point (Point): Expansion point.
        N (int): Number of series terms.
        radius (mp.mpf, optional): Convergence radius, computed when omitted.

    Returns:
        FrobeniusBasis: Solutions ordered by exponent group, then by critical monomial.
    """

    point = Point.at(point)
    local = local_operator(op, point)
    exponents = indicial_roots(local)
    groups = exponent_groups(exponents)
    exact = local.exact
    solutions: List[LogSeries] = []
    for group in groups:
        solutions.extend(_group_solutions(local, group, N, exact, point))
    singularities: Tuple[mp.mpc, ...] = ()
    if radius is None:
        singularities = local_singularities(op, point)
        radius = min(abs(d) for d in singularities) if singularities else mp.inf
    logger.debug("basis at %s: exponents %s, %d terms, %s arithmetic", point.label(),
                 [str(e) for e in exponents], N, "exact" if exact else "floating")
    return FrobeniusBasis(point, local, groups, tuple(solutions), radius, singularities=singularities)


def power_series_coefficients(op: Operator, N: int) -> List[Fraction]:
    '''Exact coefficients of the holomorphic solution 1 + ... at a maximally unipotent origin.'''
    basis = frobenius_basis(op, Point(Fraction(0)), N, radius=mp.inf)
    return [row[0] for row in basis.solutions[0].coefficients]


@functools.lru_cache(maxsize=None)
def _chain_rule(order: int) -> Tuple[Dict[int, Tuple[int, ...]], ...]:
    '''c[m][j](w) with d^m/dz^m = sum_j c[m][j](w) d^j/dw^j for w = 1/z.'''
    table: List[Dict[int, List[int]]] = [{0: [1]}]
    for m in range(order):
        nxt: Dict[int, List[int]] = {}
        for j, poly in table[m].items():
            derivative = [i * c for i, c in enumerate(poly)][1:]
            for target, contribution in ((j, derivative), (j + 1, poly)):
                acc = nxt.setdefault(target, [])
                shifted = [0, 0] + [-c for c in contribution]
                if len(acc) < len(shifted):
                    acc.extend([0] * (len(shifted) - len(acc)))
                for i, c in enumerate(shifted):
                    acc[i] += c
        table.append(nxt)
    return tuple({j: tuple(p) for j, p in row.items()} for row in table)


def _disk_preimage(sigma: mp.mpc, t: mp.mpc) -> mp.mpc:
    '''The root w with |w| <= 1 of sigma 4w / (1 + w)^2 = t.'''
    b = 2 * sigma - t
    root = 2 * mp.sqrt(sigma * (sigma - t))
    big = b + root if abs(b + root) >= abs(b - root) else b - root
    return t / big


class ConformalSum:

    """
    Summation of truncated power series in t through the map t = sigma 4w / (1 + w)^2.

    The map takes the unit disk onto the t-plane cut along the ray from the
    nearest singularity sigma out to infinity. The first N coefficients in w
    depend only on the first N in t, so a series known to N terms is summed at
    the preimage of the evaluation point, where the rate is |w| / R instead of
    |t| / |sigma|. R is 1 unless another singularity maps inside the disk.

    Parameters:
        sigma (mp.mpc): Nearest singularity in the local variable.
        t (mp.mpc): Evaluation point in the local variable.
        others (Sequence[mp.mpc]): Remaining finite singularities.
        terms (int): Series length N.
    """

    def __init__(self, sigma: mp.mpc, t: mp.mpc, others: Sequence[mp.mpc], terms: int):
        self.w = _disk_preimage(sigma, t)
        radius = min([mp.mpf(1)] + [abs(_disk_preimage(sigma, s)) for s in others])
        self.ratio = abs(self.w) / radius
        self.terms = terms
        self.full, self.drop1, self.drop2 = self._weights(sigma, self.w, terms)

    @staticmethod
    def _weights(sigma: mp.mpc, w: mp.mpc, terms: int):
        # weight n is sigma^n times the w-expansion of (4w / (1 + w)^2)^n cut below degree N,
        # evaluated at w; the second and third lists cut one and two degrees earlier
        spread = 4 * abs(w) / (1 - abs(w)) ** 2
        size = 4 * abs(w) / abs(1 + w) ** 2
        extra = 20 + int(math.ceil(terms * max(0.0, float(mp.log(spread / size, 2)))))
        full, drop1, drop2 = [], [], []
        with mp.extraprec(extra):
            power = mp.mpc(1)
            for n in range(terms):
                term = power
                running = previous = before = mp.mpc(0)
                for k in range(terms - n):
                    before, previous = previous, running
                    running += term
                    term *= -w * (2 * n + k) / (k + 1)
                full.append(running)
                drop1.append(previous)
                drop2.append(before)
                power *= 4 * sigma * w
        return full, drop1, drop2

    def sum(self, column: Sequence[mp.mpc]) -> Tuple[mp.mpc, mp.mpf]:
        '''Value of sum_n column[n] t^n and the size of its last term in w.'''
        value = mp.fdot(column, self.full)
        shorter = mp.fdot(column, self.drop1)
        last = abs(value - shorter)
        previous = abs(shorter - mp.fdot(column, self.drop2))
        return value, max(last, previous * abs(self.w))


def summation_for(basis: FrobeniusBasis, t: mp.mpc) -> Optional[ConformalSum]:
    '''The conformal summation at t when it converges faster than the plain series, else None.'''
    if not basis.singularities or basis.radius == mp.inf:
        return None
    sigma = min(basis.singularities, key=abs)
    others = [s for s in basis.singularities if s is not sigma]
    candidate = ConformalSum(sigma, t, others, basis.terms)
    return candidate if candidate.ratio < abs(t) / basis.radius else None


def _series_derivatives(series: LogSeries, t: mp.mpc, logt: mp.mpc, count: int, ratio: mp.mpf,
                        summation: Optional[ConformalSum] = None):
    size = max(len(row) for row in series.coefficients)
    coeffs = [[to_mpc(c) for c in row] for row in series.coefficients]
    mu = to_mpc(series.base_exponent)
    if summation is not None:
        ratio = summation.ratio
    values, errors = [], []
    abs_t, abs_log = abs(t), abs(logt)
    for m in range(count):
        prefactor = mp.exp((mu - m) * logt)
        total = mp.mpc(0)
        last = mp.mpf(0)
        for k in range(size):
            if summation is None:
                s = mp.mpc(0)
                for row in reversed(coeffs):
                    s = s * t + row[k]
                tail = max(abs(coeffs[-1][k]), abs(coeffs[-2][k]) * abs_t) if len(coeffs) > 1 else abs(coeffs[-1][k])
                tail *= abs_t ** (len(coeffs) - 1)
            else:
                s, tail = summation.sum([row[k] for row in coeffs])
            total += s * logt ** k / mp.factorial(k)
            last += tail * abs_log ** k / mp.factorial(k)
        values.append(prefactor * total)
        errors.append(abs(prefactor) * last * ratio / (1 - ratio))
        for n, row in enumerate(coeffs):
            exponent = mu - m + n
            coeffs[n] = [exponent * row[k] + (row[k + 1] if k + 1 < size else 0) for k in range(size)]
    return values, errors


def evaluate_basis(basis: FrobeniusBasis, z: Any, arg: Optional[mp.mpf] = None, derivatives: Optional[int] = None) -> Evaluation:

    """
    Values W[i][k] = y_i^(k)(z) of the basis and its z-derivatives.

    Parameters:
        basis (FrobeniusBasis): Local basis.
        z (Any): Evaluation point inside the disk of convergence.
        arg (mp.mpf, optional): Branch record, the argument of the local
            variable (z - z0, or 1/z at infinity); principal when omitted.
        derivatives (int, optional): Number of columns, defaults to the order.

    Returns:
        Evaluation: Matrix with one row per solution and a heuristic tail
        bound for every entry.
    """

    z = to_mpc(z)
    count = basis.order if derivatives is None else derivatives
    t = 1 / z if basis.point.infinity else z - basis.point.approx()
    ratio = abs(t) / basis.radius if basis.radius != mp.inf else mp.mpf(0)
    if ratio >= SAFETY_RATIO:
        raise EvaluationDomainError(f"|t|/R = {mp.nstr(ratio, 5)} at {basis.point.label()} is outside the safety disk")
    if t == 0:
        raise EvaluationDomainError(f"cannot evaluate at the expansion point {basis.point.label()}")
    theta = mp.arg(t) if arg is None else mp.mpf(arg)
    logt = mp.mpc(mp.log(abs(t)), theta)

    summation = summation_for(basis, t)
    W = mp.matrix(len(basis.solutions), count)
    E = mp.matrix(len(basis.solutions), count)
    for i, series in enumerate(basis.solutions):
        values, errors = _series_derivatives(series, t, logt, count, ratio, summation)
        if basis.point.infinity:
            rule = _chain_rule(count)
            zvalues, zerrors = [], []
            for m in range(count):
                v, e = mp.mpc(0), mp.mpf(0)
                for j, poly in rule[m].items():
                    c = mp.polyval(list(reversed(poly)), t) if poly else 0
                    v += c * values[j]
                    e += abs(c) * errors[j]
                zvalues.append(v)
                zerrors.append(e)
            values, errors = zvalues, zerrors
        for k in range(count):
            W[i, k] = values[k]
            E[i, k] = errors[k]
    return Evaluation(W, E)


def local_monodromy(basis: FrobeniusBasis) -> LocalMonodromy:

    """
    Effect of one counterclockwise loop around the expansion point.

    Row j expresses the continued solution y_j in the basis. A solution is
    fixed by its coefficients at the critical monomials of its group, so the
    continued series read there give L R, with R the same reading of the
    basis itself (the identity for echelon bases).
    """

    two_pi_i = 2 * mp.pi * mp.mpc(0, 1)
    n = len(basis.solutions)
    M = mp.matrix(n, n)
    start = 0
    for group in basis.groups:
        criticals = group.criticals
        size = len(criticals)
        members = basis.solutions[start:start + size]
        omega = mp.expjpi(2 * to_mpc(group.base))
        continued = mp.matrix(size, size)
        reading = mp.matrix(size, size)
        for j, series in enumerate(members):
            for i, (shift, power) in enumerate(criticals):
                acc = mp.mpc(0)
                for d in range(group.size - power):
                    c = series.coefficient(shift, power + d)
                    if c != 0:
                        acc += two_pi_i ** d / mp.factorial(d) * to_mpc(c)
                continued[j, i] = omega * acc
                reading[j, i] = to_mpc(series.coefficient(shift, power))
        block = continued if basis.normalization == "echelon" else continued * mp.inverse(reading)
        for j in range(size):
            for i in range(size):
                M[start + j, start + i] = block[j, i]
        start += size
    return LocalMonodromy(basis.point, M)


def renormalize_basis(basis: FrobeniusBasis, G: Sequence[Sequence[Any]]) -> FrobeniusBasis:

    """
    Basis whose j-th solution is sum_i G[j][i] y_i.

    Parameters:
        basis (FrobeniusBasis): Local basis.
        G (Sequence[Sequence[Any]]): Invertible change of basis; it may only
            mix solutions of the same exponent group.

    Returns:
        FrobeniusBasis: The new basis, with normalization "custom".
    """

    n = len(basis.solutions)
    if len(G) != n or any(len(row) != n for row in G):
        raise ParameterError(f"change of basis must be {n} x {n}")
    exact = all(isinstance(g, (int, Fraction)) for row in G for g in row)
    solutions = []
    start = 0
    for group in basis.groups:
        block = range(start, start + len(group.criticals))
        for j in block:
            if any(G[j][i] != 0 for i in range(n) if i not in block):
                raise ParameterError("change of basis mixes exponent groups")
            members = [(G[j][i], basis.solutions[i]) for i in block if G[j][i] != 0]
            if not members:
                raise ParameterError(f"row {j} of the change of basis vanishes")
            width = max(len(row) for _, s in members for row in s.coefficients)
            exact_row = exact and all(s.exact for _, s in members)
            rows = []
            for m in range(basis.terms):
                row = []
                for k in range(width):
                    if exact_row:
                        row.append(sum((Fraction(g) * s.coefficient(m, k) for g, s in members), Fraction(0)))
                    else:
                        row.append(sum((to_mpc(g) * to_mpc(s.coefficient(m, k)) for g, s in members), mp.mpc(0)))
                rows.append(tuple(row))
            own = basis.solutions[j]
            solutions.append(LogSeries(own.point, own.base_exponent, own.shift, own.log_power, tuple(rows), exact_row))
        start += len(group.criticals)
    return replace(basis, solutions=tuple(solutions), normalization="custom")


def dump_basis(basis: FrobeniusBasis, digits: int = 20) -> str:
    solutions = []
    for s in basis.solutions:
        solutions.append({
            "exponent": str(s.exponent),
            "base_exponent": str(s.base_exponent),
            "log_depth": s.log_depth,
            "critical": [s.shift, s.log_power],
            "coefficients": [[mp.nstr(to_mpc(c), digits) for c in row] for row in s.coefficients],
        })
    return json.dumps({
        "point": basis.point.label(),
        "exponents": [str(e) for e in basis.exponents],
        "terms": basis.terms,
        "normalization": basis.normalization,
        "solutions": solutions,
    }, indent=2)
