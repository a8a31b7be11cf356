# monodromy.py

import time
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import mpmath as mp
from tqdm import tqdm

from .config import RunConfig
from .continuation import connect, ray_direction, resolve_point, transition_matrix
from .errors import IrregularSingularityError, ParameterError
from .frobenius import frobenius_basis, local_monodromy
from .numerics import GUARD_DIGITS, abs_matrix, max_abs, max_entry_diff, working_constants
from .operator import INFINITY, ORIGIN, Operator, Point, singular_points


logger = logging.getLogger(__name__)

RAW_BASIS = "frobenius-raw-scaled"
NICE_BASIS = "theorem2-integral"
DM_BASIS = "doran-morgan"

# A matrix closer to the identity than this multiple of its error estimate is reported as trivial.
IDENTITY_FACTOR = 10 ** 3


@dataclass(frozen=True)
class ScaledBasis:

    """
    Ordered basis f_r = y_{n-1-r} / (2 pi i)^(n-1-r) built from the Frobenius basis at a maximally unipotent origin.

    matrix maps the Frobenius column (y_0, ..., y_{n-1}) to (f_0, ..., f_{n-1}).
    """

    order: int
    matrix: mp.matrix

    def labels(self) -> List[str]:
        n = self.order
        return [f"y{n - 1 - r}/(2 pi i)^{n - 1 - r}" if n - 1 - r else "y0" for r in range(n)]


@dataclass
class MonodromyMatrix:
    target: Point
    matrix: mp.matrix
    basis: str = RAW_BASIS
    error_estimate: mp.mpf = mp.mpf(0)
    exponents: Tuple[Any, ...] = ()
    classification: str = ""
    flags: Dict[str, bool] = field(default_factory=dict)
    terms: int = 0
    precision: int = 0
    seconds: float = 0.0

    @property
    def is_identity(self) -> bool:
        return self.flags.get("identity", False)

    def label(self) -> str:
        return self.target.label()


@dataclass
class GeneratorSet:

    """
    One monodromy matrix per singularity, all relative to the same origin basis.

    Finite generators are ordered with the origin first, then by argument and
    modulus of the singularity; the matrix at infinity, when present, is last.
    """

    generators: List[MonodromyMatrix]
    basis: str = RAW_BASIS
    ray_angle: Optional[mp.mpf] = None
    product_residual: Optional[mp.mpf] = None
    product_skipped: bool = False

    def __iter__(self):
        return iter(self.generators)

    def __len__(self):
        return len(self.generators)

    def finite(self) -> List[MonodromyMatrix]:
        return [g for g in self.generators if not g.target.infinity]

    def at(self, point: Any) -> MonodromyMatrix:
        for g in self.generators:
            if g.target == point or g.label() == str(point):
                return g
        raise KeyError(f"no generator at {point}")

    @property
    def infinity(self) -> Optional[MonodromyMatrix]:
        for g in self.generators:
            if g.target.infinity:
                return g
        return None

    def nontrivial(self) -> List[MonodromyMatrix]:
        return [g for g in self.generators if not g.is_identity]

    def with_matrices(self, matrices: Sequence[Any], basis: str) -> "GeneratorSet":
        gens = []
        for g, M in zip(self.generators, matrices):
            gens.append(MonodromyMatrix(g.target, M, basis, g.error_estimate, g.exponents, g.classification,
                                        dict(g.flags), g.terms, g.precision, g.seconds))
        return GeneratorSet(gens, basis, self.ray_angle, self.product_residual, self.product_skipped)


def scaled_origin_basis(op: Operator) -> ScaledBasis:
    '''Scaled basis at the origin; ParameterError unless the origin is maximally unipotent.'''
    origin = singular_points(op)[0]
    if not origin.point.is_origin or any(e != 0 for e in origin.exponents) or len(origin.exponents) != op.order:
        raise ParameterError("the origin is not a point of maximally unipotent monodromy")
    return _scaling(op.order)


def _scaling(n: int) -> ScaledBasis:
    powers = working_constants().two_pi_i_powers
    two_pi_i = powers[1]
    S = mp.matrix(n, n)
    for r in range(n):
        S[r, n - 1 - r] = 1 / two_pi_i ** (n - 1 - r)
    return ScaledBasis(n, S)


def to_scaled(M: mp.matrix, descriptor: Optional[ScaledBasis] = None) -> mp.matrix:
    '''Change a monodromy matrix from the Frobenius ordering y to the scaled ordering f: S M S^-1.'''
    S = descriptor.matrix if descriptor is not None else _scaling(M.rows).matrix
    return S * M * mp.inverse(S)


def _flags(M: mp.matrix, error: mp.mpf, classification: str) -> Dict[str, bool]:
    n = M.rows
    N = M - mp.eye(n)
    bound = IDENTITY_FACTOR * max(error, mp.mpf(10) ** (GUARD_DIGITS - mp.mp.dps))
    identity = max_abs(N) < bound
    unipotent_rank_one = False
    if not identity:
        square = max_abs(N * N) < bound * max(1, max_abs(N))
        unipotent_rank_one = square and _numerical_rank(N, bound) == 1
    return {
        "identity": bool(identity),
        "conifold": bool(classification == "conifold" or unipotent_rank_one),
        "unipotent_rank_one": bool(unipotent_rank_one),
    }


def _conjugation_error(T_y: mp.matrix, drift: mp.matrix, descriptor: ScaledBasis) -> mp.mpf:
    '''First-order bound on the scaled matrix when T_y = C L C^-1 and dC C^-1 is bounded entrywise by drift.'''
    A = abs_matrix(T_y)
    S = descriptor.matrix
    return max_abs(abs_matrix(S) * (drift * A + A * drift) * abs_matrix(mp.inverse(S)))


def _numerical_rank(N: mp.matrix, bound) -> int:
    singular = mp.svd_c(N, compute_uv=False)
    scale = bound * max(1, max_abs(N))
    return sum(1 for i in range(singular.rows) if abs(singular[i]) > scale)


def monodromy_about(op: Operator, target: Any, config: Optional[RunConfig] = None,
                    descriptor: Optional[ScaledBasis] = None) -> MonodromyMatrix:

    """
    Monodromy around one singularity relative to the scaled origin basis.

    The origin basis is continued along the planned path to the target, the
    target's local monodromy is applied and the path is retraced:
    T = C L C^-1 with W_origin = C W_target. The loop is counterclockwise in
    z, so at infinity the inverse of the local monodromy in w = 1/z is used.

    Parameters:
        op (Operator): Operator with a maximally unipotent origin.
        target (Any): Singular point, rational, complex value or "oo".
        config (RunConfig, optional): Numerical settings.
        descriptor (ScaledBasis, optional): Scaled basis, recomputed when omitted.

    Returns:
        MonodromyMatrix: Matrix in the scaled origin basis with error estimate and flags.
    """

    config = config or RunConfig()
    started = time.time()
    with mp.workdps(config.precision + GUARD_DIGITS):
        descriptor = descriptor or scaled_origin_basis(op)
        point = resolve_point(op, target)
        info = {s.point: s for s in singular_points(op)}.get(point)
        exponents = info.exponents if info else ()
        classification = info.classification if info else "ordinary"
        if classification == "irregular":
            raise IrregularSingularityError(f"{point.label()} is an irregular singular point")

    if point.is_origin:
        with mp.workdps(config.precision + GUARD_DIGITS):
            basis = frobenius_basis(op, ORIGIN, op.order + 1)
            T_y = local_monodromy(basis).matrix
            error = mp.mpf(10) ** (GUARD_DIGITS - mp.mp.dps)
            drift = None
            terms, precision = basis.terms, config.precision
    else:
        transition = connect(op, ORIGIN, point, config)
        with mp.workdps(transition.precision + GUARD_DIGITS):
            C = transition.matrix
            L = local_monodromy(transition.target_basis).matrix
            if point.infinity:
                L = mp.inverse(L)
            C_inv = mp.inverse(C)
            T_y = C * L * C_inv
            error = transition.error_estimate * max_abs(L) * max_abs(C_inv) * (1 + max_abs(C) * max_abs(C_inv))
            drift = transition.drift
            terms, precision = transition.terms, transition.precision

    with mp.workdps(precision + GUARD_DIGITS):
        descriptor = _scaling(op.order) if precision != config.precision else descriptor
        S_norm = max_abs(descriptor.matrix) * max_abs(mp.inverse(descriptor.matrix))
        T = to_scaled(T_y, descriptor)
        error = error * S_norm if drift is None else _conjugation_error(T_y, drift, descriptor)
        flags = _flags(T, error, classification)
    elapsed = time.time() - started
    logger.info("monodromy about %s: %s, error %s", point.label(),
                "identity" if flags["identity"] else classification, mp.nstr(error, 3))
    return MonodromyMatrix(point, T, RAW_BASIS, error, exponents, classification, flags, terms, precision, elapsed)


def monodromy_via_point(op: Operator, target: Any, zeta: Any, config: Optional[RunConfig] = None) -> MonodromyMatrix:

    """
    Single-hop monodromy with a fixed truncation and a user supplied common point.

    No refinement takes place: both bases are expanded to config.terms terms
    and evaluated at zeta, which must lie in both disks of convergence.

    Parameters:
        op (Operator): Operator with a maximally unipotent origin.
        target (Any): Finite singular point.
        zeta (Any): Common evaluation point.
        config (RunConfig, optional): Precision and truncation.

    Returns:
        MonodromyMatrix: Matrix in the scaled origin basis.
    """

    config = config or RunConfig()
    started = time.time()
    with mp.workdps(config.precision + GUARD_DIGITS):
        descriptor = scaled_origin_basis(op)
        point = resolve_point(op, target)
        if point.infinity or point.is_origin:
            raise ParameterError("a single hop needs a finite singularity away from the origin")
        info = {s.point: s for s in singular_points(op)}.get(point)
        classification = info.classification if info else "ordinary"
        source = frobenius_basis(op, ORIGIN, config.terms)
        destination = frobenius_basis(op, point, config.terms)
        hop = transition_matrix(source, destination, resolve_point(op, zeta).approx())
        C = hop.matrix
        C_inv = mp.inverse(C)
        L = local_monodromy(destination).matrix
        T_y = C * L * C_inv
        T = to_scaled(T_y, descriptor)
        error = _conjugation_error(T_y, hop.drift, descriptor)
        flags = _flags(T, error, classification)
    return MonodromyMatrix(point, T, RAW_BASIS, error, info.exponents if info else (), classification,
                           flags, config.terms, config.precision, time.time() - started)


def _argument_key(point: Point):
    z = point.approx()
    return (float(mp.arg(z)), float(abs(z)))


def ordered_product(finite: Sequence[MonodromyMatrix], angle) -> Tuple[mp.matrix, bool]:

    """
    Product expected to equal the direct matrix at infinity for a ray at angle.

    T_inf = prod_{arg in (angle, pi]} T_s . T_0 . prod_{arg in (-pi, angle)} T_s,
    each product taken by ascending argument, and by ascending modulus along a
    common ray. Returns the product and whether two singularities share an
    argument.
    """

    origin = [g for g in finite if g.target.is_origin]
    others = sorted((g for g in finite if not g.target.is_origin), key=lambda g: _argument_key(g.target))
    args = [round(_argument_key(g.target)[0], 12) for g in others]
    tied = len(set(args)) != len(args)
    n = finite[0].matrix.rows
    above = mp.eye(n)
    below = mp.eye(n)
    for g in others:
        if _argument_key(g.target)[0] > angle:
            above = above * g.matrix
        else:
            below = below * g.matrix
    middle = origin[0].matrix if origin else mp.eye(n)
    return above * middle * below, tied


def monodromy_at_infinity(op: Operator, config: Optional[RunConfig] = None,
                          finite: Optional[Sequence[MonodromyMatrix]] = None) -> Tuple[MonodromyMatrix, Optional[mp.mpf], bool]:

    """
    Direct monodromy at infinity and its comparison with the ordered product of the finite generators.

    Returns:
        Tuple: (matrix at infinity, product residual or None, True when the check was skipped).
    """

    config = config or RunConfig()
    T_inf = monodromy_about(op, INFINITY, config)
    if not finite:
        return T_inf, None, True
    with mp.workdps(T_inf.precision + GUARD_DIGITS):
        angle = ray_direction(op, mp.mpc(0))
        product, tied = ordered_product(finite, angle)
        if tied:
            logger.warning("two singularities share an argument; product check skipped")
            return T_inf, None, True
        residual = max_entry_diff(product, T_inf.matrix)
    logger.info("product check at infinity: residual %s", mp.nstr(residual, 3))
    return T_inf, residual, False


def monodromy_generators(op: Operator, config: Optional[RunConfig] = None,
                         include_infinity: bool = True, progress: bool = False) -> GeneratorSet:
    '''Generators at every finite singularity (and infinity), with identity and conifold flags.'''
    config = config or RunConfig()
    with mp.workdps(config.precision + GUARD_DIGITS):
        descriptor = scaled_origin_basis(op)
        points = [s.point for s in singular_points(op) if not s.point.infinity]
        for s in singular_points(op):
            if s.classification == "irregular":
                raise IrregularSingularityError(f"{s.point.label()} is an irregular singular point")
        origin = [p for p in points if p.is_origin]
        others = sorted((p for p in points if not p.is_origin), key=_argument_key)
        angle = ray_direction(op, mp.mpc(0)) if include_infinity else None

    generators = []
    pbar = tqdm(origin + others, disable=not progress, leave=False)
    for point in pbar:
        pbar.set_description(f"singularity {point.label()}")
        generators.append(monodromy_about(op, point, config, descriptor))
    pbar.close()

    gens = GeneratorSet(generators, RAW_BASIS, angle)
    if include_infinity:
        T_inf, residual, skipped = monodromy_at_infinity(op, config, generators)
        gens.generators.append(T_inf)
        gens.product_residual = residual
        gens.product_skipped = skipped
    return gens


def product_consistent(gens: GeneratorSet) -> Optional[bool]:
    '''Whether the product check passed within the error estimates (None when not run).'''
    if gens.product_residual is None:
        return None
    bound = IDENTITY_FACTOR * sum((g.error_estimate for g in gens.generators), mp.mpf(0))
    return bool(gens.product_residual < bound)
