# continuation.py

import math
import logging
import functools
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Any, List, Optional, Sequence, Tuple

import mpmath as mp
import sympy
from tqdm import tqdm

from .config import RunConfig
from .errors import (
    ConvergenceError,
    NoAdmissibleChain,
    ParseError,
    SingularMatrixError,
)
from .frobenius import FrobeniusBasis, evaluate_basis, frobenius_basis, local_radius
from .numerics import GUARD_DIGITS, abs_matrix, max_abs, max_entry_diff, to_mpc
from .operator import INFINITY, Operator, Point, singular_points


logger = logging.getLogger(__name__)

# A singularity closer than this fraction of its own radius to a path segment is detoured.
DETOUR_CLEARANCE = 0.25
# Distance of the detour via point from the singularity, as a fraction of its radius.
DETOUR_OFFSET = 0.5
# Candidate directions for rays towards infinity, tried in order.
RAY_ANGLES = (-math.pi / 2, -math.pi / 2 + 0.3, -math.pi / 2 - 0.3, -math.pi / 4, -3 * math.pi / 4, -math.pi / 8, -7 * math.pi / 8)
MAX_HOPS = 400


@dataclass(frozen=True)
class Waypoint:

    """
    Anchor of a continuation path.

    Parameters:
        point (Point): Expansion point of the local basis used here.
        radius (mp.mpf): Convergence radius of that basis (in 1/z at infinity).
        common (mp.mpc, optional): Point shared with the previous anchor's disk.
        ratios (Tuple[mp.mpf, mp.mpf]): Hop ratios of the previous anchor and this one at common.
    """

    point: Point
    radius: mp.mpf
    common: Optional[mp.mpc] = None
    ratios: Tuple[mp.mpf, mp.mpf] = (mp.mpf(0), mp.mpf(0))


@dataclass
class TransitionMatrix:

    """
    Connection matrix M with W_source = M W_target at every common point of the path.

    Rows of M express the solutions of the source basis in the target basis.
    """

    source: Point
    target: Point
    matrix: mp.matrix
    error_estimate: mp.mpf
    terms: int = 0
    precision: int = 0
    condition: mp.mpf = mp.mpf(1)
    target_basis: Optional[FrobeniusBasis] = None
    source_basis: Optional[FrobeniusBasis] = None
    waypoints: List[Waypoint] = field(default_factory=list)
    history: List[mp.mpf] = field(default_factory=list)
    # entrywise bound on dM M^-1, the error seen from the source basis
    drift: Optional[mp.matrix] = None


def resolve_point(op: Operator, x: Any) -> Point:
    '''Point for x, replaced by the matching singular point of op when x is one.'''
    if isinstance(x, str):
        text = x.strip()
        if text in ("inf", "oo", "infinity", "∞"):
            return INFINITY
        try:
            point = Point(Fraction(text))
        except (ValueError, ZeroDivisionError):
            try:
                point = Point(to_mpc(sympy.sympify(text)))
            except (sympy.SympifyError, TypeError, ValueError) as e:
                raise ParseError(f"cannot read point {x!r}") from e
    else:
        point = Point.at(x)
    if point.infinity:
        return INFINITY
    z = point.approx()
    tol = mp.mpf(10) ** (-(mp.mp.dps // 2)) * max(1, abs(z))
    for s in singular_points(op):
        if not s.point.infinity and abs(s.point.approx() - z) < tol:
            return s.point
    return point


def _radius(op: Operator, point: Point) -> mp.mpf:
    return local_radius(op, point)


def _finite_singular(op: Operator) -> List[Point]:
    return [s.point for s in singular_points(op) if not s.point.infinity]


def hop_feasible(distance, radius_a, radius_b, cap) -> bool:
    return distance <= cap * (radius_a + radius_b)


def common_point(a: mp.mpc, b: mp.mpc, radius_a, radius_b) -> mp.mpc:
    '''Point on [a, b] at which both hop ratios are |b - a| / (radius_a + radius_b).'''
    if radius_a == mp.inf:
        return b
    if radius_b == mp.inf:
        return a
    return a + (b - a) * radius_a / (radius_a + radius_b)


def _detours(op: Operator, a: mp.mpc, b: mp.mpc, skip: Sequence[Point]) -> List[mp.mpc]:
    '''Via points passing singularities that lie on the segment [a, b] on their left side.'''
    length = abs(b - a)
    if length == 0:
        return []
    u = (b - a) / length
    blocked = []
    for s in _finite_singular(op):
        if s in skip:
            continue
        z = s.approx()
        tau = mp.re((z - a) * mp.conj(b - a)) / length ** 2
        if not 0 < tau < 1:
            continue
        radius = _radius(op, s)
        if abs(z - (a + tau * (b - a))) < DETOUR_CLEARANCE * radius:
            blocked.append((tau, z + DETOUR_OFFSET * radius * mp.mpc(0, 1) * u))
    return [via for _, via in sorted(blocked, key=lambda x: x[0])]


def _walk(op: Operator, start: Waypoint, end: Point, config: RunConfig) -> List[Waypoint]:
    '''Ladder of anchors from start to end (finite) with every hop within the ratio cap.'''
    out = []
    current = start
    target = end.approx()
    end_radius = _radius(op, end)
    for _ in range(MAX_HOPS):
        c = current.point.approx()
        distance = abs(target - c)
        if hop_feasible(distance, current.radius, end_radius, config.ratio_cap):
            zeta = common_point(c, target, current.radius, end_radius)
            ratios = (abs(zeta - c) / current.radius, abs(zeta - target) / end_radius)
            out.append(Waypoint(end, end_radius, zeta, ratios))
            return out
        step = (config.ladder - 1) * current.radius
        while True:
            step = min(step, distance)
            w = c + (target - c) * step / distance
            radius = _radius(op, Point(w))
            if radius > 0 and hop_feasible(step, current.radius, radius, config.ratio_cap):
                break
            step /= 2
            if step < mp.mpf(10) ** (-6) * current.radius:
                raise NoAdmissibleChain(f"cannot make progress towards {end.label()} from {mp.nstr(c, 10)}")
        zeta = common_point(c, w, current.radius, radius)
        current = Waypoint(Point(w), radius, zeta, (abs(zeta - c) / current.radius, abs(zeta - w) / radius))
        out.append(current)
    raise NoAdmissibleChain(f"more than {MAX_HOPS} hops needed to reach {end.label()}")


def ray_direction(op: Operator, origin: mp.mpc) -> mp.mpf:
    '''First candidate angle whose ray from origin keeps clear of every finite singularity.'''
    points = [s for s in _finite_singular(op) if abs(s.approx() - origin) > mp.mpf(10) ** (-(mp.mp.dps // 2))]
    for angle in RAY_ANGLES:
        u = mp.expj(angle)
        clear = True
        for s in points:
            z = s.approx() - origin
            along = mp.re(z * mp.conj(u))
            gap = abs(z) if along <= 0 else abs(z - along * u)
            if gap < DETOUR_CLEARANCE * _radius(op, s):
                clear = False
                break
        if clear:
            return mp.mpf(angle)
    raise NoAdmissibleChain("no candidate ray to infinity keeps clear of the singularities")


def _walk_to_infinity(op: Operator, start: Waypoint, angle, config: RunConfig) -> List[Waypoint]:
    finite = _finite_singular(op)
    rho = max(abs(s.approx()) for s in finite) if finite else mp.mpf(0)
    u = mp.expj(angle)
    out = []
    current = start
    for _ in range(MAX_HOPS):
        c = current.point.approx()
        if rho == 0:
            x = current.radius * config.ratio_cap / 2 if current.radius != mp.inf else mp.mpf(1)
        else:
            x = (-abs(c) + mp.sqrt(abs(c) ** 2 + 4 * rho * current.radius)) / 2
        if current.radius == mp.inf or x <= config.ratio_cap * current.radius:
            zeta = c + x * u
            inf_radius = 1 / rho if rho else mp.inf
            ratios = (x / current.radius if current.radius != mp.inf else mp.mpf(0), rho / abs(zeta))
            out.append(Waypoint(INFINITY, inf_radius, zeta, ratios))
            return out
        step = (config.ladder - 1) * current.radius
        while True:
            w = c + step * u
            radius = _radius(op, Point(w))
            if hop_feasible(step, current.radius, radius, config.ratio_cap):
                break
            step /= 2
            if step < mp.mpf(10) ** (-6) * current.radius:
                raise NoAdmissibleChain(f"cannot move towards infinity from {mp.nstr(c, 10)}")
        zeta = common_point(c, w, current.radius, radius)
        current = Waypoint(Point(w), radius, zeta, (abs(zeta - c) / current.radius, abs(zeta - w) / radius))
        out.append(current)
    raise NoAdmissibleChain(f"more than {MAX_HOPS} hops needed to reach infinity")


def plan_waypoints(op: Operator, z_from: Any, z_to: Any, config: Optional[RunConfig] = None) -> List[Waypoint]:

    """
    Chain of anchors from z_from to z_to whose consecutive disks overlap within the ratio cap.

    Finite targets are approached along the segment from z_from, passing any
    singularity on the segment on its left side; infinity is approached along
    the first admissible candidate ray. The plan is deterministic.

    Parameters:
        op (Operator): The operator.
        z_from (Any): Start point (finite).
        z_to (Any): End point, finite or infinity.
        config (RunConfig, optional): Supplies ratio_cap and ladder.

    Returns:
        List[Waypoint]: Anchors including both endpoints; empty when z_from equals z_to.
    """

    config = config or RunConfig()
    start = resolve_point(op, z_from)
    end = resolve_point(op, z_to)
    if start == end:
        return []
    if start.infinity:
        raise NoAdmissibleChain("paths must start at a finite point")
    first = Waypoint(start, _radius(op, start))
    chain = [first]
    if end.infinity:
        origin = start.approx()
        angle = ray_direction(op, origin)
        logger.debug("ray to infinity from %s at angle %s", start.label(), mp.nstr(angle, 6))
        chain.extend(_walk_to_infinity(op, first, angle, config))
    else:
        a, b = start.approx(), end.approx()
        legs = [Point(v) for v in _detours(op, a, b, skip=(start, end))] + [end]
        for leg in legs:
            chain.extend(_walk(op, chain[-1], leg, config))
    logger.debug("waypoints %s -> %s: %s", start.label(), end.label(), [w.point.label() for w in chain])
    return chain


def _scaled_evaluation(basis: FrobeniusBasis, zeta: mp.mpc, h: mp.mpf, arg: Optional[mp.mpf] = None):
    evaluation = evaluate_basis(basis, zeta, arg)
    W = evaluation.matrix.copy()
    E = evaluation.errors.copy()
    scale = [h ** k for k in range(W.cols)]
    for i in range(W.rows):
        for k in range(W.cols):
            W[i, k] *= scale[k]
            E[i, k] *= scale[k]
    return W, E


def transition_matrix(basis_a: FrobeniusBasis, basis_b: FrobeniusBasis, zeta: Any,
                      arg_a: Optional[mp.mpf] = None, arg_b: Optional[mp.mpf] = None) -> TransitionMatrix:

    """
    Solve W_A = M W_B at the common point zeta.

    Derivative columns are scaled by powers of the distance from zeta to the
    nearer expansion point before the solve. Errors are propagated entrywise:
    the estimate bounds |dM| <= (|dW_A| + |M| |dW_B|) |W_B^-1|, and the drift
    bounds dM M^-1 the same way with |W_A^-1|.

    Parameters:
        basis_a (FrobeniusBasis): Source basis.
        basis_b (FrobeniusBasis): Target basis.
        zeta (Any): Common point inside both safety disks.
        arg_a (mp.mpf, optional): Branch record of the local variable of basis_a
            at zeta; principal when omitted.
        arg_b (mp.mpf, optional): The same for basis_b.

    Returns:
        TransitionMatrix: The connection matrix with its error estimate and condition number.
    """

    zeta = to_mpc(zeta)
    distances = [abs(zeta - b.point.approx()) for b in (basis_a, basis_b) if not b.point.infinity]
    h = min(distances) if distances else 1 / abs(zeta)
    h = min(h, mp.mpf(1)) if h > 0 else mp.mpf(1)
    WA, EA = _scaled_evaluation(basis_a, zeta, h, arg_a)
    WB, EB = _scaled_evaluation(basis_b, zeta, h, arg_b)
    try:
        inverse = mp.inverse(WB)
        inverse_a = mp.inverse(WA)
    except ZeroDivisionError as e:
        raise SingularMatrixError(f"evaluation matrix at {mp.nstr(zeta, 10)} is singular") from e
    condition = mp.mnorm(WB, 1) * mp.mnorm(inverse, 1)
    if condition > mp.mpf(10) ** (mp.mp.dps // 2):
        raise SingularMatrixError(f"evaluation matrix at {mp.nstr(zeta, 10)} has condition {mp.nstr(condition, 5)}")
    M = WA * inverse
    residual = EA + abs_matrix(M) * EB
    error = max_abs(residual * abs_matrix(inverse))
    drift = residual * abs_matrix(inverse_a)
    return TransitionMatrix(basis_a.point, basis_b.point, M, error, basis_a.terms,
                            mp.mp.dps - GUARD_DIGITS, condition, basis_b, basis_a, drift=drift)


@functools.lru_cache(maxsize=256)
def _cached_basis(op: Operator, point: Point, N: int, dps: int) -> FrobeniusBasis:
    return frobenius_basis(op, point, N)


def chain_product(op: Operator, chain: Sequence[Waypoint], N: int) -> TransitionMatrix:
    '''Product M_01 M_12 ... of the hop matrices along a planned chain.'''
    bases = [_cached_basis(op, w.point, N, mp.mp.dps) for w in chain]
    n = bases[0].order
    M = mp.eye(n)
    error = mp.mpf(0)
    condition = mp.mpf(1)
    drift = mp.zeros(n, n)
    for k in range(1, len(chain)):
        hop = transition_matrix(bases[k - 1], bases[k], chain[k].common)
        error = error * max_abs(hop.matrix) + max_abs(M) * hop.error_estimate
        # dM_k M_k^-1 seen from the start of the chain is M dM_k M_k^-1 M^-1
        drift += abs_matrix(M) * hop.drift * abs_matrix(mp.inverse(M))
        M = M * hop.matrix
        condition = max(condition, hop.condition)
    return TransitionMatrix(chain[0].point, chain[-1].point, M, error, N, mp.mp.dps - GUARD_DIGITS,
                            condition, bases[-1], bases[0], list(chain), drift=drift)


def connect(op: Operator, z_from: Any, z_to: Any, config: Optional[RunConfig] = None,
            adaptive: bool = True, progress: bool = False) -> TransitionMatrix:

    """
    Transition matrix from the basis at z_from to the basis at z_to.

    With adaptive set, N is doubled (and the precision raised by 20 digits when
    the condition number eats into the tolerance) until the matrices of three
    successive refinements agree entrywise within config.tol; the reported
    error is the larger of the two last differences.

    Parameters:
        op (Operator): The operator.
        z_from (Any): Start point.
        z_to (Any): End point.
        config (RunConfig, optional): Numerical settings.
        adaptive (bool): Refine until converged, else a single pass at config.terms.
        progress (bool): Show a tqdm bar over the refinement steps.

    Returns:
        TransitionMatrix: Converged connection matrix, W_from = M W_to.
    """

    config = config or RunConfig()
    with mp.workdps(config.precision + GUARD_DIGITS):
        start = resolve_point(op, z_from)
        end = resolve_point(op, z_to)
        if start.infinity and not end.infinity:
            reverse = connect(op, end, start, config, adaptive, progress)
            with mp.workdps(reverse.precision + GUARD_DIGITS):
                inverse = mp.inverse(reverse.matrix)
                drift = None
                if reverse.drift is not None:
                    drift = abs_matrix(inverse) * reverse.drift * abs_matrix(reverse.matrix)
            return TransitionMatrix(start, end, inverse, reverse.error_estimate * max_abs(inverse) ** 2,
                                    reverse.terms, reverse.precision, reverse.condition,
                                    reverse.source_basis, reverse.target_basis,
                                    list(reversed(reverse.waypoints)), reverse.history, drift=drift)
        chain = plan_waypoints(op, start, end, config)
        if not chain:
            basis = _cached_basis(op, start, config.terms, mp.mp.dps)
            return TransitionMatrix(start, end, mp.eye(op.order), mp.mpf(0), config.terms,
                                    config.precision, mp.mpf(1), basis, basis, [], drift=mp.zeros(op.order, op.order))

    if not adaptive:
        with mp.workdps(config.precision + GUARD_DIGITS):
            return chain_product(op, chain, config.terms)

    precision, N = config.precision, config.terms
    previous: Optional[TransitionMatrix] = None
    history: List[mp.mpf] = []
    differences: List[mp.matrix] = []
    pbar = tqdm(total=None, disable=not progress, leave=False)
    try:
        while True:
            with mp.workdps(precision + GUARD_DIGITS):
                current = chain_product(op, chain, N)
                if previous is not None:
                    diff = max_entry_diff(current.matrix, previous.matrix)
                    history.append(diff)
                    differences.append(abs_matrix(current.matrix - previous.matrix))
                    pbar.set_description(f"{start.label()} -> {end.label()} N={N} P={precision} diff={mp.nstr(diff, 3)}")
                    logger.debug("refinement N=%d P=%d: diff %s", N, precision, mp.nstr(diff, 5))
                    if len(history) >= 2 and max(history[-2:]) < config.tol:
                        current.error_estimate = max(history[-2:])
                        current.history = history
                        current.drift = (differences[-1] + differences[-2]) * abs_matrix(mp.inverse(current.matrix))
                        logger.info("connected %s -> %s with N=%d P=%d (%d hops)", start.label(), end.label(),
                                    N, precision, len(chain) - 1)
                        return current
                pbar.update(1)
                if current.condition * mp.mpf(10) ** (-precision) > config.tol / 10:
                    if precision + 20 > config.max_precision:
                        raise ConvergenceError(f"precision budget {config.max_precision} exhausted", current.matrix, history)
                    precision += 20
                    logger.debug("raising precision to %d", precision)
            previous = current
            N *= 2
            if N > config.max_terms:
                raise ConvergenceError(f"no agreement to {config.tol:g} within {config.max_terms} terms",
                                       current.matrix, history)
    finally:
        pbar.close()
