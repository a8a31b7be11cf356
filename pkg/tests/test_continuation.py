# test_continuation.py

import json
import math
import random
from fractions import Fraction

import mpmath as mp
import pytest

from pfm import (
    NoAdmissibleChain, ParseError, RunConfig, catalog_case, connect, evaluate_basis, frobenius_basis, local_monodromy,
    parse_operator, plan_waypoints, renormalize_basis, transition_matrix,
)
from pfm.continuation import common_point, hop_feasible, ray_direction, resolve_point
from pfm.numerics import max_abs


def hop_ratios(chain):
    return [r for w in chain[1:] for r in w.ratios]


# ----------------------------------------------------------------
# points

def test_resolve_point_snaps_to_singularities(quintic):
    p = resolve_point(quintic, "1/3125")
    assert p.multiplicity == 1
    assert resolve_point(quintic, mp.mpf(1) / 3125) == p
    assert resolve_point(quintic, "oo").infinity
    assert resolve_point(quintic, "1/7").multiplicity == 0
    assert abs(resolve_point(quintic, "I/10000").approx() - mp.mpc(0, mp.mpf(1) / 10000)) < mp.mpf(10) ** -40


@pytest.mark.parametrize("text", ["abc", "1/"])
def test_resolve_point_rejects_garbage(quintic, text):
    with pytest.raises(ParseError):
        resolve_point(quintic, text)


def test_common_point_balances_ratios():
    zeta = common_point(mp.mpc(0), mp.mpc(3), 1, 2)
    assert zeta == 1
    assert hop_feasible(3, 1, 2, 1.0)
    assert not hop_feasible(3, 1, 2, 0.6)


# ----------------------------------------------------------------
# planning

def test_single_hop_to_conifold(quintic):
    chain = plan_waypoints(quintic, 0, "1/3125")
    assert len(chain) == 2
    assert chain[0].point.is_origin
    assert chain[1].point.label() == "1/3125"
    assert abs(chain[1].common - mp.mpf(1) / 6250) < mp.mpf(10) ** -40
    assert all(abs(r - mp.mpf(0.5)) < mp.mpf(10) ** -40 for r in chain[1].ratios)


def test_tight_ratio_cap_builds_a_ladder(quintic):
    config = RunConfig(ratio_cap=0.3)
    chain = plan_waypoints(quintic, 0, "1/3125", config)
    assert len(chain) > 2
    assert all(r <= 0.3 + 1e-30 for r in hop_ratios(chain))


def test_path_to_infinity(quintic):
    config = RunConfig()
    chain = plan_waypoints(quintic, 0, "oo", config)
    assert chain[-1].point.infinity
    assert all(r <= config.ratio_cap + 1e-30 for r in hop_ratios(chain))
    assert float(ray_direction(quintic, mp.mpc(0))) == -math.pi / 2


def test_planning_is_deterministic(quintic):
    first = plan_waypoints(quintic, 0, "oo")
    second = plan_waypoints(quintic, 0, "oo")
    assert [w.point.label() for w in first] == [w.point.label() for w in second]
    assert [w.common for w in first[1:]] == [w.common for w in second[1:]]


def test_trivial_and_invalid_paths(quintic):
    assert plan_waypoints(quintic, 0, 0) == []
    with pytest.raises(NoAdmissibleChain):
        plan_waypoints(quintic, "oo", 0)


def test_singularity_on_the_segment_is_passed_on_the_left():
    op = catalog_case("17").operator()
    chain = plan_waypoints(op, 0, "5/9")
    assert chain[-1].point.label() == "5/9"
    assert any(mp.im(w.point.approx()) > 0 for w in chain[1:-1])
    assert all(r <= RunConfig().ratio_cap + 1e-30 for r in hop_ratios(chain))


# ----------------------------------------------------------------
# connection matrices

def test_transition_matrix_relates_the_bases(quintic):
    origin = frobenius_basis(quintic, 0, 60)
    ordinary = frobenius_basis(quintic, "1/10000", 60)
    hop = transition_matrix(origin, ordinary, mp.mpf(1) / 20000)
    z = mp.mpf(1) / 15000
    left = evaluate_basis(origin, z).matrix
    right = hop.matrix * evaluate_basis(ordinary, z).matrix
    assert max_abs(left - right) < mp.mpf(10) ** -10 * max_abs(left)
    assert hop.error_estimate < mp.mpf(10) ** -8 * max_abs(hop.matrix)
    assert max_abs(hop.drift) < mp.mpf(10) ** -10


def test_connect_to_conifold(quintic, fast_config):
    transition = connect(quintic, 0, "1/3125", fast_config)
    assert transition.error_estimate < fast_config.tol
    assert len(transition.history) >= 2
    assert all(diff < fast_config.tol for diff in transition.history[-2:])
    with mp.workdps(transition.precision + 10):
        z = mp.mpf(1) / 6000
        left = evaluate_basis(transition.source_basis, z, derivatives=1).matrix
        right = transition.matrix * evaluate_basis(transition.target_basis, z, derivatives=1).matrix
        assert max_abs(left - right) < mp.mpf(10) ** -8 * max_abs(left)


def test_connect_to_the_same_point_is_the_identity(quintic):
    transition = connect(quintic, 0, 0)
    assert max_abs(transition.matrix - mp.eye(4)) == 0


def test_connect_without_refinement(quintic):
    config = RunConfig(terms=30, precision=40, tol=1e-15)
    single = connect(quintic, 0, "1/3125", config, adaptive=False)
    assert single.terms == 30
    assert single.history == []


def test_connect_reverses_paths_from_infinity():
    op = parse_operator(json.dumps({"expression": "theta^2 - 16*z*(theta + 1/2)^2"}))
    config = RunConfig(precision=30, terms=20, tol=1e-12)
    forward = connect(op, 0, "oo", config)
    backward = connect(op, "oo", 0, config)
    with mp.workdps(40):
        assert max_abs(forward.matrix * backward.matrix - mp.eye(2)) < mp.mpf(10) ** -8


def test_connect_along_a_ladder(quintic):
    config = RunConfig(precision=30, terms=20, tol=1e-12, ratio_cap=0.3)
    transition = connect(quintic, 0, "1/3125", config)
    assert len(transition.waypoints) > 2
    direct = connect(quintic, 0, "1/3125", RunConfig(precision=30, terms=20, tol=1e-12))
    with mp.workdps(40):
        assert max_abs(transition.matrix - direct.matrix) < mp.mpf(10) ** -8 * max_abs(direct.matrix)


def test_refinement_needs_two_agreeing_steps(quintic):
    config = RunConfig(precision=30, terms=10, tol=1e-12)
    transition = connect(quintic, 0, "1/3125", config)
    assert transition.terms == 10 * 2 ** len(transition.history)
    assert len(transition.history) >= 2
    assert transition.error_estimate == max(transition.history[-2:])


def test_branch_records_of_a_hop(quintic):
    origin = frobenius_basis(quintic, 0, 40)
    conifold = frobenius_basis(quintic, "1/3125", 40)
    zeta = mp.mpf(1) / 6250
    principal = transition_matrix(origin, conifold, zeta)
    assert max_abs(principal.matrix - transition_matrix(origin, conifold, zeta, 0, mp.pi).matrix) < mp.mpf(10) ** -20
    # one more turn of the conifold variable undoes its local monodromy
    turned = transition_matrix(origin, conifold, zeta, arg_b=3 * mp.pi)
    L = local_monodromy(conifold).matrix
    assert max_abs(turned.matrix * L - principal.matrix) < mp.mpf(10) ** -10 * max_abs(principal.matrix)


def test_hops_compose(quintic):
    origin = frobenius_basis(quintic, 0, 80)
    ordinary = frobenius_basis(quintic, "1/10000", 80)
    conifold = frobenius_basis(quintic, "1/3125", 80)
    with mp.workdps(40):
        first = transition_matrix(origin, ordinary, mp.mpf(1) / 20000)
        second = transition_matrix(ordinary, conifold, mp.mpf(3) / 20000)
        direct = transition_matrix(origin, conifold, mp.mpf(1) / 6250)
        composed = first.matrix * second.matrix
        assert max_abs(composed - direct.matrix) < mp.mpf(10) ** -12 * max_abs(direct.matrix)


def test_hop_and_its_reverse_cancel(quintic):
    origin = frobenius_basis(quintic, 0, 60)
    ordinary = frobenius_basis(quintic, "1/10000", 60)
    zeta = mp.mpf(1) / 20000
    with mp.workdps(40):
        forward = transition_matrix(origin, ordinary, zeta)
        backward = transition_matrix(ordinary, origin, zeta)
        assert max_abs(forward.matrix * backward.matrix - mp.eye(4)) < mp.mpf(10) ** -15


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_monodromy_ignores_the_local_normalization(quintic, seed):
    rng = random.Random(seed)
    G = [[Fraction(rng.randint(-3, 3), rng.randint(1, 4)) + (15 if i == j else 0) for j in range(4)] for i in range(4)]
    origin = frobenius_basis(quintic, 0, 60)
    conifold = frobenius_basis(quintic, "1/3125", 60)
    renormalized = renormalize_basis(conifold, G)
    zeta = mp.mpf(1) / 6250
    with mp.workdps(40):
        results = []
        for basis in (conifold, renormalized):
            C = transition_matrix(origin, basis, zeta).matrix
            results.append(C * local_monodromy(basis).matrix * mp.inverse(C))
        assert max_abs(results[0] - results[1]) < mp.mpf(10) ** -12 * max_abs(results[0])
