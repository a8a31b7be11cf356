# test_frobenius.py

import json
import math
from fractions import Fraction

import mpmath as mp
import pytest

from pfm import (
    EvaluationDomainError, ParameterError, catalog_case, list_cases, frobenius_basis, evaluate_basis, local_monodromy,
    renormalize_basis, power_series_coefficients, dump_basis, parse_operator,
)
from pfm.frobenius import ConformalSum, exponent_groups
from pfm.numerics import max_abs


def quintic_y0(z):
    return mp.hyper([mp.mpf(1) / 5, mp.mpf(2) / 5, mp.mpf(3) / 5, mp.mpf(4) / 5], [1, 1, 1], 3125 * z)


# ----------------------------------------------------------------
# series

def test_holomorphic_solution_coefficients(quintic):
    coefficients = power_series_coefficients(quintic, 8)
    assert coefficients == [math.factorial(5 * n) // math.factorial(n) ** 5 for n in range(8)]
    assert all(isinstance(c, Fraction) for c in coefficients)


@pytest.mark.slow
@pytest.mark.parametrize("record", list_cases("hypergeometric4"), ids=lambda r: r.id)
def test_two_hundred_integral_coefficients(record):
    coefficients = power_series_coefficients(record.operator(), 200)
    assert len(coefficients) == 200
    assert all(c.denominator == 1 and c > 0 for c in coefficients)


def test_basis_at_maximally_unipotent_origin(quintic):
    basis = frobenius_basis(quintic, 0, 12)
    assert basis.exponents == (0, 0, 0, 0)
    assert basis.terms == 12
    assert [s.log_power for s in basis.solutions] == [0, 1, 2, 3]
    assert [s.log_depth for s in basis.solutions] == [0, 1, 2, 3]
    assert all(s.exact for s in basis.solutions)
    y1 = basis.solutions[1]
    # y1 = y0 log z + sum 5 (H_5n - H_n) (5n)!/n!^5 z^n
    assert y1.coefficient(0, 1) == 1
    assert y1.coefficient(0, 0) == 0
    assert y1.coefficient(1, 1) == 120
    assert y1.coefficient(1, 0) == 770
    assert basis.radius == mp.mpf(1) / 3125


def test_basis_at_conifold(quintic):
    basis = frobenius_basis(quintic, "1/3125", 15)
    assert basis.exponents == (0, 1, 1, 2)
    assert [(s.shift, s.log_power) for s in basis.solutions] == [(0, 0), (1, 0), (1, 1), (2, 0)]
    assert all(s.exact for s in basis.solutions)
    assert all(isinstance(c, Fraction) for s in basis.solutions for row in s.coefficients for c in row)


def test_basis_at_infinity(quintic):
    basis = frobenius_basis(quintic, "oo", 10)
    assert basis.exponents == tuple(Fraction(k, 5) for k in range(1, 5))
    assert all(s.exact and s.log_depth == 0 for s in basis.solutions)
    assert abs(basis.radius - 3125) < mp.mpf(10) ** -40


def test_exponent_groups():
    groups = exponent_groups([Fraction(0), Fraction(1), Fraction(1), Fraction(2), Fraction(3, 2)])
    assert [g.base for g in groups] == [0, Fraction(3, 2)]
    assert groups[0].multiplicities == ((0, 1), (1, 2), (2, 1))
    assert groups[0].criticals == [(0, 0), (1, 0), (1, 1), (2, 0)]
    assert groups[1].size == 1


def test_order_five_basis_at_the_conifold(order5):
    basis = frobenius_basis(order5, "1/1024", 10)
    assert basis.exponents == (0, 1, 2, 3, Fraction(3, 2))
    M = local_monodromy(basis).matrix
    expected = mp.diag([1, 1, 1, 1, -1])
    assert max_abs(M - expected) < mp.mpf(10) ** -30


def test_resonant_exponents_produce_a_logarithm():
    # 1 + z log z + ... solves theta (theta - 1) y = z y
    op = parse_operator(json.dumps({"expression": "theta*(theta - 1) - z"}))
    basis = frobenius_basis(op, 0, 6)
    first, second = basis.solutions
    assert first.coefficient(1, 1) == 1
    assert first.coefficient(1, 0) == 0
    assert first.log_depth == 1
    assert second.log_depth == 0
    assert second.coefficient(1, 0) == 1


# ----------------------------------------------------------------
# evaluation

def test_evaluation_matches_hypergeometric_function(quintic):
    basis = frobenius_basis(quintic, 0, 80)
    z = mp.mpf(1) / 10000
    evaluation = evaluate_basis(basis, z)
    W = evaluation.matrix
    assert abs(W[0, 0] - quintic_y0(z)) < mp.mpf(10) ** -30
    assert abs(W[0, 1] - mp.diff(quintic_y0, z)) < mp.mpf(10) ** -25
    assert evaluation.column_errors[0] < mp.mpf(10) ** -30
    assert evaluation.column_errors[1] < mp.mpf(10) ** -25
    assert evaluation.error == max(evaluation.column_errors)


def test_evaluation_of_log_solution(quintic):
    basis = frobenius_basis(quintic, 0, 80)
    z = mp.mpf(1) / 10000
    W = evaluate_basis(basis, z).matrix
    y0 = W[0, 0]
    # y1 - y0 log z is holomorphic and vanishes at the origin.
    remainder = W[1, 0] - y0 * mp.log(z)
    assert abs(remainder - 770 * z) < 10 ** 7 * z ** 2


@pytest.mark.parametrize("case_id", ["1", "3", "8"])
def test_wronskian_relation_at_the_origin(case_id):
    # y0 y3' - y0' y3 = y1 y2' - y1' y2
    record = catalog_case(case_id)
    basis = frobenius_basis(record.operator(), 0, 80)
    with mp.workdps(40):
        W = evaluate_basis(basis, 1 / (3 * mp.mpf(int(record.parameters["C"])))).matrix
        outer = W[0, 0] * W[3, 1] - W[0, 1] * W[3, 0]
        inner = W[1, 0] * W[2, 1] - W[1, 1] * W[2, 0]
        assert abs(outer) > 0
        assert abs(outer - inner) < mp.mpf(10) ** -25 * abs(outer)


def test_conformal_summation_of_a_geometric_series():
    # 1/(1 - t) from 30 terms at half the radius
    summation = ConformalSum(mp.mpf(1), mp.mpf(1) / 2, [], 30)
    assert abs(summation.w - (3 - 2 * mp.sqrt(2))) < mp.mpf(10) ** -40
    value, tail = summation.sum([mp.mpf(1)] * 30)
    assert abs(value - 2) < mp.mpf(10) ** -18
    assert tail < mp.mpf(10) ** -15


def test_singularity_inside_the_disk_slows_the_conformal_sum():
    free = ConformalSum(mp.mpf(1), mp.mpf(1) / 2, [], 30)
    blocked = ConformalSum(mp.mpf(1), mp.mpf(1) / 2, [mp.mpf(-3) / 2], 30)
    assert blocked.ratio > free.ratio


def test_thirty_terms_at_half_the_radius(quintic):
    basis = frobenius_basis(quintic, 0, 30)
    z = mp.mpf(1) / 6250
    W = evaluate_basis(basis, z).matrix
    assert abs(W[0, 0] - quintic_y0(z)) < mp.mpf(10) ** -18
    third = mp.diff(quintic_y0, z, 3)
    assert abs(W[0, 3] - third) < mp.mpf(10) ** -15 * abs(third)


def test_branch_record(quintic):
    basis = frobenius_basis(quintic, 0, 30)
    z = mp.mpf(1) / 10000
    principal = evaluate_basis(basis, z).matrix
    turned = evaluate_basis(basis, z, arg=2 * mp.pi).matrix
    two_pi_i = 2j * mp.pi
    assert abs(turned[1, 0] - (principal[1, 0] + two_pi_i * principal[0, 0])) < mp.mpf(10) ** -30


def test_evaluation_domain(quintic):
    origin = frobenius_basis(quintic, 0, 10)
    with pytest.raises(EvaluationDomainError):
        evaluate_basis(origin, mp.mpf(1) / 3200)
    conifold = frobenius_basis(quintic, "1/3125", 10)
    with pytest.raises(EvaluationDomainError):
        evaluate_basis(conifold, mp.mpf(1) / 3125)


# ----------------------------------------------------------------
# local monodromy

def test_local_monodromy_at_origin(quintic):
    M = local_monodromy(frobenius_basis(quintic, 0, 5)).matrix
    two_pi_i = 2j * mp.pi
    for j in range(4):
        for i in range(4):
            expected = two_pi_i ** (j - i) / mp.factorial(j - i) if j >= i else 0
            assert abs(M[j, i] - expected) < mp.mpf(10) ** -40


def test_local_monodromy_at_conifold_is_a_transvection(quintic):
    M = local_monodromy(frobenius_basis(quintic, "1/3125", 10)).matrix
    N = M - mp.eye(4)
    assert max_abs(N) > 1
    assert max_abs(N * N) < mp.mpf(10) ** -30


def test_local_monodromy_at_infinity(quintic):
    M = local_monodromy(frobenius_basis(quintic, "oo", 5)).matrix
    for k in range(4):
        assert abs(M[k, k] - mp.expjpi(mp.mpf(2 * (k + 1)) / 5)) < mp.mpf(10) ** -40


def test_renormalized_basis_conjugates_its_local_monodromy(quintic):
    basis = frobenius_basis(quintic, "1/3125", 10)
    G = [[2, 1, 0, 0], [0, 1, 0, 3], [1, 0, 1, 0], [0, 0, Fraction(1, 2), 1]]
    renormalized = renormalize_basis(basis, G)
    assert renormalized.normalization == "custom"
    assert all(s.exact for s in renormalized.solutions)
    assert renormalized.solutions[0].coefficient(0, 0) == 2
    L = local_monodromy(basis).matrix
    G = mp.matrix([[mp.mpf(Fraction(g).numerator) / Fraction(g).denominator for g in row] for row in G])
    expected = G * L * mp.inverse(G)
    assert max_abs(local_monodromy(renormalized).matrix - expected) < mp.mpf(10) ** -12


def test_renormalization_stays_within_exponent_groups(quintic):
    basis = frobenius_basis(quintic, "oo", 5)
    mixing = [[1, 1, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]
    with pytest.raises(ParameterError):
        renormalize_basis(basis, mixing)
    with pytest.raises(ParameterError):
        renormalize_basis(basis, [[1, 0], [0, 1]])


def test_dump_basis(quintic):
    data = json.loads(dump_basis(frobenius_basis(quintic, 0, 4)))
    assert data["point"] == "0"
    assert data["exponents"] == ["0", "0", "0", "0"]
    assert data["solutions"][3]["log_depth"] == 3
    assert len(data["solutions"][0]["coefficients"]) == 4
