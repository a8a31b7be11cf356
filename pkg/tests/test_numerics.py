# test_numerics.py

import math
from fractions import Fraction

import mpmath as mp
import pytest
import sympy

from pfm import NoRationalFound, ParseError
from pfm.numerics import (
    UNIT, compute_constants, working_constants, to_mpc, to_fraction, rational_approximation, rationalize,
    rationalize_matrix, evaluate_exact, taylor_shift, matrix_to_json, matrix_from_json, exact_matrix,
)
from pfm.utils import format_time, timed


def test_constants():
    c = compute_constants(40)
    assert abs(c.pi - mp.pi) < mp.mpf(10) ** -45
    assert abs(c.zeta3 - mp.mpf("1.2020569031595942853997381615114499907649862923405")) < mp.mpf(10) ** -45
    assert abs(c.two_pi_i_powers[2] + 4 * mp.pi ** 2) < mp.mpf(10) ** -40
    assert abs(c.unit - c.zeta3 / (2j * mp.pi) ** 3) < mp.mpf(10) ** -40
    assert compute_constants(40) is c


def test_constants_need_twenty_digits():
    with pytest.raises(ValueError):
        compute_constants(10)


def test_working_constants_follow_precision():
    with mp.workdps(70):
        assert working_constants().precision == 60


def test_to_mpc():
    assert to_mpc(Fraction(1, 4)) == mp.mpc(0.25)
    assert to_mpc(sympy.Rational(-3, 8)) == mp.mpc(-0.375)
    assert abs(to_mpc(sympy.sqrt(2) * sympy.I) - mp.mpc(0, mp.sqrt(2))) < mp.mpf(10) ** -45
    with pytest.raises(TypeError):
        to_mpc(object())


def test_to_fraction_is_exact():
    value = to_fraction(mp.mpf(0.375))
    assert value == Fraction(3, 8)
    assert type(value.numerator) is int and type(value.denominator) is int
    assert math.floor(to_fraction(mp.mpf(-2.5))) == -3


# ----------------------------------------------------------------
# rational reconstruction

def test_rational_approximation():
    x = mp.mpf(289) / 288
    assert rational_approximation(x, 10 ** 6, 1e-30) == Fraction(289, 288)
    assert rational_approximation(mp.mpf(10) ** -40, 100, 1e-30) == 0


def test_rational_approximation_fails_for_irrationals():
    with pytest.raises(NoRationalFound):
        rational_approximation(mp.pi, 10 ** 6, 1e-30)


def test_rationalize_gaussian():
    value = mp.mpc(mp.mpf(1) / 3, -mp.mpf(5) / 7)
    assert rationalize(value) == sympy.Rational(1, 3) - sympy.I * sympy.Rational(5, 7)
    assert rationalize(mp.mpc(2, mp.mpf(10) ** -35)) == 2


@pytest.mark.parametrize("n", [2, 3, 12, 140])
def test_rationalize_is_scale_consistent(n):
    x = mp.mpc(mp.mpf(5) / 7, -mp.mpf(3) / 11)
    assert rationalize(n * x, 10 ** 4) == n * rationalize(x, 10 ** 4)
    assert rationalize(n * x.real, 10 ** 4) == n * rationalize(x.real, 10 ** 4)


def test_rationalize_rejects_nonpositive_tolerance():
    with pytest.raises(ValueError):
        rationalize(1, tol=0)


def test_rationalize_matrix():
    M = mp.matrix([[1, mp.mpf(-9)], [mp.mpf(1) / 2, 0]])
    assert rationalize_matrix(M) == sympy.ImmutableMatrix([[1, -9], [sympy.Rational(1, 2), 0]])


# ----------------------------------------------------------------
# matrices

def test_evaluate_exact_substitutes_the_unit():
    M = sympy.ImmutableMatrix([[1 + 5 * UNIT, UNIT ** 2], [sympy.Rational(1, 3), 0]])
    E = evaluate_exact(M)
    unit = working_constants().unit
    assert abs(E[0, 0] - (1 + 5 * unit)) < mp.mpf(10) ** -40
    assert abs(E[0, 1] - unit ** 2) < mp.mpf(10) ** -40
    assert abs(E[1, 0] - mp.mpf(1) / 3) < mp.mpf(10) ** -40


def test_taylor_shift():
    # (1 + x)^2 around x0 = 2: 9 + 6 t + t^2
    assert taylor_shift([Fraction(1), Fraction(2), Fraction(1)], Fraction(2)) == [9, 6, 1]


def test_matrix_json_exact_with_unit():
    M = sympy.ImmutableMatrix([[1 - 200 * UNIT, sympy.Rational(-5, 24)], [0, 1]])
    data = matrix_to_json(M)
    assert data["unit"] == "zeta3_over_2pii_cubed"
    assert data["entries"][0][0] == ["1", "-200"]
    assert matrix_from_json(data) == M


def test_matrix_json_floating():
    M = mp.matrix([[mp.mpc(1, 2), 0], [0, mp.mpf(1) / 3]])
    back = matrix_from_json(matrix_to_json(M, digits=40))
    assert mp.mnorm(back - M, 1) < mp.mpf(10) ** -35


def test_matrix_json_errors():
    with pytest.raises(ParseError):
        matrix_from_json({"rows": 1})
    with pytest.raises(ParseError):
        exact_matrix([["1/0"]])
    with pytest.raises(ParseError):
        exact_matrix([[True]])


def test_exact_matrix():
    assert exact_matrix([["1/3", 2], [Fraction(1, 2), "-7"]]) == sympy.ImmutableMatrix(
        [[sympy.Rational(1, 3), 2], [sympy.Rational(1, 2), -7]])


# ----------------------------------------------------------------
# utils

def test_format_time():
    assert format_time(0.25) == "250ms"
    assert format_time(3.24) == "3.2s"
    assert format_time(72) == "1m12s"
    assert format_time(7260) == "2h01m"


def test_timed_records_duration():
    record = {}
    with timed(record):
        pass
    assert record["seconds"] >= 0
