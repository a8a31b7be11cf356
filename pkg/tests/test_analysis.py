# test_analysis.py

from fractions import Fraction

import mpmath as mp
import pytest
import sympy

from pfm import (
    NonIntegerInvariant, NotInLevelFamily, NotRawForm, ParameterError, Invariants, CongruenceLevel,
    extract_invariants, theorem1_matrix, cy_conjugate, dm_conjugate, nice_pair, dm_pair, symplectic_check,
    congruence_level, group_index, vanishing_cycle, theorem3_expected, theorem3_fit, exact_generators, match_printed,
)
from pfm.analysis import (
    brute_force_sp4_order, charpoly_coefficients, cyclotomic_factors, diagonal_conjugate, dm_charpoly_check,
    implicit_congruence_check, is_cyclotomic_product, reorder_symplectic, sl2_mod_order, sp4_mod_order,
    theorem3_parameters, tilde_gamma1_index,
)
from pfm.numerics import UNIT, evaluate_exact


QUINTIC = Invariants(5, 50, -200)


def numeric_pair(inv):
    return [evaluate_exact(M) for M in theorem1_matrix(inv)]


# ----------------------------------------------------------------
# invariants

def test_invariant_properties():
    assert QUINTIC.b == Fraction(25, 12)
    assert QUINTIC.k == 5
    assert QUINTIC.a == -200 * UNIT
    with pytest.raises(NotRawForm):
        Invariants(0, 0, 0)


def test_extract_invariants_from_the_raw_pattern():
    _, T1 = numeric_pair(QUINTIC)
    found = extract_invariants(T1)
    assert found.as_tuple() == (5, 50, -200)
    assert found.residual < 1e-40


def test_extract_invariants_rejects_perturbed_matrices():
    _, T1 = numeric_pair(QUINTIC)
    T1[1, 0] += mp.mpf("0.01")
    with pytest.raises(NonIntegerInvariant):
        extract_invariants(T1)
    _, T1 = numeric_pair(QUINTIC)
    T1[0, 1] += 1
    with pytest.raises(NotRawForm):
        extract_invariants(T1)
    with pytest.raises(NotRawForm):
        extract_invariants(mp.eye(3))


def test_raw_pair_is_symplectic_after_reordering():
    T0, T1 = numeric_pair(QUINTIC)
    assert symplectic_check(reorder_symplectic(T0), tol=1e-40)
    assert symplectic_check(reorder_symplectic(T1), tol=1e-40)


# ----------------------------------------------------------------
# basis changes

@pytest.mark.parametrize("inv", [QUINTIC, Invariants(16, 64, -288), Invariants(9, 54, -144), Invariants(1, 46, -288)])
def test_conjugation_gives_the_integral_pair(inv):
    pair = cy_conjugate(list(theorem1_matrix(inv)), inv)
    T0, T1 = exact_generators(pair, 10 ** 6, 1e-30)
    assert (T0, T1) == nice_pair(inv)
    assert symplectic_check(T0) and symplectic_check(T1)


def test_doran_morgan_pair():
    dm = dm_conjugate(list(theorem1_matrix(QUINTIC)), QUINTIC)
    assert tuple(exact_generators(dm, 10 ** 6, 1e-30)) == dm_pair(QUINTIC)


def test_exact_conjugation_cancels_the_unit():
    T0, T1 = cy_conjugate(list(theorem1_matrix(QUINTIC)), QUINTIC)
    assert T0 == nice_pair(QUINTIC)[0]
    assert T1 == nice_pair(QUINTIC)[1]


def test_characteristic_polynomial_at_infinity():
    T0, T1 = nice_pair(QUINTIC)
    coefficients = charpoly_coefficients(T1 * T0)
    # x^4 + (k - 4) x^3 + (6 - 2k + d) x^2 + (k - 4) x + 1
    assert coefficients == [1, 1, 1, 1, 1]
    assert dm_charpoly_check(T1 * T0, QUINTIC)
    assert cyclotomic_factors(coefficients) == [5]


def test_cyclotomic_factors():
    assert cyclotomic_factors([1, 0, 0, 0, -1]) == [1, 2, 4]
    assert cyclotomic_factors([1, -4, 6, -4, 1]) == [1, 1, 1, 1]
    assert cyclotomic_factors([1, 3, 1]) is None
    assert cyclotomic_factors([2, 0, 2]) is None
    assert is_cyclotomic_product([1, 1, 1, 1, 1])
    assert not is_cyclotomic_product([1, 3, 1])


def test_charpoly_numeric_matches_exact():
    M = sympy.ImmutableMatrix([[2, 1, 0], [0, 3, 1], [1, 0, 1]])
    exact = charpoly_coefficients(M)
    numeric = charpoly_coefficients(mp.matrix([[int(x) for x in row] for row in M.tolist()]))
    assert exact == sympy.Matrix(M).charpoly().all_coeffs()
    assert all(abs(n - int(e)) < 1e-40 for n, e in zip(numeric, exact))


def test_diagonal_conjugation():
    M = sympy.ImmutableMatrix([[1, 3], [1, 1]])
    (conjugated,) = diagonal_conjugate([M], [3, 1])
    assert conjugated == sympy.ImmutableMatrix([[1, 9], [sympy.Rational(1, 3), 1]])


# ----------------------------------------------------------------
# symplectic structure

def test_symplectic_check():
    assert symplectic_check(sympy.eye(4))
    assert not symplectic_check(sympy.diag(2, 1, 1, 1))
    assert symplectic_check(sympy.ImmutableMatrix([[1, 0, 1, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]))
    with pytest.raises(ParameterError):
        symplectic_check(sympy.eye(3))


# ----------------------------------------------------------------
# levels

def test_level_of_the_quintic_pair():
    level = congruence_level(nice_pair(QUINTIC))
    assert level == CongruenceLevel(5, 5)
    assert level.variant == "two-parameter"
    assert str(level) == "Gamma(5,5)"
    assert all(level.contains(M) for M in nice_pair(QUINTIC))
    assert all(implicit_congruence_check(M, level) for M in nice_pair(QUINTIC))


def test_level_with_fractional_entries():
    gens = [
        sympy.ImmutableMatrix([[1, 1, 0, 0], [0, 1, 0, 0], [6, 6, 1, 0], [0, -2, -1, 1]]),
        sympy.ImmutableMatrix([[1, 0, sympy.Rational(1, 2), 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]),
    ]
    level = congruence_level(gens)
    assert level.as_tuple() == (6, 2, 2)
    assert level.variant == "three-parameter"
    with pytest.raises(ParameterError):
        group_index(level)


def test_level_rejects_non_rational_entries():
    with pytest.raises(NotInLevelFamily):
        congruence_level([sympy.ImmutableMatrix(4, 4, lambda i, j: UNIT if i == j else 0)])
    with pytest.raises(NotInLevelFamily):
        congruence_level([sympy.ImmutableMatrix(4, 4, lambda i, j: sympy.Rational(1, 2) if (i, j) == (1, 0) else int(i == j))])
    with pytest.raises(NotInLevelFamily):
        congruence_level([mp.eye(4)])


def test_contains_rejects_violations():
    level = CongruenceLevel(5, 5)
    T0, _ = nice_pair(QUINTIC)
    assert not CongruenceLevel(10, 5).contains(T0)
    assert not level.contains(sympy.diag(2, 1, 1, 1))


@pytest.mark.parametrize("d1, d2, index", [(1, 1, 1), (2, 2, 45), (5, 5, 14976), (6, 3, 9600)])
def test_group_index(d1, d2, index):
    assert group_index((d1, d2)) == index
    assert group_index(CongruenceLevel(d1, d2)) == index


def test_group_index_needs_dividing_levels():
    with pytest.raises(ParameterError):
        group_index((3, 2))
    with pytest.raises(ParameterError):
        group_index((0, 1))


def test_group_orders():
    assert tilde_gamma1_index(5) == 624
    assert tilde_gamma1_index(6) == 1200
    assert sl2_mod_order(2) == 6
    assert sp4_mod_order(2) == 720
    assert sp4_mod_order(3) == 51840
    with pytest.raises(ParameterError):
        sp4_mod_order(0)


@pytest.mark.slow
def test_sp4_order_by_enumeration():
    assert brute_force_sp4_order(2) == sp4_mod_order(2)


# ----------------------------------------------------------------
# vanishing cycles

def test_vanishing_cycle():
    _, T1 = nice_pair(QUINTIC)
    cycle = vanishing_cycle(evaluate_exact(T1))
    assert [int(mp.re(cycle.vector[0, j])) for j in range(4)] == [0, 0, 0, 1]
    assert [int(mp.re(x)) for x in cycle.multipliers] == [0, 1, 0, 0]


def test_vanishing_cycle_needs_a_transvection():
    with pytest.raises(ParameterError):
        vanishing_cycle(mp.eye(4))
    with pytest.raises(ParameterError):
        vanishing_cycle(evaluate_exact(nice_pair(QUINTIC)[0]))


# ----------------------------------------------------------------
# order five

def test_order_five_parameters():
    p = theorem3_parameters("1/2", "1/4")
    assert (p.a2, p.c2, p.x_prime, p.C) == (Fraction(8, 9), 32, 24, 4096)
    assert p.ac == Fraction(16, 3)
    assert p.b2 == Fraction(1, 2592)
    assert theorem3_parameters("3/4", "1/2") == p
    assert theorem3_parameters("1/8", "3/8").C == 262144
    with pytest.raises(ParameterError):
        theorem3_parameters("1/5", "2/5")


def test_order_five_pattern_satisfies_the_relation():
    _, T1 = theorem3_expected("1/6", "1/4")
    fit = theorem3_fit(evaluate_exact(T1))
    assert abs(fit.a2 - mp.mpf(289) / 288) < 1e-40
    assert abs(fit.c2 - 8) < 1e-40
    assert abs(fit.x_prime - 80) < 1e-35
    assert fit.pattern_residual < 1e-35
    assert fit.relation_residual < 1e-35
    assert fit.printed_residual > 1e-10


@pytest.mark.parametrize("A, B", [("1/2", "1/2"), ("1/8", "3/8"), ("1/3", "1/6")])
def test_order_five_conifold_is_an_involution(A, B):
    _, T1 = theorem3_expected(A, B)
    assert (T1 * T1).applyfunc(sympy.expand) == sympy.eye(5)
    assert (T1 - sympy.eye(5)).rank() == 1
    _, printed = theorem3_expected(A, B, printed=True)
    assert (printed * printed).applyfunc(sympy.expand) != sympy.eye(5)
    assert printed[0, 2] * 2 == T1[0, 2]
    assert printed[0, 4] * 4 == T1[0, 4]


def test_order_five_origin_matrix():
    T0, _ = theorem3_expected("1/3", "1/4")
    assert T0[0, 4] == sympy.Rational(1, 24)
    assert T0[4, 0] == 0


# ----------------------------------------------------------------
# printed matrices

def test_match_printed():
    T0, T1 = nice_pair(QUINTIC)
    assert match_printed(T1, T1) == "direct"
    assert match_printed(T1.inv(), T1) == "inverse"
    assert match_printed(T1, T0 * T1 * T0.inv(), T0) == "conjugated-by-T0"
    assert match_printed(T1, sympy.diag(2, 1, 1, 1)) is None
