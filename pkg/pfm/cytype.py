# cytype.py

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import mpmath as mp
import sympy

from .analysis import charpoly_coefficients, cyclotomic_factors
from .config import RunConfig
from .errors import NoRationalFound, PFMError
from .frobenius import power_series_coefficients
from .monodromy import monodromy_about
from .numerics import GUARD_DIGITS, rationalize
from .operator import INFINITY, Z, Operator, singular_points, to_monic_derivative_form


logger = logging.getLogger(__name__)

PASS = "pass"
FAIL = "fail"
NOT_CHECKED = "not-checked"
CONDITIONS = ("a", "b", "c", "d", "e", "f", "g")


@dataclass
class CyTypeReport:

    """
    Verdicts for the Calabi-Yau type conditions (a)-(g) with a witness for each verdict.

    Condition (g), integrality of instanton numbers, is always reported not-checked.
    """

    verdicts: Dict[str, str] = field(default_factory=dict)
    witnesses: Dict[str, Any] = field(default_factory=dict)

    def set(self, condition: str, ok: Optional[bool], witness: Any = None):
        self.verdicts[condition] = NOT_CHECKED if ok is None else (PASS if ok else FAIL)
        self.witnesses[condition] = witness

    def passed(self, condition: str) -> bool:
        return self.verdicts.get(condition) == PASS

    @property
    def calabi_yau_type(self) -> bool:
        '''All of (a), (b), (d), (e), (f) pass; (c) is not part of the definition.'''
        return all(self.passed(c) for c in ("a", "b", "d", "e", "f"))

    def as_dict(self) -> Dict[str, Any]:
        return {c: {"verdict": self.verdicts.get(c, NOT_CHECKED), "witness": _jsonable(self.witnesses.get(c))}
                for c in CONDITIONS}


def _jsonable(x: Any) -> Any:
    if x is None or isinstance(x, (bool, int, float, str)):
        return x
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    return str(x)


def condition_f_residual(op: Operator) -> sympy.Expr:
    '''r1 - (r2 r3/2 - r3^3/8 + r2' - 3 r3' r3/4 - r3''/2), simplified; zero when (f) holds.'''
    r3, r2, r1, _ = to_monic_derivative_form(op)
    rhs = r2 * r3 / 2 - r3 ** 3 / 8 + sympy.diff(r2, Z) - sympy.Rational(3, 4) * sympy.diff(r3, Z) * r3 - sympy.diff(r3, Z, 2) / 2
    return sympy.cancel(sympy.together(r1 - rhs))


def _monodromy_at_infinity(op: Operator, config: RunConfig) -> Any:
    try:
        return monodromy_about(op, INFINITY, config)
    except PFMError as e:
        logger.warning("monodromy at infinity failed: %s", e)
        return None


def cy_type_check(op: Operator, N: int = 30, t_inf: Any = None, config: Optional[RunConfig] = None,
                  compute_infinity: bool = True) -> CyTypeReport:

    """
    Check the Calabi-Yau type conditions for a fourth-order operator.

    Parameters:
        op (Operator): Fourth-order operator.
        N (int): Number of coefficients of the holomorphic solution checked for integrality.
        t_inf (Any, optional): Monodromy at infinity (matrix or MonodromyMatrix);
            continued from the origin when omitted.
        config (RunConfig, optional): Continuation settings and rationalization bounds for t_inf.
        compute_infinity (bool): When false and t_inf is omitted, the cyclotomic half
            of (e) is reported not-checked.

    Returns:
        CyTypeReport: One verdict and witness per condition.
    """

    if op.order != 4:
        raise PFMError(f"Calabi-Yau type conditions apply to fourth-order operators, got order {op.order}")
    config = config or RunConfig()
    report = CyTypeReport()
    points = singular_points(op)

    irregular = [s.point.label() for s in points if s.classification == "irregular"]
    report.set("a", not irregular, irregular or None)

    origin = next((s for s in points if s.point.is_origin), None)
    origin_exponents = [str(e) for e in origin.exponents] if origin else None
    report.set("b", bool(origin) and all(e == 0 for e in origin.exponents) and len(origin.exponents) == 4,
               origin_exponents if origin else "z = 0 is not singular")

    conifolds = [s.point.label() for s in points if s.classification == "conifold"]
    report.set("c", bool(conifolds), conifolds or None)

    if report.passed("b"):
        coefficients = power_series_coefficients(op, N)
        bad = next(((n, str(c)) for n, c in enumerate(coefficients) if c.denominator != 1), None)
        report.set("d", bad is None, bad)
    else:
        report.set("d", None, "needs a maximally unipotent origin")

    infinity = next((s for s in points if s.point.infinity), None)
    if infinity is None or not infinity.exponents:
        report.set("e", False, "infinity is irregular")
    else:
        lam = sorted(infinity.exponents)
        symmetric = all(x > 0 for x in lam) and lam[0] + lam[3] == lam[1] + lam[2]
        witness: Dict[str, Any] = {"exponents": [str(x) for x in lam]}
        verdict: Optional[bool] = symmetric
        if symmetric:
            if t_inf is None and compute_infinity:
                t_inf = _monodromy_at_infinity(op, config)
            if t_inf is None:
                verdict = None
                witness["charpoly"] = "monodromy at infinity not available"
            else:
                M = getattr(t_inf, "matrix", t_inf)
                if isinstance(M, sympy.MatrixBase):
                    coeffs = charpoly_coefficients(M)
                    exact_coeffs = [sympy.nsimplify(c) for c in coeffs]
                else:
                    tol = max(config.rat_tol, 1000 * float(getattr(t_inf, "error_estimate", 0)))
                    with mp.workdps(getattr(t_inf, "precision", config.precision) + GUARD_DIGITS):
                        coeffs = charpoly_coefficients(M)
                        try:
                            exact_coeffs = [rationalize(c, config.max_den, tol) for c in coeffs]
                        except NoRationalFound:
                            exact_coeffs = None
                witness["charpoly"] = ([str(c) for c in exact_coeffs] if exact_coeffs is not None
                                       else [mp.nstr(c, 12) for c in coeffs])
                factors = cyclotomic_factors(exact_coeffs) if exact_coeffs is not None else None
                witness["cyclotomic"] = factors
                verdict = factors is not None
        report.set("e", verdict, witness)

    residual = condition_f_residual(op)
    report.set("f", residual == 0, None if residual == 0 else str(sympy.numer(residual)))

    report.set("g", None, "instanton numbers are not computed")
    logger.info("Calabi-Yau type check: %s", ", ".join(f"{c}={v}" for c, v in report.verdicts.items()))
    return report
