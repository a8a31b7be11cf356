# catalog.py

import os
import json
import logging
import functools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import mpmath as mp
import sympy
from tqdm import tqdm

from .analysis import (
    ORDER5_DISPLAY_ADVISORY, CongruenceLevel, Invariants, congruence_level, cy_conjugate,
    diagonal_conjugate, dm_charpoly_check, dm_conjugate, dm_pair, exact_generators, extract_invariants,
    group_index, implicit_congruence_check, match_printed, nice_pair, symplectic_check, theorem1_matrix,
    theorem3_expected, theorem3_fit, theorem3_parameters,
)
from .config import RunConfig, data_dir
from .cytype import cy_type_check
from .errors import PFMError, UnknownCase
from .monodromy import monodromy_about, monodromy_generators, product_consistent
from .numerics import GUARD_DIGITS, evaluate_exact, exact_matrix, max_entry_diff, rationalize_matrix
from .operator import Operator, from_hypergeometric4, from_hypergeometric5, parse_operator
from .utils import format_time, timed


logger = logging.getLogger(__name__)

FIXTURE_FILES = ("hypergeometric.json", "order5.json", "printed.json", "smoke.json")


@dataclass(frozen=True)
class CaseRecord:

    """
    One catalogued operator or printed monodromy representation.

    Parameters:
        id (str): Equation number, "o5-n" for order-five cases or a smoke-test name.
        family (str): hypergeometric4, hypergeometric5, calabi-yau, integral or smoke.
        source (dict, optional): Operator JSON (theta coefficients or expression); None when not printed.
        parameters (dict): Hypergeometric parameters A, B (and C) as strings.
        invariants (Invariants, optional): Expected (H^3, c_2.H, c_3).
        provenance (str): proved, stated or conjectural.
        level (CongruenceLevel, optional): Level as printed.
        generators (Tuple[sympy.ImmutableMatrix, ...]): Printed generators, T_0 first.
    """

    id: str
    family: str
    source: Optional[Dict[str, Any]] = None
    parameters: Dict[str, str] = field(default_factory=dict)
    description: str = ""
    invariants: Optional[Invariants] = None
    provenance: str = ""
    level: Optional[CongruenceLevel] = None
    generators: Tuple[sympy.ImmutableMatrix, ...] = ()
    apparent: Tuple[str, ...] = ()
    conjugate_diagonal: Tuple[int, ...] = ()
    conjugate_level: Optional[CongruenceLevel] = None
    order5: Dict[str, Any] = field(default_factory=dict)
    references: Tuple[str, ...] = ()
    notes: Tuple[str, ...] = ()
    level_advisory: bool = False
    c3_sign_advisory: bool = False

    @property
    def has_operator(self) -> bool:
        return self.source is not None or self.family in ("hypergeometric4", "hypergeometric5")

    def operator(self) -> Operator:
        if self.family == "hypergeometric4":
            p = self.parameters
            return from_hypergeometric4(p["A"], p["B"], p["C"])
        if self.family == "hypergeometric5":
            p = self.parameters
            return from_hypergeometric5(p["A"], p["B"], p["C"])
        if self.source is None:
            raise PFMError(f"case {self.id} has no operator; only matrix checks apply")
        return parse_operator(json.dumps(self.source))

    def printed_group(self) -> List[sympy.ImmutableMatrix]:
        '''Printed generators plus the conifold matrix I + E_24 the tables leave out.'''
        if not self.generators or self.invariants is None:
            return list(self.generators)
        return list(self.generators) + [nice_pair(self.invariants)[1]]

    def as_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"id": self.id, "family": self.family}
        if self.family.startswith("hypergeometric"):
            data["parameters"] = dict(self.parameters)
        else:
            data["operator"] = self.source
        if self.description:
            data["description"] = self.description
        if self.invariants is not None:
            inv = self.invariants
            data["invariants"] = {"H3": inv.d, "c2H": inv.c2H, "c3": inv.c3, "provenance": self.provenance}
        if self.level is not None:
            data["level"] = list(self.level.as_tuple())
        if self.generators:
            data["generators"] = [[[str(x) for x in M.row(i)] for i in range(M.rows)] for M in self.generators]
        if self.apparent:
            data["apparent"] = list(self.apparent)
        if self.conjugate_diagonal:
            data["conjugate_diagonal"] = list(self.conjugate_diagonal)
            data["conjugate_level"] = list(self.conjugate_level.as_tuple())
        if self.order5:
            data["order5"] = dict(self.order5)
        if self.level_advisory:
            data["level_advisory"] = True
        if self.c3_sign_advisory:
            data["c3_sign_advisory"] = True
        data["references"] = list(self.references)
        data["notes"] = list(self.notes)
        return data


def _level(values: Optional[Sequence[int]]) -> Optional[CongruenceLevel]:
    if not values:
        return None
    return CongruenceLevel(*values)


def _record(entry: Dict[str, Any]) -> CaseRecord:
    invariants = entry.get("invariants")
    return CaseRecord(
        id=str(entry["id"]),
        family=entry["family"],
        source=entry.get("operator"),
        parameters={k: str(v) for k, v in entry.get("parameters", {}).items()},
        description=entry.get("description", ""),
        invariants=Invariants(invariants["H3"], invariants["c2H"], invariants["c3"]) if invariants else None,
        provenance=invariants.get("provenance", "") if invariants else "",
        level=_level(entry.get("level")),
        generators=tuple(exact_matrix(rows) for rows in entry.get("generators", [])),
        apparent=tuple(entry.get("apparent", [])),
        conjugate_diagonal=tuple(entry.get("conjugate_diagonal", [])),
        conjugate_level=_level(entry.get("conjugate_level")),
        order5=dict(entry.get("order5", {})),
        references=tuple(entry.get("references", [])),
        notes=tuple(entry.get("notes", [])),
        level_advisory=bool(entry.get("level_advisory", False)),
        c3_sign_advisory=bool(entry.get("c3_sign_advisory", False)),
    )


class Catalog:

    """
    Fixture records read from the JSON files of a data directory.

    Note: ids are unique across files; a later file overrides an earlier one.
    """

    def __init__(self, data_root: Optional[str] = None):
        self.data_root = data_root or data_dir()
        self.records: Dict[str, CaseRecord] = {}
        for name in FIXTURE_FILES:
            path = os.path.join(self.data_root, name)
            if not os.path.exists(path):
                logger.warning("fixture file %s is missing", path)
                continue
            with open(path) as fp:
                entries = json.load(fp)
            for entry in entries:
                record = _record(entry)
                self.records[record.id] = record

    def __len__(self):
        return len(self.records)

    def __iter__(self) -> Iterator[CaseRecord]:
        return iter(self.records.values())

    def __getitem__(self, case_id: Any) -> CaseRecord:
        try:
            return self.records[str(case_id)]
        except KeyError:
            raise UnknownCase(f"unknown case {case_id!r}") from None

    def ids(self) -> List[str]:
        return list(self.records)


@functools.lru_cache(maxsize=4)
def _load(data_root: str) -> Catalog:
    return Catalog(data_root)


def load_catalog() -> Catalog:
    return _load(data_dir())


def catalog_case(case_id: Any) -> CaseRecord:
    return load_catalog()[case_id]


def list_cases(family: Optional[str] = None) -> List[CaseRecord]:
    return [r for r in load_catalog() if family is None or r.family == family]


def export_catalog(directory: str) -> List[str]:
    '''Write the catalog as JSON fixture files under directory; returns the paths written.'''
    os.makedirs(directory, exist_ok=True)
    groups: Dict[str, List[Dict[str, Any]]] = {name: [] for name in FIXTURE_FILES}
    for record in load_catalog():
        if record.family == "hypergeometric4":
            name = "hypergeometric.json"
        elif record.family == "hypergeometric5":
            name = "order5.json"
        elif record.family == "smoke":
            name = "smoke.json"
        else:
            name = "printed.json"
        groups[name].append(record.as_dict())
    paths = []
    for name, entries in groups.items():
        path = os.path.join(directory, name)
        with open(path, "w") as fp:
            json.dump(entries, fp, indent=1)
        paths.append(path)
    logger.info("exported %d cases to %s", len(load_catalog()), directory)
    return paths


# ----------------------------------------------------------------------------
# Verification


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""
    advisory: bool = False


@dataclass
class VerificationReport:

    """
    Outcome of running the pipeline against one catalogued case.

    Advisory checks document known anomalies of the printed data and never
    fail the report.
    """

    case: str
    checks: List[Check] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    invariants: Optional[Tuple[int, int, int]] = None
    level: Optional[str] = None
    seconds: float = 0.0

    def add(self, name: str, ok: bool, detail: Any = "", advisory: bool = False):
        self.checks.append(Check(name, bool(ok), str(detail), advisory))
        log = logger.info if ok or advisory else logger.warning
        log("case %s: %s %s %s", self.case, name, "ok" if ok else "FAILED", detail)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if not c.advisory)

    def as_dict(self) -> Dict[str, Any]:
        return {
            "case": self.case,
            "passed": self.passed,
            "checks": [vars(c) for c in self.checks],
            "notes": list(self.notes),
            "invariants": list(self.invariants) if self.invariants else None,
            "level": self.level,
            "seconds": self.seconds,
            "time": format_time(self.seconds),
        }


def _check_printed(record: CaseRecord, report: VerificationReport) -> Optional[CongruenceLevel]:
    '''Matrix-level checks on the printed generators; returns the level they generate.'''
    group = record.printed_group()
    report.add("printed-symplectic", all(symplectic_check(M) for M in group))
    if record.invariants is not None:
        T0 = nice_pair(record.invariants)[0]
        report.add("printed-origin", group[0] == T0, "T0 against (H^3, c2.H)")
    level = congruence_level(group)
    if record.level is not None:
        report.add("printed-level", level == record.level, f"{level} against printed {record.level}",
                   advisory=record.level_advisory)
    if level.d3 is None:
        report.add("implicit-congruences", all(implicit_congruence_check(M, level) for M in group), str(level))
        report.add("index", True, group_index(level))
    if record.conjugate_diagonal:
        conjugated = congruence_level(diagonal_conjugate(group, record.conjugate_diagonal))
        report.add("diagonal-conjugate", conjugated == record.conjugate_level,
                   f"diag{record.conjugate_diagonal} gives {conjugated}")
    return level


def _rat_tol(config: RunConfig, gens: Sequence[Any]) -> float:
    worst = max((float(g.error_estimate) for g in gens), default=0.0)
    return max(config.rat_tol, 1000 * worst)


def _check_invariants(record: CaseRecord, found: Invariants, report: VerificationReport):
    expected = record.invariants
    if expected is None:
        return
    ok = found.d == expected.d and found.c2H == expected.c2H
    if record.c3_sign_advisory:
        ok = ok and abs(found.c3) == abs(expected.c3)
        report.add("c3-sign", found.c3 == expected.c3, f"computed {found.c3}, printed {expected.c3}", advisory=True)
    else:
        ok = ok and found.c3 == expected.c3
    report.add("invariants", ok, f"{found.as_tuple()} against {expected.as_tuple()}")


def _verify_hypergeometric4(record: CaseRecord, config: RunConfig, report: VerificationReport):
    op = record.operator()
    conifold_at = 1 / Fraction(record.parameters["C"])
    gens = monodromy_generators(op, config)
    conifold = gens.at(str(conifold_at))
    with mp.workdps(conifold.precision + GUARD_DIGITS):
        inv = extract_invariants(conifold)
        _check_invariants(record, inv, report)
        report.invariants = inv.as_tuple()
        T0, T1 = theorem1_matrix(inv)
        exact_tol = mp.mpf(10) ** (-(config.precision - 20))
        origin = gens.at("0")
        report.add("raw-origin", max_entry_diff(origin.matrix, evaluate_exact(T0)) < exact_tol)
        raw_residual = max_entry_diff(conifold.matrix, evaluate_exact(T1))
        report.add("raw-conifold", raw_residual < max(mp.mpf(10) ** -15, 1000 * conifold.error_estimate),
                   mp.nstr(raw_residual, 3))

        finite = [origin, conifold]
        nice = exact_generators(cy_conjugate([g.matrix for g in finite], inv), config.max_den, _rat_tol(config, finite))
        expected = nice_pair(inv)
        report.add("nice-pair", list(nice) == list(expected))
        report.add("symplectic", all(symplectic_check(M) for M in nice))
        level = congruence_level(nice)
        report.level = str(level)
        report.add("level", level == record.level, f"{level} against {record.level}")

        dm = [rationalize_matrix(M, config.max_den, _rat_tol(config, finite)) for M in dm_conjugate(
            [g.matrix for g in finite], inv)]
        report.add("doran-morgan", list(dm) == list(dm_pair(inv)))
        report.add("charpoly", dm_charpoly_check(nice[1] * nice[0], inv))

        consistent = product_consistent(gens)
        report.add("product-at-infinity", consistent is not False,
                   "skipped" if consistent is None else mp.nstr(gens.product_residual, 3))
    cy = cy_type_check(op, t_inf=gens.infinity, config=config)
    report.add("calabi-yau-type", cy.calabi_yau_type, cy.verdicts)


def _verify_order5(record: CaseRecord, config: RunConfig, report: VerificationReport):
    op = record.operator()
    A, B = record.parameters["A"], record.parameters["B"]
    conifold = Fraction(1, int(Fraction(record.parameters["C"])))
    T0 = monodromy_about(op, 0, config)
    T1 = monodromy_about(op, conifold, config)
    with mp.workdps(T1.precision + GUARD_DIGITS):
        expected0, expected1 = theorem3_expected(A, B)
        tol = mp.mpf(10) ** -12
        report.add("origin", max_entry_diff(T0.matrix, evaluate_exact(expected0)) < tol)
        residual = max_entry_diff(T1.matrix, evaluate_exact(expected1))
        report.add("conifold-pattern", residual < tol, mp.nstr(residual, 3))
        report.add("involution", max_entry_diff(T1.matrix * T1.matrix, mp.eye(5)) < tol)
        fit = theorem3_fit(T1)
        params = theorem3_parameters(A, B)
        report.add("relation", fit.relation_residual < tol, mp.nstr(fit.relation_residual, 3))
        close = (abs(fit.a2 - mp.mpf(params.a2.numerator) / params.a2.denominator) < tol
                 and abs(fit.c2 - mp.mpf(params.c2.numerator) / params.c2.denominator) < tol
                 and abs(fit.x_prime - params.x_prime) < tol)
        report.add("parameters", close, f"a^2={mp.nstr(fit.a2, 12)} c^2={mp.nstr(fit.c2, 12)} x'={mp.nstr(fit.x_prime, 12)}")
        report.add("printed-conifold", fit.printed_residual < tol, ORDER5_DISPLAY_ADVISORY, advisory=True)


def _nearest_conifold(gens) -> Any:
    candidates = [g for g in gens.finite() if g.flags.get("conifold") and not g.target.is_origin]
    if not candidates:
        raise PFMError("no conifold generator found")
    return min(candidates, key=lambda g: abs(g.target.approx()))


def _verify_calabi_yau(record: CaseRecord, config: RunConfig, report: VerificationReport):
    printed_level = _check_printed(record, report)
    op = record.operator()
    gens = monodromy_generators(op, config)
    conifold = _nearest_conifold(gens)
    with mp.workdps(conifold.precision + GUARD_DIGITS):
        inv = extract_invariants(conifold)
        _check_invariants(record, inv, report)
        report.invariants = inv.as_tuple()
        for point in record.apparent:
            report.add(f"apparent {point}", gens.at(point).is_identity)
        nontrivial = [g for g in gens.finite() if not g.is_identity]
        nice = exact_generators(cy_conjugate([g.matrix for g in nontrivial], inv), config.max_den,
                                _rat_tol(config, nontrivial))
    report.add("symplectic", all(symplectic_check(M) for M in nice))
    level = congruence_level(nice)
    report.level = str(level)
    report.add("level", level == printed_level, f"{level} against printed generators {printed_level}")

    T0 = record.generators[0]
    matched = []
    for printed in record.generators:
        tag = next((t for t in (match_printed(M, printed, T0) for M in nice) if t), None)
        matched.append(tag)
        if tag not in (None, "direct"):
            report.notes.append(f"printed generator matched as {tag}")
    report.add("printed-generators", all(matched), matched)


def verify_case(case_id: Any, config: Optional[RunConfig] = None) -> VerificationReport:

    """
    Run the pipeline on a catalogued case and compare against its recorded expectations.

    Parameters:
        case_id (Any): Catalog id.
        config (RunConfig, optional): Numerical settings.

    Returns:
        VerificationReport: Per-expectation results with notes and timing.
    """

    config = config or RunConfig()
    record = catalog_case(case_id)
    report = VerificationReport(record.id, notes=list(record.notes))
    timing: Dict[str, float] = {}
    with timed(timing):
        if record.family == "hypergeometric4":
            _verify_hypergeometric4(record, config, report)
        elif record.family == "hypergeometric5":
            _verify_order5(record, config, report)
        elif record.family == "smoke":
            op = record.operator()
            report.add("parse", op.order >= 2, f"order {op.order}")
        elif record.has_operator:
            _verify_calabi_yau(record, config, report)
        else:
            _check_printed(record, report)
            if record.invariants is not None:
                report.invariants = record.invariants.as_tuple()
            report.notes.append("monodromy re-computation not applicable: no operator")
    report.seconds = timing["seconds"]
    logger.info("case %s %s in %s", record.id, "passed" if report.passed else "failed", format_time(report.seconds))
    return report


def _safe_verify(case_id: str, config: RunConfig) -> VerificationReport:
    try:
        return verify_case(case_id, config)
    except PFMError as e:
        report = VerificationReport(str(case_id))
        report.add("pipeline", False, f"{type(e).__name__}: {e}")
        return report


def verify_many(case_ids: Sequence[Any], config: Optional[RunConfig] = None, progress: bool = False) -> List[VerificationReport]:
    '''Verify several cases, in worker processes when config.jobs > 1; reports come back in input order.'''
    config = config or RunConfig()
    ids = [str(i) for i in case_ids]
    if config.jobs > 1 and len(ids) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            futures = [pool.submit(_safe_verify, i, config) for i in ids]
            reports = []
            pbar = tqdm(futures, disable=not progress)
            for case_id, future in zip(ids, pbar):
                reports.append(future.result())
                pbar.set_description(f"case {case_id}: {'ok' if reports[-1].passed else 'FAILED'}")
            return reports
    reports = []
    pbar = tqdm(ids, disable=not progress)
    for case_id in pbar:
        pbar.set_description(f"case {case_id}")
        reports.append(_safe_verify(case_id, config))
    return reports
