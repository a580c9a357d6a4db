"""Irreducible Infeasible Subset isolation.

Three routes over the same normalized rows:

  * deletion filter — drop each row once, in declaration order; a row whose
    removal leaves the rest infeasible is dropped for good, otherwise it is
    put back.  Exactly one feasibility test per row.
  * additive method — grow a kernel T by sweeping rows in declaration order
    and adding the first row whose inclusion tips the accumulated set into
    infeasibility, restarting from T until T itself is infeasible.
  * vertex enumeration (pure LPs only) — the supports of the vertices of
    {y >= 0 : yA = 0, y·b <= -1} are exactly the IISs, so enumerating
    candidate supports and solving the square rational systems lists all of
    them.

`oracle_iis_all` is the ground-truth subset-enumeration oracle the others
are verified against.

Both filters treat bound rows exactly like constraint rows; the reported
member ids collapse the two halves of an equality to one name.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from .branch_bound import check_feasible_milp
from .model import NormalizedSystem
from .simplex import Feasible, check_feasible

ORACLE_LP = "lp"
ORACLE_MILP = "milp"

METHOD_DELETION = "deletion"
METHOD_ADDITIVE = "additive"
METHOD_ENUMERATION = "enumeration"
METHOD_ORACLE = "oracle"

ORACLE_CAP = 20
DEFAULT_ENUMERATION_CAP = 16


class NotInfeasible(Exception):
    """IIS isolation was asked to diagnose a feasible system."""


class IntegerVariablesPresent(Exception):
    """Vertex enumeration is only meaningful for pure LPs."""


class EnumerationBudgetExceeded(Exception):
    """Too many rows for support enumeration."""


class TooLarge(Exception):
    """oracle_iis_all refuses systems beyond its hard cap."""


@dataclass(frozen=True)
class IisResult:
    members: frozenset   # user-facing constraint / bound ids
    rows: frozenset      # normalized row indices
    method: str
    solver_calls: int


def _feasible(system: NormalizedSystem, rows: Iterable[int], oracle: str) -> bool:
    active = sorted(rows)
    if not active:
        return True
    if oracle == ORACLE_MILP:
        return isinstance(check_feasible_milp(system, active), Feasible)
    return isinstance(check_feasible(system, active), Feasible)


def _result(system: NormalizedSystem, rows, method: str, calls: int) -> IisResult:
    row_set = frozenset(rows)
    return IisResult(system.member_ids(row_set), row_set, method, calls)


def deletion_filter(system: NormalizedSystem, oracle: str = ORACLE_LP) -> IisResult:
    """Single-pass deletion filter; solver_calls is exactly the row count.

    One extra oracle call validates the precondition (the full system must be
    infeasible) before the pass begins; it is not counted in solver_calls,
    which reports the defining one-test-per-row pass.
    """
    if _feasible(system, range(system.m), oracle):
        raise NotInfeasible("system is feasible; nothing to isolate")
    kept = set(range(system.m))
    calls = 0
    for r in range(system.m):
        trial = kept - {r}
        calls += 1
        if not _feasible(system, trial, oracle):
            kept = trial  # r was not needed for the conflict: drop it for good
    return _result(system, kept, METHOD_DELETION, calls)


def additive_method(system: NormalizedSystem, oracle: str = ORACLE_LP) -> IisResult:
    """Grow the IIS by repeated sweeps; restarts from the kernel found so far."""
    if _feasible(system, range(system.m), oracle):
        raise NotInfeasible("system is feasible; nothing to isolate")
    kernel: list = []
    calls = 0
    while True:
        if kernel:
            calls += 1
            if not _feasible(system, kernel, oracle):
                break
        accumulated = list(kernel)
        for r in range(system.m):
            if r in kernel:
                continue
            accumulated.append(r)
            calls += 1
            if not _feasible(system, accumulated, oracle):
                kernel.append(r)
                break
    return _result(system, kernel, METHOD_ADDITIVE, calls)


def _solve_unique_positive(columns, target):
    """Solve M·y = target exactly; None unless the solution is unique and > 0.

    `columns` is the list of matrix columns (each a list of equation
    coefficients for one unknown).
    """
    k = len(columns)
    neq = len(target)
    aug = [[columns[j][i] for j in range(k)] + [target[i]] for i in range(neq)]
    pivot_of_col = [-1] * k
    row = 0
    for col in range(k):
        pivot = next((r for r in range(row, neq) if aug[r][col] != 0), -1)
        if pivot < 0:
            continue
        aug[row], aug[pivot] = aug[pivot], aug[row]
        inv = Fraction(1) / aug[row][col]
        aug[row] = [v * inv for v in aug[row]]
        for r in range(neq):
            if r != row and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[row])]
        pivot_of_col[col] = row
        row += 1
    for r in range(row, neq):
        if aug[r][k] != 0:
            return None  # inconsistent
    if any(p < 0 for p in pivot_of_col):
        return None  # underdetermined: interior of a face, not a vertex
    y = [aug[pivot_of_col[j]][k] for j in range(k)]
    if any(v <= 0 for v in y):
        return None
    return y


def enumerate_iis_lp(system: NormalizedSystem,
                     max_rows: int = DEFAULT_ENUMERATION_CAP) -> set:
    """All IISs of a pure LP, as supports of the alternative polyhedron's vertices.

    Every vertex of {y >= 0 : yA = 0, y·b <= -1} pins y·b = -1 (otherwise
    scaling moves along a line inside the set), so each candidate support K
    yields the square system  y_K·A_K = 0, y_K·b_K = -1;  a unique strictly
    positive solution marks K as a vertex support, hence an IIS.

    solver_calls on each result counts the candidate systems solved overall;
    no feasibility oracle is consulted on this path.
    """
    if system.has_integers:
        raise IntegerVariablesPresent(
            "vertex enumeration applies to pure LPs; use deletion/additive with the milp oracle"
        )
    if system.m > max_rows:
        raise EnumerationBudgetExceeded(
            f"{system.m} rows exceeds the enumeration cap of {max_rows}")

    m, n = system.m, system.n
    solves = 0
    supports: list = []
    indices = list(range(m))
    for size in range(1, m + 1):
        for combo in itertools.combinations(indices, size):
            # unknown y_i per i in combo; equations: one per variable + the binding row
            columns = []
            for i in combo:
                r = system.rows[i]
                columns.append(list(r.coeffs) + [r.rhs])
            target = [Fraction(0)] * n + [Fraction(-1)]
            solves += 1
            y = _solve_unique_positive(columns, target)
            if y is not None:
                supports.append(frozenset(combo))
    return {_result(system, rows, METHOD_ENUMERATION, solves) for rows in supports}


def oracle_iis_all(system: NormalizedSystem, oracle: str = ORACLE_LP,
                   cap: int = ORACLE_CAP) -> set:
    """Ground truth: every minimal infeasible row subset, by direct enumeration.

    Walks subsets in increasing size, skipping supersets of IISs already
    found — any smaller infeasible subset would already have been listed, so
    an infeasible subset reached this way is automatically minimal.
    """
    if system.m > cap:
        raise TooLarge(f"{system.m} rows exceeds the oracle cap of {cap}")
    found: list = []
    indices = list(range(system.m))
    for size in range(1, system.m + 1):
        for combo in itertools.combinations(indices, size):
            rows = frozenset(combo)
            if any(iis <= rows for iis in found):
                continue
            if not _feasible(system, rows, oracle):
                found.append(rows)
    return set(found)
