"""Exact two-phase simplex over normalized <=-row systems.

The feasibility oracle behind every diagnosis: decides Ax <= b over the
rationals (variables free; bounds are just rows) and, on infeasibility,
extracts the dual ray y >= 0 with yA = 0 and y·b = -1 that certifies it.

Tableau layout: columns [u_1..u_n | w_1..w_n | s_1..s_m | a_1..a_m] for the
split x = u - w, one slack per row and one artificial per row.  Bland's rule
(lowest-index entering, lowest-basic-index tie break on the ratio test)
makes every pivot sequence, and so every downstream answer, deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .model import NormalizedSystem

ZERO = Fraction(0)
ONE = Fraction(1)


@dataclass(frozen=True)
class FarkasCertificate:
    """Nonnegative multipliers proving Ax <= b has no solution.

    y is sparse over row indices; exactly y·A = 0 and y·b = -1 hold,
    so the support of y is itself an infeasible subsystem.
    """

    y: dict  # row index -> positive Fraction

    @property
    def support(self) -> frozenset:
        return frozenset(self.y)


@dataclass(frozen=True)
class Feasible:
    point: dict  # var name -> Fraction


@dataclass(frozen=True)
class Optimal:
    point: dict
    value: Fraction


@dataclass(frozen=True)
class Infeasible:
    certificate: Optional[FarkasCertificate]  # None when integrality caused it


@dataclass(frozen=True)
class Unbounded:
    ray: Optional[dict]  # var name -> Fraction, improving direction


# ---------------------------------------------------------------------------
# raw engine over anonymous variables

class _Tableau:
    """min c·z  s.t.  [rows]·x <= rhs with x free, via the split/slack form."""

    def __init__(self, nvars: int, rows: Sequence):
        self.n = nvars
        self.m = len(rows)
        n, m = self.n, self.m
        self.ncols = 2 * n + 2 * m
        self.slack0 = 2 * n
        self.art0 = 2 * n + m
        self.T: list = []
        self.rhs: list = []
        self.sigma: list = []  # row sign flips applied to make rhs >= 0
        for coeffs, b in rows:
            flip = b < 0
            sig = -ONE if flip else ONE
            row = [sig * c for c in coeffs] + [-sig * c for c in coeffs] + [ZERO] * (2 * m)
            self.T.append(row)
            self.rhs.append(sig * b)
            self.sigma.append(sig)
        for i in range(m):
            self.T[i][self.slack0 + i] = self.sigma[i]
            self.T[i][self.art0 + i] = ONE
        self.basis = [self.art0 + i for i in range(m)]

    def _pivot(self, r: list, i: int, j: int):
        piv = self.T[i][j]
        inv = ONE / piv
        self.T[i] = [v * inv for v in self.T[i]]
        self.rhs[i] *= inv
        for k in range(self.m):
            if k == i:
                continue
            f = self.T[k][j]
            if f == 0:
                continue
            rowi = self.T[i]
            self.T[k] = [a - f * b for a, b in zip(self.T[k], rowi)]
            self.rhs[k] -= f * self.rhs[i]
        f = r[j]
        if f != 0:
            rowi = self.T[i]
            for j2 in range(self.ncols):
                r[j2] -= f * rowi[j2]
        self.basis[i] = j

    def _reduced_costs(self, cost: Sequence) -> list:
        r = list(cost)
        for i, bj in enumerate(self.basis):
            cb = cost[bj]
            if cb == 0:
                continue
            rowi = self.T[i]
            for j in range(self.ncols):
                r[j] -= cb * rowi[j]
        return r

    def _bland(self, cost: Sequence, banned_from: int):
        """Minimize; returns ('optimal', r) or ('unbounded', entering, r)."""
        r = self._reduced_costs(cost)
        while True:
            enter = -1
            for j in range(banned_from):
                if r[j] < 0:
                    enter = j
                    break
            if enter < 0:
                return ("optimal", r)
            leave = -1
            best = None
            for i in range(self.m):
                a = self.T[i][enter]
                if a > 0:
                    ratio = self.rhs[i] / a
                    key = (ratio, self.basis[i])
                    if best is None or key < best:
                        best = key
                        leave = i
            if leave < 0:
                return ("unbounded", enter, r)
            self._pivot(r, leave, enter)

    def objective_value(self, cost: Sequence) -> Fraction:
        return sum(cost[bj] * self.rhs[i] for i, bj in enumerate(self.basis))

    def x_point(self) -> list:
        vals = [ZERO] * self.ncols
        for i, bj in enumerate(self.basis):
            vals[bj] = self.rhs[i]
        return [vals[j] - vals[self.n + j] for j in range(self.n)]

    def phase1(self):
        """Returns (value, reduced_costs_at_optimum)."""
        cost = [ZERO] * self.ncols
        for j in range(self.art0, self.ncols):
            cost[j] = ONE
        status = self._bland(cost, banned_from=self.art0)
        assert status[0] == "optimal"  # phase-1 objective is bounded below by 0
        return self.objective_value(cost), status[1]

    def drop_artificials(self):
        """After a zero phase-1: pivot basic artificials out or drop their rows."""
        i = 0
        while i < self.m:
            bj = self.basis[i]
            if bj < self.art0:
                i += 1
                continue
            pivot_col = -1
            for j in range(self.art0):
                if self.T[i][j] != 0:
                    pivot_col = j
                    break
            if pivot_col < 0:
                # redundant row: delete it
                del self.T[i]
                del self.rhs[i]
                del self.basis[i]
                del self.sigma[i]
                self.m -= 1
                continue
            r = [ZERO] * self.ncols  # throwaway objective row
            self._pivot(r, i, pivot_col)
            i += 1


def _farkas_from_phase1(tab: _Tableau, reduced: Sequence, value: Fraction,
                        row_ids: Sequence) -> FarkasCertificate:
    """Reduced costs of the slack columns are the (sign-fixed) dual ray.

    At a phase-1 optimum of value v > 0 the multipliers y_i = r[slack_i] are
    nonnegative, satisfy y·A = 0 componentwise and y·b = -v; rescaling by 1/v
    pins the Eq-style normalization y·b = -1.
    """
    y = {}
    for i in range(tab.m):
        mult = reduced[tab.slack0 + i]
        if mult != 0:
            y[row_ids[i]] = mult / value
    return FarkasCertificate(y)


def feasibility(nvars: int, rows: Sequence):
    """Decide [rows]·x <= rhs with x free.

    Returns ('feasible', point list) or ('infeasible', certificate dict keyed
    by position in `rows`).
    """
    tab = _Tableau(nvars, rows)
    value, reduced = tab.phase1()
    if value == 0:
        return ("feasible", tab.x_point())
    cert = _farkas_from_phase1(tab, reduced, value, list(range(len(rows))))
    return ("infeasible", cert.y)


def minimize(nvars: int, rows: Sequence, cost: Sequence):
    """min cost·x s.t. rows; returns ('optimal', point, value) |
    ('infeasible', cert dict) | ('unbounded', ray list)."""
    tab = _Tableau(nvars, rows)
    value, reduced = tab.phase1()
    if value != 0:
        cert = _farkas_from_phase1(tab, reduced, value, list(range(len(rows))))
        return ("infeasible", cert.y)
    tab.drop_artificials()
    full_cost = [ZERO] * tab.ncols
    for j in range(tab.n):
        full_cost[j] = Fraction(cost[j])
        full_cost[tab.n + j] = -Fraction(cost[j])
    status = tab._bland(full_cost, banned_from=tab.art0)
    if status[0] == "optimal":
        return ("optimal", tab.x_point(), tab.objective_value(full_cost))
    _, enter, _r = status
    direction = [ZERO] * tab.ncols
    direction[enter] = ONE
    for i, bj in enumerate(tab.basis):
        direction[bj] = -tab.T[i][enter]
    ray = [direction[j] - direction[tab.n + j] for j in range(tab.n)]
    return ("unbounded", ray)


# ---------------------------------------------------------------------------
# system-level wrappers

def _active_rows(system: NormalizedSystem, active) -> list:
    if active is None:
        return list(range(system.m))
    idx = sorted(active)
    for i in idx:
        if not 0 <= i < system.m:
            raise IndexError(f"row index {i} out of range")
    return idx


def check_feasible(system: NormalizedSystem, active_rows=None):
    """LP-relaxation feasibility of the active rows (integer mask ignored).

    Returns Feasible(point) or Infeasible(certificate); the certificate is
    supported only on active rows and normalized to y·b = -1.
    """
    idx = _active_rows(system, active_rows)
    rows = [(system.rows[i].coeffs, system.rows[i].rhs) for i in idx]
    verdict = feasibility(system.n, rows)
    if verdict[0] == "feasible":
        return Feasible(dict(zip(system.var_names, verdict[1])))
    cert = {idx[pos]: mult for pos, mult in verdict[1].items()}
    return Infeasible(FarkasCertificate(cert))


def solve_lp(system: NormalizedSystem, objective: Mapping[str, Fraction],
             active_rows=None):
    """Minimize a linear objective over the active rows (LP relaxation).

    `objective` maps variable names to cost coefficients; callers negate for
    maximization.  Bland's rule guarantees termination and a canonical
    optimizer.
    """
    idx = _active_rows(system, active_rows)
    rows = [(system.rows[i].coeffs, system.rows[i].rhs) for i in idx]
    pos = {name: j for j, name in enumerate(system.var_names)}
    cost = [ZERO] * system.n
    for name, coeff in objective.items():
        cost[pos[name]] = Fraction(coeff)
    outcome = minimize(system.n, rows, cost)
    if outcome[0] == "optimal":
        return Optimal(dict(zip(system.var_names, outcome[1])), outcome[2])
    if outcome[0] == "infeasible":
        cert = {idx[p]: mult for p, mult in outcome[1].items()}
        return Infeasible(FarkasCertificate(cert))
    return Unbounded(dict(zip(system.var_names, outcome[1])))
