"""MILP feasibility and optimization by LP-relaxation branch and bound.

Nodes are explored in best-bound order (insertion order breaks ties) and
branching always picks the lowest-index fractional integer variable, so
identical inputs give identical answers.  Infeasibility of a MILP carries no
certificate: the dual-ray argument only covers pure LPs.
"""

from __future__ import annotations

import heapq
from fractions import Fraction
from typing import Mapping

from .model import NormalizedSystem
from .simplex import (
    Feasible,
    Infeasible,
    Optimal,
    Unbounded,
    ZERO,
    feasibility,
    minimize,
)

DEFAULT_NODE_BUDGET = 100_000
DEFAULT_HORIZON = 10 ** 6


class NodeBudgetExceeded(Exception):
    """The search hit its node cap (or pushed a branch past the horizon).

    Deliberately distinct from an Infeasible verdict: exhausting the budget
    proves nothing about the model.
    """

    def __init__(self, limit: int):
        self.limit = limit
        super().__init__(f"branch-and-bound budget of {limit} nodes exceeded")


def _bound_rows(n: int, bounds: dict) -> list:
    rows = []
    for j, (lo, hi) in sorted(bounds.items()):
        if lo is not None:
            coeffs = tuple(Fraction(-1) if k == j else ZERO for k in range(n))
            rows.append((coeffs, Fraction(-lo)))
        if hi is not None:
            coeffs = tuple(Fraction(1) if k == j else ZERO for k in range(n))
            rows.append((coeffs, Fraction(hi)))
    return rows


def _branch(bounds: dict, j: int, value: Fraction, horizon: int, budget: int):
    """The two child bound maps x_j <= floor(v) and x_j >= floor(v)+1."""
    floor = value.numerator // value.denominator  # exact floor for Fractions
    if abs(floor) > horizon or abs(floor + 1) > horizon:
        raise NodeBudgetExceeded(budget)
    lo, hi = bounds.get(j, (None, None))
    children = []
    if lo is None or lo <= floor:
        down = dict(bounds)
        down[j] = (lo, floor if hi is None else min(hi, floor))
        children.append(down)
    if hi is None or floor + 1 <= hi:
        up = dict(bounds)
        up[j] = (max(lo, floor + 1) if lo is not None else floor + 1, hi)
        children.append(up)
    return [b for b in children
            if not (b[j][0] is not None and b[j][1] is not None and b[j][0] > b[j][1])]


def _fractional_index(point, mask) -> int:
    for j, (value, is_int) in enumerate(zip(point, mask)):
        if is_int and value.denominator != 1:
            return j
    return -1


def _named(system: NormalizedSystem, point) -> dict:
    return dict(zip(system.var_names, point))


def check_feasible_milp(system: NormalizedSystem, active_rows=None,
                        node_budget: int = DEFAULT_NODE_BUDGET,
                        horizon: int = DEFAULT_HORIZON):
    """Exact MILP feasibility of the active rows.

    Returns Feasible(point) with integral values on masked variables, or
    Infeasible(None).  Raises NodeBudgetExceeded instead of ever guessing.
    """
    idx = sorted(range(system.m)) if active_rows is None else sorted(active_rows)
    base = [(system.rows[i].coeffs, system.rows[i].rhs) for i in idx]
    mask = system.integer_mask

    counter = 0
    heap = [(0, counter, {})]
    expanded = 0
    while heap:
        _, _, bounds = heapq.heappop(heap)
        expanded += 1
        if expanded > node_budget:
            raise NodeBudgetExceeded(node_budget)
        verdict = feasibility(system.n, base + _bound_rows(system.n, bounds))
        if verdict[0] == "infeasible":
            continue
        point = verdict[1]
        j = _fractional_index(point, mask)
        if j < 0:
            return Feasible(_named(system, point))
        for child in _branch(bounds, j, point[j], horizon, node_budget):
            counter += 1
            heapq.heappush(heap, (0, counter, child))
    return Infeasible(None)


def solve_milp(system: NormalizedSystem, objective: Mapping[str, Fraction],
               active_rows=None,
               node_budget: int = DEFAULT_NODE_BUDGET,
               horizon: int = DEFAULT_HORIZON):
    """min objective over the active rows with integrality enforced.

    Best-bound search with exact rational bounds: the first integral node
    popped is optimal.  Returns Optimal/Infeasible/Unbounded.
    """
    idx = sorted(range(system.m)) if active_rows is None else sorted(active_rows)
    base = [(system.rows[i].coeffs, system.rows[i].rhs) for i in idx]
    mask = system.integer_mask
    pos = {name: j for j, name in enumerate(system.var_names)}
    cost = [ZERO] * system.n
    for name, coeff in objective.items():
        cost[pos[name]] = Fraction(coeff)

    def solve_node(bounds):
        return minimize(system.n, base + _bound_rows(system.n, bounds), cost)

    root = solve_node({})
    if root[0] == "infeasible":
        return Infeasible(None)
    if root[0] == "unbounded":
        # A rational improving ray can be scaled integral, so MILP-feasible
        # plus LP-unbounded means MILP-unbounded.
        probe = check_feasible_milp(system, active_rows=idx,
                                    node_budget=node_budget, horizon=horizon)
        if isinstance(probe, Feasible):
            return Unbounded(_named(system, root[1]))
        return Infeasible(None)

    counter = 0
    heap = [(root[2], counter, {}, root[1])]
    expanded = 0
    while heap:
        bound, _, bounds, point = heapq.heappop(heap)
        expanded += 1
        if expanded > node_budget:
            raise NodeBudgetExceeded(node_budget)
        j = _fractional_index(point, mask)
        if j < 0:
            return Optimal(_named(system, point), bound)
        for child in _branch(bounds, j, point[j], horizon, node_budget):
            outcome = solve_node(child)
            if outcome[0] == "infeasible":
                continue
            assert outcome[0] == "optimal"  # children of a bounded LP stay bounded
            counter += 1
            heapq.heappush(heap, (outcome[2], counter, child, outcome[1]))
    return Infeasible(None)
