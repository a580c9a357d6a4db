"""Minimal-slack repair of infeasible models.

Builds the elastic program over the rows fed by user-selected parameters and
minimizes the weighted total slack, then translates the optimum back into
parameter-change recommendations.

Two modes:

  * ``entry`` — one independent nonnegative slack per selected rhs entry,
    the literal elastic relaxation; report-only, since per-row slacks on a
    shared parameter are not a single actionable change.
  * ``tied`` (default) — one signed delta per selected parameter, applied at
    every occurrence, so the answer is a concrete data edit.  Deltas are
    two-sided because a >=-row is stored negated: relaxing it means moving
    its parameter the other way.

Parameters that multiply variables (matrix-side support) are refused: with
those slacks the elastic program turns into a nonconvex mixed-integer
quadratically constrained program, which this workbench deliberately does
not solve.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .model import Model, NormalizedSystem, UnknownParam, normalize
from .rationals import format_rational
from .simplex import ZERO, minimize
from .branch_bound import check_feasible_milp, solve_milp
from .simplex import Feasible, Optimal, check_feasible

MODE_ENTRY = "entry"
MODE_TIED = "tied"

STATUS_REPAIRED = "repaired"
STATUS_ALREADY_FEASIBLE = "already_feasible"
STATUS_REJECTED = "rejected"

MIQCP_ADVISORY = (
    "the requested parameters multiply decision variables; relaxing them turns the "
    "elastic program into a nonconvex mixed-integer quadratically constrained program "
    "(MIQCP), which is far more expensive to solve and usually corresponds to physical "
    "properties that cannot be changed. Pick right-hand-side parameters instead."
)


class NonlinearRepairUnsupported(Exception):
    """Matrix-side slack support requested; carries the MIQCP advisory."""

    def __init__(self, params):
        self.params = sorted(params)
        super().__init__(f"cannot relax {', '.join(self.params)}: {MIQCP_ADVISORY}")


class Unrepairable(Exception):
    """Even full relaxation of the selected entries cannot restore feasibility."""


class NotApplicable(Exception):
    """apply_repair only accepts tied-mode repaired plans."""


@dataclass(frozen=True)
class RepairSpec:
    target_params: frozenset
    mode: str = MODE_TIED
    weights: Mapping[str, Fraction] = field(default_factory=dict)

    def weight(self, param: str) -> Fraction:
        return Fraction(self.weights.get(param, 1))


@dataclass(frozen=True)
class RepairPlan:
    status: str                 # repaired | already_feasible | rejected
    mode: str
    total: Fraction
    entry_slacks: Mapping[int, Fraction]    # row index -> slack (entry mode)
    param_deltas: Mapping[str, Fraction]    # parameter -> signed delta (tied mode)
    repaired_point: Mapping[str, Fraction]  # witness satisfying the repaired rows
    targets: frozenset


@dataclass(frozen=True)
class Recommendation:
    param: str
    old: Fraction
    new: Fraction
    direction: str  # "increase" | "decrease"

    @property
    def phrase(self) -> str:
        return (f"{self.direction} {self.param} from "
                f"{format_rational(self.old)} to {format_rational(self.new)}")


def _check_targets(model: Model, targets) -> frozenset:
    known = {p.name for p in model.params}
    missing = sorted(set(targets) - known)
    if missing:
        raise UnknownParam(", ".join(missing))
    return frozenset(targets)


def derive_support(model: Model, spec: RepairSpec):
    """Split the target parameters' occurrences into matrix-side and rhs-side.

    Returns (S_A, S_b): S_A is a set of (row, column) matrix entries, S_b a
    set of row indices whose rhs provenance names a target.
    """
    targets = _check_targets(model, spec.target_params)
    system = normalize(model)
    matrix_entries = set()
    rhs_entries = set()
    for i, row in enumerate(system.rows):
        for j, prov in enumerate(row.coeff_prov):
            if prov is not None and prov.param in targets:
                matrix_entries.add((i, j))
        if row.rhs_prov.param in targets:
            rhs_entries.add(i)
    return frozenset(matrix_entries), frozenset(rhs_entries)


def _already_feasible(system: NormalizedSystem):
    if system.has_integers:
        return check_feasible_milp(system)
    return check_feasible(system)


def _solve_elastic(system: NormalizedSystem, extra: int, rows, cost):
    """Minimize over (x, slack) rows; dispatches on the integer mask."""
    n_all = system.n + extra
    if not system.has_integers:
        return minimize(n_all, rows, cost)
    # Wrap the extended problem in a throwaway system so branch and bound
    # can enforce integrality of the original variables only.
    from .model import raw_system

    slack_names = tuple(f"__slack{k}" for k in range(extra))
    wrapped = raw_system(
        [list(coeffs) for coeffs, _ in rows],
        [rhs for _, rhs in rows],
        integer_mask=system.integer_mask + (False,) * extra,
        var_names=system.var_names + slack_names,
    )
    objective = {name: c for name, c in zip(wrapped.var_names, cost) if c != 0}
    outcome = solve_milp(wrapped, objective)
    if isinstance(outcome, Optimal):
        point = [outcome.point[name] for name in wrapped.var_names]
        return ("optimal", point, outcome.value)
    return ("infeasible", None)


def solve_repair(model: Model, spec: RepairSpec) -> RepairPlan:
    """Solve the elastic program over the selected supports.

    A feasible model short-circuits to an AlreadyFeasible plan with zero
    total; matrix-side targets raise NonlinearRepairUnsupported before any
    solving; an elastic program that is still infeasible (rigid rows conflict
    on their own) raises Unrepairable.
    """
    targets = _check_targets(model, spec.target_params)
    spec = dataclasses.replace(spec, target_params=targets)
    matrix_entries, rhs_entries = derive_support(model, spec)
    system = normalize(model)
    if matrix_entries:
        offending = {system.rows[i].coeff_prov[j].param for i, j in matrix_entries}
        raise NonlinearRepairUnsupported(offending)

    verdict = _already_feasible(system)
    if isinstance(verdict, Feasible):
        return RepairPlan(STATUS_ALREADY_FEASIBLE, spec.mode, ZERO, {}, {},
                          dict(verdict.point), targets)

    if spec.mode == MODE_ENTRY:
        return _solve_entry(model, spec, system, rhs_entries)
    if spec.mode == MODE_TIED:
        return _solve_tied(model, spec, system, rhs_entries)
    raise ValueError(f"unknown repair mode {spec.mode!r}")


def _solve_entry(model: Model, spec: RepairSpec, system: NormalizedSystem,
                 rhs_entries) -> RepairPlan:
    slack_rows = sorted(rhs_entries)
    extra = len(slack_rows)
    slack_pos = {row: system.n + k for k, row in enumerate(slack_rows)}
    n_all = system.n + extra

    rows = []
    for i, row in enumerate(system.rows):
        coeffs = list(row.coeffs) + [ZERO] * extra
        if i in slack_pos:
            coeffs[slack_pos[i]] = Fraction(-1)  # a·x - d <= b, i.e. a·x <= b + d
        rows.append((tuple(coeffs), row.rhs))
    for k in range(extra):
        nonneg = [ZERO] * n_all
        nonneg[system.n + k] = Fraction(-1)
        rows.append((tuple(nonneg), ZERO))

    cost = [ZERO] * n_all
    for row in slack_rows:
        cost[slack_pos[row]] = spec.weight(system.rows[row].rhs_prov.param)

    outcome = _solve_elastic(system, extra, rows, cost)
    if outcome[0] != "optimal":
        raise Unrepairable("relaxing the selected entries cannot restore feasibility")
    point, total = outcome[1], outcome[2]
    slacks = {row: point[slack_pos[row]] for row in slack_rows if point[slack_pos[row]] != 0}
    witness = dict(zip(system.var_names, point[: system.n]))
    return RepairPlan(STATUS_REPAIRED, MODE_ENTRY, total, slacks, {}, witness,
                      spec.target_params)


def _solve_tied(model: Model, spec: RepairSpec, system: NormalizedSystem,
                rhs_entries) -> RepairPlan:
    targets = sorted(spec.target_params,
                     key=lambda name: [p.name for p in model.params].index(name))
    extra = 2 * len(targets)  # (up, down) per parameter
    delta_pos = {name: (system.n + 2 * k, system.n + 2 * k + 1)
                 for k, name in enumerate(targets)}
    n_all = system.n + extra

    rows = []
    for i, row in enumerate(system.rows):
        coeffs = list(row.coeffs) + [ZERO] * extra
        prov = row.rhs_prov
        if i in rhs_entries and prov.param in delta_pos:
            up, down = delta_pos[prov.param]
            # rhs becomes scale*(p + dp) = b + scale*dp with dp = up - down
            coeffs[up] = -prov.scale
            coeffs[down] = prov.scale
        rows.append((tuple(coeffs), row.rhs))
    for k in range(extra):
        nonneg = [ZERO] * n_all
        nonneg[system.n + k] = Fraction(-1)
        rows.append((tuple(nonneg), ZERO))

    cost = [ZERO] * n_all
    for name in targets:
        up, down = delta_pos[name]
        cost[up] = spec.weight(name)
        cost[down] = spec.weight(name)

    outcome = _solve_elastic(system, extra, rows, cost)
    if outcome[0] != "optimal":
        raise Unrepairable("moving the selected parameters cannot restore feasibility")
    point, total = outcome[1], outcome[2]
    deltas = {}
    for name in targets:
        up, down = delta_pos[name]
        delta = point[up] - point[down]
        if delta != 0:
            deltas[name] = delta
    witness = dict(zip(system.var_names, point[: system.n]))
    return RepairPlan(STATUS_REPAIRED, MODE_TIED, total, {}, deltas, witness,
                      spec.target_params)


def apply_repair(model: Model, plan: RepairPlan) -> Model:
    """Write a tied plan's deltas back into the parameter values.

    AlreadyFeasible plans return the model unchanged; entry-mode plans are
    per-row reports and cannot be applied as a parameter edit.
    """
    if plan.status == STATUS_ALREADY_FEASIBLE:
        return model
    if plan.status != STATUS_REPAIRED or plan.mode != MODE_TIED:
        raise NotApplicable(
            "only tied-mode repaired plans can be written back to the model")
    values = model.param_values()
    updates = {name: values[name] + delta for name, delta in plan.param_deltas.items()}
    return model.with_param_values(updates)


def explain_deltas(model: Model, plan: RepairPlan) -> list:
    """One recommendation per nonzero delta, mapped back to parameter moves.

    Entry-mode slacks divide through their row's provenance scale: a slack d
    on a row whose rhs is k*p is the parameter movement d/k.
    """
    values = model.param_values()
    recs: list[Recommendation] = []
    if plan.mode == MODE_TIED or plan.status == STATUS_ALREADY_FEASIBLE:
        for name, delta in plan.param_deltas.items():
            old = values[name]
            recs.append(Recommendation(name, old, old + delta,
                                       "increase" if delta > 0 else "decrease"))
        return recs
    system = normalize(model)
    for row, slack in sorted(plan.entry_slacks.items()):
        prov = system.rows[row].rhs_prov
        if prov.param is None or slack == 0:
            continue
        move = slack / prov.scale
        old = values[prov.param]
        recs.append(Recommendation(prov.param, old, old + move,
                                   "increase" if move > 0 else "decrease"))
    return recs
