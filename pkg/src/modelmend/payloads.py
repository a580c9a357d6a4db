"""Structured JSON payloads shared by the CLI, the HTTP service and replay.

One schema everywhere: a client that can read the service can read the CLI's
--json output, and the event log stores the same shapes.  Rationals travel
as strings ("7/2") so nothing is rounded in transit.
"""

from __future__ import annotations


from .iis import IisResult
from .model import KeyInventory, Model, param_sides
from .rationals import format_rational, parse_rational
from .repair import RepairPlan


def keys_payload(inv: KeyInventory) -> dict:
    return {
        "params": [{"name": e.name, "description": e.description, "mutable": e.mutable}
                   for e in inv.params],
        "vars": [{"name": e.name, "kind": e.kind} for e in inv.vars],
        "constraints": [{"name": e.name, "description": e.description}
                        for e in inv.constraints],
    }


def iis_payload(result: IisResult) -> dict:
    return {
        "members": sorted(result.members),
        "rows": sorted(result.rows),
        "method": result.method,
        "solver_calls": result.solver_calls,
    }


def iis_from_payload(payload: dict) -> IisResult:
    return IisResult(
        members=frozenset(payload["members"]),
        rows=frozenset(payload["rows"]),
        method=payload["method"],
        solver_calls=payload["solver_calls"],
    )


def recommendations_payload(recs) -> list:
    return [{"param": r.param, "old": format_rational(r.old),
             "new": format_rational(r.new), "direction": r.direction,
             "phrase": r.phrase} for r in recs]


def plan_payload(plan: RepairPlan, recommendations=None) -> dict:
    payload = {
        "status": plan.status,
        "mode": plan.mode,
        "total": format_rational(plan.total),
        "entry_slacks": {str(k): format_rational(v) for k, v in plan.entry_slacks.items()},
        "param_deltas": {k: format_rational(v) for k, v in plan.param_deltas.items()},
        "witness": {k: format_rational(v) for k, v in plan.repaired_point.items()},
        "targets": sorted(plan.targets),
    }
    if recommendations is not None:
        payload["recommendations"] = recommendations_payload(recommendations)
    return payload


def plan_from_payload(payload: dict) -> RepairPlan:
    return RepairPlan(
        status=payload["status"],
        mode=payload["mode"],
        total=parse_rational(payload["total"]),
        entry_slacks={int(k): parse_rational(v)
                      for k, v in payload["entry_slacks"].items()},
        param_deltas={k: parse_rational(v)
                      for k, v in payload["param_deltas"].items()},
        repaired_point={k: parse_rational(v) for k, v in payload["witness"].items()},
        targets=frozenset(payload["targets"]),
    )


def candidates_payload(model: Model, iis: IisResult | None) -> dict:
    """Mutable-parameter candidates (and discouraged ones) for recommendations."""
    sides = param_sides(model)
    involved = None
    if iis is not None:
        from .model import normalize

        system = normalize(model)
        involved = set()
        for i in sorted(iis.rows):
            row = system.rows[i]
            for prov in row.coeff_prov:
                if prov is not None and prov.param is not None:
                    involved.add(prov.param)
            if row.rhs_prov.param is not None:
                involved.add(row.rhs_prov.param)
    candidates, discouraged = [], []
    for p in model.params:
        if involved is not None and p.name not in involved:
            continue
        entry = {"param": p.name, "value": format_rational(p.value),
                 "mutable": p.mutable, "side": sides[p.name]}
        if p.mutable and sides[p.name] == "rhs":
            candidates.append(entry)
        else:
            reason = ("multiplies a variable" if sides[p.name] in ("lhs", "both")
                      else "marked fixed")
            discouraged.append({**entry, "reason": reason})
    return {"candidates": candidates, "discouraged": discouraged}


def parse_errors_payload(errors) -> list:
    return [{"line": e.span.line, "column": e.span.column, "length": e.span.length,
             "kind": e.kind, "message": e.message} for e in errors]


def point_payload(point) -> dict:
    return {k: format_rational(v) for k, v in point.items()}
