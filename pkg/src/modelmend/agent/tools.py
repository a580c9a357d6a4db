"""Tool schemas, argument validation, and execution against the engine.

Execution works on a session draft (duck-typed: .model, .cached_iis,
.cached_plan) and returns plain-JSON result payloads; engine-level refusals
(nonlinear repair, unrepairable) come back as error payloads rather than
exceptions, because they are answers the conversation should see.
"""

from __future__ import annotations

from ..branch_bound import check_feasible_milp
from ..iis import ORACLE_LP, ORACLE_MILP, additive_method, deletion_filter
from ..model import UnknownParam, normalize, param_sides, substitute_params
from ..payloads import iis_payload, plan_payload, point_payload
from ..rationals import format_rational, parse_rational
from ..repair import (
    MODE_TIED,
    STATUS_REPAIRED,
    NonlinearRepairUnsupported,
    RepairSpec,
    Unrepairable,
    apply_repair,
    explain_deltas,
    solve_repair,
)
from ..simplex import Feasible, check_feasible
from .prompts import render_fallback

GATED_TOOLS = frozenset({"solve_repair", "apply_repair"})


def tool_schemas(model) -> list:
    """Per-tool JSON schemas; the parameter enum pins usable names."""
    params_enum = [p.name for p in model.params]
    return [
        {
            "name": "describe_model",
            "description": "Plain-language description of the model and its keys.",
            "parameters": {"type": "object", "properties": {}, "required": []},
        },
        {
            "name": "get_iis",
            "description": "Isolate the irreducible conflict set of the model.",
            "parameters": {
                "type": "object",
                "properties": {
                    "method": {"type": "string", "enum": ["deletion", "additive"]},
                },
                "required": [],
            },
        },
        {
            "name": "list_mutable_params",
            "description": "Parameters with their adjustability and side.",
            "parameters": {"type": "object", "properties": {}, "required": []},
        },
        {
            "name": "solve_repair",
            "description": "Minimal-slack repair over the chosen parameters.",
            "parameters": {
                "type": "object",
                "properties": {
                    "params": {"type": "array",
                               "items": {"type": "string", "enum": params_enum}},
                    "mode": {"type": "string", "enum": ["tied", "entry"]},
                },
                "required": ["params"],
            },
        },
        {
            "name": "apply_repair",
            "description": "Write the last repair plan back into the model data.",
            "parameters": {"type": "object", "properties": {}, "required": []},
        },
        {
            "name": "resolve_with_params",
            "description": "Re-check feasibility at what-if parameter values.",
            "parameters": {
                "type": "object",
                "properties": {"overrides": {"type": "object"}},
                "required": ["overrides"],
            },
        },
    ]


def schema_for(tools: list, name: str):
    for schema in tools:
        if schema["name"] == name:
            return schema
    return None


def validate_args(schema: dict, args) -> list:
    """Mini JSON-schema check (types, enums, required); returns problems."""
    problems: list[str] = []
    spec = schema["parameters"]
    if not isinstance(args, dict):
        return [f"arguments must be an object, got {type(args).__name__}"]
    props = spec.get("properties", {})
    for key in spec.get("required", []):
        if key not in args:
            problems.append(f"missing required argument {key!r}")
    for key, value in args.items():
        if key not in props:
            problems.append(f"unknown argument {key!r}")
            continue
        problems.extend(_check_value(value, props[key], key))
    return problems


def _check_value(value, prop: dict, where: str) -> list:
    kind = prop.get("type")
    if kind == "string":
        if not isinstance(value, str):
            return [f"{where} must be a string"]
        if "enum" in prop and value not in prop["enum"]:
            return [f"{where} must be one of {prop['enum']}, got {value!r}"]
    elif kind == "array":
        if not isinstance(value, list):
            return [f"{where} must be an array"]
        item_prop = prop.get("items", {})
        out = []
        for i, item in enumerate(value):
            out.extend(_check_value(item, item_prop, f"{where}[{i}]"))
        return out
    elif kind == "object":
        if not isinstance(value, dict):
            return [f"{where} must be an object"]
    return []


def _check(system):
    if system.has_integers:
        return check_feasible_milp(system)
    return check_feasible(system)


def execute_tool(draft, name: str, args: dict) -> dict:
    """Run one validated tool call against the draft session state."""
    model = draft.model
    if name == "describe_model":
        return {"text": render_fallback("T1", model),
                "keys": [p.name for p in model.params]
                        + [v.name for v in model.vars]
                        + [c.name for c in model.constraints]}

    if name == "get_iis":
        system = normalize(model)
        if isinstance(_check(system), Feasible):
            draft.cached_iis = None
            return {"already_feasible": True,
                    "message": "the model is feasible; there is no conflict to isolate"}
        oracle = ORACLE_MILP if system.has_integers else ORACLE_LP
        method = args.get("method", "deletion")
        isolate = deletion_filter if method == "deletion" else additive_method
        result = isolate(system, oracle=oracle)
        draft.cached_iis = result
        return iis_payload(result)

    if name == "list_mutable_params":
        sides = param_sides(model)
        return {"params": [
            {"name": p.name, "mutable": p.mutable, "side": sides[p.name],
             "value": format_rational(p.value)}
            for p in model.params
        ]}

    if name == "solve_repair":
        spec = RepairSpec(frozenset(args["params"]), args.get("mode", MODE_TIED))
        try:
            plan = solve_repair(model, spec)
        except NonlinearRepairUnsupported as e:
            return {"error": "nonlinear_repair_unsupported", "message": str(e)}
        except Unrepairable as e:
            return {"error": "unrepairable", "message": str(e)}
        except UnknownParam as e:
            return {"error": "unknown_param", "message": str(e)}
        draft.cached_plan = plan
        return plan_payload(plan, explain_deltas(model, plan))

    if name == "apply_repair":
        plan = draft.cached_plan
        if plan is None:
            return {"error": "no_plan", "message": "solve a repair first"}
        if plan.status != STATUS_REPAIRED or plan.mode != MODE_TIED:
            return {"error": "not_applicable",
                    "message": "only tied-mode repaired plans can be applied"}
        repaired = apply_repair(model, plan)
        draft.model = repaired
        draft.cached_iis = None  # stale after the data change
        draft.cached_plan = None
        feasible = isinstance(_check(normalize(repaired)), Feasible)
        return {"applied": True, "feasible": feasible,
                "params": {p.name: format_rational(p.value) for p in repaired.params}}

    if name == "resolve_with_params":
        try:
            overrides = {k: parse_rational(v) for k, v in args["overrides"].items()}
            system = substitute_params(model, overrides)
        except UnknownParam as e:
            return {"error": "unknown_param", "message": str(e)}
        except ValueError as e:
            return {"error": "bad_value", "message": str(e)}
        verdict = _check(system)
        if isinstance(verdict, Feasible):
            return {"feasible": True, "point": point_payload(verdict.point)}
        return {"feasible": False}

    raise KeyError(f"unknown tool {name!r}")
