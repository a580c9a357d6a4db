"""Command-line front door: every pipeline stage runnable headless.

    modelmend check FILE                      feasibility verdict
    modelmend iis FILE [--method M] [--json]  conflict members
    modelmend repair FILE --params a,b [--mode tied|entry] [--apply OUT] [--json]
    modelmend describe FILE [--live]          T1 text
    modelmend diagnose FILE [--live] [--json] T2 text
    modelmend chat FILE                       terminal REPL (mock unless env set)
    modelmend serve [--port P]                start the HTTP service

Exit codes: 0 success, 1 infeasible-without-request (or the inverse: asking
for a conflict in a feasible model), 2 usage, 3 solver budget, 4 parse
errors.  Machine output goes to stdout, human prose to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .agent.client import client_from_env
from .agent.prompts import PromptContext, render_fallback
from .agent.session import chat_turn, new_session
from .branch_bound import NodeBudgetExceeded, check_feasible_milp, solve_milp
from .iis import (
    ORACLE_LP,
    ORACLE_MILP,
    NotInfeasible,
    additive_method,
    deletion_filter,
    enumerate_iis_lp,
)
from .model import Model, normalize
from .modelfile import FORMAT_STRUCTURED, FORMAT_TEXT, parse, serialize
from .payloads import (
    candidates_payload,
    iis_payload,
    keys_payload,
    parse_errors_payload,
    plan_payload,
    point_payload,
)
from .repair import (
    MODE_ENTRY,
    MODE_TIED,
    STATUS_REPAIRED,
    NonlinearRepairUnsupported,
    RepairSpec,
    Unrepairable,
    apply_repair,
    explain_deltas,
    solve_repair,
)
from .model import UnknownParam, list_keys
from .rationals import format_rational
from .simplex import Feasible, Optimal, check_feasible, solve_lp

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_USAGE = 2
EXIT_BUDGET = 3
EXIT_PARSE = 4


def _load(path: str) -> Model:
    """Parse a model file; raises SystemExit(4) after printing the errors."""
    p = Path(path)
    if not p.exists():
        print(f"no such file: {path}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)
    format = FORMAT_STRUCTURED if p.suffix == ".json" else FORMAT_TEXT
    result = parse(p.read_text(), format)
    if isinstance(result, Model):
        return result
    print(json.dumps(parse_errors_payload(result), indent=2))
    for e in result:
        print(f"{path}:{e.span.line}:{e.span.column}: {e.kind}: {e.message}",
              file=sys.stderr)
    raise SystemExit(EXIT_PARSE)


def _check(model: Model):
    system = normalize(model)
    if system.has_integers:
        return check_feasible_milp(system)
    return check_feasible(system)


def _solve_objective(model: Model):
    """Optimal value of the model's own objective; max is negated in and out."""
    system = normalize(model)
    values = model.param_values()
    sign = -1 if model.objective.sense == "max" else 1
    objective = {var: sign * coeff.evaluate(values)
                 for var, coeff in model.objective.terms}
    if system.has_integers:
        outcome = solve_milp(system, objective)
    else:
        outcome = solve_lp(system, objective)
    if isinstance(outcome, Optimal):
        return sign * outcome.value, outcome.point
    return None, None  # unbounded (feasibility was already established)


def cmd_check(args) -> int:
    model = _load(args.file)
    verdict = _check(model)
    feasible = isinstance(verdict, Feasible)
    value = point = None
    if feasible and model.objective is not None:
        value, point = _solve_objective(model)
    if args.json:
        payload = {"feasible": feasible}
        if feasible:
            payload["point"] = point_payload(point if point is not None
                                             else verdict.point)
            payload["objective"] = None if value is None else format_rational(value)
        print(json.dumps(payload, indent=2))
    else:
        if not feasible:
            print("infeasible")
        elif model.objective is None:
            print("feasible")
        elif value is None:
            print("feasible (objective unbounded)")
        else:
            print(f"feasible, optimal objective {format_rational(value)}")
    return EXIT_OK if feasible else EXIT_INFEASIBLE


def cmd_iis(args) -> int:
    model = _load(args.file)
    system = normalize(model)
    oracle = ORACLE_MILP if system.has_integers else ORACLE_LP
    try:
        if args.method == "deletion":
            results = [deletion_filter(system, oracle=oracle)]
        elif args.method == "additive":
            results = [additive_method(system, oracle=oracle)]
        elif args.method == "enumerate":
            results = sorted(enumerate_iis_lp(system),
                             key=lambda r: sorted(r.rows))
            if not results:
                print("the model is feasible; no conflict to enumerate",
                      file=sys.stderr)
                return EXIT_INFEASIBLE
        else:  # all
            results = [deletion_filter(system, oracle=oracle),
                       additive_method(system, oracle=oracle)]
            if not system.has_integers:
                results.extend(sorted(enumerate_iis_lp(system),
                                      key=lambda r: sorted(r.rows)))
    except NotInfeasible:
        print("the model is feasible; no conflict to isolate", file=sys.stderr)
        return EXIT_INFEASIBLE
    if args.json:
        print(json.dumps([iis_payload(r) for r in results], indent=2))
    else:
        for r in results:
            print(f"[{r.method}] {', '.join(sorted(r.members))} "
                  f"({r.solver_calls} solver calls)")
    return EXIT_OK


def cmd_repair(args) -> int:
    model = _load(args.file)
    params = [p for p in args.params.split(",") if p]
    try:
        plan = solve_repair(model, RepairSpec(frozenset(params), args.mode))
    except UnknownParam as e:
        print(f"unknown parameter(s): {e}", file=sys.stderr)
        return EXIT_USAGE
    except NonlinearRepairUnsupported as e:
        print(str(e), file=sys.stderr)
        return EXIT_INFEASIBLE
    except Unrepairable as e:
        print(str(e), file=sys.stderr)
        return EXIT_INFEASIBLE
    recs = explain_deltas(model, plan)
    if args.json:
        print(json.dumps(plan_payload(plan, recs), indent=2))
    else:
        print(f"status: {plan.status}, total change: {plan.total}")
        for r in recs:
            print(f"  {r.phrase}")
    if args.apply:
        if plan.status == STATUS_REPAIRED and plan.mode != MODE_TIED:
            print("entry-mode plans are report-only; use --mode tied to apply",
                  file=sys.stderr)
            return EXIT_USAGE
        repaired = apply_repair(model, plan)
        Path(args.apply).write_text(serialize(repaired, FORMAT_TEXT))
        print(f"wrote repaired model to {args.apply}", file=sys.stderr)
    return EXIT_OK


def cmd_describe(args) -> int:
    model = _load(args.file)
    if args.json:
        print(json.dumps({"keys": keys_payload(list_keys(model))}, indent=2))
        return EXIT_OK
    if args.live:
        print(_live_text("T1", model), end="")
        return EXIT_OK
    print(render_fallback("T1", model))
    return EXIT_OK


def cmd_diagnose(args) -> int:
    model = _load(args.file)
    system = normalize(model)
    oracle = ORACLE_MILP if system.has_integers else ORACLE_LP
    try:
        result = deletion_filter(system, oracle=oracle)
    except NotInfeasible:
        print("the model is feasible; nothing to diagnose", file=sys.stderr)
        return EXIT_INFEASIBLE
    context = PromptContext(iis=result)
    if args.json:
        print(json.dumps({"iis": iis_payload(result),
                          **candidates_payload(model, result)}, indent=2))
        return EXIT_OK
    if args.live:
        print(_live_text("T2", model, context), end="")
        return EXIT_OK
    print(render_fallback("T2", model, context))
    print()
    print(render_fallback("T3", model, context))
    return EXIT_OK


def _live_text(task: str, model: Model, context=None) -> str:
    """One live completion over the task prompt; falls back loudly on mock."""
    from .agent.client import MockClient, complete
    from .agent.prompts import build_prompt

    client = client_from_env()
    bundle = build_prompt(task, model, context)
    if isinstance(client, MockClient):
        print("WORKBENCH_LLM_URL not set; using the offline renderer",
              file=sys.stderr)
        return render_fallback(task, model, context) + "\n"
    reply = complete(client, [{"role": "user", "content": bundle.render()}], [])
    return (reply if isinstance(reply, str) else json.dumps(reply.__dict__)) + "\n"


def cmd_chat(args) -> int:
    model = _load(args.file)
    session = new_session(model, client=client_from_env())
    print(f"chatting about {model.name!r} ({session.llm_mode} mode); "
          "empty line or 'exit' quits", file=sys.stderr)
    while True:
        try:
            line = input("> ")
        except EOFError:
            break
        if not line.strip() or line.strip() == "exit":
            break
        try:
            reply, session = chat_turn(session, line)
        except NodeBudgetExceeded as e:
            print(f"solver budget exhausted: {e}", file=sys.stderr)
            return EXIT_BUDGET
        print(reply)
    return EXIT_OK


def cmd_serve(args) -> int:
    from . import service

    argv = []
    if args.port is not None:
        argv += ["--port", str(args.port)]
    if args.data_dir is not None:
        argv += ["--data-dir", args.data_dir]
    return service.main(argv)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modelmend",
                                     description="diagnose and repair infeasible models")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="feasibility verdict")
    p.add_argument("file")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("iis", help="isolate the conflict set")
    p.add_argument("file")
    p.add_argument("--method", choices=["deletion", "additive", "enumerate", "all"],
                   default="deletion")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_iis)

    p = sub.add_parser("repair", help="minimal-slack repair")
    p.add_argument("file")
    p.add_argument("--params", required=True, help="comma-separated parameter names")
    p.add_argument("--mode", choices=[MODE_TIED, MODE_ENTRY], default=MODE_TIED)
    p.add_argument("--apply", metavar="OUT", help="write the repaired model here")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_repair)

    p = sub.add_parser("describe", help="model analysis text")
    p.add_argument("file")
    p.add_argument("--live", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_describe)

    p = sub.add_parser("diagnose", help="infeasibility diagnosis text")
    p.add_argument("file")
    p.add_argument("--live", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_diagnose)

    p = sub.add_parser("chat", help="terminal REPL over the agent")
    p.add_argument("file")
    p.set_defaults(fn=cmd_chat)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--data-dir", default=None)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else 0
    try:
        return args.fn(args)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    except NodeBudgetExceeded as e:
        print(f"solver budget exhausted: {e}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
